//! End-to-end runs of the binary: file outputs, exit codes, manifests,
//! and reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mmspectra::mmspace::MassPolicy;
use mmspectra::{io, MmSpace};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmspectra"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_two_point(dir: &Path, name: &str, masses: (f64, f64), d: f64) -> String {
    let path = dir.join(name);
    fs::write(
        &path,
        format!(
            r#"{{"dist": [[0, {d}], [{d}, 0]], "mass": [{}, {}]}}"#,
            masses.0, masses.1
        ),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn spectrum_at_fixed_rho() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_two_point(dir.path(), "two.json", (0.75, 0.25), 1.0);
    let out = dir.path().join("run");
    let result = run(&["spectrum", &input, "--rho", "1.5", "--out", out.to_str().unwrap()]);
    assert_success(&result);
    let csv = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(csv.trim(), "0,0.375");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "spectrum");
    assert_eq!(manifest["rho"], 1.5);
}

#[test]
fn sweep_writes_curve_with_expected_breakpoints() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("line.csv");
    fs::write(&input, "x1\n0\n1\n4\n10\n12\n17\n").unwrap();
    let out = dir.path().join("run");
    let result = run(&[
        "spectrum",
        input.to_str().unwrap(),
        "--sweep",
        "--svg",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&result);
    let curve = io::read_curve_json(out.join("curve.json")).unwrap();
    assert_eq!(
        curve.breakpoints,
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 16.0, 17.0]
    );
    assert!(out.join("curve.svg").exists());
    assert!(out.join("curve.csv").exists());

    // the JSON round trip is lossless: writing the parsed curve again
    // reproduces the file byte-for-byte
    let rewritten = dir.path().join("rewritten.json");
    io::write_curve_json(&curve, &rewritten).unwrap();
    assert_eq!(
        fs::read_to_string(out.join("curve.json")).unwrap(),
        fs::read_to_string(&rewritten).unwrap()
    );

    // and the parsed values are bit-equal to an in-process sweep
    let (coords, _) = io::read_points_csv(&input).unwrap();
    let space = MmSpace::from_points(&coords, &MassPolicy::uniform()).unwrap();
    let expected = mmspectra::spectrum::sweep(&space, false).unwrap();
    for (a, b) in curve.spectra.iter().zip(&expected.spectra) {
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let result = run(&[
        "spectrum",
        "no-such-file.json",
        "--rho",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn invalid_space_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    fs::write(&input, r#"{"dist": [[0, 1], [2, 0]], "mass": [0.5, 0.5]}"#).unwrap();
    let out = dir.path().join("run");
    let result = run(&[
        "spectrum",
        input.to_str().unwrap(),
        "--rho",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("asymmetry"), "stderr: {stderr}");
}

#[test]
fn distance_zero_for_identical_and_positive_for_isospectral_pair() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_two_point(dir.path(), "a.json", (0.75, 0.25), 1.0);
    let b = write_two_point(dir.path(), "b.json", (0.75, 0.25), 1.0);
    let out = dir.path().join("same");
    let result = run(&["distance", &a, &b, "--out", out.to_str().unwrap()]);
    assert_success(&result);
    let matrix = fs::read_to_string(out.join("distance_matrix.csv")).unwrap();
    let row = matrix.lines().nth(1).unwrap();
    assert_eq!(row, "a,0,0");

    // the four-point pair with equal distance multisets separates
    let r2 = 2f64.sqrt();
    let r10 = 10f64.sqrt();
    let tri = dir.path().join("tri.json");
    fs::write(
        &tri,
        format!(
            r#"{{"dist": [[0,{r10},4,{r10}],[{r10},0,{r2},2],[4,{r2},0,{r2}],[{r10},2,{r2},0]], "mass": [0.25,0.25,0.25,0.25]}}"#
        ),
    )
    .unwrap();
    let path = dir.path().join("path.json");
    fs::write(
        &path,
        format!(
            r#"{{"dist": [[0,2,{r10},{r2}],[2,0,{r2},{r10}],[{r10},{r2},0,4],[{r2},{r10},4,0]], "mass": [0.25,0.25,0.25,0.25]}}"#
        ),
    )
    .unwrap();
    let out = dir.path().join("pair");
    let result = run(&[
        "distance",
        tri.to_str().unwrap(),
        path.to_str().unwrap(),
        "--svg",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&result);
    let matrix = fs::read_to_string(out.join("distance_matrix.csv")).unwrap();
    let cell: f64 = matrix
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(cell > 1e-3);
    assert!(out.join("mds.csv").exists());
    assert!(out.join("mds.svg").exists());
}

#[test]
fn harmonics_auto_rho_splits_barbell_graph() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("barbell.edges");
    fs::write(
        &input,
        "# two triangles and a bridge\n0 1 1\n0 2 1\n1 2 1\n3 4 1\n3 5 1\n4 5 1\n2 3 5\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let result = run(&[
        "harmonics",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&result);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("harmonics.json")).unwrap()).unwrap();
    let mut sides = [
        report["split"]["positive"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect::<Vec<_>>(),
        report["split"]["negative"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect::<Vec<_>>(),
    ];
    sides.sort();
    assert_eq!(sides, [vec![0, 1, 2], vec![3, 4, 5]]);
    // default q = 0.05 keeps the region to ceil(0.05 * 6) = 1 node (plus ties)
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["q"], 0.05);
}

#[test]
fn harmonics_disconnected_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_two_point(dir.path(), "far.json", (0.5, 0.5), 10.0);
    let out = dir.path().join("run");
    let result = run(&[
        "harmonics",
        &input,
        "--rho",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("2 components"), "stderr: {stderr}");
}

#[test]
fn ssl_propagates_barbell_labels() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("barbell.edges");
    fs::write(
        &input,
        "0 1 1\n0 2 1\n1 2 1\n3 4 1\n3 5 1\n4 5 1\n2 3 5\n",
    )
    .unwrap();
    let labels = dir.path().join("labels.csv");
    fs::write(&labels, "node_index,label\n0,1\n3,-1\n").unwrap();
    let out = dir.path().join("run");
    let result = run(&[
        "ssl",
        input.to_str().unwrap(),
        labels.to_str().unwrap(),
        "--rho",
        "1.5",
        "--tau",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&result);
    let csv = fs::read_to_string(out.join("predictions.csv")).unwrap();
    let predictions: Vec<i64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(predictions, vec![1, 1, 1, -1, -1, -1]);
}

#[test]
fn test_command_is_reproducible_and_saturates_on_shared_data() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("sample");
    fs::create_dir(&sample).unwrap();
    for i in 0..6 {
        write_two_point(
            &sample,
            &format!("s{i}.json"),
            (0.4 + 0.06 * i as f64, 0.5),
            1.0,
        );
    }
    let out1 = dir.path().join("run1");
    let result = run(&[
        "test",
        sample.to_str().unwrap(),
        sample.to_str().unwrap(),
        "--B",
        "100",
        "--seed",
        "5",
        "--out",
        out1.to_str().unwrap(),
    ]);
    assert_success(&result);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("test_report.json")).unwrap()).unwrap();
    assert_eq!(report["raw_statistic"], 0.0);
    assert!(report["p_value"].as_f64().unwrap() > 0.9);
    assert_eq!(report["scaling_mode"], "calibrated");

    let out2 = dir.path().join("run2");
    let result = run(&[
        "test",
        sample.to_str().unwrap(),
        sample.to_str().unwrap(),
        "--B",
        "100",
        "--seed",
        "5",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_success(&result);
    assert_eq!(
        fs::read_to_string(out1.join("test_report.json")).unwrap(),
        fs::read_to_string(out2.join("test_report.json")).unwrap()
    );
}

#[test]
fn test_command_flag_variants() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("sample");
    fs::create_dir(&sample).unwrap();
    for i in 0..4 {
        write_two_point(
            &sample,
            &format!("s{i}.json"),
            (0.4 + 0.08 * i as f64, 0.5),
            1.0,
        );
    }
    let out = dir.path().join("run");
    let result = bin()
        .env("MM_SPECTRA_THREADS", "1")
        .args([
            "test",
            sample.to_str().unwrap(),
            sample.to_str().unwrap(),
            "--B",
            "50",
            "--raw-statistic",
            "--plus-one",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_success(&result);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("test_report.json")).unwrap()).unwrap();
    assert_eq!(report["scaling_mode"], "raw");
    assert_eq!(report["plus_one"], true);
    // shared data with the plus-one estimator: p = (1 + B) / (B + 1) = 1
    assert_eq!(report["p_value"], 1.0);
}

#[test]
fn bands_require_two_curves_and_collapse_on_identical_data() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single");
    fs::create_dir(&single).unwrap();
    write_two_point(&single, "only.json", (0.5, 0.5), 1.0);
    let out = dir.path().join("run");
    let result = run(&[
        "bands",
        single.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));

    let sample = dir.path().join("sample");
    fs::create_dir(&sample).unwrap();
    for i in 0..3 {
        write_two_point(&sample, &format!("s{i}.json"), (0.75, 0.25), 1.0);
    }
    let out = dir.path().join("run2");
    let result = run(&[
        "bands",
        sample.to_str().unwrap(),
        "--which",
        "largest",
        "--svg",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&result);
    let csv = fs::read_to_string(out.join("bands.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[2], fields[3]); // zero-width band
    }
    assert!(out.join("bands.svg").exists());
}
