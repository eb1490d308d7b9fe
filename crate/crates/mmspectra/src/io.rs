//! File formats: JSON mm-spaces (with an `"inf"` string for the
//! disconnected sentinel), CSV point clouds, edge lists, and the CSV/JSON
//! exports used by the command-line tools.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::BandPoint;
use crate::mmspace::{MassPolicy, MmSpace};
use crate::signatures::{DoD, LocalDoD, MdsResult, SignatureDistanceMatrix};
use crate::spectrum::{SpectralCurve, Spectrum};
use crate::ssl::SslSolution;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

/// A distance entry that may be the infinity sentinel.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DistEntry {
    Num(f64),
    Str(String),
}

impl DistEntry {
    fn to_f64(&self) -> Result<f64> {
        match self {
            DistEntry::Num(x) => Ok(*x),
            DistEntry::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                other => Err(Error::Parse(format!("bad distance entry {other:?}"))),
            },
        }
    }

    fn from_f64(x: f64) -> Self {
        if x.is_infinite() && x > 0.0 {
            DistEntry::Str("inf".to_string())
        } else {
            DistEntry::Num(x)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MmSpaceFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    dist: Vec<Vec<DistEntry>>,
    mass: Vec<f64>,
}

pub fn read_mm_space_json<P: AsRef<Path>>(path: P) -> Result<MmSpace> {
    let mut text = String::new();
    BufReader::new(open(path.as_ref())?).read_to_string(&mut text)?;
    let file: MmSpaceFile = serde_json::from_str(&text)?;
    let rows = file.dist.len();
    let mut dist = Vec::with_capacity(rows);
    for row in &file.dist {
        let parsed: Result<Vec<f64>> = row.iter().map(DistEntry::to_f64).collect();
        dist.push(parsed?);
    }
    let mut space = MmSpace::from_raw(dist, file.mass)?;
    if let Some(labels) = file.labels {
        space = space.with_labels(labels)?;
    }
    Ok(space)
}

pub fn write_mm_space_json<P: AsRef<Path>>(space: &MmSpace, path: P) -> Result<()> {
    let k = space.node_count();
    let file = MmSpaceFile {
        labels: space.labels().map(|l| l.to_vec()),
        dist: (0..k)
            .map(|i| (0..k).map(|j| DistEntry::from_f64(space.dist()[(i, j)])).collect())
            .collect(),
        mass: space.mass().iter().copied().collect(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Point-cloud CSV: one row per point. With a header row, every column is a
/// coordinate except an optional one named `mass`; without a header all
/// fields are coordinates.
pub fn read_points_csv<P: AsRef<Path>>(path: P) -> Result<(DMatrix<f64>, Option<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(open(path.as_ref())?);
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::Parse("empty point-cloud file".to_string()));
    }
    let first = &records[0];
    let headerless = first.iter().all(|f| f.parse::<f64>().is_ok());
    type Layout<'a> = (Option<usize>, Vec<usize>, &'a [csv::StringRecord]);
    let (mass_col, coord_cols, data_rows): Layout =
        if headerless {
            (None, (0..first.len()).collect(), &records[..])
        } else {
            let mass_col = first
                .iter()
                .position(|h| h.eq_ignore_ascii_case("mass"));
            let coord_cols = (0..first.len()).filter(|&c| Some(c) != mass_col).collect();
            (mass_col, coord_cols, &records[1..])
        };
    if data_rows.is_empty() {
        return Err(Error::Parse("point-cloud file has no data rows".to_string()));
    }
    let n = data_rows.len();
    let d = coord_cols.len();
    let mut coords = DMatrix::zeros(n, d);
    let mut masses = mass_col.map(|_| Vec::with_capacity(n));
    for (r, record) in data_rows.iter().enumerate() {
        for (c, &col) in coord_cols.iter().enumerate() {
            let field = record.get(col).ok_or_else(|| {
                Error::Parse(format!("row {} is missing column {}", r + 1, col))
            })?;
            coords[(r, c)] = field
                .parse()
                .map_err(|_| Error::Parse(format!("bad coordinate {field:?} in row {}", r + 1)))?;
        }
        if let (Some(ms), Some(col)) = (&mut masses, mass_col) {
            let field = record
                .get(col)
                .ok_or_else(|| Error::Parse(format!("row {} is missing its mass", r + 1)))?;
            ms.push(field.parse().map_err(|_| {
                Error::Parse(format!("bad mass {field:?} in row {}", r + 1))
            })?);
        }
    }
    Ok((coords, masses))
}

/// Parsed edge list together with the inferred node count.
pub type EdgeList = (Vec<(usize, usize, f64)>, usize);

/// Edge-list file: lines `i j length` with 0-based indices; `#` starts a
/// comment. The node count is the largest index plus one.
pub fn read_edge_list<P: AsRef<Path>>(path: P) -> Result<EdgeList> {
    let mut text = String::new();
    BufReader::new(open(path.as_ref())?).read_to_string(&mut text)?;
    let mut edges = Vec::new();
    let mut max_node = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected `i j length`, got {raw:?}",
                lineno + 1
            )));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad index {:?}", lineno + 1, fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad index {:?}", lineno + 1, fields[1])))?;
        let len: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad length {:?}", lineno + 1, fields[2])))?;
        max_node = max_node.max(i).max(j);
        edges.push((i, j, len));
    }
    if edges.is_empty() {
        return Err(Error::Parse("edge-list file has no edges".to_string()));
    }
    Ok((edges, max_node + 1))
}

/// Input dispatch for the command-line tools: `.json` mm-space files,
/// `.csv` point clouds, and anything else as an edge list.
pub fn read_space<P: AsRef<Path>>(path: P, policy: &MassPolicy) -> Result<MmSpace> {
    let ext = path
        .as_ref()
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "json" => read_mm_space_json(path),
        "csv" => {
            let (coords, masses) = read_points_csv(path)?;
            let policy = match masses {
                Some(masses) => MassPolicy::Explicit { masses },
                None => policy.clone(),
            };
            MmSpace::from_points(&coords, &policy)
        }
        _ => {
            let (edges, n_nodes) = read_edge_list(path)?;
            MmSpace::from_graph(&edges, n_nodes, policy)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CurveFile {
    breakpoints: Vec<f64>,
    spectra: Vec<Vec<f64>>,
}

pub fn write_curve_json<P: AsRef<Path>>(curve: &SpectralCurve, path: P) -> Result<()> {
    let file = CurveFile {
        breakpoints: curve.breakpoints.clone(),
        spectra: curve.spectra.iter().map(|s| s.values.clone()).collect(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_curve_json<P: AsRef<Path>>(path: P) -> Result<SpectralCurve> {
    let mut text = String::new();
    BufReader::new(open(path.as_ref())?).read_to_string(&mut text)?;
    let file: CurveFile = serde_json::from_str(&text)?;
    if file.spectra.len() != file.breakpoints.len() + 1 {
        return Err(Error::Parse(format!(
            "curve file needs {} spectra for {} breakpoints, got {}",
            file.breakpoints.len() + 1,
            file.breakpoints.len(),
            file.spectra.len()
        )));
    }
    Ok(SpectralCurve {
        breakpoints: file.breakpoints,
        spectra: file
            .spectra
            .into_iter()
            .map(|values| Spectrum {
                values,
                vectors: None,
            })
            .collect(),
    })
}

/// One row per (interval, eigenvalue index).
pub fn write_curve_csv<P: AsRef<Path>>(curve: &SpectralCurve, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "interval,rho_lower,rho_upper,eigen_index,value")?;
    for (m, spec) in curve.spectra.iter().enumerate() {
        let lower = if m == 0 { 0.0 } else { curve.breakpoints[m - 1] };
        let upper = curve
            .breakpoints
            .get(m)
            .map_or("inf".to_string(), |b| format!("{b}"));
        for (k, v) in spec.values.iter().enumerate() {
            writeln!(w, "{m},{lower},{upper},{},{v}", k + 1)?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SpectrumFile {
    rho: f64,
    values: Vec<f64>,
}

pub fn write_spectrum_json<P: AsRef<Path>>(spec: &Spectrum, rho: f64, path: P) -> Result<()> {
    let file = SpectrumFile {
        rho,
        values: spec.values.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_spectrum_json<P: AsRef<Path>>(path: P) -> Result<(Spectrum, f64)> {
    let mut text = String::new();
    BufReader::new(open(path.as_ref())?).read_to_string(&mut text)?;
    let file: SpectrumFile = serde_json::from_str(&text)?;
    Ok((
        Spectrum {
            values: file.values,
            vectors: None,
        },
        file.rho,
    ))
}

/// The spectrum as a single CSV row of ascending eigenvalues.
pub fn write_spectrum_csv<P: AsRef<Path>>(spec: &Spectrum, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let row: Vec<String> = spec.values.iter().map(|v| format!("{v}")).collect();
    writeln!(w, "{}", row.join(","))?;
    Ok(())
}

/// Distance matrix with a leading name column.
pub fn write_distance_matrix_csv<P: AsRef<Path>>(
    d: &SignatureDistanceMatrix,
    names: &[String],
    path: P,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = std::iter::once("name".to_string())
        .chain(names.iter().cloned())
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, name) in names.iter().enumerate().take(d.n()) {
        let mut row = vec![name.clone()];
        row.extend((0..d.n()).map(|j| format!("{}", d.matrix[(i, j)])));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_mds_csv<P: AsRef<Path>>(mds: &MdsResult, names: &[String], path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let dims = mds.coords.ncols();
    let header: Vec<String> = std::iter::once("name".to_string())
        .chain((1..=dims).map(|d| format!("x{d}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, name) in names.iter().enumerate().take(mds.coords.nrows()) {
        let mut row = vec![name.clone()];
        row.extend((0..dims).map(|d| format!("{}", mds.coords[(i, d)])));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_bands_csv<P: AsRef<Path>>(bands: &[BandPoint], path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "rho,mean,lower,upper")?;
    for b in bands {
        writeln!(w, "{},{},{},{}", b.rho, b.mean, b.lower, b.upper)?;
    }
    Ok(())
}

/// Labels CSV `node_index,label` (header optional).
pub fn read_labels_csv<P: AsRef<Path>>(path: P) -> Result<BTreeMap<usize, i8>> {
    let mut text = String::new();
    BufReader::new(open(path.as_ref())?).read_to_string(&mut text)?;
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected `node_index,label`",
                lineno + 1
            )));
        }
        if lineno == 0 && fields[0].parse::<usize>().is_err() {
            continue; // header
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad node index", lineno + 1)))?;
        let label: i8 = fields[1]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad label", lineno + 1)))?;
        out.insert(index, label);
    }
    if out.is_empty() {
        return Err(Error::Parse("labels file has no entries".to_string()));
    }
    Ok(out)
}

pub fn write_predictions_csv<P: AsRef<Path>>(solution: &SslSolution, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "node_index,score,prediction")?;
    for (j, (&score, &pred)) in solution
        .scores
        .iter()
        .zip(solution.predictions.iter())
        .enumerate()
    {
        writeln!(w, "{j},{score},{pred}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DodFile<'a> {
    t: &'a [f64],
    cdf: &'a [f64],
    total: f64,
}

pub fn write_dod_json<P: AsRef<Path>>(d: &DoD, path: P) -> Result<()> {
    let t: Vec<f64> = d.support().collect();
    let cdf: Vec<f64> = t.iter().map(|&x| d.eval(x)).collect();
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(
        &mut w,
        &DodFile {
            t: &t,
            cdf: &cdf,
            total: d.total,
        },
    )?;
    w.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct LocalDodNode {
    t: Vec<f64>,
    h: Vec<f64>,
}

pub fn write_local_dod_json<P: AsRef<Path>>(h: &LocalDoD, space: &MmSpace, path: P) -> Result<()> {
    let k = h.node_count();
    let nodes: Vec<LocalDodNode> = (0..k)
        .map(|j| {
            let mut t: Vec<f64> = (0..k)
                .map(|l| space.dist()[(j, l)])
                .filter(|d| d.is_finite())
                .collect();
            t.sort_by(|a, b| a.partial_cmp(b).unwrap());
            t.dedup();
            let hv = t.iter().map(|&x| h.eval(j, x)).collect();
            LocalDodNode { t, h: hv }
        })
        .collect();
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &nodes)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Masses as a vector for explicit-mass construction from CSV point clouds.
pub fn masses_to_vector(masses: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(masses)
}
