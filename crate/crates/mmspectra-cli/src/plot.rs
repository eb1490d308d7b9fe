//! Minimal SVG emitters for the figure outputs: spectral step plots,
//! MDS scatters, confidence bands, and harmonic overlays.

use std::fmt::Write as _;

use mmspectra::inference::BandPoint;
use mmspectra::SpectralCurve;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        let pad = |lo: &mut f64, hi: &mut f64| {
            if *hi - *lo < 1e-12 {
                *lo -= 0.5;
                *hi += 0.5;
            }
        };
        let (mut x_min, mut x_max, mut y_min, mut y_max) = (x_min, x_max, y_min, y_max);
        pad(&mut x_min, &mut x_max);
        pad(&mut y_min, &mut y_max);
        Frame {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open_svg(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}"><rect width="100%" height="100%" fill="white"/><text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let (x1, y1) = (WIDTH - MARGIN, MARGIN);
    let _ = write!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x_min + t * (f.x_max - f.x_min);
        let yv = f.y_min + t * (f.y_max - f.y_min);
        let xs = f.x(xv);
        let ys = f.y(yv);
        let _ = write!(
            out,
            r#"<line x1="{xs}" y1="{y0}" x2="{xs}" y2="{}" stroke="black"/><text x="{xs}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{xv:.3}</text>"#,
            y0 + 4.0,
            y0 + 18.0
        );
        let _ = write!(
            out,
            r#"<line x1="{}" y1="{ys}" x2="{x0}" y2="{ys}" stroke="black"/><text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{yv:.3}</text>"#,
            x0 - 4.0,
            x0 - 7.0,
            ys + 4.0
        );
    }
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{x_label}</text><text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = write!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        coords.join(" ")
    );
}

/// Step plot of every eigenvalue of a spectral curve as a function of rho.
pub fn curve_svg(curve: &SpectralCurve, title: &str) -> String {
    let k = curve.k();
    let x_max = curve
        .breakpoints
        .last()
        .copied()
        .unwrap_or(1.0)
        * 1.1;
    let y_max = curve
        .spectra
        .iter()
        .map(|s| s.lambda_max())
        .fold(0.0f64, f64::max);
    let f = Frame::new(0.0, x_max, 0.0, y_max * 1.05);
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &f, "rho", "eigenvalue");
    for eigen in 0..k {
        let color = PALETTE[eigen % PALETTE.len()];
        let mut pts = Vec::new();
        let mut x_prev = 0.0;
        for (m, spec) in curve.spectra.iter().enumerate() {
            let v = spec.values[eigen];
            let x_next = curve.breakpoints.get(m).copied().unwrap_or(x_max);
            pts.push((f.x(x_prev), f.y(v)));
            pts.push((f.x(x_next), f.y(v)));
            x_prev = x_next;
        }
        polyline(&mut out, &pts, color);
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of labelled 2-d points (MDS output); colors cycle per group.
pub fn scatter_svg(points: &[(f64, f64)], groups: &[usize], names: &[String], title: &str) -> String {
    let x_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let f = Frame::new(x_min, x_max, y_min, y_max);
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &f, "x1", "x2");
    for (i, &(x, y)) in points.iter().enumerate() {
        let color = PALETTE[groups.get(i).copied().unwrap_or(0) % PALETTE.len()];
        let _ = write!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}" fill-opacity="0.8"><title>{}</title></circle>"#,
            f.x(x),
            f.y(y),
            names.get(i).map(String::as_str).unwrap_or("")
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Mean line plus shaded confidence band.
pub fn bands_svg(bands: &[BandPoint], title: &str) -> String {
    let x_min = bands.first().map_or(0.0, |b| b.rho);
    let x_max = bands.last().map_or(1.0, |b| b.rho);
    let y_max = bands.iter().map(|b| b.upper).fold(0.0f64, f64::max);
    let f = Frame::new(x_min, x_max, 0.0, y_max * 1.05);
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &f, "rho", "eigenvalue");
    let mut shade: Vec<String> = bands
        .iter()
        .map(|b| format!("{:.2},{:.2}", f.x(b.rho), f.y(b.upper)))
        .collect();
    shade.extend(
        bands
            .iter()
            .rev()
            .map(|b| format!("{:.2},{:.2}", f.x(b.rho), f.y(b.lower))),
    );
    let _ = write!(
        out,
        r#"<polygon points="{}" fill="{}" fill-opacity="0.25" stroke="none"/>"#,
        shade.join(" "),
        PALETTE[0]
    );
    let mean: Vec<(f64, f64)> = bands.iter().map(|b| (f.x(b.rho), f.y(b.mean))).collect();
    polyline(&mut out, &mean, PALETTE[0]);
    out.push_str("</svg>\n");
    out
}

/// Node overlay for harmonic reports: sign of the Fiedler entry colors each
/// node, the sign-change region gets a ring.
pub fn overlay_svg(
    coords: &[(f64, f64)],
    vector: &[f64],
    sign_region: &[usize],
    title: &str,
) -> String {
    let x_min = coords.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = coords.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_min = coords.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_max = coords.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let f = Frame::new(x_min, x_max, y_min, y_max);
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &f, "x", "y");
    let in_region: std::collections::HashSet<usize> = sign_region.iter().copied().collect();
    for (i, &(x, y)) in coords.iter().enumerate() {
        let color = if vector[i] >= 0.0 { PALETTE[1] } else { PALETTE[0] };
        let (cx, cy) = (f.x(x), f.y(y));
        let _ = write!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="{color}" fill-opacity="0.85"/>"#
        );
        if in_region.contains(&i) {
            let _ = write!(
                out,
                r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="7" fill="none" stroke="#2ca02c" stroke-width="2"/>"##
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
