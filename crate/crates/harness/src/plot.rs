//! Static SVG line charts from metrics CSVs.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Reads `(t, metric)` pairs, skipping `#` comment lines.
pub fn read_series(name: &str, text: &str, metric: &str) -> Result<(Vec<String>, Series)> {
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| HarnessError::Config(format!("{name}: empty CSV")))?
        .split(',')
        .map(str::to_string)
        .collect();
    let col = |c: &str| {
        header
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| HarnessError::Config(format!("{name}: column `{c}` not found")))
    };
    let (tc, mc) = (col("t")?, col(metric)?);
    let mut points = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| {
            f.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| {
                HarnessError::Config(format!("{name}: bad value on data row {}", k + 1))
            })
        };
        points.push((parse(tc)?, parse(mc)?));
    }
    Ok((
        header,
        Series {
            name: name.to_string(),
            points,
        },
    ))
}

fn nice(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One polyline per series. With `log_y`, non-positive values are dropped.
pub fn render_svg(series: &[Series], metric: &str, log_y: bool) -> String {
    let tf = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(_, y)| y.is_finite() && (!log_y || *y > 0.0))
                .map(|&(x, y)| (x, tf(y)))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;
    let label = |y: f64| if log_y { nice(10f64.powf(y)) } else { nice(y) };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            sx(xv),
            b + 16.0,
            nice(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            l - 4.0,
            sy(yv) + 4.0,
            label(yv)
        );
    }
    let scale = if log_y { " (log scale)" } else { "" };
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">t</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-size="13" text-anchor="middle">{}{scale}</text>"#,
        WIDTH / 2.0,
        escape(metric)
    );
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = p
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = t + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            r - 170.0,
            r - 150.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            r - 145.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Charts `metric` from every CSV into `out`. All inputs must share a header.
pub fn plot(csvs: &[PathBuf], metric: &str, out: &Path, log_y: bool) -> Result<()> {
    let mut series = Vec::new();
    let mut schema: Option<Vec<String>> = None;
    for path in csvs {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let name = path.file_stem().map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        let (header, s) = read_series(&name, &text, metric)?;
        match &schema {
            None => schema = Some(header),
            Some(h) if *h != header => {
                let i = (0..).find(|&i| header.get(i) != h.get(i)).unwrap_or(0);
                let col = header.get(i).or(h.get(i)).cloned().unwrap_or_default();
                return Err(HarnessError::Config(format!(
                    "{name}: schema differs from the first CSV at column `{col}`"
                )));
            }
            _ => {}
        }
        series.push(s);
    }
    if series.is_empty() {
        return Err(HarnessError::Config("plot needs at least one CSV".into()));
    }
    let svg = render_svg(&series, metric, log_y);
    std::fs::write(out, svg).map_err(|e| HarnessError::io(out, e))
}
