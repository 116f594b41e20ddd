//! File formats: two-column time-series CSV, generic CSV tables, minimal
//! SVG line charts, and the small flag-argument grammars.

use std::fs;
use std::io::Write;
use std::path::Path;

use twodsys::TimeSeries;

use crate::CliError;

/// Reads a `t,x` CSV with a mandatory header row. Errors name the file and
/// the 1-based line number.
pub fn read_series(path: &Path) -> Result<TimeSeries, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let data = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| data("line 1: empty file, expected a 't,x' header".into()))?;
    let header_text = header.1.trim_start_matches('\u{feff}').trim();
    if header_text != "t,x" {
        return Err(data(format!(
            "line 1: expected header 't,x', got '{}'",
            header.1.trim()
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (t, x) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(x), None) => (t, x),
            _ => {
                return Err(data(format!(
                    "line {}: expected two comma-separated columns, got '{line}'",
                    idx + 1
                )))
            }
        };
        let parse = |field: &str, name: &str| {
            field.trim().parse::<f64>().map_err(|_| {
                data(format!(
                    "line {}: could not parse {name} value '{}'",
                    idx + 1,
                    field.trim()
                ))
            })
        };
        times.push(parse(t, "time")?);
        values.push(parse(x, "signal")?);
    }
    TimeSeries::new(times, values).map_err(CliError::Lib)
}

/// Writes a CSV table to the path, or to stdout when no path is given.
pub fn write_table(
    path: Option<&Path>,
    header: &str,
    rows: impl Iterator<Item = String>,
) -> Result<(), CliError> {
    let mut body = String::with_capacity(4096);
    body.push_str(header);
    body.push('\n');
    for row in rows {
        body.push_str(&row);
        body.push('\n');
    }
    write_output(path, &body)
}

pub fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, content).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

/// "h,s,k,p" and friends: exactly N comma-separated numbers.
pub fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("could not parse number '{}'", part.trim()))?;
    }
    Ok(out)
}

pub fn parse_params(s: &str) -> Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

/// "start:step:end", inclusive of the end point up to rounding.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected start:step:end".into());
    }
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| format!("could not parse number '{}'", p.trim()))
    };
    let (start, step, end) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0 && step.is_finite()) {
        return Err(format!("step must be positive, got {step}"));
    }
    if !(end >= start) {
        return Err(format!("end {end} is before start {start}"));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

/// Minimal static line chart: one polyline, light frame, a caption.
pub fn write_svg(
    path: &Path,
    times: &[f64],
    values: &[f64],
    caption: &str,
) -> Result<(), CliError> {
    const W: f64 = 640.0;
    const H: f64 = 320.0;
    const L: f64 = 45.0;
    const R: f64 = 15.0;
    const T: f64 = 25.0;
    const B: f64 = 35.0;

    let (t0, t1) = (times[0], times[times.len() - 1]);
    let mut lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |t: f64| L + (t - t0) / (t1 - t0) * (W - L - R);
    let y = |v: f64| H - B - (v - lo) / (hi - lo) * (H - T - B);

    let mut points = String::new();
    for (t, v) in times.iter().zip(values) {
        points.push_str(&format!("{:.2},{:.2} ", x(*t), y(*v)));
    }
    let svg = format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" "#,
            r#"viewBox="0 0 {w} {h}">"#,
            "\n",
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            "\n",
            r##"<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="#ccc"/>"##,
            "\n",
            r#"<text x="{l}" y="16" font-family="sans-serif" font-size="12">{caption}</text>"#,
            "\n",
            r#"<text x="{xl}" y="{yb}" font-family="sans-serif" font-size="10">{t0}</text>"#,
            "\n",
            r#"<text x="{xr}" y="{yb}" font-family="sans-serif" font-size="10">{t1}</text>"#,
            "\n",
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1" points="{points}"/>"##,
            "\n</svg>\n"
        ),
        w = W,
        h = H,
        l = L,
        t = T,
        pw = W - L - R,
        ph = H - T - B,
        caption = caption,
        xl = L,
        yb = H - B + 14.0,
        xr = W - R - 30.0,
        t0 = t0,
        t1 = t1,
        points = points.trim_end(),
    );
    fs::write(path, svg).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
