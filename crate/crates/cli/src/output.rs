//! CSV reports and SVG line plots.

use std::fmt::Write as _;

use mirror_fki::report::Table;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed report: {0}")]
    Malformed(String),
    #[error("plot: {0}")]
    Plot(String),
}

/// Decimal form with 17 significant digits, which round-trips every `f64`.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// `# key: value` metadata lines, one header row, then the rows.
pub fn emit_csv(table: &Table) -> Result<String, OutputError> {
    let mut out = String::new();
    for (k, v) in &table.meta {
        let v = v.replace('\n', " ");
        writeln!(out, "# {k}: {v}").expect("writing to a string");
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format_number(*v)))?;
    }
    let bytes = w.into_inner().map_err(|e| OutputError::Malformed(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is ASCII"));
    Ok(out)
}

pub fn parse_csv(text: &str) -> Result<Table, OutputError> {
    let mut table = Table::default();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(m) = line.strip_prefix("# ") {
            let Some((k, v)) = m.split_once(": ") else {
                return Err(OutputError::Malformed(format!("metadata line without `: `: {line}")));
            };
            table.meta.push((k.to_string(), v.to_string()));
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    table.columns = r.headers()?.iter().map(str::to_string).collect();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| OutputError::Malformed(format!("`{s}` is not a number"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if row.len() != table.columns.len() {
            return Err(OutputError::Malformed("row width differs from the header".into()));
        }
        table.rows.push(row);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Axes {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub annotation: Option<String>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Standalone SVG with one polyline and markers per series.
pub fn emit_svg(series: &[Series], axes: &Axes) -> Result<String, OutputError> {
    if series.is_empty() {
        return Err(OutputError::Plot("no series to plot".into()));
    }
    let mut pts: Vec<Vec<(f64, f64)>> = Vec::with_capacity(series.len());
    for s in series {
        if s.points.is_empty() {
            return Err(OutputError::Plot(format!("series `{}` is empty", s.label)));
        }
        let mut mapped = Vec::with_capacity(s.points.len());
        for (i, &(x, y)) in s.points.iter().enumerate() {
            for (v, log, axis) in [(x, axes.log_x, "x"), (y, axes.log_y, "y")] {
                if !v.is_finite() || (log && v <= 0.0) {
                    return Err(OutputError::Plot(format!(
                        "series `{}` point {i}: {axis} = {v} cannot be drawn on a {} axis",
                        s.label,
                        if log { "log" } else { "linear" }
                    )));
                }
            }
            let tx = if axes.log_x { x.log10() } else { x };
            let ty = if axes.log_y { y.log10() } else { y };
            mapped.push((tx, ty));
        }
        pts.push(mapped);
    }
    let range = |f: fn(&(f64, f64)) -> f64| {
        let (lo, hi) = pts
            .iter()
            .flatten()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(|p| p.0);
    let (y0, y1) = range(|p| p.1);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
    let label = |v: f64, log: bool| {
        let v = if log { 10f64.powf(v) } else { v };
        format!("{v:.3e}")
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&axes.title)).unwrap();
    for (v, anchor_x) in [(x0, LEFT), (x1, LEFT + pw)] {
        writeln!(s, r#"<text x="{anchor_x}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, label(v, axes.log_x)).unwrap();
    }
    for (v, anchor_y) in [(y0, TOP + ph), (y1, TOP)] {
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 4.0, anchor_y + 4.0, label(v, axes.log_y)).unwrap();
    }
    let log_tag = |log: bool| if log { " (log)" } else { "" };
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}{}</text>"#,
        LEFT + pw / 2.0,
        H - 16.0,
        escape(&axes.x_label),
        log_tag(axes.log_x)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&axes.y_label),
        log_tag(axes.log_y)
    )
    .unwrap();
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" ")).unwrap();
        for &(x, y) in p {
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y)).unwrap();
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, LEFT + pw + 8.0, escape(&ser.label)).unwrap();
    }
    if let Some(a) = &axes.annotation {
        writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, LEFT + 8.0, TOP + 16.0, escape(a)).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Series of `y` against `x` from table columns, one per distinct value of `group`.
pub fn series_from_table(table: &Table, x: &str, y: &str, group: Option<&str>) -> Result<Vec<Series>, OutputError> {
    let col = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| OutputError::Plot(format!("table has no column `{name}`")))
    };
    let (xs, ys) = (col(x)?, col(y)?);
    let Some(g) = group else {
        return Ok(vec![Series {
            label: y.to_string(),
            points: xs.into_iter().zip(ys).collect(),
        }]);
    };
    let gs = col(g)?;
    let mut out: Vec<(f64, Series)> = Vec::new();
    for ((x, y), gv) in xs.into_iter().zip(ys).zip(gs) {
        match out.iter_mut().find(|(v, _)| *v == gv) {
            Some((_, s)) => s.points.push((x, y)),
            None => out.push((
                gv,
                Series {
                    label: format!("{g} = {gv}"),
                    points: vec![(x, y)],
                },
            )),
        }
    }
    Ok(out.into_iter().map(|(_, s)| s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE, f64::MAX, 0.0] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
        assert!(format_number(f64::NAN).parse::<f64>().unwrap().is_nan());
        assert_eq!(format_number(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn grouped_series() {
        let mut t = Table::new(&["t", "delta", "lhs"]);
        t.push(vec![1.0, 0.1, 0.2]);
        t.push(vec![2.0, 0.1, 0.3]);
        t.push(vec![1.0, 0.2, 0.4]);
        let s = series_from_table(&t, "delta", "lhs", Some("t")).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].points, vec![(0.1, 0.2), (0.2, 0.4)]);
        assert_eq!(s[1].label, "t = 2");
    }
}
