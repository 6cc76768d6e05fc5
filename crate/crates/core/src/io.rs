//! CSV, SVG and manifest writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::plant::Trajectory;

/// Significant digits of every floating-point field.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Shortest decimal text of `v` rounded to 12 significant digits, in
/// exponent form outside `[1e-4, 1e15)`.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let a = rounded.abs();
    if !(1e-4..1e15).contains(&a) {
        return format!("{rounded:e}");
    }
    format!("{rounded}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

/// Column names of the trajectory file.
pub fn trajectory_header(traj: &Trajectory) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    if traj.meta.compact {
        h.extend(traj.meta.channel_names.iter().cloned());
    } else {
        h.push("u".into());
        let p = traj.records.first().map_or(0, |r| r.y.len());
        h.extend((1..=p).map(|i| format!("y_{i}")));
    }
    h.extend(
        ["e_active", "i_star", "theta_1", "theta_2", "alpha", "J", "J_star"]
            .map(String::from),
    );
    h
}

/// Columns every trajectory file must contain.
pub const REQUIRED_COLUMNS: [&str; 9] = [
    "t", "u", "e_active", "i_star", "theta_1", "theta_2", "alpha", "J", "J_star",
];

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(trajectory_header(traj)).map_err(|e| csv_error(path, e))?;
    let mut row = Vec::new();
    for r in &traj.records {
        row.clear();
        row.push(r.t.to_string());
        if traj.meta.compact {
            row.extend(r.channels.iter().map(|&v| fmt_num(v)));
        } else {
            row.push(fmt_num(r.u));
            row.extend(r.y.iter().map(|&v| fmt_num(v)));
        }
        row.push(fmt_num(r.e_active()));
        row.push((r.i_star + 1).to_string());
        row.push(fmt_opt(r.theta.map(|t| t[0])));
        row.push(fmt_opt(r.theta.map(|t| t[1])));
        row.push(fmt_opt(r.alpha));
        row.push(fmt_num(r.j));
        row.push(fmt_opt(r.j_star));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-step model channels (`t` followed by the channel names).
pub fn write_channels_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(traj.meta.channel_names.iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in &traj.records {
        let mut row = vec![r.t.to_string()];
        row.extend(r.channels.iter().map(|&v| fmt_num(v)));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `t, u, y_1..y_p` with every plant output, also for compact-logged models.
pub fn write_outputs_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let p = traj.records.first().map_or(0, |r| r.y.len());
    let mut header = vec!["t".to_string(), "u".to_string()];
    for i in 0..p {
        match traj.meta.output_labels.get(i) {
            Some(l) if !l.is_empty() && !header.contains(l) => header.push(l.clone()),
            _ => header.push(format!("y_{}", i + 1)),
        }
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in &traj.records {
        let mut row = vec![r.t.to_string(), fmt_num(r.u)];
        row.extend(r.y.iter().map(|&v| fmt_num(v)));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `t, u_free, u_oracle, gap` with `gap = u_free - u_oracle`.
pub fn write_gap_csv(free: &Trajectory, oracle: &Trajectory, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "u_free", "u_oracle", "gap"])
        .map_err(|e| csv_error(path, e))?;
    for (a, b) in free.records.iter().zip(&oracle.records) {
        w.write_record([
            a.t.to_string(),
            fmt_num(a.u),
            fmt_num(b.u),
            fmt_num(a.u - b.u),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a header and rows of already formatted fields.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A CSV file read back as numbers; empty fields become `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn missing_columns(&self, required: &[&str]) -> Vec<String> {
        required
            .iter()
            .filter(|c| self.column(c).is_none())
            .map(|c| c.to_string())
            .collect()
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse().map(Some).map_err(|_| Error::Format {
                        path: path.to_path_buf(),
                        detail: format!("row {}: {f:?} is not a number", line + 2),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

/// `key = value` lines, in the given order.
pub fn write_manifest(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        let _ = writeln!(text, "{k} = {v}");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Current,
    Voltage,
    Temperature,
    Soc,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Self::Current, Self::Voltage, Self::Temperature, Self::Soc];

    pub fn name(self) -> &'static str {
        match self {
            Self::Current => "current",
            Self::Voltage => "voltage",
            Self::Temperature => "temperature",
            Self::Soc => "soc",
        }
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            Self::Current => "current [A]",
            Self::Voltage => "voltage [V]",
            Self::Temperature => "temperature [°C]",
            Self::Soc => "state of charge [-]",
        }
    }

    /// Channel names that carry this quantity, in plotting order.
    fn channels(self) -> &'static [&'static str] {
        match self {
            Self::Current => &[],
            Self::Voltage => &["V", "V_pack"],
            Self::Temperature => &["T", "T_max", "T_min"],
            Self::Soc => &["SOC"],
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|q| q.name() == name).ok_or_else(|| {
            let valid: Vec<_> = Self::ALL.iter().map(|q| q.name()).collect();
            Error::config(format!(
                "unknown plot quantity {name:?}; valid names: {}",
                valid.join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    ModelFree,
    Oracle,
    Ensemble,
}

impl SeriesStyle {
    fn stroke(self) -> (&'static str, &'static str, &'static str) {
        // colour, width, opacity
        match self {
            Self::ModelFree => ("#1f77b4", "1.6", "1"),
            Self::Oracle => ("#d62728", "1.6", "1"),
            Self::Ensemble => ("#9a9a9a", "0.6", "0.5"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub style: SeriesStyle,
    pub values: Vec<f64>,
    /// Dashed lines distinguish several channels of one run.
    pub dashed: bool,
}

/// Series for `quantity` from one trajectory; several channels give
/// several series.
pub fn trajectory_series(
    traj: &Trajectory,
    quantity: Quantity,
    label: &str,
    style: SeriesStyle,
) -> Result<Vec<Series>> {
    if quantity == Quantity::Current {
        return Ok(vec![Series {
            label: label.to_string(),
            style,
            values: traj.currents(),
            dashed: false,
        }]);
    }
    channel_series(&traj.meta.channel_names, quantity, label, style, |k| {
        traj.records.iter().map(|r| r.channels[k]).collect()
    })
    .ok_or_else(|| {
        Error::config(format!(
            "quantity {} is not available for model {}",
            quantity.name(),
            traj.meta.model
        ))
    })
}

/// Series from raw per-step channel rows.
pub fn channel_rows_series(
    names: &[String],
    rows: &[Vec<f64>],
    quantity: Quantity,
    label: &str,
    style: SeriesStyle,
) -> Option<Vec<Series>> {
    channel_series(names, quantity, label, style, |k| rows.iter().map(|r| r[k]).collect())
}

fn channel_series(
    names: &[String],
    quantity: Quantity,
    label: &str,
    style: SeriesStyle,
    values: impl Fn(usize) -> Vec<f64>,
) -> Option<Vec<Series>> {
    let found: Vec<(usize, &str)> = quantity
        .channels()
        .iter()
        .filter_map(|c| names.iter().position(|n| n == c).map(|k| (k, *c)))
        .collect();
    if found.is_empty() {
        return None;
    }
    let many = found.len() > 1;
    Some(
        found
            .iter()
            .enumerate()
            .map(|(j, (k, c))| Series {
                label: if many { format!("{label} {c}") } else { label.to_string() },
                style,
                values: values(*k),
                dashed: j > 0,
            })
            .collect(),
    )
}

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 34.0;
const BOTTOM: f64 = 52.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + step * 1e-9 {
        out.push(if v.abs() < step * 1e-9 { 0.0 } else { v });
        v += step;
    }
    out
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// Standalone SVG line chart. Ensemble series are drawn first and share a
/// single legend entry.
pub fn render_svg(title: &str, quantity: Quantity, series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.values.is_empty()) {
        return Err(Error::config("nothing to plot"));
    }
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(1);
    let finite = series.iter().flat_map(|s| s.values.iter()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x_hi = (n.max(2) - 1) as f64;
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + pw * t / x_hi;
    let sy = |v: f64| TOP + ph * (1.0 - (v - lo) / (hi - lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    for v in ticks(lo, hi) {
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    for t in ticks(0.0, x_hi) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">time step [-]</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(quantity.axis_label())
    );

    let ordered = series
        .iter()
        .filter(|x| x.style == SeriesStyle::Ensemble)
        .chain(series.iter().filter(|x| x.style != SeriesStyle::Ensemble));
    for ser in ordered {
        let (color, width, opacity) = ser.style.stroke();
        let mut pts = String::new();
        for (t, v) in ser.values.iter().enumerate() {
            if v.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(t as f64), sy(*v));
            }
        }
        let dash = if ser.dashed { r#" stroke-dasharray="5 3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}"{dash} points="{}"/>"#,
            pts.trim_end()
        );
    }

    let mut legend: Vec<(&str, SeriesStyle, bool)> = Vec::new();
    if let Some(e) = series.iter().find(|x| x.style == SeriesStyle::Ensemble) {
        legend.push((e.label.as_str(), e.style, false));
    }
    for ser in series.iter().filter(|x| x.style != SeriesStyle::Ensemble) {
        legend.push((ser.label.as_str(), ser.style, ser.dashed));
    }
    let lx = LEFT + pw + 14.0;
    for (k, (label, style, dashed)) in legend.iter().enumerate() {
        let y = TOP + 12.0 + 18.0 * k as f64;
        let (color, _, _) = style.stroke();
        let dash = if *dashed { r#" stroke-dasharray="5 3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            y + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(56.3739), "56.3739");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(-2.5e-13), "-2.5e-13");
        assert_eq!(fmt_num(7.099748146991234e-26), "7.09974814699e-26");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(123456789012345.0), "123456789012000");
        assert_eq!(fmt_num(2.0e20), "2e20");
    }

    #[test]
    fn quantity_names_parse_and_errors_list_them() {
        assert_eq!(Quantity::parse("soc").unwrap(), Quantity::Soc);
        let err = Quantity::parse("pressure").unwrap_err().to_string();
        assert!(err.contains("current, voltage, temperature, soc"), "{err}");
    }

    #[test]
    fn ticks_cover_the_range() {
        let t = ticks(0.0, 3000.0);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&3000.0));
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let series = vec![
            Series {
                label: "model-free".into(),
                style: SeriesStyle::ModelFree,
                values: vec![1.0, 2.0, 3.0],
                dashed: false,
            },
            Series {
                label: "oracle".into(),
                style: SeriesStyle::Oracle,
                values: vec![1.0, 2.5, 3.0],
                dashed: false,
            },
        ];
        let svg = render_svg("current", Quantity::Current, &series).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("current [A]"));
        assert_eq!(svg, render_svg("current", Quantity::Current, &series).unwrap());
    }
}
