use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Branch, EdgeCurve};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Svg,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(Error::config(format!("unknown export format `{other}` (csv or svg)"))),
        }
    }
}

const CSV_HEADER: [&str; 7] = ["branch", "layer", "input", "output", "activation_range", "x", "phi"];

/// One row per sample point. Floats use `{:.16e}` (17 significant digits),
/// which parses back to the identical `f64`.
pub fn write_curves_csv<W: Write>(curves: &[EdgeCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Data(format!("writing curve CSV: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for c in curves {
        let meta = [c.branch.to_string(), c.layer.to_string(), c.input.to_string(), c.output.to_string(), format!("{:.16e}", c.activation_range)];
        for (x, v) in c.x.iter().zip(&c.values) {
            let mut row = meta.to_vec();
            row.push(format!("{x:.16e}"));
            row.push(format!("{v:.16e}"));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Data(format!("writing curve CSV: {e}")))
}

/// Inverse of [`write_curves_csv`]; consecutive rows with the same edge
/// metadata form one curve.
pub fn read_curves_csv<R: Read>(input: R) -> Result<Vec<EdgeCurve>> {
    let mut r = csv::Reader::from_reader(input);
    let mut curves: Vec<EdgeCurve> = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("reading curve CSV: {e}")))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |k: usize, what: &str| Error::Parse {
            row: n + 1,
            column: k + 1,
            detail: format!("expected {what}, got `{}`", field(k)),
        };
        let int = |k: usize| field(k).parse::<usize>().map_err(|_| bad(k, "an integer"));
        let float = |k: usize| field(k).parse::<f64>().map_err(|_| bad(k, "a number"));
        let branch: Branch = field(0).parse().map_err(|_| bad(0, "a branch"))?;
        let (layer, input, output) = (int(1)?, int(2)?, int(3)?);
        let (range, x, v) = (float(4)?, float(5)?, float(6)?);
        match curves.last_mut() {
            Some(c) if (c.branch, c.layer, c.input, c.output) == (branch, layer, input, output) => {
                c.x.push(x);
                c.values.push(v);
            }
            _ => curves.push(EdgeCurve {
                branch,
                layer,
                input,
                output,
                x: vec![x],
                values: vec![v],
                activation_range: range,
            }),
        }
    }
    Ok(curves)
}

const PANEL_W: f64 = 220.0;
const PANEL_H: f64 = 160.0;
const MARGIN: f64 = 28.0;
const COLUMNS: usize = 4;

fn color(b: Branch) -> &'static str {
    match b {
        Branch::Trend => "#1f77b4",
        Branch::Residual => "#d62728",
    }
}

/// Small multiples, one panel per curve, each with its own value scale.
pub fn render_svg(curves: &[EdgeCurve]) -> String {
    let cols = curves.len().clamp(1, COLUMNS);
    let rows = curves.len().div_ceil(cols).max(1);
    let (w, h) = (cols as f64 * PANEL_W, rows as f64 * PANEL_H);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (n, c) in curves.iter().enumerate() {
        let (ox, oy) = ((n % cols) as f64 * PANEL_W, (n / cols) as f64 * PANEL_H);
        let (x0, x1) = (ox + MARGIN, ox + PANEL_W - 8.0);
        let (y0, y1) = (oy + 22.0, oy + PANEL_H - MARGIN);
        let (xmin, xmax) = (c.x.first().copied().unwrap_or(-1.0), c.x.last().copied().unwrap_or(1.0));
        let vmin = c.values.iter().copied().fold(f64::INFINITY, f64::min);
        let vmax = c.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (vmin, vmax) = if vmax - vmin > 1e-12 { (vmin, vmax) } else { (vmin - 0.5, vmin + 0.5) };
        let px = |x: f64| x0 + (x - xmin) / (xmax - xmin).max(1e-12) * (x1 - x0);
        let py = |v: f64| y1 - (v - vmin) / (vmax - vmin) * (y1 - y0);
        let _ = writeln!(s, r#"<g>"#);
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#999"/>"##,
            x1 - x0,
            y1 - y0
        );
        if vmin < 0.0 && vmax > 0.0 {
            let _ = writeln!(s, r##"<line x1="{x0:.1}" y1="{0:.1}" x2="{x1:.1}" y2="{0:.1}" stroke="#ddd"/>"##, py(0.0));
        }
        let pts: Vec<String> = c.x.iter().zip(&c.values).map(|(&x, &v)| format!("{:.2},{:.2}", px(x), py(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            color(c.branch),
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{}">{} L{} φ {}→{}</text>"#,
            x0,
            oy + 14.0,
            color(c.branch),
            c.branch,
            c.layer,
            c.input,
            c.output
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">range {:.3}</text>"#,
            x1,
            oy + 14.0,
            c.activation_range
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">x</text>"#, (x0 + x1) / 2.0, y1 + 20.0);
        let _ = writeln!(s, r#"<text x="{x0:.1}" y="{:.1}" text-anchor="middle">{xmin}</text>"#, y1 + 11.0);
        let _ = writeln!(s, r#"<text x="{x1:.1}" y="{:.1}" text-anchor="middle">{xmax}</text>"#, y1 + 11.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" transform="rotate(-90 {0:.1} {1:.1})" text-anchor="middle">φ(x)</text>"#,
            ox + 10.0,
            (y0 + y1) / 2.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{vmax:.2}</text>"#, x0 - 2.0, y0 + 4.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{vmin:.2}</text>"#, x0 - 2.0, y1);
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

pub fn export_curves(curves: &[EdgeCurve], format: ExportFormat, path: &Path) -> Result<()> {
    if curves.is_empty() {
        return Err(Error::config("no curves to export"));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    match format {
        ExportFormat::Csv => write_curves_csv(curves, &mut out)?,
        ExportFormat::Svg => out.write_all(render_svg(curves).as_bytes()).map_err(|e| Error::io(path, e))?,
    }
    out.flush().map_err(|e| Error::io(path, e))
}
