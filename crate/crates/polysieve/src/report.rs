//! Output emission: lossless CSV numerics, self-contained SVG line/scatter
//! plots, and small file helpers shared by the experiment harness and the
//! CLI.
//!
//! Everything written here is byte-deterministic for identical inputs: CSV
//! floats use 17 significant digits, SVG coordinates a fixed decimal width,
//! and no timestamps or machine identifiers appear in data files.

use crate::density::format_f64;
use crate::Result;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Write a text file, creating parent directories as needed.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content.as_bytes())?;
    Ok(())
}

/// A CSV table with a fixed header; numeric cells are lossless.
pub struct CsvTable {
    header: String,
    rows: Vec<String>,
}

impl CsvTable {
    pub fn new(header: &str) -> Self {
        CsvTable {
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, cells: &[CsvCell]) {
        let row = cells
            .iter()
            .map(|c| match c {
                CsvCell::Int(v) => v.to_string(),
                CsvCell::Float(v) => format_f64(*v),
                CsvCell::Text(s) => s.clone(),
            })
            .collect::<Vec<_>>()
            .join(",");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity((self.rows.len() + 1) * 32);
        out.push_str(&self.header);
        out.push('\n');
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

pub enum CsvCell {
    Int(i64),
    Float(f64),
    Text(String),
}

/// Minimal SVG chart: lines, dashed lines, scatter circles, and band fills
/// with axes, ticks, and a legend. No external dependencies.
pub struct SvgPlot {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<Series>,
    y_floor_zero: bool,
}

struct Series {
    xs: Vec<f64>,
    ys: Vec<f64>,
    upper: Option<Vec<f64>>,
    color: &'static str,
    label: String,
    kind: SeriesKind,
}

#[derive(PartialEq)]
enum SeriesKind {
    Line,
    Dashed,
    Scatter,
    Band,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;

impl SvgPlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        SvgPlot {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            series: Vec::new(),
            y_floor_zero: false,
        }
    }

    /// Anchor the y axis at zero (density and distance plots).
    pub fn floor_y_at_zero(mut self) -> Self {
        self.y_floor_zero = true;
        self
    }

    pub fn line(&mut self, xs: &[f64], ys: &[f64], color: &'static str, label: &str) {
        self.series.push(Series {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            upper: None,
            color,
            label: label.to_string(),
            kind: SeriesKind::Line,
        });
    }

    pub fn dashed(&mut self, xs: &[f64], ys: &[f64], color: &'static str, label: &str) {
        self.series.push(Series {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            upper: None,
            color,
            label: label.to_string(),
            kind: SeriesKind::Dashed,
        });
    }

    pub fn scatter(&mut self, xs: &[f64], ys: &[f64], color: &'static str, label: &str) {
        self.series.push(Series {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            upper: None,
            color,
            label: label.to_string(),
            kind: SeriesKind::Scatter,
        });
    }

    /// Filled region between `lower` and `upper`.
    pub fn band(
        &mut self,
        xs: &[f64],
        lower: &[f64],
        upper: &[f64],
        color: &'static str,
        label: &str,
    ) {
        self.series.push(Series {
            xs: xs.to_vec(),
            ys: lower.to_vec(),
            upper: Some(upper.to_vec()),
            color,
            label: label.to_string(),
            kind: SeriesKind::Band,
        });
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &v in &s.xs {
                x.0 = x.0.min(v);
                x.1 = x.1.max(v);
            }
            for &v in &s.ys {
                y.0 = y.0.min(v);
                y.1 = y.1.max(v);
            }
            if let Some(upper) = &s.upper {
                for &v in upper {
                    y.0 = y.0.min(v);
                    y.1 = y.1.max(v);
                }
            }
        }
        if !x.0.is_finite() || x.0 == x.1 {
            x = (0.0, 1.0);
        }
        if !y.0.is_finite() || y.0 == y.1 {
            y = (0.0, 1.0);
        }
        if self.y_floor_zero {
            y.0 = y.0.min(0.0);
        }
        let pad = (y.1 - y.0) * 0.05;
        ((x.0, x.1), (y.0 - pad.min(if self.y_floor_zero { 0.0 } else { pad }), y.1 + pad))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.ranges();
        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
        let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * plot_h;

        let mut svg = String::with_capacity(16 * 1024);
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
        );
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
            WIDTH / 2.0,
            escape(&self.title)
        );

        // axes box and ticks
        let _ = writeln!(
            svg,
            "<rect x=\"{MARGIN_L:.1}\" y=\"{MARGIN_T:.1}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>"
        );
        for i in 0..=5 {
            let fx = x0 + (x1 - x0) * i as f64 / 5.0;
            let cx = px(fx);
            let _ = writeln!(
                svg,
                "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"#444\" stroke-width=\"1\"/>",
                HEIGHT - MARGIN_B,
                HEIGHT - MARGIN_B + 5.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{cx:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
                HEIGHT - MARGIN_B + 18.0,
                tick_label(fx)
            );
            let fy = y0 + (y1 - y0) * i as f64 / 5.0;
            let cy = py(fy);
            let _ = writeln!(
                svg,
                "<line x1=\"{:.2}\" y1=\"{cy:.2}\" x2=\"{MARGIN_L:.1}\" y2=\"{cy:.2}\" stroke=\"#444\" stroke-width=\"1\"/>",
                MARGIN_L - 5.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>",
                MARGIN_L - 8.0,
                cy + 4.0,
                tick_label(fy)
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
            MARGIN_L + plot_w / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
            MARGIN_T + plot_h / 2.0,
            MARGIN_T + plot_h / 2.0,
            escape(&self.y_label)
        );

        // bands first so lines draw on top
        for s in self.series.iter().filter(|s| s.kind == SeriesKind::Band) {
            let upper = s.upper.as_ref().expect("band has upper");
            let mut d = String::new();
            for (i, (&x, &y)) in s.xs.iter().zip(&s.ys).enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(x), py(y));
            }
            for (&x, &y) in s.xs.iter().zip(upper).rev() {
                let _ = write!(d, "L{:.2},{:.2} ", px(x), py(y));
            }
            let _ = writeln!(
                svg,
                "<path d=\"{}Z\" fill=\"{}\" fill-opacity=\"0.25\" stroke=\"none\"/>",
                d, s.color
            );
        }
        for s in &self.series {
            match s.kind {
                SeriesKind::Line | SeriesKind::Dashed => {
                    let mut d = String::new();
                    for (i, (&x, &y)) in s.xs.iter().zip(&s.ys).enumerate() {
                        let _ =
                            write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(x), py(y));
                    }
                    let dash = if s.kind == SeriesKind::Dashed {
                        " stroke-dasharray=\"7,4\""
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        svg,
                        "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{}/>",
                        d, s.color, dash
                    );
                }
                SeriesKind::Scatter => {
                    for (&x, &y) in s.xs.iter().zip(&s.ys) {
                        let _ = writeln!(
                            svg,
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>",
                            px(x),
                            py(y),
                            s.color
                        );
                    }
                }
                SeriesKind::Band => {}
            }
        }

        // legend (top-right corner, one row per labelled series)
        let mut slot = 0;
        for s in &self.series {
            if s.label.is_empty() {
                continue;
            }
            let ly = MARGIN_T + 16.0 + 18.0 * slot as f64;
            let lx = WIDTH - MARGIN_R - 150.0;
            match s.kind {
                SeriesKind::Scatter => {
                    let _ = writeln!(
                        svg,
                        "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>",
                        lx + 12.0,
                        ly - 4.0,
                        s.color
                    );
                }
                SeriesKind::Band => {
                    let _ = writeln!(
                        svg,
                        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"24\" height=\"8\" fill=\"{}\" fill-opacity=\"0.25\"/>",
                        lx,
                        ly - 8.0,
                        s.color
                    );
                }
                _ => {
                    let dash = if s.kind == SeriesKind::Dashed {
                        " stroke-dasharray=\"7,4\""
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        svg,
                        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{}\" stroke-width=\"1.8\"{}/>",
                        lx,
                        ly - 4.0,
                        lx + 24.0,
                        ly - 4.0,
                        s.color,
                        dash
                    );
                }
            }
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
                lx + 30.0,
                ly,
                escape(&s.label)
            );
            slot += 1;
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    let s = if (1e-3..1e5).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    };
    // trim trailing zeros from plain decimals
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Join a directory and file name (portable path assembly for manifests).
pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
