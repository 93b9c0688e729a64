//! Phone-level trajectory plots of the four controls as plain SVG, with the
//! plotted numbers echoed as CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::features::N_PC;
use crate::{Error, Result};

/// One utterance's per-phone control values as read from a targets or
/// predictions CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub utt_id: String,
    pub word_index: Vec<usize>,
    pub values: Vec<[f64; N_PC]>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Phone indices at which a new word starts, excluding phone 0.
    pub fn word_boundaries(&self) -> Vec<usize> {
        (1..self.word_index.len())
            .filter(|&t| self.word_index[t] != self.word_index[t - 1])
            .collect()
    }
}

const PC_COLUMNS: [&str; N_PC] = ["pc1", "pc2", "pc3", "pc4"];
const PANEL_TITLES: [&str; N_PC] = [
    "sentence log duration",
    "sentence log-f0 spread",
    "word log duration (relative)",
    "word log-f0 spread (relative)",
];

/// Parses any CSV with `utt_id`, `word_index` and `pc1`..`pc4` columns,
/// grouping consecutive rows by utterance. Other columns are ignored.
pub fn parse_trajectories(text: &str, origin: &Path) -> Result<Vec<Trajectory>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            msg: format!("missing column {name:?}"),
        })
    };
    let utt_col = column("utt_id")?;
    let word_col = column("word_index")?;
    let pc_cols: Vec<usize> = PC_COLUMNS.iter().map(|c| column(c)).collect::<Result<_>>()?;

    let mut out: Vec<Trajectory> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let field = |c: usize| record.get(c).unwrap_or("");
        let bad = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let word: usize = field(word_col)
            .parse()
            .map_err(|e| bad(format!("word_index: {e}")))?;
        let mut values = [0.0; N_PC];
        for (v, &c) in values.iter_mut().zip(&pc_cols) {
            *v = field(c).parse().map_err(|e| bad(format!("{}: {e}", &headers[c])))?;
        }
        let utt = field(utt_col);
        match out.last_mut() {
            Some(t) if t.utt_id == utt => {
                t.word_index.push(word);
                t.values.push(values);
            }
            _ => out.push(Trajectory {
                utt_id: utt.to_string(),
                word_index: vec![word],
                values: vec![values],
            }),
        }
    }
    Ok(out)
}

/// `series,phone,word_index,pc1,pc2,pc3,pc4` rows for every plotted point.
pub fn series_csv(series: &[(String, Trajectory)]) -> String {
    let mut out = String::from("series,phone,word_index,pc1,pc2,pc3,pc4\n");
    for (name, traj) in series {
        for (t, (w, v)) in traj.word_index.iter().zip(&traj.values).enumerate() {
            let _ = writeln!(out, "{name},{t},{w},{},{},{},{}", v[0], v[1], v[2], v[3]);
        }
    }
    out
}

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 140.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const PANEL_GAP: f64 = 36.0;
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Four stacked panels, one per control, x = phone index. Each series is a
/// step line; dashed verticals mark word boundaries of the first series.
pub fn render_svg(series: &[(String, Trajectory)]) -> Result<String> {
    let first = match series.first() {
        Some((_, t)) if !t.is_empty() => t,
        _ => return Err(Error::Shape("nothing to plot".into())),
    };
    let n = series.iter().map(|(_, t)| t.len()).max().unwrap_or(0) as f64;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let height = N_PC as f64 * (PANEL_HEIGHT + PANEL_GAP) + PANEL_GAP;
    let x_of = |t: f64| MARGIN_LEFT + plot_w * t / n;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (k, title) in PANEL_TITLES.iter().enumerate() {
        let top = PANEL_GAP + k as f64 * (PANEL_HEIGHT + PANEL_GAP);
        let (mut lo, mut hi) = series
            .iter()
            .flat_map(|(_, t)| t.values.iter().map(move |v| v[k]))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi - lo < 1e-9 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.08 * (hi - lo);
        let (lo, hi) = (lo - pad, hi + pad);
        let y_of = |v: f64| top + PANEL_HEIGHT * (hi - v) / (hi - lo);

        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(svg, r#"<text x="{MARGIN_LEFT}" y="{}">{title}</text>"#, top - 6.0);
        let _ = writeln!(svg, r#"<text x="4" y="{}">{hi:.3}</text>"#, top + 10.0);
        let _ = writeln!(svg, r#"<text x="4" y="{}">{lo:.3}</text>"#, top + PANEL_HEIGHT);
        for b in first.word_boundaries() {
            let x = x_of(b as f64);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{}" stroke="#999" stroke-dasharray="3,3"/>"##,
                top + PANEL_HEIGHT
            );
        }
        for (s, (_, traj)) in series.iter().enumerate() {
            let mut points = String::new();
            for (t, v) in traj.values.iter().enumerate() {
                let y = y_of(v[k]);
                let _ = write!(points, "{:.2},{y:.2} {:.2},{y:.2} ", x_of(t as f64), x_of(t as f64 + 1.0));
            }
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                points.trim_end(),
                COLOURS[s % COLOURS.len()]
            );
        }
    }
    for (s, (name, _)) in series.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="14" fill="{}">{name}</text>"#,
            MARGIN_LEFT + 120.0 * s as f64,
            COLOURS[s % COLOURS.len()]
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
