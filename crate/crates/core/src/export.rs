//! Diagram serialization: the space-separated `.txt` record format, the
//! `index,birth,death` CSV consumed by the prediction pipeline, and SVG
//! plots.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cubical::Cell;
use crate::persistence::{Death, PersistenceDiagram, PersistencePair};

pub const TXT_HEADER: &str = "# birth death dimension creator_x creator_y creator_z \
destructor_x destructor_y destructor_z weight";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExportError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

fn parse_err(line: usize, reason: impl Into<String>) -> ExportError {
    ExportError::Parse {
        line,
        reason: reason.into(),
    }
}

/// One row of the `.txt` format. Coordinates are doubled-grid cell
/// coordinates with `z = 0`; essential classes carry an all-zero destructor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PersistenceRecord {
    pub birth: u8,
    pub death: Death,
    pub dimension: u8,
    pub creator: [u32; 3],
    pub destructor: [u32; 3],
    /// Gray value of the creator cell; equal to `birth`.
    pub weight: u8,
}

impl From<&PersistencePair> for PersistenceRecord {
    fn from(p: &PersistencePair) -> Self {
        let d = p.destructor.map_or([0, 0, 0], |c| [c.x, c.y, 0]);
        Self {
            birth: p.birth,
            death: p.death,
            dimension: p.dim,
            creator: [p.creator.x, p.creator.y, 0],
            destructor: d,
            weight: p.birth,
        }
    }
}

/// Which pairs an export includes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExportOptions {
    /// Keep pairs whose birth equals their death.
    pub keep_zero: bool,
    /// CSV only: emit essential classes with death `inf`.
    pub include_essential: bool,
}

fn selected(d: &PersistenceDiagram, keep_zero: bool) -> impl Iterator<Item = &PersistencePair> {
    d.pairs()
        .iter()
        .filter(move |p| keep_zero || !p.is_zero_length())
}

pub fn write_txt(d: &PersistenceDiagram, opts: ExportOptions) -> Vec<u8> {
    let mut out = String::from(TXT_HEADER);
    out.push('\n');
    for p in selected(d, opts.keep_zero) {
        let r = PersistenceRecord::from(p);
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {}",
            r.birth,
            r.death,
            r.dimension,
            r.creator[0],
            r.creator[1],
            r.creator[2],
            r.destructor[0],
            r.destructor[1],
            r.destructor[2],
            r.weight
        );
    }
    out.into_bytes()
}

fn parse_death(tok: &str, line: usize) -> Result<Death, ExportError> {
    if tok == "inf" {
        Ok(Death::Essential)
    } else {
        tok.parse()
            .map(Death::Finite)
            .map_err(|_| parse_err(line, format!("bad death {tok:?}")))
    }
}

pub fn parse_txt_records(text: &str) -> Result<Vec<PersistenceRecord>, ExportError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 10 {
            return Err(parse_err(
                line,
                format!("expected 10 fields, found {}", f.len()),
            ));
        }
        let num = |k: usize| -> Result<u32, ExportError> {
            f[k].parse()
                .map_err(|_| parse_err(line, format!("bad integer {:?}", f[k])))
        };
        let byte = |k: usize| -> Result<u8, ExportError> {
            f[k].parse()
                .map_err(|_| parse_err(line, format!("bad gray value {:?}", f[k])))
        };
        out.push(PersistenceRecord {
            birth: byte(0)?,
            death: parse_death(f[1], line)?,
            dimension: byte(2)?,
            creator: [num(3)?, num(4)?, num(5)?],
            destructor: [num(6)?, num(7)?, num(8)?],
            weight: byte(9)?,
        });
    }
    Ok(out)
}

/// Parse a `.txt` export back into a diagram.
pub fn parse_txt(text: &str) -> Result<PersistenceDiagram, ExportError> {
    let records = parse_txt_records(text)?;
    let mut pairs = Vec::with_capacity(records.len());
    for (n, r) in records.iter().enumerate() {
        let err = |reason: &str| parse_err(n + 1, format!("record {}: {reason}", n + 1));
        if r.dimension > 1 {
            return Err(err("dimension must be 0 or 1"));
        }
        if r.weight != r.birth {
            return Err(err("weight differs from birth"));
        }
        if r.creator[2] != 0 || r.destructor[2] != 0 {
            return Err(err("z coordinate must be 0"));
        }
        let creator = Cell::new(r.creator[0], r.creator[1]);
        if creator.dim() != r.dimension {
            return Err(err("creator cell has the wrong dimension"));
        }
        let destructor = match r.death {
            Death::Finite(d) => {
                if d < r.birth {
                    return Err(err("death precedes birth"));
                }
                Some(Cell::new(r.destructor[0], r.destructor[1]))
            }
            Death::Essential => {
                if r.destructor != [0, 0, 0] {
                    return Err(err("essential class with a destructor"));
                }
                None
            }
        };
        pairs.push(PersistencePair {
            dim: r.dimension,
            birth: r.birth,
            death: r.death,
            creator,
            destructor,
        });
    }
    Ok(PersistenceDiagram::new(pairs))
}

/// `index,birth,death` rows, index starting at 1, in canonical order.
pub fn write_csv(d: &PersistenceDiagram, opts: ExportOptions) -> Vec<u8> {
    let mut out = String::new();
    let rows = selected(d, opts.keep_zero).filter(|p| opts.include_essential || !p.is_essential());
    for (i, p) in rows.enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, p.birth, p.death);
    }
    out.into_bytes()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CsvRow {
    pub index: usize,
    pub birth: u8,
    pub death: Death,
}

/// Parse the CSV form. A leading `index,birth,death` header is tolerated.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, ExportError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || (out.is_empty() && t.eq_ignore_ascii_case("index,birth,death")) {
            continue;
        }
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, found {}", f.len()),
            ));
        }
        let index = f[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad index {:?}", f[0])))?;
        let birth: u8 = f[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad birth {:?}", f[1])))?;
        let death = parse_death(f[2], line)?;
        if matches!(death, Death::Finite(d) if d < birth) {
            return Err(parse_err(line, "death precedes birth"));
        }
        out.push(CsvRow {
            index,
            birth,
            death,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PlotStyle {
    #[default]
    Barcode,
    Scatter,
}

impl std::str::FromStr for PlotStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "barcode" => Ok(Self::Barcode),
            "scatter" => Ok(Self::Scatter),
            _ => Err(format!("unknown plot style {s:?} (barcode|scatter)")),
        }
    }
}

const DIM_COLORS: [&str; 2] = ["#1f77b4", "#d62728"];
const LEFT: f64 = 60.0;
const RIGHT_PAD: f64 = 40.0;
const TOP: f64 = 30.0;
const BOTTOM_PAD: f64 = 50.0;
const TICKS: [u8; 5] = [0, 64, 128, 192, 255];

/// Render a diagram as SVG. The output depends only on the diagram.
pub fn render_diagram(d: &PersistenceDiagram, style: PlotStyle) -> Vec<u8> {
    match style {
        PlotStyle::Barcode => render_barcode(d),
        PlotStyle::Scatter => render_scatter(d),
    }
    .into_bytes()
}

fn svg_open(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" \
viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<title>{title}</title>");
    out.push_str(
        "<defs><marker id=\"arrow\" markerWidth=\"8\" markerHeight=\"8\" refX=\"6\" refY=\"4\" \
orient=\"auto\"><path d=\"M0,0 L8,4 L0,8 z\" fill=\"context-stroke\"/></marker></defs>\n",
    );
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{w:.0}\" height=\"{h:.0}\" fill=\"white\"/>"
    );
}

fn render_barcode(d: &PersistenceDiagram) -> String {
    let plot_w = 512.0;
    let bar_gap = 6.0;
    let n = d.len().max(1) as f64;
    let plot_h = n * bar_gap + bar_gap;
    let (w, h) = (LEFT + plot_w + RIGHT_PAD, TOP + plot_h + BOTTOM_PAD);
    let x_of = |v: u8| LEFT + f64::from(v) * plot_w / 255.0;
    let axis_y = TOP + plot_h;

    let mut out = String::new();
    svg_open(&mut out, w, h, "persistence barcode");
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{:.2}\" y1=\"{axis_y:.2}\" x2=\"{:.2}\" y2=\"{axis_y:.2}\" stroke=\"black\"/>",
        x_of(0),
        x_of(255)
    );
    for t in TICKS {
        let x = x_of(t);
        let _ = writeln!(
            out,
            "<line class=\"tick\" x1=\"{x:.2}\" y1=\"{axis_y:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\
<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t}</text>",
            axis_y + 4.0,
            axis_y + 16.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">grayscale value</text>",
        LEFT + plot_w / 2.0,
        axis_y + 34.0
    );
    for (i, p) in d.pairs().iter().enumerate() {
        let y = TOP + bar_gap * (i as f64 + 1.0);
        let color = DIM_COLORS[usize::from(p.dim.min(1))];
        match p.death {
            Death::Finite(death) => {
                let _ = writeln!(
                    out,
                    "<line class=\"bar\" data-dim=\"{}\" x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
stroke=\"{color}\" stroke-width=\"3\"/>",
                    p.dim,
                    x_of(p.birth),
                    x_of(death)
                );
            }
            Death::Essential => {
                let _ = writeln!(
                    out,
                    "<line class=\"bar essential\" data-dim=\"{}\" x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
stroke=\"{color}\" stroke-width=\"3\" marker-end=\"url(#arrow)\"/>",
                    p.dim,
                    x_of(p.birth),
                    w - RIGHT_PAD / 2.0
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

fn render_scatter(d: &PersistenceDiagram) -> String {
    let side = 400.0;
    let inf_band = 24.0;
    let (w, h) = (LEFT + side + RIGHT_PAD, TOP + inf_band + side + BOTTOM_PAD);
    let x_of = |v: u8| LEFT + f64::from(v) * side / 255.0;
    let bottom = TOP + inf_band + side;
    let y_of = |v: u8| bottom - f64::from(v) * side / 255.0;
    let inf_y = TOP + inf_band / 2.0;

    let mut out = String::new();
    svg_open(&mut out, w, h, "persistence diagram");
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{:.2}\" y1=\"{bottom:.2}\" x2=\"{:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>\
<line class=\"axis\" x1=\"{:.2}\" y1=\"{bottom:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        x_of(0),
        x_of(255),
        x_of(0),
        x_of(0),
        y_of(255)
    );
    let _ = writeln!(
        out,
        "<line class=\"diagonal\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
        x_of(0),
        y_of(0),
        x_of(255),
        y_of(255)
    );
    let _ = writeln!(
        out,
        "<line class=\"infinity\" x1=\"{:.2}\" y1=\"{inf_y:.2}\" x2=\"{:.2}\" y2=\"{inf_y:.2}\" stroke=\"gray\" stroke-dasharray=\"2 2\"/>\
<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">inf</text>",
        x_of(0),
        x_of(255),
        x_of(0) - 6.0,
        inf_y + 4.0
    );
    for t in TICKS {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t}</text>\
<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{t}</text>",
            x_of(t),
            bottom + 16.0,
            x_of(0) - 6.0,
            y_of(t) + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">birth</text>",
        LEFT + side / 2.0,
        bottom + 34.0
    );
    for p in d.pairs() {
        let color = DIM_COLORS[usize::from(p.dim.min(1))];
        let x = x_of(p.birth);
        match p.death {
            Death::Finite(death) => {
                let _ = writeln!(
                    out,
                    "<circle class=\"point\" data-dim=\"{}\" cx=\"{x:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                    p.dim,
                    y_of(death)
                );
            }
            Death::Essential => {
                let _ = writeln!(
                    out,
                    "<line class=\"point essential\" data-dim=\"{}\" x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
stroke=\"{color}\" stroke-width=\"2\" marker-end=\"url(#arrow)\"/>",
                    p.dim,
                    inf_y + 8.0,
                    inf_y
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
