//! Static renderings of an encoder field: plain PGM and SVG.
//!
//! Non-encoders are blank, single-class encoders get a per-class shade or
//! color, and neurons answering to several classes carry an overlap glyph
//! (an X in PGM, a `*` in SVG).

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{EncoderField, MapReport};
use crate::error::{Result, SomError};
use crate::som::GridPos;

/// Pixels per grid cell in PGM output.
pub const PGM_CELL: usize = 12;
/// SVG user units per grid cell.
pub const SVG_CELL: usize = 20;

const BLANK_GRAY: u8 = 255;
const OVERLAP_GRAY: u8 = 0;
const CLASS_GRAYS: [u8; 4] = [60, 110, 160, 210];
const CLASS_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];
const EXTRA_COLOR: &str = "#7f7f7f";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderFormat {
    Pgm,
    Svg,
}

impl RenderFormat {
    pub fn extension(self) -> &'static str {
        match self {
            RenderFormat::Pgm => "pgm",
            RenderFormat::Svg => "svg",
        }
    }
}

impl FromStr for RenderFormat {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgm" | "portable-graymap" => Ok(RenderFormat::Pgm),
            "svg" | "scalable-vector" => Ok(RenderFormat::Svg),
            other => Err(SomError::Config(format!(
                "unsupported render format {other:?} (expected pgm or svg)"
            ))),
        }
    }
}

/// Render `report`'s encoder field. Output bytes depend only on the field.
pub fn render_map(report: &MapReport, format: RenderFormat) -> Vec<u8> {
    render_field(&report.field, format)
}

pub fn render_field(field: &EncoderField, format: RenderFormat) -> Vec<u8> {
    match format {
        RenderFormat::Pgm => pgm(field).into_bytes(),
        RenderFormat::Svg => svg(field).into_bytes(),
    }
}

fn class_index(mask: u32) -> usize {
    mask.trailing_zeros() as usize
}

fn pgm(field: &EncoderField) -> String {
    let (w, h) = (field.width() * PGM_CELL, field.height() * PGM_CELL);
    let mut out = format!("P2\n{w} {h}\n255\n");
    for py in 0..h {
        let row: Vec<String> = (0..w)
            .map(|px| {
                let (cx, cy) = (px / PGM_CELL, py / PGM_CELL);
                let (ix, iy) = (px % PGM_CELL, py % PGM_CELL);
                let mask = field.mask_at(GridPos::new(cx, cy));
                let gray = match mask.count_ones() {
                    0 => BLANK_GRAY,
                    1 => CLASS_GRAYS.get(class_index(mask)).copied().unwrap_or(OVERLAP_GRAY),
                    _ => {
                        // White X on black.
                        let on_diag = ix == iy || ix + iy == PGM_CELL - 1;
                        let inset = ix > 1 && ix < PGM_CELL - 2;
                        if on_diag && inset {
                            BLANK_GRAY
                        } else {
                            OVERLAP_GRAY
                        }
                    }
                };
                gray.to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn svg(field: &EncoderField) -> String {
    let (w, h) = (field.width() * SVG_CELL, field.height() * SVG_CELL);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    for y in 0..field.height() {
        for x in 0..field.width() {
            let mask = field.mask_at(GridPos::new(x, y));
            let (px, py) = (x * SVG_CELL, y * SVG_CELL);
            match mask.count_ones() {
                0 => {
                    let _ = writeln!(
                        out,
                        r##"<rect x="{px}" y="{py}" width="{SVG_CELL}" height="{SVG_CELL}" fill="none" stroke="#e0e0e0"/>"##
                    );
                }
                1 => {
                    let color = CLASS_COLORS.get(class_index(mask)).copied().unwrap_or(EXTRA_COLOR);
                    let _ = writeln!(
                        out,
                        r#"<rect x="{px}" y="{py}" width="{SVG_CELL}" height="{SVG_CELL}" fill="{color}"><title>class {}</title></rect>"#,
                        class_index(mask)
                    );
                }
                _ => {
                    let classes: Vec<String> = (0..32).filter(|k| mask & (1 << k) != 0).map(|k| k.to_string()).collect();
                    let (cx, cy) = (px + SVG_CELL / 2, py + SVG_CELL * 3 / 4);
                    let _ = writeln!(
                        out,
                        r##"<g><title>classes {}</title><rect x="{px}" y="{py}" width="{SVG_CELL}" height="{SVG_CELL}" fill="{EXTRA_COLOR}"/><text x="{cx}" y="{cy}" font-size="{}" text-anchor="middle" fill="#000000">*</text></g>"##,
                        classes.join(","),
                        SVG_CELL
                    );
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
