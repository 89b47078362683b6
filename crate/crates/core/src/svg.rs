//! SVG rendering of labelled maps.
//!
//! Each neuron is a square cell tinted by its label. Sample BMUs are drawn as
//! glyphs keyed by predicate code (circle, cross, square, diamond, then
//! repeating), induction BMUs as triangles. Output depends only on the inputs.

use std::fmt::Write as _;

use crate::som::LabeledMap;

const CELL: usize = 24;
const MARGIN: usize = 20;
const LEGEND_WIDTH: usize = 200;
const TINTS: [&str; 6] = [
    "#cfe2f3", "#f4cccc", "#d9ead3", "#fff2cc", "#ead1dc", "#d0e0e3",
];
const INKS: [&str; 6] = [
    "#1c4587", "#990000", "#274e13", "#7f6000", "#4c1130", "#0c343d",
];
// Slot offsets for stacking several glyphs in one cell.
const SLOTS: [(i32, i32); 9] = [
    (0, 0),
    (-6, -6),
    (6, 6),
    (6, -6),
    (-6, 6),
    (0, -7),
    (0, 7),
    (-7, 0),
    (7, 0),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SvgError {
    #[error("neuron {neuron} is outside the {rows}x{cols} map")]
    DimensionMismatch {
        neuron: usize,
        rows: usize,
        cols: usize,
    },
}

/// A dataset row placed at its BMU.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplePlacement {
    pub neuron: usize,
    pub label: usize,
}

/// An induction vector placed at its BMU.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InductionMark {
    pub neuron: usize,
    pub name: String,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

fn glyph(out: &mut String, label: usize, cx: i32, cy: i32) {
    let ink = INKS[label % INKS.len()];
    match label % 4 {
        0 => {
            let _ = writeln!(
                out,
                r#"    <circle class="glyph glyph-circle" cx="{cx}" cy="{cy}" r="4" fill="none" stroke="{ink}" stroke-width="1.5"/>"#
            );
        }
        1 => {
            let _ = writeln!(
                out,
                r#"    <path class="glyph glyph-cross" d="M{} {} L{} {} M{} {} L{} {}" stroke="{ink}" stroke-width="1.5"/>"#,
                cx - 4, cy - 4, cx + 4, cy + 4, cx - 4, cy + 4, cx + 4, cy - 4
            );
        }
        2 => {
            let _ = writeln!(
                out,
                r#"    <rect class="glyph glyph-square" x="{}" y="{}" width="7" height="7" fill="none" stroke="{ink}" stroke-width="1.5"/>"#,
                cx - 3, cy - 3
            );
        }
        _ => {
            let _ = writeln!(
                out,
                r#"    <polygon class="glyph glyph-diamond" points="{},{} {},{} {},{} {},{}" fill="none" stroke="{ink}" stroke-width="1.5"/>"#,
                cx, cy - 5, cx + 5, cy, cx, cy + 5, cx - 5, cy
            );
        }
    }
}

fn triangle(out: &mut String, cx: i32, cy: i32, name: &str) {
    let _ = writeln!(
        out,
        r##"    <polygon class="glyph glyph-triangle" points="{},{} {},{} {},{}" fill="#000000" fill-opacity="0.8"/>"##,
        cx, cy - 6, cx + 6, cy + 5, cx - 6, cy + 5
    );
    if !name.is_empty() {
        let _ = writeln!(
            out,
            r#"    <text x="{}" y="{}" font-family="sans-serif" font-size="9">{}</text>"#,
            cx + 7,
            cy - 4,
            escape(name)
        );
    }
}

/// Renders the map. `predicate_names[p]` names label `p` in the legend;
/// `metadata` is embedded verbatim (escaped) in a leading comment.
pub fn export_map_svg(
    map: &LabeledMap,
    samples: &[SamplePlacement],
    marks: &[InductionMark],
    predicate_names: &[String],
    metadata: &str,
) -> Result<String, SvgError> {
    let n = map.rows * map.cols;
    let bad = samples
        .iter()
        .map(|s| s.neuron)
        .chain(marks.iter().map(|m| m.neuron))
        .find(|&j| j >= n);
    if let Some(neuron) = bad {
        return Err(SvgError::DimensionMismatch {
            neuron,
            rows: map.rows,
            cols: map.cols,
        });
    }

    let grid_w = map.cols * CELL;
    let grid_h = map.rows * CELL;
    let legend_rows = predicate_names.len() + 1;
    let width = MARGIN * 3 + grid_w + LEGEND_WIDTH;
    let height = MARGIN * 2 + grid_h.max(legend_rows * 20 + 20);

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<!-- {} -->", escape(metadata).replace("--", "- -"));
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r##"  <rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##
    );

    out.push_str("  <g class=\"cells\">\n");
    for j in 0..n {
        let (r, c) = (j / map.cols, j % map.cols);
        let fill = map.label(j).map_or("#ffffff", |l| TINTS[l % TINTS.len()]);
        let _ = writeln!(
            out,
            r##"    <rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#bbbbbb" stroke-width="0.5"/>"##,
            MARGIN + c * CELL,
            MARGIN + r * CELL
        );
    }
    out.push_str("  </g>\n");

    let center = |j: usize, slot: usize| {
        let (r, c) = (j / map.cols, j % map.cols);
        let (dx, dy) = SLOTS[slot % SLOTS.len()];
        (
            (MARGIN + c * CELL + CELL / 2) as i32 + dx,
            (MARGIN + r * CELL + CELL / 2) as i32 + dy,
        )
    };
    let mut occupancy = vec![0usize; n];

    out.push_str("  <g class=\"samples\">\n");
    for s in samples {
        let (cx, cy) = center(s.neuron, occupancy[s.neuron]);
        occupancy[s.neuron] += 1;
        glyph(&mut out, s.label, cx, cy);
    }
    out.push_str("  </g>\n");

    out.push_str("  <g class=\"induction\">\n");
    for m in marks {
        let (cx, cy) = center(m.neuron, occupancy[m.neuron]);
        occupancy[m.neuron] += 1;
        triangle(&mut out, cx, cy, &m.name);
    }
    out.push_str("  </g>\n");

    let lx = (MARGIN * 2 + grid_w) as i32;
    out.push_str("  <g class=\"legend\">\n");
    for (p, name) in predicate_names.iter().enumerate() {
        let y = (MARGIN + 10 + p * 20) as i32;
        let _ = writeln!(
            out,
            r##"    <rect x="{}" y="{}" width="16" height="16" fill="{}" stroke="#bbbbbb" stroke-width="0.5"/>"##,
            lx,
            y - 8,
            TINTS[p % TINTS.len()]
        );
        legend_glyph(&mut out, p, lx + 8, y);
        let _ = writeln!(
            out,
            r#"    <text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 24,
            y + 4,
            escape(name)
        );
    }
    let y = (MARGIN + 10 + predicate_names.len() * 20) as i32;
    let _ = writeln!(
        out,
        r##"    <polygon points="{},{} {},{} {},{}" fill="#000000" fill-opacity="0.8"/>"##,
        lx + 8,
        y - 6,
        lx + 14,
        y + 5,
        lx + 2,
        y + 5
    );
    let _ = writeln!(
        out,
        r#"    <text x="{}" y="{}" font-family="sans-serif" font-size="12">induction vector</text>"#,
        lx + 24,
        y + 4
    );
    out.push_str("  </g>\n</svg>\n");
    Ok(out)
}

// Legend glyphs carry no `glyph` class so counts of plotted samples stay exact.
fn legend_glyph(out: &mut String, label: usize, cx: i32, cy: i32) {
    let mut tmp = String::new();
    glyph(&mut tmp, label, cx, cy);
    out.push_str(&tmp.replacen("class=\"glyph ", "class=\"legend-", 1));
}
