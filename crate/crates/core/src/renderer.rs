//! Grayscale rasterization of panels and problem sheets.
//!
//! Entities are filled regular polygons (triangle, square, pentagon, hexagon)
//! or circles centred in their slot cell, with a one-pixel black outline.
//! Pixels are sampled at their centres, without anti-aliasing. Out
//! components are drawn as outlines only, scaled up to surround the inner
//! component.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{validate_panel, ComponentRole, ComponentSpec, Configuration, Entity, Panel, Problem};

pub const DEFAULT_RASTER_SIZE: usize = 64;
pub const BACKGROUND: u8 = 255;
pub const OUTLINE: u8 = 0;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// Row-major, 0 black to 255 white.
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn blank(width: usize, height: usize) -> Self {
        Raster {
            width,
            height,
            pixels: vec![BACKGROUND; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Binary PGM: `P5\n<width> <height>\n255\n` followed by the pixel bytes.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("PGM: {m}"));
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
        }
        if fields[0] != "P5" || fields[3] != "255" {
            return Err(bad("only 8-bit P5 is supported"));
        }
        let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
        let data = &bytes[(pos + 1).min(bytes.len())..];
        if data.len() != width * height {
            return Err(bad("pixel count does not match header"));
        }
        Ok(Raster {
            width,
            height,
            pixels: data.to_vec(),
        })
    }

    /// Pixels as network input: 0 for background up to 1 for black.
    pub fn to_input(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| (255 - p) as f64 / 255.0).collect()
    }

    fn blit(&mut self, src: &Raster, x0: usize, y0: usize) {
        for y in 0..src.height {
            let d = (y0 + y) * self.width + x0;
            self.pixels[d..d + src.width].copy_from_slice(&src.pixels[y * src.width..(y + 1) * src.width]);
        }
    }

    fn frame(&mut self, x0: usize, y0: usize, w: usize, h: usize) {
        for x in x0..x0 + w {
            self.set(x, y0, OUTLINE);
            self.set(x, y0 + h - 1, OUTLINE);
        }
        for y in y0..y0 + h {
            self.set(x0, y, OUTLINE);
            self.set(x0 + w - 1, y, OUTLINE);
        }
    }
}

pub fn fill_intensity(color_idx: u8) -> u8 {
    230 - 25 * color_idx
}

/// Outline shapes of Out components span this fraction range of their cell.
fn out_scale(size_idx: u8) -> f64 {
    0.6 + 0.08 * size_idx as f64
}

#[derive(Clone, Copy, Debug)]
struct Shape {
    cx: f64,
    cy: f64,
    radius: f64,
    /// 0 for a circle, otherwise the vertex count.
    sides: usize,
}

impl Shape {
    fn for_entity(e: &Entity, cell: (f64, f64, f64), role: ComponentRole) -> Self {
        let (cx, cy, half) = cell;
        let scale = if role == ComponentRole::Out {
            out_scale(e.size_idx)
        } else {
            e.scale()
        };
        Shape {
            cx,
            cy,
            radius: half * scale,
            sides: [3, 4, 5, 6, 0][e.type_idx as usize],
        }
    }

    /// Point test in pixel units. Polygons have a vertex straight up and the
    /// radius as circumradius, except the square: it is axis-aligned with
    /// half-side equal to the radius, so one size step always moves its edges
    /// by at least a pixel.
    fn contains(&self, px: f64, py: f64, size: f64) -> bool {
        let (dx, dy) = (px - self.cx * size, py - self.cy * size);
        let r = self.radius * size;
        if self.sides == 0 {
            return dx * dx + dy * dy <= r * r;
        }
        let n = self.sides as f64;
        let start = if self.sides == 4 { -PI / 4.0 } else { -PI / 2.0 };
        // Inside iff the projection onto every edge normal is within the apothem.
        let apothem = if self.sides == 4 { r } else { r * (PI / n).cos() };
        (0..self.sides).all(|k| {
            let mid = start + (2.0 * k as f64 + 1.0) * PI / n;
            dx * mid.cos() + dy * mid.sin() <= apothem
        })
    }
}

fn draw_shape(raster: &mut Raster, shape: Shape, fill: Option<u8>) {
    let size = raster.width as f64;
    let r = shape.radius * size;
    let (cx, cy) = (shape.cx * size, shape.cy * size);
    let lo_x = ((cx - r).floor().max(0.0) as usize).saturating_sub(1);
    let lo_y = ((cy - r).floor().max(0.0) as usize).saturating_sub(1);
    let hi_x = ((cx + r).ceil() as usize + 1).min(raster.width - 1);
    let hi_y = ((cy + r).ceil() as usize + 1).min(raster.height - 1);
    let inside = |x: isize, y: isize| {
        x >= 0
            && y >= 0
            && (x as usize) < raster.width
            && (y as usize) < raster.height
            && shape.contains(x as f64 + 0.5, y as f64 + 0.5, size)
    };
    let mut updates = Vec::new();
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            let (xi, yi) = (x as isize, y as isize);
            if !inside(xi, yi) {
                continue;
            }
            let edge = !inside(xi - 1, yi) || !inside(xi + 1, yi) || !inside(xi, yi - 1) || !inside(xi, yi + 1);
            if edge {
                updates.push((x, y, OUTLINE));
            } else if let Some(f) = fill {
                updates.push((x, y, f));
            }
        }
    }
    for (x, y, v) in updates {
        raster.set(x, y, v);
    }
}

fn draw_component(raster: &mut Raster, spec: &ComponentSpec, cp: &crate::model::ComponentPanel) {
    for (&slot, e) in &cp.entities {
        let shape = Shape::for_entity(e, spec.slot_cell(slot as usize), spec.role);
        let fill = (spec.role != ComponentRole::Out).then(|| fill_intensity(e.color_idx));
        draw_shape(raster, shape, fill);
    }
}

/// Square raster of `size` pixels. Components are drawn in layout order, so
/// inner components sit on top of Out outlines.
pub fn render_panel(panel: &Panel, config: Configuration, size: usize) -> Result<Raster> {
    let v = validate_panel(panel, config);
    if !v.is_empty() {
        return Err(Error::InvalidPanel(format!("{v:?}")));
    }
    if size < 8 {
        return Err(Error::InvalidPanel(format!("raster size {size} too small")));
    }
    let mut raster = Raster::blank(size, size);
    for (spec, cp) in config.components().iter().zip(&panel.components) {
        draw_component(&mut raster, spec, cp);
    }
    Ok(raster)
}

/// Pixel geometry of a problem sheet for a given panel size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SheetLayout {
    pub width: usize,
    pub height: usize,
    pub panel: usize,
    /// Top-left corners of the eight context panels in matrix order.
    pub matrix: Vec<(usize, usize)>,
    /// Top-left corner of the missing cell.
    pub missing: (usize, usize),
    /// Top-left corners of the eight options, two rows of four.
    pub options: Vec<(usize, usize)>,
}

impl SheetLayout {
    pub fn new(panel: usize) -> Self {
        let gap = (panel / 8).max(2);
        let cell = panel + 2;
        let width = 4 * cell + 5 * gap;
        let matrix_w = 3 * cell + 2 * gap;
        let mx = (width - matrix_w) / 2;
        let mut cells = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                cells.push((mx + c * (cell + gap), gap + r * (cell + gap)));
            }
        }
        let missing = cells.pop().unwrap();
        let oy = gap + 3 * (cell + gap) + 2 * gap;
        let options = (0..8)
            .map(|k| (gap + (k % 4) * (cell + gap), oy + (k / 4) * (cell + gap)))
            .collect();
        SheetLayout {
            width,
            height: oy + 2 * (cell + gap),
            panel,
            matrix: cells,
            missing,
            options,
        }
    }

    pub fn panel_regions(&self) -> usize {
        self.matrix.len() + self.options.len()
    }
}

/// Simple glyph for the missing cell, on a 5x7 grid.
const QUESTION: [&str; 7] = ["01110", "10001", "00001", "00110", "00100", "00000", "00100"];

fn draw_question(raster: &mut Raster, x0: usize, y0: usize, cell: usize) {
    let unit = (cell / 12).max(1);
    let (gw, gh) = (5 * unit, 7 * unit);
    let ox = x0 + (cell - gw) / 2;
    let oy = y0 + (cell - gh) / 2;
    for (r, line) in QUESTION.iter().enumerate() {
        for (c, ch) in line.bytes().enumerate() {
            if ch == b'1' {
                for dy in 0..unit {
                    for dx in 0..unit {
                        raster.set(ox + c * unit + dx, oy + r * unit + dy, OUTLINE);
                    }
                }
            }
        }
    }
}

/// The 3x3 matrix with a '?' in the missing cell above a 2x4 strip of options,
/// every panel framed.
pub fn render_problem_sheet(problem: &Problem, size: usize) -> Result<Raster> {
    let layout = SheetLayout::new(size);
    let mut sheet = Raster::blank(layout.width, layout.height);
    let framed = |sheet: &mut Raster, panel: &Panel, (x, y): (usize, usize)| -> Result<()> {
        let r = render_panel(panel, problem.config, size)?;
        sheet.blit(&r, x + 1, y + 1);
        sheet.frame(x, y, size + 2, size + 2);
        Ok(())
    };
    for (panel, &at) in problem.matrix.iter().zip(&layout.matrix) {
        framed(&mut sheet, panel, at)?;
    }
    let (qx, qy) = layout.missing;
    sheet.frame(qx, qy, size + 2, size + 2);
    draw_question(&mut sheet, qx + 1, qy + 1, size);
    for (panel, &at) in problem.options.iter().zip(&layout.options) {
        framed(&mut sheet, panel, at)?;
    }
    Ok(sheet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate_dataset, generate_indexed, GeneratorConfig};
    use crate::model::ComponentPanel;
    use std::collections::HashSet;

    fn center(t: u8, s: u8, c: u8) -> Panel {
        Panel::new(vec![ComponentPanel::single(Entity::new(t, s, c))])
    }

    #[test]
    fn blank_is_background() {
        let r = Raster::blank(64, 64);
        assert!(r.pixels.iter().all(|&p| p == BACKGROUND));
    }

    #[test]
    fn color_changes_only_fill() {
        let a = render_panel(&center(2, 3, 1), Configuration::Center, 64).unwrap();
        let b = render_panel(&center(2, 3, 7), Configuration::Center, 64).unwrap();
        let mut changed = 0;
        for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
            if pa != pb {
                assert_eq!((*pa, *pb), (fill_intensity(1), fill_intensity(7)));
                changed += 1;
            }
        }
        assert!(changed > 100);
    }

    #[test]
    fn center_panels_are_distinct() {
        let mut seen = HashSet::new();
        for t in 0..5 {
            for s in 0..6 {
                for c in 0..10 {
                    let r = render_panel(&center(t, s, c), Configuration::Center, 64).unwrap();
                    assert!(seen.insert(r.pixels), "collision at {t} {s} {c}");
                }
            }
        }
        assert_eq!(seen.len(), 300);
    }

    #[test]
    fn sampled_panels_are_distinct_per_configuration() {
        for config in Configuration::ALL {
            let problems = generate_dataset(&GeneratorConfig::new(config, 21), 70).unwrap();
            let panels: HashSet<&Panel> = problems.iter().flat_map(|p| p.panels()).take(1000).collect();
            let rasters: HashSet<Vec<u8>> = panels
                .iter()
                .map(|p| render_panel(p, config, 64).unwrap().pixels)
                .collect();
            assert_eq!(rasters.len(), panels.len(), "{config}");
        }
    }

    #[test]
    fn grid_entities_are_separate_blobs() {
        let problems = generate_dataset(&GeneratorConfig::new(Configuration::Grid3x3, 4), 20).unwrap();
        for p in &problems {
            for panel in p.panels() {
                let r = render_panel(panel, Configuration::Grid3x3, 64).unwrap();
                assert_eq!(dark_components(&r), panel.components[0].number());
            }
        }
    }

    fn dark_components(r: &Raster) -> usize {
        let mut seen = vec![false; r.pixels.len()];
        let mut count = 0;
        for start in 0..r.pixels.len() {
            if seen[start] || r.pixels[start] == BACKGROUND {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = (i % r.width, i / r.width);
                let mut push = |j: usize| {
                    if !seen[j] && r.pixels[j] != BACKGROUND {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    push(i - 1);
                }
                if x + 1 < r.width {
                    push(i + 1);
                }
                if y > 0 {
                    push(i - r.width);
                }
                if y + 1 < r.height {
                    push(i + r.width);
                }
            }
        }
        count
    }

    #[test]
    fn pgm_round_trip() {
        let r = render_panel(&center(4, 5, 9), Configuration::Center, 32).unwrap();
        let bytes = r.to_pgm();
        assert!(bytes.starts_with(b"P5\n32 32\n255\n"));
        assert_eq!(Raster::from_pgm(&bytes).unwrap(), r);
        assert!(Raster::from_pgm(b"P2\n1 1\n255\n\x00").is_err());
    }

    #[test]
    fn invalid_panel_rejected() {
        let p = Panel::new(vec![]);
        assert!(matches!(
            render_panel(&p, Configuration::Center, 64),
            Err(Error::InvalidPanel(_))
        ));
    }

    #[test]
    fn sheet_layout_and_determinism() {
        let p = generate_indexed(&GeneratorConfig::new(Configuration::Center, 9), 0).unwrap();
        let a = render_problem_sheet(&p, 64).unwrap();
        let b = render_problem_sheet(
            &generate_indexed(&GeneratorConfig::new(Configuration::Center, 9), 0).unwrap(),
            64,
        )
        .unwrap();
        assert_eq!(a, b);
        let layout = SheetLayout::new(64);
        assert_eq!((a.width, a.height), (layout.width, layout.height));
        assert_eq!(layout.panel_regions(), 16);
        assert_eq!(SheetLayout::new(32).width, 4 * 34 + 5 * 4);
    }
}
