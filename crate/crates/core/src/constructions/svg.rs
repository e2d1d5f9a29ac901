//! Plain SVG output for `W_1`, its cells and their images, and for point clouds.

use std::fmt::Write;

use super::{build_cells, build_w1, one_dim_actions, letter, ConstructionError, ExampleParams, CELL_NAMES};
use crate::polytope::ConvexCell;

const COLORS: [&str; 4] = ["#d95f02", "#1b9e77", "#7570b3", "#e7298a"];

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
    w: f64,
    h: f64,
}

impl Frame {
    fn fit(cells: &[&ConvexCell], w: f64, h: f64) -> Frame {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in cells {
            let (a, b) = c.bbox_f64();
            for i in 0..2 {
                lo[i] = lo[i].min(a[i]);
                hi[i] = hi[i].max(b[i]);
            }
        }
        for i in 0..2 {
            let pad = 0.03 * (hi[i] - lo[i]).max(1e-9);
            lo[i] -= pad;
            hi[i] += pad;
        }
        Frame { lo, hi, w, h }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let u = (x - self.lo[0]) / (self.hi[0] - self.lo[0]) * self.w;
        let v = self.h - (y - self.lo[1]) / (self.hi[1] - self.lo[1]) * self.h;
        (u, v)
    }
}

/// Vertices in counterclockwise order around the centroid.
fn ring(c: &ConvexCell) -> Vec<[f64; 2]> {
    let pts: Vec<[f64; 2]> = c.vertices().iter().map(|v| [v[0].mid(), v[1].mid()]).collect();
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
    let mut pts = pts;
    pts.sort_by(|a, b| (a[1] - cy).atan2(a[0] - cx).partial_cmp(&(b[1] - cy).atan2(b[0] - cx)).unwrap());
    pts
}

fn polygon(out: &mut String, f: &Frame, c: &ConvexCell, style: &str) {
    let pts: Vec<String> = ring(c)
        .iter()
        .map(|p| {
            let (u, v) = f.map(p[0], p[1]);
            format!("{u:.2},{v:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polygon points="{}" {style}/>"#, pts.join(" "));
}

/// `W_1`, the four cells, and their images under `F_i` and `G_{j,i}`.
pub fn w1_figure(p: &ExampleParams, j: usize) -> Result<String, ConstructionError> {
    let w1 = build_w1(p.n, &p.delta)?;
    let cells = build_cells(p.n, &p.delta, &p.gamma)?;
    let acts = one_dim_actions(p.n, &p.tau)?;
    let maps = [&acts[letter(j, 1)], &acts[letter(j, 2)], &acts[6], &acts[7]];
    let images: Vec<ConvexCell> = cells.iter().zip(maps).map(|(c, f)| c.affine_image(f)).collect::<Result<_, _>>()?;
    let (w, h) = (900.0, 600.0);
    let frame = Frame::fit(&[&w1], w, h);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    polygon(&mut out, &frame, &w1, r#"fill="none" stroke="black" stroke-width="2""#);
    for (k, c) in cells.iter().enumerate() {
        polygon(&mut out, &frame, c, &format!(r#"fill="{}" fill-opacity="0.25" stroke="{}""#, COLORS[k], COLORS[k]));
    }
    for (k, c) in images.iter().enumerate() {
        polygon(&mut out, &frame, c, &format!(r#"fill="none" stroke="{}" stroke-dasharray="6 3" stroke-width="1.5""#, COLORS[k]));
    }
    for (k, name) in CELL_NAMES.iter().enumerate() {
        let _ = writeln!(out, r#"<text x="20" y="{}" fill="{}" font-family="sans-serif" font-size="16">{name}</text>"#, 30 + 22 * k, COLORS[k]);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Scatter plot of the first two coordinates (points on the line are drawn at height 0).
pub fn scatter_svg(points: &[Vec<f64>], size: f64) -> String {
    let xy: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p.get(1).copied().unwrap_or(0.0)]).collect();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &xy {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for p in &xy {
        let u = 5.0 + (p[0] - lo[0]) / span * (size - 10.0);
        let v = size - 5.0 - (p[1] - lo[1]) / span * (size - 10.0);
        let _ = writeln!(out, r#"<circle cx="{u:.2}" cy="{v:.2}" r="0.8" fill="black"/>"#);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_has_all_polygons() {
        let s = w1_figure(&ExampleParams::exact(7), 1).unwrap();
        assert_eq!(s.matches("<polygon").count(), 9);
        assert!(s.starts_with("<svg"));
    }
}
