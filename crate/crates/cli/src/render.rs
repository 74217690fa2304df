//! SVG drawings of manipulability ellipses seen from above or the front.

use std::fmt::Write as _;

use manifold_icp::{SpdCloud, SpdMatrix};
use nalgebra::Matrix2;

use crate::error::{CliError, CliResult};

const PALETTE: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];
const CELL_PX: f64 = 80.0;
const MARGIN_PX: f64 = 20.0;
const LEGEND_ROW_PX: f64 = 18.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum View {
    /// Looking down the z axis; draws the x-y block.
    Top,
    /// Looking along the y axis; draws the x-z block.
    Front,
}

impl View {
    fn axes(self) -> (usize, usize) {
        match self {
            View::Top => (0, 1),
            View::Front => (0, 2),
        }
    }
}

/// Semi-axes in matrix units and the major axis direction in radians,
/// counter-clockwise from the first in-plane axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub major: f64,
    pub minor: f64,
    pub angle: f64,
}

/// Shadow of the ellipsoid `{x : xᵀ M⁻¹ x ≤ 1}` on the view plane, i.e. the
/// ellipse of the 2×2 principal submatrix.
pub fn project(m: &SpdMatrix, view: View) -> CliResult<Ellipse> {
    if m.dim() != 3 {
        return Err(CliError::Invalid(format!("rendering needs 3x3 matrices, got {0}x{0}", m.dim())));
    }
    let (i, j) = view.axes();
    let a = m.matrix();
    let block = Matrix2::new(a[(i, i)], a[(i, j)], a[(j, i)], a[(j, j)]);
    let eig = block.symmetric_eigen();
    let (hi, lo) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let v = eig.eigenvectors.column(hi);
    Ok(Ellipse {
        major: eig.eigenvalues[hi].max(0.0).sqrt(),
        minor: eig.eigenvalues[lo].max(0.0).sqrt(),
        angle: v[1].atan2(v[0]),
    })
}

/// Overlays up to three clouds point by point on a square grid; point `k`
/// of every cloud shares grid cell `k`.
pub fn render_svg(layers: &[(String, SpdCloud)], view: View) -> CliResult<String> {
    if layers.is_empty() || layers.len() > PALETTE.len() {
        return Err(CliError::Usage(format!("render takes 1 to {} datasets", PALETTE.len())));
    }
    let mut projected = Vec::with_capacity(layers.len());
    for (_, cloud) in layers {
        projected.push(cloud.iter().map(|m| project(m, view)).collect::<CliResult<Vec<_>>>()?);
    }
    let cells = projected.iter().map(Vec::len).max().unwrap_or(0);
    let cols = (cells as f64).sqrt().ceil().max(1.0) as usize;
    let rows = cells.div_ceil(cols).max(1);
    let largest = projected.iter().flatten().map(|e| e.major).fold(0.0, f64::max);
    let scale = if largest > 0.0 { 0.45 * CELL_PX / largest } else { 1.0 };

    let width = 2.0 * MARGIN_PX + cols as f64 * CELL_PX;
    let legend_h = layers.len() as f64 * LEGEND_ROW_PX;
    let height = 2.0 * MARGIN_PX + rows as f64 * CELL_PX + legend_h;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (layer, ellipses) in projected.iter().enumerate() {
        let colour = PALETTE[layer];
        writeln!(svg, r#"<g fill="none" stroke="{colour}" stroke-width="1.2">"#).unwrap();
        for (k, e) in ellipses.iter().enumerate() {
            let cx = MARGIN_PX + (k % cols) as f64 * CELL_PX + CELL_PX / 2.0;
            let cy = MARGIN_PX + (k / cols) as f64 * CELL_PX + CELL_PX / 2.0;
            // SVG's y axis points down, so the angle flips sign.
            let deg = -e.angle.to_degrees();
            writeln!(
                svg,
                r#"<ellipse cx="{cx:.3}" cy="{cy:.3}" rx="{:.3}" ry="{:.3}" transform="rotate({deg:.3} {cx:.3} {cy:.3})"/>"#,
                e.major * scale,
                e.minor * scale
            )
            .unwrap();
        }
        writeln!(svg, "</g>").unwrap();
    }
    let legend_y = MARGIN_PX + rows as f64 * CELL_PX;
    for (layer, (name, _)) in layers.iter().enumerate() {
        let y = legend_y + (layer as f64 + 0.7) * LEGEND_ROW_PX;
        writeln!(
            svg,
            r#"<line x1="{MARGIN_PX}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            MARGIN_PX + 20.0,
            PALETTE[layer],
            MARGIN_PX + 26.0,
            y + 4.0,
            escape(name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(d).unwrap()
    }

    #[test]
    fn identity_is_a_unit_circle() {
        for view in [View::Top, View::Front] {
            let e = project(&SpdMatrix::identity(3), view).unwrap();
            assert!((e.major - 1.0).abs() < 1e-12 && (e.minor - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn elongated_top_view() {
        let e = project(&diag(&[4.0, 1.0, 1.0]), View::Top).unwrap();
        assert!((e.major - 2.0).abs() < 1e-12);
        assert!((e.minor - 1.0).abs() < 1e-12);
        assert!(e.angle.sin().abs() < 1e-12);
    }

    #[test]
    fn front_view_uses_vertical_axis() {
        let e = project(&diag(&[1.0, 9.0, 4.0]), View::Front).unwrap();
        assert!((e.major - 2.0).abs() < 1e-12);
        assert!(e.angle.cos().abs() < 1e-12);
    }

    #[test]
    fn rejects_planar_matrices() {
        assert!(project(&SpdMatrix::identity(2), View::Top).is_err());
    }

    #[test]
    fn overlay_has_one_group_per_layer() {
        let c = SpdCloud::new(vec![SpdMatrix::identity(3), diag(&[4.0, 1.0, 1.0])]).unwrap();
        let svg = render_svg(&[("a".into(), c.clone()), ("b<c".into(), c)], View::Top).unwrap();
        assert_eq!(svg.matches("<g ").count(), 2);
        assert_eq!(svg.matches("<ellipse").count(), 4);
        assert!(svg.contains("b&lt;c"));
        assert!(render_svg(&[], View::Top).is_err());
    }
}
