use crate::error::{Error, Result};
use crate::fields::ScalarField2D;

/// Cubic Lagrange weights on the 4-node stencil {-1, 0, 1, 2} at offset `t ∈ [0,1]`.
#[inline]
fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Bicubic (tensor cubic Lagrange) interpolation of `f` at `(x, y)`.
///
/// Exact on polynomials of degree ≤ 3 per axis; O(h⁴) on smooth fields. Fails
/// with a geometry error if the 4×4 footprint touches a node where `f` is
/// undefined or leaves the grid.
pub fn bicubic(f: &ScalarField2D, x: f64, y: f64) -> Result<f64> {
    let g = f.grid();
    let [gx, gy] = g.to_grid_coords(x, y);
    let ix = gx.floor() as i64;
    let iy = gy.floor() as i64;
    let (bx, by) = (ix - 1, iy - 1);
    if bx < 0 || by < 0 || bx + 3 >= g.nx() as i64 || by + 3 >= g.ny() as i64 {
        return Err(Error::Geometry(format!(
            "interpolation footprint of ({x:.6}, {y:.6}) leaves the grid"
        )));
    }
    let (bx, by) = (bx as usize, by as usize);
    for dj in 0..4 {
        for di in 0..4 {
            if !f.is_defined(bx + di, by + dj) {
                return Err(Error::Geometry(format!(
                    "interpolation footprint of ({x:.6}, {y:.6}) touches an undefined node"
                )));
            }
        }
    }
    let wx = lagrange4(gx - ix as f64);
    let wy = lagrange4(gy - iy as f64);
    let mut v = 0.0;
    for dj in 0..4 {
        let mut row = 0.0;
        for di in 0..4 {
            row += wx[di] * f.at(bx + di, by + dj);
        }
        v += wy[dj] * row;
    }
    Ok(v)
}
