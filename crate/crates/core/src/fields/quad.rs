use crate::error::{Error, Result};
use crate::fields::ScalarField2D;

/// Antiderivative of sqrt(r² − x²).
#[inline]
fn circ_antideriv(x: f64, r: f64) -> f64 {
    let xc = x.clamp(-r, r);
    0.5 * (xc * (r * r - xc * xc).max(0.0).sqrt() + r * r * (xc / r).clamp(-1.0, 1.0).asin())
}

/// Exact area of {x² + y² ≤ r²} ∩ [x0,x1] × [y0,y1], rectangle given relative
/// to the circle center.
pub fn circle_rect_overlap(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    debug_assert!(x0 <= x1 && y0 <= y1);
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b || y0 >= r || y1 <= -r {
        return 0.0;
    }
    // breakpoints where the chord sqrt(r²−x²) crosses y0 or y1
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        if y.abs() < r {
            let xc = (r * r - y * y).sqrt();
            for x in [-xc, xc] {
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 0.0 {
            continue;
        }
        let m = 0.5 * (lo + hi);
        let gm = (r * r - m * m).max(0.0).sqrt();
        let top_is_chord = gm < y1;
        let bot_is_chord = -gm > y0;
        let top = if top_is_chord { gm } else { y1 };
        let bot = if bot_is_chord { -gm } else { y0 };
        if top <= bot {
            continue;
        }
        let int_top = if top_is_chord {
            circ_antideriv(hi, r) - circ_antideriv(lo, r)
        } else {
            y1 * (hi - lo)
        };
        let int_bot = if bot_is_chord {
            -(circ_antideriv(hi, r) - circ_antideriv(lo, r))
        } else {
            y0 * (hi - lo)
        };
        area += int_top - int_bot;
    }
    area
}

/// Quadrature of `f` over the disc B_r(center): nodal values weighted by the
/// exact overlap of the disc with each node's h×h cell.
pub fn disc_integral(f: &ScalarField2D, center: [f64; 2], r: f64) -> Result<f64> {
    disc_integral_weighted(f, center, r, |_| 1.0)
}

/// Same quadrature with an extra radial weight w(|x − center|).
pub fn disc_integral_weighted(
    f: &ScalarField2D,
    center: [f64; 2],
    r: f64,
    w: impl Fn(f64) -> f64,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Parameter(format!("disc radius must be positive, got {r}")));
    }
    let g = f.grid();
    let h = g.h();
    let [gcx, gcy] = g.to_grid_coords(center[0], center[1]);
    let reach = (r / h).ceil() as i64 + 1;
    let (ic, jc) = (gcx.round() as i64, gcy.round() as i64);
    let mut total = 0.0;
    for j in (jc - reach).max(0)..=(jc + reach).min(g.ny() as i64 - 1) {
        for i in (ic - reach).max(0)..=(ic + reach).min(g.nx() as i64 - 1) {
            let (iu, ju) = (i as usize, j as usize);
            let p = g.pos(iu, ju);
            let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
            let dist = (dx * dx + dy * dy).sqrt();
            let weight = if dist <= r - h {
                h * h
            } else if dist >= r + h {
                0.0
            } else {
                circle_rect_overlap(r, dx - 0.5 * h, dx + 0.5 * h, dy - 0.5 * h, dy + 0.5 * h)
            };
            if weight > 0.0 {
                if !f.is_defined(iu, ju) {
                    return Err(Error::Geometry(format!(
                        "disc B_{r:.4}({:.4},{:.4}) touches an undefined node",
                        center[0], center[1]
                    )));
                }
                total += weight * w(dist) * f.values()[g.idx(iu, ju)];
            }
        }
    }
    // the disc must not hang over the grid edge
    let [ox, oy] = g.origin();
    let (x1, y1) = (ox + (g.nx() - 1) as f64 * h, oy + (g.ny() - 1) as f64 * h);
    if center[0] - r < ox - 0.5 * h
        || center[0] + r > x1 + 0.5 * h
        || center[1] - r < oy - 0.5 * h
        || center[1] + r > y1 + 0.5 * h
    {
        return Err(Error::Geometry("disc leaves the grid".into()));
    }
    Ok(total)
}
