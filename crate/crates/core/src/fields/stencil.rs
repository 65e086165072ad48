use crate::error::{Error, Result};
use crate::fields::{Grid2D, NodeClass, ScalarField2D};
use crate::numerics::compensated_sum;

fn check_min_size(grid: &Grid2D) -> Result<()> {
    if grid.nx() < 5 || grid.ny() < 5 {
        return Err(Error::Dimension(format!(
            "stencil needs a grid of at least 5×5 nodes, got {}×{}",
            grid.nx(),
            grid.ny()
        )));
    }
    Ok(())
}

/// True where the node and its full 8-neighbourhood are in the domain.
fn has_ring1(f: &ScalarField2D, i: usize, j: usize) -> bool {
    if f.class(i, j) != NodeClass::Interior {
        return false;
    }
    for dj in -1i64..=1 {
        for di in -1i64..=1 {
            let (ii, jj) = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
            if !f.is_defined(ii, jj) {
                return false;
            }
        }
    }
    true
}

/// 5-point Laplacian, second order, on interior nodes; everything else is
/// flagged exterior in the result.
pub fn laplacian(f: &ScalarField2D) -> Result<ScalarField2D> {
    check_min_size(f.grid())?;
    let g = *f.grid();
    let h2 = g.h() * g.h();
    let mut values = vec![0.0; g.len()];
    let mut mask = vec![NodeClass::Exterior; g.len()];
    for (i, j) in f.interior_nodes() {
        let k = g.idx(i, j);
        values[k] = compensated_sum(&[
            f.at(i - 1, j),
            f.at(i + 1, j),
            f.at(i, j - 1),
            f.at(i, j + 1),
            -4.0 * f.at(i, j),
        ]) / h2;
        mask[k] = NodeClass::Interior;
    }
    ScalarField2D::new(g, values, mask)
}

/// 13-point bilaplacian as the composition of two 5-point Laplacians; defined
/// on interior nodes whose 4-neighbours are themselves interior.
pub fn bilaplacian(f: &ScalarField2D) -> Result<ScalarField2D> {
    let lap = laplacian(f)?;
    let g = *f.grid();
    let h2 = g.h() * g.h();
    let mut values = vec![0.0; g.len()];
    let mut mask = vec![NodeClass::Exterior; g.len()];
    for (i, j) in f.interior_nodes() {
        let deep = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            .into_iter()
            .all(|(ii, jj)| f.class(ii, jj) == NodeClass::Interior);
        if !deep {
            continue;
        }
        let k = g.idx(i, j);
        values[k] = compensated_sum(&[
            lap.at(i - 1, j),
            lap.at(i + 1, j),
            lap.at(i, j - 1),
            lap.at(i, j + 1),
            -4.0 * lap.at(i, j),
        ]) / h2;
        mask[k] = NodeClass::Interior;
    }
    ScalarField2D::new(g, values, mask)
}

/// Central first differences `(f_x, f_y)`, defined on interior nodes.
pub fn gradient(f: &ScalarField2D) -> Result<(ScalarField2D, ScalarField2D)> {
    check_min_size(f.grid())?;
    let g = *f.grid();
    let two_h = 2.0 * g.h();
    let mut fx = vec![0.0; g.len()];
    let mut fy = vec![0.0; g.len()];
    let mut mask = vec![NodeClass::Exterior; g.len()];
    for (i, j) in f.interior_nodes() {
        let k = g.idx(i, j);
        fx[k] = (f.at(i + 1, j) - f.at(i - 1, j)) / two_h;
        fy[k] = (f.at(i, j + 1) - f.at(i, j - 1)) / two_h;
        mask[k] = NodeClass::Interior;
    }
    Ok((
        ScalarField2D::new(g, fx, mask.clone())?,
        ScalarField2D::new(g, fy, mask)?,
    ))
}

/// Central second differences `(f_xx, f_xy, f_yy)`; the cross term needs the
/// full 8-neighbourhood, so all three are restricted to nodes that have it.
pub fn hessian(f: &ScalarField2D) -> Result<(ScalarField2D, ScalarField2D, ScalarField2D)> {
    check_min_size(f.grid())?;
    let g = *f.grid();
    let h2 = g.h() * g.h();
    let mut fxx = vec![0.0; g.len()];
    let mut fxy = vec![0.0; g.len()];
    let mut fyy = vec![0.0; g.len()];
    let mut mask = vec![NodeClass::Exterior; g.len()];
    let mut any = false;
    for (i, j) in f.interior_nodes() {
        if !has_ring1(f, i, j) {
            continue;
        }
        let k = g.idx(i, j);
        fxx[k] = (f.at(i + 1, j) - 2.0 * f.at(i, j) + f.at(i - 1, j)) / h2;
        fyy[k] = (f.at(i, j + 1) - 2.0 * f.at(i, j) + f.at(i, j - 1)) / h2;
        fxy[k] = (f.at(i + 1, j + 1) - f.at(i - 1, j + 1) - f.at(i + 1, j - 1)
            + f.at(i - 1, j - 1))
            / (4.0 * h2);
        mask[k] = NodeClass::Interior;
        any = true;
    }
    if !any {
        return Err(Error::Dimension("no node has the margin a Hessian stencil needs".into()));
    }
    Ok((
        ScalarField2D::new(g, fxx, mask.clone())?,
        ScalarField2D::new(g, fxy, mask.clone())?,
        ScalarField2D::new(g, fyy, mask)?,
    ))
}
