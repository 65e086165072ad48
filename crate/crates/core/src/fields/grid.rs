use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Uniform square-cell grid: `nx × ny` nodes, spacing `h`, lower-left corner `origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    h: f64,
    origin: [f64; 2],
}

impl Grid2D {
    /// A 13-point stencil needs two interior layers, hence `nx, ny ≥ 5`.
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Result<Self> {
        if nx < 5 || ny < 5 {
            return Err(Error::Dimension(format!(
                "need at least 5 nodes per axis, got {nx}×{ny}"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Parameter(format!("grid spacing must be positive, got {h}")));
        }
        if !origin[0].is_finite() || !origin[1].is_finite() {
            return Err(Error::Parameter("grid origin must be finite".into()));
        }
        Ok(Self { nx, ny, h, origin })
    }

    /// Grid over `[x0, x1] × [y0, y1]` with `n` nodes on the x-axis; `ny` follows
    /// from squareness of the cells (extents must be commensurate).
    pub fn from_box(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize) -> Result<Self> {
        if !(x1 > x0) || !(y1 > y0) {
            return Err(Error::Parameter("box extents must be positive".into()));
        }
        let h = (x1 - x0) / (nx as f64 - 1.0);
        let ny_f = (y1 - y0) / h;
        let ny = ny_f.round() as usize + 1;
        if ((ny - 1) as f64 * h - (y1 - y0)).abs() > 1e-9 * h {
            return Err(Error::Parameter(
                "box extents not commensurate with a square-cell grid".into(),
            ));
        }
        Self::new(nx, ny, h, [x0, y0])
    }

    /// Unit-square helper centered at the origin.
    pub fn centered_square(n: usize) -> Result<Self> {
        Self::from_box(-0.5, 0.5, -0.5, 0.5, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn pos(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    /// Fractional grid coordinates of a point.
    #[inline]
    pub fn to_grid_coords(&self, x: f64, y: f64) -> [f64; 2] {
        [(x - self.origin[0]) / self.h, (y - self.origin[1]) / self.h]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.nx;
        (0..self.ny).flat_map(move |j| (0..nx).map(move |i| (i, j)))
    }
}

/// Per-node classification of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Exterior,
    Boundary,
    Interior,
}

/// Scalar field on a uniform grid with an interior/boundary/exterior mask.
#[derive(Debug, Clone)]
pub struct ScalarField2D {
    grid: Grid2D,
    values: Vec<f64>,
    mask: Vec<NodeClass>,
}

impl ScalarField2D {
    /// Rectangle mask: border nodes are boundary, the rest interior.
    pub fn rect_mask(grid: &Grid2D) -> Vec<NodeClass> {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut mask = vec![NodeClass::Interior; nx * ny];
        for i in 0..nx {
            mask[grid.idx(i, 0)] = NodeClass::Boundary;
            mask[grid.idx(i, ny - 1)] = NodeClass::Boundary;
        }
        for j in 0..ny {
            mask[grid.idx(0, j)] = NodeClass::Boundary;
            mask[grid.idx(nx - 1, j)] = NodeClass::Boundary;
        }
        mask
    }

    /// Disc mask over the rectangle: nodes within `radius` of `center` are in the
    /// domain; in-domain nodes with a 4-neighbor outside (or on the grid edge)
    /// are boundary.
    pub fn disc_mask(grid: &Grid2D, center: [f64; 2], radius: f64) -> Vec<NodeClass> {
        let (nx, ny) = (grid.nx, grid.ny);
        let inside = |i: usize, j: usize| -> bool {
            let p = grid.pos(i, j);
            let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
            dx * dx + dy * dy <= radius * radius
        };
        let mut mask = vec![NodeClass::Exterior; nx * ny];
        for (i, j) in grid.nodes() {
            if !inside(i, j) {
                continue;
            }
            let edge = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
            let cut = edge
                || !inside(i - 1, j)
                || !inside(i + 1, j)
                || !inside(i, j - 1)
                || !inside(i, j + 1);
            mask[grid.idx(i, j)] = if cut { NodeClass::Boundary } else { NodeClass::Interior };
        }
        mask
    }

    pub fn new(grid: Grid2D, values: Vec<f64>, mask: Vec<NodeClass>) -> Result<Self> {
        if values.len() != grid.len() || mask.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "field storage {} does not match grid {}×{}",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        let f = Self { grid, values, mask };
        f.check_finite()?;
        Ok(f)
    }

    /// Field from a closure of position, rectangle mask.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mask = Self::rect_mask(&grid);
        Self::from_fn_masked(grid, mask, f)
    }

    pub fn from_fn_masked(
        grid: Grid2D,
        mask: Vec<NodeClass>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let values = grid
            .nodes()
            .map(|(i, j)| {
                let p = grid.pos(i, j);
                f(p[0], p[1])
            })
            .collect();
        Self::new(grid, values, mask)
    }

    pub fn constant(grid: Grid2D, c: f64) -> Result<Self> {
        Self::from_fn(grid, |_, _| c)
    }

    fn check_finite(&self) -> Result<()> {
        for (i, j) in self.grid.nodes() {
            let k = self.grid.idx(i, j);
            if self.mask[k] != NodeClass::Exterior && !self.values[k].is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite value at node ({i},{j})"
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mask(&self) -> &[NodeClass] {
        &self.mask
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    #[inline]
    pub fn class(&self, i: usize, j: usize) -> NodeClass {
        self.mask[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn is_defined(&self, i: usize, j: usize) -> bool {
        self.class(i, j) != NodeClass::Exterior
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.grid
            .nodes()
            .filter(move |&(i, j)| self.class(i, j) == NodeClass::Interior)
    }

    /// Max-norm over interior nodes of `self − other`.
    pub fn max_diff(&self, other: &ScalarField2D) -> f64 {
        self.interior_nodes()
            .map(|(i, j)| (self.at(i, j) - other.at(i, j)).abs())
            .fold(0.0, f64::max)
    }

    /// Max-norm over interior nodes.
    pub fn max_abs_interior(&self) -> f64 {
        self.interior_nodes()
            .map(|(i, j)| self.at(i, j).abs())
            .fold(0.0, f64::max)
    }

    /// Plain-text serialization: header `nx ny h ox oy`, then `ny` rows of `nx`
    /// values at full precision (17 significant digits).
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {:.16e} {:.16e} {:.16e}", g.nx, g.ny, g.h, g.origin[0], g.origin[1]);
        for j in 0..g.ny {
            let row: Vec<String> = (0..g.nx).map(|i| format!("{:.16e}", self.at(i, j))).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    /// Inverse of [`to_text`]; the mask is reconstructed as the rectangle mask.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field file".into()))?;
        let mut it = header.split_whitespace();
        let mut next = |name: &str| -> Result<f64> {
            it.next()
                .ok_or_else(|| Error::Parse(format!("missing {name} in header")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad {name} in header: {e}")))
        };
        let nx = next("nx")? as usize;
        let ny = next("ny")? as usize;
        let h = next("h")?;
        let ox = next("ox")?;
        let oy = next("oy")?;
        let grid = Grid2D::new(nx, ny, h, [ox, oy])?;
        let mut values = Vec::with_capacity(nx * ny);
        for (j, line) in lines.enumerate() {
            if j >= ny {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse(format!("extra row {} in field file", j + 2)));
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let row = row.map_err(|e| Error::Parse(format!("row {}: {e}", j + 2)))?;
            if row.len() != nx {
                return Err(Error::Parse(format!(
                    "row {} has {} values, expected {nx}",
                    j + 2,
                    row.len()
                )));
            }
            values.extend(row);
        }
        if values.len() != nx * ny {
            return Err(Error::Parse(format!(
                "field file has {} values, expected {}",
                values.len(),
                nx * ny
            )));
        }
        let mask = {
            let g = Grid2D::new(nx, ny, h, [ox, oy])?;
            Self::rect_mask(&g)
        };
        Self::new(grid, values, mask)
    }
}
