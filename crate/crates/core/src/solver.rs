//! Damped-Newton solve of 2Δ²u = −β_ε(u) with hinged (Navier) boundary
//! conditions via the splitting Δu = w, 2Δw = −β_ε(u), w|∂Ω = 0, plus energy
//! minimization and the ε-sweep / decay diagnostics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{
    bilaplacian, disc_integral, gradient, hessian, laplacian, Grid2D, NodeClass, ScalarField2D,
};
use crate::forcing::BumpProfile;
use crate::numerics::{compensated_sum, BandMatrix};

/// Problem data for the hinged boundary-value problem.
#[derive(Clone)]
pub struct NavierProblem {
    pub grid: Grid2D,
    /// Field whose boundary-node values define u₀ on ∂Ω.
    pub boundary: ScalarField2D,
    pub eps: f64,
    pub forcing: BumpProfile,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub damping_floor: f64,
}

impl NavierProblem {
    pub fn new(boundary: ScalarField2D, eps: f64, forcing: BumpProfile) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Parameter(format!("ε must lie in (0, 1], got {eps}")));
        }
        Ok(Self {
            grid: *boundary.grid(),
            boundary,
            eps,
            forcing,
            residual_tol: 1e-8,
            max_iter: 60,
            damping_floor: (2.0f64).powi(-20),
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Parameter(format!("residual tolerance must be positive, got {tol}")));
        }
        self.residual_tol = tol;
        Ok(self)
    }

    /// Biharmonic extension of the boundary data (β ≡ 0): the default initial
    /// guess, exact after one linear solve.
    pub fn biharmonic_initial(&self) -> Result<ScalarField2D> {
        let mut engine = Engine::new(self, ConstraintMode::BoundaryOnly)?;
        let mut u = self.boundary.clone();
        engine.newton_step_linear(&mut u)?;
        Ok(u)
    }
}

/// Which nodes stay frozen during energy minimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    /// Freeze the boundary nodes only; the discrete natural boundary condition
    /// is then the hinged splitting itself.
    BoundaryOnly,
    /// Additionally freeze the first interior layer at the initial values
    /// (clamps the discrete normal derivative).
    OneLayer,
}

/// Iteration record of a solve or minimization.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Max-norm of 2Δw + β_ε(u) over the deep interior, w being the solved
    /// intermediate (equals 2Δ²u + β_ε(u) there up to the splitting residual).
    pub final_residual: f64,
    /// Max-norm of the splitting defect Δu − w.
    pub splitting_residual: f64,
    pub energy: f64,
    /// Sub-sampled area of {0 < u ≤ ε} over the whole domain.
    pub transition_area: f64,
    /// Per-iteration (residual, energy), starting at the initial iterate.
    pub trace: Vec<(f64, f64)>,
}

impl SolveReport {
    /// CSV with header `iter,residual,energy`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,residual,energy\n");
        for (k, (r, e)) in self.trace.iter().enumerate() {
            s.push_str(&format!("{k},{r:.12e},{e:.12e}\n"));
        }
        s
    }

    pub fn energy_trace_nonincreasing(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12 * (1.0 + w[0].1.abs()))
    }
}

/// Trapezoidal node weight for the energy quadrature on the rectangle hull.
fn node_weight(grid: &Grid2D, i: usize, j: usize) -> f64 {
    let wx = if i == 0 || i == grid.nx() - 1 { 0.5 } else { 1.0 };
    let wy = if j == 0 || j == grid.ny() - 1 { 0.5 } else { 1.0 };
    wx * wy * grid.h() * grid.h()
}

/// J_ε[u] = ∫ |Δu|² + 𝓑_ε(u): nodal quadrature, |Δ_h u|² over interior nodes,
/// 𝓑_ε over all defined nodes with trapezoidal weights.
pub fn energy(u: &ScalarField2D, eps: f64, forcing: &BumpProfile) -> Result<f64> {
    let lap = laplacian(u)?;
    bulk_energy(u, &lap, |v| forcing.beta_eps_integral(v, eps).unwrap())
}

/// J[u] = ∫ |Δu|² + χ_{(0,∞)}(u): the ε → 0 limit functional.
pub fn energy_limit(u: &ScalarField2D) -> Result<f64> {
    let lap = laplacian(u)?;
    bulk_energy(u, &lap, |v| if v > 0.0 { 1.0 } else { 0.0 })
}

fn bulk_energy(u: &ScalarField2D, lap: &ScalarField2D, bulk: impl Fn(f64) -> f64) -> Result<f64> {
    let g = u.grid();
    let h2 = g.h() * g.h();
    let mut j = 0.0;
    for (i, jj) in g.nodes() {
        match u.class(i, jj) {
            NodeClass::Interior => {
                let l = lap.at(i, jj);
                j += h2 * l * l + node_weight(g, i, jj) * bulk(u.at(i, jj));
            }
            NodeClass::Boundary => {
                j += node_weight(g, i, jj) * bulk(u.at(i, jj));
            }
            NodeClass::Exterior => {}
        }
    }
    Ok(j)
}

/// Nodal (trapezoid-weighted) measure of the transition strip; `strict` uses
/// {0 < u < ε}, otherwise {0 < u ≤ ε}. This is the exact discrete counterpart
/// of the energy quadrature, so 0 ≤ J[u] − J_ε[u] ≤ strip holds identically.
pub fn nodal_strip_measure(u: &ScalarField2D, eps: f64, strict: bool) -> f64 {
    let g = u.grid();
    let mut area = 0.0;
    for (i, j) in g.nodes() {
        if !u.is_defined(i, j) {
            continue;
        }
        let v = u.at(i, j);
        let inside = v > 0.0 && if strict { v < eps } else { v <= eps };
        if inside {
            area += node_weight(g, i, j);
        }
    }
    area
}

/// |{0 < u ≤ ε} ∩ B_radius(center)|: cell counting with 8×8 sub-sampling and
/// bilinear interpolation inside each cell.
pub fn transition_measure(
    u: &ScalarField2D,
    eps: f64,
    center: [f64; 2],
    radius: f64,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Parameter(format!("ball radius must be positive, got {radius}")));
    }
    Ok(strip_area_impl(u, eps, Some((center, radius))))
}

/// |{0 < u ≤ ε}| over the whole domain.
pub fn strip_area(u: &ScalarField2D, eps: f64) -> f64 {
    strip_area_impl(u, eps, None)
}

fn strip_area_impl(u: &ScalarField2D, eps: f64, ball: Option<([f64; 2], f64)>) -> f64 {
    const S: usize = 8;
    let g = u.grid();
    let h = g.h();
    let sub = h / S as f64;
    let mut area = 0.0;
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            if !(u.is_defined(i, j)
                && u.is_defined(i + 1, j)
                && u.is_defined(i, j + 1)
                && u.is_defined(i + 1, j + 1))
            {
                continue;
            }
            let p0 = g.pos(i, j);
            if let Some((c, r)) = ball {
                // quick reject: cell entirely outside the ball
                let dx = (p0[0] + 0.5 * h - c[0]).abs() - 0.75 * h;
                let dy = (p0[1] + 0.5 * h - c[1]).abs() - 0.75 * h;
                if dx.max(0.0).hypot(dy.max(0.0)) > r {
                    continue;
                }
            }
            let (f00, f10, f01, f11) =
                (u.at(i, j), u.at(i + 1, j), u.at(i, j + 1), u.at(i + 1, j + 1));
            for sj in 0..S {
                let ty = (sj as f64 + 0.5) / S as f64;
                for si in 0..S {
                    let tx = (si as f64 + 0.5) / S as f64;
                    let v = f00 * (1.0 - tx) * (1.0 - ty)
                        + f10 * tx * (1.0 - ty)
                        + f01 * (1.0 - tx) * ty
                        + f11 * tx * ty;
                    if v > 0.0 && v <= eps {
                        if let Some((c, r)) = ball {
                            let (x, y) = (p0[0] + (si as f64 + 0.5) * sub, p0[1] + (sj as f64 + 0.5) * sub);
                            if (x - c[0]).hypot(y - c[1]) > r {
                                continue;
                            }
                        }
                        area += sub * sub;
                    }
                }
            }
        }
    }
    area
}

// ---------------------------------------------------------------------------
// Newton engine on the reduced splitting system
// ---------------------------------------------------------------------------

/// Free-node numbering and the banded operator machinery shared by the Newton
/// solve, the energy minimizer, and the linear extensions.
struct Engine<'a> {
    problem: &'a NavierProblem,
    /// grid index → free index
    free: Vec<Option<usize>>,
    /// free index → (i, j)
    nodes: Vec<(usize, usize)>,
    bandwidth: usize,
    /// fixed preconditioner (β′ ≡ 0 part), factored lazily
    linear_part: Option<BandMatrix>,
}

impl<'a> Engine<'a> {
    fn new(problem: &'a NavierProblem, mode: ConstraintMode) -> Result<Self> {
        let u0 = &problem.boundary;
        let g = &problem.grid;
        let mut free = vec![None; g.len()];
        let mut nodes = Vec::new();
        for (i, j) in u0.interior_nodes() {
            if mode == ConstraintMode::OneLayer {
                let adj_boundary = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                    .into_iter()
                    .any(|(ii, jj)| u0.class(ii, jj) == NodeClass::Boundary);
                if adj_boundary {
                    continue;
                }
            }
            free[g.idx(i, j)] = Some(nodes.len());
            nodes.push((i, j));
        }
        if nodes.is_empty() {
            return Err(Error::Dimension("no free nodes".into()));
        }
        // band reach of the composed 13-point stencil in free numbering
        let mut bw = 0usize;
        for (p, &(i, j)) in nodes.iter().enumerate() {
            for (ii, jj, _) in five_point(i, j) {
                if let Some(q) = free[g.idx(ii, jj)] {
                    bw = bw.max(p.abs_diff(q));
                }
            }
        }
        Ok(Self { problem, free, nodes, bandwidth: 2 * bw, linear_part: None })
    }

    /// w = Δ_h u on interior nodes, 0 elsewhere (the hinged intermediate).
    fn intermediate(&self, u: &ScalarField2D) -> ScalarField2D {
        let g = &self.problem.grid;
        let h2 = g.h() * g.h();
        let mut w = vec![0.0; g.len()];
        let mask = u.mask().to_vec();
        for (i, j) in u.interior_nodes() {
            w[g.idx(i, j)] = compensated_sum(&[
                u.at(i - 1, j),
                u.at(i + 1, j),
                u.at(i, j - 1),
                u.at(i, j + 1),
                -4.0 * u.at(i, j),
            ]) / h2;
        }
        ScalarField2D::new(*g, w, mask).expect("intermediate field")
    }

    /// Residual of the second equation, 2Δ_h w + s·β_ε(u), at the free nodes;
    /// w is taken as zero outside the interior (the hinged condition).
    fn residual_second(&self, u: &ScalarField2D, w: &ScalarField2D, forcing_scale: f64) -> Vec<f64> {
        let g = &self.problem.grid;
        let h2 = g.h() * g.h();
        let wat = |i: usize, j: usize| -> f64 {
            if u.class(i, j) == NodeClass::Interior {
                w.at(i, j)
            } else {
                0.0
            }
        };
        self.nodes
            .iter()
            .map(|&(i, j)| {
                let lap_w = compensated_sum(&[
                    wat(i - 1, j),
                    wat(i + 1, j),
                    wat(i, j - 1),
                    wat(i, j + 1),
                    -4.0 * wat(i, j),
                ]) / h2;
                let beta = if forcing_scale == 0.0 {
                    0.0
                } else {
                    forcing_scale
                        * self
                            .problem
                            .forcing
                            .beta_eps(u.at(i, j), self.problem.eps)
                            .expect("ε validated at construction")
                };
                2.0 * lap_w + beta
            })
            .collect()
    }

    /// Residual of the first equation, Δ_h u − w, at the free nodes.
    fn residual_first(&self, u: &ScalarField2D, w: &ScalarField2D) -> Vec<f64> {
        let lap = self.intermediate(u);
        self.nodes.iter().map(|&(i, j)| lap.at(i, j) - w.at(i, j)).collect()
    }

    /// Gradient of the discrete energy (the composed strong form), used by the
    /// minimizer: 2Δ_h(χ_int Δ_h u) + β_ε(u).
    fn residual(&self, u: &ScalarField2D, forcing_scale: f64) -> Vec<f64> {
        let w = self.intermediate(u);
        self.residual_second(u, &w, forcing_scale)
    }

    /// Free-node vector → field on the problem mask, zero elsewhere.
    fn scatter(&self, v: &[f64]) -> ScalarField2D {
        let g = &self.problem.grid;
        let mut vals = vec![0.0; g.len()];
        for (q, &(i, j)) in self.nodes.iter().enumerate() {
            vals[g.idx(i, j)] = v[q];
        }
        ScalarField2D::new(*g, vals, self.problem.boundary.mask().to_vec())
            .expect("scattered field")
    }

    /// Assemble 2·L(χ_int L) + diag(β_ε′(u)) over the free nodes.
    fn assemble(&self, u: Option<&ScalarField2D>) -> Result<BandMatrix> {
        let g = &self.problem.grid;
        let mut a = BandMatrix::zeros(self.nodes.len(), self.bandwidth, self.bandwidth);
        let interior = |i: usize, j: usize| self.problem.boundary.class(i, j) == NodeClass::Interior;
        for (p, &(i, j)) in self.nodes.iter().enumerate() {
            for (ki, kj, c1) in five_point(i, j) {
                if !interior(ki, kj) {
                    continue;
                }
                for (qi, qj, c2) in five_point(ki, kj) {
                    if let Some(q) = self.free[g.idx(qi, qj)] {
                        a.add(p, q, 2.0 * c1 * c2 / (g.h().powi(4)));
                    }
                }
            }
            if let Some(u) = u {
                let d = self.problem.forcing.beta_eps_prime(u.at(i, j), self.problem.eps)?;
                a.add(p, p, d);
            }
        }
        Ok(a)
    }

    /// One exact Newton step of the linear (β ≡ 0) problem, in place.
    fn newton_step_linear(&mut self, u: &mut ScalarField2D) -> Result<()> {
        let mut rhs: Vec<f64> = self.residual(u, 0.0).iter().map(|r| -r).collect();
        let mut a = self.assemble(None)?;
        a.factor()?;
        a.solve(&mut rhs);
        for (p, &(i, j)) in self.nodes.iter().enumerate() {
            let v = u.at(i, j) + rhs[p];
            u.set(i, j, v);
        }
        Ok(())
    }

    fn linear_part(&mut self) -> Result<&BandMatrix> {
        if self.linear_part.is_none() {
            let mut m = self.assemble(None)?;
            m.factor()?;
            self.linear_part = Some(m);
        }
        Ok(self.linear_part.as_ref().unwrap())
    }
}

#[inline]
fn five_point(i: usize, j: usize) -> [(usize, usize, f64); 5] {
    [
        (i, j, -4.0),
        (i - 1, j, 1.0),
        (i + 1, j, 1.0),
        (i, j - 1, 1.0),
        (i, j + 1, 1.0),
    ]
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Max of 2Δ_h w + β_ε(u) over nodes where the 13-point stencil lives.
fn deep_interior_residual(
    u: &ScalarField2D,
    w: &ScalarField2D,
    eps: f64,
    forcing: &BumpProfile,
) -> Result<f64> {
    let bl = bilaplacian(u)?; // only to identify the deep-interior mask
    let g = u.grid();
    let h2 = g.h() * g.h();
    let wat = |i: usize, j: usize| -> f64 {
        if u.class(i, j) == NodeClass::Interior {
            w.at(i, j)
        } else {
            0.0
        }
    };
    let mut worst = 0.0f64;
    for (i, j) in bl.interior_nodes() {
        let lap_w = compensated_sum(&[
            wat(i - 1, j),
            wat(i + 1, j),
            wat(i, j - 1),
            wat(i, j + 1),
            -4.0 * wat(i, j),
        ]) / h2;
        let r = 2.0 * lap_w + forcing.beta_eps(u.at(i, j), eps)?;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Damped Newton on the coupled splitting system Δu = w, 2Δw = −β_ε(u),
/// u|∂Ω = u₀, w|∂Ω = 0. The Newton step solves the sparse block Jacobian by
/// exact elimination of δw (δw = Δδu + r₁) onto a banded system in δu; both
/// equation residuals enter the convergence test. Returns the solution field
/// and the iteration report.
pub fn solve_navier(
    p: &NavierProblem,
    initial: &ScalarField2D,
) -> Result<(ScalarField2D, SolveReport)> {
    let (u, _, report) = solve_navier_coupled(p, initial)?;
    Ok((u, report))
}

/// As [`solve_navier`], additionally returning the intermediate w = Δu
/// (zero on the boundary).
pub fn solve_navier_coupled(
    p: &NavierProblem,
    initial: &ScalarField2D,
) -> Result<(ScalarField2D, ScalarField2D, SolveReport)> {
    let engine = Engine::new(p, ConstraintMode::BoundaryOnly)?;
    let mut u = impose_boundary(p, initial)?;
    let mut w = engine.intermediate(&u);
    let mut trace = Vec::new();
    let mut stagnated = 0usize;

    let norm = |r1: &[f64], r2: &[f64]| max_abs(r1).max(max_abs(r2));
    let mut r1 = engine.residual_first(&u, &w);
    let mut r2 = engine.residual_second(&u, &w, 1.0);
    let mut rn = norm(&r1, &r2);
    trace.push((rn, energy(&u, p.eps, &p.forcing)?));

    let mut iterations = 0usize;
    while rn > p.residual_tol {
        if iterations >= p.max_iter {
            return Err(Error::Iteration { iterations, residual: rn, best: Box::new(u) });
        }
        let mut a = engine.assemble(Some(&u))?;
        a.factor()?;
        // eliminate δw = Δδu + r₁: banded system (2ΔχΔ + β′)δu = −r₂ − 2Δχr₁
        let r1_field = engine.scatter(&r1);
        let lap_r1 = engine.intermediate(&r1_field);
        let mut delta: Vec<f64> = engine
            .nodes
            .iter()
            .enumerate()
            .map(|(q, &(i, j))| -r2[q] - 2.0 * lap_r1.at(i, j))
            .collect();
        a.solve(&mut delta);

        // halve the step while the residual norm does not decrease
        let lap_du = {
            let du = engine.scatter(&delta);
            engine.intermediate(&du)
        };
        let mut eta = 1.0;
        let (best, best_rn);
        loop {
            let mut tu = u.clone();
            for (q, &(i, j)) in engine.nodes.iter().enumerate() {
                let v = tu.at(i, j) + eta * delta[q];
                tu.set(i, j, v);
            }
            // δw = Δδu + r₁
            let mut tw = w.clone();
            for (q, &(i, j)) in engine.nodes.iter().enumerate() {
                let v = tw.at(i, j) + eta * (lap_du.at(i, j) + r1[q]);
                tw.set(i, j, v);
            }
            let tr1 = engine.residual_first(&tu, &tw);
            let tr2 = engine.residual_second(&tu, &tw, 1.0);
            let trn = norm(&tr1, &tr2);
            if trn < rn || eta <= p.damping_floor {
                best = (tu, tw, tr1, tr2);
                best_rn = trn;
                break;
            }
            eta *= 0.5;
        }
        if best_rn >= rn {
            stagnated += 1;
            if stagnated >= 3 {
                return Err(Error::Iteration { iterations, residual: rn, best: Box::new(u) });
            }
        } else {
            stagnated = 0;
        }
        (u, w, r1, r2) = best;
        rn = best_rn;
        iterations += 1;
        trace.push((rn, energy(&u, p.eps, &p.forcing)?));
    }

    let report = SolveReport {
        iterations,
        final_residual: deep_interior_residual(&u, &w, p.eps, &p.forcing)?,
        splitting_residual: max_abs(&r1),
        energy: energy(&u, p.eps, &p.forcing)?,
        transition_area: strip_area(&u, p.eps),
        trace,
    };
    Ok((u, w, report))
}

/// Monotone descent on the discrete J_ε: backtracking line search along the
/// direction preconditioned by the fixed biharmonic part. The energy trace is
/// nonincreasing by construction.
pub fn minimize_energy(
    p: &NavierProblem,
    initial: &ScalarField2D,
    mode: ConstraintMode,
) -> Result<(ScalarField2D, SolveReport)> {
    let mut engine = Engine::new(p, mode)?;
    let mut u = impose_boundary(p, initial)?;
    let mut j_cur = energy(&u, p.eps, &p.forcing)?;
    let mut trace = Vec::new();

    let mut iterations = 0usize;
    loop {
        let g_vec = engine.residual(&u, 1.0);
        let gn = max_abs(&g_vec);
        trace.push((gn, j_cur));
        if gn <= p.residual_tol {
            break;
        }
        if iterations >= p.max_iter.max(200) {
            return Err(Error::Iteration { iterations, residual: gn, best: Box::new(u) });
        }

        let mut dir: Vec<f64> = g_vec.iter().map(|x| -x).collect();
        engine.linear_part()?.solve(&mut dir);
        // descent rate in the h²-weighted inner product
        let h2 = p.grid.h() * p.grid.h();
        let slope: f64 = g_vec.iter().zip(&dir).map(|(g, d)| g * d).sum::<f64>() * h2;

        let mut eta = 1.0;
        let mut accepted = None;
        while eta > p.damping_floor {
            let mut trial = u.clone();
            for (q, &(i, j)) in engine.nodes.iter().enumerate() {
                let v = trial.at(i, j) + eta * dir[q];
                trial.set(i, j, v);
            }
            let j_trial = energy(&trial, p.eps, &p.forcing)?;
            if j_trial <= j_cur + 1e-4 * eta * slope {
                accepted = Some((trial, j_trial));
                break;
            }
            eta *= 0.5;
        }
        let Some((next, j_next)) = accepted else {
            break; // line search exhausted: no descent direction left
        };
        let rel_drop = (j_cur - j_next) / (1.0 + j_cur.abs());
        u = next;
        j_cur = j_next;
        iterations += 1;
        if rel_drop < 1e-14 {
            let gn = max_abs(&engine.residual(&u, 1.0));
            trace.push((gn, j_cur));
            break;
        }
    }

    let gn = max_abs(&engine.residual(&u, 1.0));
    let report = SolveReport {
        iterations,
        final_residual: gn,
        splitting_residual: 0.0,
        energy: j_cur,
        transition_area: strip_area(&u, p.eps),
        trace,
    };
    Ok((u, report))
}

fn impose_boundary(p: &NavierProblem, initial: &ScalarField2D) -> Result<ScalarField2D> {
    if initial.grid() != &p.grid || initial.mask() != p.boundary.mask() {
        return Err(Error::Domain(
            "initial iterate must live on the problem's grid and mask".into(),
        ));
    }
    let mut u = initial.clone();
    for (i, j) in p.grid.nodes() {
        if u.class(i, j) == NodeClass::Boundary {
            u.set(i, j, p.boundary.at(i, j));
        }
    }
    Ok(u)
}

/// Dirichlet Poisson solve Δ_h u = rhs with u = g on the boundary nodes.
pub fn poisson_solve(
    boundary: &ScalarField2D,
    rhs: impl Fn(usize, usize) -> f64,
) -> Result<ScalarField2D> {
    let g = boundary.grid();
    let mut free = vec![None; g.len()];
    let mut nodes = Vec::new();
    for (i, j) in boundary.interior_nodes() {
        free[g.idx(i, j)] = Some(nodes.len());
        nodes.push((i, j));
    }
    let mut bw = 0usize;
    for (p, &(i, j)) in nodes.iter().enumerate() {
        for (ii, jj, _) in five_point(i, j) {
            if let Some(q) = free[g.idx(ii, jj)] {
                bw = bw.max(p.abs_diff(q));
            }
        }
    }
    let h2 = g.h() * g.h();
    let mut a = BandMatrix::zeros(nodes.len(), bw, bw);
    let mut b = vec![0.0; nodes.len()];
    for (p, &(i, j)) in nodes.iter().enumerate() {
        b[p] = rhs(i, j);
        for (ki, kj, c) in five_point(i, j) {
            match free[g.idx(ki, kj)] {
                Some(q) => a.add(p, q, c / h2),
                None => b[p] -= c / h2 * boundary.at(ki, kj),
            }
        }
    }
    a.factor()?;
    a.solve(&mut b);
    let mut u = boundary.clone();
    for (p, &(i, j)) in nodes.iter().enumerate() {
        u.set(i, j, b[p]);
    }
    Ok(u)
}

// ---------------------------------------------------------------------------
// ε-sweep diagnostics
// ---------------------------------------------------------------------------

/// Per-ε diagnostics of an ε-sweep; the pairwise columns compare the solution
/// at this ε with the next (smaller) one and are NaN on the last row.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub sup_diff: f64,
    pub grad_sup_diff: f64,
    pub w22_diff: f64,
    pub w24_diff: f64,
    pub lap_l2_diff: f64,
    pub bmo: f64,
    pub j_eps: f64,
    pub j_limit: f64,
    pub transition_area: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<SweepRow>,
    /// (ε, message) for solves that failed; the sweep continues past them.
    pub failures: Vec<(f64, String)>,
}

impl ConvergenceReport {
    /// CSV with the declared sweep schema.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,sup_diff,w22_diff,w24_diff,bmo,J_eps,J_limit,transition_area\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.6e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.eps, r.sup_diff, r.w22_diff, r.w24_diff, r.bmo, r.j_eps, r.j_limit, r.transition_area
            ));
        }
        s
    }
}

/// Solve the template problem for each ε and report the convergence
/// diagnostics. Solver failures are recorded and skipped.
pub fn eps_sweep(template: &NavierProblem, eps_list: &[f64]) -> Result<ConvergenceReport> {
    let solves: Vec<(f64, std::result::Result<ScalarField2D, String>)> = eps_list
        .par_iter()
        .map(|&eps| {
            let run = || -> Result<ScalarField2D> {
                let mut p = template.clone();
                p.eps = eps;
                let init = p.biharmonic_initial()?;
                Ok(solve_navier(&p, &init)?.0)
            };
            (eps, run().map_err(|e| e.to_string()))
        })
        .collect();

    let mut report = ConvergenceReport::default();
    let ok: Vec<(f64, ScalarField2D)> = solves
        .into_iter()
        .filter_map(|(eps, r)| match r {
            Ok(u) => Some((eps, u)),
            Err(msg) => {
                report.failures.push((eps, msg));
                None
            }
        })
        .collect();

    for (k, (eps, u)) in ok.iter().enumerate() {
        let lap = laplacian(u)?;
        let next = ok.get(k + 1).map(|(_, v)| v);
        let (sup_diff, grad_sup_diff, w22, w24, lap_l2) = match next {
            Some(v) => pair_distances(u, v)?,
            None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        report.rows.push(SweepRow {
            eps: *eps,
            sup_diff,
            grad_sup_diff,
            w22_diff: w22,
            w24_diff: w24,
            lap_l2_diff: lap_l2,
            bmo: bmo_seminorm(&lap),
            j_eps: energy(u, *eps, &template.forcing)?,
            j_limit: energy_limit(u)?,
            transition_area: strip_area(u, *eps),
        });
    }
    Ok(report)
}

fn pair_distances(u: &ScalarField2D, v: &ScalarField2D) -> Result<(f64, f64, f64, f64, f64)> {
    let g = u.grid();
    let h2 = g.h() * g.h();
    let d = {
        let vals: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a - b).collect();
        ScalarField2D::new(*g, vals, u.mask().to_vec())?
    };
    let sup = d.max_abs_interior();
    let (dx, dy) = gradient(&d)?;
    let mut grad_sup = 0.0f64;
    for (i, j) in dx.interior_nodes() {
        grad_sup = grad_sup.max(dx.at(i, j).hypot(dy.at(i, j)));
    }
    let (dxx, dxy, dyy) = hessian(&d)?;
    let lapd = laplacian(&d)?;
    let (mut s2, mut s4, mut l2) = (0.0, 0.0, 0.0);
    for (i, j) in dxx.interior_nodes() {
        let terms = [d.at(i, j), dx.at(i, j), dy.at(i, j), dxx.at(i, j), dxy.at(i, j), dyy.at(i, j)];
        for t in terms {
            s2 += h2 * t * t;
            s4 += h2 * t.powi(4);
        }
        l2 += h2 * lapd.at(i, j) * lapd.at(i, j);
    }
    Ok((sup, grad_sup, s2.sqrt(), s4.powf(0.25), l2.sqrt()))
}

/// Discrete BMO seminorm of a field: max over dyadic sub-squares with side
/// ≥ 4h of the mean absolute deviation from the square's mean.
pub fn bmo_seminorm(f: &ScalarField2D) -> f64 {
    let g = f.grid();
    let n_cells = (g.nx() - 1).min(g.ny() - 1);
    let mut side = 4usize; // in cells
    let mut worst = 0.0f64;
    while side <= n_cells {
        let mut jy = 0;
        while jy + side <= g.ny() - 1 {
            let mut ix = 0;
            while ix + side <= g.nx() - 1 {
                let mut sum = 0.0;
                let mut count = 0usize;
                for j in jy..=jy + side {
                    for i in ix..=ix + side {
                        if f.class(i, j) == NodeClass::Interior {
                            sum += f.at(i, j);
                            count += 1;
                        }
                    }
                }
                if count > 0 {
                    let mean = sum / count as f64;
                    let mut dev = 0.0;
                    for j in jy..=jy + side {
                        for i in ix..=ix + side {
                            if f.class(i, j) == NodeClass::Interior {
                                dev += (f.at(i, j) - mean).abs();
                            }
                        }
                    }
                    worst = worst.max(dev / count as f64);
                }
                ix += side;
            }
            jy += side;
        }
        side *= 2;
    }
    worst
}

// ---------------------------------------------------------------------------
// Appendix decay estimate
// ---------------------------------------------------------------------------

/// Pieces of the interior decay estimate at one (x₀, R): the gradient/Hessian
/// decay quantities, the right-hand integrals against u − min u, the
/// mean-Laplacian lower bound, and the smallest admissible constant.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub center: [f64; 2],
    pub radius: f64,
    pub lhs_gradient: f64,
    pub lhs_hessian: f64,
    pub rhs_quadratic: f64,
    pub rhs_linear: f64,
    pub mean_lap_bound: f64,
    pub fitted_c: f64,
}

/// Evaluate the decay estimate around `x0` at radius `r` with reference scale
/// `r0`: requires r < r0/4 and B_{4r}, B_{r0} inside the field's interior.
pub fn decay_estimate_check(
    u: &ScalarField2D,
    x0: [f64; 2],
    r: f64,
    r0: f64,
) -> Result<DecayReport> {
    if !(r > 0.0 && r < r0 / 4.0) {
        return Err(Error::Parameter(format!("need 0 < R < R₀/4, got R = {r}, R₀ = {r0}")));
    }
    let (ux, uy) = gradient(u)?;
    let (uxx, uxy, uyy) = hessian(u)?;
    let lap = laplacian(u)?;
    let g = u.grid();

    let grad2 = field_map2(&ux, &uy, |a, b| a * a + b * b)?;
    let hess2 = {
        let vals: Vec<f64> = uxx
            .values()
            .iter()
            .zip(uxy.values())
            .zip(uyy.values())
            .map(|((a, b), c)| a * a + 2.0 * b * b + c * c)
            .collect();
        ScalarField2D::new(*g, vals, uxx.mask().to_vec())?
    };

    let lhs_gradient = disc_integral(&grad2, x0, r)? / r.powi(4);
    let lhs_hessian = disc_integral(&hess2, x0, r)? / (r * r);

    // m = min over B_{4r}
    let r4 = 4.0 * r;
    let mut m = f64::INFINITY;
    for (i, j) in g.nodes() {
        if !u.is_defined(i, j) {
            continue;
        }
        let p = g.pos(i, j);
        if (p[0] - x0[0]).hypot(p[1] - x0[1]) <= r4 {
            m = m.min(u.at(i, j));
        }
    }
    if !m.is_finite() {
        return Err(Error::Geometry("B_{4R} contains no defined node".into()));
    }
    let shifted = {
        let vals: Vec<f64> = u.values().iter().map(|v| v - m).collect();
        ScalarField2D::new(*g, vals, u.mask().to_vec())?
    };
    let shifted2 = {
        let vals: Vec<f64> = shifted.values().iter().map(|v| v * v).collect();
        ScalarField2D::new(*g, vals, u.mask().to_vec())?
    };
    let rhs_quadratic = disc_integral(&shifted2, x0, r4)? / r.powi(6);
    let rhs_linear = disc_integral(&shifted, x0, r4)? / r.powi(4);

    let mean_lap_bound =
        disc_integral(&lap, x0, r0)? / (std::f64::consts::PI * r0 * r0);

    let lhs = lhs_gradient + lhs_hessian;
    let fitted_c = if rhs_quadratic > 1e-300 {
        ((lhs - mean_lap_bound * rhs_linear) / rhs_quadratic).max(0.0)
    } else {
        0.0
    };
    Ok(DecayReport {
        center: x0,
        radius: r,
        lhs_gradient,
        lhs_hessian,
        rhs_quadratic,
        rhs_linear,
        mean_lap_bound,
        fitted_c,
    })
}

fn field_map2(
    a: &ScalarField2D,
    b: &ScalarField2D,
    f: impl Fn(f64, f64) -> f64,
) -> Result<ScalarField2D> {
    let vals: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| f(*x, *y)).collect();
    ScalarField2D::new(*a.grid(), vals, a.mask().to_vec())
}
