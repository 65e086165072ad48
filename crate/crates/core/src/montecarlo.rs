//! The lattice exit game: a symmetric random walk paying a running penalty
//! until it exits with a boundary prize, its exact discrete stationary
//! equation as the validation oracle, and the coupled stationary system
//! shared with the Navier solver.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField2D};
use crate::numerics::splitmix64;
use crate::solver::{poisson_solve, solve_navier_coupled, NavierProblem, SolveReport};

/// Walk domain: a 1D interval or a 2D box, with lattice step h.
#[derive(Debug, Clone, Copy)]
pub enum LatticeDomain {
    Interval { x0: f64, x1: f64 },
    Box2 { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl LatticeDomain {
    fn spans(&self) -> Vec<f64> {
        match *self {
            LatticeDomain::Interval { x0, x1 } => vec![x1 - x0],
            LatticeDomain::Box2 { x0, x1, y0, y1 } => vec![x1 - x0, y1 - y0],
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            LatticeDomain::Interval { .. } => 1,
            LatticeDomain::Box2 { .. } => 2,
        }
    }
}

/// Game parameters; τ = h² is enforced at construction.
#[derive(Debug, Clone)]
pub struct GameConfig {
    pub h: f64,
    pub tau: f64,
    pub domain: LatticeDomain,
    /// Interface prize weight of the coupled system (2Δ²u = −2c·β_ε(u) ⇔
    /// the solver normalization at c = 1/2).
    pub interface_prize: f64,
    pub eps: f64,
    pub horizon: f64,
    pub samples: usize,
    pub seed: u64,
}

impl GameConfig {
    pub fn new(domain: LatticeDomain, h: f64, samples: usize, seed: u64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Parameter(format!("lattice step must be positive, got {h}")));
        }
        if samples == 0 {
            return Err(Error::Parameter("need at least one trajectory".into()));
        }
        let mut diam2: f64 = 0.0;
        for span in domain.spans() {
            let n = span / h;
            if (n - n.round()).abs() > 1e-9 || n.round() < 4.0 {
                return Err(Error::Parameter(format!(
                    "domain span {span} must be a multiple of h with ≥ 3 interior nodes"
                )));
            }
            diam2 += span * span;
        }
        Ok(Self {
            h,
            tau: h * h,
            domain,
            interface_prize: 0.5,
            eps: 0.1,
            horizon: 50.0 * diam2,
            samples,
            seed,
        })
    }
}

/// Monte-Carlo estimate of the expected payoff from one start node.
#[derive(Debug, Clone, Copy)]
pub struct WalkEstimate {
    pub mean: f64,
    /// Sample standard deviation / √N.
    pub std_error: f64,
    pub samples: usize,
    pub censored: usize,
    pub mean_exit_time: f64,
}

/// Deterministic pairwise summation of an ordered slice.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

struct Lattice {
    origin: [f64; 2],
    n: [i64; 2],
    dims: usize,
    h: f64,
}

impl Lattice {
    fn new(cfg: &GameConfig) -> Self {
        match cfg.domain {
            LatticeDomain::Interval { x0, x1 } => Lattice {
                origin: [x0, 0.0],
                n: [((x1 - x0) / cfg.h).round() as i64, 0],
                dims: 1,
                h: cfg.h,
            },
            LatticeDomain::Box2 { x0, x1, y0, y1 } => Lattice {
                origin: [x0, y0],
                n: [((x1 - x0) / cfg.h).round() as i64, ((y1 - y0) / cfg.h).round() as i64],
                dims: 2,
                h: cfg.h,
            },
        }
    }

    fn pos(&self, node: [i64; 2]) -> [f64; 2] {
        [
            self.origin[0] + node[0] as f64 * self.h,
            self.origin[1] + node[1] as f64 * self.h,
        ]
    }

    fn node_of(&self, p: [f64; 2]) -> Result<[i64; 2]> {
        let mut node = [0i64; 2];
        for d in 0..self.dims {
            let g = (p[d] - self.origin[d]) / self.h;
            node[d] = g.round() as i64;
            if (g - g.round()).abs() > 1e-9 || node[d] < 0 || node[d] > self.n[d] {
                return Err(Error::Geometry(format!(
                    "({}, {}) is not a lattice node of the domain",
                    p[0], p[1]
                )));
            }
        }
        Ok(node)
    }

    fn on_boundary(&self, node: [i64; 2]) -> bool {
        (0..self.dims).any(|d| node[d] == 0 || node[d] == self.n[d])
    }
}

/// Run `cfg.samples` independent trajectories from `start`: per step the walk
/// pays penalty(x)·τ and moves to one of the 2n lattice neighbours uniformly;
/// exiting pays the boundary prize. Deterministic given the seed, independent
/// of the worker count (per-trajectory counter-derived RNG streams, pairwise
/// reduction of the ordered payoff vector).
pub fn simulate_walk(
    cfg: &GameConfig,
    start: [f64; 2],
    prize: impl Fn([f64; 2]) -> f64 + Sync,
    penalty: impl Fn([f64; 2]) -> f64 + Sync,
) -> Result<WalkEstimate> {
    let lattice = Lattice::new(cfg);
    let start_node = lattice.node_of(start)?;
    if lattice.on_boundary(start_node) {
        return Ok(WalkEstimate {
            mean: prize(lattice.pos(start_node)),
            std_error: 0.0,
            samples: cfg.samples,
            censored: 0,
            mean_exit_time: 0.0,
        });
    }
    let max_steps = (cfg.horizon / cfg.tau).ceil() as usize;
    let dirs = 2 * lattice.dims as u32;

    let runs: Vec<(f64, f64, bool)> = (0..cfg.samples)
        .into_par_iter()
        .map(|t| {
            let stream = splitmix64(cfg.seed.wrapping_add((t as u64).wrapping_mul(0x9E3779B97F4A7C15)));
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let mut node = start_node;
            let mut pay = 0.0;
            for step in 0..max_steps {
                pay -= penalty(lattice.pos(node)) * cfg.tau;
                let dir = rng.random_range(0..dirs);
                let axis = (dir / 2) as usize;
                let sign = if dir % 2 == 0 { 1 } else { -1 };
                node[axis] += sign;
                if lattice.on_boundary(node) {
                    pay += prize(lattice.pos(node));
                    return (pay, (step + 1) as f64 * cfg.tau, false);
                }
            }
            (pay, cfg.horizon, true)
        })
        .collect();

    let payoffs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mean = pairwise_sum(&payoffs) / cfg.samples as f64;
    let sq: Vec<f64> = payoffs.iter().map(|p| (p - mean) * (p - mean)).collect();
    let var = if cfg.samples > 1 {
        pairwise_sum(&sq) / (cfg.samples as f64 - 1.0)
    } else {
        0.0
    };
    let exit_times: Vec<f64> = runs.iter().map(|r| r.1).collect();
    Ok(WalkEstimate {
        mean,
        std_error: (var / cfg.samples as f64).sqrt(),
        samples: cfg.samples,
        censored: runs.iter().filter(|r| r.2).count(),
        mean_exit_time: pairwise_sum(&exit_times) / cfg.samples as f64,
    })
}

/// Stationary coupled system Δu = v, Δv = −β_ε(u)/2, u|∂ = u₀, v|∂ = 0: the
/// same discrete block solve as the Navier path, with the intermediate
/// returned as the penalty field.
pub fn coupled_stationary_solve(
    p: &NavierProblem,
    initial: &ScalarField2D,
) -> Result<(ScalarField2D, ScalarField2D, SolveReport)> {
    solve_navier_coupled(p, initial)
}

/// One probe row of the game-vs-PDE comparison.
#[derive(Debug, Clone, Copy)]
pub struct ProbeRow {
    pub px: f64,
    pub py: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub pde_value: f64,
    pub z: f64,
}

/// CSV with header `px,py,mc_mean,mc_se,pde_value,z`.
pub fn probes_to_csv(rows: &[ProbeRow]) -> String {
    let mut s = String::from("px,py,mc_mean,mc_se,pde_value,z\n");
    for r in rows {
        s.push_str(&format!(
            "{:.6e},{:.6e},{:.12e},{:.6e},{:.12e},{:.4}\n",
            r.px, r.py, r.mc_mean, r.mc_se, r.pde_value, r.z
        ));
    }
    s
}

/// Deterministic-penalty validation: the walk's exact stationary equation
/// u = mean(neighbours) − vτ, i.e. Δ_h u = 2n·v, is solved directly and the
/// Monte-Carlo estimates are compared probe by probe as z-scores.
pub fn validate_game_vs_pde(
    cfg: &GameConfig,
    probes: &[[f64; 2]],
    prize: impl Fn([f64; 2]) -> f64 + Sync,
    penalty: impl Fn([f64; 2]) -> f64 + Sync,
) -> Result<Vec<ProbeRow>> {
    let LatticeDomain::Box2 { x0, x1, y0, y1 } = cfg.domain else {
        return Err(Error::Parameter("PDE validation runs on the 2D box domain".into()));
    };
    let nx = ((x1 - x0) / cfg.h).round() as usize + 1;
    let grid = Grid2D::from_box(x0, x1, y0, y1, nx)?;
    let boundary = ScalarField2D::from_fn(grid, |x, y| prize([x, y]))?;
    // the heuristic continuum limit drops the 1/(2n) of the walk's generator;
    // the exact discrete balance keeps it: Δ_h u = 2n·v
    let dims_factor = 2.0 * 2.0;
    let pde = poisson_solve(&boundary, |i, j| {
        let p = grid.pos(i, j);
        dims_factor * penalty([p[0], p[1]])
    })?;

    probes
        .iter()
        .map(|&probe| {
            let est = simulate_walk(cfg, probe, &prize, &penalty)?;
            let g = grid.to_grid_coords(probe[0], probe[1]);
            let (i, j) = (g[0].round() as usize, g[1].round() as usize);
            let pde_value = pde.at(i, j);
            let z = if est.std_error > 0.0 {
                (est.mean - pde_value) / est.std_error
            } else {
                0.0
            };
            Ok(ProbeRow {
                px: probe[0],
                py: probe[1],
                mc_mean: est.mean,
                mc_se: est.std_error,
                pde_value,
                z,
            })
        })
        .collect()
}
