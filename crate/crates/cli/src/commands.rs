//! Experiment runners: each writes its CSV artifacts plus a JSON manifest
//! into its own subdirectory and reports whether its acceptance-style checks
//! passed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use fblab_core::blowup::{
    classify_detachment, detachment_identity_residual, detect_free_boundary_point,
    fit_quadratic_detachment, rescale_cauchy_trace,
};
use fblab_core::counterexamples::{
    log_bifurcation_blowup_report, log_bifurcation_jet, BumpTrainFamily, LogBifurcationFamily,
};
use fblab_core::fields::{Grid2D, ScalarField2D};
use fblab_core::forcing::BumpProfile;
use fblab_core::identity::identity_suite;
use fblab_core::monotonicity::{monotonicity_check, DissipationVariant};
use fblab_core::montecarlo::{probes_to_csv, simulate_walk, validate_game_vs_pde, GameConfig, LatticeDomain};
use fblab_core::solver::{
    decay_estimate_check, energy, energy_limit, eps_sweep, nodal_strip_measure, solve_navier,
    NavierProblem,
};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub checks: Vec<CheckResult>,
    pub config: String,
}

pub struct Runner<'a> {
    pub cfg: &'a RunConfig,
    pub out: PathBuf,
    pub quiet: bool,
}

type AnyError = Box<dyn std::error::Error>;

impl<'a> Runner<'a> {
    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    /// Domain box [x0, x1]² from the config.
    fn domain_box(&self) -> (f64, f64) {
        if self.cfg.solver.domain == "centered" {
            (-self.cfg.solver.domain_half, self.cfg.solver.domain_half)
        } else {
            (0.0, 1.0)
        }
    }

    fn domain_center(&self) -> [f64; 2] {
        let (x0, x1) = self.domain_box();
        [0.5 * (x0 + x1), 0.5 * (x0 + x1)]
    }

    fn benchmark_problem(&self, eps: f64, c: f64) -> Result<NavierProblem, AnyError> {
        let amp = self.cfg.solver.amp;
        self.problem_with_data(eps, move |x, y| amp * (x * x + y * y - c))
    }

    fn saddle_problem(&self, eps: f64, amp: f64) -> Result<NavierProblem, AnyError> {
        let [cx, cy] = self.domain_center();
        self.problem_with_data(eps, move |x, y| {
            amp * ((x - cx) * (x - cx) - (y - cy) * (y - cy))
        })
    }

    fn problem_with_data(
        &self,
        eps: f64,
        data: impl Fn(f64, f64) -> f64,
    ) -> Result<NavierProblem, AnyError> {
        let s = &self.cfg.solver;
        let (x0, x1) = self.domain_box();
        let g = Grid2D::from_box(x0, x1, x0, x1, s.grid_n)?;
        let boundary = ScalarField2D::from_fn(g, data)?;
        Ok(NavierProblem::new(boundary, eps, BumpProfile::standard())?
            .with_tolerance(s.residual_tol)?)
    }

    fn finish(
        &self,
        experiment: &str,
        dir: &Path,
        started: Instant,
        outputs: Vec<String>,
        checks: Vec<CheckResult>,
    ) -> Result<bool, AnyError> {
        let ok = checks.iter().all(|c| c.passed);
        for c in &checks {
            self.say(&format!(
                "  [{}] {}: {}",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        let manifest = Manifest {
            experiment: experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.cfg.seed,
            wall_time_s: started.elapsed().as_secs_f64(),
            outputs,
            checks,
            config: crate::config::serialize_config(self.cfg),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(ok)
    }

    fn outdir(&self, experiment: &str) -> Result<PathBuf, AnyError> {
        let dir = self.out.join(experiment);
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    pub fn run(&self, experiment: &str) -> Result<bool, AnyError> {
        self.say(&format!("== {experiment} =="));
        match experiment {
            "solve" => self.cmd_solve(),
            "sweep" => self.cmd_sweep(),
            "monotonicity" => self.cmd_monotonicity(),
            "identity" => self.cmd_identity(),
            "blowup" => self.cmd_blowup(),
            "counterexample" => self.cmd_counterexample(),
            "montecarlo" => self.cmd_montecarlo(),
            "decay" => self.cmd_decay(),
            "all" => {
                let mut ok = true;
                for sub in [
                    "counterexample",
                    "solve",
                    "identity",
                    "monotonicity",
                    "blowup",
                    "montecarlo",
                    "decay",
                    "sweep",
                ] {
                    ok &= self.run(sub)?;
                }
                Ok(ok)
            }
            other => Err(format!("unknown subcommand `{other}`").into()),
        }
    }

    fn cmd_solve(&self) -> Result<bool, AnyError> {
        let t0 = Instant::now();
        let dir = self.outdir("solve")?;
        let p = self.benchmark_problem(self.cfg.solver.eps, self.cfg.solver.c)?;
        let init = p.biharmonic_initial()?;
        let (u, report) = solve_navier(&p, &init)?;
        fs::write(dir.join("iterations.csv"), report.to_csv())?;
        fs::write(dir.join("solution.txt"), u.to_text())?;
        let checks = vec![
            CheckResult {
                name: "newton-residual".into(),
                passed: report.final_residual <= p.residual_tol,
                detail: format!("residual {:.3e} ≤ {:.0e}", report.final_residual, p.residual_tol),
            },
            CheckResult {
                name: "splitting-residual".into(),
                passed: report.splitting_residual <= p.residual_tol,
                detail: format!("Δu − w defect {:.3e}", report.splitting_residual),
            },
        ];
        self.finish("solve", &dir, t0, vec!["iterations.csv".into(), "solution.txt".into()], checks)
    }

    fn cmd_sweep(&self) -> Result<bool, AnyError> {
        let t0 = Instant::now();
        let dir = self.outdir("sweep")?;
        let p = self.benchmark_problem(self.cfg.solver.eps, self.cfg.solver.c)?;
        let report = eps_sweep(&p, &self.cfg.sweep.eps)?;
        fs::write(dir.join("sweep.csv"), report.to_csv())?;
        let mut checks = Vec::new();
        for (eps, msg) in &report.failures {
            checks.push(CheckResult {
                name: format!("solve-eps-{eps}"),
                passed: false,
                detail: msg.clone(),
            });
        }
        let sups: Vec<f64> =
            report.rows.iter().map(|r| r.sup_diff).filter(|v| v.is_finite()).collect();
        checks.push(CheckResult {
            name: "sup-differences-decreasing".into(),
            passed: sups.windows(2).all(|w| w[1] < w[0]),
            detail: format!("{sups:?}"),
        });
        let transitions: Vec<f64> = report.rows.iter().map(|r| r.transition_area).collect();
        checks.push(CheckResult {
            name: "transition-measure-decreasing".into(),
            passed: transitions.windows(2).all(|w| w[1] < w[0]),
            detail: format!("{transitions:?}"),
        });
        // the discrete two-sided bound on J − J_ε for a fixed smooth field
        let b = BumpProfile::standard();
        let v = {
            let g = p.grid;
            ScalarField2D::from_fn(g, |x, y| x * x + y * y - 0.3)?
        };
        let mut bound_ok = true;
        let mut detail = String::new();
        for &eps in &self.cfg.sweep.eps {
            let gap = energy_limit(&v)? - energy(&v, eps, &b)?;
            let strip = nodal_strip_measure(&v, eps, true);
            bound_ok &= gap >= -1e-12 && gap <= strip + 1e-12;
            detail.push_str(&format!("ε={eps}: gap {gap:.4e} ≤ strip {strip:.4e}; "));
        }
        checks.push(CheckResult { name: "limit-gap-bound".into(), passed: bound_ok, detail });
        self.finish("sweep", &dir, t0, vec!["sweep.csv".into()], checks)
    }

    fn cmd_monotonicity(&self) -> Result<bool, AnyError> {
        let t0 = Instant::now();
        let dir = self.outdir("monotonicity")?;
        let m = &self.cfg.monotonicity;
        let p = if m.data == "ring" {
            self.benchmark_problem(self.cfg.solver.eps, self.cfg.solver.c)?
        } else {
            self.saddle_problem(self.cfg.solver.eps, m.saddle_amp)?
        };
        let init = p.biharmonic_initial()?;
        let (u, _) = solve_navier(&p, &init)?;
        let center = detect_free_boundary_point(&u)
            .ok_or("no free-boundary point detected on the benchmark")?;
        let h = p.grid.h();
        // keep every ring (and its interpolation footprint) inside the domain
        let (x0, x1) = self.domain_box();
        let margin = (center[0] - x0)
            .min(x1 - center[0])
            .min(center[1] - x0)
            .min(x1 - center[1])
            - 5.0 * h;
        let r0 = m.r_min_factor * h;
        let r_max = m.r_max.min(margin);
        if r_max <= r0 {
            return Err(format!(
                "free-boundary point ({:.3}, {:.3}) leaves no room for the radius ladder",
                center[0], center[1]
            )
            .into());
        }
        let ratio = (r_max / r0).powf(1.0 / (m.ladder as f64 - 1.0));
        let radii: Vec<f64> = (0..m.ladder).map(|k| r0 * ratio.powi(k as i32)).collect();
        let variant = if m.variant == "printed" {
            DissipationVariant::Printed
        } else {
            DissipationVariant::Derivation
        };
        let report = monotonicity_check(&u, &p.forcing, p.eps, center, &radii, variant, m.tol)?;
        fs::write(dir.join("weiss.csv"), report.to_csv())?;
        let checks = vec![
            CheckResult {
                name: "nondecreasing".into(),
                passed: report.monotone,
                detail: format!(
                    "center ({:.4}, {:.4}), |u| = {:.2e}, |∇u| = {:.2e}{}",
                    center[0],
                    center[1],
                    report.center_value,
                    report.center_gradient,
                    if report.center_warning { " (centering warning)" } else { "" }
                ),
            },
            CheckResult {
                name: "identity-defect".into(),
                passed: report.max_defect() <= 1e-2,
                detail: format!("max |ΔE − dissipation| = {:.3e}", report.max_defect()),
            },
        ];
        self.finish("monotonicity", &dir, t0, vec!["weiss.csv".into()], checks)
    }

    fn cmd_identity(&self) -> Result<bool, AnyError> {
        let t0 = Instant::now();
        let dir = self.outdir("identity")?;
        let p = self.benchmark_problem(self.cfg.solver.eps, self.cfg.solver.c)?;
        let init = p.biharmonic_initial()?;
        let (u, _) = solve_navier(&p, &init)?;
        let suite = identity_suite(&u, p.eps, &p.forcing, 20, self.cfg.seed)?;
        fs::write(dir.join("identity.csv"), suite.to_csv())?;
        let checks = vec![CheckResult {
            name: "max-relative-residual".into(),
            passed: suite.max_residual() <= 5e-2,
            detail: format!(
                "max {:.3e}, median {:.3e} over {} fields",
                suite.max_residual(),
                suite.median_residual(),
                suite.rows.len()
            ),
        }];
        self.finish("identity", &dir, t0, vec!["identity.csv".into()], checks)
    }

    fn cmd_blowup(&self) -> Result<bool, AnyError> {
        let t0 = Instant::now();
        let dir = self.outdir("blowup")?;
        let mut csv = String::from("cx,cy,dir_x,dir_y,alpha,gamma,residual,label,defect\n");

        // synthetic rotated two-plane profile: the fit oracle
        let th = 30.0f64.to_radians();
        let (c, s) = (th.cos(), th.sin());
        let g = Grid2D::from_box(-1.0, 1.0, -1.0, 1.0, 257)?;
        let synth = ScalarField2D::from_fn(g, move |x, y| {
            let t = c * x + s * y;
            if t > 0.0 {
                0.3 * t * t
            } else {
                -0.4 * t * t
            }
        })?;
        let fit = fit_quadratic_detachment(&synth, [0.0, 0.0], 0.35)?;
        let (case, defect) = classify_detachment(fit.alpha, fit.gamma, 1e-2);
        let synth_err = (fit.alpha - 0.6).abs().max((fit.gamma + 0.8).abs());
        csv.push_str(&format!(
            "{:.4},{:.4},{:.6},{:.6},{:.8e},{:.8e},{:.3e},{},{:.3e}\n",
            0.0, 0.0, fit.direction[0], fit.direction[1], fit.alpha, fit.gamma,
            fit.fit_residual, case.label(), defect
        ));

        // fits along the solved benchmark's free boundary
        let p = self.benchmark_problem(self.cfg.solver.eps, self.cfg.solver.c)?;
        let init = p.biharmonic_initial()?;
        let (u, _) = solve_navier(&p, &init)?;
        let mut outputs = vec!["blowup.csv".to_string()];
        if let Some(center) = detect_free_boundary_point(&u) {
            let fit = fit_quadratic_detachment(&u, center, 10.0 * p.grid.h())?;
            let (case, defect) = classify_detachment(fit.alpha, fit.gamma, 1e-2);
            csv.push_str(&format!(
                "{:.4},{:.4},{:.6},{:.6},{:.8e},{:.8e},{:.3e},{},{:.3e}\n",
                center[0], center[1], fit.direction[0], fit.direction[1], fit.alpha, fit.gamma,
                fit.fit_residual, case.label(), defect
            ));
            // quadratic rescaling ladder at the same center: the blow-up
            // dichotomy probe (distances of consecutive rescalings)
            let h = p.grid.h();
            let (x0, x1) = self.domain_box();
            let margin = (x1 - center[0])
                .min(x1 - center[1])
                .min(center[0] - x0)
                .min(center[1] - x0)
                - 4.0 * h;
            let mut radii = Vec::new();
            let mut r = margin.min(0.3);
            while r > 8.0 * h {
                radii.push(r);
                r *= 0.5;
            }
            radii.reverse();
            if radii.len() >= 3 {
                let trace = rescale_cauchy_trace(&u, center, &radii)?;
                let mut csv2 = String::from("r_small,r_large,sup_distance\n");
                for (k, d) in trace.iter().enumerate() {
                    csv2.push_str(&format!("{:.6e},{:.6e},{:.6e}\n", radii[k], radii[k + 1], d));
                }
                fs::write(dir.join("rescale_trace.csv"), &csv2)?;
                outputs.push("rescale_trace.csv".into());
            }
        }
        fs::write(dir.join("blowup.csv"), &csv)?;

        // half-plane identity residuals across the admissible cases
        let support = [-0.5, 0.5, -0.4, 0.4];
        let admissible = [(1.0, 1.0), (-1.0, -1.0), (2.0f64.sqrt(), -1.0)];
        let worst_admissible = admissible
            .iter()
            .map(|&(a, g)| detachment_identity_residual(a, g, support).unwrap_or(f64::INFINITY))
            .fold(0.0f64, f64::max);
        let forbidden = detachment_identity_residual(-1.0, 0.0, support)?;
        let checks = vec![
            CheckResult {
                name: "synthetic-profile-recovery".into(),
                passed: synth_err <= 1e-6,
                detail: format!("max coefficient error {synth_err:.3e}"),
            },
            CheckResult {
                name: "identity-residuals".into(),
                passed: worst_admissible <= 1e-6 && forbidden >= 1e-2,
                detail: format!("admissible ≤ {worst_admissible:.3e}, forbidden {forbidden:.3e}"),
            },
        ];
        self.finish("blowup", &dir, t0, outputs, checks)
    }

    fn cmd_counterexample(&self) -> Result<bool, AnyError> {
        let t0 = Instant::now();
        let dir = self.outdir("counterexample")?;
        let mut outputs = Vec::new();

        // logarithmic bifurcation family: sample tables and the probe rows
        let mut probe_csv = String::from("eps,sup_u2,probe,reference\n");
        let eps_list = [1e-2, 1e-4, 1e-6];
        let rows = log_bifurcation_blowup_report(&eps_list)?;
        let mut probe_ok = true;
        let mut growing = true;
        let mut prev = 0.0;
        for r in &rows {
            probe_csv.push_str(&format!(
                "{:.1e},{:.12e},{:.12e},{:.12e}\n",
                r.eps, r.sup_u2, r.probe, r.reference
            ));
            probe_ok &= (r.probe - r.reference).abs() <= 1e-10 * r.reference.abs();
            growing &= r.sup_u2 > prev;
            prev = r.sup_u2;
        }
        fs::write(dir.join("log_family_probe.csv"), &probe_csv)?;
        outputs.push("log_family_probe.csv".into());

        let mut table = String::from("x,u,u1,u2,u3,u4\n");
        let delta = (-0.75f64).exp() / 2.0;
        for k in -60..=200i32 {
            let x = delta * k as f64 / 200.0;
            let j = log_bifurcation_jet(x, 1e-2);
            table.push_str(&format!(
                "{:.8e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n",
                x, j[0], j[1], j[2], j[3], j[4]
            ));
        }
        fs::write(dir.join("log_family_profile.csv"), &table)?;
        outputs.push("log_family_profile.csv".into());

        let fam = LogBifurcationFamily::new(1e-2)?;
        let mut beta_csv = String::from("t,beta\n");
        for k in 1..400 {
            let t = fam.eps * k as f64 / 400.0;
            beta_csv.push_str(&format!("{:.8e},{:.10e}\n", t, fam.beta(t)));
        }
        fs::write(dir.join("log_family_beta.csv"), &beta_csv)?;
        outputs.push("log_family_beta.csv".into());

        let mass = fam.mass_check();
        let z_half = fam.zeta(0.5 * fam.iota)?;
        let worst_ode = (1..=50)
            .map(|k| fam.ode_residual(z_half * k as f64 / 50.0).unwrap_or(f64::INFINITY))
            .fold(0.0f64, f64::max);

        // bump train family
        let train = BumpTrainFamily::new();
        let mut train_csv = String::from("x,u,u1\n");
        for k in 0..=400 {
            let x = 12.0 * k as f64 / 400.0;
            train_csv.push_str(&format!("{:.6e},{:.10e},{:.10e}\n", x, train.u(x), train.phi(x)));
        }
        fs::write(dir.join("train_profile.csv"), &train_csv)?;
        outputs.push("train_profile.csv".into());
        let mut train_beta_csv = String::from("t,beta\n");
        for k in 1..200 {
            let t = 0.96 * k as f64 / 200.0;
            train_beta_csv.push_str(&format!("{:.6e},{:.10e}\n", t, train.beta(t)?));
        }
        fs::write(dir.join("train_beta.csv"), &train_beta_csv)?;
        outputs.push("train_beta.csv".into());
        let mut slopes_ok = true;
        for k in [2u32, 5, 10] {
            let got = train.scaled(1.0, k).1;
            slopes_ok &= (got - k as f64).abs() <= 1e-8 * k as f64;
        }

        let checks = vec![
            CheckResult {
                name: "probe-value".into(),
                passed: probe_ok && growing,
                detail: "−u″(∜ε) vs 10 + 2·log(2ε), sup|u″| growing".into(),
            },
            CheckResult {
                name: "ode-residual".into(),
                passed: worst_ode <= 1e-8,
                detail: format!("max residual {worst_ode:.3e} on the formula branch"),
            },
            CheckResult {
                name: "forcing-mass".into(),
                passed: (mass - 1.0).abs() <= 1e-6,
                detail: format!("∫β_ε = {mass:.10}"),
            },
            CheckResult {
                name: "train-slopes".into(),
                passed: slopes_ok,
                detail: "(u^{ε_k})′(1) = k for k ∈ {2, 5, 10}".into(),
            },
        ];
        self.finish("counterexample", &dir, t0, outputs, checks)
    }

    fn cmd_montecarlo(&self) -> Result<bool, AnyError> {
        let t0 = Instant::now();
        let dir = self.outdir("montecarlo")?;
        let mc = &self.cfg.montecarlo;
        let cfg = GameConfig::new(
            LatticeDomain::Box2 { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 },
            mc.h,
            mc.samples,
            self.cfg.seed,
        )?;
        let n = (1.0 / mc.h).round() as usize;
        let probes: Vec<[f64; 2]> = (0..mc.probes)
            .map(|k| {
                let i = 1 + (k * 7 + 3) % (n - 1);
                let j = 1 + (k * 5 + 2) % (n - 1);
                [i as f64 * mc.h, j as f64 * mc.h]
            })
            .collect();
        let harmonic = validate_game_vs_pde(&cfg, &probes, |p| p[0] * p[1], |_| 0.0)?;
        fs::write(dir.join("mc_harmonic.csv"), probes_to_csv(&harmonic))?;
        let penalty = validate_game_vs_pde(&cfg, &probes, |_| 0.0, |_| 1.0)?;
        fs::write(dir.join("mc_penalty.csv"), probes_to_csv(&penalty))?;
        let count_ok = |rows: &[fblab_core::montecarlo::ProbeRow]| {
            rows.iter().filter(|r| r.z.abs() <= 3.0).count()
        };
        let (h_ok, p_ok) = (count_ok(&harmonic), count_ok(&penalty));
        let need = (probes.len() * 8).div_ceil(10);
        // censoring sanity on one long estimate
        let est = simulate_walk(&cfg, [0.5, 0.5], |_| 0.0, |_| 0.0)?;
        let checks = vec![
            CheckResult {
                name: "harmonic-z-scores".into(),
                passed: h_ok >= need,
                detail: format!("{h_ok}/{} probes within 3σ", probes.len()),
            },
            CheckResult {
                name: "penalty-z-scores".into(),
                passed: p_ok >= need,
                detail: format!("{p_ok}/{} probes within 3σ", probes.len()),
            },
            CheckResult {
                name: "censoring".into(),
                passed: (est.censored as f64) <= 1e-3 * est.samples as f64,
                detail: format!("{} of {} truncated", est.censored, est.samples),
            },
        ];
        self.finish(
            "montecarlo",
            &dir,
            t0,
            vec!["mc_harmonic.csv".into(), "mc_penalty.csv".into()],
            checks,
        )
    }

    fn cmd_decay(&self) -> Result<bool, AnyError> {
        let t0 = Instant::now();
        let dir = self.outdir("decay")?;
        let p = self.benchmark_problem(self.cfg.solver.eps, self.cfg.solver.c)?;
        let init = p.biharmonic_initial()?;
        let (u, _) = solve_navier(&p, &init)?;
        // centered at the domain midpoint: the largest ball budget on the grid
        let center = self.domain_center();
        let (x0, x1) = self.domain_box();
        let r0 = 0.9 * 0.5 * (x1 - x0);
        let mut csv = String::from("r,lhs_grad,lhs_hess,rhs_quad,rhs_lin,chat,c\n");
        let mut cs = Vec::new();
        for div in [8.0, 16.0, 32.0] {
            let r = r0 / div;
            let rep = decay_estimate_check(&u, center, r, r0)?;
            csv.push_str(&format!(
                "{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
                r, rep.lhs_gradient, rep.lhs_hessian, rep.rhs_quadratic, rep.rhs_linear,
                rep.mean_lap_bound, rep.fitted_c
            ));
            cs.push(rep.fitted_c);
        }
        fs::write(dir.join("decay.csv"), &csv)?;
        let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cs.iter().copied().fold(0.0f64, f64::max);
        let checks = vec![CheckResult {
            name: "constant-bounded".into(),
            passed: lo > 0.0 && hi / lo <= 4.0,
            detail: format!("fitted C ∈ [{lo:.4e}, {hi:.4e}], ratio {:.2}", hi / lo.max(1e-300)),
        }];
        self.finish("decay", &dir, t0, vec!["decay.csv".into()], checks)
    }
}
