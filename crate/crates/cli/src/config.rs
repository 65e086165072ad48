//! INI-style run configuration: `[section]` headers and `key = value` lines,
//! unknown keys rejected by name, byte-stable serialize → parse round trips.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub monotonicity: MonotonicitySection,
    pub montecarlo: MontecarloSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    /// nodes per axis of the benchmark grid
    pub grid_n: usize,
    /// "unit" = [0,1]², "centered" = [−half, half]²
    pub domain: String,
    pub domain_half: f64,
    /// boundary data amp·(x² + y² − c)
    pub c: f64,
    pub amp: f64,
    pub eps: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicitySection {
    /// smallest ladder radius in grid spacings
    pub r_min_factor: f64,
    pub r_max: f64,
    pub ladder: usize,
    /// "derivation" or "printed"
    pub variant: String,
    pub tol: f64,
    /// boundary data: "saddle" (a·(x² − y²), free boundary through the
    /// center) or "ring" (the x² + y² − c benchmark)
    pub data: String,
    pub saddle_amp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MontecarloSection {
    pub h: f64,
    pub samples: usize,
    pub probes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            solver: SolverSection {
                grid_n: 129,
                domain: "unit".into(),
                domain_half: 0.5,
                c: 0.6,
                amp: 0.5,
                eps: 0.05,
                residual_tol: 1e-8,
                max_iter: 60,
            },
            sweep: SweepSection { eps: vec![0.2, 0.1, 0.05, 0.025] },
            monotonicity: MonotonicitySection {
                r_min_factor: 6.0,
                r_max: 0.35,
                ladder: 12,
                variant: "derivation".into(),
                tol: 1e-3,
                data: "saddle".into(),
                saddle_amp: 1.0,
            },
            montecarlo: MontecarloSection { h: 1.0 / 16.0, samples: 100_000, probes: 10 },
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(ConfigError(format!("line {}: malformed section header", lineno + 1)));
            };
            section = name.trim().to_string();
            match section.as_str() {
                "solver" | "sweep" | "monotonicity" | "montecarlo" => continue,
                other => return Err(ConfigError(format!("line {}: unknown section [{other}]", lineno + 1))),
            }
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!("line {}: expected `key = value`", lineno + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        let fail = |what: &str| ConfigError(format!("line {}: bad value for {what}", lineno + 1));
        let f64_of = |v: &str, what: &str| v.parse::<f64>().map_err(|_| fail(what));
        let usize_of = |v: &str, what: &str| v.parse::<usize>().map_err(|_| fail(what));
        match (section.as_str(), key) {
            ("", "seed") => cfg.seed = value.parse().map_err(|_| fail("seed"))?,
            ("solver", "grid_n") => cfg.solver.grid_n = usize_of(value, key)?,
            ("solver", "domain") => {
                if value != "unit" && value != "centered" {
                    return Err(fail("domain (unit|centered)"));
                }
                cfg.solver.domain = value.to_string();
            }
            ("solver", "domain_half") => cfg.solver.domain_half = f64_of(value, key)?,
            ("solver", "c") => cfg.solver.c = f64_of(value, key)?,
            ("solver", "amp") => cfg.solver.amp = f64_of(value, key)?,
            ("solver", "eps") => cfg.solver.eps = f64_of(value, key)?,
            ("solver", "residual_tol") => cfg.solver.residual_tol = f64_of(value, key)?,
            ("solver", "max_iter") => cfg.solver.max_iter = usize_of(value, key)?,
            ("sweep", "eps") => {
                let list: Result<Vec<f64>, _> =
                    value.split(',').map(|s| s.trim().parse::<f64>()).collect();
                cfg.sweep.eps = list.map_err(|_| fail("eps list"))?;
            }
            ("monotonicity", "r_min_factor") => cfg.monotonicity.r_min_factor = f64_of(value, key)?,
            ("monotonicity", "r_max") => cfg.monotonicity.r_max = f64_of(value, key)?,
            ("monotonicity", "ladder") => cfg.monotonicity.ladder = usize_of(value, key)?,
            ("monotonicity", "variant") => {
                if value != "derivation" && value != "printed" {
                    return Err(fail("variant (derivation|printed)"));
                }
                cfg.monotonicity.variant = value.to_string();
            }
            ("monotonicity", "tol") => cfg.monotonicity.tol = f64_of(value, key)?,
            ("monotonicity", "data") => {
                if value != "saddle" && value != "ring" {
                    return Err(fail("data (saddle|ring)"));
                }
                cfg.monotonicity.data = value.to_string();
            }
            ("monotonicity", "saddle_amp") => cfg.monotonicity.saddle_amp = f64_of(value, key)?,
            ("montecarlo", "h") => cfg.montecarlo.h = f64_of(value, key)?,
            ("montecarlo", "samples") => cfg.montecarlo.samples = usize_of(value, key)?,
            ("montecarlo", "probes") => cfg.montecarlo.probes = usize_of(value, key)?,
            (sec, key) => {
                let place = if sec.is_empty() { "top level".to_string() } else { format!("[{sec}]") };
                return Err(ConfigError(format!("line {}: unknown key `{key}` in {place}", lineno + 1)));
            }
        }
    }
    Ok(cfg)
}

pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "\n[solver]");
    let _ = writeln!(s, "grid_n = {}", cfg.solver.grid_n);
    let _ = writeln!(s, "domain = {}", cfg.solver.domain);
    let _ = writeln!(s, "domain_half = {}", cfg.solver.domain_half);
    let _ = writeln!(s, "c = {}", cfg.solver.c);
    let _ = writeln!(s, "amp = {}", cfg.solver.amp);
    let _ = writeln!(s, "eps = {}", cfg.solver.eps);
    let _ = writeln!(s, "residual_tol = {:e}", cfg.solver.residual_tol);
    let _ = writeln!(s, "max_iter = {}", cfg.solver.max_iter);
    let _ = writeln!(s, "\n[sweep]");
    let eps: Vec<String> = cfg.sweep.eps.iter().map(|e| format!("{e}")).collect();
    let _ = writeln!(s, "eps = {}", eps.join(","));
    let _ = writeln!(s, "\n[monotonicity]");
    let _ = writeln!(s, "r_min_factor = {}", cfg.monotonicity.r_min_factor);
    let _ = writeln!(s, "r_max = {}", cfg.monotonicity.r_max);
    let _ = writeln!(s, "ladder = {}", cfg.monotonicity.ladder);
    let _ = writeln!(s, "variant = {}", cfg.monotonicity.variant);
    let _ = writeln!(s, "tol = {:e}", cfg.monotonicity.tol);
    let _ = writeln!(s, "data = {}", cfg.monotonicity.data);
    let _ = writeln!(s, "saddle_amp = {}", cfg.monotonicity.saddle_amp);
    let _ = writeln!(s, "\n[montecarlo]");
    let _ = writeln!(s, "h = {}", cfg.montecarlo.h);
    let _ = writeln!(s, "samples = {}", cfg.montecarlo.samples);
    let _ = writeln!(s, "probes = {}", cfg.montecarlo.probes);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn eps_list_parses() {
        let cfg = parse_config("[sweep]\neps = 0.1,0.05\n").unwrap();
        assert_eq!(cfg.sweep.eps, vec![0.1, 0.05]);
    }

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = RunConfig::default();
        cfg.seed = 7;
        cfg.solver.eps = 0.025;
        cfg.monotonicity.variant = "printed".into();
        let text = serialize_config(&cfg);
        let back = parse_config(&text).unwrap();
        assert_eq!(cfg, back);
        // and serialization is stable
        assert_eq!(text, serialize_config(&back));
    }

    #[test]
    fn unknown_keys_and_malformed_lines_error_with_position() {
        let err = parse_config("[solver]\nbogus = 1\n").unwrap_err();
        assert!(err.0.contains("line 2") && err.0.contains("bogus"), "{err}");
        let err = parse_config("[solver]\njust words\n").unwrap_err();
        assert!(err.0.contains("line 2"), "{err}");
        let err = parse_config("[nope]\n").unwrap_err();
        assert!(err.0.contains("unknown section"), "{err}");
    }
}
