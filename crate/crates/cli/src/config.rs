//! INI run configuration with strict key checking.
//!
//! ```ini
//! [problem]
//! test = 1              ; benchmark 1-4, or omit and set `coupling`
//! n = 20
//! nu = 0
//! q = 2
//! coupling = quadratic  ; custom problems only
//! coupling.r = 1
//! bound = none          ; none | disc
//!
//! [solver]
//! algorithm = cp-u
//! gamma = 0.95
//!
//! [output]
//! dir = out
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use ini::Ini;
use mfgprox::coupling::{CouplingParams, CouplingRegistry};
use mfgprox::experiments::{disc_bound_with, make_test_problem, Experiment, DISC_BOUND, DISC_RADIUS, OUTER_BOUND};
use mfgprox::grid::TorusGrid;
use mfgprox::problem::Problem;
use mfgprox::saddle::LinearOptions;
use mfgprox::solvers::{AlgorithmRegistry, SolverConfig, StepPolicy};

const PROBLEM_KEYS: &[&str] = &[
    "test",
    "n",
    "nu",
    "q",
    "coupling",
    "bound",
    "bound_radius",
    "bound_inner",
    "bound_outer",
];
const SOLVER_KEYS: &[&str] = &[
    "algorithm",
    "gamma",
    "tau",
    "theta",
    "tol",
    "max_iter",
    "seed",
    "linear_solver",
    "cg_tol",
    "cg_max_iter",
    "step_policy",
];
const OUTPUT_KEYS: &[&str] = &["dir", "dump_fields", "history_every"];

#[derive(Debug, Clone, PartialEq)]
pub enum BoundSpec {
    None,
    Disc { radius: f64, inner: f64, outer: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub test: Option<u32>,
    pub n: usize,
    pub nu: f64,
    pub q: f64,
    pub coupling: Option<String>,
    pub coupling_params: CouplingParams,
    pub bound: BoundSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub algorithm: String,
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub theta: f64,
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub seed: u64,
    pub linear_solver: String,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub step_policy: StepPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub dump_fields: bool,
    pub history_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Read(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("unknown section `[{0}]`")]
    UnknownSection(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

type Section<'a> = Option<&'a ini::Properties>;

fn lookup<'a>(sec: Section<'a>, key: &str) -> Option<&'a str> {
    sec.and_then(|p| p.get(key)).map(str::trim)
}

fn parse_num<T: std::str::FromStr>(sec: Section, section: &str, key: &str) -> Result<Option<T>, ConfigError> {
    match lookup(sec, key) {
        None => Ok(None),
        Some(raw) => raw.parse().map(Some).map_err(|_| ConfigError::Invalid {
            key: format!("{section}.{key}"),
            reason: format!("`{raw}` is not a valid number"),
        }),
    }
}

fn parse_bool(sec: Section, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
    match lookup(sec, key) {
        None => Ok(None),
        Some("true" | "yes" | "1") => Ok(Some(true)),
        Some("false" | "no" | "0") => Ok(Some(false)),
        Some(raw) => Err(ConfigError::Invalid {
            key: format!("{section}.{key}"),
            reason: format!("`{raw}` is not a boolean"),
        }),
    }
}

fn check_keys(ini: &Ini) -> Result<(), ConfigError> {
    for (name, props) in ini.iter() {
        let allowed: &[&str] = match name {
            None => {
                if let Some((k, _)) = props.iter().next() {
                    return Err(ConfigError::UnknownKey(k.to_string()));
                }
                continue;
            }
            Some("problem") => PROBLEM_KEYS,
            Some("solver") => SOLVER_KEYS,
            Some("output") => OUTPUT_KEYS,
            Some(other) => return Err(ConfigError::UnknownSection(other.to_string())),
        };
        let section = name.unwrap_or_default();
        for (k, _) in props.iter() {
            let ok = allowed.contains(&k) || (section == "problem" && k.starts_with("coupling."));
            if !ok {
                return Err(ConfigError::UnknownKey(format!("{section}.{k}")));
            }
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Read(e.to_string()))?;
        check_keys(&ini)?;
        let p = ini.section(Some("problem"));
        let s = ini.section(Some("solver"));
        let o = ini.section(Some("output"));

        let test: Option<u32> = parse_num(p, "problem", "test")?;
        if let Some(t) = test {
            if !(1..=4).contains(&t) {
                return Err(ConfigError::Invalid {
                    key: "problem.test".into(),
                    reason: format!("benchmark {t} does not exist (use 1-4)"),
                });
            }
        }
        let n: usize = parse_num(p, "problem", "n")?.ok_or_else(|| ConfigError::Missing("problem.n".into()))?;
        let standard = test.map(|t| Experiment::standard(t, n));
        let coupling = lookup(p, "coupling").map(str::to_string);
        match (test, &coupling) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid {
                    key: "problem.coupling".into(),
                    reason: "benchmarks fix their coupling; drop `coupling` or `test`".into(),
                })
            }
            (None, None) => return Err(ConfigError::Missing("problem.test or problem.coupling".into())),
            _ => {}
        }
        let mut coupling_params = CouplingParams::new();
        if let Some(props) = p {
            for (k, v) in props.iter() {
                if let Some(name) = k.strip_prefix("coupling.") {
                    if test.is_some() {
                        return Err(ConfigError::Invalid {
                            key: format!("problem.{k}"),
                            reason: "benchmarks fix their coupling parameters".into(),
                        });
                    }
                    let value = v.trim().parse().map_err(|_| ConfigError::Invalid {
                        key: format!("problem.{k}"),
                        reason: format!("`{v}` is not a valid number"),
                    })?;
                    coupling_params.insert(name.to_string(), value);
                }
            }
        }
        let bound = match lookup(p, "bound").unwrap_or("none") {
            "none" => {
                for k in ["bound_radius", "bound_inner", "bound_outer"] {
                    if lookup(p, k).is_some() {
                        return Err(ConfigError::Invalid {
                            key: format!("problem.{k}"),
                            reason: "only used with `bound = disc`".into(),
                        });
                    }
                }
                BoundSpec::None
            }
            "disc" => BoundSpec::Disc {
                radius: parse_num(p, "problem", "bound_radius")?.unwrap_or(DISC_RADIUS),
                inner: parse_num(p, "problem", "bound_inner")?.unwrap_or(DISC_BOUND),
                outer: parse_num(p, "problem", "bound_outer")?.unwrap_or(OUTER_BOUND),
            },
            other => {
                return Err(ConfigError::Invalid {
                    key: "problem.bound".into(),
                    reason: format!("`{other}` (expected none or disc)"),
                })
            }
        };
        let problem = ProblemSection {
            test,
            n,
            nu: parse_num(p, "problem", "nu")?.unwrap_or(standard.map_or(0.0, |e| e.nu)),
            q: parse_num(p, "problem", "q")?.unwrap_or(2.0),
            coupling,
            coupling_params,
            bound,
        };

        let algorithm = lookup(s, "algorithm")
            .ok_or_else(|| ConfigError::Missing("solver.algorithm".into()))?
            .to_lowercase();
        let registry = AlgorithmRegistry::with_builtins();
        if registry.get(&algorithm).is_err() {
            return Err(ConfigError::Invalid {
                key: "solver.algorithm".into(),
                reason: format!("`{algorithm}` is not one of {}", registry.names().join(", ")),
            });
        }
        let defaults = SolverConfig::default();
        let step_policy = match lookup(s, "step_policy").unwrap_or("enforce") {
            "enforce" => StepPolicy::Enforce,
            "warn" => StepPolicy::Warn,
            other => {
                return Err(ConfigError::Invalid {
                    key: "solver.step_policy".into(),
                    reason: format!("`{other}` (expected enforce or warn)"),
                })
            }
        };
        let solver = SolverSection {
            algorithm,
            gamma: parse_num(s, "solver", "gamma")?,
            tau: parse_num(s, "solver", "tau")?,
            theta: parse_num(s, "solver", "theta")?.unwrap_or(defaults.theta),
            tol: parse_num(s, "solver", "tol")?,
            max_iter: parse_num(s, "solver", "max_iter")?.unwrap_or(defaults.max_iter),
            seed: parse_num(s, "solver", "seed")?.unwrap_or(defaults.seed),
            linear_solver: lookup(s, "linear_solver").unwrap_or(&defaults.linear_solver).to_string(),
            cg_tol: parse_num(s, "solver", "cg_tol")?.unwrap_or(defaults.linear.cg_tol),
            cg_max_iter: parse_num(s, "solver", "cg_max_iter")?.unwrap_or(defaults.linear.cg_max_iter),
            step_policy,
        };

        let output = OutputSection {
            dir: PathBuf::from(lookup(o, "dir").unwrap_or("out")),
            dump_fields: parse_bool(o, "output", "dump_fields")?.unwrap_or(true),
            history_every: parse_num(o, "output", "history_every")?.unwrap_or(1),
        };
        if output.history_every == 0 {
            return Err(ConfigError::Invalid {
                key: "output.history_every".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self { problem, solver, output })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn build_problem(&self) -> mfgprox::Result<Problem> {
        let p = &self.problem;
        let problem = match p.test {
            Some(id) => make_test_problem(&Experiment::standard(id, p.n).with_nu(p.nu).with_q(p.q))?,
            None => {
                let grid = TorusGrid::new(p.n)?;
                let name = p.coupling.as_deref().unwrap_or_default();
                let coupling = CouplingRegistry::with_builtins().build(name, grid, &p.coupling_params)?;
                Problem::new(grid, p.nu, p.q, coupling)?
            }
        };
        match p.bound {
            BoundSpec::None => Ok(problem),
            BoundSpec::Disc { radius, inner, outer } => {
                let bound = disc_bound_with(problem.grid(), radius, inner, outer);
                problem.with_bound(bound)
            }
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            gamma: s.gamma,
            tau: s.tau,
            theta: s.theta,
            tol: s.tol,
            max_iter: s.max_iter,
            record_every: self.output.history_every,
            linear_solver: s.linear_solver.clone(),
            linear: LinearOptions {
                cg_tol: s.cg_tol,
                cg_max_iter: s.cg_max_iter,
            },
            seed: s.seed,
            step_policy: s.step_policy,
            start: None,
        }
    }

    /// Canonical INI text with every default spelled out.
    pub fn to_ini(&self) -> String {
        let p = &self.problem;
        let s = &self.solver;
        let mut out = String::from("[problem]\n");
        if let Some(t) = p.test {
            let _ = writeln!(out, "test = {t}");
        }
        let _ = writeln!(out, "n = {}", p.n);
        let _ = writeln!(out, "nu = {:?}", p.nu);
        let _ = writeln!(out, "q = {:?}", p.q);
        if let Some(c) = &p.coupling {
            let _ = writeln!(out, "coupling = {c}");
        }
        for (k, v) in &p.coupling_params {
            let _ = writeln!(out, "coupling.{k} = {v:?}");
        }
        match p.bound {
            BoundSpec::None => out.push_str("bound = none\n"),
            BoundSpec::Disc { radius, inner, outer } => {
                let _ = writeln!(
                    out,
                    "bound = disc\nbound_radius = {radius:?}\nbound_inner = {inner:?}\nbound_outer = {outer:?}"
                );
            }
        }
        out.push_str("\n[solver]\n");
        let _ = writeln!(out, "algorithm = {}", s.algorithm);
        if let Some(g) = s.gamma {
            let _ = writeln!(out, "gamma = {g:?}");
        }
        if let Some(t) = s.tau {
            let _ = writeln!(out, "tau = {t:?}");
        }
        let _ = writeln!(out, "theta = {:?}", s.theta);
        if let Some(t) = s.tol {
            let _ = writeln!(out, "tol = {t:?}");
        }
        let _ = writeln!(out, "max_iter = {}", s.max_iter);
        let _ = writeln!(out, "seed = {}", s.seed);
        let _ = writeln!(out, "linear_solver = {}", s.linear_solver);
        let _ = writeln!(out, "cg_tol = {:?}", s.cg_tol);
        let _ = writeln!(out, "cg_max_iter = {}", s.cg_max_iter);
        let policy = match s.step_policy {
            StepPolicy::Enforce => "enforce",
            StepPolicy::Warn => "warn",
        };
        let _ = writeln!(out, "step_policy = {policy}");
        out.push_str("\n[output]\n");
        let _ = writeln!(out, "dir = {}", self.output.dir.display());
        let _ = writeln!(out, "dump_fields = {}", self.output.dump_fields);
        let _ = writeln!(out, "history_every = {}", self.output.history_every);
        out
    }
}
