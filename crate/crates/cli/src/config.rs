//! Experiment configuration: a JSON file, optionally overridden by flags.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rlsa_core::metrics::{DEFAULT_INNER_BUDGET, DEFAULT_INNER_TOL};
use rlsa_core::problems::Family;
use rlsa_core::{Checkpoints, GapOptions, InstanceDescriptor, Schedule, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "RLSA_OUT_DIR";
pub const DEFAULT_OUT_ROOT: &str = "rlsa-out";

/// Either an inline descriptor or a path to a descriptor JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Path { path: PathBuf },
    Inline(InstanceDescriptor),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapChoice {
    Affine,
    Sampled,
    None,
}

impl std::str::FromStr for GapChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "affine" => Ok(GapChoice::Affine),
            "sampled" => Ok(GapChoice::Sampled),
            "none" => Ok(GapChoice::None),
            other => Err(format!("unknown gap method '{other}' (expected affine, sampled or none)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub rho0: f64,
    pub gamma0: f64,
    pub iterations: u64,
    pub schedule: Schedule,
    pub check_coupling: bool,
    pub x0: Option<Vec<f64>>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rho0: 10.0,
            gamma0: 0.3,
            iterations: 100_000,
            schedule: Schedule::Decaying,
            check_coupling: false,
            x0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricToggles {
    pub gap: GapChoice,
    pub gap_inner_tol: f64,
    pub gap_inner_budget: usize,
    /// Candidate draws for the sampled gap bound.
    pub gap_samples: usize,
    /// Seed of the sampled gap candidates.
    pub gap_seed: u64,
    pub record_wall_time: bool,
    /// Smallest checkpoint used by rate fits.
    pub rate_k_min: u64,
}

impl Default for MetricToggles {
    fn default() -> Self {
        Self {
            gap: GapChoice::Affine,
            gap_inner_tol: DEFAULT_INNER_TOL,
            gap_inner_budget: DEFAULT_INNER_BUDGET,
            gap_samples: 20_000,
            gap_seed: 0,
            record_wall_time: false,
            rate_k_min: 1000,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_checkpoints() -> Checkpoints {
    Checkpoints::Geometric
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Replication seeds; each seeds both the noise and the index stream.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub metrics: MetricToggles,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub family: Option<Family>,
    pub n: Option<usize>,
    pub constraints: Option<usize>,
    pub instance_seed: Option<u64>,
    pub noise_level: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub iterations: Option<u64>,
    pub rho: Option<f64>,
    pub gamma: Option<f64>,
    pub out: Option<PathBuf>,
    pub checkpoints: Option<Checkpoints>,
    pub gap: Option<GapChoice>,
    pub check_coupling: Option<bool>,
    pub record_wall_time: Option<bool>,
}

/// Parses `geometric` or `linear:N`.
pub fn parse_checkpoints(s: &str) -> Result<Checkpoints, String> {
    if s == "geometric" {
        return Ok(Checkpoints::Geometric);
    }
    if let Some(rest) = s.strip_prefix("linear:") {
        let every: u64 = rest
            .parse()
            .map_err(|_| format!("bad linear checkpoint cadence '{rest}'"))?;
        if every == 0 {
            return Err("linear checkpoint cadence must be >= 1".into());
        }
        return Ok(Checkpoints::Linear(every));
    }
    Err(format!("unknown checkpoint schedule '{s}' (expected geometric or linear:N)"))
}

/// Parses `1,2,3` or a range `0..20` (end exclusive).
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range '{s}'"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range '{s}'"))?;
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| format!("bad seed '{p}'")))
        .collect()
}

/// A descriptor with the family's default shape.
pub fn default_descriptor(family: Family, seed: u64, noise_level: f64) -> InstanceDescriptor {
    match family {
        Family::AffineVi => InstanceDescriptor::affine_vi(seed, 5, 10, noise_level),
        Family::BilinearMinimax => InstanceDescriptor::bilinear_minimax(seed, 2, 2, 1, 1, noise_level),
        Family::NashCournot => InstanceDescriptor::nash_cournot(seed, 2, noise_level),
        Family::ScalarReference => InstanceDescriptor::scalar_reference(noise_level),
    }
}

const DEFAULT_NOISE: f64 = 0.1;

impl ExperimentConfig {
    pub fn for_descriptor(descriptor: InstanceDescriptor) -> Self {
        Self {
            instance: InstanceSource::Inline(descriptor),
            solver: SolverSettings::default(),
            seeds: default_seeds(),
            checkpoints: default_checkpoints(),
            out_dir: None,
            metrics: MetricToggles::default(),
        }
    }

    /// Reads a config file; a relative descriptor path is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if let InstanceSource::Path { path: p } = &config.instance {
            if p.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                config.instance = InstanceSource::Path { path: base.join(p) };
            }
        }
        Ok(config)
    }

    /// Loads `path` if given, otherwise starts from the family's defaults,
    /// then applies the overrides and validates.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> HarnessResult<Self> {
        let mut config = match (path, overrides.family) {
            (Some(p), _) => Self::load(p)?,
            (None, Some(family)) => Self::for_descriptor(default_descriptor(
                family,
                overrides.instance_seed.unwrap_or(0),
                overrides.noise_level.unwrap_or(DEFAULT_NOISE),
            )),
            (None, None) => {
                return Err(HarnessError::Config(
                    "either --config or --family is required".into(),
                ))
            }
        };
        config.apply(overrides)?;
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, o: &Overrides) -> HarnessResult<()> {
        let touches_instance = o.family.is_some()
            || o.n.is_some()
            || o.constraints.is_some()
            || o.instance_seed.is_some()
            || o.noise_level.is_some();
        if touches_instance {
            let mut d = self.descriptor()?;
            if let Some(f) = o.family {
                if f != d.family {
                    d = default_descriptor(f, d.seed, d.noise_level);
                }
            }
            if let Some(n) = o.n {
                set_dim(&mut d, n)?;
            }
            if let Some(j) = o.constraints {
                set_constraints(&mut d, j)?;
            }
            if let Some(s) = o.instance_seed {
                d.seed = s;
            }
            if let Some(v) = o.noise_level {
                d.noise_level = v;
            }
            self.instance = InstanceSource::Inline(d);
        }
        if let Some(s) = &o.seeds {
            self.seeds = s.clone();
        }
        if let Some(k) = o.iterations {
            self.solver.iterations = k;
        }
        if let Some(r) = o.rho {
            self.solver.rho0 = r;
        }
        if let Some(g) = o.gamma {
            self.solver.gamma0 = g;
        }
        if let Some(p) = &o.out {
            self.out_dir = Some(p.clone());
        }
        if let Some(c) = &o.checkpoints {
            self.checkpoints = c.clone();
        }
        if let Some(g) = o.gap {
            self.metrics.gap = g;
        }
        if let Some(c) = o.check_coupling {
            self.solver.check_coupling = c;
        }
        if let Some(w) = o.record_wall_time {
            self.metrics.record_wall_time = w;
        }
        Ok(())
    }

    pub fn validate(&self) -> HarnessResult<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("the seed list is empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(HarnessError::Config(format!("seed {dup} is listed twice")));
        }
        if let Checkpoints::Explicit(ks) = &self.checkpoints {
            if ks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(HarnessError::Config(
                    "explicit checkpoints must be strictly increasing".into(),
                ));
            }
        }
        self.solver_config(self.seeds[0]).validate()?;
        if !(self.metrics.gap_inner_tol > 0.0) || self.metrics.gap_inner_budget == 0 {
            return Err(HarnessError::Config(
                "gap_inner_tol must be > 0 and gap_inner_budget >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn descriptor(&self) -> HarnessResult<InstanceDescriptor> {
        match &self.instance {
            InstanceSource::Inline(d) => Ok(d.clone()),
            InstanceSource::Path { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn gap_options(&self) -> GapOptions {
        match self.metrics.gap {
            GapChoice::Affine => GapOptions::Affine {
                inner_tol: self.metrics.gap_inner_tol,
                inner_budget: self.metrics.gap_inner_budget,
            },
            GapChoice::Sampled => GapOptions::Sampled {
                budget: self.metrics.gap_samples,
                seed: self.metrics.gap_seed,
            },
            GapChoice::None => GapOptions::None,
        }
    }

    /// Solver configuration for one replication seed.
    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            rho0: self.solver.rho0,
            gamma0: self.solver.gamma0,
            iterations: self.solver.iterations,
            schedule: self.solver.schedule,
            noise_seed: seed,
            index_seed: seed,
            check_coupling: self.solver.check_coupling,
            x0: self.solver.x0.clone(),
            checkpoints: self.checkpoints.clone(),
            gap: self.gap_options(),
            record_wall_time: self.metrics.record_wall_time,
        }
    }

    /// `out_dir` if set, else `$RLSA_OUT_DIR/<default_leaf>` (or
    /// `rlsa-out/<default_leaf>`).
    pub fn output_dir(&self, default_leaf: &str) -> PathBuf {
        if let Some(p) = &self.out_dir {
            return p.clone();
        }
        let root = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
        root.join(default_leaf)
    }
}

fn set_dim(d: &mut InstanceDescriptor, n: usize) -> HarnessResult<()> {
    match d.family {
        Family::AffineVi => d.dims.n = Some(n),
        Family::NashCournot => d.dims.players = Some(n),
        Family::BilinearMinimax => {
            d.dims.n1 = Some(n);
            d.dims.n2 = Some(n);
        }
        Family::ScalarReference => {
            if n != 1 {
                return Err(HarnessError::Config("scalar-reference has n = 1".into()));
            }
        }
    }
    Ok(())
}

fn set_constraints(d: &mut InstanceDescriptor, j: usize) -> HarnessResult<()> {
    match d.family {
        Family::AffineVi => d.dims.constraints = Some(j),
        Family::BilinearMinimax => {
            if j < 2 {
                return Err(HarnessError::Config("bilinear-minimax needs J >= 2".into()));
            }
            d.dims.constraints1 = Some(j / 2);
            d.dims.constraints2 = Some(j - j / 2);
        }
        Family::NashCournot => {
            return Err(HarnessError::Config(
                "nash-cournot has two constraints per player; set --n instead of --J".into(),
            ))
        }
        Family::ScalarReference => {
            if j != 1 {
                return Err(HarnessError::Config("scalar-reference has J = 1".into()));
            }
        }
    }
    Ok(())
}
