//! Experiment configuration: defaults per kind, flat `key = value` files, overrides.

use crate::diffusion::{Convention, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::kernels::SamplerSpec;
use crate::models::diffusion::Drift;
use crate::models::Parametrization;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    HierLogistic,
    HierCovariates,
    LogregAlpha,
    Diffusion,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::HierLogistic => "hier-logistic",
            ExperimentKind::HierCovariates => "hier-covariates",
            ExperimentKind::LogregAlpha => "logreg-alpha",
            ExperimentKind::Diffusion => "diffusion",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hier-logistic" => Ok(ExperimentKind::HierLogistic),
            "hier-covariates" => Ok(ExperimentKind::HierCovariates),
            "logreg-alpha" => Ok(ExperimentKind::LogregAlpha),
            "diffusion" => Ok(ExperimentKind::Diffusion),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Number of groups J (hierarchical kinds).
    pub groups: Vec<usize>,
    /// Observations per group m.
    pub obs_per_group: usize,
    /// ℓ for hierarchical kinds, d for logreg-alpha.
    pub covariates: Vec<usize>,
    pub samplers: Vec<SamplerSpec>,
    pub iters: usize,
    pub burnin: usize,
    pub reps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub mu_true: f64,
    /// When positive, each replicate draws μ*_k ~ Unif[−r, r] instead of using `mu_true`.
    pub mu_true_range: f64,
    pub tau_true: f64,
    /// Radius factor c and conditional conductance κ of the feasible start.
    pub start_c: f64,
    pub start_kappa: f64,
    /// Half-width of the covariate distribution Unif[−r, r].
    pub covariate_range: f64,
    pub alpha_true: f64,
    /// n = ⌈ratio·d⌉ for logreg-alpha.
    pub obs_ratio: f64,
    pub parametrizations: Vec<Parametrization>,
    pub drift: Drift,
    /// Observation counts N (diffusion).
    pub n_obs: Vec<usize>,
    pub resolution: usize,
    pub theta_true: f64,
    pub horizon: f64,
    pub theta_support: (f64, f64),
    pub convention: Convention,
    /// Largest tolerated fraction of failed replicates.
    pub max_failure_rate: f64,
}

pub const FULL_SCALE_GROUPS: [usize; 6] = [128, 256, 512, 1024, 2048, 4096];

impl ExperimentConfig {
    /// Desk-scale defaults.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let parse = |s: &str| s.parse::<SamplerSpec>().expect("valid built-in sampler");
        let mut c = ExperimentConfig {
            kind,
            groups: vec![128, 256, 512, 1024],
            obs_per_group: 10,
            covariates: vec![1],
            samplers: vec![parse("gibbs-ars"), parse("mwg-barker")],
            iters: 20_000,
            burnin: 2_000,
            reps: 20,
            seed: 1,
            out: None,
            plot: None,
            mu_true: 1.0,
            mu_true_range: 0.0,
            tau_true: 1.0,
            start_c: 1.0,
            start_kappa: 0.5,
            covariate_range: 5.0,
            alpha_true: 1.0,
            obs_ratio: 0.5,
            parametrizations: vec![Parametrization::Centered, Parametrization::NonCentered],
            drift: Drift::Sine,
            n_obs: vec![4, 8, 16, 32, 64],
            resolution: DEFAULT_RESOLUTION,
            theta_true: 1.0,
            horizon: 5.0,
            theta_support: (0.0, 2.0),
            convention: Convention::Reduced,
            max_failure_rate: 0.2,
        };
        match kind {
            ExperimentKind::HierLogistic => {}
            ExperimentKind::HierCovariates => {
                c.groups = vec![30];
                c.obs_per_group = 30;
                c.covariates = vec![1, 2, 3, 4, 5];
                c.tau_true = 0.5;
                c.mu_true_range = 1.0;
                c.samplers = vec![parse("mwg-imh-mode"), parse("mwg-barker")];
            }
            ExperimentKind::LogregAlpha => {
                c.covariates = vec![20, 60];
                c.samplers = vec![parse("mwg-barker:k=100")];
            }
            ExperimentKind::Diffusion => {
                c.samplers = vec![];
                c.reps = 10;
                c.iters = 10_000;
                c.burnin = 1_000;
            }
        }
        c
    }

    /// Widens the grids to their full ranges.
    pub fn full_scale(&mut self) {
        match self.kind {
            ExperimentKind::HierLogistic => self.groups = FULL_SCALE_GROUPS.to_vec(),
            ExperimentKind::HierCovariates => {}
            ExperimentKind::LogregAlpha => self.covariates = vec![20, 60, 100],
            ExperimentKind::Diffusion => self.n_obs = vec![4, 8, 16, 32, 64, 128],
        }
    }

    /// Applies one `key = value` setting. Keys match the long CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |what: &str| Error::Config(format!("{key}: cannot parse '{v}' as {what}"));
        let usize_list = |s: &str| -> Result<Vec<usize>> {
            s.split(',').map(|x| x.trim().parse::<usize>().map_err(|_| bad("a list of integers"))).collect()
        };
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad("a number"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("an integer"));
        match key.trim().trim_start_matches("--") {
            "kind" | "experiment" => self.kind = v.parse()?,
            "groups" => self.groups = usize_list(v)?,
            "obs-per-group" => self.obs_per_group = int(v)?,
            "covariates" => self.covariates = usize_list(v)?,
            "samplers" => self.samplers = v.split(',').map(|s| s.parse()).collect::<Result<_>>()?,
            "iters" => self.iters = int(v)?,
            "burnin" => self.burnin = int(v)?,
            "reps" => self.reps = int(v)?,
            "seed" => self.seed = v.parse().map_err(|_| bad("an unsigned integer"))?,
            "out" => self.out = Some(PathBuf::from(v)),
            "plot" => self.plot = Some(PathBuf::from(v)),
            "mu-true" => self.mu_true = float(v)?,
            "mu-true-range" => self.mu_true_range = float(v)?,
            "tau-true" => self.tau_true = float(v)?,
            "start-c" => self.start_c = float(v)?,
            "start-kappa" => self.start_kappa = float(v)?,
            "covariate-range" => self.covariate_range = float(v)?,
            "alpha-true" => self.alpha_true = float(v)?,
            "obs-ratio" => self.obs_ratio = float(v)?,
            "parametrizations" => {
                self.parametrizations = v
                    .split(',')
                    .map(|p| match p.trim() {
                        "centered" => Ok(Parametrization::Centered),
                        "noncentered" | "non-centered" => Ok(Parametrization::NonCentered),
                        _ => Err(bad("centered/noncentered")),
                    })
                    .collect::<Result<_>>()?
            }
            "drift" => self.drift = Drift::parse(v)?,
            "N" => self.n_obs = usize_list(v)?,
            "R" => self.resolution = int(v)?,
            "theta-true" => self.theta_true = float(v)?,
            "T" => self.horizon = float(v)?,
            "theta-support" => {
                let (a, b) = v.split_once(',').ok_or_else(|| bad("lo,hi"))?;
                self.theta_support = (float(a.trim())?, float(b.trim())?);
            }
            "girsanov" => self.convention = Convention::parse(v)?,
            "max-failure-rate" => self.max_failure_rate = float(v)?,
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Reads a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", no + 1)))?;
            self.set(k.trim(), v).map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.iters <= self.burnin {
            return cfg(format!("iters ({}) must exceed burnin ({})", self.iters, self.burnin));
        }
        if self.reps == 0 {
            return cfg("reps must be at least 1".into());
        }
        if !(self.start_kappa > 0.0 && self.start_kappa <= 1.0) {
            return cfg(format!("start-kappa must lie in (0, 1], got {}", self.start_kappa));
        }
        if !(self.start_c >= 0.0) {
            return cfg(format!("start-c must be non-negative, got {}", self.start_c));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return cfg("max-failure-rate must lie in [0, 1]".into());
        }
        match self.kind {
            ExperimentKind::HierLogistic | ExperimentKind::HierCovariates => {
                if self.groups.is_empty() || self.covariates.is_empty() || self.samplers.is_empty() {
                    return cfg("groups, covariates and samplers must be nonempty".into());
                }
                if self.groups.contains(&0) || self.covariates.contains(&0) {
                    return cfg("groups and covariates must be positive".into());
                }
                if self.obs_per_group == 0 {
                    return cfg("obs-per-group must be positive".into());
                }
                if !(self.mu_true.is_finite() && self.tau_true > 0.0) {
                    return cfg("need finite mu-true and positive tau-true".into());
                }
            }
            ExperimentKind::LogregAlpha => {
                if self.covariates.is_empty() || self.samplers.is_empty() || self.parametrizations.is_empty() {
                    return cfg("covariates, samplers and parametrizations must be nonempty".into());
                }
                if self.covariates.contains(&0) || !(self.obs_ratio > 0.0) || !(self.alpha_true > 0.0) {
                    return cfg("need positive covariates, obs-ratio and alpha-true".into());
                }
            }
            ExperimentKind::Diffusion => {
                if self.n_obs.is_empty() || self.n_obs.contains(&0) {
                    return cfg("N must be a nonempty list of positive integers".into());
                }
                if self.resolution < 2 {
                    return cfg(format!("R must be at least 2, got {}", self.resolution));
                }
                if !(self.horizon > 0.0) || !(self.theta_support.0 < self.theta_support.1) {
                    return cfg("need T > 0 and a nonempty theta support".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::HierLogistic);
        c.apply_file("# desk run\ngroups = 16, 32\nsamplers = mwg-rwm,mwg-barker:k=3\niters=500 # short\nburnin = 50\n").unwrap();
        assert_eq!(c.groups, vec![16, 32]);
        assert_eq!(c.samplers.len(), 2);
        assert_eq!(c.samplers[1].repeat, 3);
        c.set("--iters", "800").unwrap();
        assert_eq!(c.iters, 800);
        c.validate().unwrap();
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Diffusion);
        let e = c.apply_file("N = 4,8\nR = two\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(c.apply_file("bogus = 1").is_err());
        assert!(c.apply_file("no equals sign").is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::LogregAlpha);
        c.burnin = c.iters;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::HierCovariates);
        c.start_kappa = 0.0;
        assert!(c.validate().is_err());
        for k in ["hier-logistic", "hier-covariates", "logreg-alpha", "diffusion"] {
            ExperimentConfig::defaults(k.parse().unwrap()).validate().unwrap();
        }
    }
}
