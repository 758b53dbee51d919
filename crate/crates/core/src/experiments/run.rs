//! Replicated experiment runs: (grid point × replicate) tasks on a rayon pool, each
//! with streams derived from (seed, grid index, replicate index), then a serial reduce.

use super::config::{ExperimentConfig, ExperimentKind};
use super::plot::{line_plot_svg, Series};
use super::start::build_feasible_start;
use crate::diagnostics::{aggregate_median, median, write_iat_rows, IatRow, TraceMatrix};
use crate::diffusion::DaSampler;
use crate::error::{Error, Result};
use crate::kernels::{hier_kernel, logreg_kernel, LogRegState, SamplerSpec};
use crate::models::diffusion::{simulate_observations, DiffusionModel, ThetaPrior};
use crate::models::hier::CovariateLayout;
use crate::models::{generate_dataset, generate_logreg, HierSpec, Parametrization, Psi};
use crate::rng::{derive_seed, stream};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

const SUBSTEPS: usize = 50;

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub config_id: String,
    /// J for hierarchical kinds, n for logreg-alpha, N for diffusion.
    pub j: usize,
    /// ℓ, d, or 1.
    pub l: usize,
    /// Value on the plot's x axis.
    pub x: f64,
    pub param: Option<String>,
    /// Index shared by grid points that use the same data (centred/non-centred pairs).
    data_key: usize,
}

/// Sampler arm: the spec string used in the CSV.
fn arms(cfg: &ExperimentConfig) -> Vec<String> {
    match cfg.kind {
        ExperimentKind::Diffusion => vec!["da-bridge".to_string()],
        _ => cfg.samplers.iter().map(SamplerSpec::to_string).collect(),
    }
}

fn param_name(p: Parametrization) -> &'static str {
    match p {
        Parametrization::Centered => "centered",
        Parametrization::NonCentered => "noncentered",
    }
}

pub fn grid(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let mut out = Vec::new();
    match cfg.kind {
        ExperimentKind::HierLogistic | ExperimentKind::HierCovariates => {
            for &j in &cfg.groups {
                for &l in &cfg.covariates {
                    let x = if cfg.kind == ExperimentKind::HierLogistic { j } else { l } as f64;
                    let key = out.len();
                    out.push(GridPoint { config_id: format!("J={j},m={},l={l}", cfg.obs_per_group), j, l, x, param: None, data_key: key });
                }
            }
        }
        ExperimentKind::LogregAlpha => {
            for (di, &d) in cfg.covariates.iter().enumerate() {
                let n = logreg_n(cfg, d);
                for &p in &cfg.parametrizations {
                    out.push(GridPoint {
                        config_id: format!("d={d},n={n},{}", param_name(p)),
                        j: n,
                        l: d,
                        x: d as f64,
                        param: Some(param_name(p).to_string()),
                        data_key: di,
                    });
                }
            }
        }
        ExperimentKind::Diffusion => {
            for (i, &n) in cfg.n_obs.iter().enumerate() {
                out.push(GridPoint {
                    config_id: format!("N={n},T={},R={}", cfg.horizon, cfg.resolution),
                    j: n,
                    l: 1,
                    x: n as f64,
                    param: None,
                    data_key: i,
                });
            }
        }
    }
    out
}

fn logreg_n(cfg: &ExperimentConfig, d: usize) -> usize {
    ((cfg.obs_ratio * d as f64).ceil() as usize).max(1)
}

/// Result of one sampler on one replicate.
#[derive(Debug, Clone)]
pub struct ArmResult {
    pub max_iat: f64,
    pub max_ess: f64,
    pub cost: f64,
    /// IAT of each named global parameter.
    pub globals: Vec<(String, f64, f64)>,
    pub acceptance: Option<f64>,
    pub trace: Option<Vec<f64>>,
}

fn summarise(trace: &TraceMatrix, names: &[String], unit: f64) -> Result<ArmResult> {
    let all = trace.iat_all()?;
    let worst = all.per_param[all.argmax];
    let first_global = trace.params() - names.len();
    let globals = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), all.per_param[first_global + i].iat, all.per_param[first_global + i].ess))
        .collect();
    Ok(ArmResult { max_iat: all.max, max_ess: worst.ess, cost: trace.cost_multiplier(unit), globals, acceptance: None, trace: None })
}

fn psi_names(l: usize) -> Vec<String> {
    if l == 1 {
        vec!["mu".into(), "tau".into()]
    } else {
        (1..=l).map(|k| format!("mu{k}")).chain((1..=l).map(|k| format!("tau{k}"))).collect()
    }
}

fn run_hier(cfg: &ExperimentConfig, gp: &GridPoint, rep: usize, gi: usize) -> Result<Vec<Result<ArmResult>>> {
    let spec = if gp.l == 1 && cfg.kind == ExperimentKind::HierLogistic {
        HierSpec::intercept(gp.j, cfg.obs_per_group)
    } else {
        HierSpec {
            groups: gp.j,
            obs: cfg.obs_per_group,
            dim: gp.l,
            layout: if gp.l == 1 { CovariateLayout::Intercept } else { CovariateLayout::Shared },
            covariate_range: cfg.covariate_range,
        }
    };
    let mu = if cfg.mu_true_range > 0.0 {
        let mut r = stream(cfg.seed, &[gp.data_key as u64, rep as u64, 7]);
        (0..gp.l).map(|_| r.random_range(-cfg.mu_true_range..=cfg.mu_true_range)).collect()
    } else {
        vec![cfg.mu_true; gp.l]
    };
    let psi_true = Psi { mu, tau: vec![cfg.tau_true; gp.l] };
    let data = generate_dataset(&spec, &psi_true, derive_seed(cfg.seed, &[gp.data_key as u64, rep as u64, 0]))?;
    let model = Arc::new(data.model);
    let names = psi_names(gp.l);
    let fallback = Psi { mu: vec![0.0; gp.l], tau: vec![1.0; gp.l] };
    Ok(cfg
        .samplers
        .iter()
        .enumerate()
        .map(|(ai, s)| {
            let mut rng = stream(cfg.seed, &[gi as u64, rep as u64, ai as u64 + 1]);
            let rule = s.update();
            let kernel = hier_kernel(model.clone(), rule.clone())?;
            let mut st = build_feasible_start(&model, &rule, cfg.start_c, cfg.start_kappa, &fallback, &mut rng)?.state;
            let mut trace = TraceMatrix::new(st.param_count(), cfg.iters - cfg.burnin);
            trace.sampler = s.to_string();
            let mut row = vec![0.0; st.param_count()];
            for it in 0..cfg.iters {
                let t = kernel.step(&mut st, &mut rng)?;
                if it >= cfg.burnin {
                    trace.evals += t.outcome.evals;
                    st.record(&mut row);
                    trace.push_row(&row)?;
                }
            }
            summarise(&trace, &names, gp.j as f64)
        })
        .collect())
}

fn run_logreg(cfg: &ExperimentConfig, gp: &GridPoint, rep: usize, gi: usize) -> Result<Vec<Result<ArmResult>>> {
    let param = match gp.param.as_deref() {
        Some("noncentered") => Parametrization::NonCentered,
        _ => Parametrization::Centered,
    };
    let data = generate_logreg(gp.j, gp.l, cfg.alpha_true, param, derive_seed(cfg.seed, &[gp.data_key as u64, rep as u64, 0]))?;
    let model = Arc::new(data.model);
    let names = vec!["alpha".to_string()];
    Ok(cfg
        .samplers
        .iter()
        .enumerate()
        .map(|(ai, s)| {
            let mut rng = stream(cfg.seed, &[gi as u64, rep as u64, ai as u64 + 1]);
            let kernel = logreg_kernel(model.clone(), s.update())?;
            // α at its prior mean, coefficients from the prior given α
            let alpha = model.a / model.b;
            let coef = model.sample_prior_coef(alpha, &mut rng);
            let mut st = LogRegState::new(&model, alpha, coef)?;
            let mut trace = TraceMatrix::new(st.param_count(), cfg.iters - cfg.burnin);
            trace.sampler = s.to_string();
            let mut row = vec![0.0; st.param_count()];
            for it in 0..cfg.iters {
                let t = kernel.step(&mut st, &mut rng)?;
                if it >= cfg.burnin {
                    trace.evals += t.outcome.evals;
                    st.record(&mut row);
                    trace.push_row(&row)?;
                }
            }
            summarise(&trace, &names, 1.0)
        })
        .collect())
}

fn run_diffusion(cfg: &ExperimentConfig, gp: &GridPoint, rep: usize, gi: usize) -> Result<Vec<Result<ArmResult>>> {
    let n_max = *cfg.n_obs.iter().max().expect("validated nonempty");
    // one trajectory per replicate, observed at every N by subsampling
    let fine =
        simulate_observations(cfg.drift, cfg.theta_true, 0.0, cfg.horizon, n_max, SUBSTEPS, derive_seed(cfg.seed, &[rep as u64, 0]))?;
    let obs: Vec<f64> = fine.iter().step_by(n_max / gp.j).copied().collect();
    let model = DiffusionModel::new(cfg.drift, cfg.horizon / gp.j as f64, obs, cfg.theta_support, ThetaPrior::Flat)?;
    let mut rng = stream(cfg.seed, &[gi as u64, rep as u64, 1]);
    let result = (|| {
        let start = 0.5 * (cfg.theta_support.0 + cfg.theta_support.1);
        let mut s = DaSampler::new(model, cfg.resolution, start, &mut rng)?.with_convention(cfg.convention);
        let run = s.run(cfg.iters, cfg.burnin, &mut rng)?;
        let mut trace = TraceMatrix::new(1, run.theta.len());
        trace.sampler = "da-bridge".into();
        for t in &run.theta {
            trace.push_row(&[*t])?;
        }
        trace.evals = run.counters.proposals;
        let mut r = summarise(&trace, &["theta".to_string()], gp.j as f64)?;
        r.acceptance = Some(run.counters.acceptance());
        r.trace = (rep == 0).then_some(run.theta);
        Ok(r)
    })();
    Ok(vec![result])
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub point: GridPoint,
    pub sampler: String,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub median_max_iat: f64,
    pub median_max_ess: f64,
    pub median_cost: f64,
    pub median_iat_x_cost: f64,
    pub max_iats: Vec<f64>,
    /// (name, median IAT, median ESS) per global parameter.
    pub globals: Vec<(String, f64, f64)>,
    pub acceptance: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub kind: ExperimentKind,
    pub summaries: Vec<Summary>,
    pub failures: usize,
    pub tasks: usize,
    /// θ traces of replicate 0 per N (diffusion only).
    pub traces: Vec<(usize, Vec<f64>)>,
    /// Observation window T (diffusion only).
    pub horizon: Option<f64>,
}

impl ExperimentOutput {
    pub fn find(&self, config_id: &str, sampler: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.point.config_id == config_id && s.sampler == sampler)
    }

    pub fn rows(&self) -> Vec<IatRow> {
        let mut rows = Vec::new();
        for s in &self.summaries {
            let mk = |param: &str, iat: f64, ess: f64, iat_x_cost: f64| IatRow {
                config_id: s.point.config_id.clone(),
                sampler: s.sampler.clone(),
                j: s.point.j,
                l: s.point.l,
                param: param.to_string(),
                iat,
                ess,
                cost: s.median_cost,
                iat_x_cost,
            };
            rows.push(mk("max", s.median_max_iat, s.median_max_ess, s.median_iat_x_cost));
            for (name, iat, ess) in &s.globals {
                rows.push(mk(name, *iat, *ess, iat * s.median_cost));
            }
        }
        rows
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_iat_rows(out, &self.rows())
    }

    /// N, Δ, median/min/max acceptance over replicates, median IAT of θ.
    pub fn write_acceptance_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            #[serde(rename = "N")]
            n: usize,
            delta: f64,
            acceptance_median: f64,
            acceptance_min: f64,
            acceptance_max: f64,
            theta_iat: f64,
            reps: usize,
        }
        let mut w = csv::Writer::from_writer(out);
        for s in &self.summaries {
            let (lo, hi) = s.acceptance.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(*v), a.1.max(*v)));
            w.serialize(Row {
                n: s.point.j,
                delta: self.horizon.map_or(f64::NAN, |t| t / s.point.j as f64),
                acceptance_median: median(&s.acceptance),
                acceptance_min: lo,
                acceptance_max: hi,
                theta_iat: s.median_max_iat,
                reps: s.reps_ok,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "iter", "theta"])?;
        for (n, tr) in &self.traces {
            for (i, t) in tr.iter().enumerate() {
                w.write_record([n.to_string(), i.to_string(), format!("{t}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn svg(&self) -> String {
        let x_label = match self.kind {
            ExperimentKind::HierLogistic => "J (groups)",
            ExperimentKind::HierCovariates => "l (covariates)",
            ExperimentKind::LogregAlpha => "d",
            ExperimentKind::Diffusion => "N (observations)",
        };
        let mut series: Vec<Series> = Vec::new();
        for s in &self.summaries {
            let label = match &s.point.param {
                Some(p) => format!("{} {p}", s.sampler),
                None => s.sampler.clone(),
            };
            match series.iter_mut().find(|x| x.label == label) {
                Some(x) => x.points.push((s.point.x, s.median_iat_x_cost)),
                None => series.push(Series { label, points: vec![(s.point.x, s.median_iat_x_cost)] }),
            }
        }
        line_plot_svg(&format!("{}: median max IAT x cost", self.kind), x_label, "IAT x cost (log scale)", &series)
    }
}

/// Runs every (grid point, replicate) task and reduces to medians per (grid point, sampler).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if cfg.kind == ExperimentKind::Diffusion {
        let n_max = *cfg.n_obs.iter().max().unwrap();
        if let Some(n) = cfg.n_obs.iter().find(|&&n| n_max % n != 0) {
            return Err(Error::Config(format!("N = {n} does not divide the largest N = {n_max}")));
        }
    }
    let points = grid(cfg);
    let arm_names = arms(cfg);
    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|g| (0..cfg.reps).map(move |r| (g, r))).collect();
    let results: Vec<Vec<Result<ArmResult>>> = tasks
        .par_iter()
        .map(|&(gi, rep)| {
            let gp = &points[gi];
            log::info!("{} {} rep {rep}", cfg.kind, gp.config_id);
            let out = match cfg.kind {
                ExperimentKind::HierLogistic | ExperimentKind::HierCovariates => run_hier(cfg, gp, rep, gi),
                ExperimentKind::LogregAlpha => run_logreg(cfg, gp, rep, gi),
                ExperimentKind::Diffusion => run_diffusion(cfg, gp, rep, gi),
            };
            match out {
                Ok(v) => v,
                Err(e) => (0..arm_names.len()).map(|_| Err(Error::Domain(format!("data setup: {e}")))).collect(),
            }
        })
        .collect();

    let mut summaries = Vec::new();
    let mut failures = 0;
    let mut traces = Vec::new();
    for (gi, gp) in points.iter().enumerate() {
        for (ai, arm) in arm_names.iter().enumerate() {
            let mut ok: Vec<&ArmResult> = Vec::new();
            let mut failed = 0;
            for rep in 0..cfg.reps {
                match &results[gi * cfg.reps + rep][ai] {
                    Ok(r) => ok.push(r),
                    Err(e) => {
                        failed += 1;
                        log::warn!("{} {} {arm} rep {rep} failed: {e}", cfg.kind, gp.config_id);
                    }
                }
            }
            failures += failed;
            if let Some(tr) = ok.iter().find_map(|r| r.trace.clone()) {
                traces.push((gp.j, tr));
            }
            summaries.push(reduce(gp, arm, &ok, failed)?);
        }
    }
    let total = tasks.len() * arm_names.len();
    if failures as f64 > cfg.max_failure_rate * total as f64 {
        return Err(Error::Replicates(format!("{failures} of {total} replicate runs failed (limit {:.0}%)", 100.0 * cfg.max_failure_rate)));
    }
    if failures > 0 {
        log::warn!("{failures} of {total} replicate runs failed and were excluded from the medians");
    }
    Ok(ExperimentOutput {
        kind: cfg.kind,
        summaries,
        failures,
        tasks: total,
        traces,
        horizon: (cfg.kind == ExperimentKind::Diffusion).then_some(cfg.horizon),
    })
}

fn reduce(gp: &GridPoint, arm: &str, ok: &[&ArmResult], failed: usize) -> Result<Summary> {
    let nan = f64::NAN;
    if ok.is_empty() {
        return Ok(Summary {
            point: gp.clone(),
            sampler: arm.to_string(),
            reps_ok: 0,
            reps_failed: failed,
            median_max_iat: nan,
            median_max_ess: nan,
            median_cost: nan,
            median_iat_x_cost: nan,
            max_iats: vec![],
            globals: vec![],
            acceptance: vec![],
        });
    }
    let iats: Vec<f64> = ok.iter().map(|r| r.max_iat).collect();
    let costs: Vec<f64> = ok.iter().map(|r| r.cost).collect();
    let prod = aggregate_median(&iats, &costs)?;
    let globals = (0..ok[0].globals.len())
        .map(|k| {
            let iat: Vec<f64> = ok.iter().map(|r| r.globals[k].1).collect();
            let ess: Vec<f64> = ok.iter().map(|r| r.globals[k].2).collect();
            (ok[0].globals[k].0.clone(), median(&iat), median(&ess))
        })
        .collect();
    Ok(Summary {
        point: gp.clone(),
        sampler: arm.to_string(),
        reps_ok: ok.len(),
        reps_failed: failed,
        median_max_iat: median(&iats),
        median_max_ess: median(&ok.iter().map(|r| r.max_ess).collect::<Vec<_>>()),
        median_cost: median(&costs),
        median_iat_x_cost: prod.median,
        max_iats: iats,
        globals,
        acceptance: ok.iter().filter_map(|r| r.acceptance).collect(),
    })
}

/// `<stem>_<suffix>.csv` next to the results file.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// Writes the results CSV, optional plot, and the diffusion extras.
pub fn write_outputs(out: &ExperimentOutput, cfg: &ExperimentConfig) -> Result<()> {
    if let Some(p) = &cfg.out {
        out.write_csv(std::fs::File::create(p)?)?;
        if cfg.kind == ExperimentKind::Diffusion {
            out.write_acceptance_csv(std::fs::File::create(sibling(p, "acceptance"))?)?;
            out.write_trace_csv(std::fs::File::create(sibling(p, "trace"))?)?;
        }
    } else {
        out.write_csv(std::io::stdout().lock())?;
    }
    if let Some(p) = &cfg.plot {
        std::fs::write(p, out.svg())?;
    }
    Ok(())
}
