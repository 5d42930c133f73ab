//! Building a model from a config, running the chosen algorithm and
//! collecting metrics.

use std::sync::Arc;
use std::time::Instant;

use levelcg_core::level::{lcg_solve, mlcg_solve, ConstrainedProblem, EpsSolution, LevelConfig, Termination};
use levelcg_core::models::{
    build_imrt_convex, build_imrt_nonconvex, build_portfolio, card_violation, count_assets, gen_synthetic_imrt, risk,
    ImrtInstance, ImrtModel, ModelProblem, PortfolioModel, PortfolioParams, ReturnsData, ASSET_TOL,
};
use levelcg_core::nonconvex::{dncg, ipp_lcg, DncgConfig, DncgOutput, DncgSchedule, IppConfig, IppOutput, NonconvexProblem};
use levelcg_core::vecops::positive_part_norm;

use crate::config::{Algo, DataSource, ModelKind, RunConfig};
use crate::data::{gen_synthetic_returns, load_returns_csv};
use crate::error::{BenchError, Result};
use crate::imrt_io::load_imrt_dir;
use crate::report::{num, CriterionRow, Iterations, KktRow, RunReport, RunStatus, SweepTable, Trace, REPORT_SCHEMA};

/// Fallback group-sparsity level.
pub const DEFAULT_PHI: f64 = 0.5;

pub enum Data {
    Returns(ReturnsData),
    Imrt { instance: ImrtInstance, phi: Option<f64> },
}

pub fn load_data(cfg: &RunConfig) -> Result<Data> {
    Ok(match &cfg.data {
        DataSource::Csv { path } => Data::Returns(load_returns_csv(path)?),
        DataSource::SyntheticReturns { spec } => Data::Returns(gen_synthetic_returns(spec, cfg.seed)?),
        DataSource::ImrtDir { path } => {
            let (instance, phi) = load_imrt_dir(path)?;
            Data::Imrt { instance, phi }
        }
        DataSource::SyntheticImrt { spec } => {
            Data::Imrt { instance: gen_synthetic_imrt(&spec.into(), cfg.seed)?, phi: None }
        }
    })
}

/// A built model with what is needed to report on its points.
pub enum Built {
    Portfolio { model: PortfolioModel, data: Arc<ReturnsData>, psi: usize },
    Imrt(ImrtModel),
}

impl Built {
    fn problem(&self) -> &ModelProblem {
        match self {
            Built::Portfolio { model, .. } => &model.problem,
            Built::Imrt(m) => &m.problem,
        }
    }
}

pub fn build_model(kind: ModelKind, cfg: &RunConfig, data: &Data) -> Result<Built> {
    match (kind.portfolio(), data) {
        (Some(pk), Data::Returns(d)) => {
            let psi = cfg.psi.resolve(d.n_assets());
            let params = PortfolioParams {
                alpha: cfg.alpha,
                theta: cfg.theta,
                psi: psi as f64,
                u_bounds: None,
                v_bounds: cfg.v_bounds,
            };
            let model = build_portfolio(pk, d, &params)?;
            Ok(Built::Portfolio { model, data: Arc::new(d.clone()), psi })
        }
        (None, Data::Imrt { instance, phi }) => {
            let phi = cfg.phi.or(*phi).unwrap_or(DEFAULT_PHI);
            let m = if kind == ModelKind::ImrtConvex {
                build_imrt_convex(instance, phi)?
            } else {
                build_imrt_nonconvex(instance, phi, cfg.theta, None)?
            };
            Ok(Built::Imrt(m))
        }
        _ => Err(BenchError::Config(format!("model {} does not match the data source", kind.name()))),
    }
}

/// Result of one run before anything is written.
pub struct RunOutcome {
    pub report: RunReport,
    pub traces: Vec<Trace>,
}

fn level_config(cfg: &RunConfig) -> LevelConfig {
    LevelConfig {
        max_outer: cfg.max_outer,
        max_inner: cfg.max_inner,
        max_total_inner: cfg.budget,
        ..LevelConfig::new(cfg.epsilon, cfg.mu)
    }
}

fn dncg_config(cfg: &RunConfig, x0: Option<Vec<f64>>) -> DncgConfig {
    let schedule = match (cfg.dncg_c, cfg.dncg_alpha) {
        (Some(c), Some(alpha)) => DncgSchedule::Fixed { c, alpha },
        _ => DncgSchedule::Horizon,
    };
    DncgConfig { horizon: cfg.k, schedule, x0 }
}

fn convex(b: &Built) -> Result<&ConstrainedProblem> {
    match b.problem() {
        ModelProblem::Convex(p) => Ok(p),
        ModelProblem::Nonconvex(_) => Err(BenchError::Config("expected a convex model".into())),
    }
}

fn nonconvex(b: &Built, force: bool) -> Result<NonconvexProblem> {
    match b.problem() {
        ModelProblem::Nonconvex(p) => Ok(p.clone()),
        ModelProblem::Convex(p) if force => Ok(NonconvexProblem::new(
            p.objective().clone(),
            0.0,
            p.constraints().to_vec(),
            p.x_set().clone(),
        )?),
        ModelProblem::Convex(_) => Err(BenchError::Config("model is convex; set force".into())),
    }
}

fn level_trace(stage: &'static str, s: &EpsSolution) -> Trace {
    Trace {
        stage,
        header: vec!["k", "level", "lower", "upper", "gamma", "inner_iters", "truncated"],
        rows: s
            .trace
            .iter()
            .map(|r| {
                vec![
                    r.k.to_string(),
                    num(r.level),
                    num(r.lower),
                    num(r.upper),
                    num(r.gamma),
                    r.inner_iters.to_string(),
                    r.truncated.to_string(),
                ]
            })
            .collect(),
    }
}

fn dncg_trace(stage: &'static str, o: &DncgOutput) -> Trace {
    Trace {
        stage,
        header: vec!["k", "wolfe_gap", "infeasibility_sq", "f_value", "lagrangian", "c"],
        rows: o
            .trace
            .iter()
            .map(|r| {
                vec![r.k.to_string(), num(r.wolfe_gap), num(r.infeasibility_sq), num(r.f_value), num(r.lagrangian), num(r.c)]
            })
            .collect(),
    }
}

fn ipp_trace(o: &IppOutput) -> Trace {
    Trace {
        stage: "ipp",
        header: vec![
            "j",
            "f_prev",
            "f_value",
            "decrease",
            "sub_gap_bound",
            "termination",
            "inner_iters",
            "complementarity",
            "stationarity",
            "proximity",
            "infeasibility",
        ],
        rows: o
            .steps
            .iter()
            .map(|s| {
                vec![
                    s.j.to_string(),
                    num(s.f_prev),
                    num(s.f_value),
                    num(s.decrease),
                    num(s.sub_gap_bound),
                    termination_name(s.termination).into(),
                    s.inner_iters.to_string(),
                    num(s.kkt.complementarity),
                    num(s.kkt.stationarity),
                    num(s.kkt.proximity),
                    num(s.kkt.infeasibility),
                ]
            })
            .collect(),
    }
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::BudgetExhausted => "budget-exhausted",
    }
}

fn level_status(t: Termination) -> RunStatus {
    match t {
        Termination::Converged => RunStatus::Converged,
        Termination::BudgetExhausted => RunStatus::BudgetExhausted,
    }
}

/// Fills the model-dependent metrics for decision vector `x`.
fn fill_metrics(report: &mut RunReport, built: &Built, x: &[f64]) {
    let (f, h) = match built.problem() {
        ModelProblem::Convex(p) => (p.objective().value(x), p.constraint_values(x)),
        ModelProblem::Nonconvex(p) => (p.objective().value(x), p.constraint_values(x)),
    };
    report.dim = x.len();
    report.objective = Some(f);
    report.constraint_norm = Some(positive_part_norm(&h));
    match built {
        Built::Portfolio { model, data, psi } => {
            let w = model.weights(x);
            report.risk = risk(w, data).ok();
            report.assets = Some(count_assets(w, ASSET_TOL));
            report.psi = Some(*psi);
            report.card_violation = Some(card_violation(w, *psi, ASSET_TOL));
        }
        Built::Imrt(m) => {
            let y = m.intensities(x);
            report.phi = Some(m.phi);
            report.group_violation = Some(m.group_violation(y));
            if m.n_tau > 0 {
                report.clinical_violation = Some(m.clinical_violation(x));
            }
            report.criteria = m
                .criteria_report(y)
                .into_iter()
                .map(|c| CriterionRow {
                    kind: match c.kind {
                        levelcg_core::models::CriterionKind::Underdose => "underdose".into(),
                        levelcg_core::models::CriterionKind::Overdose => "overdose".into(),
                    },
                    structure: c.structure,
                    dose_gy: c.dose,
                    quantile: c.quantile,
                    violating_fraction: c.violating_fraction,
                    satisfied: c.satisfied,
                })
                .collect();
        }
    }
    report.solution = x.to_vec();
}

/// Maps a convex-model point onto the variables of its nonconvex partner.
fn warm_start(from: &Built, to: &Built, x: &[f64]) -> Vec<f64> {
    match (from, to) {
        (Built::Portfolio { model: a, .. }, Built::Portfolio { model: b, .. }) => {
            let mut out = a.weights(x).to_vec();
            if let (Some(vb), Some(va)) = (b.v_index, a.v_index) {
                out.resize(vb + 1, 0.0);
                out[vb] = x[va];
            }
            out
        }
        (Built::Imrt(a), Built::Imrt(_)) => a.intensities(x).to_vec(),
        _ => unreachable!("partner models share a family"),
    }
}

fn blank_report(cfg: &RunConfig) -> RunReport {
    let mut r = RunReport::failed(cfg.model.name(), cfg.algo.name(), cfg.seed, String::new());
    r.error = None;
    r
}

/// Runs one config without writing files. Config and data problems are
/// errors; solver failures become a `failed` report.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let data = load_data(cfg)?;
    let built = build_model(cfg.model, cfg, &data)?;
    let partner = match cfg.algo {
        Algo::LcgThenDncg => Some(build_model(cfg.model.convex_partner().expect("validated"), cfg, &data)?),
        _ => None,
    };
    let mut out = match solve(cfg, &built, partner.as_ref()) {
        Ok(o) => o,
        Err(e) => RunOutcome {
            report: RunReport::failed(cfg.model.name(), cfg.algo.name(), cfg.seed, e.to_string()),
            traces: Vec::new(),
        },
    };
    if cfg.wall_time {
        out.report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(out)
}

fn solve(cfg: &RunConfig, built: &Built, partner: Option<&Built>) -> levelcg_core::Result<RunOutcome> {
    let mut report = blank_report(cfg);
    let mut traces = Vec::new();
    let lift = |e: BenchError| match e {
        BenchError::Core(e) => e,
        _ => levelcg_core::Error::InvalidArgument("model does not fit the algorithm"),
    };
    match cfg.algo {
        Algo::Lcg | Algo::Mlcg => {
            let p = convex(built).map_err(lift)?;
            let lc = level_config(cfg);
            let s = if cfg.algo == Algo::Lcg { lcg_solve(p, &lc)? } else { mlcg_solve(p, &lc)? };
            report.status = level_status(s.termination);
            report.iterations = Iterations { outer: s.outer_iters, inner_total: s.inner_iters_total, dncg: 0 };
            fill_metrics(&mut report, built, &s.x);
            traces.push(level_trace("lcg", &s));
        }
        Algo::IppLcg => {
            let p = nonconvex(built, cfg.force).map_err(lift)?;
            let mut ic = IppConfig::new(cfg.epsilon, cfg.mu);
            ic.outer = cfg.max_outer;
            ic.delta_f = cfg.delta_f.unwrap_or(cfg.epsilon);
            ic.delta_h = cfg.delta_h.unwrap_or(cfg.epsilon);
            ic.level.max_inner = cfg.max_inner;
            ic.max_total_inner = cfg.budget;
            let o = ipp_lcg(&p, &ic)?;
            report.status = if o.stopped_early { RunStatus::BudgetExhausted } else { RunStatus::Completed };
            report.iterations = Iterations { outer: o.steps.len() as u64, inner_total: o.inner_iters_total, dncg: 0 };
            report.kkt = Some(KktRow {
                complementarity: o.kkt.complementarity,
                stationarity: o.kkt.stationarity,
                proximity: o.kkt.proximity,
                infeasibility: o.kkt.infeasibility,
            });
            fill_metrics(&mut report, built, &o.x);
            traces.push(ipp_trace(&o));
        }
        Algo::Dncg => {
            let p = nonconvex(built, cfg.force).map_err(lift)?;
            let o = dncg(&p, &dncg_config(cfg, None))?;
            report.status = RunStatus::Completed;
            report.iterations = Iterations { outer: 0, inner_total: 0, dncg: cfg.k };
            report.wolfe_gap = Some(o.wolfe_gap);
            fill_metrics(&mut report, built, &o.x_hat);
            traces.push(dncg_trace("dncg", &o));
        }
        Algo::LcgThenDncg => {
            let first = partner.expect("partner built for two-stage runs");
            let s = lcg_solve(convex(first).map_err(lift)?, &level_config(cfg))?;
            let x0 = warm_start(first, built, &s.x);
            let p = nonconvex(built, false).map_err(lift)?;
            let o = dncg(&p, &dncg_config(cfg, Some(x0)))?;
            report.status = RunStatus::Completed;
            report.iterations = Iterations { outer: s.outer_iters, inner_total: s.inner_iters_total, dncg: cfg.k };
            report.wolfe_gap = Some(o.wolfe_gap);
            fill_metrics(&mut report, built, &o.x_hat);
            traces.push(level_trace("lcg", &s));
            traces.push(dncg_trace("dncg", &o));
        }
    }
    report.schema = REPORT_SCHEMA;
    Ok(RunOutcome { report, traces })
}

/// Runs one config and writes the JSON report and traces it asks for.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let out = execute(cfg)?;
    if let Some(path) = &cfg.out {
        out.report.write_json(path)?;
    }
    if let Some(base) = &cfg.trace {
        if out.traces.len() == 1 {
            out.traces[0].write_csv(base)?;
        } else {
            for t in &out.traces {
                t.write_csv(crate::report::staged_path(base, t.stage))?;
            }
        }
    }
    Ok(out.report)
}

/// Runs every config in order. A member that cannot even start (bad config
/// or data) is kept as a failed row; the other rows are unaffected.
pub fn sweep(configs: &[RunConfig]) -> Result<SweepTable> {
    if configs.is_empty() {
        return Err(BenchError::Config("sweep needs at least one run".into()));
    }
    let reports = configs
        .iter()
        .map(|c| run(c).unwrap_or_else(|e| RunReport::failed(c.model.name(), c.algo.name(), c.seed, e.to_string())))
        .collect();
    Ok(SweepTable { reports })
}

/// Sweep file: explicit runs, plus `base` repeated once per `phi` value.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub base: Option<RunConfig>,
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub runs: Vec<RunConfig>,
}

impl SweepConfig {
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        let mut out = self.runs.clone();
        match (&self.base, self.phi.is_empty()) {
            (Some(b), true) => out.push(b.clone()),
            (Some(b), false) => out.extend(self.phi.iter().map(|&p| RunConfig { phi: Some(p), ..b.clone() })),
            (None, false) => return Err(BenchError::Config("phi values need a base config".into())),
            (None, true) => {}
        }
        Ok(out)
    }
}
