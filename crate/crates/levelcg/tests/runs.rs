use levelcg::config::{Algo, DataSource, ModelKind, Psi, RunConfig};
use levelcg::data::ReturnsSpec;
use levelcg::report::{RunReport, RunStatus};
use levelcg::{execute, run, sweep, BenchError, SweepConfig};

fn returns(model: ModelKind, algo: Algo) -> RunConfig {
    RunConfig {
        model,
        algo,
        data: DataSource::SyntheticReturns { spec: ReturnsSpec::default() },
        seed: 7,
        budget: Some(100),
        k: 100,
        ..RunConfig::default()
    }
}

fn imrt(model: ModelKind, algo: Algo, phi: f64) -> RunConfig {
    RunConfig {
        model,
        algo,
        data: DataSource::SyntheticImrt { spec: Default::default() },
        budget: Some(300),
        k: 300,
        phi: Some(phi),
        ..RunConfig::default()
    }
}

#[test]
fn card_free_convex_report_ranges() {
    let r = execute(&returns(ModelKind::CardFreeConvex, Algo::Lcg)).unwrap().report;
    assert_ne!(r.status, RunStatus::Failed);
    let risk = r.risk.unwrap();
    assert!((0.0..=1.0).contains(&risk));
    assert!(r.assets.unwrap() <= 50);
    assert!(r.iterations.inner_total <= 100);
    assert_eq!(r.solution.len(), r.dim);
}

#[test]
fn cardinality_never_adds_assets() {
    for seed in [1, 2, 3] {
        let free = execute(&RunConfig { seed, ..returns(ModelKind::CardFreeConvex, Algo::Lcg) }).unwrap().report;
        let card = execute(&RunConfig { seed, ..returns(ModelKind::CardConvex, Algo::Lcg) }).unwrap().report;
        assert!(card.assets.unwrap() <= free.assets.unwrap(), "seed {seed}");
        assert_eq!(card.psi, Some(10));
    }
}

#[test]
fn dncg_on_card_nonconvex_2_has_no_card_violation() {
    let r = execute(&returns(ModelKind::CardNonconvex2, Algo::Dncg)).unwrap().report;
    assert_eq!(r.card_violation, Some(0));
    assert_eq!(r.iterations.dncg, 100);
    assert!(r.wolfe_gap.is_some());
}

#[test]
fn explicit_psi_is_used() {
    let r = execute(&RunConfig { psi: Psi::Value(3), ..returns(ModelKind::CardConvex, Algo::Lcg) }).unwrap().report;
    assert_eq!(r.psi, Some(3));
}

#[test]
fn convex_models_reject_nonconvex_algorithms_unless_forced() {
    let c = returns(ModelKind::CardFreeConvex, Algo::Dncg);
    assert!(matches!(execute(&c), Err(BenchError::Config(_))));
    let forced = execute(&RunConfig { force: true, ..c }).unwrap();
    assert_ne!(forced.report.status, RunStatus::Failed);
    assert!(matches!(execute(&returns(ModelKind::CardNonconvex1, Algo::Lcg)), Err(BenchError::Config(_))));
}

#[test]
fn solver_errors_become_failed_reports() {
    // the zero plan violates the underdose rows, so MLCG has no feasible start
    let r = execute(&imrt(ModelKind::ImrtConvex, Algo::Mlcg, 0.5)).unwrap().report;
    assert_eq!(r.status, RunStatus::Failed);
    assert!(r.error.as_deref().unwrap().contains("feasible"), "{:?}", r.error);
}

#[test]
fn phi_sweep_emits_rows_in_order_and_keeps_failures() {
    let mut configs: Vec<RunConfig> = [1.0, 0.5, 0.005].iter().map(|&p| imrt(ModelKind::ImrtConvex, Algo::Lcg, p)).collect();
    let t = sweep(&configs).unwrap();
    assert_eq!(t.reports.len(), 3);
    let phis: Vec<_> = t.reports.iter().map(|r| r.phi.unwrap()).collect();
    assert_eq!(phis, vec![1.0, 0.5, 0.005]);
    assert!(t.to_markdown().lines().count() == 5);

    configs.insert(1, imrt(ModelKind::ImrtConvex, Algo::Mlcg, 0.5));
    let t = sweep(&configs).unwrap();
    let status: Vec<_> = t.reports.iter().map(|r| r.status).collect();
    assert_eq!(status[1], RunStatus::Failed);
    assert!(status.iter().enumerate().all(|(i, s)| i == 1 || *s != RunStatus::Failed));
}

#[test]
fn empty_sweep_is_an_error() {
    assert!(sweep(&[]).is_err());
}

#[test]
fn sweep_config_expands_phi_values() {
    let sc: SweepConfig = serde_json::from_str(
        r#"{"base": {"model": "imrt-convex", "data": {"kind": "synthetic-imrt"}, "budget": 50}, "phi": [1.0, 0.5, 0.005]}"#,
    )
    .unwrap();
    let runs = sc.expand().unwrap();
    assert_eq!(runs.iter().map(|r| r.phi.unwrap()).collect::<Vec<_>>(), vec![1.0, 0.5, 0.005]);
    assert!(runs.iter().all(|r| r.model == ModelKind::ImrtConvex && r.budget == Some(50)));
}

#[test]
fn reports_and_traces_are_written_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let trace = dir.path().join("t.csv");
    let c = RunConfig { out: Some(out.clone()), trace: Some(trace), ..imrt(ModelKind::ImrtNonconvex, Algo::LcgThenDncg, 0.5) };
    let first = run(&c).unwrap();
    let bytes = std::fs::read(&out).unwrap();
    let parsed: RunReport = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(parsed, first);
    assert!(!first.criteria.is_empty());
    for stage in ["lcg", "dncg"] {
        let text = std::fs::read_to_string(dir.path().join(format!("t-{stage}.csv"))).unwrap();
        assert!(text.lines().count() > 1, "{stage}");
    }
    run(&c).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), bytes);
}

#[test]
fn wall_time_is_opt_in() {
    let c = returns(ModelKind::CardFreeConvex, Algo::Lcg);
    assert!(execute(&c).unwrap().report.wall_time_s.is_none());
    assert!(execute(&RunConfig { wall_time: true, ..c }).unwrap().report.wall_time_s.is_some());
}
