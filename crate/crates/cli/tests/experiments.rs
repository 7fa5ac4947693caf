use chemo4d_cli::experiments::{crosscheck_report, inequality_suite_rows, mass_sweep, mass_sweep_table};
use chemo4d_cli::ScenarioConfig;

#[test]
fn crosscheck_difference_shrinks_with_resolution() {
    let mut fine = ScenarioConfig::default();
    fine.initial.mass = Some(10.0);
    let mut coarse = fine.clone();
    coarse.grid.n = 256;
    coarse.crosscheck.mesh = 32;
    coarse.crosscheck.max_substep *= 2.0;
    coarse.crosscheck.imex_dt *= 2.0;
    let a = crosscheck_report(&coarse, 0.05).unwrap();
    let b = crosscheck_report(&fine, 0.05).unwrap();
    let ratio = a.diff_u / b.diff_u;
    assert!((1.5..=5.0).contains(&ratio), "coarse {:e} fine {:e} ratio {ratio}", a.diff_u, b.diff_u);
    assert!(b.ratios.iter().all(|&r| r < 0.5));
}

#[test]
fn suite_rows_do_not_depend_on_thread_count() {
    let mut cfg = ScenarioConfig::default();
    cfg.suite.n = 1024;
    cfg.seed = 99;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| inequality_suite_rows(&cfg, 6).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn sweep_summary_carries_family_and_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::default();
    cfg.grid.n = 256;
    cfg.stepper.t_end = 2.0;
    cfg.stepper.snapshot_every = 5;
    cfg.output_dir = tmp.path().to_path_buf();
    let th = cfg.params.thresholds();
    let report = mass_sweep(&cfg, &[0.25 * th.m_bounded, 0.5 * th.m_bounded]).unwrap();
    assert!(report.passed);
    let s = &report.summary;
    assert_eq!(s["verdicts"], serde_json::json!(["bounded", "bounded"]));
    assert_eq!(s["family"]["width"], 1.0);
    assert_eq!(s["regime_exceptions"], serde_json::json!([]));
    let rows = mass_sweep_table(&cfg, &[0.5 * th.m_bounded, 1.5 * th.m_global]).unwrap();
    assert_eq!(rows[0].marker, "below_m_bounded");
    assert_eq!(rows[1].marker, "above_m_global");
}
