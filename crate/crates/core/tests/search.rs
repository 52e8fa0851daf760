use wsan_sched::kernel::VerdictKind;
use wsan_sched::params::{max_rate_from_period, BmacParams, TaskParams};
use wsan_sched::search::*;
use wsan_sched::wsan::Protocol;

fn ctx() -> CellContext {
    CellContext::new(TaskParams::baseline(), Protocol::Tdma)
}

fn small_sweep(workers: usize) -> SweepSpec {
    SweepSpec {
        cs_values: vec![2, 20],
        n_values: vec![2, 3],
        workers,
        ..SweepSpec::evaluation_grid(MethodSet::Both)
    }
}

#[test]
fn linear_and_binary_search_agree() {
    for (cs, n) in [(2, 3), (10, 2), (20, 4), (2, 1)] {
        let lin = find_min_period(&ctx(), cs, n, Method::ModelChecking, Strategy::LinearScan, (1, 60), 1)
            .unwrap();
        let bin = find_min_period(&ctx(), cs, n, Method::ModelChecking, Strategy::BinarySearch, (1, 60), 1)
            .unwrap();
        assert_eq!(lin.min_period, bin.min_period, "C_S={cs} N={n}");
        assert!(bin.probes.len() < lin.probes.len());
        let t = lin.min_period.unwrap();
        assert!(lin.probes.iter().all(|&(p, k)| (p == t) == (k == VerdictKind::Schedulable)));
    }
}

#[test]
fn minimum_is_tight() {
    let t = 11;
    assert_eq!(check_period(&ctx(), 2, 3, t, 1).unwrap().0, VerdictKind::Schedulable);
    assert!(check_period(&ctx(), 2, 3, t - 1, 1).unwrap().0.is_violation());
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let a = run_sweep(&small_sweep(1)).unwrap();
    let b = run_sweep(&small_sweep(3)).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn rates_follow_periods() {
    let t = run_sweep(&small_sweep(1)).unwrap();
    assert_eq!(t.records.len(), 2 * 2 * 2);
    for r in &t.records {
        let p = r.min_period_ms.unwrap();
        assert_eq!(r.max_rate_hz, Some(max_rate_from_period(p).unwrap()));
        let expected = match r.method {
            Method::ModelChecking => "schedulable",
            Method::Analytical => "fifo_queue_test",
        };
        assert_eq!(r.verdict, expected);
    }
    assert_eq!(t.get(2, 3, Method::ModelChecking).unwrap().min_period_ms, Some(11));
    assert_eq!(t.get(2, 3, Method::Analytical).unwrap().min_period_ms, Some(12));
    assert_eq!(t.get(20, 2, Method::ModelChecking).unwrap().min_period_ms, Some(22));
}

#[test]
fn table_exports() {
    let t = run_sweep(&small_sweep(1)).unwrap();
    let csv = t.to_csv();
    assert_eq!(csv.lines().next().unwrap(), "cs,n,method,min_period_ms,max_rate_hz,states,verdict");
    assert_eq!(csv.lines().count(), 1 + t.records.len());
    assert!(csv.contains("2,3,model_checking,11,90,"));
    let back = SweepTable::from_json(&t.to_json()).unwrap();
    assert_eq!(back, t);
    let md = t.to_markdown();
    assert!(md.contains("| 3 | 12 | 30 | 11 | 22 |"), "{md}");
}

#[test]
fn dominance_on_small_grid() {
    let t = run_sweep(&small_sweep(1)).unwrap();
    let report = dominance_report(&t, &t);
    assert_eq!(report.cells.len(), 4);
    assert!(report.holds());
    assert!(report.cells.iter().all(|c| c.gap == c.analytical - c.model_checking));
}

#[test]
fn bad_specs_are_rejected() {
    let spec = SweepSpec {
        cs_values: vec![],
        range: (10, 5),
        ..SweepSpec::evaluation_grid(MethodSet::ModelChecking)
    };
    assert!(spec.validate().len() >= 2);
    assert!(run_sweep(&spec).is_err());
}

#[test]
fn bmac_analytical_needs_parameters() {
    let mut c = CellContext::new(TaskParams::baseline(), Protocol::Bmac);
    let r = find_min_period(&c, 2, 1, Method::Analytical, Strategy::LinearScan, DEFAULT_RANGE, 1);
    assert!(matches!(r, Err(SearchError::MissingBmac)));
    c.bmac = Some(BmacParams {
        t_b1: 6,
        t_f1: 5,
        t_b2: 3,
        t_f2: 3,
        t_pkt: 7,
        k: 4,
    });
    let r = find_min_period(&c, 2, 1, Method::Analytical, Strategy::LinearScan, DEFAULT_RANGE, 1).unwrap();
    assert_eq!(r.min_period, Some(52));
}

#[test]
fn limit_is_an_error_not_a_verdict() {
    let mut c = ctx();
    c.limits.max_states = 10;
    let r = find_min_period(&c, 2, 3, Method::ModelChecking, Strategy::LinearScan, (11, 11), 1);
    assert!(matches!(r, Err(SearchError::Limit { period: 11, .. })));
}
