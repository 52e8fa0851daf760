//! One test per acceptance criterion. Each prints a `criterion k: PASS|FAIL`
//! line to stderr, bypassing output capture, then asserts.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use proptest::strategy::{Strategy as _, ValueTree};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsan_sched::analytical::*;
use wsan_sched::kernel::*;
use wsan_sched::params::{max_rate_from_period, BmacParams, TaskParams};
use wsan_sched::search::*;
use wsan_sched::wsan::Protocol;

const CS: [i64; 4] = [2, 10, 20, 30];

/// Expected analytical minimum periods, rows by C_S, columns N = 1..=10.
const EXPECTED_ANALYTICAL: [[i64; 10]; 4] = [
    [20, 12, 12, 12, 12, 12, 12, 12, 12, 12],
    [20; 10],
    [30; 10],
    [40; 10],
];
const EXPECTED_ANALYTICAL_RATES: [[i64; 10]; 4] = [
    [50, 83, 83, 83, 83, 83, 83, 83, 83, 83],
    [50; 10],
    [33; 10],
    [25; 10],
];
/// Expected model-checking minimum period per C_S, for every N.
const EXPECTED_MC: [(i64, i64); 4] = [(2, 11), (10, 11), (20, 22), (30, 33)];

const TOL_ANALYTICAL: i64 = 0;
const TOL_MC_SMALL: i64 = 1;
const TOL_MC_LARGE: i64 = 2;
const REFERENCE_STATES: usize = 2039;
const STATES_RANGE: (usize, usize) = (REFERENCE_STATES / 10, REFERENCE_STATES * 10);
const STATE_CHECK_SECONDS: f64 = 60.0;
const ANALYTICAL_SECONDS: f64 = 1.0;

const PROP1_TUPLES: usize = 10_000;
const CANONICAL_STATES: u32 = 1_000;
const ORACLE_CELLS: usize = 100;

fn report(k: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {k}: {verdict} {detail}");
}

fn analytical_table() -> (SweepTable, f64) {
    let started = Instant::now();
    let table = run_sweep(&SweepSpec::evaluation_grid(MethodSet::Analytical)).unwrap();
    (table, started.elapsed().as_secs_f64())
}

fn mc_table() -> &'static SweepTable {
    static TABLE: OnceLock<SweepTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        let spec = SweepSpec {
            workers,
            ..SweepSpec::evaluation_grid(MethodSet::ModelChecking)
        };
        run_sweep(&spec).unwrap()
    })
}

fn geometry_note(t: &SweepTable) -> String {
    match t.metadata.geometry {
        Some(g) => format!(
            "geometry {} nodes x {} ms slots, offset {}",
            g.number_of_nodes, g.slot_size, g.slot_offset
        ),
        None => "geometry missing from metadata".into(),
    }
}

/// Cells whose model-checking minimum falls outside `tol` of the expectation.
fn mc_mismatches(t: &SweepTable, cs_values: &[i64], tol: i64) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for &(cs, want) in EXPECTED_MC.iter().filter(|(c, _)| cs_values.contains(c)) {
        for n in 1..=10 {
            checked += 1;
            let got = t.get(cs, n, Method::ModelChecking).and_then(|r| r.min_period_ms);
            match got {
                Some(p) if (p - want).abs() <= tol => {}
                Some(p) => bad.push(format!("C_S={cs} N={n}: {p} ms (expected {want}±{tol})")),
                None => bad.push(format!("C_S={cs} N={n}: no period (expected {want}±{tol})")),
            }
        }
    }
    (checked, bad)
}

#[test]
fn criterion_1_analytical_periods() {
    let (table, secs) = analytical_table();
    let mut bad = Vec::new();
    for (i, cs) in CS.into_iter().enumerate() {
        for n in 1..=10 {
            let want = EXPECTED_ANALYTICAL[i][n as usize - 1];
            let got = table.get(cs, n, Method::Analytical).and_then(|r| r.min_period_ms);
            if got.map_or(true, |g| (g - want).abs() > TOL_ANALYTICAL) {
                bad.push(format!("C_S={cs} N={n}: {got:?} (expected {want})"));
            }
        }
    }
    let pass = bad.is_empty() && secs < ANALYTICAL_SECONDS;
    report(
        1,
        pass,
        &format!("{}/40 periods exact in {secs:.3} s {}", 40 - bad.len(), bad.join("; ")),
    );
    assert!(pass, "{bad:?}, {secs} s");
}

#[test]
fn criterion_2_analytical_rates() {
    let (table, _) = analytical_table();
    let mut bad = Vec::new();
    for (i, cs) in CS.into_iter().enumerate() {
        for n in 1..=10 {
            let want = EXPECTED_ANALYTICAL_RATES[i][n as usize - 1];
            let r = table.get(cs, n, Method::Analytical).unwrap();
            let derived = r.min_period_ms.map(|p| max_rate_from_period(p).unwrap());
            if r.max_rate_hz != Some(want) || derived != Some(want) {
                bad.push(format!("C_S={cs} N={n}: {:?} (expected {want})", r.max_rate_hz));
            }
        }
    }
    report(2, bad.is_empty(), &format!("{}/40 rates exact {}", 40 - bad.len(), bad.join("; ")));
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn criterion_3_mc_small_sensor_jobs() {
    let t = mc_table();
    let (checked, bad) = mc_mismatches(t, &[2, 10], TOL_MC_SMALL);
    let pass = bad.is_empty() && t.metadata.geometry.is_some();
    report(
        3,
        pass,
        &format!(
            "{}/{checked} cells within ±{TOL_MC_SMALL} ms, {}; {}",
            checked - bad.len(),
            geometry_note(t),
            bad.join("; ")
        ),
    );
    assert!(pass, "{bad:?}");
}

#[test]
fn criterion_4_mc_large_sensor_jobs() {
    let t = mc_table();
    let (checked, bad) = mc_mismatches(t, &[20, 30], TOL_MC_LARGE);
    let params = serde_json::to_string(&t.metadata.base_params).unwrap();
    report(
        4,
        bad.is_empty(),
        &format!(
            "{}/{checked} cells within ±{TOL_MC_LARGE} ms, {}; {}; parameters {params}",
            checked - bad.len(),
            geometry_note(t),
            bad.join("; ")
        ),
    );
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn criterion_5_state_space_scale() {
    let ctx = CellContext::new(TaskParams::baseline(), Protocol::Tdma);
    let started = Instant::now();
    let (kind, states) = check_period(&ctx, 2, 3, 11, 1).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let pass = kind == VerdictKind::Schedulable
        && (STATES_RANGE.0..=STATES_RANGE.1).contains(&states)
        && secs < STATE_CHECK_SECONDS;
    report(
        5,
        pass,
        &format!(
            "baseline {kind:?} with {states} states (accepted {}..={}) in {secs:.3} s",
            STATES_RANGE.0, STATES_RANGE.1
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_dominance() {
    let (analytical, _) = analytical_table();
    let t = mc_table();
    let report6 = dominance_report(&analytical, t);
    let exceptions: Vec<String> = report6
        .violations()
        .map(|c| format!("C_S={} N={}: MC {} > analytical {}", c.cs, c.n, c.model_checking, c.analytical))
        .collect();
    let pass = report6.holds();
    report(
        6,
        pass,
        &format!(
            "{} cells compared, {} skipped, {} exceptions {}",
            report6.cells.len(),
            report6.skipped.len(),
            exceptions.len(),
            exceptions.join("; ")
        ),
    );

    // Informational: the bound that credits the sensor's best case instead.
    let bcet = CellContext {
        analytic: AnalyticOptions {
            lower_bound: LowerBound::SensorBcet,
            ..AnalyticOptions::default()
        },
        ..CellContext::new(TaskParams::baseline(), Protocol::Tdma)
    };
    let spec = SweepSpec {
        context: bcet,
        ..SweepSpec::evaluation_grid(MethodSet::Analytical)
    };
    let alt = dominance_report(&run_sweep(&spec).unwrap(), t);
    let _ = writeln!(
        std::io::stderr(),
        "criterion 6 note: with B = sensor_bcet the analytical bound has {} exceptions",
        alt.violations().count()
    );
    assert!(pass, "{exceptions:?}");
}

fn random_params(rng: &mut ChaCha8Rng) -> TaskParams {
    let cs = rng.gen_range(1..40);
    let cm = rng.gen_range(1..20);
    TaskParams {
        sensor_period: 1,
        sensor_wcet: cs,
        sensor_bcet: rng.gen_range(1..=cs),
        misc_period: cs + cm + rng.gen_range(0..200),
        misc_wcet: cm,
        buffer_size: rng.gen_range(1..12),
        tdma_superframe: rng.gen_range(1..60),
        packet_tx_times: vec![5, 6, 7],
    }
}

fn scan_min_period(p: &TaskParams) -> Option<i64> {
    let w = p.sensor_wcet + p.misc_wcet;
    (1..=500).find(|&t| {
        w <= p.misc_period && w <= t && p.tdma_superframe <= p.buffer_size * t + p.sensor_wcet - w
    })
}

/// Packet j is delivered before packet j + 1 is ready.
fn prop1_failures(rng: &mut ChaCha8Rng) -> usize {
    let o = AnalyticOptions::default();
    (0..PROP1_TUPLES)
        .filter(|_| {
            let base = random_params(rng);
            let t = min_feasible_period(&base, &o).unwrap().min_period + rng.gen_range(0..100);
            let p = base.with_period(t);
            let j = rng.gen_range(1..50);
            let latest = packet_ready_time(&p, j, p.w()).unwrap();
            let next = packet_ready_time(&p, j + 1, p.sensor_wcet).unwrap();
            !(fifo_schedulable(&p) && medium_access_ok(&p, &o) && latest + p.tdma_superframe <= next)
        })
        .count()
}

fn canonical_failures() -> u32 {
    let mut runner = TestRunner::new(Config {
        cases: CANONICAL_STATES,
        ..Config::default()
    });
    let strategy = (common::arb_state(), -30i64..30);
    let mut failures = 0;
    for _ in 0..CANONICAL_STATES {
        let (s, delta) = strategy.new_tree(&mut runner).unwrap().current();
        let mut moved = s.clone();
        moved.shift(delta);
        let (a, b) = (s.canonicalize(), moved.canonicalize());
        if a.encode() != b.encode() || a.min_time() != 0 {
            failures += 1;
        }
    }
    failures
}

fn oracle_failures(rng: &mut ChaCha8Rng) -> usize {
    let o = AnalyticOptions::default();
    (0..ORACLE_CELLS)
        .filter(|_| {
            let p = random_params(rng);
            Some(min_feasible_period(&p, &o).unwrap().min_period) != scan_min_period(&p)
        })
        .count()
}

const ORDER_CONFIGS: [(i64, i64, i64); 20] = [
    (2, 3, 10),
    (2, 3, 11),
    (2, 1, 17),
    (2, 1, 18),
    (2, 2, 11),
    (10, 2, 11),
    (10, 2, 12),
    (10, 1, 25),
    (10, 1, 26),
    (10, 3, 11),
    (20, 2, 21),
    (20, 2, 22),
    (20, 3, 22),
    (20, 1, 35),
    (20, 1, 36),
    (30, 2, 32),
    (30, 2, 33),
    (30, 3, 33),
    (30, 1, 45),
    (30, 1, 46),
];

/// Returns (configs whose verdict differs across orders, traces that fail to replay, traces checked).
fn order_and_replay_failures() -> (Vec<String>, Vec<String>, usize) {
    let runs = [
        (SearchOrder::Bfs, 1),
        (SearchOrder::Bfs, 4),
        (SearchOrder::Dfs, 1),
        (SearchOrder::Shuffled(1), 1),
        (SearchOrder::Shuffled(2), 1),
    ];
    let mut differ = Vec::new();
    let mut unreplayed = Vec::new();
    let mut traces = 0;
    for (cs, n, t) in ORDER_CONFIGS {
        let net = common::network(cs, n, t, Protocol::Tdma);
        let mut kinds = Vec::new();
        for (order, workers) in runs {
            let opts = ExploreOptions {
                order,
                workers,
                ..ExploreOptions::default()
            };
            let v = explore(&net.model, &net.initial, &opts).unwrap();
            if let Some(trace) = &v.trace {
                traces += 1;
                if !matches!(replay(&net.model, trace), Ok(true)) {
                    unreplayed.push(format!("({cs},{n},{t}) {order:?}"));
                }
            }
            kinds.push(v.kind);
        }
        if kinds.iter().any(|k| *k != kinds[0]) {
            differ.push(format!("({cs},{n},{t}): {kinds:?}"));
        }
    }
    (differ, unreplayed, traces)
}

#[test]
fn criterion_7_property_suites() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let prop1 = prop1_failures(&mut rng);
    let canonical = canonical_failures();
    let oracle = oracle_failures(&mut rng);
    let (differ, unreplayed, traces) = order_and_replay_failures();
    let pass = prop1 == 0 && canonical == 0 && oracle == 0 && differ.is_empty() && unreplayed.is_empty();
    report(
        7,
        pass,
        &format!(
            "packet chain {prop1}/{PROP1_TUPLES} failures, shift invariance {canonical}/{CANONICAL_STATES}, \
             scan oracle {oracle}/{ORACLE_CELLS}, order dependence {}/{}, replay {}/{traces} {}",
            differ.len(),
            ORDER_CONFIGS.len(),
            unreplayed.len(),
            differ.iter().chain(&unreplayed).cloned().collect::<Vec<_>>().join("; ")
        ),
    );
    assert!(pass);
}

/// B-MAC delay used for the dominance grid: 6 + 5 + 4·(3 + 3) + 7 = 42 ms.
fn bmac_params() -> BmacParams {
    BmacParams {
        t_b1: 6,
        t_f1: 5,
        t_b2: 3,
        t_f2: 3,
        t_pkt: 7,
        k: 4,
    }
}

#[test]
fn criterion_8_bmac() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sum_failures = (0..PROP1_TUPLES)
        .filter(|_| {
            let b = BmacParams {
                t_b1: rng.gen_range(0..20),
                t_f1: rng.gen_range(0..20),
                t_b2: rng.gen_range(0..20),
                t_f2: rng.gen_range(0..20),
                t_pkt: rng.gen_range(0..20),
                k: rng.gen_range(0..10),
            };
            let mut terms = vec![b.t_b1, b.t_f1];
            for _ in 0..b.k {
                terms.extend([b.t_b2, b.t_f2]);
            }
            terms.push(b.t_pkt);
            bmac_delay(&b) != terms.iter().sum::<i64>()
        })
        .count();

    let mut context = CellContext::new(TaskParams::baseline(), Protocol::Bmac);
    context.bmac = Some(bmac_params());
    let spec = SweepSpec {
        cs_values: vec![2, 10, 20],
        n_values: vec![1, 2, 3],
        context,
        methods: MethodSet::Both,
        range: DEFAULT_RANGE,
        strategy: Strategy::LinearScan,
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let table = run_sweep(&spec).unwrap();
    let dom = dominance_report(&table, &table);
    let exceptions: Vec<String> = dom
        .violations()
        .map(|c| format!("C_S={} N={}: MC {} > analytical {}", c.cs, c.n, c.model_checking, c.analytical))
        .collect();
    let pass = sum_failures == 0 && dom.holds() && dom.cells.len() == 9;
    report(
        8,
        pass,
        &format!(
            "delay sum {sum_failures}/{PROP1_TUPLES} failures, t_sd = {} ms, {}/9 cells compared, {} exceptions {}",
            bmac_delay(&bmac_params()),
            dom.cells.len(),
            exceptions.len(),
            exceptions.join("; ")
        ),
    );
    assert!(pass);
}
