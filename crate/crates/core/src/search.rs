//! Minimum feasible periods per configuration, and sweeps over a grid.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytical::{
    min_feasible_period, min_feasible_period_bmac, AnalyticError, AnalyticOptions,
    BindingConstraint,
};
use crate::kernel::{explore, DeadlineRule, ExploreError, ExploreOptions, Limits, VerdictKind};
use crate::params::{max_rate_from_period, BmacParams, TaskParams};
use crate::wsan::{build_network, NetworkError, Protocol, TdmaGeometry, WsanConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytical,
    ModelChecking,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Analytical => "analytical",
            Method::ModelChecking => "model_checking",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSet {
    Analytical,
    ModelChecking,
    #[default]
    Both,
}

impl MethodSet {
    pub fn methods(self) -> &'static [Method] {
        match self {
            MethodSet::Analytical => &[Method::Analytical],
            MethodSet::ModelChecking => &[Method::ModelChecking],
            MethodSet::Both => &[Method::Analytical, Method::ModelChecking],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    LinearScan,
    /// Bisection followed by a check that the period just below the result fails.
    BinarySearch,
}

/// Everything about a configuration except C_S, N and T_S.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellContext {
    pub base: TaskParams,
    pub protocol: Protocol,
    pub bmac: Option<BmacParams>,
    /// `None` means equal slots for the default node count.
    pub geometry: Option<TdmaGeometry>,
    pub misc_offset: i64,
    pub deadline_rule: DeadlineRule,
    pub analytic: AnalyticOptions,
    pub limits: Limits,
}

impl CellContext {
    pub fn new(base: TaskParams, protocol: Protocol) -> Self {
        CellContext {
            base,
            protocol,
            bmac: None,
            geometry: None,
            misc_offset: 0,
            deadline_rule: DeadlineRule::default(),
            analytic: AnalyticOptions::default(),
            limits: Limits::default(),
        }
    }

    pub fn params(&self, cs: i64, n: i64, period: i64) -> TaskParams {
        TaskParams {
            sensor_wcet: cs,
            buffer_size: n,
            sensor_period: period,
            ..self.base.clone()
        }
    }

    pub fn network_config(&self, params: TaskParams) -> WsanConfig {
        let mut c = WsanConfig::new(params, self.protocol);
        if let Some(g) = self.geometry {
            c.geometry = g;
        }
        c.misc_offset = self.misc_offset;
        c.deadline_rule = self.deadline_rule;
        c
    }

    pub fn effective_geometry(&self) -> Option<TdmaGeometry> {
        (self.protocol == Protocol::Tdma)
            .then(|| self.network_config(self.base.clone()).geometry)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub cs_values: Vec<i64>,
    pub n_values: Vec<i64>,
    pub context: CellContext,
    pub methods: MethodSet,
    /// Inclusive period search range in ms.
    pub range: (i64, i64),
    pub strategy: Strategy,
    /// Global worker budget.
    pub workers: usize,
}

impl SweepSpec {
    /// C_S ∈ {2, 10, 20, 30}, N ∈ 1..=10 over the baseline parameters.
    pub fn evaluation_grid(methods: MethodSet) -> Self {
        SweepSpec {
            cs_values: vec![2, 10, 20, 30],
            n_values: (1..=10).collect(),
            context: CellContext::new(TaskParams::baseline(), Protocol::Tdma),
            methods,
            range: DEFAULT_RANGE,
            strategy: Strategy::LinearScan,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.range.0 < 1 {
            out.push("range lower bound must be ≥ 1".into());
        }
        if self.range.1 < self.range.0 {
            out.push("range upper bound is below the lower bound".into());
        }
        if self.cs_values.is_empty() {
            out.push("C_S list is empty".into());
        }
        if self.n_values.is_empty() {
            out.push("N list is empty".into());
        }
        if self.context.protocol == Protocol::Bmac
            && self.methods != MethodSet::ModelChecking
            && self.context.bmac.is_none()
        {
            out.push("analytical B-MAC bound needs B-MAC parameters".into());
        }
        out
    }
}

pub const DEFAULT_RANGE: (i64, i64) = (1, 200);

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("explorer limit at T_S = {period}: {source}")]
    Limit {
        period: i64,
        #[source]
        source: ExploreError,
    },
    #[error("schedulability is not monotone around T_S = {period}")]
    NonMonotone { period: i64 },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("analytical B-MAC bound needs B-MAC parameters")]
    MissingBmac,
}

/// Outcome of a period search for one cell and method.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSearch {
    pub min_period: Option<i64>,
    pub binding: Option<BindingConstraint>,
    /// States explored by the run that accepted `min_period`.
    pub states: Option<usize>,
    /// Every model-checked period with its verdict, in probe order.
    pub probes: Vec<(i64, VerdictKind)>,
}

/// Explores the network for one sampling period.
pub fn check_period(
    ctx: &CellContext,
    cs: i64,
    n: i64,
    period: i64,
    workers: usize,
) -> Result<(VerdictKind, usize), SearchError> {
    let net = build_network(&ctx.network_config(ctx.params(cs, n, period)))?;
    let opts = ExploreOptions {
        limits: ctx.limits,
        workers,
        ..ExploreOptions::default()
    };
    match explore(&net.model, &net.initial, &opts) {
        Ok(v) => Ok((v.kind, v.states_explored)),
        Err(source) => Err(SearchError::Limit { period, source }),
    }
}

pub fn find_min_period(
    ctx: &CellContext,
    cs: i64,
    n: i64,
    method: Method,
    strategy: Strategy,
    range: (i64, i64),
    workers: usize,
) -> Result<PeriodSearch, SearchError> {
    match method {
        Method::Analytical => {
            let p = ctx.params(cs, n, range.0);
            let bound = match ctx.protocol {
                Protocol::Tdma => min_feasible_period(&p, &ctx.analytic)?,
                Protocol::Bmac => {
                    let b = ctx.bmac.as_ref().ok_or(SearchError::MissingBmac)?;
                    min_feasible_period_bmac(&p, b, &ctx.analytic)?
                }
            };
            let inside = (range.0..=range.1).contains(&bound.min_period);
            Ok(PeriodSearch {
                min_period: inside.then_some(bound.min_period),
                binding: Some(bound.binding_constraint),
                states: None,
                probes: Vec::new(),
            })
        }
        Method::ModelChecking => {
            let mut probes = Vec::new();
            let probe = |probes: &mut Vec<(i64, VerdictKind)>, t: i64| -> Result<(bool, usize), SearchError> {
                let (kind, states) = check_period(ctx, cs, n, t, workers)?;
                probes.push((t, kind));
                Ok((kind == VerdictKind::Schedulable, states))
            };
            let found = match strategy {
                Strategy::LinearScan => {
                    let mut found = None;
                    for t in range.0..=range.1 {
                        let (ok, states) = probe(&mut probes, t)?;
                        if ok {
                            found = Some((t, states));
                            break;
                        }
                    }
                    found
                }
                Strategy::BinarySearch => {
                    let (ok, states) = probe(&mut probes, range.1)?;
                    if !ok {
                        None
                    } else {
                        let (mut lo, mut hi, mut best) = (range.0, range.1, states);
                        while lo < hi {
                            let mid = lo + (hi - lo) / 2;
                            let (ok, states) = probe(&mut probes, mid)?;
                            if ok {
                                hi = mid;
                                best = states;
                            } else {
                                lo = mid + 1;
                            }
                        }
                        if hi > range.0 {
                            let below = probes.iter().find(|(t, _)| *t == hi - 1).map(|p| p.1);
                            let below_ok = match below {
                                Some(k) => k == VerdictKind::Schedulable,
                                None => probe(&mut probes, hi - 1)?.0,
                            };
                            if below_ok {
                                return Err(SearchError::NonMonotone { period: hi });
                            }
                        }
                        Some((hi, best))
                    }
                }
            };
            Ok(PeriodSearch {
                min_period: found.map(|f| f.0),
                binding: None,
                states: found.map(|f| f.1),
                probes,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cs: i64,
    pub n: i64,
    pub method: Method,
    pub min_period_ms: Option<i64>,
    pub max_rate_hz: Option<i64>,
    pub binding: Option<BindingConstraint>,
    pub states: Option<usize>,
    /// `schedulable`, `no_feasible_period`, or an error kind.
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub tool_version: String,
    pub base_params: TaskParams,
    pub protocol: Protocol,
    pub geometry: Option<TdmaGeometry>,
    pub bmac: Option<BmacParams>,
    pub misc_offset: i64,
    pub deadline_rule: DeadlineRule,
    pub analytic: AnalyticOptions,
    pub limits: Limits,
    pub range: (i64, i64),
    pub strategy: Strategy,
    pub wall_time_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepTable {
    pub metadata: SweepMetadata,
    pub records: Vec<CellRecord>,
}

fn record(cs: i64, n: i64, method: Method, r: Result<PeriodSearch, SearchError>) -> CellRecord {
    match r {
        Ok(s) => CellRecord {
            cs,
            n,
            method,
            min_period_ms: s.min_period,
            max_rate_hz: s.min_period.and_then(|t| max_rate_from_period(t).ok()),
            binding: s.binding,
            states: s.states,
            verdict: match (method, s.min_period, s.binding) {
                (_, None, _) => "no_feasible_period".into(),
                (Method::Analytical, Some(_), Some(BindingConstraint::FifoQueueTest)) => {
                    "fifo_queue_test".into()
                }
                (Method::Analytical, Some(_), _) => "medium_access_test".into(),
                (Method::ModelChecking, Some(_), _) => "schedulable".into(),
            },
            error: None,
        },
        Err(e) => CellRecord {
            cs,
            n,
            method,
            min_period_ms: None,
            max_rate_hz: None,
            binding: None,
            states: e.states(),
            verdict: match &e {
                SearchError::Limit {
                    source: ExploreError::StateLimit { .. },
                    ..
                } => "state_limit",
                SearchError::Limit {
                    source: ExploreError::HorizonReached { .. },
                    ..
                } => "horizon_reached",
                SearchError::NonMonotone { .. } => "non_monotone",
                _ => "error",
            }
            .into(),
            error: Some(e.to_string()),
        },
    }
}

impl SearchError {
    fn states(&self) -> Option<usize> {
        match self {
            SearchError::Limit { source, .. } => source.states_explored(),
            _ => None,
        }
    }
}

/// Evaluates every (C_S, N, method) cell. Records come out in grid order
/// whatever the evaluation order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, Vec<String>> {
    let problems = spec.validate();
    if !problems.is_empty() {
        return Err(problems);
    }
    let started = Instant::now();
    let cells: Vec<(i64, i64, Method)> = spec
        .cs_values
        .iter()
        .flat_map(|&cs| {
            spec.n_values.iter().flat_map(move |&n| {
                spec.methods.methods().iter().map(move |&m| (cs, n, m))
            })
        })
        .collect();
    let workers = spec.workers.max(1);
    let inner = if cells.len() > 1 { 1 } else { workers };
    let eval = |&(cs, n, m): &(i64, i64, Method)| {
        record(
            cs,
            n,
            m,
            find_min_period(&spec.context, cs, n, m, spec.strategy, spec.range, inner),
        )
    };
    let records: Vec<CellRecord> = if workers > 1 && cells.len() > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(|| cells.par_iter().map(eval).collect()),
            Err(e) => return Err(vec![format!("thread pool: {e}")]),
        }
    } else {
        cells.iter().map(eval).collect()
    };
    let ctx = &spec.context;
    Ok(SweepTable {
        metadata: SweepMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            base_params: ctx.base.clone(),
            protocol: ctx.protocol,
            geometry: ctx.effective_geometry(),
            bmac: ctx.bmac.clone(),
            misc_offset: ctx.misc_offset,
            deadline_rule: ctx.deadline_rule,
            analytic: ctx.analytic,
            limits: ctx.limits,
            range: spec.range,
            strategy: spec.strategy,
            wall_time_ms: started.elapsed().as_millis() as u64,
        },
        records,
    })
}

impl SweepTable {
    pub fn get(&self, cs: i64, n: i64, method: Method) -> Option<&CellRecord> {
        self.records
            .iter()
            .find(|r| r.cs == cs && r.n == n && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let opt = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record(["cs", "n", "method", "min_period_ms", "max_rate_hz", "states", "verdict"])
            .expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.cs.to_string(),
                r.n.to_string(),
                r.method.as_str().to_string(),
                opt(r.min_period_ms),
                opt(r.max_rate_hz),
                r.states.map(|s| s.to_string()).unwrap_or_default(),
                r.verdict.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Two tables, periods then rates, with one row per N and one column per
    /// (method, C_S).
    pub fn to_markdown(&self) -> String {
        let mut cs: Vec<i64> = self.records.iter().map(|r| r.cs).collect();
        cs.sort_unstable();
        cs.dedup();
        let mut ns: Vec<i64> = self.records.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut methods: Vec<Method> = self.records.iter().map(|r| r.method).collect();
        methods.sort_unstable();
        methods.dedup();
        let by_cell: BTreeMap<(i64, i64, Method), &CellRecord> = self
            .records
            .iter()
            .map(|r| ((r.cs, r.n, r.method), r))
            .collect();

        let mut out = String::new();
        let sections: [(&str, fn(&CellRecord) -> Option<i64>); 2] = [
            ("Minimum feasible sampling periods (ms)", |r| r.min_period_ms),
            ("Maximum sampling rates (samples per second)", |r| r.max_rate_hz),
        ];
        for (title, field) in sections {
            out.push_str(&format!("### {title}\n\n| N |"));
            for m in &methods {
                let tag = match m {
                    Method::Analytical => "Analytical",
                    Method::ModelChecking => "Model Checking",
                };
                for c in &cs {
                    out.push_str(&format!(" {tag} C_S={c} |"));
                }
            }
            out.push_str("\n|---|");
            for _ in 0..methods.len() * cs.len() {
                out.push_str("---|");
            }
            out.push('\n');
            for n in &ns {
                out.push_str(&format!("| {n} |"));
                for m in &methods {
                    for c in &cs {
                        let cell = by_cell
                            .get(&(*c, *n, *m))
                            .map(|r| match field(r) {
                                Some(v) => v.to_string(),
                                None => r.verdict.clone(),
                            })
                            .unwrap_or_default();
                        out.push_str(&format!(" {cell} |"));
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceCell {
    pub cs: i64,
    pub n: i64,
    pub analytical: i64,
    pub model_checking: i64,
    /// analytical − model checking
    pub gap: i64,
    pub holds: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub cells: Vec<DominanceCell>,
    /// Cells where either method produced no period.
    pub skipped: Vec<(i64, i64)>,
}

impl DominanceReport {
    pub fn violations(&self) -> impl Iterator<Item = &DominanceCell> {
        self.cells.iter().filter(|c| !c.holds)
    }

    pub fn holds(&self) -> bool {
        self.violations().next().is_none()
    }
}

/// Compares the model-checking minimum against the analytical one per cell.
pub fn dominance_report(analytical: &SweepTable, model_checking: &SweepTable) -> DominanceReport {
    let mut report = DominanceReport::default();
    for a in analytical.records.iter().filter(|r| r.method == Method::Analytical) {
        let mc = model_checking
            .get(a.cs, a.n, Method::ModelChecking)
            .and_then(|r| r.min_period_ms);
        match (a.min_period_ms, mc) {
            (Some(ta), Some(tm)) => report.cells.push(DominanceCell {
                cs: a.cs,
                n: a.n,
                analytical: ta,
                model_checking: tm,
                gap: ta - tm,
                holds: tm <= ta,
            }),
            _ => report.skipped.push((a.cs, a.n)),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> CellContext {
        CellContext::new(TaskParams::baseline(), Protocol::Tdma)
    }

    #[test]
    fn analytical_cell() {
        let s = find_min_period(&ctx(), 30, 1, Method::Analytical, Strategy::LinearScan, DEFAULT_RANGE, 1)
            .unwrap();
        assert_eq!(s.min_period, Some(40));
    }

    #[test]
    fn empty_range_finds_nothing() {
        let s = find_min_period(&ctx(), 2, 3, Method::ModelChecking, Strategy::LinearScan, (1, 10), 1)
            .unwrap();
        assert_eq!(s.min_period, None);
        assert_eq!(s.probes.len(), 10);
    }

    #[test]
    fn single_cell_sweep() {
        let spec = SweepSpec {
            cs_values: vec![2],
            n_values: vec![3],
            ..SweepSpec::evaluation_grid(MethodSet::Analytical)
        };
        let t = run_sweep(&spec).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].min_period_ms, Some(12));
        assert!(t.to_csv().starts_with("cs,n,method,min_period_ms,max_rate_hz,states,verdict\n"));
    }

    #[test]
    fn dominance_gap() {
        let mk = |m, t| CellRecord {
            cs: 2,
            n: 1,
            method: m,
            min_period_ms: Some(t),
            max_rate_hz: Some(1000 / t),
            binding: None,
            states: None,
            verdict: String::new(),
            error: None,
        };
        let meta = run_sweep(&SweepSpec {
            cs_values: vec![2],
            n_values: vec![1],
            ..SweepSpec::evaluation_grid(MethodSet::Analytical)
        })
        .unwrap()
        .metadata;
        let a = SweepTable {
            metadata: meta.clone(),
            records: vec![mk(Method::Analytical, 20)],
        };
        let m = SweepTable {
            metadata: meta,
            records: vec![mk(Method::ModelChecking, 11)],
        };
        let r = dominance_report(&a, &m);
        assert_eq!(r.cells[0].gap, 9);
        assert!(r.holds());
    }
}
