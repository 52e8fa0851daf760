mod args;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::*;
use wsan_sched::analytical::{
    min_feasible_period, min_feasible_period_bmac, AnalyticOptions, FormulaVariant, LowerBound,
};
use wsan_sched::kernel::{
    explore, read_jsonl, replay, write_jsonl, DeadlineRule, ExploreError, ExploreOptions, Limits,
    TraceAction, TraceEvent, Verdict, VerdictKind,
};
use wsan_sched::params::{max_rate_from_period, BmacParams, ParamFile, TaskParams};
use wsan_sched::search::{run_sweep, CellContext, MethodSet, Strategy, SweepSpec};
use wsan_sched::wsan::{build_network, Protocol, TdmaGeometry, WsanConfig, WsanNetwork};

const EXIT_OK: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_LIMIT: u8 = 3;

/// Failure that ends the run with a given exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analytic(a) => analytic(a),
        Command::Check(a) => check(a.params, a.period, a.model, a.out, a.format, false),
        Command::Trace(a) => check(a.params, a.period, a.model, Some(a.out), a.format, true),
        Command::Sweep(a) => sweep(a),
        Command::Replay(a) => replay_cmd(a),
        Command::DumpNetwork(a) => dump(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

struct Resolved {
    params: TaskParams,
    bmac: Option<BmacParams>,
    protocol: Protocol,
}

fn overlay<T: PartialEq + std::fmt::Debug + Clone>(name: &str, file: Option<T>, flag: Option<T>) -> Option<T> {
    match (file, flag) {
        (Some(f), Some(g)) if f != g => {
            eprintln!("warning: --{name} {g:?} overrides the config value {f:?}");
            Some(g)
        }
        (f, g) => g.or(f),
    }
}

fn resolve(p: &ParamArgs, period: Option<i64>) -> Result<Resolved, Failure> {
    let file = match &p.config {
        Some(path) => ParamFile::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => ParamFile::default(),
    };
    let merged = ParamFile {
        sensor_period: overlay("period", file.sensor_period, period),
        sensor_wcet: overlay("cs", file.sensor_wcet, p.cs),
        sensor_bcet: overlay("bcet", file.sensor_bcet, p.bcet),
        misc_period: overlay("tm", file.misc_period, p.tm),
        misc_wcet: overlay("cm", file.misc_wcet, p.cm),
        buffer_size: overlay("n", file.buffer_size, p.n),
        tdma_superframe: overlay("ttdma", file.tdma_superframe, p.ttdma),
        packet_tx_times: overlay("tx", file.packet_tx_times.clone(), p.tx.clone()),
        bmac: None,
    };
    let params = merged.apply(&TaskParams::baseline());
    let problems = params.validate();
    if !problems.is_empty() {
        return Err(usage(problems.join("; ")));
    }
    let b = &p.bmac;
    let flags = [b.t_b1, b.t_f1, b.t_b2, b.t_f2, b.t_pkt, b.k];
    let bmac = if flags.iter().any(Option::is_some) {
        let base = file.bmac.clone().unwrap_or_default();
        Some(BmacParams {
            t_b1: overlay("t-b1", file.bmac.as_ref().map(|x| x.t_b1), b.t_b1).unwrap_or(base.t_b1),
            t_f1: overlay("t-f1", file.bmac.as_ref().map(|x| x.t_f1), b.t_f1).unwrap_or(base.t_f1),
            t_b2: overlay("t-b2", file.bmac.as_ref().map(|x| x.t_b2), b.t_b2).unwrap_or(base.t_b2),
            t_f2: overlay("t-f2", file.bmac.as_ref().map(|x| x.t_f2), b.t_f2).unwrap_or(base.t_f2),
            t_pkt: overlay("t-pkt", file.bmac.as_ref().map(|x| x.t_pkt), b.t_pkt).unwrap_or(base.t_pkt),
            k: overlay("k", file.bmac.as_ref().map(|x| x.k), b.k).unwrap_or(base.k),
        })
    } else {
        file.bmac
    };
    if let Some(b) = &bmac {
        let problems = b.validate();
        if !problems.is_empty() {
            return Err(usage(problems.join("; ")));
        }
    }
    Ok(Resolved {
        params,
        bmac,
        protocol: match p.protocol {
            ProtocolArg::Tdma => Protocol::Tdma,
            ProtocolArg::Bmac => Protocol::Bmac,
        },
    })
}

fn analytic_options(a: &AnalyticOpts) -> AnalyticOptions {
    AnalyticOptions {
        variant: match a.variant {
            VariantArg::Eq6 => FormulaVariant::Eq6Consistent,
            VariantArg::Eq7 => FormulaVariant::Eq7Literal,
        },
        strict: a.strict,
        lower_bound: match a.lower_bound {
            LowerBoundArg::Wcet => LowerBound::SensorWcet,
            LowerBoundArg::Bcet => LowerBound::SensorBcet,
        },
    }
}

fn analytic(a: AnalyticArgs) -> Outcome {
    let r = resolve(&a.params, None)?;
    let opts = analytic_options(&a.analytic);
    let bound = match r.protocol {
        Protocol::Tdma => min_feasible_period(&r.params, &opts),
        Protocol::Bmac => {
            let b = r.bmac.as_ref().ok_or_else(|| usage("--protocol bmac needs B-MAC parameters"))?;
            min_feasible_period_bmac(&r.params, b, &opts)
        }
    }
    .map_err(|e| usage(e.to_string()))?;
    let rate = max_rate_from_period(bound.min_period).map_err(|e| usage(e.to_string()))?;
    match a.format {
        FormatArg::Json => println!(
            "{}",
            json!({
                "min_period_ms": bound.min_period,
                "max_rate_hz": rate,
                "binding_constraint": bound.binding_constraint,
                "formula_variant": bound.formula_variant,
                "strict": opts.strict,
            })
        ),
        _ => println!(
            "{}\nmax rate {rate} Hz, binding {:?}",
            bound.min_period, bound.binding_constraint
        ),
    }
    Ok(EXIT_OK)
}

fn network(r: &Resolved, m: &ModelOpts) -> Result<WsanNetwork, Failure> {
    let mut c = WsanConfig::new(r.params.clone(), r.protocol);
    if let Some(nodes) = m.nodes {
        c.geometry = TdmaGeometry::even(r.params.tdma_superframe, nodes);
    }
    c.geometry.slot_offset = m.slot_offset;
    c.misc_offset = m.misc_offset;
    c.deadline_rule = deadline(m.deadline);
    build_network(&c).map_err(|e| usage(e.to_string()))
}

fn deadline(d: DeadlineArg) -> DeadlineRule {
    match d {
        DeadlineArg::Exclusive => DeadlineRule::Exclusive,
        DeadlineArg::Inclusive => DeadlineRule::Inclusive,
    }
}

fn limits(m: &ModelOpts) -> Limits {
    Limits {
        max_states: m.max_states,
        max_time_horizon: m.horizon,
    }
}

fn exit_for(kind: VerdictKind) -> u8 {
    if kind.is_violation() {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    }
}

fn write_trace(path: &Path, v: &Verdict) -> Result<(), Failure> {
    let f = File::create(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    write_jsonl(v.trace.as_deref().unwrap_or_default(), &mut w)
        .map_err(|e| usage(e.to_string()))?;
    w.flush().map_err(|e| usage(e.to_string()))
}

fn check(
    p: ParamArgs,
    period: Option<i64>,
    m: ModelOpts,
    out: Option<PathBuf>,
    format: FormatArg,
    always_write: bool,
) -> Outcome {
    let r = resolve(&p, period)?;
    let net = network(&r, &m)?;
    let opts = ExploreOptions {
        limits: limits(&m),
        workers: m.jobs.max(1),
        ..ExploreOptions::default()
    };
    let verdict = match explore(&net.model, &net.initial, &opts) {
        Ok(v) => v,
        Err(e @ (ExploreError::StateLimit { .. } | ExploreError::HorizonReached { .. })) => {
            if format == FormatArg::Json {
                println!(
                    "{}",
                    json!({"kind": "Inconclusive", "reason": e.to_string(), "states_explored": e.states_explored()})
                );
            } else {
                println!("Inconclusive: {e}");
            }
            return Ok(EXIT_LIMIT);
        }
        Err(e) => return Err(usage(e.to_string())),
    };
    let trace_path = if verdict.kind.is_violation() || always_write {
        let path = out.unwrap_or_else(|| PathBuf::from("trace.jsonl"));
        write_trace(&path, &verdict)?;
        Some(path)
    } else {
        None
    };
    if format == FormatArg::Json {
        let mut v = serde_json::to_value(verdict.summary()).expect("summary serializes");
        if let Some(path) = &trace_path {
            v["trace_path"] = json!(path.display().to_string());
        }
        println!("{v}");
    } else {
        println!(
            "{:?} (T_S = {} ms, {} states, peak frontier {}, {} ms)",
            verdict.kind,
            r.params.sensor_period,
            verdict.states_explored,
            verdict.peak_frontier,
            verdict.wall_time_ms
        );
        if let Some(detail) = &verdict.violation {
            println!("{detail}");
        }
        if let Some(path) = &trace_path {
            println!("trace written to {}", path.display());
        }
    }
    Ok(exit_for(verdict.kind))
}

fn replay_cmd(a: ReplayArgs) -> Outcome {
    let r = resolve(&a.params, a.period)?;
    let net = network(&r, &a.model)?;
    let f = File::open(&a.trace).map_err(|e| usage(format!("{}: {e}", a.trace.display())))?;
    let events = read_jsonl(BufReader::new(f)).map_err(|e| usage(e.to_string()))?;
    match replay(&net.model, &events) {
        Ok(true) => {
            match events.last() {
                Some(e @ TraceEvent {
                    action: TraceAction::Violation { kind },
                    ..
                }) => println!(
                    "reproduced: {kind:?} at t = {} by {} ({} events)",
                    e.time,
                    e.actor,
                    events.len()
                ),
                Some(_) => println!("reproduced ({} events)", events.len()),
                None => println!("empty trace"),
            }
            Ok(EXIT_OK)
        }
        Ok(false) => {
            println!("trace replays but ends without a violation");
            Ok(EXIT_VIOLATION)
        }
        Err(e) => {
            println!("not reproduced: {e}");
            Ok(EXIT_VIOLATION)
        }
    }
}

fn sweep(a: SweepArgs) -> Outcome {
    let r = resolve(&a.params, None)?;
    let mut context = CellContext::new(r.params.clone(), r.protocol);
    context.bmac = r.bmac.clone();
    if let Some(nodes) = a.model.nodes {
        context.geometry = Some(TdmaGeometry::even(r.params.tdma_superframe, nodes));
    }
    if a.model.slot_offset != 0 {
        let mut g = context
            .geometry
            .unwrap_or_else(|| WsanConfig::new(r.params.clone(), r.protocol).geometry);
        g.slot_offset = a.model.slot_offset;
        context.geometry = Some(g);
    }
    context.misc_offset = a.model.misc_offset;
    context.deadline_rule = deadline(a.model.deadline);
    context.analytic = analytic_options(&a.analytic);
    context.limits = limits(&a.model);
    let spec = SweepSpec {
        cs_values: a.params.cs.map_or(a.cs_list, |c| vec![c]),
        n_values: a.params.n.map_or(a.n_list, |n| vec![n]),
        context,
        methods: match a.method {
            MethodArg::Analytical => MethodSet::Analytical,
            MethodArg::Mc => MethodSet::ModelChecking,
            MethodArg::Both => MethodSet::Both,
        },
        range: (a.range[0], a.range[1]),
        strategy: match a.strategy {
            StrategyArg::Linear => Strategy::LinearScan,
            StrategyArg::Binary => Strategy::BinarySearch,
        },
        workers: a.model.jobs.max(1),
    };
    let table = run_sweep(&spec).map_err(|p| usage(p.join("; ")))?;
    let text = match a.format {
        FormatArg::Csv => table.to_csv(),
        FormatArg::Json => table.to_json() + "\n",
        FormatArg::Md | FormatArg::Text => table.to_markdown(),
    };
    match &a.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    let limited = table
        .records
        .iter()
        .any(|r| matches!(r.verdict.as_str(), "state_limit" | "horizon_reached"));
    Ok(if limited { EXIT_LIMIT } else { EXIT_OK })
}

fn dump(a: DumpArgs) -> Outcome {
    let r = resolve(&a.params, a.period)?;
    let net = network(&r, &a.model)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&net.describe()).expect("description serializes")
    );
    Ok(EXIT_OK)
}
