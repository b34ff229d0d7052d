//! Subcommand drivers.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use gbdp::bounds::{compute_bounds, BernsteinForm, BoundKind, BoundSettings, ThetaD};
use gbdp::cuts::CutStack;
use gbdp::model::DPInstance;
use gbdp::oracle::{solve_exact, solve_exact_with_budget, ExactValueTable};
use gbdp::trainer::{GateDomain, InitMode, ResampleMode, TrainConfig, Trainer};
use gbdp::validator::{validate, ValidationSummary};

use crate::output::{self, money, write_text, SummaryRecord};
use crate::{
    resolve_out, BernsteinArg, BoundsArgs, CliError, CliResult, Command, CompareArgs, ExactArgs, GateArg, InitArg,
    ResampleArg, TrainArgs, ValidateArgs,
};

/// Levels of the `fig_bounds.csv` grid.
const FIG_ALPHA_LO: f64 = 1e-3;
const FIG_ALPHA_HI: f64 = 0.5;
const FIG_ALPHA_POINTS: usize = 25;
const FIG_BOUNDS: [BoundKind; 3] = [BoundKind::Bernstein, BoundKind::DkwExpectation, BoundKind::Hoeffding];

/// Gap tolerance for the upper-bound check in `compare`.
const GAP_TOL: f64 = 1e-9;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Train(a) => train(&a),
        Command::Validate(a) => validate_cmd(&a),
        Command::Bounds(a) => bounds(&a),
        Command::Exact(a) => exact(&a),
        Command::Compare(a) => compare(&a),
    }
}

fn load_instance(path: &Path) -> CliResult<DPInstance> {
    if !path.is_file() {
        return Err(CliError::argument("config", format!("{} is not a file", path.display())));
    }
    Ok(DPInstance::load(path)?)
}

fn load_cuts(path: &Path) -> CliResult<CutStack> {
    if !path.is_file() {
        return Err(CliError::argument("cuts", format!("{} is not a file", path.display())));
    }
    Ok(CutStack::load(path)?)
}

fn open_level(field: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::argument(field, format!("{v} is not in (0, 1)")))
    }
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    if args.iters == 0 {
        return Err(CliError::argument("iters", "must be at least 1"));
    }
    let inst = load_instance(&args.config)?;
    let cfg = TrainConfig {
        iterations: args.iters,
        seed: args.seed,
        resample: match args.resample_mode {
            ResampleArg::Off => ResampleMode::Off,
            ResampleArg::Oracle => ResampleMode::Oracle,
        },
        search: args.search.into(),
        init: match args.init {
            InitArg::FixedPoint => InitMode::FixedPoint,
            InitArg::BigM => InitMode::BigM,
        },
        gate: match args.gate {
            GateArg::Box => GateDomain::Box,
            GateArg::Global => GateDomain::Global,
        },
    };
    let mut trainer = Trainer::new(&inst, cfg)?;
    while !trainer.is_done() {
        let r = trainer.step()?;
        if !args.quiet {
            eprintln!(
                "iter {:>4}  u {:.6}  l {:.6}  cuts {}  fallbacks {}  {:.1}s",
                r.i,
                r.u,
                r.l,
                r.cut_counts.iter().sum::<usize>(),
                r.fallbacks,
                r.elapsed_secs
            );
        }
    }
    let (cuts, trace) = trainer.finish();
    let dir = &args.out_dir;
    write_text(&dir.join("trace.csv"), &output::trace_csv(&trace))?;
    write_text(&dir.join("fig_converge.csv"), &output::converge_csv(&trace))?;
    let store = dir.join("cuts.store");
    cuts.save(&store)?;
    let last = trace.records.last().expect("at least one iteration");
    println!("iterations {}", trace.records.len());
    println!("u {}", money(last.u));
    println!("mean_l {}", money(*trace.cumulative_mean().last().expect("nonempty")));
    println!("cuts {}", store.display());
    Ok(())
}

/// Validation profits of a stored policy, as written by `validate`.
pub fn validation_summary(
    inst: &DPInstance,
    cuts: &CutStack,
    samples: usize,
    seed: u64,
    search: crate::SearchArg,
) -> CliResult<ValidationSummary> {
    if samples < 2 {
        return Err(CliError::argument("samples", "must be at least 2"));
    }
    Ok(validate(inst, cuts, samples, seed, search.into())?)
}

pub fn validate_cmd(args: &ValidateArgs) -> CliResult<()> {
    if args.bins == 0 {
        return Err(CliError::argument("bins", "must be at least 1"));
    }
    let inst = load_instance(&args.config)?;
    let cuts = load_cuts(&args.cuts)?;
    let summary = validation_summary(&inst, &cuts, args.samples, args.seed, args.search)?;
    let out = resolve_out(args.out.as_deref(), "validation.csv", Some(&args.cuts));
    write_text(&out, &output::validation_csv(&summary))?;
    output::write_summary(&output::summary_path(&out), &SummaryRecord::new(&summary, args.seed))?;
    write_text(
        &out.with_file_name("fig_hist.csv"),
        &output::hist_csv(&summary.samples, args.bins),
    )?;
    println!("samples {}", summary.k());
    println!("mean {}", money(summary.mean));
    println!("std {}", money(summary.std));
    println!("support [{}, {}]", money(summary.support_lo), money(summary.support_hi));
    Ok(())
}

fn parse_kinds(list: &str) -> CliResult<Vec<BoundKind>> {
    if list.trim() == "all" {
        return Ok(BoundKind::ALL.to_vec());
    }
    let kinds = list
        .split(',')
        .map(|s| BoundKind::from_str(s.trim()))
        .collect::<gbdp::Result<Vec<_>>>()?;
    if kinds.is_empty() {
        return Err(CliError::argument("bounds", "empty list"));
    }
    Ok(kinds)
}

fn parse_theta_d(v: &str) -> CliResult<ThetaD> {
    if v.trim() == "auto" {
        return Ok(ThetaD::Auto);
    }
    match v.trim().parse::<f64>() {
        Ok(t) if t > 0.0 && t < 1.0 => Ok(ThetaD::Fixed(t)),
        _ => Err(CliError::argument("theta-d", format!("`{v}` is neither `auto` nor a value in (0, 1)"))),
    }
}

pub fn bounds(args: &BoundsArgs) -> CliResult<()> {
    open_level("alpha", args.alpha)?;
    open_level("alpha-e", args.alpha_e)?;
    if !(args.theta_c >= 0.0 && args.theta_c < 1.0) {
        return Err(CliError::argument("theta-c", format!("{} is not in [0, 1)", args.theta_c)));
    }
    let kinds = parse_kinds(&args.bounds)?;
    let settings = BoundSettings {
        alpha: args.alpha,
        alpha_e: args.alpha_e,
        theta_c: args.theta_c,
        theta_d: parse_theta_d(&args.theta_d)?,
        bernstein: match args.bernstein {
            BernsteinArg::Variance => BernsteinForm::Variance,
            BernsteinArg::Literal => BernsteinForm::Literal,
        },
    };
    let samples = output::read_validation_csv(&args.validation)?;
    let record = output::read_summary(&output::summary_path(&args.validation))?;
    if record.samples != samples.len() {
        return Err(CliError::argument(
            "validation",
            format!("summary lists {} samples, csv has {}", record.samples, samples.len()),
        ));
    }
    let summary = ValidationSummary::with_support(samples, (record.support_lo, record.support_hi))?;
    let report = compute_bounds(&summary, &kinds, &settings)?;
    let out = resolve_out(args.out.as_deref(), "bounds.csv", Some(&args.validation));
    write_text(&out, &output::bounds_csv(&report))?;

    let mut rows = Vec::with_capacity(FIG_ALPHA_POINTS);
    for level in output::log_grid(FIG_ALPHA_LO, FIG_ALPHA_HI, FIG_ALPHA_POINTS) {
        let s = BoundSettings { alpha_e: level, ..settings };
        let r = compute_bounds(&summary, &FIG_BOUNDS, &s)?;
        rows.push((level, r.entries.iter().map(|e| e.value).collect()));
    }
    let names: Vec<&str> = FIG_BOUNDS.iter().map(|k| k.name()).collect();
    write_text(&out.with_file_name("fig_bounds.csv"), &output::bounds_grid_csv(&names, &rows))?;

    for e in &report.entries {
        match e.value {
            Some(v) => println!("{:<16} alpha {:<8} {}", e.kind.name(), e.alpha, money(v)),
            None => println!(
                "{:<16} alpha {:<8} unavailable ({})",
                e.kind.name(),
                e.alpha,
                e.reason.as_deref().unwrap_or("no value")
            ),
        }
    }
    Ok(())
}

pub fn exact(args: &ExactArgs) -> CliResult<()> {
    let inst = load_instance(&args.config)?;
    let table = solve_exact_with_budget(&inst, args.budget)?;
    let out = resolve_out(args.out.as_deref(), "exact.csv", None);
    table.write_csv(&out)?;
    let v1 = table.value(1, &vec![0; inst.n]).expect("origin is feasible");
    println!("states {}", table.space.len());
    println!("V_1(0) {}", money(v1));
    Ok(())
}

/// Per-state gaps `Q_t(x) - V_t(x)` and their extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// `(t, state index, Q, V)` over all stages `1..=T+1`.
    pub rows: Vec<(usize, usize, f64, f64)>,
    pub min_gap: f64,
    pub max_gap: f64,
    /// `Q_1(0) - V_1(0)`.
    pub origin_gap: f64,
}

impl GapReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("t,state_index,q,v,gap\n");
        for &(t, i, q, v) in &self.rows {
            out.push_str(&format!("{t},{i},{},{},{}\n", money(q), money(v), money(q - v)));
        }
        out
    }
}

pub fn run_compare(table: &ExactValueTable, cuts: &CutStack, inst: &DPInstance) -> CliResult<GapReport> {
    if cuts.n() != inst.n || cuts.horizon() != table.horizon() {
        return Err(gbdp::Error::DimensionMismatch(format!(
            "cut store has n = {}, horizon {}; instance has n = {}, horizon {}",
            cuts.n(),
            cuts.horizon(),
            inst.n,
            table.horizon()
        ))
        .into());
    }
    let mut rows = Vec::new();
    let (mut min_gap, mut max_gap) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 1..=table.horizon() + 1 {
        for (i, x) in table.space.states().enumerate() {
            let q = cuts.evaluate(t, &x)?;
            let v = table.stage(t)[i];
            min_gap = min_gap.min(q - v);
            max_gap = max_gap.max(q - v);
            rows.push((t, i, q, v));
        }
    }
    let origin = vec![0; inst.n];
    let origin_gap = cuts.evaluate(1, &origin)? - table.value(1, &origin).expect("origin is feasible");
    Ok(GapReport {
        rows,
        min_gap,
        max_gap,
        origin_gap,
    })
}

pub fn compare(args: &CompareArgs) -> CliResult<()> {
    let start = Instant::now();
    let inst = load_instance(&args.config)?;
    let cuts = load_cuts(&args.cuts)?;
    let table = solve_exact(&inst)?;
    let report = run_compare(&table, &cuts, &inst)?;
    let out = resolve_out(args.out.as_deref(), "gaps.csv", Some(&args.cuts));
    write_text(&out, &report.csv())?;
    println!("min_gap {}", money(report.min_gap));
    println!("max_gap {}", money(report.max_gap));
    println!("u_minus_v1 {}", money(report.origin_gap));
    println!(
        "upper_bound {}",
        if report.min_gap >= -GAP_TOL { "ok" } else { "violated" }
    );
    eprintln!("compared {} values in {:.2}s", report.rows.len(), start.elapsed().as_secs_f64());
    Ok(())
}
