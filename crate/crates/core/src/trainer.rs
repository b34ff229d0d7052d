//! Cut generation by alternating forward and backward sweeps.
//!
//! A forward sweep rolls out the greedy policy against the current upper
//! bound and yields a sampled profit `l(i)`. The backward sweep walks the
//! sampled states from the last epoch to the first and appends one cut per
//! stage: the plane through the local Bellman values when the next-stage
//! approximation is submodular on `Z(x)`, otherwise the plane through the
//! local Bellman values of the single best next-stage plane.

use std::time::Instant;

use crate::cuts::{fit_hyperplane, CutStack, Hyperplane, Neighbourhood, PlaneSet, ZProbe};
use crate::error::{Error, Result};
use crate::model::{DPInstance, PriceGrid, PriceVector, StateVector};
use crate::oracle::{fixed_point, solve_exact, terminal_plane, ExactValueTable};
use crate::rng::{EpochStream, StreamDomain};

/// Cap on full-grid enumeration size.
pub const FULL_GRID_LIMIT: u128 = 10_000_000;
/// Sweeps after which coordinate search stops regardless of progress.
const MAX_COORDINATE_SWEEPS: usize = 1000;
/// Gap below which an approximate value counts as exact in resample mode.
pub const EXACT_TOL: f64 = 1e-9;

/// How the per-epoch price maximisation is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecisionSearch {
    /// Cyclic coordinate ascent over the per-slot grid.
    #[default]
    Coordinate,
    /// Exhaustive Cartesian grid; only for small `n`.
    FullGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleMode {
    #[default]
    Off,
    /// Redirect sampled states whose value is already exact to a random
    /// inexact state. Needs the exact oracle.
    Oracle,
}

/// Which points of `Z(x)` the submodularity gate inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateDomain {
    /// Every point, with planes evaluated outside the capacity box.
    Global,
    /// Only pairs inside the capacity box; the value is `-inf` outside.
    #[default]
    Box,
}

/// Initial plane for stages `1..=horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    #[default]
    FixedPoint,
    /// Flat plane at `big_m`, standing in for an infinite bound.
    BigM,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub seed: u64,
    pub resample: ResampleMode,
    pub search: DecisionSearch,
    pub init: InitMode,
    pub gate: GateDomain,
}

impl TrainConfig {
    pub fn new(iterations: usize, seed: u64) -> Self {
        TrainConfig {
            iterations,
            seed,
            resample: ResampleMode::Off,
            search: DecisionSearch::Coordinate,
            init: InitMode::FixedPoint,
            gate: GateDomain::Box,
        }
    }
}

/// Precomputed logit weights and the price grid for one instance.
#[derive(Debug, Clone)]
pub struct DecisionContext<'a> {
    inst: &'a DPInstance,
    grid: PriceGrid,
    /// `exp(beta_c + beta_s + beta_d * grid[k])` at `s * grid.len() + k`.
    weights: Vec<f64>,
    search: DecisionSearch,
}

impl<'a> DecisionContext<'a> {
    pub fn new(inst: &'a DPInstance, search: DecisionSearch) -> Result<Self> {
        let grid = inst.decision_grid()?;
        if search == DecisionSearch::FullGrid && grid.cartesian_size(inst.n) > FULL_GRID_LIMIT {
            return Err(Error::precondition(format!(
                "full-grid search over {}^{} price vectors exceeds the limit",
                grid.len(),
                inst.n
            )));
        }
        let weights = (0..inst.n)
            .flat_map(|s| grid.values.iter().map(move |&p| inst.choice_weight(s, p)))
            .collect();
        Ok(DecisionContext {
            inst,
            grid,
            weights,
            search,
        })
    }

    pub fn instance(&self) -> &DPInstance {
        self.inst
    }

    pub fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    pub fn search(&self) -> DecisionSearch {
        self.search
    }

    /// Grid indices of the all-`price_hi` decision.
    pub fn top_indices(&self) -> Vec<usize> {
        vec![self.grid.len() - 1; self.inst.n]
    }

    #[inline]
    fn weight(&self, s: usize, k: usize) -> f64 {
        self.weights[s * self.grid.len() + k]
    }

    /// Expected stage revenue plus continuation for the decision `idx` at
    /// `x`, with continuation values `q[0]` at `x` and `q[s + 1]` at `x + 1_s`.
    pub fn objective(&self, x: &[u32], q: &[f64], idx: &[usize]) -> f64 {
        let (num, den) = self.totals(x, q, idx);
        self.combine(q[0], num, den)
    }

    fn totals(&self, x: &[u32], q: &[f64], idx: &[usize]) -> (f64, f64) {
        let r = self.inst.revenue;
        let mut num = 0.0;
        let mut den = 1.0;
        for s in 0..self.inst.n {
            if self.inst.slot_open(x, s) {
                let k = idx[s];
                let w = self.weight(s, k);
                num += w * (r + self.grid.values[k] + q[s + 1]);
                den += w;
            }
        }
        (num, den)
    }

    #[inline]
    fn combine(&self, q0: f64, num: f64, den: f64) -> f64 {
        let lam = self.inst.lambda;
        (1.0 - lam) * q0 + lam * (q0 + num) / den
    }

    /// Maximise the one-step objective, starting from (and overwriting)
    /// `idx`. Returns the attained value.
    pub fn optimise(&self, x: &[u32], q: &[f64], idx: &mut [usize]) -> f64 {
        match self.search {
            DecisionSearch::Coordinate => self.coordinate_search(x, q, idx),
            DecisionSearch::FullGrid => self.full_grid(x, q, idx),
        }
    }

    fn coordinate_search(&self, x: &[u32], q: &[f64], idx: &mut [usize]) -> f64 {
        let r = self.inst.revenue;
        let q0 = q[0];
        let (mut num, mut den) = self.totals(x, q, idx);
        for _ in 0..MAX_COORDINATE_SWEEPS {
            let mut improved = false;
            for s in 0..self.inst.n {
                if !self.inst.slot_open(x, s) {
                    continue;
                }
                let term = |k: usize| {
                    let w = self.weight(s, k);
                    (w * (r + self.grid.values[k] + q[s + 1]), w)
                };
                let (t0, w0) = term(idx[s]);
                let (num_rest, den_rest) = (num - t0, den - w0);
                let current = self.combine(q0, num_rest + t0, den_rest + w0);
                // a move must beat the current value by more than rounding
                let mut best = current + 1e-14 * current.abs().max(1.0);
                let mut best_k = idx[s];
                for k in 0..self.grid.len() {
                    let (tk, wk) = term(k);
                    let v = self.combine(q0, num_rest + tk, den_rest + wk);
                    if v > best {
                        best = v;
                        best_k = k;
                    }
                }
                if best_k != idx[s] {
                    idx[s] = best_k;
                    (num, den) = self.totals(x, q, idx);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        self.combine(q0, num, den)
    }

    fn full_grid(&self, x: &[u32], q: &[f64], idx: &mut [usize]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for cand in self.grid.cartesian(self.inst.n) {
            let v = self.objective(x, q, &cand);
            if v > best {
                best = v;
                idx.copy_from_slice(&cand);
            }
        }
        best
    }
}

/// Greedy decision at `x` against the next-stage approximation. `init`
/// seeds the coordinate search; `None` starts from all prices at `price_hi`.
pub fn greedy_decision(
    ctx: &DecisionContext,
    q_next: &PlaneSet,
    x: &[u32],
    init: Option<&[usize]>,
) -> Result<(PriceVector, f64)> {
    let inst = ctx.instance();
    if !inst.is_feasible(x) {
        return Err(Error::precondition(format!("state {x:?} is outside the capacity box")));
    }
    if q_next.is_empty() {
        return Err(Error::precondition("empty next-stage cut stack"));
    }
    let mut idx = match init {
        Some(i) => i.to_vec(),
        None => ctx.top_indices(),
    };
    let q = Neighbourhood::new(q_next, x).successors();
    let v = ctx.optimise(x, &q, &mut idx);
    Ok((ctx.grid().prices(&idx), v))
}

/// One rollout: states `x_1..x_{T+1}`, decisions `d_1..d_T` and the
/// realised profit.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub states: Vec<StateVector>,
    pub decisions: Vec<PriceVector>,
    pub profit: f64,
}

struct Resampler<'t> {
    table: &'t ExactValueTable,
    stream: EpochStream,
}

/// Roll out the greedy policy from the empty state. One uniform per
/// epoch from `stream` drives the inverse-CDF transition sampling.
pub fn forward_sweep(ctx: &DecisionContext, cuts: &CutStack, stream: &mut EpochStream) -> SamplePath {
    rollout(ctx, cuts, stream, None, true)
}

/// Profit of one rollout without recording the path.
pub fn rollout_profit(ctx: &DecisionContext, cuts: &CutStack, stream: &mut EpochStream) -> f64 {
    rollout(ctx, cuts, stream, None, false).profit
}

fn rollout(
    ctx: &DecisionContext,
    cuts: &CutStack,
    stream: &mut EpochStream,
    mut resample: Option<&mut Resampler>,
    record: bool,
) -> SamplePath {
    let inst = ctx.instance();
    let horizon = inst.horizon;
    let mut x = vec![0u32; inst.n];
    let mut idx = ctx.top_indices();
    let mut profit = 0.0;
    let mut states = Vec::with_capacity(if record { horizon + 1 } else { 0 });
    let mut decisions = Vec::with_capacity(if record { horizon } else { 0 });
    if record {
        states.push(StateVector(x.clone()));
    }
    for t in 1..=horizon {
        let q = Neighbourhood::new(cuts.stage(t + 1), &x).successors();
        ctx.optimise(&x, &q, &mut idx);
        let d = ctx.grid().prices(&idx);
        let probs = inst.clipped_transition_probs(&x, &d);
        if let Some(s) = probs.sample(stream.uniform(t as u64)) {
            profit += inst.revenue + d[s];
            x[s] += 1;
        }
        if let Some(r) = resample.as_deref_mut() {
            redirect_if_exact(r, cuts, t, &mut x);
        }
        if record {
            states.push(StateVector(x.clone()));
            decisions.push(d);
        }
    }
    profit -= inst.terminal_cost(&x);
    SamplePath {
        states,
        decisions,
        profit,
    }
}

/// Replace `x` (the state at `t + 1`) by a uniformly drawn state where
/// `Q_t` still exceeds `V_t`, if `Q_t(x)` is already exact.
fn redirect_if_exact(r: &mut Resampler, cuts: &CutStack, t: usize, x: &mut Vec<u32>) {
    let stage = cuts.stage(t);
    let exact = r.table.stage(t);
    let gap = |i: usize, y: &[u32]| stage.eval_unchecked(y) - exact[i];
    let here = r.table.space.index(x).expect("sampled state lies in the box");
    if gap(here, x) > EXACT_TOL {
        return;
    }
    let open: Vec<usize> = (0..r.table.space.len())
        .filter(|&i| gap(i, &r.table.space.state(i)) > EXACT_TOL)
        .collect();
    if open.is_empty() {
        return;
    }
    let u = r.stream.uniform(t as u64);
    let pick = open[((u * open.len() as f64) as usize).min(open.len() - 1)];
    *x = r.table.space.state(pick);
}

/// `(T Q_next)(y)` for `y` in `{x} ∪ {x + 1_s}`. Points outside the
/// capacity box are unreachable and take the terminal penalty `-big_m`.
pub fn local_bellman(ctx: &DecisionContext, q_next: &PlaneSet, x: &[u32]) -> Vec<f64> {
    let probe = ZProbe::new(q_next, x);
    local_values(ctx, &probe, x)
}

fn local_values(ctx: &DecisionContext, probe: &ZProbe, x: &[u32]) -> Vec<f64> {
    let inst = ctx.instance();
    let base = StateVector(x.to_vec());
    std::iter::once(None)
        .chain((0..inst.n).map(Some))
        .map(|p| {
            let y = base.step(p);
            if !inst.is_feasible(&y) {
                return -inst.terminal_cost(&y);
            }
            let q = probe.successors_of(p);
            let mut idx = ctx.top_indices();
            ctx.optimise(&y, &q, &mut idx)
        })
        .collect()
}

/// Outcome of generating one cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    /// Next stage was submodular on `Z(x)`.
    Local,
    /// Built from the single next-stage plane with index `plane`.
    Fallback { plane: usize },
}

/// The cut for stage `t` generated at `x` (the state at `t + 1`).
pub fn stage_cut(
    ctx: &DecisionContext,
    q_next: &PlaneSet,
    x: &[u32],
    gate: GateDomain,
) -> Result<(Hyperplane, CutKind)> {
    let probe = ZProbe::new(q_next, x);
    let room: Option<Vec<u32>> = match gate {
        GateDomain::Global => None,
        GateDomain::Box => Some(
            ctx.instance()
                .x_max
                .iter()
                .zip(x)
                .map(|(m, v)| m.saturating_sub(*v))
                .collect(),
        ),
    };
    if probe.is_submodular_within(room.as_deref()) {
        let values = local_values(ctx, &probe, x);
        return Ok((fit_hyperplane(x, &values)?, CutKind::Local));
    }
    let inst = ctx.instance();
    let mut best = (f64::INFINITY, 0usize);
    for (j, h) in q_next.planes().iter().enumerate() {
        let single = PlaneSet::from_planes(vec![h.clone()]);
        let v = if inst.is_feasible(x) {
            let q = Neighbourhood::new(&single, x).successors();
            let mut idx = ctx.top_indices();
            ctx.optimise(x, &q, &mut idx)
        } else {
            -inst.terminal_cost(x)
        };
        if v < best.0 {
            best = (v, j);
        }
    }
    let single = PlaneSet::from_planes(vec![q_next.planes()[best.1].clone()]);
    let values = local_bellman(ctx, &single, x);
    Ok((
        fit_hyperplane(x, &values)?,
        CutKind::Fallback { plane: best.1 },
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BackwardStats {
    pub added: usize,
    pub duplicates: usize,
    pub fallbacks: usize,
}

/// Append one cut per stage `t = T..=1` generated at `states[t]`.
pub fn backward_sweep(
    ctx: &DecisionContext,
    states: &[StateVector],
    cuts: &mut CutStack,
    gate: GateDomain,
) -> Result<BackwardStats> {
    let horizon = ctx.instance().horizon;
    if states.len() != horizon + 1 || cuts.horizon() != horizon {
        return Err(Error::DimensionMismatch(format!(
            "path of {} states for horizon {}",
            states.len(),
            horizon
        )));
    }
    let mut stats = BackwardStats::default();
    for t in (1..=horizon).rev() {
        let (h, kind) = stage_cut(ctx, cuts.stage(t + 1), &states[t], gate)?;
        if matches!(kind, CutKind::Fallback { .. }) {
            stats.fallbacks += 1;
        }
        if cuts.stage_mut(t).add_cut(h) {
            stats.added += 1;
        } else {
            stats.duplicates += 1;
        }
    }
    Ok(stats)
}

/// Per-iteration training record.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub i: usize,
    /// `Q_1(0)` after the backward sweep.
    pub u: f64,
    /// Realised profit of the forward sweep.
    pub l: f64,
    pub cut_counts: Vec<usize>,
    pub fallbacks: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub records: Vec<IterationRecord>,
}

impl TrainingTrace {
    pub fn upper(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.u).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.l).collect()
    }

    /// Running mean of `l`.
    pub fn cumulative_mean(&self) -> Vec<f64> {
        let mut sum = 0.0;
        self.records
            .iter()
            .enumerate()
            .map(|(k, r)| {
                sum += r.l;
                sum / (k + 1) as f64
            })
            .collect()
    }
}

/// Initial cut stacks for `inst`.
pub fn initial_cuts(inst: &DPInstance, init: InitMode) -> CutStack {
    let plane = match init {
        InitMode::FixedPoint => fixed_point(inst),
        InitMode::BigM => Hyperplane::constant(inst.n, inst.big_m),
    };
    CutStack::new(inst.n, inst.horizon, plane, terminal_plane(inst))
}

/// Incremental driver; [`train`] runs it to completion.
pub struct Trainer<'a> {
    ctx: DecisionContext<'a>,
    cfg: TrainConfig,
    cuts: CutStack,
    oracle: Option<ExactValueTable>,
    trace: TrainingTrace,
    started: Instant,
}

impl<'a> Trainer<'a> {
    pub fn new(inst: &'a DPInstance, cfg: TrainConfig) -> Result<Self> {
        inst.validate()?;
        if cfg.iterations < 1 {
            return Err(Error::precondition("at least one iteration is required"));
        }
        let ctx = DecisionContext::new(inst, cfg.search)?;
        let oracle = match cfg.resample {
            ResampleMode::Off => None,
            ResampleMode::Oracle => Some(solve_exact(inst)?),
        };
        Ok(Trainer {
            ctx,
            cuts: initial_cuts(inst, cfg.init),
            cfg,
            oracle,
            trace: TrainingTrace::default(),
            started: Instant::now(),
        })
    }

    pub fn cuts(&self) -> &CutStack {
        &self.cuts
    }

    pub fn trace(&self) -> &TrainingTrace {
        &self.trace
    }

    pub fn context(&self) -> &DecisionContext<'a> {
        &self.ctx
    }

    pub fn exact(&self) -> Option<&ExactValueTable> {
        self.oracle.as_ref()
    }

    pub fn completed(&self) -> usize {
        self.trace.records.len()
    }

    pub fn is_done(&self) -> bool {
        self.completed() >= self.cfg.iterations
    }

    /// Run one forward and one backward sweep.
    pub fn step(&mut self) -> Result<&IterationRecord> {
        let i = self.completed() + 1;
        let mut stream = EpochStream::new(self.cfg.seed, StreamDomain::Training, i as u64);
        let path = match &self.oracle {
            None => rollout(&self.ctx, &self.cuts, &mut stream, None, true),
            Some(table) => {
                let mut r = Resampler {
                    table,
                    stream: EpochStream::new(self.cfg.seed, StreamDomain::Resample, i as u64),
                };
                rollout(&self.ctx, &self.cuts, &mut stream, Some(&mut r), true)
            }
        };
        let stats = backward_sweep(&self.ctx, &path.states, &mut self.cuts, self.cfg.gate)?;
        let u = self.cuts.stage(1).eval_unchecked(&vec![0; self.ctx.instance().n]);
        self.trace.records.push(IterationRecord {
            i,
            u,
            l: path.profit,
            cut_counts: self.cuts.cut_counts(),
            fallbacks: stats.fallbacks,
            elapsed_secs: self.started.elapsed().as_secs_f64(),
        });
        Ok(self.trace.records.last().unwrap())
    }

    pub fn finish(self) -> (CutStack, TrainingTrace) {
        (self.cuts, self.trace)
    }
}

/// Run all configured iterations.
pub fn train(inst: &DPInstance, cfg: &TrainConfig) -> Result<(CutStack, TrainingTrace)> {
    let mut trainer = Trainer::new(inst, cfg.clone())?;
    while !trainer.is_done() {
        trainer.step()?;
    }
    Ok(trainer.finish())
}
