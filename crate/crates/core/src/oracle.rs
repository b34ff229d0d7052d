//! Exact backward recursion over the whole capacity box, used as ground
//! truth on small instances, and the analytic fixed-point initialiser.
//!
//! States are indexed in mixed radix with digit `s` in `0..=x_max[s]`,
//! slot 0 least significant. The maximisation runs over the full
//! Cartesian price grid, so results are exact for that decision set.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::cuts::Hyperplane;
use crate::error::{Error, Result};
use crate::model::{DPInstance, PriceGrid};

/// Default cap on `|X| * horizon * |grid|` for [`solve_exact`].
pub const DEFAULT_BUDGET: u128 = 100_000_000;

/// Mixed-radix indexing of the capacity box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    x_max: Vec<u32>,
    strides: Vec<usize>,
    len: usize,
}

impl StateSpace {
    pub fn new(inst: &DPInstance) -> Result<Self> {
        let mut strides = Vec::with_capacity(inst.n);
        let mut len: usize = 1;
        for &m in &inst.x_max {
            strides.push(len);
            len = len
                .checked_mul(m as usize + 1)
                .ok_or_else(|| Error::precondition("state space too large to index"))?;
        }
        Ok(StateSpace {
            x_max: inst.x_max.clone(),
            strides,
            len,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self, x: &[u32]) -> Option<usize> {
        if x.len() != self.x_max.len() || x.iter().zip(&self.x_max).any(|(v, m)| v > m) {
            return None;
        }
        Some(x.iter().zip(&self.strides).map(|(&v, s)| v as usize * s).sum())
    }

    pub fn state(&self, mut idx: usize) -> Vec<u32> {
        self.x_max
            .iter()
            .map(|&m| {
                let r = m as usize + 1;
                let d = idx % r;
                idx /= r;
                d as u32
            })
            .collect()
    }

    pub fn states(&self) -> impl Iterator<Item = Vec<u32>> + '_ {
        (0..self.len).map(|i| self.state(i))
    }
}

/// One application of the Bellman operator on the full state space.
/// `v_next` is indexed by [`StateSpace`].
pub fn bellman_apply(v_next: &[f64], inst: &DPInstance) -> Result<Vec<f64>> {
    let space = StateSpace::new(inst)?;
    let grid = inst.decision_grid()?;
    bellman_apply_on(&space, &grid, v_next, inst)
}

fn bellman_apply_on(
    space: &StateSpace,
    grid: &PriceGrid,
    v_next: &[f64],
    inst: &DPInstance,
) -> Result<Vec<f64>> {
    if v_next.len() != space.len() {
        return Err(Error::precondition(format!(
            "value map covers {} states, expected {}",
            v_next.len(),
            space.len()
        )));
    }
    (0..space.len())
        .into_par_iter()
        .map(|i| state_update(space, grid, v_next, inst, i))
        .collect()
}

fn state_update(
    space: &StateSpace,
    grid: &PriceGrid,
    v_next: &[f64],
    inst: &DPInstance,
    i: usize,
) -> Result<f64> {
    let x = space.state(i);
    let mut successors = Vec::with_capacity(inst.n + 1);
    successors.push((x.clone(), v_next[i]));
    for s in 0..inst.n {
        let mut y = x.clone();
        y[s] += 1;
        // zero-probability when the slot is full; value irrelevant
        let v = space.index(&y).map_or(0.0, |k| v_next[k]);
        successors.push((y, v));
    }
    let mut best = f64::NEG_INFINITY;
    for idx in grid.cartesian(inst.n) {
        let d = grid.prices(&idx);
        let probs = inst.transition_probs(&x, &d)?;
        let mut value = probs.stay * (inst.stage_revenue(&x, &successors[0].0, &d)? + successors[0].1);
        for s in 0..inst.n {
            let p = probs.step[s];
            if p > 0.0 {
                let (y, v) = &successors[s + 1];
                value += p * (inst.stage_revenue(&x, y, &d)? + v);
            }
        }
        // strict comparison keeps the lowest enumeration index on ties
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

/// Exact values `V_t(x)` for `t = 1..=horizon + 1` over the whole box.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactValueTable {
    pub space: StateSpace,
    horizon: usize,
    values: Vec<Vec<f64>>,
}

impl ExactValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Values of stage `t` in state-index order.
    pub fn stage(&self, t: usize) -> &[f64] {
        &self.values[t - 1]
    }

    pub fn value(&self, t: usize, x: &[u32]) -> Option<f64> {
        let i = self.space.index(x)?;
        self.values.get(t.checked_sub(1)?).map(|v| v[i])
    }

    /// Writes `state_index,t,value` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "state_index,t,value")?;
        for (t, stage) in self.values.iter().enumerate() {
            for (i, v) in stage.iter().enumerate() {
                writeln!(out, "{},{},{:.16e}", i, t + 1, v)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Number of single-state, single-decision evaluations of a full solve.
pub fn exact_cost(inst: &DPInstance) -> Result<u128> {
    let grid = inst.decision_grid()?;
    let states = inst
        .state_count()
        .ok_or_else(|| Error::precondition("state count overflows"))?;
    Ok(states
        .saturating_mul(inst.horizon as u128)
        .saturating_mul(grid.cartesian_size(inst.n)))
}

pub fn solve_exact(inst: &DPInstance) -> Result<ExactValueTable> {
    solve_exact_with_budget(inst, DEFAULT_BUDGET)
}

pub fn solve_exact_with_budget(inst: &DPInstance, budget: u128) -> Result<ExactValueTable> {
    let required = exact_cost(inst)?;
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let space = StateSpace::new(inst)?;
    let grid = inst.decision_grid()?;
    let terminal: Vec<f64> = space.states().map(|x| -inst.terminal_cost(&x)).collect();
    let mut values = vec![terminal];
    for _ in 0..inst.horizon {
        let next = values.last().unwrap();
        let current = bellman_apply_on(&space, &grid, next, inst)?;
        values.push(current);
    }
    values.reverse();
    Ok(ExactValueTable {
        space,
        horizon: inst.horizon,
        values,
    })
}

/// Affine fixed point `(price_hi + r) <1, x_max - x> - C(x_max)`.
pub fn fixed_point(inst: &DPInstance) -> Hyperplane {
    let slope = inst.price_hi + inst.revenue;
    let cap = inst.total_capacity() as f64;
    let c_full = inst.terminal_cost(&inst.x_max);
    Hyperplane {
        a: vec![-slope; inst.n],
        b: slope * cap - c_full,
    }
}

/// `-C` as a single plane (exact on the box, since `C` is affine there).
pub fn terminal_plane(inst: &DPInstance) -> Hyperplane {
    Hyperplane {
        a: vec![-inst.cost_per_order; inst.n],
        b: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::desk_instance;

    fn tiny(lambda: f64) -> DPInstance {
        let mut inst = DPInstance {
            n: 1,
            x_max: vec![1],
            horizon: 1,
            lambda,
            beta_c: 0.3,
            beta_d: -0.2,
            beta_s: vec![0.1],
            price_lo: 4.0,
            price_hi: 4.0,
            revenue: 10.0,
            cost_per_order: 0.5,
            big_m: 0.0,
            price_grid_step: 1.0,
        };
        inst.big_m = inst.default_big_m();
        inst
    }

    #[test]
    fn indexing_round_trips() {
        let mut inst = desk_instance(3);
        inst.x_max = vec![2, 1, 3];
        let space = StateSpace::new(&inst).unwrap();
        assert_eq!(space.len(), 24);
        for i in 0..space.len() {
            assert_eq!(space.index(&space.state(i)), Some(i));
        }
        assert_eq!(space.state(1), vec![1, 0, 0]);
        assert_eq!(space.index(&[3, 0, 0]), None);
    }

    #[test]
    fn no_arrivals_keep_terminal_values() {
        let mut inst = tiny(0.0);
        inst.x_max = vec![3];
        inst.horizon = 4;
        inst.big_m = inst.default_big_m();
        let table = solve_exact(&inst).unwrap();
        for t in 1..=5 {
            for x in 0..=3u32 {
                assert_eq!(table.value(t, &[x]).unwrap(), -inst.terminal_cost(&[x]));
            }
        }
    }

    #[test]
    fn two_outcome_hand_expectation() {
        let inst = tiny(0.6);
        let table = solve_exact(&inst).unwrap();
        let w = (0.3f64 + 0.1 - 0.2 * 4.0).exp();
        let buy = 0.6 * w / (1.0 + w);
        // buy: revenue 14 then cost 0.5; no buy: cost 0
        let expect = buy * (14.0 - 0.5);
        assert!((table.value(1, &[0]).unwrap() - expect).abs() < 1e-12);
        // full slot: nothing can happen
        assert!((table.value(1, &[1]).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn horizon_one_is_single_application() {
        let mut inst = desk_instance(2);
        inst.x_max = vec![2, 1];
        inst.horizon = 1;
        inst.lambda = 0.3;
        inst.price_grid_step = 5.0;
        inst.big_m = inst.default_big_m();
        let table = solve_exact(&inst).unwrap();
        let space = StateSpace::new(&inst).unwrap();
        let terminal: Vec<f64> = space.states().map(|x| -inst.terminal_cost(&x)).collect();
        assert_eq!(table.stage(1), bellman_apply(&terminal, &inst).unwrap().as_slice());
    }

    #[test]
    fn bellman_rejects_partial_maps() {
        let inst = tiny(0.5);
        assert!(bellman_apply(&[0.0], &inst).is_err());
    }

    #[test]
    fn budget_guard() {
        let inst = desk_instance(17);
        assert!(matches!(
            solve_exact(&inst),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn fixed_point_values() {
        let inst = desk_instance(17);
        let v = fixed_point(&inst);
        assert!((v.eval(&[6; 17]) + 8.466).abs() < 1e-9);
        assert!((v.eval(&[0; 17]) - 4533.594).abs() < 1e-9);

        let mut degenerate = desk_instance(3);
        degenerate.cost_per_order = 0.0;
        degenerate.price_hi = -degenerate.revenue;
        let v = fixed_point(&degenerate);
        assert!(v.a.iter().all(|&a| a == 0.0));
        assert_eq!(v.b, 0.0);
    }
}
