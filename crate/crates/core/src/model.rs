//! Problem definition: the finite-horizon slot-pricing DP with
//! multinomial-logit order arrivals.
//!
//! States count accumulated orders per delivery slot and only move up by
//! at most one unit per epoch. A slot whose count has reached its capacity
//! is dropped from the customer's choice set, so feasible states never
//! transition out of the capacity box.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default discretisation step of the price grid.
pub const DEFAULT_PRICE_GRID_STEP: f64 = 0.25;

/// Full problem definition.
#[derive(Debug, Clone, PartialEq)]
pub struct DPInstance {
    /// Number of delivery slots (state dimension).
    pub n: usize,
    /// Per-slot capacity.
    pub x_max: Vec<u32>,
    /// Number of decision epochs.
    pub horizon: usize,
    /// Probability that a customer arrives in an epoch.
    pub lambda: f64,
    pub beta_c: f64,
    /// Price sensitivity, strictly negative.
    pub beta_d: f64,
    /// Per-slot popularity.
    pub beta_s: Vec<f64>,
    pub price_lo: f64,
    pub price_hi: f64,
    /// Average order revenue.
    pub revenue: f64,
    /// Marginal delivery cost per order.
    pub cost_per_order: f64,
    /// Finite terminal penalty for states outside the capacity box.
    pub big_m: f64,
    pub price_grid_step: f64,
}

/// On-disk form of [`DPInstance`]. Keys match the field names; unknown keys
/// are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub n: usize,
    pub x_max: Vec<u32>,
    pub horizon: usize,
    pub lambda: f64,
    pub beta_c: f64,
    pub beta_d: f64,
    pub beta_s: Vec<f64>,
    pub price_lo: f64,
    pub price_hi: f64,
    pub revenue: f64,
    pub cost_per_order: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_grid_step: Option<f64>,
}

/// Per-slot order counts. May lie outside the capacity box when probing
/// neighbourhoods of boundary states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateVector(pub Vec<u32>);

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0; n])
    }

    /// `self + 1_s`; `s == None` is the zero step.
    pub fn step(&self, s: Option<usize>) -> Self {
        let mut y = self.clone();
        if let Some(s) = s {
            y.0[s] += 1;
        }
        y
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&v| u64::from(v)).sum()
    }
}

impl std::ops::Deref for StateVector {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

/// One delivery price per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVector(pub Vec<f64>);

impl std::ops::Deref for PriceVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Outcome distribution of one epoch: stay at `x` or move to `x + 1_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProbs {
    pub stay: f64,
    /// `step[s]` is the probability of `x + 1_s`.
    pub step: Vec<f64>,
}

impl TransitionProbs {
    pub fn total(&self) -> f64 {
        self.stay + self.step.iter().sum::<f64>()
    }

    /// Inverse-CDF sampling over the outcome order `[stay, 1_1, ..., 1_n]`.
    /// Returns `None` for the stay outcome.
    pub fn sample(&self, u: f64) -> Option<usize> {
        let mut acc = self.stay;
        if u < acc {
            return None;
        }
        let mut last = None;
        for (s, &p) in self.step.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = Some(s);
            if u < acc {
                return Some(s);
            }
        }
        // u landed in the rounding gap above the accumulated mass
        last
    }
}

/// Per-slot price candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    pub values: Vec<f64>,
}

impl PriceGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn prices(&self, idx: &[usize]) -> PriceVector {
        PriceVector(idx.iter().map(|&k| self.values[k]).collect())
    }

    /// Number of price vectors in the full Cartesian grid over `n` slots.
    pub fn cartesian_size(&self, n: usize) -> u128 {
        (self.values.len() as u128).saturating_pow(n as u32)
    }

    /// Full Cartesian product in mixed-radix order, slot 0 varying fastest.
    pub fn cartesian(&self, n: usize) -> CartesianGrid {
        CartesianGrid {
            radix: self.values.len(),
            current: if n == 0 || self.values.is_empty() {
                None
            } else {
                Some(vec![0; n])
            },
        }
    }
}

/// Iterator over grid index vectors.
#[derive(Debug, Clone)]
pub struct CartesianGrid {
    radix: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for CartesianGrid {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let mut carry = true;
        for digit in cur.iter_mut() {
            *digit += 1;
            if *digit < self.radix {
                carry = false;
                break;
            }
            *digit = 0;
        }
        if carry {
            self.current = None;
        }
        Some(out)
    }
}

impl DPInstance {
    /// Build from a parsed config, filling defaults and validating.
    pub fn from_config(cfg: InstanceConfig) -> Result<Self> {
        let mut inst = DPInstance {
            n: cfg.n,
            x_max: cfg.x_max,
            horizon: cfg.horizon,
            lambda: cfg.lambda,
            beta_c: cfg.beta_c,
            beta_d: cfg.beta_d,
            beta_s: cfg.beta_s,
            price_lo: cfg.price_lo,
            price_hi: cfg.price_hi,
            revenue: cfg.revenue,
            cost_per_order: cfg.cost_per_order,
            big_m: 0.0,
            price_grid_step: cfg.price_grid_step.unwrap_or(DEFAULT_PRICE_GRID_STEP),
        };
        inst.big_m = match cfg.big_m {
            Some(m) => m,
            None => inst.default_big_m(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_config(&self) -> InstanceConfig {
        InstanceConfig {
            n: self.n,
            x_max: self.x_max.clone(),
            horizon: self.horizon,
            lambda: self.lambda,
            beta_c: self.beta_c,
            beta_d: self.beta_d,
            beta_s: self.beta_s.clone(),
            price_lo: self.price_lo,
            price_hi: self.price_hi,
            revenue: self.revenue,
            cost_per_order: self.cost_per_order,
            big_m: Some(self.big_m),
            price_grid_step: Some(self.price_grid_step),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: InstanceConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            // serde reports unknown keys as "unknown field `foo`, expected ..."
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".to_string());
            Error::config(field, msg)
        })?;
        Self::from_config(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_config()).expect("instance config serialises")
    }

    /// `2 (price_hi + revenue) <1, x_max>`.
    pub fn default_big_m(&self) -> f64 {
        2.0 * (self.price_hi + self.revenue) * self.total_capacity() as f64
    }

    pub fn total_capacity(&self) -> u64 {
        self.x_max.iter().map(|&v| u64::from(v)).sum()
    }

    /// `|X| = prod (x_max_s + 1)`, or `None` on overflow.
    pub fn state_count(&self) -> Option<u128> {
        self.x_max
            .iter()
            .try_fold(1u128, |acc, &m| acc.checked_mul(u128::from(m) + 1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.x_max.len() != self.n {
            return Err(Error::config(
                "x_max",
                format!("length {} does not match n = {}", self.x_max.len(), self.n),
            ));
        }
        if self.x_max.iter().any(|&m| m < 1) {
            return Err(Error::config("x_max", "every capacity must be >= 1"));
        }
        if self.beta_s.len() != self.n {
            return Err(Error::config(
                "beta_s",
                format!("length {} does not match n = {}", self.beta_s.len(), self.n),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        // the closed interval admits the degenerate no-arrival and
        // certain-arrival instances
        if !(self.lambda >= 0.0 && self.lambda <= 1.0) {
            return Err(Error::config("lambda", "must lie in [0, 1]"));
        }
        if self.beta_d >= 0.0 || !self.beta_d.is_finite() {
            return Err(Error::config("beta_d", "must be finite and negative"));
        }
        if !self.beta_c.is_finite() {
            return Err(Error::config("beta_c", "must be finite"));
        }
        if self.beta_s.iter().any(|b| !b.is_finite()) {
            return Err(Error::config("beta_s", "entries must be finite"));
        }
        if !self.price_lo.is_finite() || !self.price_hi.is_finite() {
            return Err(Error::config("price_lo", "price bounds must be finite"));
        }
        if self.price_lo > self.price_hi {
            return Err(Error::config("price_hi", "must be >= price_lo"));
        }
        if !self.revenue.is_finite() {
            return Err(Error::config("revenue", "must be finite"));
        }
        if !self.cost_per_order.is_finite() {
            return Err(Error::config("cost_per_order", "must be finite"));
        }
        let floor = (self.price_hi + self.revenue) * self.total_capacity() as f64;
        if !(self.big_m.is_finite() && self.big_m > floor) {
            return Err(Error::config(
                "big_m",
                format!("must exceed (price_hi + revenue) * <1, x_max> = {floor}"),
            ));
        }
        if !(self.price_grid_step > 0.0 && self.price_grid_step.is_finite()) {
            return Err(Error::config("price_grid_step", "must be positive"));
        }
        if self.price_hi > self.price_lo && self.price_grid_step > self.price_hi - self.price_lo {
            return Err(Error::config(
                "price_grid_step",
                "larger than the price range",
            ));
        }
        Ok(())
    }

    pub fn is_feasible(&self, x: &[u32]) -> bool {
        x.len() == self.n && x.iter().zip(&self.x_max).all(|(v, m)| v <= m)
    }

    /// Slot can still take orders.
    #[inline]
    pub fn slot_open(&self, x: &[u32], s: usize) -> bool {
        x[s] < self.x_max[s]
    }

    /// Logit weight `exp(beta_c + beta_s + beta_d d)`.
    #[inline]
    pub fn choice_weight(&self, s: usize, price: f64) -> f64 {
        (self.beta_c + self.beta_s[s] + self.beta_d * price).exp()
    }

    /// Multinomial-logit transition probabilities from `x` under prices `d`.
    pub fn transition_probs(&self, x: &[u32], d: &[f64]) -> Result<TransitionProbs> {
        if !self.is_feasible(x) {
            return Err(Error::precondition(format!("state {x:?} is outside the capacity box")));
        }
        self.check_prices(d)?;
        Ok(self.clipped_transition_probs(x, d))
    }

    /// Transition probabilities with every slot at or above capacity
    /// removed from the choice set. Accepts states outside the box.
    pub fn clipped_transition_probs(&self, x: &[u32], d: &[f64]) -> TransitionProbs {
        let mut step = vec![0.0; self.n];
        let mut denom = 1.0;
        for s in 0..self.n {
            if self.slot_open(x, s) {
                let w = self.choice_weight(s, d[s]);
                step[s] = w;
                denom += w;
            }
        }
        let mut moved = 0.0;
        for p in step.iter_mut() {
            *p = self.lambda * *p / denom;
            moved += *p;
        }
        TransitionProbs {
            stay: 1.0 - moved,
            step,
        }
    }

    fn check_prices(&self, d: &[f64]) -> Result<()> {
        if d.len() != self.n {
            return Err(Error::precondition(format!(
                "price vector has length {}, expected {}",
                d.len(),
                self.n
            )));
        }
        if let Some(p) = d
            .iter()
            .find(|&&p| !(p >= self.price_lo && p <= self.price_hi))
        {
            return Err(Error::precondition(format!(
                "price {p} outside [{}, {}]",
                self.price_lo, self.price_hi
            )));
        }
        Ok(())
    }

    /// Stage revenue `g(x, y, d)`: `r + d_s` for `y = x + 1_s`, zero for `y = x`.
    pub fn stage_revenue(&self, x: &[u32], y: &[u32], d: &[f64]) -> Result<f64> {
        if x.len() != self.n || y.len() != self.n || d.len() != self.n {
            return Err(Error::precondition("dimension mismatch in stage_revenue"));
        }
        let mut moved = None;
        for s in 0..self.n {
            match y[s].checked_sub(x[s]) {
                Some(0) => {}
                Some(1) if moved.is_none() => moved = Some(s),
                _ => {
                    return Err(Error::precondition(format!(
                        "{y:?} is not a unit step from {x:?}"
                    )))
                }
            }
        }
        Ok(moved.map_or(0.0, |s| self.revenue + d[s]))
    }

    /// Terminal cost: affine inside the box, `big_m` outside.
    pub fn terminal_cost(&self, x: &[u32]) -> f64 {
        if self.is_feasible(x) {
            self.cost_per_order * x.iter().map(|&v| f64::from(v)).sum::<f64>()
        } else {
            self.big_m
        }
    }

    /// Per-slot price candidates `{lo, lo + step, ..., hi}`.
    pub fn decision_grid(&self) -> Result<PriceGrid> {
        let step = self.price_grid_step;
        if step.is_nan() || step <= 0.0 {
            return Err(Error::precondition("price_grid_step must be positive"));
        }
        let range = self.price_hi - self.price_lo;
        if range == 0.0 {
            return Ok(PriceGrid {
                values: vec![self.price_lo],
            });
        }
        if step > range {
            return Err(Error::precondition(format!(
                "price_grid_step {step} exceeds the price range {range}"
            )));
        }
        let mut values = Vec::new();
        let mut k = 0u64;
        loop {
            let p = self.price_lo + k as f64 * step;
            if p >= self.price_hi - 1e-9 * step {
                break;
            }
            values.push(p);
            k += 1;
        }
        values.push(self.price_hi);
        Ok(PriceGrid { values })
    }

    /// Probability of no order at `x = 0` with every price at `price_lo`.
    pub fn stay_prob_at_floor(&self) -> f64 {
        let zero = vec![0; self.n];
        let d = vec![self.price_lo; self.n];
        self.clipped_transition_probs(&zero, &d).stay
    }
}

/// `beta_c` such that the no-order probability at the price floor equals
/// `target_stay` for an empty state.
pub fn calibrate_beta_c(
    lambda: f64,
    beta_s: &[f64],
    beta_d: f64,
    price_lo: f64,
    target_stay: f64,
) -> Result<f64> {
    let share = (1.0 - target_stay) / lambda;
    if !(share > 0.0 && share < 1.0) {
        return Err(Error::precondition(format!(
            "target no-order probability {target_stay} unreachable with lambda {lambda}"
        )));
    }
    let total = share / (1.0 - share);
    let base: f64 = beta_s.iter().map(|b| (b + beta_d * price_lo).exp()).sum();
    Ok(total.ln() - base.ln())
}

/// Default no-order probability at the price floor for the shipped profile.
pub const DEFAULT_STAY_AT_FLOOR: f64 = 0.9951;

/// Shipped logit profile: a popularity ramp across slots and moderate
/// price sensitivity, with `beta_c` calibrated to [`DEFAULT_STAY_AT_FLOOR`].
pub fn default_beta_profile(n: usize, lambda: f64, price_lo: f64) -> (f64, f64, Vec<f64>) {
    let beta_d = -0.1;
    let beta_s: Vec<f64> = (0..n)
        .map(|s| {
            if n == 1 {
                0.0
            } else {
                -0.4 + 0.8 * s as f64 / (n - 1) as f64
            }
        })
        .collect();
    let beta_c = calibrate_beta_c(lambda, &beta_s, beta_d, price_lo, DEFAULT_STAY_AT_FLOOR)
        .expect("default profile is calibratable");
    (beta_c, beta_d, beta_s)
}

/// The booking-horizon instance with `n` slots of capacity 6, arrival
/// probability 0.008, prices in [0, 10], order revenue 34.53, 6990 epochs
/// and delivery cost 0.083 per order. `n = 17` is the full-size case.
pub fn desk_instance(n: usize) -> DPInstance {
    let lambda = 0.008;
    let price_lo = 0.0;
    let (beta_c, beta_d, beta_s) = default_beta_profile(n, lambda, price_lo);
    let mut inst = DPInstance {
        n,
        x_max: vec![6; n],
        horizon: 6990,
        lambda,
        beta_c,
        beta_d,
        beta_s,
        price_lo,
        price_hi: 10.0,
        revenue: 34.53,
        cost_per_order: 0.083,
        big_m: 0.0,
        price_grid_step: DEFAULT_PRICE_GRID_STEP,
    };
    inst.big_m = inst.default_big_m();
    inst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_slot(lambda: f64) -> DPInstance {
        let mut inst = DPInstance {
            n: 1,
            x_max: vec![3],
            horizon: 2,
            lambda,
            beta_c: 0.0,
            beta_d: -1.0,
            beta_s: vec![0.0],
            price_lo: 0.0,
            price_hi: 10.0,
            revenue: 34.53,
            cost_per_order: 0.083,
            big_m: 0.0,
            price_grid_step: 2.5,
        };
        inst.big_m = inst.default_big_m();
        inst
    }

    #[test]
    fn no_arrivals_means_stay() {
        let inst = desk_instance(3);
        let inst = DPInstance { lambda: 0.0, ..inst };
        let p = inst.transition_probs(&[1, 2, 0], &[3.0, 4.0, 5.0]).unwrap();
        assert_eq!(p.stay, 1.0);
        assert!(p.step.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_share_single_slot() {
        let p = one_slot(0.5).transition_probs(&[0], &[0.0]).unwrap();
        assert!((p.step[0] - 0.25).abs() < 1e-15);
        assert!((p.stay - 0.75).abs() < 1e-15);
    }

    #[test]
    fn full_slots_leave_choice_set() {
        let mut inst = desk_instance(2);
        inst.x_max = vec![1, 1];
        let p = inst.transition_probs(&[1, 1], &[0.0, 0.0]).unwrap();
        assert_eq!(p.stay, 1.0);
        let p = inst.transition_probs(&[1, 0], &[0.0, 0.0]).unwrap();
        assert_eq!(p.step[0], 0.0);
        assert!(p.step[1] > 0.0);
        assert!((p.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transition_errors() {
        let inst = one_slot(0.5);
        assert!(inst.transition_probs(&[4], &[0.0]).is_err());
        assert!(inst.transition_probs(&[0], &[11.0]).is_err());
        assert!(inst.transition_probs(&[0], &[-0.5]).is_err());
    }

    #[test]
    fn stage_revenue_cases() {
        let inst = desk_instance(3);
        let d = [1.0, 5.0, 0.0];
        assert_eq!(inst.stage_revenue(&[0, 0, 0], &[0, 0, 0], &d).unwrap(), 0.0);
        let v = inst.stage_revenue(&[0, 0, 0], &[0, 1, 0], &d).unwrap();
        assert!((v - 39.53).abs() < 1e-12);
        let v = inst.stage_revenue(&[0, 0, 0], &[1, 0, 0], &[0.0, 5.0, 0.0]).unwrap();
        assert!((v - 34.53).abs() < 1e-12);
        assert!(inst.stage_revenue(&[0, 0, 0], &[1, 1, 0], &d).is_err());
        assert!(inst.stage_revenue(&[0, 0, 0], &[2, 0, 0], &d).is_err());
        assert!(inst.stage_revenue(&[1, 0, 0], &[0, 0, 0], &d).is_err());
    }

    #[test]
    fn terminal_cost_cases() {
        let inst = desk_instance(17);
        assert_eq!(inst.terminal_cost(&[0; 17]), 0.0);
        let c = inst.terminal_cost(&[6; 17]);
        assert!((c - 8.466).abs() < 1e-12);
        let mut x = vec![0; 17];
        x[4] = 7;
        assert_eq!(inst.terminal_cost(&x), inst.big_m);
    }

    #[test]
    fn grid_enumeration() {
        let mut inst = one_slot(0.5);
        inst.price_grid_step = 10.0;
        assert_eq!(inst.decision_grid().unwrap().values, vec![0.0, 10.0]);
        inst.price_grid_step = 2.5;
        assert_eq!(
            inst.decision_grid().unwrap().values,
            vec![0.0, 2.5, 5.0, 7.5, 10.0]
        );
        inst.price_grid_step = 15.0;
        assert!(inst.decision_grid().is_err());
        assert!(inst.validate().is_err());
    }

    #[test]
    fn cartesian_order_and_size() {
        let grid = PriceGrid {
            values: vec![0.0, 1.0, 2.0],
        };
        let all: Vec<_> = grid.cartesian(2).collect();
        assert_eq!(all.len() as u128, grid.cartesian_size(2));
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![1, 0]);
        assert_eq!(all[3], vec![0, 1]);
        assert_eq!(all[8], vec![2, 2]);
    }

    #[test]
    fn default_profile_is_calibrated() {
        for n in [1, 5, 17] {
            let inst = desk_instance(n);
            inst.validate().unwrap();
            assert!((inst.stay_prob_at_floor() - DEFAULT_STAY_AT_FLOOR).abs() < 1e-12);
        }
    }

    #[test]
    fn config_round_trip_and_rejection() {
        let inst = desk_instance(4);
        let text = inst.to_toml_string();
        assert_eq!(DPInstance::from_toml_str(&text).unwrap(), inst);

        let bad = format!("{text}\nfoo = 1\n");
        match DPInstance::from_toml_str(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "foo"),
            other => panic!("expected config error, got {other:?}"),
        }
        let bad = text.replace("lambda = 0.008", "lambda = 1.5");
        match DPInstance::from_toml_str(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "lambda"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn big_m_must_dominate() {
        let mut inst = one_slot(0.5);
        inst.big_m = (inst.price_hi + inst.revenue) * 3.0;
        assert!(matches!(inst.validate(), Err(Error::Config { field, .. }) if field == "big_m"));
    }

    #[test]
    fn sampling_follows_cdf() {
        let p = TransitionProbs {
            stay: 0.5,
            step: vec![0.25, 0.0, 0.25],
        };
        assert_eq!(p.sample(0.0), None);
        assert_eq!(p.sample(0.49), None);
        assert_eq!(p.sample(0.5), Some(0));
        assert_eq!(p.sample(0.8), Some(2));
        assert_eq!(p.sample(0.999_999_999_999), Some(2));
    }
}
