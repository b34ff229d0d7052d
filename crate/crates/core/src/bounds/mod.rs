//! Finite-sample lower bounds on the profit of a validated policy.
//!
//! Tail bounds (`cantelli`, `dkw_tail`) bound the profit of one fresh
//! rollout with probability at least `1 - alpha`. Expectation bounds
//! (`bernstein`, `dkw_expectation`, `hoeffding`, `gaussian`) bound the
//! expected profit with confidence `1 - alpha_e`.

mod lambert;
mod student_t;

use std::fmt;
use std::str::FromStr;

pub use lambert::lambert_w_minus1;
pub use student_t::{student_t_cdf, student_t_quantile};

use crate::error::{Error, Result};
use crate::model::DPInstance;
use crate::validator::ValidationSummary;

/// Closed interval `[lo, hi]` containing every possible sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::precondition(format!("degenerate support [{lo}, {hi}]")));
        }
        Ok(Support { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Right-continuous empirical distribution function, `F(l) = #{s <= l} / k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCDF {
    sorted: Vec<f64>,
}

impl EmpiricalCDF {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::precondition("empirical CDF of an empty sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("non-finite sample"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCDF { sorted })
    }

    pub fn k(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, l: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= l) as f64 / self.k() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.k() as f64
    }

    /// 1-based order statistic.
    fn order_stat(&self, m: usize) -> f64 {
        self.sorted[m - 1]
    }
}

fn check_level(name: &str, a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::precondition(format!("{name} = {a} outside (0, 1)")))
    }
}

/// Empirical Cantelli tail bound.
pub fn cantelli_bound(mean: f64, std: f64, k: usize, alpha: f64, theta_c: f64) -> Result<f64> {
    check_level("alpha", alpha)?;
    if k < 2 {
        return Err(Error::precondition("cantelli bound needs k >= 2"));
    }
    if theta_c.is_nan() || theta_c < 0.0 || alpha <= theta_c {
        return Err(Error::precondition(format!(
            "alpha = {alpha} must exceed theta_c = {theta_c}"
        )));
    }
    let k = k as f64;
    Ok(mean - std * ((1.0 - alpha) * (k - 1.0) / ((alpha - theta_c) * k)).sqrt())
}

/// Threshold below which the empirical CDF must stay for the DKW tail bound.
pub fn dkw_tail_threshold(k: usize, alpha: f64, theta_d: f64) -> f64 {
    alpha - theta_d - ((1.0 / theta_d).ln() / (2.0 * k as f64)).sqrt()
}

/// DKW tail bound: the supremum of `{l in support : F(l) <= c}`. `None`
/// when the threshold `c` is negative.
pub fn dkw_tail_bound(
    cdf: &EmpiricalCDF,
    alpha: f64,
    theta_d: f64,
    support: Support,
) -> Result<Option<f64>> {
    check_level("alpha", alpha)?;
    if !(theta_d > 0.0 && theta_d < alpha) {
        return Err(Error::precondition(format!(
            "theta_d = {theta_d} outside (0, alpha = {alpha})"
        )));
    }
    let k = cdf.k();
    let c = dkw_tail_threshold(k, alpha, theta_d);
    if c < 0.0 {
        return Ok(None);
    }
    // smallest m with m / k > c
    let kf = k as f64;
    let mut m = ((c * kf).floor() as usize).saturating_add(1);
    while m > 1 && (m - 1) as f64 / kf > c {
        m -= 1;
    }
    while m <= k && m as f64 / kf <= c {
        m += 1;
    }
    if m > k {
        return Ok(Some(support.hi));
    }
    Ok(Some(cdf.order_stat(m).clamp(support.lo, support.hi)))
}

/// How the variance enters the empirical Bernstein bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BernsteinForm {
    /// `sqrt(2 std^2 ln(2/a) / k)`.
    #[default]
    Variance,
    /// `sqrt(2 std ln(2/a) / k)`, standard deviation unsquared.
    Literal,
}

/// Empirical Bernstein expectation bound.
pub fn bernstein_expectation_bound(
    mean: f64,
    std: f64,
    k: usize,
    alpha_e: f64,
    support: Support,
    form: BernsteinForm,
) -> Result<f64> {
    check_level("alpha_e", alpha_e)?;
    if k < 2 {
        return Err(Error::precondition("bernstein bound needs k >= 2"));
    }
    let spread = match form {
        BernsteinForm::Variance => std * std,
        BernsteinForm::Literal => std,
    };
    let k = k as f64;
    let log = (2.0 / alpha_e).ln();
    Ok(mean - (2.0 * spread * log / k).sqrt() - 7.0 * support.width() * log / (3.0 * (k - 1.0)))
}

/// DKW expectation bound for nonnegative samples:
/// `integral_0^inf 1 - min(1, F(l) + c) dl`, summed exactly over the steps.
pub fn dkw_expectation_bound(cdf: &EmpiricalCDF, alpha_e: f64) -> Result<f64> {
    check_level("alpha_e", alpha_e)?;
    if cdf.sorted[0] < 0.0 {
        return Err(Error::precondition(
            "dkw expectation bound needs nonnegative samples; use the shifted form",
        ));
    }
    let k = cdf.k() as f64;
    let c = ((1.0 / alpha_e).ln() / (2.0 * k)).sqrt();
    let mut prev = 0.0;
    let mut total = 0.0;
    for (i, &s) in cdf.sorted.iter().enumerate() {
        let height = 1.0 - i as f64 / k - c;
        if height <= 0.0 {
            break;
        }
        total += (s - prev) * height;
        prev = s;
    }
    Ok(total)
}

/// DKW expectation bound applied to `samples - lo`, shifted back.
pub fn dkw_expectation_bound_shifted(cdf: &EmpiricalCDF, alpha_e: f64, lo: f64) -> Result<f64> {
    if cdf.sorted[0] < lo {
        return Err(Error::precondition(format!("sample below support lower end {lo}")));
    }
    let shifted: Vec<f64> = cdf.sorted.iter().map(|s| s - lo).collect();
    Ok(dkw_expectation_bound(&EmpiricalCDF { sorted: shifted }, alpha_e)? + lo)
}

/// Hoeffding expectation bound.
pub fn hoeffding_bound(mean: f64, k: usize, alpha_e: f64, support: Support) -> Result<f64> {
    check_level("alpha_e", alpha_e)?;
    if k < 1 {
        return Err(Error::precondition("hoeffding bound needs k >= 1"));
    }
    Ok(mean - support.width() * ((1.0 / alpha_e).ln() / (2.0 * k as f64)).sqrt())
}

/// One-sided Student-t bound on the mean.
pub fn gaussian_bound(mean: f64, std: f64, k: usize, alpha_e: f64) -> Result<f64> {
    check_level("alpha_e", alpha_e)?;
    if k < 2 {
        return Err(Error::precondition("gaussian bound needs k >= 2"));
    }
    if std == 0.0 {
        return Ok(mean);
    }
    let q = student_t_quantile(1.0 - alpha_e, (k - 1) as f64)?;
    Ok(mean - q * std / (k as f64).sqrt())
}

/// `theta_d` maximising the DKW tail bound, capped at `alpha`.
pub fn optimal_theta_d(alpha: f64, k: usize) -> Result<f64> {
    check_level("alpha", alpha)?;
    if k < 1 {
        return Err(Error::precondition("optimal theta_d needs k >= 1"));
    }
    let w = lambert_w_minus1(-1.0 / (4.0 * k as f64))?;
    Ok(alpha.min((0.5 * w).exp()))
}

/// Upper estimate of `P(all validation samples coincide)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaCEstimate {
    pub log10: f64,
    pub value: f64,
}

/// `|X| * p^(horizon * k)` evaluated in log10; `value` is clipped to
/// `[0, 1]` and set to 0 below `1e-300`.
pub fn theta_c_from_stay(log10_states: f64, p: f64, horizon: usize, k: usize) -> ThetaCEstimate {
    let exponent = horizon as f64 * k as f64;
    let log10 = if exponent == 0.0 {
        log10_states
    } else {
        log10_states + exponent * p.log10()
    };
    let value = if log10 < -300.0 {
        0.0
    } else {
        10f64.powf(log10).min(1.0)
    };
    ThetaCEstimate { log10, value }
}

/// [`theta_c_from_stay`] with the instance's state count and the stay
/// probability at the all-`price_lo` decision.
pub fn theta_c_upper(inst: &DPInstance, k: usize) -> ThetaCEstimate {
    let log10_states: f64 = inst.x_max.iter().map(|&m| (m as f64 + 1.0).log10()).sum();
    theta_c_from_stay(log10_states, inst.stay_prob_at_floor(), inst.horizon, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    Cantelli,
    DkwTail,
    Bernstein,
    DkwExpectation,
    Hoeffding,
    Gaussian,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::Cantelli,
        BoundKind::DkwTail,
        BoundKind::Bernstein,
        BoundKind::DkwExpectation,
        BoundKind::Hoeffding,
        BoundKind::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Cantelli => "cantelli",
            BoundKind::DkwTail => "dkw_tail",
            BoundKind::Bernstein => "bernstein",
            BoundKind::DkwExpectation => "dkw_expectation",
            BoundKind::Hoeffding => "hoeffding",
            BoundKind::Gaussian => "gaussian",
        }
    }

    /// Tail bounds use `alpha`; the rest use `alpha_e`.
    pub fn is_tail(self) -> bool {
        matches!(self, BoundKind::Cantelli | BoundKind::DkwTail)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("bounds", format!("unknown bound `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ThetaD {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSettings {
    pub alpha: f64,
    pub alpha_e: f64,
    pub theta_c: f64,
    pub theta_d: ThetaD,
    pub bernstein: BernsteinForm,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings {
            alpha: 0.1,
            alpha_e: 0.1,
            theta_c: 0.0,
            theta_d: ThetaD::Auto,
            bernstein: BernsteinForm::Variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    pub kind: BoundKind,
    /// `alpha` for tail bounds, `alpha_e` otherwise.
    pub alpha: f64,
    pub theta_c: Option<f64>,
    pub theta_d: Option<f64>,
    pub value: Option<f64>,
    /// Why `value` is missing.
    pub reason: Option<String>,
}

impl BoundEntry {
    pub fn available(&self) -> bool {
        self.value.is_some()
    }

    /// `key=value` pairs of the auxiliary parameters, `;`-separated.
    pub fn params(&self) -> String {
        let mut parts = Vec::new();
        if let Some(t) = self.theta_c {
            parts.push(format!("theta_c={t:e}"));
        }
        if let Some(t) = self.theta_d {
            parts.push(format!("theta_d={t:e}"));
        }
        parts.join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn get(&self, kind: BoundKind) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.kind == kind)
    }
}

/// Evaluate `kinds` on a validation summary. Precondition failures become
/// unavailable entries with the error text as reason.
pub fn compute_bounds(
    summary: &ValidationSummary,
    kinds: &[BoundKind],
    settings: &BoundSettings,
) -> Result<BoundReport> {
    let cdf = EmpiricalCDF::new(&summary.samples)?;
    let support = Support::new(summary.support_lo, summary.support_hi)?;
    let k = summary.k();
    let entries = kinds
        .iter()
        .map(|&kind| {
            let alpha = if kind.is_tail() { settings.alpha } else { settings.alpha_e };
            let mut entry = BoundEntry {
                kind,
                alpha,
                theta_c: None,
                theta_d: None,
                value: None,
                reason: None,
            };
            let value = match kind {
                BoundKind::Cantelli => {
                    entry.theta_c = Some(settings.theta_c);
                    cantelli_bound(summary.mean, summary.std, k, alpha, settings.theta_c).map(Some)
                }
                BoundKind::DkwTail => {
                    let theta = match settings.theta_d {
                        ThetaD::Auto => optimal_theta_d(alpha, k),
                        ThetaD::Fixed(t) => Ok(t),
                    };
                    theta.and_then(|t| {
                        entry.theta_d = Some(t);
                        if t >= alpha {
                            return Err(Error::precondition(format!(
                                "theta_d = {t} not below alpha = {alpha}"
                            )));
                        }
                        let v = dkw_tail_bound(&cdf, alpha, t, support)?;
                        if v.is_none() {
                            entry.reason = Some("negative DKW threshold".to_string());
                        }
                        Ok(v)
                    })
                }
                BoundKind::Bernstein => bernstein_expectation_bound(
                    summary.mean,
                    summary.std,
                    k,
                    alpha,
                    support,
                    settings.bernstein,
                )
                .map(Some),
                BoundKind::DkwExpectation => {
                    dkw_expectation_bound_shifted(&cdf, alpha, support.lo).map(Some)
                }
                BoundKind::Hoeffding => hoeffding_bound(summary.mean, k, alpha, support).map(Some),
                BoundKind::Gaussian => gaussian_bound(summary.mean, summary.std, k, alpha).map(Some),
            };
            match value {
                Ok(v) => entry.value = v,
                Err(e) => entry.reason = Some(e.to_string()),
            }
            entry
        })
        .collect();
    Ok(BoundReport { entries })
}
