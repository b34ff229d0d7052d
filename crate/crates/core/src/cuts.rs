//! Piecewise-affine upper bounds: each stage keeps a stack of hyperplanes
//! and the approximation is their pointwise minimum.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StateVector;

/// Absolute slack allowed in the pairwise submodularity inequality.
pub const SUBMODULAR_TOL: f64 = 1e-9;
/// Absolute tolerance for membership in the supporting set.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Coefficient tolerance under which a new cut counts as a duplicate.
pub const DEDUP_TOL: f64 = 1e-12;

pub const CUT_STORE_VERSION: u32 = 1;

/// Affine function `<a, x> + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Hyperplane {
    pub fn constant(n: usize, b: f64) -> Self {
        Hyperplane { a: vec![0.0; n], b }
    }

    pub fn eval(&self, x: &[u32]) -> f64 {
        self.a
            .iter()
            .zip(x)
            .fold(self.b, |acc, (a, &v)| acc + a * f64::from(v))
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.a.iter().all(|v| v.is_finite())
    }

    fn near(&self, other: &Hyperplane, tol: f64) -> bool {
        (self.b - other.b).abs() <= tol
            && self.a.iter().zip(&other.a).all(|(p, q)| (p - q).abs() <= tol)
    }
}

/// The hyperplanes of one stage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlaneSet {
    planes: Vec<Hyperplane>,
}

impl PlaneSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_planes(planes: Vec<Hyperplane>) -> Self {
        PlaneSet { planes }
    }

    pub fn planes(&self) -> &[Hyperplane] {
        &self.planes
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    /// Append `h` unless a plane within [`DEDUP_TOL`] already exists.
    /// Returns whether the plane was stored.
    pub fn add_cut(&mut self, h: Hyperplane) -> bool {
        if self.planes.iter().any(|p| p.near(&h, DEDUP_TOL)) {
            return false;
        }
        self.planes.push(h);
        true
    }

    /// `min_j <a_j, x> + b_j`. Defined for any integer vector.
    pub fn evaluate(&self, x: &[u32]) -> Result<f64> {
        if self.planes.is_empty() {
            return Err(Error::precondition("evaluate on an empty cut stack"));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[u32]) -> f64 {
        self.planes
            .iter()
            .map(|h| h.eval(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Indices of all planes attaining the minimum at `x`.
    pub fn supporting_set(&self, x: &[u32]) -> Vec<usize> {
        let vals: Vec<f64> = self.planes.iter().map(|h| h.eval(x)).collect();
        let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        vals.iter()
            .enumerate()
            .filter(|(_, &v)| v - best <= SUPPORT_TOL)
            .map(|(j, _)| j)
            .collect()
    }

    /// Pairwise check of `f(max(y,z)) + f(min(y,z)) <= f(y) + f(z)` over
    /// every unordered pair of distinct points.
    pub fn is_submodular_on(&self, points: &[StateVector]) -> bool {
        let f = |x: &[u32]| self.eval_unchecked(x);
        for (i, y) in points.iter().enumerate() {
            for z in &points[i + 1..] {
                if y == z {
                    continue;
                }
                let hi: Vec<u32> = y.iter().zip(z.iter()).map(|(a, b)| *a.max(b)).collect();
                let lo: Vec<u32> = y.iter().zip(z.iter()).map(|(a, b)| *a.min(b)).collect();
                if f(&hi) + f(&lo) > f(y) + f(z) + SUBMODULAR_TOL {
                    return false;
                }
            }
        }
        true
    }
}

/// `Z(x) = {x + 1_s + 1_s'}` for `s, s'` in `{0} ∪ S`, without duplicates.
pub fn z_points(x: &[u32]) -> Vec<StateVector> {
    let base = StateVector(x.to_vec());
    z_offsets(x.len())
        .iter()
        .map(|&(p, q)| base.step(p).step(q))
        .collect()
}

/// Offsets of `Z(x)` as ordered slot pairs `(p, q)` with `p <= q`
/// (`None` sorts first and is the zero step).
pub(crate) fn z_offsets(n: usize) -> Vec<(Option<usize>, Option<usize>)> {
    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    let slots = || std::iter::once(None).chain((0..n).map(Some));
    for p in slots() {
        for q in slots() {
            if p <= q {
                out.push((p, q));
            }
        }
    }
    out
}

/// Interpolating hyperplane through `(x, values[0])` and
/// `(x + 1_s, values[s + 1])`.
pub fn fit_hyperplane(x: &[u32], values: &[f64]) -> Result<Hyperplane> {
    if values.len() != x.len() + 1 {
        return Err(Error::precondition(format!(
            "fit_hyperplane needs {} values, got {}",
            x.len() + 1,
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::precondition(format!("missing value at offset {i}")));
    }
    let v0 = values[0];
    let a: Vec<f64> = values[1..].iter().map(|v| v - v0).collect();
    let b = v0 - a.iter().zip(x).map(|(a, &v)| a * f64::from(v)).sum::<f64>();
    Ok(Hyperplane { a, b })
}

/// Cut stacks for stages `1..=horizon + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutStack {
    n: usize,
    horizon: usize,
    stages: Vec<PlaneSet>,
}

impl CutStack {
    /// Stages `1..=horizon` start from `init`, the terminal stage from `terminal`.
    pub fn new(n: usize, horizon: usize, init: Hyperplane, terminal: Hyperplane) -> Self {
        let mut stages: Vec<PlaneSet> = (0..horizon)
            .map(|_| PlaneSet::from_planes(vec![init.clone()]))
            .collect();
        stages.push(PlaneSet::from_planes(vec![terminal]));
        CutStack { n, horizon, stages }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Planes of stage `t` (1-based, up to `horizon + 1`).
    pub fn stage(&self, t: usize) -> &PlaneSet {
        &self.stages[t - 1]
    }

    pub fn stage_mut(&mut self, t: usize) -> &mut PlaneSet {
        &mut self.stages[t - 1]
    }

    pub fn evaluate(&self, t: usize, x: &[u32]) -> Result<f64> {
        if t == 0 || t > self.horizon + 1 {
            return Err(Error::precondition(format!("stage {t} out of range")));
        }
        self.stage(t).evaluate(x)
    }

    pub fn cut_counts(&self) -> Vec<usize> {
        self.stages.iter().map(PlaneSet::len).collect()
    }

    pub fn to_store(&self) -> CutStore {
        CutStore {
            version: CUT_STORE_VERSION,
            n: self.n,
            horizon: self.horizon,
            cuts: self
                .stages
                .iter()
                .enumerate()
                .map(|(i, s)| (i + 1, s.planes.clone()))
                .collect(),
        }
    }

    pub fn from_store(store: CutStore) -> Result<Self> {
        if store.version != CUT_STORE_VERSION {
            return Err(Error::Parse(format!(
                "unsupported cut store version {}",
                store.version
            )));
        }
        let mut stages = Vec::with_capacity(store.horizon + 1);
        for t in 1..=store.horizon + 1 {
            let planes = store
                .cuts
                .get(&t)
                .ok_or_else(|| Error::Parse(format!("cut store has no stage {t}")))?;
            if planes.is_empty() {
                return Err(Error::Parse(format!("stage {t} has no cuts")));
            }
            if let Some(h) = planes.iter().find(|h| h.a.len() != store.n || !h.is_finite()) {
                return Err(Error::Parse(format!(
                    "malformed cut at stage {t}: {h:?}"
                )));
            }
            stages.push(PlaneSet::from_planes(planes.clone()));
        }
        if store.cuts.len() != store.horizon + 1 {
            return Err(Error::Parse("cut store has stages beyond the horizon".into()));
        }
        Ok(CutStack {
            n: store.n,
            horizon: store.horizon,
            stages,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(&self.to_store())
            .map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let store: CutStore =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_store(store)
    }
}

/// Serialised cut stacks. Floats are written as shortest round-trip
/// decimals and parsed back exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutStore {
    pub version: u32,
    pub n: usize,
    pub horizon: usize,
    pub cuts: BTreeMap<usize, Vec<Hyperplane>>,
}

/// Fast evaluation of one plane set on small offsets around a fixed
/// state. Plane values at the base state and gradients are laid out
/// plane-contiguous per slot.
pub(crate) struct Neighbourhood {
    n: usize,
    base: Vec<f64>,
    grad: Vec<f64>,
}

impl Neighbourhood {
    pub fn new(set: &PlaneSet, x: &[u32]) -> Self {
        let n = x.len();
        let j = set.len();
        let mut base = Vec::with_capacity(j);
        let mut grad = vec![0.0; n * j];
        for (k, h) in set.planes.iter().enumerate() {
            base.push(h.eval(x));
            for s in 0..n {
                grad[s * j + k] = h.a[s];
            }
        }
        Neighbourhood { n, base, grad }
    }

    fn slot(&self, s: usize) -> &[f64] {
        let j = self.base.len();
        &self.grad[s * j..(s + 1) * j]
    }

    /// Value at `x + sum_k c_k 1_{s_k}`.
    pub fn eval_terms(&self, terms: &[(usize, f64)]) -> f64 {
        let mut best = f64::INFINITY;
        match terms {
            [] => {
                for &b in &self.base {
                    best = best.min(b);
                }
            }
            [(s, c)] => {
                for (b, g) in self.base.iter().zip(self.slot(*s)) {
                    best = best.min(b + c * g);
                }
            }
            _ => {
                let mut acc = self.base.clone();
                for &(s, c) in terms {
                    for (v, g) in acc.iter_mut().zip(self.slot(s)) {
                        *v += c * g;
                    }
                }
                for v in acc {
                    best = best.min(v);
                }
            }
        }
        best
    }

    /// Plane `j` at `x + sum_k 1_{units[k]}`.
    #[inline]
    pub fn plane_at(&self, j: usize, units: &[usize]) -> f64 {
        let planes = self.base.len();
        let mut v = self.base[j];
        for &s in units {
            v += self.grad[s * planes + j];
        }
        v
    }

    /// Minimum and a minimising plane at `x + sum_k 1_{units[k]}`.
    pub fn min_at(&self, units: &[usize]) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for j in 0..self.base.len() {
            let v = self.plane_at(j, units);
            if v < best.0 {
                best = (v, j);
            }
        }
        best
    }

    /// Values at `x` and `x + 1_s`, in `Y_+` order.
    pub fn successors(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n + 1);
        out.push(self.eval_terms(&[]));
        for s in 0..self.n {
            out.push(self.eval_terms(&[(s, 1.0)]));
        }
        out
    }
}

/// Values of a plane set on `Z(x)` plus the pairwise submodularity test,
/// sharing one [`Neighbourhood`].
pub(crate) struct ZProbe {
    n: usize,
    offsets: Vec<(Option<usize>, Option<usize>)>,
    /// Sorted unit slots of each offset (zero, one or two entries).
    units: Vec<Units>,
    values: Vec<f64>,
    /// A plane attaining the minimum at each offset.
    argmin: Vec<usize>,
    hood: Neighbourhood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Units {
    slots: [usize; 2],
    len: usize,
}

impl Units {
    fn of(p: Option<usize>, q: Option<usize>) -> Self {
        match (p, q) {
            (None, None) => Units { slots: [0, 0], len: 0 },
            (None, Some(s)) | (Some(s), None) => Units { slots: [s, 0], len: 1 },
            (Some(s), Some(r)) => Units { slots: [s.min(r), s.max(r)], len: 2 },
        }
    }

    fn as_slice(&self) -> &[usize] {
        &self.slots[..self.len]
    }

    fn fits(&self, room: &[u32]) -> bool {
        match self.as_slice() {
            [] => true,
            [s] => room[*s] >= 1,
            [s, r] if s == r => room[*s] >= 2,
            [s, r] => room[*s] >= 1 && room[*r] >= 1,
            _ => unreachable!(),
        }
    }
}

impl ZProbe {
    pub fn new(set: &PlaneSet, x: &[u32]) -> Self {
        let n = x.len();
        let hood = Neighbourhood::new(set, x);
        let offsets = z_offsets(n);
        let units: Vec<Units> = offsets.iter().map(|&(p, q)| Units::of(p, q)).collect();
        let (values, argmin) = units.iter().map(|u| hood.min_at(u.as_slice())).unzip();
        ZProbe {
            n,
            offsets,
            units,
            values,
            argmin,
            hood,
        }
    }

    /// Index of offset `(p, q)` (with `p <= q`) in `offsets`.
    fn index(&self, p: Option<usize>, q: Option<usize>) -> usize {
        let rank = |v: Option<usize>| v.map_or(0, |s| s + 1);
        let (p, q) = (rank(p), rank(q));
        let m = self.n + 1;
        // rows p = 0.. hold (m - p) entries each
        p * m - p * (p.saturating_sub(1)) / 2 + (q - p)
    }

    /// Value at `x + 1_p + 1_q`.
    pub fn value(&self, p: Option<usize>, q: Option<usize>) -> f64 {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        self.values[self.index(p, q)]
    }

    /// Values at `y + {0, 1_1, ..., 1_n}` for `y = x + 1_p`.
    pub fn successors_of(&self, p: Option<usize>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n + 1);
        out.push(self.value(p, None));
        for s in 0..self.n {
            out.push(self.value(p, Some(s)));
        }
        out
    }

    /// Pairwise test over `Z(x)`; with `room = Some(x_max - x)` pairs with
    /// a point outside the box are skipped (the function is `-inf` there).
    pub fn is_submodular_within(&self, room: Option<&[u32]>) -> bool {
        let m = self.offsets.len();
        let inside = |u: &Units| room.is_none_or(|r| u.fits(r));
        let check = |i: usize| -> bool {
            let a = &self.units[i];
            if !inside(a) {
                return true;
            }
            for k in i + 1..m {
                let b = &self.units[k];
                if !inside(b) {
                    continue;
                }
                let Some((join, meet)) = join_meet(a.as_slice(), b.as_slice()) else {
                    continue;
                };
                let meet = match meet {
                    (Some(p), None) => self.index(None, Some(p)),
                    (p, q) => self.index(p, q),
                };
                let bound = self.values[i] + self.values[k] - self.values[meet] + SUBMODULAR_TOL;
                let join = &join.0[..join.1];
                // planes active at either point usually certify the join
                if self.hood.plane_at(self.argmin[i], join) <= bound
                    || self.hood.plane_at(self.argmin[k], join) <= bound
                {
                    continue;
                }
                if self.hood.min_at(join).0 > bound {
                    return false;
                }
            }
            true
        };
        if m > 64 {
            (0..m).into_par_iter().all(check)
        } else {
            (0..m).all(check)
        }
    }
}

type Meet = (Option<usize>, Option<usize>);

/// Join and meet of two sorted unit multisets, or `None` when comparable.
fn join_meet(a: &[usize], b: &[usize]) -> Option<(([usize; 4], usize), Meet)> {
    let mut join = [0usize; 4];
    let mut jl = 0;
    let mut meet = [None, None];
    let mut ml = 0;
    let (mut i, mut k) = (0, 0);
    while i < a.len() && k < b.len() {
        if a[i] == b[k] {
            join[jl] = a[i];
            meet[ml] = Some(a[i]);
            jl += 1;
            ml += 1;
            i += 1;
            k += 1;
        } else if a[i] < b[k] {
            join[jl] = a[i];
            jl += 1;
            i += 1;
        } else {
            join[jl] = b[k];
            jl += 1;
            k += 1;
        }
    }
    for &s in a[i..].iter().chain(&b[k..]) {
        join[jl] = s;
        jl += 1;
    }
    if ml == a.len() || ml == b.len() {
        return None;
    }
    Some(((join, jl), (meet[0], meet[1])))
}
