//! Certified branch and bound for the per-edge rounding ratio `p ≥ α·q`.
//!
//! Boxes live in `(μ_i, μ_j, ρ̄)` space. A box is discharged when the
//! quadrant constraints leave no valid point in it, when its whole `q` range
//! lies below the corner floor, or when a certified lower bound of
//! `g = p − α·q` is nonnegative. Two lower bounds are tried: the corner form,
//! from the monotonicity of `p` in the thresholds and in `ρ̄`, and the
//! mean-value form `g(c) + Σ ∂g(X)·(X − c)`.
//!
//! When a direction vanishes (`|μ| = 1`) the rounding uses `ρ̄ = 0`; the
//! faces `|μ| = 1` are therefore represented by their `ρ̄ = 0` points.

pub mod gaussian;
pub mod interval;

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rounding::{self, RoundingPoly};
use gaussian::{binormal_density, interval_phi, phi2_point, phi2_point_tol, phi_inv_lower, phi_inv_upper};
pub use interval::Interval;
use interval::{down, up};

pub const SCHEMA_VERSION: u32 = 1;
/// Undecided boxes kept verbatim in a failed certificate.
const FRONTIER_DUMP: usize = 256;
/// Share of an estimated margin granted to each quadrature remainder.
const TOL_SHARE: f64 = 0.05;

/// Axis-aligned region of `(μ_i, μ_j, ρ̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config3 {
    pub mu_i: Interval,
    pub mu_j: Interval,
    pub rho: Interval,
}

impl Config3 {
    pub fn full() -> Self {
        Self { mu_i: Interval::new(-1.0, 1.0), mu_j: Interval::new(-1.0, 1.0), rho: Interval::new(-1.0, 1.0) }
    }

    pub fn point(mu_i: f64, mu_j: f64, rho: f64) -> Self {
        Self { mu_i: Interval::point(mu_i), mu_j: Interval::point(mu_j), rho: Interval::point(rho) }
    }

    fn dim(&self, d: usize) -> Interval {
        match d {
            0 => self.mu_i,
            1 => self.mu_j,
            _ => self.rho,
        }
    }

    fn with_dim(mut self, d: usize, x: Interval) -> Self {
        match d {
            0 => self.mu_i = x,
            1 => self.mu_j = x,
            _ => self.rho = x,
        }
        self
    }

    fn center(&self) -> [f64; 3] {
        [self.mu_i.mid(), self.mu_j.mid(), self.rho.mid()]
    }

    pub fn volume(&self) -> f64 {
        self.mu_i.width() * self.mu_j.width() * self.rho.width()
    }

    pub fn contains(&self, mu_i: f64, mu_j: f64, rho: f64) -> bool {
        self.mu_i.contains(mu_i) && self.mu_j.contains(mu_j) && self.rho.contains(rho)
    }

    /// Halves along dimension `d`.
    fn split(&self, d: usize) -> (Config3, Config3) {
        let x = self.dim(d);
        let m = x.mid();
        (self.with_dim(d, Interval::new(x.lo, m)), self.with_dim(d, Interval::new(m, x.hi)))
    }

    fn sines(&self) -> (Interval, Interval) {
        ((Interval::ONE - self.mu_i.sqr()).sqrt(), (Interval::ONE - self.mu_j.sqr()).sqrt())
    }

    /// `σ = μ_iμ_j + ρ̄√(1−μ_i²)√(1−μ_j²)`.
    pub fn sigma(&self) -> Interval {
        (Interval::ONE - self.q().scale(2.0)).clamp_to(-1.0, 1.0)
    }

    /// SDP contribution `q = (1 − σ)/2`, written as
    /// `sin²((a_i − a_j)/2) + (1 − ρ̄)·s_i·s_j/2` with `a = acos μ`, so each
    /// variable enters a monotone factor once.
    pub fn q(&self) -> Interval {
        let (si, sj) = self.sines();
        let (ai, aj) = (arccos(self.mu_i), arccos(self.mu_j));
        let d = ai - aj;
        let lo = if d.contains_zero() { 0.0 } else { d.lo.abs().min(d.hi.abs()) };
        let hi = (0.5 * d.mag()).min(std::f64::consts::FRAC_PI_2);
        let half = Interval { lo: (0.5 * lo).min(hi), hi };
        let chord = half.sin_monotone().clamp_to(0.0, 1.0).sqr();
        let gap = (Interval::ONE - self.rho).clamp_to(0.0, 2.0);
        (chord + (gap * si * sj).scale(0.5)).clamp_to(0.0, 1.0)
    }

    /// Certified check that every quadrant probability is nonnegative on the
    /// whole box.
    pub fn certainly_valid(&self) -> bool {
        let (si, sj) = self.sines();
        let prod = self.rho * si * sj;
        [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].iter().all(|&(a, b)| {
            let side_i = Interval::ONE + self.mu_i.scale(a);
            let side_j = Interval::ONE + self.mu_j.scale(b);
            (side_i * side_j + prod.scale(a * b)).lo >= 0.0
        })
    }

    /// Narrows `ρ̄` to a range that keeps every valid point of the box,
    /// or `None` when no point is valid. Uses `ρ̄ ≥ −min(P, 1/P)` and
    /// `ρ̄ ≤ min(R, 1/R)` with `P = A_iA_j`, `R = A_i/A_j`,
    /// `A(μ) = √((1+μ)/(1−μ))`.
    pub fn contract(&self) -> Option<Config3> {
        let (ail, aih) = (odds_root(self.mu_i.lo, false), odds_root(self.mu_i.hi, true));
        let (ajl, ajh) = (odds_root(self.mu_j.lo, false), odds_root(self.mu_j.hi, true));
        let lower = match (down(ail * ajl), up(aih * ajh)) {
            (l, h) if l.is_nan() || h.is_nan() => -1.0,
            (l, h) => -peak(l.max(0.0), h),
        };
        let upper = match (down(ail / ajh), up(aih / ajl)) {
            (l, h) if l.is_nan() || h.is_nan() => 1.0,
            (l, h) => peak(l.max(0.0), h),
        };
        let rho = self.rho.intersect(&Interval { lo: lower, hi: upper })?;
        Some(Config3 { rho, ..*self })
    }
}

/// `acos` over an interval inside `[−1, 1]`; `acos` is decreasing.
fn arccos(mu: Interval) -> Interval {
    let mu = mu.clamp_to(-1.0, 1.0);
    Interval { lo: down(mu.hi.acos()).max(0.0), hi: up(mu.lo.acos()).min(up(std::f64::consts::PI)) }
}

/// `√((1+μ)/(1−μ))` rounded down or up.
fn odds_root(mu: f64, upward: bool) -> f64 {
    if mu >= 1.0 {
        return f64::INFINITY;
    }
    if mu <= -1.0 {
        return 0.0;
    }
    let r = ((1.0 + mu) / (1.0 - mu)).sqrt();
    if upward {
        up(up(r))
    } else {
        down(down(r)).max(0.0)
    }
}

/// Upper bound of `max min(x, 1/x)` over `[lo, hi] ⊆ [0, ∞]`.
fn peak(lo: f64, hi: f64) -> f64 {
    if lo <= 1.0 && 1.0 <= hi {
        1.0
    } else if hi < 1.0 {
        up(hi).min(1.0)
    } else {
        up(1.0 / lo).min(1.0)
    }
}

/// The rounding polynomial with enclosed coefficients.
#[derive(Debug, Clone)]
pub struct CertifiedPoly {
    terms: Vec<(u32, Interval)>,
    sum: Interval,
}

impl CertifiedPoly {
    pub fn new(f: &RoundingPoly) -> Result<Self> {
        if f.terms.is_empty() {
            return Err(Error::InvalidParams("rounding polynomial has no terms".into()));
        }
        for &(d, c) in &f.terms {
            if d % 2 == 0 || !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidParams(format!("term {c}·x^{d} is not an odd nonnegative monomial")));
            }
        }
        let terms: Vec<(u32, Interval)> = f.terms.iter().map(|&(d, c)| (d, Interval::around(c))).collect();
        let sum = terms.iter().fold(Interval::ZERO, |acc, &(_, c)| acc + c);
        if sum.lo > 1.0 || !(sum.hi > 0.0) {
            return Err(Error::InvalidParams(format!("rounding coefficients sum to {}, need (0, 1]", sum.mid())));
        }
        Ok(Self { terms, sum })
    }

    fn at(&self, m: f64) -> Interval {
        let x = Interval::point(m);
        self.terms.iter().fold(Interval::ZERO, |acc, &(d, c)| acc + c * x.powi(d)).clamp_to(-1.0, 1.0)
    }

    /// `f` over an interval; `f` is nondecreasing.
    pub fn eval(&self, mu: Interval) -> Interval {
        Interval { lo: self.at(mu.lo).lo, hi: self.at(mu.hi).hi }
    }

    pub fn derivative(&self, mu: Interval) -> Interval {
        self.terms.iter().fold(Interval::ZERO, |acc, &(d, c)| acc + (c * mu.powi(d - 1)).scale(d as f64))
    }

    /// `1 − f(m)` for `m ≥ 0`, via `1 − m^d = (1 − m)(1 + … + m^{d−1})` so the
    /// enclosure stays relatively tight as `m → 1`.
    fn tail(&self, m: f64) -> Interval {
        let x = Interval::point(m);
        let gap = Interval::ONE - x;
        let mut acc = Interval::ONE - self.sum;
        for &(d, c) in &self.terms {
            let mut geo = Interval::ZERO;
            let mut pw = Interval::ONE;
            for _ in 0..d {
                geo = geo + pw;
                pw = pw * x;
            }
            acc = acc + c * gap * geo;
        }
        acc.clamp_to(0.0, 2.0)
    }

    /// Threshold `t(m) = Φ⁻¹(f(m)/2 + 1/2)` at a point.
    pub fn threshold_at(&self, m: f64) -> Interval {
        if m < 0.0 {
            return -self.threshold_at(-m);
        }
        // t = −Φ⁻¹(v) with v = (1 − f(m))/2.
        let v = self.tail(m).scale(0.5).clamp_to(0.0, 1.0);
        Interval { lo: -phi_inv_upper(v.hi), hi: -phi_inv_lower(v.lo) }
    }

    /// Threshold over an interval; `t` is nondecreasing.
    pub fn threshold(&self, mu: Interval) -> Interval {
        Interval { lo: self.threshold_at(mu.lo).lo, hi: self.threshold_at(mu.hi).hi }
    }
}

/// Lower bound of `p = Φ₂(t_i, −t_j; −ρ̄) + Φ₂(−t_i, t_j; −ρ̄)`; the first
/// term increases in `t_i`, the second in `t_j`, and both decrease in `ρ̄`.
fn p_lower(ti: Interval, tj: Interval, rho: f64, tol: f64) -> f64 {
    let a = phi2_point_tol(ti.lo, -tj.hi, -rho, tol);
    let b = phi2_point_tol(-ti.hi, tj.lo, -rho, tol);
    (a + b).lo.max(0.0)
}

fn p_upper(ti: Interval, tj: Interval, rho: f64, tol: f64) -> f64 {
    let a = phi2_point_tol(ti.hi, -tj.lo, -rho, tol);
    let b = phi2_point_tol(-ti.lo, tj.hi, -rho, tol);
    (a + b).hi.min(1.0)
}

/// Float estimate of [`p_lower`].
fn p_lower_estimate(ti: Interval, tj: Interval, rho: f64) -> f64 {
    rounding::phi2(ti.lo, -tj.hi, -rho) + rounding::phi2(-ti.hi, tj.lo, -rho)
}

/// Enclosures of the cut probability `p` and the SDP value `q` over a box,
/// for the given rounding polynomial. `p = A − 2B` with `A = Φ(t_i) + Φ(t_j)`
/// and `B = Φ₂(t_i, t_j; ρ̄)` gives one enclosure from the corners; the split
/// into the two disagreement events gives another, and both are intersected.
pub fn enclose_pq_with(f: &CertifiedPoly, b: &Config3) -> (Interval, Interval) {
    let (ti, tj) = (f.threshold(b.mu_i), f.threshold(b.mu_j));
    let (fi, fj) = (f.eval(b.mu_i), f.eval(b.mu_j));
    let rho = b.rho.clamp_to(-1.0, 1.0);
    let a_lo = Interval::ONE + (Interval::point(fi.lo) + Interval::point(fj.lo)).scale(0.5);
    let a_hi = Interval::ONE + (Interval::point(fi.hi) + Interval::point(fj.hi)).scale(0.5);
    let b_hi = phi2_point(ti.hi, tj.hi, rho.hi).hi;
    let b_lo = phi2_point(ti.lo, tj.lo, rho.lo).lo;
    let corner_lo = (a_lo - Interval::point(b_hi).scale(2.0)).lo;
    let corner_hi = (a_hi - Interval::point(b_lo).scale(2.0)).hi;
    let lo = corner_lo.max(p_lower(ti, tj, rho.hi, 0.0)).max(0.0);
    let hi = corner_hi.min(p_upper(ti, tj, rho.lo, 0.0)).min(1.0);
    (Interval { lo, hi: hi.max(lo) }, b.q())
}

/// [`enclose_pq_with`] for the default rounding polynomial.
pub fn enclose_pq(b: &Config3) -> (Interval, Interval) {
    let f = CertifiedPoly::new(&RoundingPoly::standard()).expect("default polynomial is valid");
    enclose_pq_with(&f, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProverConfig {
    pub alpha: f64,
    pub q_floor: f64,
    pub max_boxes: usize,
    pub max_depth: usize,
    pub rounding: RoundingPoly,
    /// Keep every discharged leaf in the certificate.
    pub record_leaves: bool,
    /// Stop after this many certified counterexamples.
    pub max_counterexamples: usize,
}

impl Default for ProverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.878,
            q_floor: 1e-4,
            max_boxes: 10_000_000,
            max_depth: 60,
            rounding: RoundingPoly::standard(),
            record_leaves: false,
            max_counterexamples: 8,
        }
    }
}

impl ProverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParams(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.q_floor >= 0.0 && self.q_floor < 1.0) {
            return Err(Error::InvalidParams(format!("q_floor = {} must lie in [0, 1)", self.q_floor)));
        }
        if self.max_boxes == 0 {
            return Err(Error::InvalidParams("max_boxes must be positive".into()));
        }
        if self.max_counterexamples == 0 {
            return Err(Error::InvalidParams("max_counterexamples must be positive".into()));
        }
        CertifiedPoly::new(&self.rounding).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafVerdict {
    Proved,
    ExcludedInvalid,
    ExcludedCorner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub region: Config3,
    pub verdict: LeafVerdict,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Proved,
    Counterexample,
    BudgetExhausted,
}

/// A valid configuration with `q ≥ q_floor` and certified `p − α·q < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub mu_i: f64,
    pub mu_j: f64,
    pub rho: f64,
    pub p: Interval,
    pub q: Interval,
    pub ratio_upper: f64,
    pub region: Config3,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProverStats {
    pub boxes: usize,
    pub proved_corner: usize,
    pub proved_mean_value: usize,
    pub excluded_invalid: usize,
    pub excluded_corner: usize,
    pub max_depth: usize,
    pub undecided: usize,
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub target_alpha: f64,
    pub q_floor: f64,
    pub rounding: RoundingPoly,
    pub verdict: Verdict,
    pub stats: ProverStats,
    /// Boxes discharged because their whole `q` range is below the floor.
    pub corner_leaves: Vec<Config3>,
    pub leaves: Option<Vec<Leaf>>,
    pub counterexamples: Vec<Counterexample>,
    /// Leading undecided boxes when the run stopped early.
    pub frontier: Vec<Config3>,
}

impl Certificate {
    pub fn is_proved(&self) -> bool {
        self.verdict == Verdict::Proved
    }

    /// `Ok` for a proof, otherwise the matching error.
    pub fn ensure_proved(&self) -> Result<()> {
        match self.verdict {
            Verdict::Proved => Ok(()),
            Verdict::Counterexample => Err(Error::Counterexample(self.counterexamples.len())),
            Verdict::BudgetExhausted => Err(Error::BudgetExhausted { boxes: self.stats.boxes, frontier: self.stats.undecided }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Invalid,
    Corner,
    ProvedCorner,
    ProvedMeanValue,
    Split(usize),
    Undecided,
}

/// Certified thresholds at the endpoints and midpoints of a generation.
struct Thresholds<'a> {
    f: &'a CertifiedPoly,
    table: HashMap<u64, Interval>,
}

impl<'a> Thresholds<'a> {
    fn build(f: &'a CertifiedPoly, boxes: &[Config3]) -> Self {
        let mut keys: Vec<f64> =
            boxes.iter().flat_map(|b| [b.mu_i.lo, b.mu_i.hi, b.mu_i.mid(), b.mu_j.lo, b.mu_j.hi, b.mu_j.mid()]).collect();
        keys.sort_by(f64::total_cmp);
        keys.dedup();
        let vals: Vec<Interval> = keys.par_iter().map(|&m| f.threshold_at(m)).collect();
        Self { f, table: keys.into_iter().map(f64::to_bits).zip(vals).collect() }
    }

    fn at(&self, m: f64) -> Interval {
        self.table.get(&m.to_bits()).copied().unwrap_or_else(|| self.f.threshold_at(m))
    }

    fn over(&self, mu: Interval) -> Interval {
        Interval { lo: self.at(mu.lo).lo, hi: self.at(mu.hi).hi }
    }
}

struct Prover {
    f: CertifiedPoly,
    alpha: f64,
    q_floor: f64,
    max_depth: usize,
}

impl Prover {
    /// Float estimate of `g` at a point from its certified thresholds.
    fn g_estimate(&self, ti: Interval, tj: Interval, c: [f64; 3]) -> f64 {
        let (a, b) = (ti.mid(), tj.mid());
        let p = rounding::phi2(a, -b, -c[2]) + rounding::phi2(-a, b, -c[2]);
        p - self.alpha * rounding::edge_sdp_value(c[0], c[1], c[2])
    }

    /// Float estimate of the monotone lower bound of `g` over a box.
    fn corner_estimate(&self, x: &Config3, t: &Thresholds) -> f64 {
        p_lower_estimate(t.over(x.mu_i), t.over(x.mu_j), x.rho.hi) - self.alpha * x.q().hi
    }

    /// `Σ_d ∂g(X)·(X_d − c_d)`, or `None` when `g` is not smooth on `X`.
    fn spread(&self, x: &Config3, ti: Interval, tj: Interval, c: [f64; 3]) -> Option<Interval> {
        let (si, sj) = x.sines();
        let r2 = Interval::ONE - x.rho.sqr();
        if !(si.lo > 0.0 && sj.lo > 0.0 && r2.lo > 0.0 && ti.is_finite() && tj.is_finite()) {
            return None;
        }
        let sr = r2.sqrt();
        let half_alpha = 0.5 * self.alpha;
        let zi = (tj - x.rho * ti) / sr;
        let zj = (ti - x.rho * tj) / sr;
        let gi = (self.f.derivative(x.mu_i).scale(0.5) * (Interval::ONE - interval_phi(zi).scale(2.0)))
            + (x.mu_j - x.rho * x.mu_i * sj / si).scale(half_alpha);
        let gj = (self.f.derivative(x.mu_j).scale(0.5) * (Interval::ONE - interval_phi(zj).scale(2.0)))
            + (x.mu_i - x.rho * x.mu_j * si / sj).scale(half_alpha);
        let gr = -binormal_density(ti, tj, x.rho).scale(2.0) + (si * sj).scale(half_alpha);
        let offset = |d: usize| {
            let v = x.dim(d);
            Interval::new(v.lo, v.hi) - Interval::point(c[d])
        };
        let s = gi * offset(0) + gj * offset(1) + gr * offset(2);
        s.is_finite().then_some(s)
    }

    fn certified_counterexample(&self, x: &Config3, ti: Interval, tj: Interval) -> Option<Counterexample> {
        let c = x.center();
        let point = Config3::point(c[0], c[1], c[2]);
        let q = point.q();
        if q.lo < self.q_floor || !point.certainly_valid() {
            return None;
        }
        let p = Interval { lo: p_lower(ti, tj, c[2], 0.0), hi: p_upper(ti, tj, c[2], 0.0) };
        let g = p - q.scale(self.alpha);
        (g.hi < 0.0).then(|| Counterexample { mu_i: c[0], mu_j: c[1], rho: c[2], p, q, ratio_upper: up(p.hi / q.lo), region: *x })
    }

    /// Dimension whose width costs the monotone bound the most.
    fn split_dim(&self, b: &Config3, x: &Config3, t: &Thresholds, g_center: f64) -> usize {
        let c = x.center();
        let mut best = (f64::NEG_INFINITY, 0usize);
        for d in 0..3 {
            if !(b.dim(d).width() > 0.0) {
                continue;
            }
            let mut thin = Config3::point(c[0], c[1], c[2]);
            thin = thin.with_dim(d, x.dim(d));
            let loss = g_center - self.corner_estimate(&thin, t);
            let loss = if loss.is_nan() { f64::INFINITY } else { loss };
            // Ties go to the wider side so degenerate estimates still refine.
            let key = loss + 1e-15 * x.dim(d).width();
            if key > best.0 {
                best = (key, d);
            }
        }
        best.1
    }

    fn process(&self, b: &Config3, depth: usize, t: &Thresholds) -> (Outcome, Option<Counterexample>) {
        let Some(x) = b.contract() else {
            return (Outcome::Invalid, None);
        };
        let q = x.q();
        if q.hi < self.q_floor {
            return (Outcome::Corner, None);
        }
        let (ti, tj) = (t.over(x.mu_i), t.over(x.mu_j));
        let corner = p_lower_estimate(ti, tj, x.rho.hi) - self.alpha * q.hi;
        if corner > 0.0 {
            let lower = Interval::point(p_lower(ti, tj, x.rho.hi, TOL_SHARE * corner)) - q.scale(self.alpha);
            if lower.lo >= 0.0 {
                return (Outcome::ProvedCorner, None);
            }
        }
        let c = x.center();
        let (tci, tcj) = (t.at(c[0]), t.at(c[1]));
        let g_center = self.g_estimate(tci, tcj, c);
        if let Some(s) = self.spread(&x, ti, tj, c) {
            let margin = g_center + s.lo;
            if margin > 0.0 {
                let qc = Config3::point(c[0], c[1], c[2]).q();
                let g = Interval::point(p_lower(tci, tcj, c[2], TOL_SHARE * margin)) - qc.scale(self.alpha);
                if (g + s).lo >= 0.0 {
                    return (Outcome::ProvedMeanValue, None);
                }
            }
        }
        let counter = if g_center < 0.0 && rounding::config_is_valid(c[0], c[1], c[2], 0.0) {
            self.certified_counterexample(&x, tci, tcj)
        } else {
            None
        };
        if depth >= self.max_depth {
            return (Outcome::Undecided, counter);
        }
        (Outcome::Split(self.split_dim(b, &x, t, g_center)), counter)
    }
}

/// Runs the branch and bound over `[−1, 1]³`.
pub fn certify(cfg: &ProverConfig) -> Result<Certificate> {
    cfg.validate()?;
    let start = Instant::now();
    let prover = Prover { f: CertifiedPoly::new(&cfg.rounding)?, alpha: cfg.alpha, q_floor: cfg.q_floor, max_depth: cfg.max_depth };
    let mut stats = ProverStats::default();
    let mut corner_leaves = Vec::new();
    let mut leaves = cfg.record_leaves.then(Vec::new);
    let mut counterexamples = Vec::new();
    let mut undecided: Vec<Config3> = Vec::new();
    let mut undecided_count = 0usize;
    let mut generation = vec![Config3::full()];
    let mut depth = 0usize;
    let mut verdict = Verdict::Proved;
    while !generation.is_empty() {
        let room = cfg.max_boxes - stats.boxes;
        if room == 0 {
            verdict = Verdict::BudgetExhausted;
            undecided_count += generation.len();
            undecided.extend(generation.iter().take(FRONTIER_DUMP.saturating_sub(undecided.len())));
            break;
        }
        let rest = if generation.len() > room { generation.split_off(room) } else { Vec::new() };
        let thresholds = Thresholds::build(&prover.f, &generation);
        let results: Vec<(Outcome, Option<Counterexample>)> =
            generation.par_iter().map(|b| prover.process(b, depth, &thresholds)).collect();
        stats.boxes += generation.len();
        stats.max_depth = depth;
        let mut next = Vec::new();
        for (b, (outcome, counter)) in generation.iter().zip(results) {
            if let Some(c) = counter {
                if counterexamples.len() < cfg.max_counterexamples {
                    counterexamples.push(c);
                }
            }
            let leaf = match outcome {
                Outcome::Invalid => {
                    stats.excluded_invalid += 1;
                    Some(LeafVerdict::ExcludedInvalid)
                }
                Outcome::Corner => {
                    stats.excluded_corner += 1;
                    corner_leaves.push(*b);
                    Some(LeafVerdict::ExcludedCorner)
                }
                Outcome::ProvedCorner => {
                    stats.proved_corner += 1;
                    Some(LeafVerdict::Proved)
                }
                Outcome::ProvedMeanValue => {
                    stats.proved_mean_value += 1;
                    Some(LeafVerdict::Proved)
                }
                Outcome::Split(d) => {
                    let (l, r) = b.split(d);
                    next.push(l);
                    next.push(r);
                    None
                }
                Outcome::Undecided => {
                    undecided_count += 1;
                    if undecided.len() < FRONTIER_DUMP {
                        undecided.push(*b);
                    }
                    None
                }
            };
            if let (Some(v), Some(ls)) = (leaf, leaves.as_mut()) {
                ls.push(Leaf { region: *b, verdict: v, depth });
            }
        }
        if !rest.is_empty() {
            verdict = Verdict::BudgetExhausted;
            undecided_count += rest.len() + next.len();
            for b in rest.iter().chain(next.iter()) {
                if undecided.len() >= FRONTIER_DUMP {
                    break;
                }
                undecided.push(*b);
            }
            break;
        }
        if counterexamples.len() >= cfg.max_counterexamples {
            undecided_count += next.len();
            undecided.extend(next.iter().take(FRONTIER_DUMP.saturating_sub(undecided.len())));
            break;
        }
        generation = next;
        depth += 1;
    }
    if !counterexamples.is_empty() {
        verdict = Verdict::Counterexample;
    } else if undecided_count > 0 {
        verdict = Verdict::BudgetExhausted;
    }
    stats.undecided = undecided_count;
    stats.runtime_secs = start.elapsed().as_secs_f64();
    Ok(Certificate {
        schema_version: SCHEMA_VERSION,
        target_alpha: cfg.alpha,
        q_floor: cfg.q_floor,
        rounding: cfg.rounding.clone(),
        verdict,
        stats,
        corner_leaves,
        leaves,
        counterexamples,
        frontier: undecided,
    })
}
