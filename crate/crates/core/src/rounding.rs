//! Biased hyperplane rounding.
//!
//! Each free vertex `i` has an SDP bias `μ_i` and a unit direction `w̄_i`
//! orthogonal to the constant vector. A Gaussian `ξ_i = ⟨g, w̄_i⟩` is drawn
//! jointly for all vertices and `i` is labeled `+1` (bit 1) iff
//! `ξ_i ≤ Φ⁻¹(f_R(μ_i)/2 + 1/2)`, so `E[y_i] = f_R(μ_i)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::instance::{Assignment, PartialAssignment};
use crate::lasserre::MomentSolution;

pub const DEGENERATE_FLOOR: f64 = 1e-12;
pub const GRAM_TOL: f64 = 1e-7;
pub const DEFAULT_NUM_SAMPLES: usize = 200;

/// Odd polynomial `f(x) = Σ c_j x^{d_j}` with odd `d_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingPoly {
    pub terms: Vec<(u32, f64)>,
}

impl RoundingPoly {
    /// `0.79x + 0.07x³ + 0.14x⁷`.
    pub fn standard() -> Self {
        Self { terms: vec![(1, 0.79), (3, 0.07), (7, 0.14)] }
    }

    pub fn identity() -> Self {
        Self { terms: vec![(1, 1.0)] }
    }

    /// Custom coefficients; `coefs[j]` multiplies `x^{2j+1}`. Nonnegative
    /// coefficients summing to at most one keep `f` increasing with `|f| ≤ 1`.
    pub fn from_odd_coefficients(coefs: &[f64]) -> Result<Self> {
        if coefs.is_empty() || coefs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParams("rounding coefficients must be finite and nonnegative".into()));
        }
        let sum: f64 = coefs.iter().sum();
        if !(sum > 0.0 && sum <= 1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!("rounding coefficients sum to {sum}, need (0, 1]")));
        }
        Ok(Self { terms: coefs.iter().enumerate().filter(|(_, c)| **c > 0.0).map(|(j, &c)| (2 * j as u32 + 1, c)).collect() })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(d, c)| c * x.powi(d as i32)).sum::<f64>().clamp(-1.0, 1.0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(d, c)| c * d as f64 * x.powi(d as i32 - 1)).sum()
    }

    /// `Φ⁻¹(f(μ)/2 + 1/2)`, infinite at `f(μ) = ±1`.
    pub fn threshold(&self, mu: f64) -> f64 {
        phi_inv(self.eval(mu.clamp(-1.0, 1.0)) / 2.0 + 0.5)
    }
}

/// The default rounding function.
pub fn f_r(x: f64) -> f64 {
    RoundingPoly::standard().eval(x)
}

pub fn threshold(mu: f64) -> f64 {
    RoundingPoly::standard().threshold(mu)
}

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(Normal::standard)
}

pub fn phi(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
    }
}

pub fn phi_density(x: f64) -> f64 {
    if x.is_finite() {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    } else {
        0.0
    }
}

/// Standard normal quantile, polished by Newton steps.
pub fn phi_inv(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = std_normal().inverse_cdf(u);
    for _ in 0..2 {
        let d = phi_density(x);
        if d < 1e-300 {
            break;
        }
        // Work in the smaller tail to keep the residual accurate.
        let r = if x > 0.0 { (1.0 - u) - phi(-x) } else { phi(x) - u };
        x -= r / d;
    }
    x
}

/// Gauss-Legendre nodes and weights on `[−1, 1]` for the positive half.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..n / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn gl_table(ng: usize) -> &'static [(f64, f64)] {
    static T: OnceLock<[Vec<(f64, f64)>; 3]> = OnceLock::new();
    &T.get_or_init(|| [gauss_legendre(6), gauss_legendre(12), gauss_legendre(20)])[ng]
}

/// `Pr[X > h, Y > k]` for a standard bivariate normal with correlation `r`,
/// following Genz's adaptation of the Drezner-Wesolowsky method.
fn bvnd(h: f64, k: f64, r: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let ng = if r.abs() < 0.3 {
        0
    } else if r.abs() < 0.75 {
        1
    } else {
        2
    };
    let nodes = gl_table(ng);
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for &(x, w) in nodes {
            for s in [x, -x] {
                let sn = (asr * (s + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn * asr / (2.0 * two_pi) + phi(-h) * phi(-k)
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            bvn = a * (-(bs / as_ + hk) / 2.0).exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            if hk > -160.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp() * two_pi.sqrt() * phi(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for &(x, w) in nodes {
                for s in [-x, x] {
                    let xs = (a * (s + 1.0)).powi(2);
                    let rs = (1.0 - xs).sqrt();
                    bvn += a
                        * w
                        * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                            - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
            bvn = -bvn / two_pi;
        }
        if r > 0.0 {
            bvn + phi(-h.max(k))
        } else {
            -bvn + (phi(-h) - phi(-k)).max(0.0)
        }
    }
}

/// Bivariate normal CDF `Pr[X ≤ h, Y ≤ k]` with correlation `rho`.
pub fn phi2(h: f64, k: f64, rho: f64) -> f64 {
    let rho = rho.clamp(-1.0, 1.0);
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return phi(k);
    }
    if k == f64::INFINITY {
        return phi(h);
    }
    if rho >= 1.0 {
        return phi(h.min(k));
    }
    if rho <= -1.0 {
        return (phi(h) + phi(k) - 1.0).max(0.0);
    }
    bvnd(-h, -k, rho).clamp(0.0, 1.0)
}

/// Probability that the rounding separates an edge with biases `μ_i, μ_j`
/// and direction correlation `ρ̄`.
pub fn edge_cut_probability_with(f: &RoundingPoly, mu_i: f64, mu_j: f64, rho: f64) -> f64 {
    let (ti, tj) = (f.threshold(mu_i), f.threshold(mu_j));
    (phi(ti) + phi(tj) - 2.0 * phi2(ti, tj, rho)).clamp(0.0, 1.0)
}

pub fn edge_cut_probability(mu_i: f64, mu_j: f64, rho: f64) -> f64 {
    edge_cut_probability_with(&RoundingPoly::standard(), mu_i, mu_j, rho)
}

/// SDP contribution `(1 − σ)/2` with `σ = μ_iμ_j + ρ̄√((1−μ_i²)(1−μ_j²))`.
pub fn edge_sdp_value(mu_i: f64, mu_j: f64, rho: f64) -> f64 {
    let sigma = mu_i * mu_j + rho * ((1.0 - mu_i * mu_i).max(0.0) * (1.0 - mu_j * mu_j).max(0.0)).sqrt();
    (1.0 - sigma) / 2.0
}

/// Whether `(μ_i, μ_j, ρ̄)` induces a nonnegative pair distribution:
/// `1 + aμ_i + bμ_j + abσ ≥ 0` for all signs `a, b`.
pub fn config_is_valid(mu_i: f64, mu_j: f64, rho: f64, tol: f64) -> bool {
    let sigma = 1.0 - 2.0 * edge_sdp_value(mu_i, mu_j, rho);
    [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].iter().all(|&(a, b)| 1.0 + a * mu_i + b * mu_j + a * b * sigma >= -tol)
}

/// Biases and unit directions of the free vertices. Row `i` of `directions`
/// is `w̄_i`, or zero when `1 − μ_i²` is below the degenerate floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingInputs {
    pub vertices: Vec<usize>,
    pub mu: Vec<f64>,
    pub directions: DMatrix<f64>,
}

/// Rows of a PSD factor `F` with `F Fᵀ = gram`; negative eigenvalues down to
/// `−GRAM_TOL` are dropped.
fn psd_factor(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = gram.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let sym = (gram + gram.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -GRAM_TOL {
        return Err(Error::GramNotPsd(min));
    }
    let mut f = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    Ok(f)
}

fn normalize_rows(f: &mut DMatrix<f64>, keep: impl Fn(usize) -> bool) {
    for i in 0..f.nrows() {
        let norm = f.row(i).norm();
        if keep(i) && norm > 0.0 {
            f.row_mut(i).unscale_mut(norm);
        } else {
            f.row_mut(i).fill(0.0);
        }
    }
}

impl RoundingInputs {
    /// From biases and the Gram matrix of the unit directions.
    pub fn from_gram(vertices: Vec<usize>, mu: Vec<f64>, gram: &DMatrix<f64>) -> Result<Self> {
        if mu.len() != vertices.len() || gram.nrows() != mu.len() || gram.ncols() != mu.len() {
            return Err(Error::InvalidParams("rounding input dimensions disagree".into()));
        }
        let mut f = psd_factor(gram)?;
        normalize_rows(&mut f, |i| 1.0 - mu[i] * mu[i] >= DEGENERATE_FLOOR);
        Ok(Self { vertices, mu, directions: f })
    }

    /// From a solution: `⟨w_i, w_j⟩ = ⟨v_i, v_j⟩ − μ_iμ_j` is factored before
    /// normalizing, so tiny residual negativity is not amplified by `1/(1−μ²)`.
    pub fn from_solution(sol: &MomentSolution) -> Result<Self> {
        let vertices = sol.free().to_vec();
        let m = vertices.len();
        let mu: Vec<f64> = vertices.iter().map(|&v| sol.bias(v)).collect();
        let mut w = DMatrix::zeros(m, m);
        for a in 0..m {
            w[(a, a)] = 1.0 - mu[a] * mu[a];
            for b in 0..a {
                let x = sol.vector_inner(vertices[a], vertices[b]) - mu[a] * mu[b];
                w[(a, b)] = x;
                w[(b, a)] = x;
            }
        }
        let mut f = psd_factor(&w)?;
        normalize_rows(&mut f, |i| 1.0 - mu[i] * mu[i] >= DEGENERATE_FLOOR);
        Ok(Self { vertices, mu, directions: f })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `⟨w̄_i, w̄_j⟩` as realized by the directions.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.directions * self.directions.transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingOutcome {
    /// `±1` labels aligned with `RoundingInputs::vertices`.
    pub y: Vec<i8>,
    /// `g01[i] = 1` iff `y[i] = +1`.
    pub g01: Vec<u8>,
    pub sample_seed: u64,
    pub sample_index: u64,
}

impl RoundingOutcome {
    /// Total assignment: the rounded vertices on top of a fixing that covers
    /// every other vertex (unlisted vertices default to 0).
    pub fn assignment(&self, vertices: &[usize], fixing: &PartialAssignment) -> Assignment {
        let mut f: Vec<u8> = fixing.0.iter().map(|b| b.unwrap_or(0)).collect();
        for (&v, &b) in vertices.iter().zip(&self.g01) {
            f[v] = b;
        }
        Assignment(f)
    }
}

/// Seeded stream for sample `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn round_once_with(inputs: &RoundingInputs, f: &RoundingPoly, seed: u64, index: u64) -> RoundingOutcome {
    let mut rng = sample_rng(seed, index);
    let d = inputs.directions.ncols();
    let g = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
    let xi = &inputs.directions * g;
    let mut y = Vec::with_capacity(inputs.len());
    let mut g01 = Vec::with_capacity(inputs.len());
    for (i, &mu) in inputs.mu.iter().enumerate() {
        let up = xi[i] <= f.threshold(mu);
        y.push(if up { 1 } else { -1 });
        g01.push(u8::from(up));
    }
    RoundingOutcome { y, g01, sample_seed: seed, sample_index: index }
}

pub fn round_once(inputs: &RoundingInputs, seed: u64) -> RoundingOutcome {
    round_once_with(inputs, &RoundingPoly::standard(), seed, 0)
}

/// `count` independent outcomes, sample `i` drawn from stream `(seed, i)`.
pub fn round_many(inputs: &RoundingInputs, f: &RoundingPoly, seed: u64, count: usize) -> Vec<RoundingOutcome> {
    (0..count as u64).into_par_iter().map(|i| round_once_with(inputs, f, seed, i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub mu: f64,
    pub expected: f64,
    pub empirical: f64,
    pub sigma: f64,
    pub within: bool,
}

/// Empirical `E[y]` of a single rounded vertex against `f(μ)`, with a
/// `z`-sigma binomial band.
pub fn marginal_check(f: &RoundingPoly, mu: f64, samples: usize, z: f64, seed: u64) -> MarginalCheck {
    let inputs = RoundingInputs { vertices: vec![0], mu: vec![mu], directions: DMatrix::from_element(1, 1, 1.0) };
    let mut rng = sample_rng(seed, 0);
    let t = f.threshold(mu);
    let ones = (0..samples)
        .filter(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            inputs.directions[(0, 0)] * g <= t
        })
        .count();
    let p = f.eval(mu) / 2.0 + 0.5;
    let empirical = 2.0 * ones as f64 / samples as f64 - 1.0;
    let sigma = 2.0 * (p * (1.0 - p) / samples as f64).sqrt();
    let expected = f.eval(mu);
    MarginalCheck { mu, expected, empirical, sigma, within: (empirical - expected).abs() <= z * sigma + 1e-12 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Composite Simpson quadrature of `∫_{−∞}^h φ(x) Φ((k − ρx)/√(1−ρ²)) dx`.
    fn phi2_quadrature(h: f64, k: f64, rho: f64) -> f64 {
        let lo = -12.0;
        let hi = h.min(12.0);
        let n = 20000;
        let step = (hi - lo) / n as f64;
        let s = (1.0 - rho * rho).sqrt();
        let g = |x: f64| phi_density(x) * phi((k - rho * x) / s);
        let mut acc = g(lo) + g(hi);
        for i in 1..n {
            acc += g(lo + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * step / 3.0
    }

    #[test]
    fn rounding_polynomial_values() {
        assert_eq!(f_r(0.0), 0.0);
        assert_abs_diff_eq!(f_r(1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f_r(0.5), 0.40484375, epsilon = 1e-15);
        assert_abs_diff_eq!(f_r(-0.5), -0.40484375, epsilon = 1e-15);
    }

    #[test]
    fn thresholds() {
        assert_eq!(threshold(0.0), 0.0);
        assert_eq!(threshold(1.0), f64::INFINITY);
        assert_eq!(threshold(-1.0), f64::NEG_INFINITY);
        let t = threshold(0.5);
        // Independent inversion: bisection on Φ.
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if phi(mid) < 0.702421875 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(t, lo, epsilon = 1e-12);
    }

    #[test]
    fn quantile_roundtrip() {
        for &u in &[1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
            let x = phi_inv(u);
            let back = if x > 0.0 { 1.0 - phi(-x) } else { phi(x) };
            assert!((back - u).abs() <= 1e-12 * u.min(1.0 - u).max(1e-3), "u={u} back={back}");
        }
    }

    #[test]
    fn phi2_against_quadrature_and_arcsine() {
        for &rho in &[-0.99, -0.95, -0.8, -0.5, -0.1, 0.0, 0.2, 0.6, 0.9, 0.93, 0.999] {
            let arcsine = 0.25 + f64::asin(rho) / (2.0 * PI);
            assert_abs_diff_eq!(phi2(0.0, 0.0, rho), arcsine, epsilon = 1e-13);
            for &(h, k) in &[(-1.3, 0.4), (0.7, 2.1), (1.5, -0.2), (-2.5, -2.0), (0.3, 0.3)] {
                let q = phi2_quadrature(h, k, rho);
                assert_abs_diff_eq!(phi2(h, k, rho), q, epsilon = 1e-9);
            }
        }
        assert_abs_diff_eq!(phi2(0.0, 0.0, 0.5), 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(phi2(-0.4, 0.9, 1.0), phi(-0.4), epsilon = 1e-15);
    }

    #[test]
    fn cut_probability_examples() {
        assert_abs_diff_eq!(edge_cut_probability(0.0, 0.0, 0.0), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(edge_cut_probability(0.0, 0.0, -1.0), 1.0, epsilon = 1e-14);
        for &theta in &[0.3, 1.0, 2.0, 2.9] {
            assert_abs_diff_eq!(edge_cut_probability(0.0, 0.0, f64::cos(theta)), theta / PI, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(edge_cut_probability(1.0, -1.0, 0.3), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(edge_cut_probability(1.0, 1.0, 0.3), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn deterministic_and_antipodal_rounding() {
        let gram = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let inp = RoundingInputs::from_gram(vec![0, 1], vec![0.0, 0.0], &gram).unwrap();
        for i in 0..500 {
            let o = round_once_with(&inp, &RoundingPoly::standard(), 3, i);
            assert_ne!(o.y[0], o.y[1]);
        }
        let inp = RoundingInputs::from_gram(vec![0, 1, 2], vec![1.0; 3], &DMatrix::identity(3, 3)).unwrap();
        for i in 0..100 {
            assert_eq!(round_once_with(&inp, &RoundingPoly::standard(), 9, i).y, vec![1, 1, 1]);
        }
    }

    #[test]
    fn orthogonal_directions_split_half_the_time() {
        let inp = RoundingInputs::from_gram(vec![0, 1], vec![0.0, 0.0], &DMatrix::identity(2, 2)).unwrap();
        let n = 100_000;
        let cut = round_many(&inp, &RoundingPoly::standard(), 11, n).iter().filter(|o| o.y[0] != o.y[1]).count();
        let p = cut as f64 / n as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "p={p}");
    }

    #[test]
    fn cut_probability_matches_monte_carlo() {
        let f = RoundingPoly::standard();
        for &(mi, mj, rho) in &[(0.3, -0.4, 0.2), (0.8, 0.1, -0.7), (-0.5, -0.6, 0.9)] {
            let gram = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
            let inp = RoundingInputs::from_gram(vec![0, 1], vec![mi, mj], &gram).unwrap();
            let n = 100_000;
            let cut = round_many(&inp, &f, 5, n).iter().filter(|o| o.y[0] != o.y[1]).count() as f64 / n as f64;
            let p = edge_cut_probability_with(&f, mi, mj, rho);
            assert!((cut - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-3, "{cut} vs {p}");
        }
    }

    #[test]
    fn gram_not_psd_is_rejected() {
        let gram = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
        assert!(matches!(RoundingInputs::from_gram(vec![0, 1], vec![0.0, 0.0], &gram), Err(Error::GramNotPsd(_))));
    }

    #[test]
    fn high_bias_lock_in() {
        let p = f_r(1.0 - 1e-6) / 2.0 + 0.5;
        assert!(p >= 1.0 - 1e-4);
        assert!(phi(threshold(1.0 - 1e-6)) >= 1.0 - 1e-4);
    }

    #[test]
    fn grid_ratio_spot_check() {
        let mut worst = f64::INFINITY;
        for a in -9..=9 {
            for b in -9..=9 {
                for c in -10..=10 {
                    let (mi, mj, rho) = (a as f64 / 10.0, b as f64 / 10.0, c as f64 / 10.0);
                    let q = edge_sdp_value(mi, mj, rho);
                    if q < 1e-3 || !config_is_valid(mi, mj, rho, 0.0) {
                        continue;
                    }
                    worst = worst.min(edge_cut_probability(mi, mj, rho) / q);
                }
            }
        }
        assert!(worst >= 0.878, "worst grid ratio {worst}");
    }

    #[test]
    fn solution_inputs_have_unit_directions() {
        let sol = MomentSolution::product(vec![0, 1, 2], 2, PartialAssignment::empty(3), |v| [0.5, 0.8, 1.0][v]).unwrap();
        let inp = RoundingInputs::from_solution(&sol).unwrap();
        let g = inp.gram();
        assert_abs_diff_eq!(g[(0, 0)], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(g[(1, 1)], 1.0, epsilon = 1e-7);
        assert_eq!(g[(2, 2)], 0.0);
        assert_abs_diff_eq!(inp.mu[1], 0.6, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn rounding_polynomial_is_odd_and_increasing(x in -1.0f64..1.0, dx in 1e-6f64..0.5) {
            let f = RoundingPoly::standard();
            prop_assert!((f.eval(-x) + f.eval(x)).abs() < 1e-15);
            let y = (x + dx).min(1.0);
            if y > x {
                prop_assert!(f.eval(y) > f.eval(x));
            }
            prop_assert!(f.derivative(x) >= 0.79 - 1e-15);
        }

        #[test]
        fn phi2_is_monotone(h in -3.0f64..3.0, k in -3.0f64..3.0, rho in -0.99f64..0.99, d in 0.0f64..0.5) {
            let base = phi2(h, k, rho);
            prop_assert!(phi2(h + d, k, rho) >= base - 1e-12);
            prop_assert!(phi2(h, k + d, rho) >= base - 1e-12);
            prop_assert!(phi2(h, k, (rho + d).min(1.0)) >= base - 1e-12);
        }
    }
}
