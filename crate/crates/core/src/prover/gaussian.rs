//! Certified enclosures of `Φ`, `Φ⁻¹` and `Φ₂`.
//!
//! `Φ` uses the odd power series below `|x| = 4` with a geometric tail bound
//! and the Laplace continued fraction of the Mills ratio above, whose
//! consecutive convergents bracket the limit. `Φ₂` integrates
//! `∂Φ₂/∂ρ` after the substitution `r = sin θ`,
//! `Φ₂(h,k;ρ) = Φ(h)Φ(k) + (1/2π) ∫₀^{asin ρ} exp(−(h²+k²−2hk sin θ)/(2cos²θ)) dθ`,
//! with adaptive Taylor models whose Lagrange remainders are enclosed by the
//! same series arithmetic evaluated over the whole segment.

use std::f64::consts::PI;

use super::interval::{down, up, Interval};
use crate::error::{Error, Result};
use crate::rounding;

const SERIES_CUTOFF: f64 = 4.0;
/// Taylor order of the quadrature; the remainder uses coefficient `ORDER`.
const ORDER: usize = 12;
const QUAD_TOL: f64 = 1e-12;
const MIN_SEGMENT: f64 = 1e-7;
const NEAR_DEGENERATE: f64 = 1e-9;

fn pi() -> Interval {
    Interval::new(down(PI), up(PI))
}

fn inv_sqrt_2pi() -> Interval {
    Interval::around(0.398_942_280_401_432_7)
}

/// Standard normal density over an interval.
pub fn density(x: Interval) -> Interval {
    if !x.is_finite() {
        let m = if x.contains_zero() { 0.0 } else { x.lo.abs().min(x.hi.abs()) };
        let hi = if m.is_finite() { up((-0.5 * m * m).exp()) } else { 0.0 };
        return (Interval::new(0.0, hi) * inv_sqrt_2pi()).clamp_to(0.0, 1.0);
    }
    ((-x.sqr()).scale(0.5).exp() * inv_sqrt_2pi()).clamp_to(0.0, 1.0)
}

/// `Σ_{n≥0} y^{2n+1}/(2n+1)!!` for `0 ≤ y ≤ SERIES_CUTOFF`, tail included.
fn odd_series(y: f64) -> Interval {
    let yi = Interval::point(y);
    let y2 = yi.sqr();
    let mut term = yi;
    let mut sum = yi;
    let mut n = 0usize;
    loop {
        let r = y2 / Interval::point((2 * n + 3) as f64);
        if r.hi < 0.5 && term.hi <= 1e-18 * sum.lo.max(f64::MIN_POSITIVE) {
            let tail = term.hi * r.hi / (1.0 - r.hi);
            return sum + Interval::new(0.0, up(tail * 2.0));
        }
        term = term * r;
        sum = sum + term;
        n += 1;
        if n > 400 {
            return Interval::new(sum.lo, f64::INFINITY);
        }
    }
}

/// Mills ratio `R(y) = (1 − Φ(y))/φ(y)` for `y > 0` via two consecutive
/// continued-fraction convergents.
fn mills(y: f64) -> Interval {
    let yi = Interval::point(y);
    let convergent = |depth: usize| -> Interval {
        let mut t = yi;
        for j in (1..=depth).rev() {
            t = yi + Interval::point(j as f64) / t;
        }
        t.recip()
    };
    let mut depth = 8;
    loop {
        let (a, b) = (convergent(depth), convergent(depth + 1));
        let hull = a.hull(&b);
        if (a.mid() - b.mid()).abs() <= 1e-15 * hull.hi || depth >= 4096 {
            return hull;
        }
        depth *= 2;
    }
}

/// Enclosure of `1 − Φ(y)` for `y ≥ 0`.
fn upper_tail(y: f64) -> Interval {
    if y == f64::INFINITY {
        return Interval::ZERO;
    }
    if y <= SERIES_CUTOFF {
        let half = Interval::point(0.5);
        (half - density(Interval::point(y)) * odd_series(y)).clamp_to(0.0, 0.5)
    } else {
        (density(Interval::point(y)) * mills(y)).clamp_to(0.0, 0.5)
    }
}

/// Enclosure of `Φ(x)` at a point.
pub fn phi_point(x: f64) -> Interval {
    if x.is_nan() {
        return Interval::UNIT;
    }
    if x >= 0.0 {
        (Interval::ONE - upper_tail(x)).clamp_to(0.5, 1.0)
    } else {
        upper_tail(-x)
    }
}

/// `Φ` over an interval, by monotonicity.
pub fn interval_phi(x: Interval) -> Interval {
    Interval { lo: phi_point(x.lo).lo, hi: phi_point(x.hi).hi }
}

/// Largest found `x` with `Φ(x) ≤ u` certified, so `x ≤ Φ⁻¹(u)`.
pub fn phi_inv_lower(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = rounding::phi_inv(u);
    let mut step = 1e-15 * x.abs().max(1.0);
    while phi_point(x).hi > u {
        x -= step;
        step *= 4.0;
    }
    x
}

/// Smallest found `x` with `Φ(x) ≥ u` certified, so `x ≥ Φ⁻¹(u)`.
pub fn phi_inv_upper(u: f64) -> f64 {
    -phi_inv_lower_complement(u)
}

/// Lower bound of `Φ⁻¹(1 − u)`, i.e. `−Φ⁻¹(u)` bounded below.
fn phi_inv_lower_complement(u: f64) -> f64 {
    if u >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if u <= 0.0 {
        return f64::INFINITY;
    }
    // x ≤ −Φ⁻¹(u) iff Φ(−x) ≥ u.
    let mut x = -rounding::phi_inv(u);
    let mut step = 1e-15 * x.abs().max(1.0);
    while phi_point(-x).lo < u {
        x -= step;
        step *= 4.0;
    }
    x
}

/// `Φ⁻¹` over an interval inside `[0, 1]`.
pub fn interval_phi_inv(u: Interval) -> Result<Interval> {
    if !(u.lo >= 0.0 && u.hi <= 1.0) {
        return Err(Error::Domain(format!("quantile of [{}, {}]", u.lo, u.hi)));
    }
    Ok(Interval { lo: phi_inv_lower(u.lo), hi: phi_inv_upper(u.hi) })
}

type Series = [Interval; ORDER + 1];

fn inv_factorials() -> &'static [Interval; ORDER + 1] {
    use std::sync::OnceLock;
    static F: OnceLock<[Interval; ORDER + 1]> = OnceLock::new();
    F.get_or_init(|| {
        let mut out = [Interval::ONE; ORDER + 1];
        for j in 1..=ORDER {
            out[j] = out[j - 1] / Interval::point(j as f64);
        }
        out
    })
}

fn series_mul(a: &Series, b: &Series) -> Series {
    let mut out = [Interval::ZERO; ORDER + 1];
    for n in 0..=ORDER {
        let mut acc = Interval::ZERO;
        for j in 0..=n {
            acc = acc + a[j] * b[n - j];
        }
        out[n] = acc;
    }
    out
}

/// Taylor coefficients of the integrand around `θ` for any `θ` in `base`.
fn integrand_series(base: Interval, hh: Interval, hk2: Interval) -> Series {
    let f = inv_factorials();
    let (s0, c0) = (base.sin_monotone(), base.cos_half_period());
    let mut sin = [Interval::ZERO; ORDER + 1];
    for j in 0..=ORDER {
        let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let from = if j % 2 == 0 { s0 } else { c0 };
        sin[j] = (from * f[j]).scale(sign);
    }
    let s2 = series_mul(&sin, &sin);
    let mut den = [Interval::ZERO; ORDER + 1];
    let mut num = [Interval::ZERO; ORDER + 1];
    for j in 0..=ORDER {
        let one = if j == 0 { Interval::ONE } else { Interval::ZERO };
        den[j] = (one - s2[j]).scale(2.0);
        num[j] = if j == 0 { hh - hk2 * sin[0] } else { -(hk2 * sin[j]) };
    }
    if j0_bad(&den[0]) {
        return [Interval::ENTIRE; ORDER + 1];
    }
    den[0] = Interval { lo: den[0].lo.max(0.0), hi: den[0].hi };
    let mut q = [Interval::ZERO; ORDER + 1];
    for n in 0..=ORDER {
        let mut acc = num[n];
        for j in 1..=n {
            acc = acc - den[j] * q[n - j];
        }
        q[n] = acc / den[0];
    }
    let mut e = [Interval::ZERO; ORDER + 1];
    e[0] = (-q[0]).exp().clamp_to(0.0, 1.0);
    for n in 1..=ORDER {
        let mut acc = Interval::ZERO;
        for j in 1..=n {
            acc = acc + (q[j] * e[n - j]).scale(-(j as f64));
        }
        e[n] = acc / Interval::point(n as f64);
    }
    e
}

fn j0_bad(x: &Interval) -> bool {
    !(x.lo > 0.0) || !x.is_finite()
}

/// `∫ τ^j dτ` over `[ta, tb]`.
fn moment(ta: Interval, tb: Interval, j: usize) -> Interval {
    (tb.powi(j as u32 + 1) - ta.powi(j as u32 + 1)) / Interval::point((j + 1) as f64)
}

fn segment(x0: f64, x1: f64, hh: Interval, hk2: Interval) -> (Interval, f64) {
    let m = 0.5 * x0 + 0.5 * x1;
    let ta = Interval::point(x0) - Interval::point(m);
    let tb = Interval::point(x1) - Interval::point(m);
    let at = integrand_series(Interval::point(m), hh, hk2);
    let rem = integrand_series(Interval::new(x0, x1), hh, hk2);
    let mut total = Interval::ZERO;
    for (j, &c) in at.iter().enumerate().take(ORDER) {
        total = total + c * moment(ta, tb, j);
    }
    let r = rem[ORDER] * moment(ta, tb, ORDER);
    let total = total + r;
    // The integrand lies in [0, 1].
    let crude = Interval::new(0.0, up(x1 - x0));
    match total.intersect(&crude) {
        Some(t) if t.is_finite() => (t, r.width()),
        _ => (crude, f64::INFINITY),
    }
}

/// `∫_a^b exp(−(hh − hk2·sin θ)/(2cos²θ)) dθ` for `−π/2 < a < b < π/2`.
fn integrate(a: f64, b: f64, hh: Interval, hk2: Interval, tol: f64) -> Interval {
    let len = b - a;
    let mut total = Interval::ZERO;
    let mut stack = vec![(a, b)];
    while let Some((x0, x1)) = stack.pop() {
        let (val, err) = segment(x0, x1, hh, hk2);
        let w = x1 - x0;
        if err <= tol * w / len || w <= MIN_SEGMENT * len {
            total = total + val;
        } else {
            let m = 0.5 * x0 + 0.5 * x1;
            stack.push((m, x1));
            stack.push((x0, m));
        }
    }
    total
}

/// Enclosure of `Φ₂(h, k; ρ)` at a point.
pub fn phi2_point(h: f64, k: f64, rho: f64) -> Interval {
    phi2_point_tol(h, k, rho, QUAD_TOL)
}

/// [`phi2_point`] with the quadrature remainder held to about `tol`.
pub fn phi2_point_tol(h: f64, k: f64, rho: f64, tol: f64) -> Interval {
    let tol = 2.0 * PI * tol.max(QUAD_TOL);
    let rho = rho.clamp(-1.0, 1.0);
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return Interval::ZERO;
    }
    if h == f64::INFINITY {
        return phi_point(k);
    }
    if k == f64::INFINITY {
        return phi_point(h);
    }
    let (ph, pk) = (phi_point(h), phi_point(k));
    let upper = ph.min_with(pk);
    let lower = (ph + pk - Interval::ONE).max_with(Interval::ZERO);
    if rho == 1.0 {
        return upper;
    }
    if rho == -1.0 {
        return lower;
    }
    let two_pi = pi().scale(2.0);
    let theta = rho.asin();
    if 1.0 - rho.abs() < NEAR_DEGENERATE {
        // Φ₂ moves by at most |Δ asin ρ|/2π between ρ and ±1.
        let gap = (pi().scale(0.5) - Interval::around(theta.abs())) / two_pi;
        return if rho > 0.0 {
            Interval { lo: (upper - gap).lo.max(0.0), hi: upper.hi }
        } else {
            Interval { lo: lower.lo, hi: (lower + gap).hi.min(1.0) }
        };
    }
    let hi = Interval::point(h);
    let ki = Interval::point(k);
    let hh = hi.sqr() + ki.sqr();
    let hk2 = (hi * ki).scale(2.0);
    let integral = if theta > 0.0 {
        integrate(0.0, theta, hh, hk2, tol)
    } else if theta < 0.0 {
        -integrate(theta, 0.0, hh, hk2, tol)
    } else {
        Interval::ZERO
    };
    // asin itself is only known to a few ulps; the integrand is at most 1.
    let slack = up(theta.abs() * 1e-15 + 1e-300);
    let integral = integral + Interval::new(-slack, slack);
    let val = ph * pk + integral / two_pi;
    let bounds = Interval { lo: lower.lo.max(0.0), hi: upper.hi.min(1.0) };
    val.intersect(&bounds).unwrap_or(bounds)
}

/// `Φ₂` over a box, by monotonicity in each argument.
pub fn interval_binormal(h: Interval, k: Interval, rho: Interval) -> Interval {
    let rho = rho.clamp_to(-1.0, 1.0);
    Interval { lo: phi2_point(h.lo, k.lo, rho.lo).lo, hi: phi2_point(h.hi, k.hi, rho.hi).hi }
}

/// Bivariate normal density `φ₂(h, k; ρ)` over a box.
pub fn binormal_density(h: Interval, k: Interval, rho: Interval) -> Interval {
    let one_m = Interval::ONE - rho.sqr();
    if !(one_m.lo > 0.0) || !h.is_finite() || !k.is_finite() {
        return Interval::new(0.0, f64::INFINITY);
    }
    let quad = (h.sqr() - (rho * h * k).scale(2.0) + k.sqr()) / one_m;
    let quad = Interval { lo: quad.lo.max(0.0), hi: quad.hi.max(0.0) };
    (-quad).scale(0.5).exp() / (pi().scale(2.0) * one_m.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Φ via composite Simpson on the density from −40, an oracle independent
    /// of both the series and the continued fraction.
    fn phi_quadrature(x: f64) -> f64 {
        let lo = -40.0;
        let n = 200_000;
        let h = (x - lo) / n as f64;
        let f = |t: f64| (-(t * t) / 2.0).exp() / (2.0 * PI).sqrt();
        let mut acc = f(lo) + f(x);
        for i in 1..n {
            acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn phi_examples() {
        let z = phi_point(0.0);
        assert!(z.contains(0.5) && z.width() < 1e-14);
        assert_eq!(phi_point(f64::NEG_INFINITY), Interval::ZERO);
        let one = phi_point(1.0);
        assert!(one.contains(0.841_344_746_068_542_9));
        assert!(one.width() < 1e-13);
    }

    #[test]
    fn phi_encloses_quadrature() {
        for &x in &[-9.0, -6.5, -4.2, -4.0, -3.9, -2.0, -0.3, 0.7, 2.5, 3.99, 4.01, 7.0] {
            let q = phi_quadrature(x);
            let e = phi_point(x);
            let tol = 1e-13 * q.max(1e-300);
            assert!(e.lo - tol <= q && q <= e.hi + tol, "x={x}: {q} not in {e:?}");
            assert!(e.width() <= 1e-13_f64.max(1e-12 * e.hi), "x={x}: width {}", e.width());
        }
    }

    #[test]
    fn quantile_bounds_bracket() {
        for &u in &[1e-200, 1e-20, 1e-5, 0.1, 0.5, 0.702_421_875, 0.99, 1.0 - 1e-12] {
            let lo = phi_inv_lower(u);
            let hi = phi_inv_upper(u);
            assert!(lo <= hi);
            assert!(phi_point(lo).hi <= u && phi_point(hi).lo >= u);
            // Near 1 the bracket is limited by the absolute resolution of Φ.
            let slope = rounding::phi_density(lo.abs().max(hi.abs()));
            let allowed = 1e-9 * lo.abs().max(1.0) + 1e-14 / slope;
            assert!(hi - lo < allowed, "u={u}: [{lo}, {hi}]");
        }
        assert!(interval_phi_inv(Interval::new(-0.1, 0.5)).is_err());
    }

    #[test]
    fn binormal_examples() {
        let z = phi2_point(0.0, 0.0, 0.0);
        assert!(z.contains(0.25) && z.width() < 1e-11);
        for &rho in &[-0.999f64, -0.9, -0.5, 0.3, 0.5, 0.95, 0.999_999] {
            let want = 0.25 + rho.asin() / (2.0 * PI);
            let e = phi2_point(0.0, 0.0, rho);
            assert!(e.lo - 1e-15 <= want && want <= e.hi + 1e-15, "rho={rho}: {want} not in {e:?}");
            assert!(e.width() < 1e-10);
        }
        let e = phi2_point(-0.4, 0.9, 1.0);
        assert!(e.contains(rounding::phi(-0.4)) || (e.lo - rounding::phi(-0.4)).abs() < 1e-15);
    }

    #[test]
    fn binormal_encloses_reference() {
        for &rho in &[-0.97, -0.6, -0.2, 0.1, 0.45, 0.8, 0.93, 0.99] {
            for &(h, k) in &[(-1.3, 0.4), (0.7, 2.1), (1.5, -0.2), (-2.5, -2.0), (0.3, 0.3), (3.5, 3.4)] {
                let want = rounding::phi2(h, k, rho);
                let e = phi2_point(h, k, rho);
                assert!(e.lo - 1e-12 <= want && want <= e.hi + 1e-12, "({h},{k},{rho}): {want} not in {e:?}");
                assert!(e.width() < 1e-10, "({h},{k},{rho}) width {}", e.width());
            }
        }
    }

    #[test]
    fn near_degenerate_correlation_is_bracketed() {
        let e = phi2_point(0.2, -0.1, 1.0 - 1e-12);
        assert!(e.contains(rounding::phi(-0.1) - 1e-7) || e.lo <= rounding::phi(-0.1));
        assert!(e.hi >= rounding::phi2(0.2, -0.1, 1.0 - 1e-12));
    }
}
