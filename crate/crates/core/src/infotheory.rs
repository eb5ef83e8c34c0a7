//! Entropy and mutual information of small joint distributions over bits.
//!
//! Logs are base 2.

use crate::error::{Error, Result};

pub const MAX_VARS: usize = 4;
const CLAMP: f64 = 1e-12;
const SUM_TOL: f64 = 1e-9;

/// Joint law of up to four bits. `probs[x]` is the mass of the tuple whose
/// `i`-th coordinate is bit `i` of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    support: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(support: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let m = support.len();
        if m > MAX_VARS {
            return Err(Error::InvalidDistribution(format!("{m} variables, at most {MAX_VARS}")));
        }
        if probs.len() != 1 << m {
            return Err(Error::InvalidDistribution(format!("{} entries for {m} variables", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -CLAMP) {
            return Err(Error::InvalidDistribution(format!("entry {p}")));
        }
        let probs: Vec<f64> = probs.into_iter().map(|p| if p < CLAMP { 0.0 } else { p }).collect();
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("mass {total}")));
        }
        Ok(Self { support, probs })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn arity(&self) -> usize {
        self.support.len()
    }

    /// Marginal masses over the coordinates in `positions`, in that order.
    pub fn marginal(&self, positions: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; 1 << positions.len()];
        for (x, &p) in self.probs.iter().enumerate() {
            let mut y = 0;
            for (j, &pos) in positions.iter().enumerate() {
                y |= ((x >> pos) & 1) << j;
            }
            out[y] += p;
        }
        out
    }

    /// Entropy of the coordinates in `positions`.
    pub fn entropy_of(&self, positions: &[usize]) -> f64 {
        entropy_masses(&self.marginal(positions))
    }
}

pub fn entropy_masses(ps: &[f64]) -> f64 {
    ps.iter().filter(|&&p| p >= CLAMP).map(|&p| -p * p.log2()).sum::<f64>().max(0.0)
}

pub fn entropy(d: &JointDist) -> f64 {
    entropy_masses(&d.probs)
}

pub fn binary_entropy(p: f64) -> f64 {
    entropy_masses(&[p, 1.0 - p])
}

/// `I(X_A; X_B) = H(A) + H(B) − H(A∪B)`, with `A`, `B` positions in the support.
pub fn mutual_information(d: &JointDist, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.iter().any(|x| b.contains(x)) {
        return Err(Error::OverlappingSets);
    }
    if a.iter().chain(b).any(|&p| p >= d.arity()) {
        return Err(Error::InvalidDistribution("position outside support".into()));
    }
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    Ok((d.entropy_of(a) + d.entropy_of(b) - d.entropy_of(&ab)).max(0.0))
}

/// `H(A | B)`.
pub fn conditional_entropy(d: &JointDist, a: &[usize], b: &[usize]) -> f64 {
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    d.entropy_of(&ab) - d.entropy_of(b)
}
