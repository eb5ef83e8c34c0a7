//! Variance-driven preprocessing: grows `S★` with high active-degree vertices
//! until every instance is either low-variance or has spent its budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{SimInstance, VertexSet};

pub const DEFAULT_MAX_T: usize = 6;
pub const DEFAULT_MAX_S_STAR: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub epsilon: f64,
    pub k: usize,
    pub delta0: f64,
    pub eps0: f64,
    pub tau: f64,
    pub gamma: f64,
    /// Theoretical round budget, saturated at `u64::MAX`.
    pub t: u64,
    pub max_t: usize,
    pub max_s_star: usize,
}

impl Params {
    pub fn new(epsilon: f64, k: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.2) {
            return Err(Error::InvalidParams(format!("epsilon {epsilon} outside (0, 1/5]")));
        }
        if k == 0 {
            return Err(Error::InvalidParams("k = 0".into()));
        }
        let delta0 = 1.0 / (10.0 * k as f64);
        let eps0 = epsilon / 2.0;
        let tau = epsilon;
        let gamma = tau * tau * eps0 * eps0 * delta0 / 4.0;
        let t_real = (2.0 * k as f64 / gamma) * (21.0 / gamma).ln();
        let t = if t_real >= u64::MAX as f64 { u64::MAX } else { (t_real.ceil() as u64).max(1) };
        Ok(Self { epsilon, k, delta0, eps0, tau, gamma, t, max_t: DEFAULT_MAX_T, max_s_star: DEFAULT_MAX_S_STAR })
    }

    pub fn with_caps(mut self, max_t: usize, max_s_star: usize) -> Self {
        self.max_t = max_t;
        self.max_s_star = max_s_star;
        self
    }

    pub fn effective_t(&self) -> usize {
        if self.t > self.max_t as u64 {
            self.max_t
        } else {
            self.t as usize
        }
    }

    /// True when the cap does not bind.
    pub fn is_compliant(&self) -> bool {
        self.t <= self.max_t as u64
    }

    pub fn flag(&self, uvar: f64, lmean: f64) -> bool {
        lmean > 0.0 && uvar >= self.delta0 * self.eps0 * self.eps0 * lmean * lmean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub uvar: Vec<f64>,
    pub lmean: Vec<f64>,
    pub flags: Vec<bool>,
    /// `(instance, vertex, actdeg_S(v,ℓ), actdeg_S(ℓ))` of the pick, if any.
    pub pick: Option<(usize, usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessResult {
    /// `(vertex, instance that caused it)` in order of entry.
    pub s_star: Vec<(usize, usize)>,
    pub counts: Vec<usize>,
    pub low: Vec<usize>,
    pub high: Vec<usize>,
    pub effective_t: usize,
    pub trace: Vec<TraceStep>,
    pub warnings: Vec<String>,
}

impl PreprocessResult {
    pub fn s_star_set(&self, n: usize) -> VertexSet {
        VertexSet::from_vertices(n, self.s_star.iter().map(|&(v, _)| v))
    }

    pub fn s_star_vertices(&self) -> Vec<usize> {
        self.s_star.iter().map(|&(v, _)| v).collect()
    }

    /// Vertices that entered because of instance `l`, in order.
    pub fn brought_in_by(&self, l: usize) -> Vec<usize> {
        self.s_star.iter().filter(|&&(_, c)| c == l).map(|&(v, _)| v).collect()
    }

    pub fn iterations(&self) -> usize {
        self.s_star.len()
    }
}

/// `Σ_{e ∼_S e'} E_ℓ(e) E_ℓ(e')` over ordered pairs of active edges that
/// share a vertex outside `S`.
pub fn uvar(inst: &SimInstance, l: usize, s: &VertexSet) -> f64 {
    let mut total = 0.0;
    for v in 0..inst.n() {
        if !s.contains(v) {
            let d = inst.active_degree(l, v, s);
            total += d * d;
        }
    }
    // An edge with both ends outside S relates to itself through two vertices.
    for (e, &(u, v)) in inst.edges().iter().enumerate() {
        if !s.contains(u) && !s.contains(v) {
            let w = inst.weight(l, e);
            total -= w * w;
        }
    }
    total.max(0.0)
}

pub fn lmean(inst: &SimInstance, l: usize, s: &VertexSet, tau: f64) -> f64 {
    tau * inst.active_edges(s).into_iter().map(|e| inst.weight(l, e)).sum::<f64>()
}

pub fn run_preprocess(inst: &SimInstance, params: &Params) -> Result<PreprocessResult> {
    let k = inst.k();
    if k != params.k {
        return Err(Error::InvalidParams(format!("params built for k = {}, instance has k = {k}", params.k)));
    }
    let t = params.effective_t();
    let mut s = VertexSet::empty(inst.n());
    let mut counts = vec![0usize; k];
    let mut s_star = Vec::new();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    if !params.is_compliant() {
        warnings.push(format!("round budget capped: t = {} reduced to {t}", params.t));
    }
    let flags = loop {
        let uv: Vec<f64> = (0..k).map(|l| uvar(inst, l, &s)).collect();
        let lm: Vec<f64> = (0..k).map(|l| lmean(inst, l, &s, params.tau)).collect();
        let flags: Vec<bool> = (0..k).map(|l| params.flag(uv[l], lm[l])).collect();
        let eligible = (0..k).find(|&l| flags[l] && counts[l] < t);
        let Some(l) = eligible else {
            trace.push(TraceStep { uvar: uv, lmean: lm, flags: flags.clone(), pick: None });
            break flags;
        };
        if s_star.len() >= params.max_s_star {
            warnings.push(format!("|S*| reached the cap {}", params.max_s_star));
            trace.push(TraceStep { uvar: uv, lmean: lm, flags: flags.clone(), pick: None });
            break flags;
        }
        let total = inst.active_degree_total(l, &s);
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for v in 0..inst.n() {
            if !s.contains(v) {
                let d = inst.active_degree(l, v, &s);
                if d > best.0 {
                    best = (d, v);
                }
            }
        }
        let needed = params.gamma * total;
        if best.1 == usize::MAX || best.0 < needed {
            return Err(Error::NoHighDegreeVertex { instance: l, best: best.0.max(0.0), needed });
        }
        trace.push(TraceStep { uvar: uv, lmean: lm, flags, pick: Some((l, best.1, best.0, total)) });
        s.insert(best.1);
        s_star.push((best.1, l));
        counts[l] += 1;
    };
    let mut low = Vec::new();
    let mut high = Vec::new();
    for l in 0..k {
        if !flags[l] {
            low.push(l);
        } else {
            if counts[l] < t {
                warnings.push(format!("instance {l} still flagged with count {} < {t}; treated as high-variance", counts[l]));
            }
            high.push(l);
        }
    }
    let res = PreprocessResult { s_star, counts, low, high, effective_t: t, trace, warnings };
    for e in early_variables(inst, params, &res) {
        if !e.decay_holds {
            return Err(Error::InvalidParams(format!(
                "active degree of instance {} is {} above the decay bound {}",
                e.instance, e.actdeg, e.decay_bound
            )));
        }
    }
    Ok(res)
}

/// Diagnostics for the early-variable properties of one high-variance instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyVariables {
    pub instance: usize,
    pub actdeg: f64,
    pub decay_bound: f64,
    pub decay_holds: bool,
    /// `(vertex, ℓ-weight of its edges inside S★)` for the first `t/2` vertices caused by `ℓ`.
    pub first_half: Vec<(usize, f64)>,
    pub twenty_fold_holds: bool,
}

pub fn early_variables(inst: &SimInstance, params: &Params, res: &PreprocessResult) -> Vec<EarlyVariables> {
    let s = res.s_star_set(inst.n());
    res.high
        .iter()
        .filter(|&&l| res.counts[l] == res.effective_t)
        .map(|&l| {
            let actdeg = inst.active_degree_total(l, &s);
            let decay_bound = 2.0 * (1.0 - params.gamma).powi(res.counts[l] as i32);
            let first_half: Vec<(usize, f64)> = res
                .brought_in_by(l)
                .into_iter()
                .take(res.effective_t / 2)
                .map(|v| {
                    let inside: f64 = inst.incident(v).iter().filter(|&&e| !inst.is_active(e, &s)).map(|&e| inst.weight(l, e)).sum();
                    (v, inside)
                })
                .collect();
            let twenty_fold_holds = first_half.iter().all(|&(_, w)| w >= 20.0 * actdeg);
            EarlyVariables {
                instance: l,
                actdeg,
                decay_bound,
                decay_holds: actdeg <= decay_bound * (1.0 + 1e-12) + 1e-15,
                first_half,
                twenty_fold_holds,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inst(n: usize, lists: Vec<Vec<(usize, usize, f64)>>) -> SimInstance {
        SimInstance::new(n, lists, None).unwrap().normalize().unwrap()
    }

    /// Direct enumeration of the relation over ordered edge pairs.
    fn uvar_oracle(inst: &SimInstance, l: usize, s: &VertexSet) -> f64 {
        let act = inst.active_edges(s);
        let mut total = 0.0;
        for &a in &act {
            for &b in &act {
                let (a0, a1) = inst.edges()[a];
                let (b0, b1) = inst.edges()[b];
                let shares = [a0, a1].iter().any(|&x| !s.contains(x) && (x == b0 || x == b1));
                if shares {
                    total += inst.weight(l, a) * inst.weight(l, b);
                }
            }
        }
        total
    }

    #[test]
    fn uvar_examples() {
        let two = inst(4, vec![vec![(0, 1, 1.0), (2, 3, 1.0)]]);
        assert!((uvar(&two, 0, &VertexSet::empty(4)) - 0.5).abs() < 1e-15);
        let one = inst(2, vec![vec![(0, 1, 1.0)]]);
        assert!((uvar(&one, 0, &VertexSet::empty(2)) - 1.0).abs() < 1e-15);
        let path = inst(3, vec![vec![(0, 1, 1.0), (1, 2, 1.0)]]);
        assert!((uvar(&path, 0, &VertexSet::empty(3)) - 1.0).abs() < 1e-15);
        assert!((uvar_oracle(&path, 0, &VertexSet::empty(3)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lmean_examples() {
        let path = inst(3, vec![vec![(0, 1, 1.0), (1, 2, 1.0)]]);
        assert!((lmean(&path, 0, &VertexSet::empty(3), 0.2) - 0.2).abs() < 1e-15);
        assert_eq!(lmean(&path, 0, &VertexSet::full(3), 0.2), 0.0);
        assert!((lmean(&path, 0, &VertexSet::from_vertices(3, [0, 1]), 0.2) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn params_example() {
        let p = Params::new(0.2, 2).unwrap();
        assert!((p.delta0 - 0.05).abs() < 1e-15);
        assert!((p.eps0 - 0.1).abs() < 1e-15);
        assert!((p.tau - 0.2).abs() < 1e-15);
        assert!((p.gamma - 5e-6).abs() < 1e-18);
        let t = (4.0 / 5e-6) * (21.0f64 / 5e-6).ln();
        assert_eq!(p.t, t.ceil() as u64);
        assert!((p.t as f64 - 1.2e7).abs() < 0.05e7);
        assert_eq!(p.effective_t(), DEFAULT_MAX_T);
        assert!(Params::new(0.3, 1).is_err());
    }

    #[test]
    fn single_edge_trace() {
        let one = inst(2, vec![vec![(0, 1, 1.0)]]);
        let p = Params::new(0.2, 1).unwrap();
        let r = run_preprocess(&one, &p).unwrap();
        let first = &r.trace[0];
        assert!((first.uvar[0] - 1.0).abs() < 1e-15);
        assert!((first.lmean[0] - 0.2).abs() < 1e-15);
        assert!(first.flags[0]);
        assert_eq!(first.pick.unwrap().1, 0);
        // After one endpoint the edge is still active; after both it is dead.
        assert_eq!(r.s_star_vertices(), vec![0, 1]);
        assert_eq!(r.low, vec![0]);
        assert!(r.high.is_empty());
        assert!(!r.trace.last().unwrap().flags[0]);
    }

    #[test]
    fn capped_instances_are_high_and_dead_ones_unflagged() {
        let a = inst(4, vec![vec![(0, 1, 1.0)], vec![(2, 3, 1.0)]]);
        let p = Params::new(0.2, 2).unwrap().with_caps(1, 16);
        let r = run_preprocess(&a, &p).unwrap();
        assert_eq!(r.counts, vec![1, 1]);
        assert_eq!(r.high, vec![0, 1]);
        let none = SimInstance::new(2, vec![vec![(0, 1, 1.0)]], None).unwrap().normalize().unwrap();
        let p1 = Params::new(0.2, 1).unwrap();
        assert!(!p1.flag(uvar(&none, 0, &VertexSet::full(2)), lmean(&none, 0, &VertexSet::full(2), 0.2)));
    }

    fn arb_instance() -> impl Strategy<Value = SimInstance> {
        (3usize..9, 1usize..4).prop_flat_map(|(n, k)| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            let m = pairs.len();
            proptest::collection::vec(proptest::collection::vec(0u8..3, m), k).prop_map(move |ws| {
                let lists = ws
                    .iter()
                    .map(|row| {
                        let mut l: Vec<_> = pairs.iter().zip(row).filter(|(_, &w)| w > 0).map(|(&(u, v), &w)| (u, v, w as f64)).collect();
                        if l.is_empty() {
                            l.push((0, 1, 1.0));
                        }
                        l
                    })
                    .collect();
                inst(n, lists)
            })
        })
    }

    proptest! {
        #[test]
        fn uvar_matches_enumeration(i in arb_instance(), mask in any::<u16>()) {
            let s = VertexSet::from_vertices(i.n(), (0..i.n()).filter(|v| (mask >> v) & 1 == 1));
            for l in 0..i.k() {
                prop_assert!((uvar(&i, l, &s) - uvar_oracle(&i, l, &s)).abs() < 1e-12);
            }
        }

        #[test]
        fn loop_invariants(i in arb_instance(), eps in 0.05f64..0.2) {
            let p = Params::new(eps, i.k()).unwrap();
            let r = run_preprocess(&i, &p).unwrap();
            let t = p.effective_t();
            prop_assert!(r.iterations() <= t * i.k());
            prop_assert!(r.counts.iter().all(|&c| c <= t));
            let mut all: Vec<usize> = r.low.iter().chain(&r.high).copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..i.k()).collect::<Vec<_>>());
            for step in &r.trace {
                if let Some((_, _, d, total)) = step.pick {
                    prop_assert!(d >= 0.25 * p.tau * p.tau * p.eps0 * p.eps0 * p.delta0 * total);
                }
            }
        }
    }

    /// Low-variance instances concentrate under any smooth independent labeling.
    #[test]
    fn chebyshev_bound_on_low_variance() {
        let edges = 30_000;
        let matching: Vec<(usize, usize, f64)> = (0..edges).map(|i| (2 * i, 2 * i + 1, 1.0)).collect();
        let big = inst(2 * edges, vec![matching]);
        let p = Params::new(0.2, 1).unwrap();
        let s = VertexSet::empty(big.n());
        assert!(!p.flag(uvar(&big, 0, &s), lmean(&big, 0, &s, p.tau)));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q: Vec<f64> = (0..big.n()).map(|_| rng.random_range(p.tau..=1.0 - p.tau)).collect();
        let w = 1.0 / edges as f64;
        let mean: f64 = (0..edges).map(|i| w * (q[2 * i] * (1.0 - q[2 * i + 1]) + q[2 * i + 1] * (1.0 - q[2 * i]))).sum();
        let samples = 10_000;
        let mut bad = 0usize;
        for _ in 0..samples {
            let mut y = 0.0;
            for i in 0..edges {
                let a = rng.random::<f64>() < q[2 * i];
                let b = rng.random::<f64>() < q[2 * i + 1];
                if a != b {
                    y += w;
                }
            }
            if y < (1.0 - p.eps0) * mean {
                bad += 1;
            }
        }
        let ph = bad as f64 / samples as f64;
        let upper = ph + 3.0 * (ph * (1.0 - ph) / samples as f64).sqrt() + 3.0 / samples as f64;
        assert!(upper < p.delta0, "empirical tail {ph}");
    }
}
