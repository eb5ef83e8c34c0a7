//! Simultaneous weighted Max-Cut instances.
//!
//! All `k` instances share one vertex set `0..n` (files use 1-based ids).
//! Edges are stored once as a union support list; each instance carries a
//! weight vector over that list, zero where it has no edge.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-12;
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 20;
const SUM_TOL: f64 = 1e-12;

/// Membership mask over `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VertexSet {
    member: Vec<bool>,
}

impl VertexSet {
    pub fn empty(n: usize) -> Self {
        Self { member: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        Self { member: vec![true; n] }
    }

    pub fn from_vertices(n: usize, vs: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for v in vs {
            s.insert(v);
        }
        s
    }

    pub fn n(&self) -> usize {
        self.member.len()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.member[v]
    }

    pub fn insert(&mut self, v: usize) {
        self.member[v] = true;
    }

    pub fn len(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.member.iter().enumerate().filter(|(_, &b)| b).map(|(v, _)| v)
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.n()).filter(|&v| !self.member[v]).collect()
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.iter().all(|v| other.contains(v))
    }
}

/// Total 0/1 labeling of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment(pub Vec<u8>);

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn get(&self, v: usize) -> u8 {
        self.0[v]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flip(&mut self, v: usize) {
        self.0[v] ^= 1;
    }
}

/// Labeling of a subset `S`; the domain is exactly the set of `Some` slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialAssignment(pub Vec<Option<u8>>);

impl PartialAssignment {
    pub fn empty(n: usize) -> Self {
        Self(vec![None; n])
    }

    pub fn on(set: &VertexSet, bits: impl Fn(usize) -> u8) -> Self {
        let mut p = Self::empty(set.n());
        for v in set.iter() {
            p.0[v] = Some(bits(v));
        }
        p
    }

    pub fn get(&self, v: usize) -> Option<u8> {
        self.0[v]
    }

    pub fn set(&mut self, v: usize, b: u8) {
        self.0[v] = Some(b);
    }

    pub fn domain(&self) -> VertexSet {
        VertexSet::from_vertices(self.0.len(), self.0.iter().enumerate().filter(|(_, b)| b.is_some()).map(|(v, _)| v))
    }

    /// `self ∪ g`, with `g` read only outside the domain of `self`.
    pub fn extend(&self, g: &Assignment) -> Assignment {
        Assignment(self.0.iter().zip(&g.0).map(|(h, &gv)| h.unwrap_or(gv)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutReport {
    pub per_instance: Vec<f64>,
    pub min_value: f64,
    /// `min_ℓ val/c_ℓ` over instances with a positive target.
    pub min_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(default)]
    pub name: String,
    pub edges: Vec<(usize, usize, f64)>,
}

/// On-disk layout, 1-based vertices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub instances: Vec<InstanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimInstance {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<Vec<f64>>,
    names: Vec<String>,
    targets: Option<Vec<f64>>,
    min_weight_floor: f64,
    incident: Vec<Vec<usize>>,
}

impl SimInstance {
    /// Builds an instance from 0-based weighted edge lists. Pairs are
    /// canonicalized to `u < v` and duplicates summed. Weights are kept raw.
    pub fn new(n: usize, instances: Vec<Vec<(usize, usize, f64)>>, targets: Option<Vec<f64>>) -> Result<Self> {
        let k = instances.len();
        if k == 0 {
            return Err(Error::MalformedInstance("no instances".into()));
        }
        let mut support: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for (l, list) in instances.iter().enumerate() {
            for &(a, b, w) in list {
                if a >= n || b >= n {
                    return Err(Error::MalformedInstance(format!("vertex out of range in edge ({a},{b})")));
                }
                if a == b {
                    return Err(Error::MalformedInstance(format!("self-loop at vertex {a}")));
                }
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::MalformedInstance(format!("bad weight {w}")));
                }
                let key = (a.min(b), a.max(b));
                support.entry(key).or_insert_with(|| vec![0.0; k])[l] += w;
            }
        }
        if let Some(t) = &targets {
            if t.len() != k {
                return Err(Error::MalformedInstance(format!("{} targets for {} instances", t.len(), k)));
            }
            if t.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::MalformedInstance("targets must lie in [0,1]".into()));
            }
        }
        let edges: Vec<(usize, usize)> = support.keys().copied().collect();
        let mut weights = vec![Vec::with_capacity(edges.len()); k];
        for ws in support.values() {
            for l in 0..k {
                weights[l].push(ws[l]);
            }
        }
        let mut incident = vec![Vec::new(); n];
        for (i, &(u, v)) in edges.iter().enumerate() {
            incident[u].push(i);
            incident[v].push(i);
        }
        Ok(Self {
            n,
            edges,
            weights,
            names: (0..k).map(|l| format!("E{}", l + 1)).collect(),
            targets,
            min_weight_floor: DEFAULT_WEIGHT_FLOOR,
            incident,
        })
    }

    pub fn from_file(file: &InstanceFile) -> Result<Self> {
        let mut lists = Vec::with_capacity(file.instances.len());
        for spec in &file.instances {
            let mut list = Vec::with_capacity(spec.edges.len());
            for &(u, v, w) in &spec.edges {
                if u == 0 || v == 0 {
                    return Err(Error::MalformedInstance("vertices are 1-based".into()));
                }
                list.push((u - 1, v - 1, w));
            }
            lists.push(list);
        }
        let mut inst = Self::new(file.n, lists, file.targets.clone())?;
        for (l, spec) in file.instances.iter().enumerate() {
            if !spec.name.is_empty() {
                inst.names[l] = spec.name.clone();
            }
        }
        Ok(inst)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: InstanceFile = serde_json::from_str(&text)?;
        Self::from_file(&file)
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            n: self.n,
            instances: (0..self.k())
                .map(|l| InstanceSpec {
                    name: self.names[l].clone(),
                    edges: self
                        .edges
                        .iter()
                        .zip(&self.weights[l])
                        .filter(|(_, &w)| w > 0.0)
                        .map(|(&(u, v), &w)| (u + 1, v + 1, w))
                        .collect(),
                })
                .collect(),
            targets: self.targets.clone(),
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.min_weight_floor = floor;
        self
    }

    pub fn with_targets(mut self, targets: Option<Vec<f64>>) -> Self {
        self.targets = targets;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn weight(&self, l: usize, e: usize) -> f64 {
        self.weights[l][e]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn targets(&self) -> Option<&[f64]> {
        self.targets.as_deref()
    }

    pub fn min_weight_floor(&self) -> f64 {
        self.min_weight_floor
    }

    /// Edge indices touching `v`.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn total_weight(&self, l: usize) -> f64 {
        self.weights[l].iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (0..self.k()).all(|l| (self.total_weight(l) - 1.0).abs() <= SUM_TOL)
    }

    /// Rescales every instance to total weight one.
    pub fn normalize(&self) -> Result<Self> {
        let mut out = self.clone();
        for l in 0..self.k() {
            let total = self.total_weight(l);
            if !(total > 0.0) {
                return Err(Error::EmptyInstance(l));
            }
            for w in out.weights[l].iter_mut() {
                *w /= total;
                if *w > 0.0 && *w < self.min_weight_floor {
                    return Err(Error::WeightBelowFloor { instance: l, weight: *w, floor: self.min_weight_floor });
                }
            }
        }
        Ok(out)
    }

    pub fn is_cut(f: &Assignment, (u, v): (usize, usize)) -> bool {
        f.get(u) != f.get(v)
    }

    pub fn cut_value(&self, l: usize, f: &Assignment) -> f64 {
        self.edges.iter().zip(&self.weights[l]).filter(|(&e, _)| Self::is_cut(f, e)).map(|(_, &w)| w).sum()
    }

    /// Value of the edges with both endpoints labeled by `h`.
    pub fn partial_cut_value(&self, l: usize, h: &PartialAssignment) -> f64 {
        self.edges
            .iter()
            .zip(&self.weights[l])
            .filter(|(&(u, v), _)| matches!((h.get(u), h.get(v)), (Some(a), Some(b)) if a != b))
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn report(&self, f: &Assignment) -> CutReport {
        let per_instance: Vec<f64> = (0..self.k()).map(|l| self.cut_value(l, f)).collect();
        self.report_from_values(per_instance)
    }

    pub fn report_from_values(&self, per_instance: Vec<f64>) -> CutReport {
        let min_value = per_instance.iter().copied().fold(f64::INFINITY, f64::min);
        let min_ratio = self.targets.as_ref().and_then(|t| ratio_of(&per_instance, t));
        CutReport { per_instance, min_value, min_ratio }
    }

    pub fn is_active(&self, e: usize, s: &VertexSet) -> bool {
        let (u, v) = self.edges[e];
        !(s.contains(u) && s.contains(v))
    }

    /// Indices of edges with at least one endpoint outside `s`.
    pub fn active_edges(&self, s: &VertexSet) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.is_active(e, s)).collect()
    }

    pub fn active_degree(&self, l: usize, v: usize, s: &VertexSet) -> f64 {
        self.incident[v].iter().filter(|&&e| self.is_active(e, s)).map(|&e| self.weights[l][e]).sum()
    }

    /// `Σ_{v∉S} actdeg_S(v, ℓ)`.
    pub fn active_degree_total(&self, l: usize, s: &VertexSet) -> f64 {
        (0..self.n).filter(|&v| !s.contains(v)).map(|v| self.active_degree(l, v, s)).sum()
    }

    /// Active edges of instance `l` renormalized to a distribution.
    pub fn active_dist(&self, l: usize, s: &VertexSet) -> Result<Vec<(usize, f64)>> {
        let act: Vec<(usize, f64)> = self.active_edges(s).into_iter().map(|e| (e, self.weights[l][e])).filter(|&(_, w)| w > 0.0).collect();
        let mass: f64 = act.iter().map(|&(_, w)| w).sum();
        if !(mass > 0.0) {
            return Err(Error::NoActiveMass(l));
        }
        Ok(act.into_iter().map(|(e, w)| (e, w / mass)).collect())
    }

    /// Exhaustive optimum of `min_ℓ val/c_ℓ` (or `min_ℓ val` without targets).
    pub fn brute_force_opt(&self, cap: usize) -> Result<(Assignment, CutReport)> {
        if self.n > cap {
            return Err(Error::TooLarge { n: self.n, cap });
        }
        if self.n == 0 {
            let f = Assignment(Vec::new());
            let r = self.report(&f);
            return Ok((f, r));
        }
        let n = self.n;
        let mut best: Option<(f64, u64)> = None;
        let mut f = Assignment::zeros(n);
        for x in 0u64..(1u64 << (n - 1)) {
            for v in 0..n {
                f.0[v] = ((x >> (n - 1 - v)) & 1) as u8;
            }
            let r = self.report(&f);
            let score = r.min_ratio.unwrap_or(r.min_value);
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, x));
            }
        }
        let x = best.expect("at least one bipartition").1;
        let f = Assignment((0..n).map(|v| ((x >> (n - 1 - v)) & 1) as u8).collect());
        let r = self.report(&f);
        Ok((f, r))
    }
}

pub fn ratio_of(values: &[f64], targets: &[f64]) -> Option<f64> {
    values.iter().zip(targets).filter(|(_, &c)| c > 0.0).map(|(&v, &c)| v / c).reduce(f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(n: usize, edges: &[(usize, usize, f64)]) -> SimInstance {
        SimInstance::new(n, vec![edges.to_vec()], None).unwrap().normalize().unwrap()
    }

    fn cycle4() -> SimInstance {
        single(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
    }

    fn k4() -> SimInstance {
        let mut e = Vec::new();
        for u in 0..4 {
            for v in u + 1..4 {
                e.push((u, v, 1.0));
            }
        }
        single(4, &e)
    }

    #[test]
    fn normalize_examples() {
        let a = single(3, &[(0, 1, 2.0), (1, 2, 2.0)]);
        assert_eq!(a.weights(0), &[0.5, 0.5]);
        let b = single(2, &[(0, 1, 7.3)]);
        assert_eq!(b.weights(0), &[1.0]);
        let raw = SimInstance::new(2, vec![vec![(0, 1, 1.0)], vec![]], None).unwrap();
        assert_eq!(raw.normalize(), Err(Error::EmptyInstance(1)));
    }

    #[test]
    fn weight_floor() {
        let raw = SimInstance::new(3, vec![vec![(0, 1, 1.0), (1, 2, 1e-14)]], None).unwrap();
        assert!(matches!(raw.normalize(), Err(Error::WeightBelowFloor { .. })));
        assert!(raw.with_floor(1e-15).normalize().is_ok());
    }

    #[test]
    fn canonical_pairs_sum_duplicates() {
        let a = SimInstance::new(3, vec![vec![(1, 0, 1.0), (0, 1, 2.0), (2, 1, 1.0)]], None).unwrap();
        assert_eq!(a.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(a.weights(0), &[3.0, 1.0]);
        assert!(SimInstance::new(2, vec![vec![(1, 1, 1.0)]], None).is_err());
    }

    #[test]
    fn cut_value_examples() {
        let tri = single(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        assert!((tri.cut_value(0, &Assignment(vec![0, 0, 1])) - 2.0 / 3.0).abs() < 1e-15);
        let c = cycle4();
        assert_eq!(c.cut_value(0, &Assignment(vec![0, 1, 0, 1])), 1.0);
        assert_eq!(c.cut_value(0, &Assignment(vec![1, 1, 1, 1])), 0.0);
    }

    #[test]
    fn active_examples() {
        let c = cycle4();
        let all = c.active_degree_total(0, &VertexSet::empty(4));
        assert!((1.0..=2.0).contains(&all));
        assert_eq!(c.active_edges(&VertexSet::full(4)), Vec::<usize>::new());
        assert_eq!(c.active_degree_total(0, &VertexSet::full(4)), 0.0);
        let path = single(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let s = VertexSet::from_vertices(3, [1]);
        assert_eq!(path.active_edges(&s).len(), 2);
        assert!((path.active_degree_total(0, &s) - 1.0).abs() < 1e-15);
        assert_eq!(c.active_dist(0, &VertexSet::full(4)), Err(Error::NoActiveMass(0)));
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(cycle4().brute_force_opt(20).unwrap().1.min_value, 1.0);
        // K4: every balanced split cuts 4 of 6 edges, which an exhaustive scan confirms below.
        let k = k4();
        let (f, r) = k.brute_force_opt(20).unwrap();
        let mut best = 0.0f64;
        for x in 0..16u32 {
            let g = Assignment((0..4).map(|v| ((x >> v) & 1) as u8).collect());
            best = best.max(k.cut_value(0, &g));
        }
        assert!((r.min_value - best).abs() < 1e-15);
        assert!((best - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(f.get(0), 0);
        let two = SimInstance::new(4, vec![vec![(0, 1, 1.0)], vec![(2, 3, 1.0)]], None).unwrap().normalize().unwrap();
        assert_eq!(two.brute_force_opt(20).unwrap().1.per_instance, vec![1.0, 1.0]);
        assert!(matches!(two.brute_force_opt(3), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn file_roundtrip() {
        let text = r#"{"n":3,"instances":[{"name":"a","edges":[[1,2,1.0],[2,3,3.0]]}],"targets":[0.5]}"#;
        let file: InstanceFile = serde_json::from_str(text).unwrap();
        let inst = SimInstance::from_file(&file).unwrap();
        assert_eq!(inst.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(inst.names()[0], "a");
        let back = SimInstance::from_file(&inst.to_file()).unwrap();
        assert_eq!(back, inst);
    }

    fn arb_instance() -> impl Strategy<Value = SimInstance> {
        (3usize..8, 1usize..4).prop_flat_map(|(n, k)| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            let m = pairs.len();
            proptest::collection::vec(proptest::collection::vec(0u8..4, m), k).prop_map(move |ws| {
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
                SimInstance::new(n, lists, None).unwrap().normalize().unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn local_update_identity(inst in arb_instance(), bits in any::<u64>(), v in 0usize..8) {
            let n = inst.n();
            let v = v % n;
            let f = Assignment((0..n).map(|i| ((bits >> i) & 1) as u8).collect());
            let mut g = f.clone();
            g.flip(v);
            for l in 0..inst.k() {
                let mut delta = 0.0;
                for &e in inst.incident(v) {
                    let w = inst.weight(l, e);
                    let before = SimInstance::is_cut(&f, inst.edges()[e]);
                    delta += if before { -w } else { w };
                }
                prop_assert!((inst.cut_value(l, &g) - inst.cut_value(l, &f) - delta).abs() < 1e-12);
            }
        }

        #[test]
        fn actdeg_monotone(inst in arb_instance(), a in any::<u64>(), b in any::<u64>()) {
            let n = inst.n();
            let s1 = VertexSet::from_vertices(n, (0..n).filter(|i| (a >> i) & 1 == 1));
            let s2 = VertexSet::from_vertices(n, (0..n).filter(|i| (a >> i) & 1 == 1 || (b >> i) & 1 == 1));
            for l in 0..inst.k() {
                for v in 0..n {
                    prop_assert!(inst.active_degree(l, v, &s2) <= inst.active_degree(l, v, &s1) + 1e-15);
                }
            }
        }

        #[test]
        fn split_identity(inst in arb_instance(), a in any::<u64>(), bits in any::<u64>()) {
            let n = inst.n();
            let s = VertexSet::from_vertices(n, (0..n).filter(|i| (a >> i) & 1 == 1));
            let h = PartialAssignment::on(&s, |v| ((bits >> v) & 1) as u8);
            let g = Assignment((0..n).map(|i| ((bits >> (i + 13)) & 1) as u8).collect());
            let f = h.extend(&g);
            for l in 0..inst.k() {
                let act: f64 = inst
                    .active_edges(&s)
                    .into_iter()
                    .filter(|&e| SimInstance::is_cut(&f, inst.edges()[e]))
                    .map(|e| inst.weight(l, e))
                    .sum();
                prop_assert!((inst.cut_value(l, &f) - inst.partial_cut_value(l, &h) - act).abs() < 1e-12);
            }
        }

        #[test]
        fn normalized_sums(inst in arb_instance()) {
            for l in 0..inst.k() {
                prop_assert!((inst.total_weight(l) - 1.0).abs() <= 1e-12);
                let act = inst.active_degree_total(l, &VertexSet::empty(inst.n()));
                prop_assert!((act - 2.0).abs() < 1e-12);
            }
        }
    }
}
