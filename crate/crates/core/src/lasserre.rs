//! Pseudo-moment solutions of the Lasserre lift with partial fixing.
//!
//! A solution over the free vertices `F` stores `y_T = Pr[X_T = 1]` for every
//! `T ⊆ F` with `|T| ≤ D`, where `D = min(2r, |F|)` and `r` is the level. Every
//! local probability is recovered by inclusion-exclusion, so the Gram entries
//! `⟨v_{S,α}, v_{T,β}⟩ = Pr[X_{S∪T} = α∘β]` are consistent by construction. PSD
//! of the atom Gram matrix is equivalent to PSD of the subset moment matrix
//! `M_r(y)[S,T] = y_{S∪T}`, which is what gets checked.
//!
//! Fixed vertices (the partial assignment on `S★` plus anything conditioned
//! on) never appear in atoms; their values are substituted.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::JointDist;
use crate::instance::{Assignment, PartialAssignment, SimInstance};
use crate::preprocess::PreprocessResult;

pub const DEFAULT_EQ_TOL: f64 = 1e-7;
pub const DEFAULT_PSD_TOL: f64 = 1e-8;
pub const COND_FLOOR: f64 = 1e-9;
pub const MAX_FREE: usize = 62;

/// Subsets of `0..m` with at most `s` elements, by size then lexicographically.
pub fn subsets_up_to(m: usize, s: usize) -> Vec<u64> {
    let mut out = vec![0u64];
    for size in 1..=s.min(m) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().fold(0u64, |acc, &i| acc | (1 << i)));
            let mut i = size;
            while i > 0 && idx[i - 1] == m - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

fn bits_of(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| (mask >> i) & 1 == 1)
}

/// Submasks of `mask`, including `0` and `mask`.
fn submasks(mask: u64) -> impl Iterator<Item = u64> {
    let mut cur = Some(mask);
    std::iter::from_fn(move || {
        let c = cur?;
        cur = if c == 0 { None } else { Some((c - 1) & mask) };
        Some(c)
    })
}

/// Joint event `X_vars = vals` over global vertex ids, sorted by vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub vars: Vec<usize>,
    pub vals: Vec<u8>,
}

impl Event {
    pub fn empty() -> Self {
        Self { vars: Vec::new(), vals: Vec::new() }
    }

    pub fn new(pairs: impl IntoIterator<Item = (usize, u8)>) -> Option<Self> {
        let mut map = BTreeMap::new();
        for (v, b) in pairs {
            if let Some(old) = map.insert(v, b) {
                if old != b {
                    return None;
                }
            }
        }
        Some(Self { vars: map.keys().copied().collect(), vals: map.values().copied().collect() })
    }

    /// Conjunction with another event, `None` when they disagree.
    pub fn and(&self, other: &Event) -> Option<Event> {
        Event::new(self.pairs().chain(other.pairs()))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.vars.iter().copied().zip(self.vals.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

/// Anything that can report local probabilities of events.
pub trait PseudoDistribution {
    /// `Pr[X_vars = vals]`, or `None` if the event lies beyond the stored level.
    fn prob(&self, event: &Event) -> Option<f64>;
    fn fixing(&self) -> &PartialAssignment;
    fn structural(&self) -> Structural;
    fn eq_tol(&self) -> f64;
    fn psd_tol(&self) -> f64;
}

/// Residuals of the unit, consistency and range constraints and the PSD margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Structural {
    pub unit: f64,
    pub consistency: f64,
    pub range: f64,
    pub min_eigenvalue: f64,
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSolution {
    free: Vec<usize>,
    level: usize,
    max_set: usize,
    moments: HashMap<u64, f64>,
    fixing: PartialAssignment,
    pub psd_tol: f64,
    pub eq_tol: f64,
    /// Conditioning events applied so far, oldest first.
    pub history: Vec<Event>,
}

impl MomentSolution {
    /// Builds a solution from raw moments over `free` (global ids, sorted).
    pub fn from_moments(free: Vec<usize>, level: usize, moments: HashMap<u64, f64>, fixing: PartialAssignment) -> Result<Self> {
        if free.len() > MAX_FREE {
            return Err(Error::InvalidParams(format!("{} free vertices exceeds {MAX_FREE}", free.len())));
        }
        if free.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("free vertices must be sorted and distinct".into()));
        }
        if free.iter().any(|&v| fixing.get(v).is_some()) {
            return Err(Error::InvalidParams("a free vertex is also fixed".into()));
        }
        let max_set = (2 * level).min(free.len());
        let mut sol = Self { free, level, max_set, moments, fixing, psd_tol: DEFAULT_PSD_TOL, eq_tol: DEFAULT_EQ_TOL, history: Vec::new() };
        sol.moments.insert(0, sol.moments.get(&0).copied().unwrap_or(1.0));
        for t in subsets_up_to(sol.free.len(), max_set) {
            if !sol.moments.contains_key(&t) {
                return Err(Error::InvalidParams(format!("missing moment for subset {t:#b}")));
            }
        }
        Ok(sol)
    }

    /// Point mass at `f` restricted to the free vertices.
    pub fn embed_integral(f: &Assignment, free: Vec<usize>, level: usize, fixing: PartialAssignment) -> Result<Self> {
        let ones: u64 = free.iter().enumerate().filter(|(_, &v)| f.get(v) == 1).fold(0, |a, (i, _)| a | (1 << i));
        let max_set = (2 * level).min(free.len());
        let moments = subsets_up_to(free.len(), max_set).into_iter().map(|t| (t, if t & !ones == 0 { 1.0 } else { 0.0 })).collect();
        Self::from_moments(free, level, moments, fixing)
    }

    /// Independent bits with `Pr[X_v = 1] = p(v)`.
    pub fn product(free: Vec<usize>, level: usize, fixing: PartialAssignment, p: impl Fn(usize) -> f64) -> Result<Self> {
        let max_set = (2 * level).min(free.len());
        let moments = subsets_up_to(free.len(), max_set).into_iter().map(|t| (t, bits_of(t).map(|i| p(free[i])).product())).collect();
        Self::from_moments(free, level, moments, fixing)
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Largest subset size with a stored moment.
    pub fn max_set(&self) -> usize {
        self.max_set
    }

    pub fn moment(&self, mask: u64) -> f64 {
        self.moments[&mask]
    }

    pub fn moments(&self) -> &HashMap<u64, f64> {
        &self.moments
    }

    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.free.binary_search(&v).ok()
    }

    /// `Pr[X_mask = bits]` over local indices by inclusion-exclusion.
    pub fn local_prob(&self, mask: u64, bits: u64) -> Option<f64> {
        if mask.count_ones() as usize > self.max_set {
            return None;
        }
        let zeros = mask & !bits;
        let mut total = 0.0;
        for w in submasks(zeros) {
            let y = self.moments[&(bits | w)];
            if w.count_ones() % 2 == 0 {
                total += y;
            } else {
                total -= y;
            }
        }
        Some(total)
    }

    /// Splits an event into its free part as local masks, or `None` when it
    /// contradicts the fixing.
    fn localize(&self, e: &Event) -> Option<(u64, u64)> {
        let mut mask = 0u64;
        let mut bits = 0u64;
        for (v, b) in e.pairs() {
            match self.fixing.get(v) {
                Some(h) if h != b => return None,
                Some(_) => {}
                None => {
                    let i = self.local_index(v).expect("vertex is neither free nor fixed");
                    mask |= 1 << i;
                    if b == 1 {
                        bits |= 1 << i;
                    }
                }
            }
        }
        Some((mask, bits))
    }

    /// Subset moment matrix over subsets of size `≤ d`.
    pub fn moment_matrix(&self, d: usize) -> DMatrix<f64> {
        let sets = subsets_up_to(self.free.len(), d);
        let n = sets.len();
        DMatrix::from_fn(n, n, |a, b| self.moments.get(&(sets[a] | sets[b])).copied().unwrap_or(f64::NAN))
    }

    /// Dense Gram matrix over all atoms of size `≤ level`.
    pub fn atom_matrix(&self) -> AtomMatrix {
        let index = IndexSet::new(self.free.clone(), self.level);
        let n = index.atoms.len();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let (sa, aa) = index.atoms[a];
                let (sb, ab) = index.atoms[b];
                let inter = sa & sb;
                let v = if (aa & inter) != (ab & inter) { 0.0 } else { self.local_prob(sa | sb, aa | ab).unwrap_or(f64::NAN) };
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        AtomMatrix { index, m, fixing: self.fixing.clone(), psd_tol: self.psd_tol, eq_tol: self.eq_tol }
    }

    /// Most negative local probability over the largest stored subsets.
    pub fn min_local_prob(&self) -> f64 {
        let d = self.max_set;
        let mut worst = f64::INFINITY;
        for t in subsets_up_to(self.free.len(), d) {
            if t.count_ones() as usize != d {
                continue;
            }
            for sub in submasks(t) {
                worst = worst.min(self.local_prob(t, sub).unwrap());
            }
        }
        if self.free.is_empty() {
            worst = self.moments[&0];
        }
        worst
    }

    /// Conditions on the event `X_U = β`. Vertices already fixed are checked
    /// against the fixing and cost no level.
    pub fn condition(&self, event: &Event) -> Result<MomentSolution> {
        let (umask, ubits) = match self.localize(event) {
            Some(x) => x,
            None => return Err(Error::ZeroProbabilityEvent(0.0)),
        };
        let u = umask.count_ones() as usize;
        if u > self.level {
            return Err(Error::LevelExhausted { needed: u, available: self.level });
        }
        let p = self.local_prob(umask, ubits).ok_or(Error::LevelExhausted { needed: u, available: self.level })?;
        if p < COND_FLOOR {
            return Err(Error::ZeroProbabilityEvent(p));
        }
        let keep: Vec<usize> = (0..self.free.len()).filter(|&i| (umask >> i) & 1 == 0).collect();
        let new_free: Vec<usize> = keep.iter().map(|&i| self.free[i]).collect();
        let new_max = self.max_set - u;
        let mut moments = HashMap::new();
        for t in subsets_up_to(new_free.len(), new_max) {
            let old: u64 = bits_of(t).fold(0, |a, j| a | (1 << keep[j]));
            let joint = self.local_prob(old | umask, old | ubits).expect("within stored level");
            moments.insert(t, joint / p);
        }
        let mut fixing = self.fixing.clone();
        for (v, b) in event.pairs() {
            fixing.set(v, b);
        }
        let mut history = self.history.clone();
        history.push(event.clone());
        Ok(MomentSolution {
            free: new_free,
            level: self.level - u,
            max_set: new_max,
            moments,
            fixing,
            psd_tol: self.psd_tol,
            eq_tol: self.eq_tol,
            history,
        })
    }

    /// Marginal law of up to four vertices, clamped and renormalized.
    pub fn local_distribution(&self, vars: &[usize]) -> Result<JointDist> {
        let m = vars.len();
        if m > crate::infotheory::MAX_VARS {
            return Err(Error::InvalidParams(format!("{m} variables requested")));
        }
        let mut probs = vec![0.0; 1 << m];
        for (x, slot) in probs.iter_mut().enumerate() {
            let e = Event::new(vars.iter().enumerate().map(|(i, &v)| (v, ((x >> i) & 1) as u8)));
            *slot = match e {
                None => 0.0,
                Some(e) => self.prob(&e).ok_or(Error::LevelExhausted { needed: e.len(), available: self.max_set })?,
            };
        }
        for p in probs.iter_mut() {
            *p = p.max(0.0);
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("zero local mass".into()));
        }
        JointDist::new(vars.to_vec(), probs.into_iter().map(|p| p / total).collect())
    }

    /// `μ_i = 2 Pr[X_i = 1] − 1`, clamped to `[−1, 1]`.
    pub fn bias(&self, v: usize) -> f64 {
        let p = self.prob(&Event { vars: vec![v], vals: vec![1] }).unwrap_or(0.5);
        (2.0 * p - 1.0).clamp(-1.0, 1.0)
    }

    /// `Pr[X_u ≠ X_v]`.
    pub fn disagreement(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let a = Event::new([(u, 0), (v, 1)]).and_then(|e| self.prob(&e)).unwrap_or(0.0);
        let b = Event::new([(u, 1), (v, 0)]).and_then(|e| self.prob(&e)).unwrap_or(0.0);
        (a + b).clamp(0.0, 1.0)
    }

    /// `⟨v_u, v_v⟩` for the ±1 vectors `v_i = v_{i,1} − v_{i,0}`.
    pub fn vector_inner(&self, u: usize, v: usize) -> f64 {
        let mut total = 0.0;
        for a in 0..2u8 {
            for b in 0..2u8 {
                let sign = if a == b { 1.0 } else { -1.0 };
                if let Some(p) = Event::new([(u, a), (v, b)]).and_then(|e| self.prob(&e)) {
                    total += sign * p;
                }
            }
        }
        total
    }
}

impl PseudoDistribution for MomentSolution {
    fn prob(&self, event: &Event) -> Option<f64> {
        match self.localize(event) {
            None => Some(0.0),
            Some((mask, bits)) => self.local_prob(mask, bits),
        }
    }

    fn fixing(&self) -> &PartialAssignment {
        &self.fixing
    }

    fn structural(&self) -> Structural {
        let unit = (self.moments[&0] - 1.0).abs();
        let range = (-self.min_local_prob()).max(0.0);
        let min_eigenvalue = min_eigenvalue(&self.moment_matrix(self.level.min(self.free.len())));
        Structural { unit, consistency: 0.0, range, min_eigenvalue }
    }

    fn eq_tol(&self) -> f64 {
        self.eq_tol
    }

    fn psd_tol(&self) -> f64 {
        self.psd_tol
    }
}

/// Canonically ordered atoms `(S, α)` over local indices: by size, then `S`
/// lexicographically, then `α` lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub free: Vec<usize>,
    pub level: usize,
    /// `(subset mask, ones mask)` pairs.
    pub atoms: Vec<(u64, u64)>,
}

impl IndexSet {
    pub fn new(free: Vec<usize>, level: usize) -> Self {
        let mut atoms = Vec::new();
        for s in subsets_up_to(free.len(), level) {
            let idx: Vec<usize> = bits_of(s).collect();
            let size = idx.len();
            for x in 0..(1u64 << size) {
                let ones = idx.iter().enumerate().filter(|(p, _)| (x >> (size - 1 - p)) & 1 == 1).fold(0u64, |a, (_, &i)| a | (1 << i));
                atoms.push((s, ones));
            }
        }
        Self { free, level, atoms }
    }

    pub fn position(&self, atom: (u64, u64)) -> Option<usize> {
        self.atoms.iter().position(|&a| a == atom)
    }
}

/// Explicit Gram matrix over an index set. Arbitrary (even inconsistent)
/// matrices are representable, which makes it the reference for structural checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomMatrix {
    pub index: IndexSet,
    pub m: DMatrix<f64>,
    pub fixing: PartialAssignment,
    pub psd_tol: f64,
    pub eq_tol: f64,
}

impl AtomMatrix {
    fn localize(&self, e: &Event) -> Option<Option<(u64, u64)>> {
        let mut mask = 0u64;
        let mut bits = 0u64;
        for (v, b) in e.pairs() {
            match self.fixing.get(v) {
                Some(h) if h != b => return Some(None),
                Some(_) => {}
                None => {
                    let i = self.index.free.binary_search(&v).ok()?;
                    mask |= 1 << i;
                    if b == 1 {
                        bits |= 1 << i;
                    }
                }
            }
        }
        Some(Some((mask, bits)))
    }

    /// Dump as the atom list plus the dense lower triangle.
    pub fn to_dump(&self) -> serde_json::Value {
        let lower: Vec<Vec<f64>> = (0..self.m.nrows()).map(|i| (0..=i).map(|j| self.m[(i, j)]).collect()).collect();
        serde_json::json!({ "free": self.index.free, "level": self.index.level, "atoms": self.index.atoms, "lower": lower })
    }
}

impl PseudoDistribution for AtomMatrix {
    fn prob(&self, event: &Event) -> Option<f64> {
        match self.localize(event)? {
            None => Some(0.0),
            Some(atom) => self.index.position(atom).map(|p| self.m[(p, 0)]),
        }
    }

    fn fixing(&self) -> &PartialAssignment {
        &self.fixing
    }

    fn structural(&self) -> Structural {
        let n = self.m.nrows();
        let unit = (self.m[(0, 0)] - 1.0).abs();
        let pos: HashMap<(u64, u64), usize> = self.index.atoms.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let mut consistency = 0.0f64;
        let mut range = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let v = self.m[(a, b)];
                range = range.max(-v).max(v - 1.0);
                consistency = consistency.max((v - self.m[(b, a)]).abs());
                let (sa, aa) = self.index.atoms[a];
                let (sb, ab) = self.index.atoms[b];
                let inter = sa & sb;
                let expected = if (aa & inter) != (ab & inter) { Some(0.0) } else { pos.get(&(sa | sb, aa | ab)).map(|&p| self.m[(p, 0)]) };
                if let Some(x) = expected {
                    consistency = consistency.max((v - x).abs());
                }
            }
        }
        Structural { unit, consistency, range, min_eigenvalue: min_eigenvalue(&self.m) }
    }

    fn eq_tol(&self) -> f64 {
        self.eq_tol
    }

    fn psd_tol(&self) -> f64 {
        self.psd_tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    Objective(usize),
    Active(usize),
}

/// `Σ coef · Pr[event] ≥ 0`, generated for one conditioning prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub tag: Tag,
    pub prefix: Event,
    pub terms: Vec<(Event, f64)>,
}

impl Constraint {
    pub fn value(&self, sol: &impl PseudoDistribution) -> Option<f64> {
        let mut total = 0.0;
        for (e, c) in &self.terms {
            total += c * sol.prob(e)?;
        }
        Some(total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub free: Vec<usize>,
    pub level: usize,
    pub epsilon: f64,
    pub fixing: PartialAssignment,
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    /// Only the constraints with the empty prefix.
    pub fn unconditioned(&self) -> ConstraintSet {
        ConstraintSet { constraints: self.constraints.iter().filter(|c| c.prefix.is_empty()).cloned().collect(), ..self.clone() }
    }
}

/// Adds `w · Pr[prefix ∧ e cut]` for edge `(u, v)` under the fixing `h`.
fn add_cut_terms(acc: &mut BTreeMap<Event, f64>, prefix: &Event, h: &PartialAssignment, (u, v): (usize, usize), w: f64) {
    let options: Vec<Vec<(usize, u8)>> = match (h.get(u), h.get(v)) {
        (Some(a), Some(b)) => {
            if a != b {
                vec![vec![]]
            } else {
                vec![]
            }
        }
        (Some(a), None) => vec![vec![(v, 1 - a)]],
        (None, Some(b)) => vec![vec![(u, 1 - b)]],
        (None, None) => vec![vec![(u, 0), (v, 1)], vec![(u, 1), (v, 0)]],
    };
    for opt in options {
        if let Some(e) = Event::new(opt).and_then(|e| e.and(prefix)) {
            *acc.entry(e).or_insert(0.0) += w;
        }
    }
}

/// Objective and active-edge families for every prefix `(S, α)` with
/// `|S| ≤ r − 2` over the free vertices.
pub fn build_constraints(
    inst: &SimInstance,
    prep: &PreprocessResult,
    h: &PartialAssignment,
    epsilon: f64,
    r: usize,
) -> Result<ConstraintSet> {
    if r < 2 {
        return Err(Error::InvalidParams(format!("level {r} < 2")));
    }
    let targets = inst.targets().ok_or_else(|| Error::InvalidParams("targets are required".into()))?;
    let s_star = prep.s_star_set(inst.n());
    if s_star.iter().any(|v| h.get(v).is_none()) || h.domain() != s_star {
        return Err(Error::InvalidParams("fixing must be total on S*".into()));
    }
    let free = s_star.complement();
    let mut prefixes = Vec::new();
    for s in subsets_up_to(free.len(), r - 2) {
        let idx: Vec<usize> = bits_of(s).collect();
        for x in 0..(1u64 << idx.len()) {
            prefixes.push(Event::new(idx.iter().enumerate().map(|(p, &i)| (free[i], ((x >> p) & 1) as u8))).unwrap());
        }
    }
    let active = inst.active_edges(&s_star);
    let mut constraints = Vec::new();
    for prefix in &prefixes {
        for (l, &target) in targets.iter().enumerate() {
            let mut acc = BTreeMap::new();
            for (e, &uv) in inst.edges().iter().enumerate() {
                let w = inst.weight(l, e);
                if w > 0.0 {
                    add_cut_terms(&mut acc, prefix, h, uv, w);
                }
            }
            *acc.entry(prefix.clone()).or_insert(0.0) -= (1.0 - 3.0 * epsilon) * target;
            constraints.push(Constraint { tag: Tag::Objective(l), prefix: prefix.clone(), terms: acc.into_iter().collect() });
        }
        for &l in &prep.low {
            let mut acc = BTreeMap::new();
            for &e in &active {
                let w = inst.weight(l, e);
                if w > 0.0 {
                    add_cut_terms(&mut acc, prefix, h, inst.edges()[e], w);
                }
            }
            *acc.entry(prefix.clone()).or_insert(0.0) -= epsilon / 3.0 * inst.active_degree_total(l, &s_star);
            constraints.push(Constraint { tag: Tag::Active(l), prefix: prefix.clone(), terms: acc.into_iter().collect() });
        }
    }
    Ok(ConstraintSet { free, level: r, epsilon, fixing: h.clone(), constraints })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Violation per constraint, in the order of the set.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub worst: Option<(Tag, Event)>,
    /// Constraints whose events lie beyond the solution's level.
    pub unevaluated: usize,
    pub structural: Structural,
    pub feasible: bool,
}

pub fn check_feasible(sol: &impl PseudoDistribution, cs: &ConstraintSet) -> FeasibilityReport {
    check_feasible_with(sol, cs, sol.eq_tol(), sol.psd_tol())
}

pub fn check_feasible_with(sol: &impl PseudoDistribution, cs: &ConstraintSet, eq_tol: f64, psd_tol: f64) -> FeasibilityReport {
    let mut residuals = Vec::with_capacity(cs.constraints.len());
    let mut max_residual = 0.0f64;
    let mut worst = None;
    let mut unevaluated = 0;
    for c in &cs.constraints {
        match c.value(sol) {
            Some(v) => {
                let r = (-v).max(0.0);
                if r > max_residual {
                    max_residual = r;
                    worst = Some((c.tag, c.prefix.clone()));
                }
                residuals.push(r);
            }
            None => {
                unevaluated += 1;
                residuals.push(f64::NAN);
            }
        }
    }
    let structural = sol.structural();
    let feasible = unevaluated == 0
        && max_residual <= eq_tol
        && structural.unit <= eq_tol
        && structural.consistency <= eq_tol
        && structural.range <= eq_tol
        && structural.min_eigenvalue >= -psd_tol;
    FeasibilityReport { residuals, max_residual, worst, unevaluated, structural, feasible }
}
