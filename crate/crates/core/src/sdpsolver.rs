//! Interior-point solve of the lifted constraint system.
//!
//! Variables are the moments `y_T` (`0 < |T| ≤ D`) and a slack `λ`. Every
//! objective and active-edge constraint is required to hold with margin `λ`,
//! and `λ` is maximized (capped at 1). The local laws of all `D`-sets are
//! constrained nonnegative; when `D < |F|` the moment matrix `M_r(y)` is
//! additionally constrained PSD. When `D = |F|` the moments describe a full
//! distribution and the PSD block is implied.

use std::collections::HashMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasserre::{
    check_feasible_with, min_eigenvalue, subsets_up_to, ConstraintSet, Event, FeasibilityReport, MomentSolution, PseudoDistribution,
    DEFAULT_EQ_TOL, DEFAULT_PSD_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub max_iters: u32,
    pub eq_tol: f64,
    pub psd_tol: f64,
    pub slack_objective: bool,
    /// Refuse problems whose PSD block would exceed this dimension.
    pub max_psd_dim: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { max_iters: 200, eq_tol: DEFAULT_EQ_TOL, psd_tol: DEFAULT_PSD_TOL, slack_objective: true, max_psd_dim: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub solution: MomentSolution,
    /// Optimal common margin `λ*` of the inequality families.
    pub slack: f64,
    /// Weight of the uniform distribution mixed in to restore exact
    /// nonnegativity and PSD.
    pub mix: f64,
    pub iterations: u32,
    pub report: FeasibilityReport,
}

/// Sparse linear form `c0 + Σ c_j y_j` over moment variables.
#[derive(Debug, Clone, Default)]
struct Affine {
    constant: f64,
    coefs: HashMap<usize, f64>,
}

impl Affine {
    fn add(&mut self, var: Option<usize>, c: f64) {
        match var {
            None => self.constant += c,
            Some(j) => *self.coefs.entry(j).or_insert(0.0) += c,
        }
    }
}

struct Layout {
    free: Vec<usize>,
    sets: Vec<u64>,
    var_of: HashMap<u64, usize>,
}

impl Layout {
    fn new(free: Vec<usize>, d: usize) -> Self {
        let sets = subsets_up_to(free.len(), d);
        let var_of = sets.iter().skip(1).enumerate().map(|(j, &t)| (t, j)).collect();
        Self { free, sets, var_of }
    }

    fn nvars(&self) -> usize {
        self.sets.len() - 1
    }

    fn var(&self, t: u64) -> Option<usize> {
        if t == 0 {
            None
        } else {
            Some(self.var_of[&t])
        }
    }

    /// `Pr[X_mask = bits]` as an affine form by inclusion-exclusion.
    fn prob_form(&self, mask: u64, bits: u64, scale: f64, out: &mut Affine) {
        let zeros = mask & !bits;
        let mut w = zeros;
        loop {
            let sign = if w.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            out.add(self.var(bits | w), sign * scale);
            if w == 0 {
                break;
            }
            w = (w - 1) & zeros;
        }
    }

    /// Local masks of an event, `None` if it contradicts the fixing.
    fn localize(&self, e: &Event, cs: &ConstraintSet) -> Option<(u64, u64)> {
        let mut mask = 0;
        let mut bits = 0;
        for (v, b) in e.pairs() {
            match cs.fixing.get(v) {
                Some(h) if h != b => return None,
                Some(_) => {}
                None => {
                    let i = self.free.binary_search(&v).expect("event vertex is free");
                    mask |= 1u64 << i;
                    if b == 1 {
                        bits |= 1u64 << i;
                    }
                }
            }
        }
        Some((mask, bits))
    }
}

struct Rows {
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
}

impl Rows {
    /// Appends `form + c·λ ≥ 0`, written as `s = b − A x`.
    fn push(&mut self, form: &Affine, lambda: Option<(usize, f64)>) {
        let row = self.b.len();
        for (&j, &c) in &form.coefs {
            if c != 0.0 {
                self.cols[j].push((row, -c));
            }
        }
        if let Some((j, c)) = lambda {
            self.cols[j].push((row, -c));
        }
        self.b.push(form.constant);
    }

    fn matrix(mut self) -> (CscMatrix<f64>, Vec<f64>) {
        let m = self.b.len();
        let n = self.cols.len();
        let mut colptr = vec![0usize];
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        for col in self.cols.iter_mut() {
            col.sort_by_key(|&(r, _)| r);
            let mut last: Option<usize> = None;
            for &(r, v) in col.iter() {
                if last == Some(r) {
                    *nzval.last_mut().unwrap() += v;
                } else {
                    rowval.push(r);
                    nzval.push(v);
                    last = Some(r);
                }
            }
            colptr.push(rowval.len());
        }
        (CscMatrix::new(m, n, colptr, rowval, nzval), self.b)
    }
}

pub fn solve(cs: &ConstraintSet, cfg: &SolveConfig) -> Result<SolveOutcome> {
    if !(cfg.eq_tol > 0.0 && cfg.psd_tol > 0.0) {
        return Err(Error::InvalidParams("tolerances must be positive".into()));
    }
    let m = cs.free.len();
    let r = cs.level;
    let d = (2 * r).min(m);
    let layout = Layout::new(cs.free.clone(), d);
    let nv = layout.nvars();
    let with_lambda = cfg.slack_objective;
    let ncols = nv + usize::from(with_lambda);
    let lam = with_lambda.then_some(nv);
    let mut rows = Rows { cols: vec![Vec::new(); ncols], b: Vec::new() };

    for c in &cs.constraints {
        let mut form = Affine::default();
        for (e, coef) in &c.terms {
            if let Some((mask, bits)) = layout.localize(e, cs) {
                layout.prob_form(mask, bits, *coef, &mut form);
            }
        }
        rows.push(&form, lam.map(|j| (j, -1.0)));
    }
    for &t in layout.sets.iter().filter(|t| t.count_ones() as usize == d) {
        let mut sub = t;
        loop {
            let mut form = Affine::default();
            layout.prob_form(t, sub, 1.0, &mut form);
            rows.push(&form, None);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & t;
        }
    }
    if let Some(j) = lam {
        let form = Affine { constant: 1.0, coefs: HashMap::new() };
        rows.push(&form, Some((j, -1.0)));
    }
    let n_nonneg = rows.b.len();
    let mut cones: Vec<SupportedConeT<f64>> = vec![NonnegativeConeT(n_nonneg)];
    let psd_sets = subsets_up_to(m, r);
    let needs_psd = d < m;
    if needs_psd {
        let dim = psd_sets.len();
        if dim > cfg.max_psd_dim {
            return Err(Error::SolverFailure(format!("PSD block of dimension {dim} exceeds {}", cfg.max_psd_dim)));
        }
        let s2 = std::f64::consts::SQRT_2;
        for j in 0..dim {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { s2 };
                let mut form = Affine::default();
                form.add(layout.var(psd_sets[i] | psd_sets[j]), scale);
                rows.push(&form, None);
            }
        }
        cones.push(PSDTriangleConeT(dim));
    }

    let (a, b) = rows.matrix();
    let p = CscMatrix::<f64>::zeros((ncols, ncols));
    let mut q = vec![0.0; ncols];
    if let Some(j) = lam {
        q[j] = -1.0;
    }
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(cfg.max_iters)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .build()
        .map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
    solver.solve();
    let status = solver.solution.status;
    let x = solver.solution.x.clone();
    let iterations = solver.solution.iterations;
    let slack = lam.map(|j| x[j]).unwrap_or(0.0);
    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::MaxIterations | SolverStatus::MaxTime => return Err(Error::MaxItersExceeded { slack }),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            return Err(Error::Infeasible { slack: f64::NEG_INFINITY })
        }
        other => return Err(Error::SolverFailure(format!("{other:?}"))),
    }
    if with_lambda && slack < -cfg.eq_tol {
        return Err(Error::Infeasible { slack });
    }

    let mut moments: HashMap<u64, f64> = layout.sets.iter().map(|&t| (t, layout.var(t).map(|j| x[j]).unwrap_or(1.0))).collect();
    let raw = MomentSolution::from_moments(cs.free.clone(), r, moments.clone(), cs.fixing.clone())?;
    let mix = exactify_weight(&raw);
    if mix > 0.0 {
        for (&t, y) in moments.iter_mut() {
            *y = (1.0 - mix) * *y + mix * 0.5f64.powi(t.count_ones() as i32);
        }
    }
    let mut solution = MomentSolution::from_moments(cs.free.clone(), r, moments, cs.fixing.clone())?;
    solution.eq_tol = cfg.eq_tol;
    solution.psd_tol = cfg.psd_tol;
    let report = check_feasible_with(&solution, cs, cfg.eq_tol, cfg.psd_tol);
    let loose = check_feasible_with(&solution, cs, 10.0 * cfg.eq_tol, 10.0 * cfg.psd_tol);
    if !loose.feasible {
        return Err(Error::SolverFailure(format!(
            "solution misses tolerances: residual {:e}, structural {:?}",
            report.max_residual, report.structural
        )));
    }
    Ok(SolveOutcome { solution, slack, mix, iterations, report })
}

/// Smallest weight `η` such that `(1−η)·y + η·uniform` has nonnegative local
/// laws and a PSD moment matrix.
pub fn exactify_weight(sol: &MomentSolution) -> f64 {
    let d = sol.max_set();
    let u = 0.5f64.powi(d as i32);
    let mut eta = 0.0f64;
    let p = sol.min_local_prob();
    if p < 0.0 {
        eta = eta.max(-p / (u - p));
    }
    let r = sol.level().min(sol.free().len());
    let lam = min_eigenvalue(&sol.moment_matrix(r));
    if lam < 0.0 {
        let uni = MomentSolution::product(sol.free().to_vec(), sol.level(), PseudoDistribution::fixing(sol).clone(), |_| 0.5)
            .expect("uniform moments are well formed");
        let lu = min_eigenvalue(&uni.moment_matrix(r));
        eta = eta.max(-lam / (lu - lam));
    }
    if eta > 0.0 {
        // Round up by a few ulps so the mixed point is on the safe side.
        eta = (eta * (1.0 + 1e-12) + 1e-15).min(1.0);
    }
    eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{PartialAssignment, SimInstance};
    use crate::lasserre::{build_constraints, check_feasible};
    use crate::preprocess::PreprocessResult;

    fn prep_with(s_star: Vec<usize>, k: usize) -> PreprocessResult {
        PreprocessResult {
            s_star: s_star.into_iter().map(|v| (v, 0)).collect(),
            counts: vec![0; k],
            low: (0..k).collect(),
            high: vec![],
            effective_t: 6,
            trace: Vec::new(),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn single_edge_feasible() {
        let inst = SimInstance::new(2, vec![vec![(0, 1, 1.0)]], Some(vec![1.0])).unwrap().normalize().unwrap();
        let cs = build_constraints(&inst, &prep_with(vec![], 1), &PartialAssignment::empty(2), 0.1, 2).unwrap();
        let out = solve(&cs, &SolveConfig::default()).unwrap();
        assert!(out.solution.disagreement(0, 1) >= 0.7 - 1e-7);
        assert!(check_feasible(&out.solution, &cs).feasible);
        // The margin is maximized at a full cut.
        assert!((out.slack - 0.3).abs() < 1e-6);
    }

    #[test]
    fn contradictory_fixing_infeasible() {
        let inst = SimInstance::new(2, vec![vec![(0, 1, 1.0)], vec![(0, 1, 1.0)]], Some(vec![1.0, 1.0])).unwrap().normalize().unwrap();
        let h = PartialAssignment(vec![Some(0), Some(0)]);
        let cs = build_constraints(&inst, &prep_with(vec![0, 1], 2), &h, 0.1, 2).unwrap();
        match solve(&cs, &SolveConfig::default()) {
            Err(Error::Infeasible { slack }) => assert!((slack + 0.7).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn psd_block_path() {
        // Five free vertices at level 2 keep D = 4 < 5, so the PSD cone is active.
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in u + 1..5 {
                edges.push((u, v, 1.0));
            }
        }
        let inst = SimInstance::new(5, vec![edges], None).unwrap().normalize().unwrap();
        let (_, rep) = inst.brute_force_opt(20).unwrap();
        let inst = inst.with_targets(Some(rep.per_instance.clone()));
        let cs = build_constraints(&inst, &prep_with(vec![], 1), &PartialAssignment::empty(5), 0.1, 2).unwrap();
        let out = solve(&cs, &SolveConfig::default()).unwrap();
        assert!(out.report.feasible);
        assert!(out.solution.structural().min_eigenvalue >= -1e-8);
        assert_eq!(out.solution.max_set(), 4);
    }

    #[test]
    fn exactify_repairs_negative_mass() {
        let mut mom = HashMap::new();
        mom.insert(0, 1.0);
        mom.insert(1, 1.0 + 1e-6);
        let sol = MomentSolution::from_moments(vec![0], 1, mom, PartialAssignment::empty(1)).unwrap();
        let eta = exactify_weight(&sol);
        assert!(eta > 0.0 && eta < 1e-5);
        let fixed = (1.0 - eta) * (1.0 + 1e-6) + eta * 0.5;
        assert!(fixed <= 1.0);
    }
}
