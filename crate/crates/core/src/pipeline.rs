//! End-to-end solve: preprocess, enumerate fixings of `S★`, solve and
//! condition the lifted relaxation, round, then post-process over `S★`.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::independence::{make_independent, IndependenceConfig, IndependenceReport};
use crate::instance::{ratio_of, Assignment, CutReport, PartialAssignment, SimInstance, DEFAULT_BRUTE_FORCE_CAP};
use crate::lasserre::{build_constraints, MomentSolution, PseudoDistribution};
use crate::perturb::perturb_lenient;
use crate::preprocess::{run_preprocess, Params, PreprocessResult, DEFAULT_MAX_S_STAR, DEFAULT_MAX_T};
use crate::rounding::{round_many, sample_rng, RoundingInputs, RoundingPoly, DEFAULT_NUM_SAMPLES};
use crate::sdpsolver::{solve, SolveConfig};

pub const SCHEMA_VERSION: u32 = 1;
/// Rounding-side constant used in the low-variance concentration diagnostic.
pub const ROUNDING_ALPHA: f64 = 0.878001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HEnumeration {
    Exhaustive,
    /// Only `h = f★|_{S★}`.
    Planted(Vec<u8>),
    /// `m` distinct fixings drawn from the seed (all of them if fewer exist).
    Sampled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostProcess {
    ExhaustiveH,
    PerturbOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub epsilon: f64,
    /// Requested relaxation level; lowered to fit the free set and the PSD cap.
    pub r_base: usize,
    /// Cap on conditionings per fixing, on top of `⌈2k/δ⌉`.
    pub cond_edges_cap: Option<usize>,
    pub num_samples: usize,
    pub seed: u64,
    pub max_t: usize,
    pub max_s_star: usize,
    pub h_enumeration: HEnumeration,
    pub postprocess: PostProcess,
    /// Independence threshold; `ε²` when absent.
    pub delta: Option<f64>,
    pub enumerate_branches: bool,
    pub rounding: RoundingPoly,
    pub solver: SolveConfig,
    pub brute_force_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            r_base: 4,
            cond_edges_cap: None,
            num_samples: DEFAULT_NUM_SAMPLES,
            seed: 0,
            max_t: DEFAULT_MAX_T,
            max_s_star: DEFAULT_MAX_S_STAR,
            h_enumeration: HEnumeration::Exhaustive,
            postprocess: PostProcess::ExhaustiveH,
            delta: None,
            enumerate_branches: false,
            rounding: RoundingPoly::standard(),
            solver: SolveConfig::default(),
            brute_force_cap: DEFAULT_BRUTE_FORCE_CAP,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.2) {
            return Err(Error::InvalidParams(format!("epsilon {} outside (0, 1/5]", self.epsilon)));
        }
        if self.max_t == 0 || self.max_s_star == 0 || self.num_samples == 0 {
            return Err(Error::InvalidParams("caps and num_samples must be positive".into()));
        }
        if self.r_base < 2 {
            return Err(Error::InvalidParams("r_base must be at least 2".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::InvalidParams("delta must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FixingStatus {
    /// No free vertices; `h` is the whole assignment.
    Trivial,
    Solved {
        level: usize,
        slack: f64,
        mix: f64,
        iterations: u32,
        max_residual: f64,
    },
    Infeasible {
        level: usize,
        slack: f64,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixingReport {
    /// `(vertex, bit)` over `S★`.
    pub h: Vec<(usize, u8)>,
    pub status: FixingStatus,
    pub independence: Option<IndependenceReport>,
    /// `min_ratio` of `h ∪ g` per sample, before post-processing.
    pub raw_ratios: Vec<f64>,
    /// `min_ratio` per sample after post-processing.
    pub sample_ratios: Vec<f64>,
    /// Fraction of samples with `val(h∪g) ≥ (α − 4ε)c_ℓ`, per low instance.
    pub low_concentration: Vec<(usize, f64)>,
    /// Per-instance mean and variance of `val(h∪g)` over the samples.
    pub moments: Vec<InstanceMoments>,
    pub best: Option<CutReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMoments {
    pub instance: usize,
    pub mean: f64,
    pub variance: f64,
    /// `Var[Y_ℓ]/E[Y_ℓ]²`, absent when the mean is zero.
    pub relative_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub params: Params,
    pub targets: Vec<f64>,
    pub targets_from_oracle: bool,
    pub prep: PreprocessResult,
    pub fixings: Vec<FixingReport>,
    pub chosen: Option<Vec<u8>>,
    pub report: Option<CutReport>,
    pub min_ratio: Option<f64>,
    /// Best of `num_samples` uniformly random cuts; not part of the selection.
    pub baseline: CutReport,
    pub warnings: Vec<String>,
}

fn score(r: &CutReport) -> f64 {
    r.min_ratio.unwrap_or(r.min_value)
}

fn better(a: &CutReport, b: &CutReport) -> bool {
    let (sa, sb) = (score(a), score(b));
    sa > sb || (sa == sb && a.min_value > b.min_value)
}

/// Per-`g` decomposition of `val(h′ ∪ g)` over `h′ : S★ → {0,1}`.
struct Decomposition {
    s: Vec<usize>,
    /// `internal[x][ℓ]`: weight cut inside `S★` under `h′ = x`.
    internal: Vec<Vec<f64>>,
}

impl Decomposition {
    fn new(inst: &SimInstance, s: Vec<usize>) -> Self {
        let k = inst.k();
        let pos = |v: usize| s.iter().position(|&w| w == v);
        let inner: Vec<(usize, usize, usize)> =
            inst.edges().iter().enumerate().filter_map(|(e, &(a, b))| Some((e, pos(a)?, pos(b)?))).collect();
        let internal = (0..1u64 << s.len())
            .map(|x| {
                let mut vals = vec![0.0; k];
                for &(e, i, j) in &inner {
                    if ((x >> i) ^ (x >> j)) & 1 == 1 {
                        for (l, v) in vals.iter_mut().enumerate() {
                            *v += inst.weight(l, e);
                        }
                    }
                }
                vals
            })
            .collect();
        Self { s, internal }
    }

    /// Best `h′` for completion `g`, visiting `h′` in Gray-code order.
    fn best(&self, inst: &SimInstance, g: &Assignment, targets: &[f64]) -> (u64, Vec<f64>) {
        let k = inst.k();
        let in_s = |v: usize| self.s.contains(&v);
        let mut outside = vec![0.0; k];
        // cross[i][b][ℓ]: weight from s[i] to outside vertices cut when s[i] = b.
        let mut cross = vec![[vec![0.0; k], vec![0.0; k]]; self.s.len()];
        for (e, &(a, b)) in inst.edges().iter().enumerate() {
            match (in_s(a), in_s(b)) {
                (false, false) => {
                    if g.get(a) != g.get(b) {
                        for (l, o) in outside.iter_mut().enumerate() {
                            *o += inst.weight(l, e);
                        }
                    }
                }
                (true, false) | (false, true) => {
                    let (u, w) = if in_s(a) { (a, b) } else { (b, a) };
                    let i = self.s.iter().position(|&x| x == u).unwrap();
                    let side = usize::from(1 - g.get(w));
                    for (l, c) in cross[i][side].iter_mut().enumerate() {
                        *c += inst.weight(l, e);
                    }
                }
                (true, true) => {}
            }
        }
        let mut x = 0u64;
        let mut cross_sum: Vec<f64> = (0..k).map(|l| cross.iter().map(|c| c[0][l]).sum()).collect();
        let eval = |x: u64, cross_sum: &[f64]| -> (f64, f64, Vec<f64>) {
            let vals: Vec<f64> = (0..k).map(|l| outside[l] + cross_sum[l] + self.internal[x as usize][l]).collect();
            let min_value = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let s = ratio_of(&vals, targets).unwrap_or(min_value);
            (s, min_value, vals)
        };
        let mut best = eval(0, &cross_sum);
        let mut best_x = 0u64;
        for step in 1..(1u64 << self.s.len()) {
            let i = step.trailing_zeros() as usize;
            let old = ((x >> i) & 1) as usize;
            for l in 0..k {
                cross_sum[l] += cross[i][1 - old][l] - cross[i][old][l];
            }
            x ^= 1 << i;
            let cand = eval(x, &cross_sum);
            if cand.0 > best.0 || (cand.0 == best.0 && (cand.1 > best.1 || (cand.1 == best.1 && x < best_x))) {
                best = cand;
                best_x = x;
            }
        }
        (best_x, best.2)
    }
}

fn fixings(prep: &PreprocessResult, cfg: &PipelineConfig) -> Result<Vec<u64>> {
    let s = prep.s_star.len();
    match &cfg.h_enumeration {
        HEnumeration::Exhaustive => {
            if s > cfg.max_s_star || s >= 63 {
                return Err(Error::InvalidParams(format!("|S*| = {s} exceeds max_s_star {}", cfg.max_s_star)));
            }
            Ok((0..1u64 << s).collect())
        }
        HEnumeration::Planted(f) => {
            let x = prep.s_star.iter().enumerate().try_fold(0u64, |acc, (i, &(v, _))| {
                f.get(v).map(|&b| acc | (u64::from(b & 1) << i)).ok_or_else(|| Error::InvalidParams("planted assignment too short".into()))
            })?;
            Ok(vec![x])
        }
        HEnumeration::Sampled(m) => {
            if s < 63 && (1u64 << s) <= *m as u64 {
                return Ok((0..1u64 << s).collect());
            }
            let mut rng = sample_rng(cfg.seed, u64::MAX);
            let mut out: Vec<u64> = Vec::new();
            let mask = if s >= 64 { u64::MAX } else { (1u64 << s) - 1 };
            while out.len() < *m {
                let x = rng.next_u64() & mask;
                if !out.contains(&x) {
                    out.push(x);
                }
            }
            out.sort_unstable();
            Ok(out)
        }
    }
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    sample_rng(seed, stream).next_u64()
}

fn solve_fixing(
    inst: &SimInstance,
    prep: &PreprocessResult,
    h: &PartialAssignment,
    cfg: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> std::result::Result<(MomentSolution, FixingStatus), FixingStatus> {
    let m = inst.n() - prep.s_star.len();
    let mut r = cfg.r_base.min(m).max(2);
    loop {
        let cs = build_constraints(inst, prep, h, cfg.epsilon, r).map_err(|e| FixingStatus::Failed { reason: e.to_string() })?;
        match solve(&cs, &cfg.solver) {
            Ok(out) => {
                return Ok((
                    out.solution,
                    FixingStatus::Solved {
                        level: r,
                        slack: out.slack,
                        mix: out.mix,
                        iterations: out.iterations,
                        max_residual: out.report.max_residual,
                    },
                ))
            }
            Err(Error::Infeasible { slack }) => return Err(FixingStatus::Infeasible { level: r, slack }),
            Err(Error::SolverFailure(msg)) if msg.contains("PSD block") && r > 2 => {
                warnings.push(format!("level {r} too large ({msg}); retrying at {}", r - 1));
                r -= 1;
            }
            Err(e) => return Err(FixingStatus::Failed { reason: e.to_string() }),
        }
    }
}

fn run_fixing(
    inst: &SimInstance,
    prep: &PreprocessResult,
    cfg: &PipelineConfig,
    decomp: &Decomposition,
    targets: &[f64],
    index: u64,
    x: u64,
) -> Result<(FixingReport, Option<(Assignment, CutReport)>)> {
    let n = inst.n();
    let s_vertices = prep.s_star_vertices();
    let mut h = PartialAssignment::empty(n);
    for (i, &v) in s_vertices.iter().enumerate() {
        h.set(v, ((x >> i) & 1) as u8);
    }
    let mut rep = FixingReport {
        h: s_vertices.iter().map(|&v| (v, h.get(v).unwrap())).collect(),
        status: FixingStatus::Trivial,
        independence: None,
        raw_ratios: Vec::new(),
        sample_ratios: Vec::new(),
        low_concentration: Vec::new(),
        moments: Vec::new(),
        best: None,
        warnings: Vec::new(),
    };
    let completions: Vec<Assignment> = if s_vertices.len() == n {
        // The relaxation has no variables left: only the objective rows remain.
        let f = h.extend(&Assignment::zeros(n));
        let slack = (0..inst.k()).map(|l| inst.cut_value(l, &f) - (1.0 - 3.0 * cfg.epsilon) * targets[l]).fold(f64::INFINITY, f64::min);
        if slack < -cfg.solver.eq_tol {
            rep.status = FixingStatus::Infeasible { level: 0, slack };
            return Ok((rep, None));
        }
        vec![Assignment::zeros(n)]
    } else {
        let mut w = Vec::new();
        let solved = solve_fixing(inst, prep, &h, cfg, &mut w);
        rep.warnings.extend(w);
        let (sol, status) = match solved {
            Ok(x) => x,
            Err(status) => {
                rep.status = status;
                return Ok((rep, None));
            }
        };
        rep.status = status;
        let icfg = IndependenceConfig {
            delta: cfg.delta.unwrap_or(cfg.epsilon * cfg.epsilon),
            enumerate_branches: cfg.enumerate_branches,
            min_level: 2,
            max_steps: cfg.cond_edges_cap,
        };
        let mut rng = sample_rng(cfg.seed, 2 * index + 2);
        let sol = match make_independent(&sol, inst, prep, &icfg, &mut rng) {
            Ok((c, ir)) => {
                rep.independence = Some(ir);
                c
            }
            Err(e) => {
                rep.warnings.push(format!("conditioning failed ({e}); rounding the unconditioned solution"));
                sol
            }
        };
        let inputs = match RoundingInputs::from_solution(&sol) {
            Ok(i) => i,
            Err(e) => {
                rep.status = FixingStatus::Failed { reason: e.to_string() };
                return Ok((rep, None));
            }
        };
        let seed = derive_seed(cfg.seed, 2 * index + 1);
        round_many(&inputs, &cfg.rounding, seed, cfg.num_samples).iter().map(|o| o.assignment(&inputs.vertices, sol.fixing())).collect()
    };

    let s_set = prep.s_star_set(n);
    let threshold = ROUNDING_ALPHA - 4.0 * cfg.epsilon;
    let mut low_hits = vec![0usize; prep.low.len()];
    let mut best: Option<(Assignment, CutReport)> = None;
    let mut sums = vec![(0.0, 0.0); inst.k()];
    for g in &completions {
        let raw = inst.report(&h.extend(g));
        rep.raw_ratios.push(score(&raw));
        for (acc, &v) in sums.iter_mut().zip(&raw.per_instance) {
            acc.0 += v;
            acc.1 += v * v;
        }
        for (j, &l) in prep.low.iter().enumerate() {
            if raw.per_instance[l] >= threshold * targets[l] {
                low_hits[j] += 1;
            }
        }
        let f = match cfg.postprocess {
            PostProcess::ExhaustiveH => {
                let (bx, _) = decomp.best(inst, g, targets);
                let mut f = g.clone();
                for (i, &v) in decomp.s.iter().enumerate() {
                    f.0[v] = ((bx >> i) & 1) as u8;
                }
                f
            }
            PostProcess::PerturbOnly => {
                let mut g_out = g.clone();
                for v in s_set.iter() {
                    g_out.0[v] = 0;
                }
                let p = perturb_lenient(inst, prep, &h, &g_out, cfg.epsilon)?;
                for w in p.warnings {
                    if !rep.warnings.contains(&w) {
                        rep.warnings.push(w);
                    }
                }
                p.h.extend(&g_out)
            }
        };
        let r = inst.report(&f);
        rep.sample_ratios.push(score(&r));
        if best.as_ref().is_none_or(|(_, b)| better(&r, b)) {
            best = Some((f, r));
        }
    }
    let total = completions.len().max(1) as f64;
    rep.low_concentration = prep.low.iter().zip(&low_hits).map(|(&l, &c)| (l, c as f64 / total)).collect();
    rep.moments = sums
        .iter()
        .enumerate()
        .map(|(l, &(s1, s2))| {
            let mean = s1 / total;
            let variance = (s2 / total - mean * mean).max(0.0);
            InstanceMoments { instance: l, mean, variance, relative_variance: (mean > 0.0).then(|| variance / (mean * mean)) }
        })
        .collect();
    rep.best = best.as_ref().map(|(_, r)| r.clone());
    Ok((rep, best))
}

/// Best of `count` uniform random cuts from the seed.
pub fn random_baseline(inst: &SimInstance, count: usize, seed: u64) -> CutReport {
    let mut rng = sample_rng(seed, 0);
    let mut best: Option<CutReport> = None;
    for _ in 0..count.max(1) {
        let f = Assignment((0..inst.n()).map(|_| rng.random_range(0..2u8)).collect());
        let r = inst.report(&f);
        if best.as_ref().is_none_or(|b| better(&r, b)) {
            best = Some(r);
        }
    }
    best.unwrap()
}

/// Runs everything and reports, including the case where no fixing is feasible.
pub fn run_full(inst: &SimInstance, cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let inst = if inst.is_normalized() { inst.clone() } else { inst.normalize()? };
    let (inst, targets_from_oracle) = match inst.targets() {
        Some(_) => (inst, false),
        None => {
            let (_, r) = inst.brute_force_opt(cfg.brute_force_cap)?;
            let t = r.per_instance.clone();
            (inst.with_targets(Some(t)), true)
        }
    };
    let targets = inst.targets().unwrap().to_vec();
    let params = Params::new(cfg.epsilon, inst.k())?.with_caps(cfg.max_t, cfg.max_s_star);
    let prep = run_preprocess(&inst, &params)?;
    warnings.extend(prep.warnings.iter().cloned());
    let xs = fixings(&prep, cfg)?;
    let decomp = Decomposition::new(&inst, prep.s_star_vertices());
    let results: Vec<(FixingReport, Option<(Assignment, CutReport)>)> =
        xs.par_iter().enumerate().map(|(i, &x)| run_fixing(&inst, &prep, cfg, &decomp, &targets, i as u64, x)).collect::<Result<_>>()?;
    let mut best: Option<(Assignment, CutReport)> = None;
    let mut fixings_out = Vec::with_capacity(results.len());
    for (rep, b) in results {
        if let Some((f, r)) = b {
            if best.as_ref().is_none_or(|(_, br)| better(&r, br)) {
                best = Some((f, r));
            }
        }
        fixings_out.push(rep);
    }
    let baseline = random_baseline(&inst, cfg.num_samples, derive_seed(cfg.seed, 0));
    let (chosen, report) = match best {
        Some((f, r)) => (Some(f.0), Some(r)),
        None => (None, None),
    };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        params,
        targets,
        targets_from_oracle,
        prep,
        fixings: fixings_out,
        min_ratio: report.as_ref().map(score),
        chosen,
        report,
        baseline,
        warnings,
    })
}

/// As [`run_full`], failing with `AllFixingsInfeasible` when nothing solved.
pub fn run(inst: &SimInstance, cfg: &PipelineConfig) -> Result<RunReport> {
    let r = run_full(inst, cfg)?;
    if r.chosen.is_none() {
        return Err(Error::AllFixingsInfeasible);
    }
    Ok(r)
}
