//! Conditioning a solution until active edges are nearly independent.
//!
//! The potential is `φ = Σ_{ℓ∈L} E_a H(X_{a1}, X_{a2})` over the active-edge
//! distributions. Conditioning on the endpoints of an edge `b` lowers `φ` in
//! expectation by `Σ_ℓ E_a I(X_a; X_b)`, so the loop greedily conditions on the
//! edge with the largest expected drop.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::{entropy_masses, JointDist};
use crate::instance::SimInstance;
use crate::lasserre::{Event, MomentSolution, PseudoDistribution, COND_FLOOR};
use crate::preprocess::PreprocessResult;

pub const DEFAULT_DELTA: f64 = 0.1;
const IDENTITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceConfig {
    pub delta: f64,
    /// Pick the branch with the largest realized drop instead of sampling.
    pub enumerate_branches: bool,
    /// Level that must remain after the last conditioning.
    pub min_level: usize,
    /// Extra cap on the number of conditionings.
    pub max_steps: Option<usize>,
}

impl Default for IndependenceConfig {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA, enumerate_branches: false, min_level: 2, max_steps: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub conditioned_events: Vec<Event>,
    /// `φ` before the first step and after each step.
    pub phi_trace: Vec<f64>,
    pub score_trace: Vec<f64>,
    /// Expected drop of each chosen edge.
    pub expected_drops: Vec<f64>,
    pub final_score: f64,
    pub budget_exhausted: bool,
    pub warnings: Vec<String>,
}

/// Active-edge laws of the low-variance instances, as `(u, v, weight)` lists.
fn active_laws(inst: &SimInstance, prep: &PreprocessResult) -> Vec<Vec<(usize, usize, f64)>> {
    let s = prep.s_star_set(inst.n());
    prep.low
        .iter()
        .filter_map(|&l| inst.active_dist(l, &s).ok())
        .map(|d| d.into_iter().map(|(e, p)| (inst.edges()[e].0, inst.edges()[e].1, p)).collect())
        .collect()
}

fn pair_mi(sol: &MomentSolution, u: usize, v: usize) -> Result<f64> {
    let d = sol.local_distribution(&[u, v])?;
    Ok((d.entropy_of(&[0]) + d.entropy_of(&[1]) - d.entropy_of(&[0, 1])).max(0.0))
}

/// `max_{ℓ∈L} E_{a,b} Σ_{i,j} I(X_{a_i}; X_{b_j})`, where pairs naming the
/// same vertex contribute nothing: the score measures dependence between
/// distinct variables.
pub fn independence_score(sol: &MomentSolution, inst: &SimInstance, prep: &PreprocessResult) -> Result<f64> {
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut best = 0.0f64;
    for law in active_laws(inst, prep) {
        // Each edge spreads its mass onto both endpoints.
        let mut mass: HashMap<usize, f64> = HashMap::new();
        for &(u, v, p) in &law {
            *mass.entry(u).or_insert(0.0) += p;
            *mass.entry(v).or_insert(0.0) += p;
        }
        let mut verts: Vec<(usize, f64)> = mass.into_iter().collect();
        verts.sort_by_key(|&(v, _)| v);
        let mut total = 0.0;
        for &(u, pu) in &verts {
            for &(v, pv) in &verts {
                if u == v {
                    continue;
                }
                let key = (u.min(v), u.max(v));
                let mi = match cache.get(&key) {
                    Some(&x) => x,
                    None => {
                        let x = pair_mi(sol, key.0, key.1)?;
                        cache.insert(key, x);
                        x
                    }
                };
                total += pu * pv * mi;
            }
        }
        best = best.max(total);
    }
    Ok(best)
}

/// Law over the distinct vertices of two edges, with the positions of each edge.
fn joint_of(sol: &MomentSolution, a: (usize, usize), b: (usize, usize)) -> Result<(JointDist, [usize; 2], [usize; 2])> {
    let mut vars: Vec<usize> = vec![a.0, a.1, b.0, b.1];
    vars.sort();
    vars.dedup();
    let pos = |x: usize| vars.iter().position(|&y| y == x).unwrap();
    let pa = [pos(a.0), pos(a.1)];
    let pb = [pos(b.0), pos(b.1)];
    Ok((sol.local_distribution(&vars)?, pa, pb))
}

fn dedup2(p: [usize; 2]) -> Vec<usize> {
    if p[0] == p[1] {
        vec![p[0]]
    } else {
        p.to_vec()
    }
}

/// `(H(X_a), H(X_b), H(X_a, X_b))`.
fn edge_entropies(sol: &MomentSolution, a: (usize, usize), b: (usize, usize)) -> Result<(f64, f64, f64)> {
    let (d, pa, pb) = joint_of(sol, a, b)?;
    let ha = d.entropy_of(&dedup2(pa));
    let hb = d.entropy_of(&dedup2(pb));
    let mut all: Vec<usize> = pa.iter().chain(&pb).copied().collect();
    all.sort();
    all.dedup();
    Ok((ha, hb, d.entropy_of(&all)))
}

/// `Σ_{ℓ∈L} E_a H(X_{a1}, X_{a2})`.
pub fn potential(sol: &MomentSolution, inst: &SimInstance, prep: &PreprocessResult) -> Result<f64> {
    let mut phi = 0.0;
    for law in active_laws(inst, prep) {
        for &(u, v, p) in &law {
            let d = sol.local_distribution(&[u, v])?;
            phi += p * entropy_masses(d.probs());
        }
    }
    Ok(phi)
}

/// Largest gap in `E_{a,b} H(X_a|X_b) = E_a H(X_a) − E_{a,b} I(X_a;X_b)` over `ℓ ∈ L`.
pub fn identity_gap(sol: &MomentSolution, inst: &SimInstance, prep: &PreprocessResult) -> Result<f64> {
    let mut worst = 0.0f64;
    for law in active_laws(inst, prep) {
        let mut cond = 0.0;
        let mut mi = 0.0;
        let mut ha_mean = 0.0;
        for &(a0, a1, pa) in &law {
            let d = sol.local_distribution(&[a0, a1])?;
            ha_mean += pa * entropy_masses(d.probs());
            for &(b0, b1, pb) in &law {
                let (ha, hb, hab) = edge_entropies(sol, (a0, a1), (b0, b1))?;
                cond += pa * pb * (hab - hb);
                mi += pa * pb * (ha + hb - hab);
            }
        }
        worst = worst.max((cond - (ha_mean - mi)).abs());
    }
    Ok(worst)
}

/// Expected potential drop from conditioning on each candidate edge.
pub fn expected_drops(sol: &MomentSolution, inst: &SimInstance, prep: &PreprocessResult) -> Result<Vec<((usize, usize), f64)>> {
    let laws = active_laws(inst, prep);
    let mut candidates: Vec<(usize, usize)> = laws.iter().flatten().map(|&(u, v, _)| (u, v)).collect();
    candidates.sort();
    candidates.dedup();
    let fixing = sol.fixing();
    candidates.retain(|&(u, v)| fixing.get(u).is_none() || fixing.get(v).is_none());
    let mut out = Vec::with_capacity(candidates.len());
    for b in candidates {
        let mut drop = 0.0;
        for law in &laws {
            for &(a0, a1, p) in law {
                let (ha, hb, hab) = edge_entropies(sol, (a0, a1), b)?;
                drop += p * (ha + hb - hab).max(0.0);
            }
        }
        out.push((b, drop));
    }
    Ok(out)
}

fn cost(sol: &MomentSolution, (u, v): (usize, usize)) -> usize {
    let f = sol.fixing();
    usize::from(f.get(u).is_none()) + usize::from(f.get(v).is_none())
}

pub fn make_independent<R: Rng>(
    sol: &MomentSolution,
    inst: &SimInstance,
    prep: &PreprocessResult,
    cfg: &IndependenceConfig,
    rng: &mut R,
) -> Result<(MomentSolution, IndependenceReport)> {
    if !(cfg.delta > 0.0) {
        return Err(Error::InvalidParams("delta must be positive".into()));
    }
    let mut cur = sol.clone();
    let mut phi = potential(&cur, inst, prep)?;
    let mut score = independence_score(&cur, inst, prep)?;
    let mut report = IndependenceReport {
        conditioned_events: Vec::new(),
        phi_trace: vec![phi],
        score_trace: vec![score],
        expected_drops: Vec::new(),
        final_score: score,
        budget_exhausted: false,
        warnings: Vec::new(),
    };
    let max_steps = ((2.0 * prep.low.len().max(1) as f64 / cfg.delta).ceil() as usize).min(cfg.max_steps.unwrap_or(usize::MAX));
    while score > cfg.delta / 2.0 {
        let gap = identity_gap(&cur, inst, prep)?;
        if gap > IDENTITY_TOL {
            return Err(Error::InvalidDistribution(format!("entropy identity off by {gap:e}")));
        }
        if report.conditioned_events.len() >= max_steps {
            report.warnings.push(format!("step bound {max_steps} reached with score {score:.3e}"));
            report.budget_exhausted = true;
            break;
        }
        let drops = expected_drops(&cur, inst, prep)?;
        let best = drops.iter().filter(|&&(b, _)| cur.level() >= cfg.min_level + cost(&cur, b)).fold(
            None::<((usize, usize), f64)>,
            |acc, &(b, d)| match acc {
                Some((_, bd)) if bd >= d => acc,
                _ => Some((b, d)),
            },
        );
        let Some((b, drop)) = best else {
            report.warnings.push(format!("level budget exhausted with score {score:.3e}"));
            report.budget_exhausted = true;
            break;
        };
        if drop <= 0.0 {
            report.warnings.push(format!("no edge lowers the potential; score {score:.3e}"));
            report.budget_exhausted = true;
            break;
        }
        let mut branches = Vec::new();
        for x in 0..4u8 {
            let Some(ev) = Event::new([(b.0, x & 1), (b.1, x >> 1)]) else { continue };
            let p = cur.prob(&ev).unwrap_or(0.0);
            if p >= COND_FLOOR && !branches.iter().any(|(e, _): &(Event, f64)| *e == ev) {
                branches.push((ev, p));
            }
        }
        if branches.is_empty() {
            return Err(Error::ZeroProbabilityEvent(0.0));
        }
        let (event, next) = if cfg.enumerate_branches {
            let mut chosen: Option<(Event, MomentSolution, f64, f64)> = None;
            for (ev, _) in &branches {
                let c = cur.condition(ev)?;
                let new_phi = potential(&c, inst, prep)?;
                let new_score = independence_score(&c, inst, prep)?;
                let better = match &chosen {
                    None => true,
                    Some((_, _, bp, bs)) => new_phi < *bp || (new_phi == *bp && new_score < *bs),
                };
                if better {
                    chosen = Some((ev.clone(), c, new_phi, new_score));
                }
            }
            let (ev, c, _, _) = chosen.expect("at least one branch");
            (ev, c)
        } else {
            let total: f64 = branches.iter().map(|(_, p)| p).sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = branches.len() - 1;
            for (i, (_, p)) in branches.iter().enumerate() {
                if u < *p {
                    pick = i;
                    break;
                }
                u -= p;
            }
            let ev = branches[pick].0.clone();
            let c = cur.condition(&ev)?;
            (ev, c)
        };
        cur = next;
        let new_phi = potential(&cur, inst, prep)?;
        if phi - new_phi < cfg.delta {
            report.warnings.push(format!(
                "step {} lowered the potential by {:.3e} < delta",
                report.conditioned_events.len() + 1,
                phi - new_phi
            ));
        }
        phi = new_phi;
        score = independence_score(&cur, inst, prep)?;
        report.conditioned_events.push(event);
        report.expected_drops.push(drop);
        report.phi_trace.push(phi);
        report.score_trace.push(score);
    }
    report.final_score = score;
    Ok((cur, report))
}
