//! Repairing high-variance instances by flipping one special `S★` vertex each.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Assignment, PartialAssignment, SimInstance};
use crate::preprocess::PreprocessResult;

const GUARANTEE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbResult {
    pub h: PartialAssignment,
    /// `(instance, special vertex)` in the order chosen.
    pub specials: Vec<(usize, usize)>,
    /// Heavy set computed before each selection, aligned with the high instances.
    pub heavy: Vec<(usize, Vec<usize>)>,
    /// High instances for which no special vertex was eligible.
    pub skipped: Vec<usize>,
    pub values_in: Vec<f64>,
    pub values_out: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Vertices whose cut edges carry at least `ε/2k` of some instance's value.
/// Instances of value zero impose nothing.
pub fn heavy_set(inst: &SimInstance, f: &Assignment, epsilon: f64) -> Vec<usize> {
    let k = inst.k();
    let vals: Vec<f64> = (0..k).map(|l| inst.cut_value(l, f)).collect();
    (0..inst.n())
        .filter(|&v| {
            (0..k).any(|l| {
                if vals[l] <= 0.0 {
                    return false;
                }
                let at_v: f64 =
                    inst.incident(v).iter().filter(|&&e| SimInstance::is_cut(f, inst.edges()[e])).map(|&e| inst.weight(l, e)).sum();
                at_v >= epsilon / (2.0 * k as f64) * vals[l]
            })
        })
        .collect()
}

/// Side of `v` that cuts the larger `ℓ`-weight of its edges inside `S★`
/// (ties go to 0).
fn majority_side(inst: &SimInstance, l: usize, v: usize, h: &PartialAssignment, in_s: impl Fn(usize) -> bool) -> u8 {
    let (mut cut_if_0, mut cut_if_1) = (0.0, 0.0);
    for &e in inst.incident(v) {
        let (a, b) = inst.edges()[e];
        let u = if a == v { b } else { a };
        if !in_s(u) {
            continue;
        }
        match h.get(u) {
            Some(1) => cut_if_0 += inst.weight(l, e),
            Some(_) => cut_if_1 += inst.weight(l, e),
            None => {}
        }
    }
    u8::from(cut_if_1 > cut_if_0)
}

fn run(
    inst: &SimInstance,
    prep: &PreprocessResult,
    h_in: &PartialAssignment,
    g: &Assignment,
    epsilon: f64,
    strict: bool,
) -> Result<PerturbResult> {
    let n = inst.n();
    let k = inst.k();
    let s = prep.s_star_set(n);
    if s.iter().any(|v| h_in.get(v).is_none()) {
        return Err(Error::InvalidParams("perturb needs h defined on all of S*".into()));
    }
    if g.len() != n {
        return Err(Error::InvalidParams("completion has the wrong length".into()));
    }
    let mut h = h_in.clone();
    let values_in: Vec<f64> = (0..k).map(|l| inst.cut_value(l, &h_in.extend(g))).collect();
    let mut out = PerturbResult {
        h: h.clone(),
        specials: Vec::new(),
        heavy: Vec::new(),
        skipped: Vec::new(),
        values_in: values_in.clone(),
        values_out: values_in.clone(),
        warnings: Vec::new(),
    };
    let u_len = prep.effective_t.div_ceil(2);
    let bound = 4.0 * (k * k) as f64 / epsilon;
    let mut high = prep.high.clone();
    high.sort_unstable();
    for &l in &high {
        let heavy = heavy_set(inst, &h.extend(g), epsilon);
        if heavy.len() as f64 > bound {
            out.warnings.push(format!("instance {l}: heavy set size {} exceeds {bound:.1}", heavy.len()));
        }
        let chosen =
            prep.brought_in_by(l).into_iter().take(u_len).find(|v| !heavy.contains(v) && !out.specials.iter().any(|&(_, w)| w == *v));
        out.heavy.push((l, heavy));
        let Some(v) = chosen else {
            if strict {
                return Err(Error::NoEligibleSpecial(l));
            }
            out.warnings.push(format!("instance {l}: no eligible special vertex, perturbation skipped"));
            out.skipped.push(l);
            continue;
        };
        let side = majority_side(inst, l, v, &h, |u| s.contains(u));
        h.set(v, side);
        out.specials.push((l, v));
    }
    let values_out: Vec<f64> = (0..k).map(|l| inst.cut_value(l, &h.extend(g))).collect();
    for l in 0..k {
        let floor = (1.0 - epsilon / 2.0) * values_in[l];
        if values_out[l] < floor - GUARANTEE_TOL {
            return Err(Error::PerturbGuarantee { instance: l, after: values_out[l], bound: floor });
        }
    }
    out.h = h;
    out.values_out = values_out;
    Ok(out)
}

/// Strict form: a missing special vertex is an error.
pub fn perturb(
    inst: &SimInstance,
    prep: &PreprocessResult,
    h_in: &PartialAssignment,
    g: &Assignment,
    epsilon: f64,
) -> Result<PerturbResult> {
    run(inst, prep, h_in, g, epsilon, true)
}

/// Skips instances without an eligible special vertex and records a warning.
pub fn perturb_lenient(
    inst: &SimInstance,
    prep: &PreprocessResult,
    h_in: &PartialAssignment,
    g: &Assignment,
    epsilon: f64,
) -> Result<PerturbResult> {
    run(inst, prep, h_in, g, epsilon, false)
}

/// `(instance, val(h∪g), 8·actdeg_{S★})` for each high-variance instance.
pub fn high_variance_margins(inst: &SimInstance, prep: &PreprocessResult, h: &PartialAssignment, g: &Assignment) -> Vec<(usize, f64, f64)> {
    let s = prep.s_star_set(inst.n());
    let f = h.extend(g);
    prep.high.iter().map(|&l| (l, inst.cut_value(l, &f), 8.0 * inst.active_degree_total(l, &s))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::VertexSet;

    fn prep_with(s_star: Vec<(usize, usize)>, k: usize, high: Vec<usize>, t: usize) -> PreprocessResult {
        let mut counts = vec![0; k];
        for &(_, l) in &s_star {
            counts[l] += 1;
        }
        PreprocessResult {
            s_star,
            counts,
            low: (0..k).filter(|l| !high.contains(l)).collect(),
            high,
            effective_t: t,
            trace: Vec::new(),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn no_high_instances_leaves_h_alone() {
        let inst = SimInstance::new(3, vec![vec![(0, 1, 1.0), (1, 2, 1.0)]], None).unwrap();
        let prep = prep_with(vec![(0, 0)], 1, vec![], 2);
        let h = PartialAssignment::on(&VertexSet::from_vertices(3, [0]), |_| 1);
        let g = Assignment(vec![0, 0, 1]);
        let r = perturb(&inst, &prep, &h, &g, 0.2).unwrap();
        assert_eq!(r.h, h);
        assert!(r.specials.is_empty());
    }

    #[test]
    fn special_vertex_takes_the_majority_side() {
        // S★ = {0,1,2,3}; vertex 0 entered first and all its inner edges go to side 0.
        // Outside vertices 4..=9 carry a heavy matching so vertex 0 is light.
        let mut edges = vec![(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)];
        for i in 0..3 {
            edges.push((4 + 2 * i, 5 + 2 * i, 20.0));
        }
        let inst = SimInstance::new(10, vec![edges], None).unwrap();
        let prep = prep_with(vec![(0, 0), (1, 0), (2, 0), (3, 0)], 1, vec![0], 4);
        let s = prep.s_star_set(10);
        let h = PartialAssignment::on(&s, |_| 0);
        let g = Assignment(vec![0, 0, 0, 0, 0, 1, 0, 1, 0, 1]);
        let r = perturb(&inst, &prep, &h, &g, 0.2).unwrap();
        assert_eq!(r.specials, vec![(0, 0)]);
        assert_eq!(r.h.get(0), Some(1));
        assert!(r.values_out[0] > r.values_in[0]);
    }

    #[test]
    fn disjoint_stars_get_distinct_specials() {
        // Instance 0: star at 0 over {1,2}; instance 1: star at 3 over {4,5}.
        // Inner weights: star 0 has 2+1 = 3, star 3 has 1+1 = 2; all leaves on side 0.
        let mut e0 = vec![(0, 1, 2.0), (0, 2, 1.0)];
        let mut e1 = vec![(3, 4, 1.0), (3, 5, 1.0)];
        for i in 0..4 {
            e0.push((6 + 2 * i, 7 + 2 * i, 10.0));
            e1.push((6 + 2 * i, 7 + 2 * i, 10.0));
        }
        let inst = SimInstance::new(14, vec![e0, e1], None).unwrap();
        let prep = prep_with(vec![(0, 0), (3, 1), (1, 0), (4, 1), (2, 0), (5, 1)], 2, vec![0, 1], 4);
        let s = prep.s_star_set(14);
        let h = PartialAssignment::on(&s, |_| 0);
        let g = Assignment((0..14).map(|v| (v % 2) as u8).collect());
        let r = perturb(&inst, &prep, &h, &g, 0.2).unwrap();
        assert_eq!(r.specials, vec![(0, 0), (1, 3)]);
        let f = r.h.extend(&g);
        // Each special cuts all of its inner weight: 3 and 2 respectively.
        let inner = |l: usize, v: usize| -> f64 {
            inst.incident(v)
                .iter()
                .filter(|&&e| {
                    let (a, b) = inst.edges()[e];
                    s.contains(a) && s.contains(b) && SimInstance::is_cut(&f, (a, b))
                })
                .map(|&e| inst.weight(l, e))
                .sum()
        };
        assert!((inner(0, 0) - 3.0).abs() < 1e-12);
        assert!((inner(1, 3) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn missing_special_is_an_error_or_a_skip() {
        // The only vertex brought in is heavy.
        let inst = SimInstance::new(2, vec![vec![(0, 1, 1.0)]], None).unwrap();
        let prep = prep_with(vec![(0, 0)], 1, vec![0], 1);
        let h = PartialAssignment::on(&prep.s_star_set(2), |_| 0);
        let g = Assignment(vec![0, 1]);
        assert_eq!(perturb(&inst, &prep, &h, &g, 0.2), Err(Error::NoEligibleSpecial(0)));
        let r = perturb_lenient(&inst, &prep, &h, &g, 0.2).unwrap();
        assert_eq!(r.skipped, vec![0]);
        assert_eq!(r.h, h);
    }
}
