//! The registered experiments. Each returns an [`Outcome`] for one grid; the
//! caller handles refinement and report assembly.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::{spike_family, standard_family, strong_family, Member, FAMILY_VERSION};
use super::{CaseRecord, Criterion, ExperimentConfig, ExperimentId, Outcome, Stability};
use crate::atoms::{atom_h1_bound_experiment, make_atom, random_atom_specs};
use crate::error::{Error, Result};
use crate::grid::{Cube, Grid, GridFunction};
use crate::maximal::{local_hl_maximal_below, SmoothMaximal};
use crate::riesz::{atom_decay_check, kernel_bound_check, Derivative, RieszTransform};
use crate::singular::{strong_boundedness_experiment, BandedRatio, StrongCase};
use crate::weights::{ap_loc_constant, growth_profile, lp_norm, make_weight, weak_l1_norm, Weight, WeightFamily};

/// Cases per weight re-run with a scaled input for the homogeneity check.
const SCALING_CASES: usize = 5;
/// Power of two, so scaling is exact in floating point.
const SCALE: f64 = -4.0;

pub(crate) fn dispatch(id: ExperimentId, cfg: &ExperimentConfig, grid: Grid) -> Result<Outcome> {
    match id {
        ExperimentId::Theorem1Equivalence => theorem1_equivalence(cfg, grid),
        ExperimentId::Lemma21Properties => lemma21_properties(cfg, grid),
        ExperimentId::WeightDuality => weight_duality(cfg, grid),
        ExperimentId::MaximalBoundedness => operator_boundedness(cfg, grid, Operator::LocalMaximal),
        ExperimentId::Lemma32Boundedness => operator_boundedness(cfg, grid, Operator::Riesz),
        ExperimentId::KernelBound36 => kernel_bound(cfg, grid),
        ExperimentId::AtomDecay37 => atom_decay(cfg, grid),
        ExperimentId::AtomH1Bound35 => atom_h1_bound(cfg, grid),
        ExperimentId::TheoremC => strong(cfg, grid, false),
        ExperimentId::Corollary1 => strong(cfg, grid, true),
    }
}

struct Labeled {
    family: WeightFamily,
    label: String,
    w: Weight,
}

fn weights(cfg: &ExperimentConfig, grid: Grid) -> Result<Vec<Labeled>> {
    cfg.weights()
        .into_iter()
        .map(|family| {
            Ok(Labeled {
                family,
                label: family.label(),
                w: make_weight(family, grid)?,
            })
        })
        .collect()
}

fn key(name: &str, tag: &str) -> String {
    format!("{name}[{tag}]")
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn record(case_id: usize, descriptor: String, values: &[(&str, f64)], ratio: Option<f64>) -> CaseRecord {
    CaseRecord {
        case_id,
        descriptor,
        values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
        ratio,
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    // NaN propagates so that a broken case fails the finiteness check
    values.into_iter().fold(0.0, |m: f64, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

/// The norms entering the equivalence ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceNorms {
    pub h1_norm: f64,
    pub l1_norm: f64,
    pub riesz_l1_sum: f64,
}

impl EquivalenceNorms {
    /// `‖f‖_{h^1_ω} / (‖f‖_{L^1_ω} + Σ_j ‖R_j f‖_{L^1_ω})`, `None` for a zero
    /// denominator.
    pub fn ratio(&self) -> Option<f64> {
        let den = self.l1_norm + self.riesz_l1_sum;
        (den > 0.0).then(|| self.h1_norm / den)
    }
}

/// Computes the three norms of the equivalence ratio for one input.
pub fn equivalence_norms(f: &GridFunction, w: &Weight, smooth: &SmoothMaximal, riesz: &[RieszTransform]) -> Result<EquivalenceNorms> {
    let mut riesz_l1_sum = 0.0;
    for r in riesz {
        riesz_l1_sum += lp_norm(&r.apply(f)?, w, 1.0)?;
    }
    Ok(EquivalenceNorms {
        h1_norm: smooth.h1_norm(f, w)?,
        l1_norm: lp_norm(f, w, 1.0)?,
        riesz_l1_sum,
    })
}

fn theorem1_equivalence(cfg: &ExperimentConfig, grid: Grid) -> Result<Outcome> {
    let smooth = SmoothMaximal::new(grid, cfg.bump, &cfg.ladder)?;
    let riesz = RieszTransform::all(grid)?;
    let mut out = Outcome {
        columns: columns(&["h1_norm", "l1_norm", "riesz_l1_sum"]),
        family_version: Some(FAMILY_VERSION.into()),
        ..Default::default()
    };
    let mut scaling_gap = 0.0_f64;
    for lw in weights(cfg, grid)? {
        let family = standard_family(&lw.w, cfg.seed)?;
        let norms: Vec<EquivalenceNorms> = family
            .par_iter()
            .map(|m| equivalence_norms(&m.f, &lw.w, &smooth, &riesz))
            .collect::<Result<_>>()?;
        let mut ratios = Vec::new();
        for (m, n) in family.iter().zip(&norms) {
            let ratio = n.ratio();
            ratios.extend(ratio);
            out.cases.push(record(
                out.cases.len(),
                format!("{}/{}", lw.label, m.descriptor),
                &[("h1_norm", n.h1_norm), ("l1_norm", n.l1_norm), ("riesz_l1_sum", n.riesz_l1_sum)],
                ratio,
            ));
        }
        for (m, n) in family.iter().zip(&norms).take(SCALING_CASES) {
            let scaled = equivalence_norms(&m.f.scaled(SCALE), &lw.w, &smooth, &riesz)?;
            if let (Some(a), Some(b)) = (n.ratio(), scaled.ratio()) {
                scaling_gap = scaling_gap.max((a - b).abs());
                if a.to_bits() != b.to_bits() {
                    scaling_gap = scaling_gap.max(f64::MIN_POSITIVE);
                }
            }
        }
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = max_of(ratios.iter().copied());
        let spread = if ratios.is_empty() { f64::NAN } else { max / min };
        out.metrics.insert(key("min_ratio", &lw.label), min);
        out.metrics.insert(key("max_ratio", &lw.label), max);
        out.metrics.insert(key("spread", &lw.label), spread);
        out.criteria.push(Criterion::at_most(key("spread", &lw.label), spread, cfg.thresholds.spread_max));
        out.stability.push(Stability::Relative {
            metric: key("spread", &lw.label),
            rtol: cfg.refine_rtol(),
        });
    }
    out.criteria.push(Criterion::new(
        "scaling_invariance",
        scaling_gap == 0.0,
        Some(scaling_gap),
        Some(0.0),
        "r(cf) == r(f) bit for bit",
    ));
    Ok(out)
}

fn is_exponential(f: &WeightFamily) -> bool {
    matches!(f, WeightFamily::Exponential { c } if *c != 0.0)
}

fn p_tag(p: f64) -> String {
    format!("A_p{p}")
}

/// Least-squares line through `(x, y)`; returns slope, intercept and the
/// relative residual `‖y - fit‖ / ‖y‖`.
pub(crate) fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let norm: f64 = y.iter().map(|b| b * b).sum();
    (slope, intercept, (res / norm).sqrt())
}

fn lemma21_properties(cfg: &ExperimentConfig, grid: Grid) -> Result<Outcome> {
    let prm = &cfg.params;
    let th = &cfg.thresholds;
    let mut exponents = prm.exponents.clone().unwrap_or_default();
    exponents.sort_by(f64::total_cmp);
    let mut out = Outcome {
        columns: columns(&["p", "constant", "reference"]),
        ..Default::default()
    };
    let factors: Vec<f64> = {
        let steps = ((prm.growth_t_max - 1.0) / prm.growth_step).round() as usize;
        (0..=steps).map(|i| 1.0 + i as f64 * prm.growth_step).collect()
    };
    if prm.growth_t_max * prm.growth_side > 2.0 * grid.half_width() {
        return Err(Error::InvalidParameter("the dilated growth cube leaves the box".into()));
    }
    for lw in weights(cfg, grid)? {
        let label = &lw.label;
        let w = &lw.w;
        let push = |out: &mut Outcome, what: String, p: f64, value: f64, reference: f64| {
            let id = out.cases.len();
            out.cases.push(record(
                id,
                format!("{label}/{what}"),
                &[("p", p), ("constant", value), ("reference", reference)],
                Some(value),
            ));
        };

        // constants shrink as p grows
        let constants: Vec<f64> = exponents
            .iter()
            .map(|&p| ap_loc_constant(w, p, prm.max_side))
            .collect::<Result<_>>()?;
        let mut worst_increase = 0.0_f64;
        for (i, (&p, &a)) in exponents.iter().zip(&constants).enumerate() {
            push(&mut out, format!("A_p(max_side={})", prm.max_side), p, a, f64::NAN);
            out.metrics.insert(key(&p_tag(p), label), a);
            out.stability.push(Stability::Relative {
                metric: key(&p_tag(p), label),
                rtol: cfg.refine_rtol(),
            });
            if i > 0 {
                worst_increase = worst_increase.max(a / constants[i - 1] - 1.0);
            }
        }
        out.criteria.push(Criterion::new(
            key("monotone_in_p", label),
            constants.iter().all(|a| a.is_finite()) && worst_increase <= 1e-12,
            Some(worst_increase),
            Some(1e-12),
            "A_p2 <= A_p1 for p1 < p2",
        ));

        // a slightly smaller exponent still gives a finite constant
        let mut open_ok = true;
        for &p in exponents.iter().filter(|&&p| p - 0.1 >= 1.0) {
            let a = ap_loc_constant(w, p - 0.1, prm.max_side)?;
            push(&mut out, "A_p(p - 0.1)".into(), p - 0.1, a, f64::NAN);
            open_ok &= a.is_finite();
        }
        out.criteria.push(Criterion::new(key("open_ended", label), open_ok, None, None, "finite"));

        // duality
        let mut worst_dual = 0.0_f64;
        for (&p, &a) in exponents.iter().zip(&constants).filter(|(&p, _)| p > 1.0) {
            let sigma = w.power(-1.0 / (p - 1.0))?;
            let dual = ap_loc_constant(&sigma, p / (p - 1.0), prm.max_side)?;
            let reference = a.powf(1.0 / (p - 1.0));
            push(&mut out, format!("A_p'(sigma),p={p}"), p / (p - 1.0), dual, reference);
            worst_dual = worst_dual.max((dual / reference - 1.0).abs());
        }
        out.criteria.push(Criterion::at_most(key("duality", label), worst_dual, th.duality_rtol));

        // growth of ω(tQ)
        let q = Cube::new(&[0.0; 2][..grid.dim()], prm.growth_side)?;
        let logs = growth_profile(w, &q, &factors);
        let (slope, _, residual) = line_fit(&factors, &logs);
        out.metrics.insert(key("growth_slope", label), slope);
        out.metrics.insert(key("growth_residual", label), residual);
        if is_exponential(&lw.family) {
            out.criteria.push(Criterion::at_most(key("growth_fit", label), residual, th.fit_residual));
        }

        // locality: the constant depends on the side bound
        let a1 = ap_loc_constant(w, 1.0, prm.max_side)?;
        let a1_big = ap_loc_constant(w, 1.0, prm.locality_side)?;
        push(&mut out, format!("A_1(max_side={})", prm.locality_side), 1.0, a1_big, a1);
        let factor = a1_big / a1;
        out.metrics.insert(key("locality_factor", label), factor);
        if is_exponential(&lw.family) {
            out.criteria.push(Criterion::at_least(key("locality", label), factor, th.locality_factor));
        }
    }
    Ok(out)
}

fn weight_duality(cfg: &ExperimentConfig, grid: Grid) -> Result<Outcome> {
    let prm = &cfg.params;
    let mut out = Outcome {
        columns: columns(&["p", "a_p", "a_p_dual"]),
        ..Default::default()
    };
    let exponents: Vec<f64> = prm.exponents.clone().unwrap_or_default().into_iter().filter(|&p| p > 1.0).collect();
    for lw in weights(cfg, grid)? {
        let rows: Vec<(f64, f64, f64)> = exponents
            .par_iter()
            .map(|&p| {
                let a = ap_loc_constant(&lw.w, p, prm.max_side)?;
                let sigma = lw.w.power(-1.0 / (p - 1.0))?;
                let dual = ap_loc_constant(&sigma, p / (p - 1.0), prm.max_side)?;
                Ok((p, a, dual))
            })
            .collect::<Result<_>>()?;
        let mut worst = 0.0_f64;
        for &(p, a, dual) in &rows {
            let ratio = dual / a.powf(1.0 / (p - 1.0));
            worst = worst.max((ratio - 1.0).abs());
            out.cases.push(record(
                out.cases.len(),
                format!("{}/p={p}", lw.label),
                &[("p", p), ("a_p", a), ("a_p_dual", dual)],
                Some(ratio),
            ));
            out.metrics.insert(key(&p_tag(p), &lw.label), a);
            out.stability.push(Stability::Relative {
                metric: key(&p_tag(p), &lw.label),
                rtol: cfg.refine_rtol(),
            });
        }
        out.criteria.push(Criterion::at_most(key("duality", &lw.label), worst, cfg.thresholds.duality_rtol));
        if lw.family == WeightFamily::Constant {
            let mut all = vec![ap_loc_constant(&lw.w, 1.0, prm.max_side)?];
            all.extend(rows.iter().map(|r| r.1));
            let gap = all.iter().map(|a| (a - 1.0).abs()).fold(0.0, f64::max);
            out.criteria.push(Criterion::new("unit_weight_exact", gap == 0.0, Some(gap), Some(0.0), "A_p(1) == 1"));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum Operator {
    LocalMaximal,
    Riesz,
}

fn operator_boundedness(cfg: &ExperimentConfig, grid: Grid, op: Operator) -> Result<Outcome> {
    let riesz = RieszTransform::all(grid)?;
    let max_side = cfg.params.max_side;
    let images = |f: &GridFunction| -> Result<Vec<GridFunction>> {
        match op {
            Operator::LocalMaximal => Ok(vec![local_hl_maximal_below(f, max_side)]),
            Operator::Riesz => riesz.iter().map(|r| r.apply(f)).collect(),
        }
    };
    let mut out = Outcome {
        columns: columns(&["lp2_ratio", "weak_l1_ratio"]),
        family_version: Some(FAMILY_VERSION.into()),
        ..Default::default()
    };
    let spikes = spike_family(grid)?;
    for lw in weights(cfg, grid)? {
        let w = &lw.w;
        let mut members: Vec<Member> = standard_family(w, cfg.seed)?;
        members.extend(spikes.iter().cloned());
        let rows: Vec<(f64, f64)> = members
            .par_iter()
            .map(|m| {
                let l2 = lp_norm(&m.f, w, 2.0)?;
                let l1 = lp_norm(&m.f, w, 1.0)?;
                let mut r2 = 0.0_f64;
                let mut rw = 0.0_f64;
                for g in images(&m.f)? {
                    r2 = r2.max(lp_norm(&g, w, 2.0)? / l2);
                    rw = rw.max(weak_l1_norm(&g, w)? / l1);
                }
                Ok((r2, rw))
            })
            .collect::<Result<_>>()?;
        for (m, &(r2, rw)) in members.iter().zip(&rows) {
            out.cases.push(record(
                out.cases.len(),
                format!("{}/{}", lw.label, m.descriptor),
                &[("lp2_ratio", r2), ("weak_l1_ratio", rw)],
                Some(r2),
            ));
        }
        for (name, v) in [
            ("max_lp2_ratio", max_of(rows.iter().map(|r| r.0))),
            ("max_weak_l1_ratio", max_of(rows.iter().map(|r| r.1))),
        ] {
            out.metrics.insert(key(name, &lw.label), v);
            out.criteria.push(Criterion::finite(key(name, &lw.label), v));
            out.stability.push(Stability::Relative {
                metric: key(name, &lw.label),
                rtol: cfg.refine_rtol(),
            });
        }
    }
    Ok(out)
}

fn kernel_bound(cfg: &ExperimentConfig, grid: Grid) -> Result<Outcome> {
    let mut out = Outcome {
        columns: columns(&["component", "derivative_order", "max_normalized", "argmax_radius"]),
        ..Default::default()
    };
    let mut jobs = Vec::new();
    for j in 1..=grid.dim() {
        jobs.push((j, Derivative::None));
        for a in 0..grid.dim() {
            jobs.push((j, Derivative::Axis(a)));
        }
    }
    let reports = jobs
        .par_iter()
        .map(|&(j, beta)| kernel_bound_check(grid, j, cfg.bump, &cfg.ladder, beta))
        .collect::<Result<Vec<_>>>()?;
    for r in reports {
        let beta = match r.derivative {
            Derivative::None => "0".to_string(),
            Derivative::Axis(a) => format!("e{}", a + 1),
        };
        let tag = format!("j={},beta={beta}", r.component);
        out.cases.push(record(
            out.cases.len(),
            format!("K_{}^t,beta={beta}", r.component),
            &[
                ("component", r.component as f64),
                ("derivative_order", r.derivative.order() as f64),
                ("max_normalized", r.max_normalized),
                ("argmax_radius", r.argmax_radius),
            ],
            Some(r.max_normalized),
        ));
        out.metrics.insert(key("kernel_bound", &tag), r.max_normalized);
        out.criteria.push(Criterion::finite(key("kernel_bound", &tag), r.max_normalized));
        out.stability.push(Stability::Relative {
            metric: key("kernel_bound", &tag),
            rtol: cfg.refine_rtol(),
        });
    }
    Ok(out)
}

fn atom_decay(cfg: &ExperimentConfig, grid: Grid) -> Result<Outcome> {
    let prm = &cfg.params;
    let (r_min, r_max) = (prm.r_min.unwrap_or(0.25), prm.r_max.unwrap_or(0.5));
    let mut out = Outcome {
        columns: columns(&["side", "statistic"]),
        ..Default::default()
    };
    for lw in weights(cfg, grid)? {
        let specs = random_atom_specs(&grid, prm.n_atoms.unwrap_or(50), r_min, r_max, prm.margin, prm.q, cfg.seed)?;
        let rows: Vec<(String, f64, f64)> = specs
            .par_iter()
            .enumerate()
            .map(|(i, spec)| {
                let atom = make_atom(spec, &lw.w)?;
                let mut stat = 0.0_f64;
                for j in 1..=grid.dim() {
                    stat = stat.max(atom_decay_check(&atom.values, &atom.cube, j, cfg.bump, &cfg.ladder, &lw.w)?.max_statistic);
                }
                let desc = format!("atom#{i}(side={},center={:?})", atom.cube.side, &atom.cube.center[..grid.dim()]);
                Ok((desc, atom.cube.side, stat))
            })
            .collect::<Result<_>>()?;
        for (desc, side, stat) in &rows {
            out.cases.push(record(
                out.cases.len(),
                format!("{}/{desc}", lw.label),
                &[("side", *side), ("statistic", *stat)],
                Some(*stat),
            ));
        }
        let m = max_of(rows.iter().map(|r| r.2));
        out.metrics.insert(key("max_decay_statistic", &lw.label), m);
        out.criteria.push(Criterion::finite(key("max_decay_statistic", &lw.label), m));
        out.stability.push(Stability::Relative {
            metric: key("max_decay_statistic", &lw.label),
            rtol: cfg.refine_rtol(),
        });
    }
    Ok(out)
}

fn atom_h1_bound(cfg: &ExperimentConfig, grid: Grid) -> Result<Outcome> {
    let prm = &cfg.params;
    let mut out = Outcome {
        columns: columns(&["side", "h1_of_riesz"]),
        ..Default::default()
    };
    for lw in weights(cfg, grid)? {
        let s = atom_h1_bound_experiment(
            prm.n_atoms.unwrap_or(100),
            prm.q,
            &lw.w,
            cfg.bump,
            &cfg.ladder,
            prm.r_min.unwrap_or(0.5),
            prm.margin,
            cfg.seed,
        )?;
        for c in &s.cases {
            let v = max_of(c.h1_of_riesz.iter().copied());
            out.cases.push(record(
                out.cases.len(),
                format!("{}/{}", lw.label, c.descriptor),
                &[("side", c.side), ("h1_of_riesz", v)],
                Some(v),
            ));
        }
        out.metrics.insert(key("max_bound", &lw.label), s.max_bound);
        out.metrics.insert(key("single_atom_cs_constant", &lw.label), s.single_atom_cs_constant);
        out.criteria.push(Criterion::finite(key("max_bound", &lw.label), s.max_bound));
        out.criteria.push(Criterion::finite(key("single_atom_cs_constant", &lw.label), s.single_atom_cs_constant));
        out.stability.push(Stability::Relative {
            metric: key("max_bound", &lw.label),
            rtol: cfg.refine_rtol(),
        });
    }
    Ok(out)
}

fn strong(cfg: &ExperimentConfig, grid: Grid, corollary: bool) -> Result<Outcome> {
    let prm = &cfg.params;
    let smooth = SmoothMaximal::new(grid, cfg.bump, &cfg.ladder)?;
    type Pick = fn(&StrongCase) -> Option<BandedRatio>;
    let stats: Vec<(&str, Pick)> = if corollary {
        vec![("h1_over_h1", |c| c.h1_over_h1)]
    } else {
        vec![("lp2", |c| c.lp2), ("weak_l1", |c| c.weak_l1), ("l1_over_h1", |c| c.l1_over_h1)]
    };
    let mut cols = vec!["theta".to_string()];
    for (name, _) in &stats {
        cols.push(name.to_string());
        cols.push(format!("{name}_alt"));
    }
    let mut out = Outcome {
        columns: cols,
        family_version: Some(FAMILY_VERSION.into()),
        ..Default::default()
    };
    for lw in weights(cfg, grid)? {
        let family: Vec<(String, GridFunction)> = strong_family(
            &lw.w,
            prm.n_atoms.unwrap_or(50),
            prm.n_bumps,
            prm.r_min.unwrap_or(0.25),
            prm.r_max.unwrap_or(2.0),
            prm.margin,
            prm.q,
            cfg.seed,
        )?
        .into_iter()
        .map(|m| (m.descriptor, m.f))
        .collect();
        for &theta in &prm.thetas {
            let report = strong_boundedness_experiment(&lw.w, &family, &smooth, theta)?;
            for c in &report.cases {
                let mut values = vec![("theta".to_string(), theta)];
                for (name, pick) in &stats {
                    let (a, b) = pick(c).map(|r| (r.value, r.alternate)).unwrap_or((f64::NAN, f64::NAN));
                    values.push((name.to_string(), a));
                    values.push((format!("{name}_alt"), b));
                }
                let ratio = stats.last().and_then(|(_, pick)| pick(c)).map(|r| r.value);
                out.cases.push(CaseRecord {
                    case_id: out.cases.len(),
                    descriptor: format!("{}/theta={theta}/{}", lw.label, c.descriptor),
                    values: values.into_iter().filter(|(_, v)| !v.is_nan()).collect(),
                    ratio,
                });
            }
            let tag = format!("{},theta={theta}", lw.label);
            for (name, _) in &stats {
                let summary = match *name {
                    "lp2" => report.summary.lp2,
                    "weak_l1" => report.summary.weak_l1,
                    "l1_over_h1" => report.summary.l1_over_h1,
                    _ => report.summary.h1_over_h1,
                };
                let metric = key(&format!("max_{name}"), &tag);
                let band = key(&format!("max_{name}_band"), &tag);
                out.metrics.insert(metric.clone(), summary.value);
                out.metrics.insert(band.clone(), summary.band);
                out.criteria.push(Criterion::finite(metric.clone(), summary.value));
                if prm.stable_thetas.contains(&theta) {
                    out.stability.push(Stability::Band { metric, band });
                }
            }
            out.metrics.insert(key("skipped", &tag), report.summary.skipped as f64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_lines() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let (s, b, r) = line_fit(&x, &y);
        assert!((s - 3.0).abs() < 1e-12 && (b + 1.0).abs() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn equivalence_norms_is_scale_free() {
        let grid = Grid::new(1, 8.0, 129).unwrap();
        let w = make_weight(WeightFamily::Exponential { c: 1.0 }, grid).unwrap();
        let smooth = SmoothMaximal::new(grid, Default::default(), &crate::maximal::ScaleLadder::new(0.125, 2.0)).unwrap();
        let riesz = RieszTransform::all(grid).unwrap();
        let f = super::super::family::gaussian(grid, [0.5, 0.0], 0.5).unwrap();
        let a = equivalence_norms(&f, &w, &smooth, &riesz).unwrap().ratio().unwrap();
        let b = equivalence_norms(&f.scaled(SCALE), &w, &smooth, &riesz).unwrap().ratio().unwrap();
        assert_eq!(a, b);
        let zero = equivalence_norms(&GridFunction::zeros(grid), &w, &smooth, &riesz).unwrap();
        assert_eq!(zero.ratio(), None);
    }
}
