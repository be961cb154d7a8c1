//! Strongly singular convolution `T f = p.v. k * f` with the oscillatory
//! kernel `k(x) = e^{i|x|^{-θ}} |x|^{-dim} v(x)`, and the boundedness
//! statistics run against it.
//!
//! `k` is even, so unlike the Riesz kernel there is no symmetric cancellation
//! at the origin; the principal value exists through oscillation, which the
//! grid cannot resolve near zero. Nodes with `|z| < δ` are dropped and every
//! statistic is reported at two truncation radii so the spread can serve as
//! the quadrature uncertainty.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ConvolutionKernel, Grid, GridFunction, Scalar};
use crate::maximal::SmoothMaximal;
use crate::riesz::CutoffSpec;
use crate::weights::{lp_norm, weak_l1_norm, Weight};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrongKernelSpec {
    pub theta: f64,
    #[serde(default)]
    pub cutoff: CutoffSpec,
    /// Inner truncation radius in units of the grid spacing.
    #[serde(default = "default_delta")]
    pub delta_cells: f64,
    /// Use the conjugate phase `e^{-i|x|^{-θ}}`.
    #[serde(default)]
    pub conjugate: bool,
}

fn default_delta() -> f64 {
    1.0
}

impl StrongKernelSpec {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            cutoff: CutoffSpec::default(),
            delta_cells: 1.0,
            conjugate: false,
        }
    }

    pub fn with_delta_cells(self, delta_cells: f64) -> Self {
        Self { delta_cells, ..self }
    }

    pub fn conjugated(self) -> Self {
        Self {
            conjugate: !self.conjugate,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.delta_cells >= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "truncation must be at least half a cell, got {}",
                self.delta_cells
            )));
        }
        if self.cutoff.outer > 2.0 {
            return Err(Error::InvalidParameter("the cutoff must vanish beyond |x| = 2".into()));
        }
        Ok(())
    }
}

/// Pointwise `k(x)`; the origin is an error.
pub fn strong_kernel_eval(spec: &StrongKernelSpec, x: &[f64]) -> Result<Complex64> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::InvalidParameter("strong kernel is singular at the origin".into()));
    }
    let v = spec.cutoff.eval(r);
    if v == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let sign = if spec.conjugate { -1.0 } else { 1.0 };
    Ok(Complex64::from_polar(v / r.powi(x.len() as i32), sign * r.powf(-spec.theta)))
}

/// The kernel sampled on `grid` with nodes inside `|z| < δ` set to zero.
pub fn sampled_strong_kernel(grid: Grid, spec: &StrongKernelSpec) -> Result<GridFunction<Complex64>> {
    spec.validate()?;
    let delta = spec.delta_cells * grid.spacing();
    GridFunction::sample(grid, |z| {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < delta {
            Complex64::new(0.0, 0.0)
        } else {
            strong_kernel_eval(spec, z).unwrap_or(Complex64::new(0.0, 0.0))
        }
    })
}

/// `T` with its kernel spectrum prepared.
#[derive(Debug)]
pub struct StrongOperator {
    spec: StrongKernelSpec,
    prepared: ConvolutionKernel,
}

impl StrongOperator {
    pub fn new(grid: Grid, spec: StrongKernelSpec) -> Result<Self> {
        let k = sampled_strong_kernel(grid, &spec)?;
        Ok(Self {
            spec,
            prepared: ConvolutionKernel::new(&k),
        })
    }

    pub fn spec(&self) -> &StrongKernelSpec {
        &self.spec
    }

    pub fn apply<T: Scalar>(&self, f: &GridFunction<T>) -> Result<GridFunction<Complex64>> {
        self.prepared.apply_complex(f)
    }
}

/// `T f` for a single input.
pub fn strong_transform<T: Scalar>(f: &GridFunction<T>, spec: &StrongKernelSpec) -> Result<GridFunction<Complex64>> {
    StrongOperator::new(*f.grid(), *spec)?.apply(f)
}

/// One measured ratio at the two truncation radii.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandedRatio {
    /// Ratio with `δ = h` (the reported value).
    pub value: f64,
    /// Ratio with `δ = 2h`.
    pub alternate: f64,
}

impl BandedRatio {
    /// `|value - alternate|`, the truncation uncertainty.
    pub fn band(&self) -> f64 {
        (self.value - self.alternate).abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongCase {
    pub descriptor: String,
    /// `None` when the input is zero and the ratios are 0/0.
    pub lp2: Option<BandedRatio>,
    pub weak_l1: Option<BandedRatio>,
    /// `‖T f‖_{L^1_ω} / ‖f‖_{h^1_ω}`
    pub l1_over_h1: Option<BandedRatio>,
    /// `‖T f‖_{h^1_ω} / ‖f‖_{h^1_ω}`
    pub h1_over_h1: Option<BandedRatio>,
}

/// Family maximum of one statistic at both radii.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandedMax {
    pub value: f64,
    pub alternate: f64,
    /// Largest per-case `|value - alternate|`; bounds `|value - alternate|`
    /// of the maxima as well.
    pub band: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongSummary {
    pub theta: f64,
    pub lp2: BandedMax,
    pub weak_l1: BandedMax,
    pub l1_over_h1: BandedMax,
    pub h1_over_h1: BandedMax,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongReport {
    pub cases: Vec<StrongCase>,
    pub summary: StrongSummary,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn banded(a: Option<f64>, b: Option<f64>) -> Option<BandedRatio> {
    Some(BandedRatio {
        value: a?,
        alternate: b?,
    })
}

fn max_banded(cases: &[StrongCase], pick: impl Fn(&StrongCase) -> Option<BandedRatio>) -> BandedMax {
    cases.iter().filter_map(pick).fold(
        BandedMax {
            value: 0.0,
            alternate: 0.0,
            band: 0.0,
        },
        |acc, r| BandedMax {
            value: acc.value.max(r.value),
            alternate: acc.alternate.max(r.alternate),
            band: acc.band.max(r.band()),
        },
    )
}

/// Boundedness ratios over a family of inputs: weighted `L^2`, weak
/// `(1,1)`, `L^1_ω` against `h^1_ω`, and `h^1_ω` against `h^1_ω`, each at
/// `δ = h` and `δ = 2h`.
pub fn strong_boundedness_experiment(
    w: &Weight,
    family: &[(String, GridFunction)],
    smooth: &SmoothMaximal,
    theta: f64,
) -> Result<StrongReport> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty test family".into()));
    }
    let grid = *w.grid();
    let ops = [
        StrongOperator::new(grid, StrongKernelSpec::new(theta))?,
        StrongOperator::new(grid, StrongKernelSpec::new(theta).with_delta_cells(2.0))?,
    ];
    let cases: Vec<StrongCase> = family
        .par_iter()
        .map(|(descriptor, f)| {
            f.ensure_same_grid(w.base())?;
            let l2 = lp_norm(f, w, 2.0)?;
            let l1 = lp_norm(f, w, 1.0)?;
            let h1 = smooth.h1_norm(f, w)?;
            let mut per_delta = Vec::with_capacity(2);
            for op in &ops {
                let tf = op.apply(f)?;
                per_delta.push([
                    ratio(lp_norm(&tf, w, 2.0)?, l2),
                    ratio(weak_l1_norm(&tf, w)?, l1),
                    ratio(lp_norm(&tf, w, 1.0)?, h1),
                    ratio(smooth.h1_norm(&tf, w)?, h1),
                ]);
            }
            let (a, b) = (per_delta[0], per_delta[1]);
            Ok(StrongCase {
                descriptor: descriptor.clone(),
                lp2: banded(a[0], b[0]),
                weak_l1: banded(a[1], b[1]),
                l1_over_h1: banded(a[2], b[2]),
                h1_over_h1: banded(a[3], b[3]),
            })
        })
        .collect::<Result<_>>()?;
    let summary = StrongSummary {
        theta,
        lp2: max_banded(&cases, |c| c.lp2),
        weak_l1: max_banded(&cases, |c| c.weak_l1),
        l1_over_h1: max_banded(&cases, |c| c.l1_over_h1),
        h1_over_h1: max_banded(&cases, |c| c.h1_over_h1),
        skipped: cases.iter().filter(|c| c.lp2.is_none()).count(),
    };
    Ok(StrongReport { cases, summary })
}
