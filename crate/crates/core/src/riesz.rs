//! Truncated Riesz transforms `R_j f = K_j * f` with
//! `K_j(z) = z_j |z|^{-dim-1} Φ(|z|)`, their smoothed kernels `φ_t * K_j`,
//! and the kernel-size and atom-decay statistics.
//!
//! The kernel is sampled with `K_j(0) = 0`. Because node coordinates mirror
//! exactly, the sampled kernel is exactly odd and the principal value is
//! realized by pairwise cancellation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ConvolutionKernel, Cube, Grid, GridFunction, Scalar};
use crate::maximal::{BumpSpec, ScaleLadder};
use crate::quadrature::smooth_step;
use crate::weights::Weight;

/// Smooth radial step `Φ`: 1 on `r <= inner`, 0 on `r >= outer`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub inner: f64,
    pub outer: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self { inner: 1.0, outer: 2.0 }
    }
}

impl CutoffSpec {
    pub fn eval(&self, r: f64) -> f64 {
        1.0 - smooth_step((r - self.inner) / (self.outer - self.inner))
    }
}

/// Builds the evaluable cutoff.
pub fn make_cutoff(spec: CutoffSpec) -> impl Fn(f64) -> f64 {
    move |r| spec.eval(r)
}

/// Direction of a derivative: none, or one coordinate axis (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivative {
    None,
    Axis(usize),
}

impl Derivative {
    pub fn order(&self) -> i32 {
        match self {
            Self::None => 0,
            Self::Axis(_) => 1,
        }
    }
}

fn check_component(grid: &Grid, j: usize) -> Result<()> {
    if j == 0 || j > grid.dim() {
        return Err(Error::InvalidParameter(format!(
            "Riesz component {j} out of range 1..={}",
            grid.dim()
        )));
    }
    Ok(())
}

/// `K_j` evaluated at a point; zero at the origin.
pub fn riesz_kernel_eval(cutoff: &CutoffSpec, j: usize, z: &[f64]) -> f64 {
    let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return 0.0;
    }
    let phi = cutoff.eval(r);
    if phi == 0.0 {
        return 0.0;
    }
    z[j - 1] / r.powi(z.len() as i32 + 1) * phi
}

/// Sampled truncated Riesz kernel for component `j` (1-based).
#[derive(Clone, Debug)]
pub struct RieszKernel {
    pub component: usize,
    pub cutoff: CutoffSpec,
    pub sampled: GridFunction,
}

impl RieszKernel {
    pub fn new(grid: Grid, j: usize, cutoff: CutoffSpec) -> Result<Self> {
        check_component(&grid, j)?;
        let sampled = GridFunction::sample(grid, |z| riesz_kernel_eval(&cutoff, j, z))?;
        Ok(Self {
            component: j,
            cutoff,
            sampled,
        })
    }
}

/// `R_j` with its kernel spectrum prepared for repeated use.
#[derive(Debug)]
pub struct RieszTransform {
    kernel: RieszKernel,
    prepared: ConvolutionKernel,
}

impl RieszTransform {
    pub fn new(grid: Grid, j: usize, cutoff: CutoffSpec) -> Result<Self> {
        let kernel = RieszKernel::new(grid, j, cutoff)?;
        let prepared = ConvolutionKernel::new(&kernel.sampled);
        Ok(Self { kernel, prepared })
    }

    /// All components `1..=dim` with the default cutoff.
    pub fn all(grid: Grid) -> Result<Vec<Self>> {
        (1..=grid.dim())
            .map(|j| Self::new(grid, j, CutoffSpec::default()))
            .collect()
    }

    pub fn kernel(&self) -> &RieszKernel {
        &self.kernel
    }

    pub fn apply<T: Scalar>(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.prepared.apply(f)
    }
}

/// `R_j f` with the default cutoff.
pub fn riesz_transform<T: Scalar>(f: &GridFunction<T>, j: usize) -> Result<GridFunction<T>> {
    RieszTransform::new(*f.grid(), j, CutoffSpec::default())?.apply(f)
}

/// Direct-sum principal value excluding `|x - y| < eps`. With `eps <= h` it
/// reproduces the fast path; larger `eps` cross-checks the symmetric
/// cancellation near the singularity.
pub fn riesz_pv_oracle(f: &GridFunction, j: usize, eps: f64) -> Result<GridFunction> {
    let grid = *f.grid();
    check_component(&grid, j)?;
    let cutoff = CutoffSpec::default();
    let dim = grid.dim();
    let vol = grid.cell_volume();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let mut acc = 0.0;
            for (k, &fv) in f.values().iter().enumerate() {
                if fv == 0.0 {
                    continue;
                }
                let y = grid.node(k);
                let z = [x[0] - y[0], x[1] - y[1]];
                let r = z[0].hypot(z[1]);
                if r < eps {
                    continue;
                }
                acc += riesz_kernel_eval(&cutoff, j, &z[..dim]) * fv;
            }
            acc * vol
        })
        .collect();
    GridFunction::from_values(grid, values)
}

/// `K_j^t = φ_t * K_j` on the grid.
pub fn smoothed_kernel(grid: Grid, j: usize, t: f64, phi: BumpSpec) -> Result<GridFunction> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("scale t must lie in (0, 1), got {t}")));
    }
    let k = RieszKernel::new(grid, j, CutoffSpec::default())?;
    ConvolutionKernel::new(&k.sampled).apply(&phi.dilated(grid, t)?)
}

/// Centered difference along `axis` with step `h`; values beyond the box are
/// zero.
pub fn centered_difference(f: &GridFunction, axis: usize) -> GridFunction {
    let grid = *f.grid();
    let n = grid.n();
    let inv = 0.5 / grid.spacing();
    let values = (0..grid.len())
        .map(|k| {
            let idx = grid.multi_index(k);
            let at = |delta: isize| {
                let mut m = idx;
                let c = m[axis] as isize + delta;
                if c < 0 || c >= n as isize {
                    return 0.0;
                }
                m[axis] = c as usize;
                f.values()[grid.flat_index(m)]
            };
            (at(1) - at(-1)) * inv
        })
        .collect();
    GridFunction::from_values(grid, values).expect("differences of finite values")
}

pub const ANNULUS_INNER: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundReport {
    pub component: usize,
    pub derivative: Derivative,
    /// `max_x sup_t |∂^β K_j^t(x)| |x|^{dim + |β|}` over the annulus.
    pub max_normalized: f64,
    pub argmax_radius: f64,
    /// Per-scale maxima, in ladder order.
    pub per_scale: Vec<(f64, f64)>,
}

/// Size of the smoothed kernels on `ANNULUS_INNER <= |x| <= 8 dim`.
///
/// `K_j^t` vanishes for `|x| > 2 + t sqrt(dim)`, so the part of the annulus
/// beyond the box contributes nothing; the box must however contain that
/// support radius for the largest scale.
pub fn kernel_bound_check(
    grid: Grid,
    j: usize,
    phi: BumpSpec,
    ladder: &ScaleLadder,
    beta: Derivative,
) -> Result<KernelBoundReport> {
    check_component(&grid, j)?;
    if let Derivative::Axis(a) = beta {
        if a >= grid.dim() {
            return Err(Error::InvalidParameter(format!("derivative axis {a} out of range")));
        }
    }
    let scales = ladder.scales(&grid)?;
    let dim = grid.dim();
    let support = 2.0 + scales[0] * (dim as f64).sqrt();
    if grid.half_width() < support {
        return Err(Error::InvalidParameter(format!(
            "annulus outside box: half width {} does not cover the kernel support radius {support}",
            grid.half_width()
        )));
    }
    let outer = 8.0 * dim as f64;
    let kernel = RieszKernel::new(grid, j, CutoffSpec::default())?;
    let prepared = ConvolutionKernel::new(&kernel.sampled);
    let power = dim as i32 + beta.order();
    let per_scale: Vec<(f64, f64, f64)> = scales
        .par_iter()
        .map(|&t| {
            let kt = prepared.apply(&phi.dilated(grid, t)?)?;
            let field = match beta {
                Derivative::None => kt,
                Derivative::Axis(a) => centered_difference(&kt, a),
            };
            let mut best = (0.0_f64, 0.0_f64);
            for (k, &v) in field.values().iter().enumerate() {
                let r = grid.node_radius(k);
                if (ANNULUS_INNER..=outer).contains(&r) {
                    let s = v.abs() * r.powi(power);
                    if s > best.0 {
                        best = (s, r);
                    }
                }
            }
            Ok((t, best.0, best.1))
        })
        .collect::<Result<_>>()?;
    let (max_normalized, argmax_radius) = per_scale
        .iter()
        .fold((0.0, 0.0), |acc, &(_, s, r)| if s > acc.0 { (s, r) } else { acc });
    Ok(KernelBoundReport {
        component: j,
        derivative: beta,
        max_normalized,
        argmax_radius,
        per_scale: per_scale.into_iter().map(|(t, s, _)| (t, s)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomDecayReport {
    /// `max_x sup_t |(R_j a * φ_t)(x)| |x - y0|^{dim+1} r^{-(dim+1)} ω(Q)`
    /// over nodes with `|x - y0| >= 2r`.
    pub max_statistic: f64,
    pub argmax_distance: f64,
    pub nodes_sampled: usize,
}

/// Far-field decay statistic of the smoothed Riesz transform of a mean-zero
/// atom supported in `cube` (side `r < 1`).
pub fn atom_decay_check(
    atom: &GridFunction,
    cube: &Cube,
    j: usize,
    phi: BumpSpec,
    ladder: &ScaleLadder,
    w: &Weight,
) -> Result<AtomDecayReport> {
    let grid = *atom.grid();
    atom.ensure_same_grid(w.base())?;
    let r = cube.side;
    if r >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "decay estimate applies to cubes with side below 1, got {r}"
        )));
    }
    let transformed = RieszTransform::new(grid, j, CutoffSpec::default())?.apply(atom)?;
    let smoothed = crate::maximal::SmoothMaximal::new(grid, phi, ladder)?.apply(&transformed)?;
    let wq = w.cube_measure(cube);
    let dim = grid.dim() as i32;
    let y0 = cube.center;
    let mut best = (0.0_f64, 0.0_f64);
    let mut sampled = 0;
    for (k, &v) in smoothed.values().iter().enumerate() {
        let x = grid.node(k);
        let d = (x[0] - y0[0]).hypot(x[1] - y0[1]);
        if d >= 2.0 * r {
            sampled += 1;
            let s = v * d.powi(dim + 1) / r.powi(dim + 1) * wq;
            if s > best.0 {
                best = (s, d);
            }
        }
    }
    Ok(AtomDecayReport {
        max_statistic: best.0,
        argmax_distance: best.1,
        nodes_sampled: sampled,
    })
}
