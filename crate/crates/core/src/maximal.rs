//! The local Hardy–Littlewood maximal operator, the smooth maximal function
//! and the weighted local Hardy norm built from it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ConvolutionKernel, Grid, GridFunction, NodeBox, Scalar};
use crate::quadrature::{mollifier, mollifier_mass};
use crate::tables::{sliding_window_max, PrefixTable};
use crate::weights::{lp_norm, Weight};

/// The fixed test function `φ`: smooth, supported in the cube of half-side
/// one, unit integral.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BumpSpec {
    /// Tensor product of standard mollifiers `exp(-1/(1-u^2))`, normalized.
    #[default]
    StandardMollifier,
}

impl BumpSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::StandardMollifier => {
                let z = mollifier_mass();
                x.iter().map(|&u| mollifier(u) / z).product()
            }
        }
    }

    /// `sup |φ|`, attained at the origin.
    pub fn sup(&self, dim: usize) -> f64 {
        self.eval(&[0.0; 2][..dim])
    }

    /// `φ_t(z) = t^{-dim} φ(z/t)` sampled on `grid`, rescaled so its discrete
    /// mass `h^dim Σ φ_t` is exactly one.
    pub fn dilated(&self, grid: Grid, t: f64) -> Result<GridFunction> {
        let k = GridFunction::sample(grid, |x| {
            let mut u = [0.0; 2];
            for (a, v) in x.iter().enumerate() {
                u[a] = v / t;
            }
            self.eval(&u[..x.len()])
        })?;
        let mass = k.integrate();
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale {t} is not resolved by the grid"
            )));
        }
        Ok(k.scaled(1.0 / mass))
    }
}

/// Dyadic-style scale set `{ratio^{-k} : k >= 1} ∩ [t_min, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleLadder {
    pub t_min: f64,
    #[serde(default = "default_ratio")]
    pub scale_ratio: f64,
}

fn default_ratio() -> f64 {
    2.0
}

impl ScaleLadder {
    pub fn new(t_min: f64, scale_ratio: f64) -> Self {
        Self { t_min, scale_ratio }
    }

    /// Scales in decreasing order. Errors when the ladder is empty, the
    /// ratio is not above one, or `t_min` undercuts the grid spacing.
    pub fn scales(&self, grid: &Grid) -> Result<Vec<f64>> {
        if !(self.scale_ratio.is_finite() && self.scale_ratio > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "scale ratio must exceed 1, got {}",
                self.scale_ratio
            )));
        }
        if !(self.t_min >= grid.spacing() * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "t_min {} is below the grid spacing {}",
                self.t_min,
                grid.spacing()
            )));
        }
        let mut out = Vec::new();
        let mut t = 1.0 / self.scale_ratio;
        while t >= self.t_min * (1.0 - 1e-12) {
            out.push(t);
            t /= self.scale_ratio;
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter("empty scale ladder".into()));
        }
        Ok(out)
    }
}

/// Prepared smooth maximal operator: one kernel spectrum per scale.
#[derive(Debug)]
pub struct SmoothMaximal {
    scales: Vec<f64>,
    kernels: Vec<ConvolutionKernel>,
}

impl SmoothMaximal {
    pub fn new(grid: Grid, phi: BumpSpec, ladder: &ScaleLadder) -> Result<Self> {
        let scales = ladder.scales(&grid)?;
        let kernels = scales
            .iter()
            .map(|&t| Ok(ConvolutionKernel::new(&phi.dilated(grid, t)?)))
            .collect::<Result<_>>()?;
        Ok(Self { scales, kernels })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// `|φ_t * f|` for every scale, in ladder order.
    pub fn per_scale<T: Scalar>(&self, f: &GridFunction<T>) -> Result<Vec<GridFunction>> {
        self.kernels
            .par_iter()
            .map(|k| Ok(k.apply(f)?.abs()))
            .collect()
    }

    /// `sup_t |φ_t * f|` over the ladder.
    pub fn apply<T: Scalar>(&self, f: &GridFunction<T>) -> Result<GridFunction> {
        let layers = self.per_scale(f)?;
        Ok(pointwise_max(&layers, *f.grid()))
    }

    /// `‖sup_t |φ_t * f|‖_{L^1_ω}`.
    pub fn h1_norm<T: Scalar>(&self, f: &GridFunction<T>, w: &Weight) -> Result<f64> {
        lp_norm(&self.apply(f)?, w, 1.0)
    }
}

pub(crate) fn pointwise_max(layers: &[GridFunction], grid: Grid) -> GridFunction {
    let mut out = vec![0.0_f64; grid.len()];
    for layer in layers {
        for (o, &v) in out.iter_mut().zip(layer.values()) {
            *o = o.max(v);
        }
    }
    GridFunction::from_values(grid, out).expect("maxima of finite values are finite")
}

/// Smooth maximal function `sup_{t in ladder} |φ_t * f|`.
pub fn smooth_maximal<T: Scalar>(
    f: &GridFunction<T>,
    phi: BumpSpec,
    ladder: &ScaleLadder,
) -> Result<GridFunction> {
    SmoothMaximal::new(*f.grid(), phi, ladder)?.apply(f)
}

/// `‖f‖_{h^1_ω} = ‖𝓜 f‖_{L^1_ω}`.
pub fn h1_norm<T: Scalar>(
    f: &GridFunction<T>,
    w: &Weight,
    phi: BumpSpec,
    ladder: &ScaleLadder,
) -> Result<f64> {
    f.ensure_same_grid(w.base())?;
    SmoothMaximal::new(*f.grid(), phi, ladder)?.h1_norm(f, w)
}

/// Cell counts `k >= 1` with `k h < max_side`.
pub fn local_sides(grid: &Grid, max_side: f64) -> Vec<usize> {
    let h = grid.spacing();
    (1..grid.n()).take_while(|&k| (k as f64) * h < max_side).collect()
}

/// `M^loc f` with cubes of side below `max_side`: at each node, the largest
/// trapezoid average of `|f|` over node cubes containing it, for every cell
/// count in [`local_sides`]. Box averages come from a summed-area table and
/// the maximum over the cubes containing a node from a sliding-window maximum
/// along each axis.
pub fn local_hl_maximal_below<T: Scalar>(f: &GridFunction<T>, max_side: f64) -> GridFunction {
    let grid = *f.grid();
    let n = grid.n();
    let dim = grid.dim();
    let abs = f.abs();
    let table = PrefixTable::new(&grid, abs.values());
    let layers: Vec<GridFunction> = local_sides(&grid, max_side)
        .into_par_iter()
        .map(|k| {
            let count = k.pow(dim as u32) as f64;
            let starts = n - k;
            match dim {
                1 => {
                    let avg: Vec<f64> = (0..starts)
                        .map(|i| table.trapezoid_sum(&NodeBox::square(1, [i, 0], k)) / count)
                        .collect();
                    let out = sliding_window_max(&avg, k, n);
                    GridFunction::from_values(grid, out).unwrap()
                }
                _ => {
                    let mut rows = Vec::with_capacity(starts * n);
                    for i in 0..starts {
                        let avg: Vec<f64> = (0..starts)
                            .map(|j| table.trapezoid_sum(&NodeBox::square(2, [i, j], k)) / count)
                            .collect();
                        rows.extend(sliding_window_max(&avg, k, n));
                    }
                    let mut out = vec![0.0; n * n];
                    let mut column = vec![0.0; starts];
                    for j in 0..n {
                        for (i, c) in column.iter_mut().enumerate() {
                            *c = rows[i * n + j];
                        }
                        for (i, v) in sliding_window_max(&column, k, n).into_iter().enumerate() {
                            out[i * n + j] = v;
                        }
                    }
                    GridFunction::from_values(grid, out).unwrap()
                }
            }
        })
        .collect();
    pointwise_max(&layers, grid)
}

/// Local Hardy–Littlewood maximal function `M^loc f` (cubes with `|Q| < 1`).
pub fn local_hl_maximal<T: Scalar>(f: &GridFunction<T>) -> GridFunction {
    local_hl_maximal_below(f, 1.0)
}
