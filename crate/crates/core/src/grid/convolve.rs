use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Grid, GridFunction, Scalar};
use crate::error::{Error, Result};

/// A kernel sampled on a grid with its padded spectrum precomputed, for
/// repeated linear convolution against fields on the same grid.
///
/// The kernel is centred: node `c = (N-1)/2` holds `k(0)`. Convolution is
/// linear (zero padding, no wrap-around), scaled by `h^dim`, and restricted to
/// the original box:
///
/// `(f * k)(x_i) = h^dim * sum_j f(x_j) k(x_i - x_j)`.
pub struct ConvolutionKernel {
    grid: Grid,
    padded: usize,
    spectrum: Vec<Complex64>,
    real: bool,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ConvolutionKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvolutionKernel")
            .field("grid", &self.grid)
            .field("padded", &self.padded)
            .field("real", &self.real)
            .finish()
    }
}

impl ConvolutionKernel {
    pub fn new<T: Scalar>(kernel: &GridFunction<T>) -> Self {
        let grid = *kernel.grid();
        let padded = (2 * grid.n() - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let mut spectrum = embed(kernel, padded);
        fft_nd(&mut spectrum, padded, grid.dim(), forward.as_ref());
        Self {
            grid,
            padded,
            spectrum,
            real: T::IS_REAL,
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Convolves `f` with the kernel. A real field against a complex kernel
    /// must go through [`ConvolutionKernel::apply_complex`].
    pub fn apply<T: Scalar>(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        if T::IS_REAL && !self.real {
            return Err(Error::InvalidParameter(
                "complex kernel applied to a real field; use apply_complex".into(),
            ));
        }
        let full = self.apply_raw(f)?;
        Ok(full.map(T::from_complex))
    }

    pub fn apply_complex<T: Scalar>(&self, f: &GridFunction<T>) -> Result<GridFunction<Complex64>> {
        self.apply_raw(f)
    }

    fn apply_raw<T: Scalar>(&self, f: &GridFunction<T>) -> Result<GridFunction<Complex64>> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let p = self.padded;
        let dim = self.grid.dim();
        let mut buf = embed(f, p);
        fft_nd(&mut buf, p, dim, self.forward.as_ref());
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        fft_nd(&mut buf, p, dim, self.inverse.as_ref());

        let n = self.grid.n();
        let c = self.grid.center_index();
        let scale = self.grid.cell_volume() / (p.pow(dim as u32) as f64);
        let values = match dim {
            1 => (0..n).map(|i| buf[i + c] * scale).collect(),
            _ => {
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    let row = (i + c) * p;
                    out.extend((0..n).map(|j| buf[row + j + c] * scale));
                }
                out
            }
        };
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }
}

/// Copies a field into the corner of a zeroed `p^dim` buffer.
fn embed<T: Scalar>(f: &GridFunction<T>, p: usize) -> Vec<Complex64> {
    let grid = f.grid();
    let n = grid.n();
    let mut buf = vec![Complex64::new(0.0, 0.0); p.pow(grid.dim() as u32)];
    match grid.dim() {
        1 => {
            for (b, v) in buf.iter_mut().zip(f.values()) {
                *b = v.to_complex();
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    buf[i * p + j] = f.values()[i * n + j].to_complex();
                }
            }
        }
    }
    buf
}

/// Unnormalized transform along every axis of a `p^dim` buffer.
fn fft_nd(buf: &mut [Complex64], p: usize, dim: usize, fft: &dyn Fft<f64>) {
    // rustfft processes a buffer holding several back-to-back signals in one
    // call, so the rows go in together.
    fft.process(buf);
    if dim == 2 {
        transpose(buf, p);
        fft.process(buf);
        transpose(buf, p);
    }
}

fn transpose(buf: &mut [Complex64], p: usize) {
    for i in 0..p {
        for j in (i + 1)..p {
            buf.swap(i * p + j, j * p + i);
        }
    }
}

/// Linear convolution through the padded discrete Fourier transform.
pub fn convolve_fast<T: Scalar>(f: &GridFunction<T>, k: &GridFunction<T>) -> Result<GridFunction<T>> {
    f.ensure_same_grid(k)?;
    ConvolutionKernel::new(k).apply(f)
}

/// Direct-sum convolution, `O(N^(2 dim))`. Same scaling and restriction as
/// [`convolve_fast`]; used as the reference the fast path is checked against.
pub fn convolve_oracle<T: Scalar>(f: &GridFunction<T>, k: &GridFunction<T>) -> Result<GridFunction<T>> {
    f.ensure_same_grid(k)?;
    let grid = *f.grid();
    let n = grid.n() as isize;
    let c = grid.center_index() as isize;
    let vol = grid.cell_volume();
    let fv = f.values();
    let kv = k.values();
    let values = match grid.dim() {
        1 => (0..n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    let m = i - j + c;
                    if (0..n).contains(&m) {
                        acc += fv[j as usize].to_complex() * kv[m as usize].to_complex();
                    }
                }
                T::from_complex(acc * vol)
            })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity((n * n) as usize);
            for i0 in 0..n {
                for i1 in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j0 in 0..n {
                        let m0 = i0 - j0 + c;
                        if !(0..n).contains(&m0) {
                            continue;
                        }
                        for j1 in 0..n {
                            let m1 = i1 - j1 + c;
                            if (0..n).contains(&m1) {
                                acc += fv[(j0 * n + j1) as usize].to_complex()
                                    * kv[(m0 * n + m1) as usize].to_complex();
                            }
                        }
                    }
                    out.push(T::from_complex(acc * vol));
                }
            }
            out
        }
    };
    Ok(GridFunction { grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::relative_max_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> GridFunction {
        let values = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        GridFunction::from_values(grid, values).unwrap()
    }

    fn delta(grid: Grid) -> GridFunction {
        let mut d = GridFunction::zeros(grid);
        let c = grid.center_index();
        let idx = grid.flat_index([c, c]);
        d.values_mut()[idx] = 1.0 / grid.cell_volume();
        d
    }

    #[test]
    fn delta_kernel_is_identity() {
        for grid in [Grid::new(1, 3.0, 65).unwrap(), Grid::new(2, 2.0, 17).unwrap()] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let f = random_field(grid, &mut rng);
            let d = delta(grid);
            assert!(relative_max_diff(&convolve_fast(&f, &d).unwrap(), &f) < 1e-12);
            assert!(relative_max_diff(&convolve_oracle(&f, &d).unwrap(), &f) < 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let grid = Grid::new(2, 1.0, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_field(grid, &mut rng);
        let z = GridFunction::zeros(grid);
        assert_eq!(convolve_fast(&z, &k).unwrap().max_abs(), 0.0);
        assert_eq!(convolve_oracle(&z, &k).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn fast_matches_oracle_complex() {
        let grid = Grid::new(1, 2.0, 33).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_field(grid, &mut rng).to_complex();
        let k = GridFunction::sample(grid, |x| Complex64::from_polar(1.0, 3.0 * x[0])).unwrap();
        let fast = convolve_fast(&f, &k).unwrap();
        let slow = convolve_oracle(&f, &k).unwrap();
        assert!(relative_max_diff(&fast, &slow) < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let a = GridFunction::<f64>::zeros(Grid::new(1, 1.0, 9).unwrap());
        let b = GridFunction::<f64>::zeros(Grid::new(1, 1.0, 11).unwrap());
        assert!(matches!(convolve_fast(&a, &b), Err(Error::GridMismatch)));
        assert!(matches!(convolve_oracle(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn real_field_against_complex_kernel_is_rejected() {
        let grid = Grid::new(1, 1.0, 9).unwrap();
        let k = GridFunction::<Complex64>::zeros(grid);
        let f = GridFunction::<f64>::zeros(grid);
        let prepared = ConvolutionKernel::new(&k);
        assert!(prepared.apply(&f).is_err());
        assert!(prepared.apply_complex(&f).is_ok());
    }
}
