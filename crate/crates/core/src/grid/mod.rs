//! Uniform grids on centered boxes, sampled fields and cubes.
//!
//! A [`Grid`] covers `[-L, L]^dim` with `N` nodes per axis. `N` is odd, so the
//! origin is always a node and node coordinates are exact integer multiples of
//! the spacing: node `i` sits at `(i - (N-1)/2) * h`. Mirrored nodes therefore
//! carry bit-identical coordinates up to sign, which is what makes odd kernels
//! cancel exactly on the grid.
//!
//! Fields are stored row-major with the first axis slowest.

mod convolve;

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use convolve::{convolve_fast, convolve_oracle, ConvolutionKernel};

/// Scalar values a [`GridFunction`] can hold.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + 'static
{
    const IS_REAL: bool;

    fn zero() -> Self;
    fn to_complex(self) -> Complex64;
    /// Narrowing conversion. Real scalars drop the imaginary part.
    fn from_complex(c: Complex64) -> Self;
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    const IS_REAL: bool = true;

    fn zero() -> Self {
        0.0
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_complex(c: Complex64) -> Self {
        c.re
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    const IS_REAL: bool = false;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn from_complex(c: Complex64) -> Self {
        c
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

const PLACEMENT_UNIT: f64 = 1.0 / 16.0;

/// Geometry of a uniform grid over `[-L, L]^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} unsupported (1 or 2)"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be odd and >= 3, got {n}"
            )));
        }
        Ok(Self { dim, half_width, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `N^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    /// `h^dim`, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Index of the origin along each axis.
    pub fn center_index(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Coordinate of node `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.center_index() as f64) * self.spacing()
    }

    /// Nearest node index to coordinate `x`, unclamped.
    pub fn nearest_index(&self, x: f64) -> isize {
        (x / self.spacing()).round() as isize + self.center_index() as isize
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.n + idx[1],
        }
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.n, flat % self.n],
        }
    }

    /// Coordinates of a node; unused trailing components are zero.
    pub fn node(&self, flat: usize) -> [f64; 2] {
        let [i, j] = self.multi_index(flat);
        match self.dim {
            1 => [self.coord(i), 0.0],
            _ => [self.coord(i), self.coord(j)],
        }
    }

    /// Euclidean norm of the node's position.
    pub fn node_radius(&self, flat: usize) -> f64 {
        let p = self.node(flat);
        p[0].hypot(p[1])
    }

    /// Same box, `2N - 1` points per axis (every old node survives).
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n - 1,
            ..*self
        }
    }

    /// Spacing used to place seeded test functions: `1/16` when it is a whole
    /// number of cells, so a family drawn on this grid and on its refinements
    /// is the same set of functions; otherwise `h`.
    pub fn placement_unit(&self) -> f64 {
        let h = self.spacing();
        let cells = PLACEMENT_UNIT / h;
        if cells >= 1.0 - 1e-9 && (cells - cells.round()).abs() < 1e-9 {
            PLACEMENT_UNIT
        } else {
            h
        }
    }

    /// Visits every node, passing its flat index and coordinates.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, [f64; 2])> + '_ {
        (0..self.len()).map(move |k| (k, self.node(k)))
    }
}

/// Axis-aligned cube `Q(center, side)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub dim: usize,
    pub center: [f64; 2],
    pub side: f64,
}

impl Cube {
    pub fn new(center: &[f64], side: f64) -> Result<Self> {
        let dim = center.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "cube dimension {dim} unsupported"
            )));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cube side must be positive, got {side}"
            )));
        }
        let mut c = [0.0; 2];
        c[..dim].copy_from_slice(center);
        Ok(Self {
            dim,
            center: c,
            side,
        })
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// The concentric dilate `λQ`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            side: self.side * lambda,
            ..*self
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|a| (x[a] - self.center[a]).abs() <= 0.5 * self.side)
    }

    fn node_range(&self, grid: &Grid, axis: usize) -> (isize, isize) {
        let h = grid.spacing();
        let cells = ((self.side / h).round() as isize).max(1);
        let start = ((self.center[axis] - 0.5 * cells as f64 * h) / h).round() as isize
            + grid.center_index() as isize;
        (start, start + cells)
    }

    /// Snaps the cube to the nearest node-cornered box on `grid`, clipped to
    /// the grid. The side is rounded to a whole number of cells (at least
    /// one); the lower corner is the node nearest to `center - side / 2`.
    /// Returns `None` when nothing of the cube survives clipping.
    pub fn snap(&self, grid: &Grid) -> Option<NodeBox> {
        let last = grid.n() as isize - 1;
        let mut lo = [0usize; 2];
        let mut hi = [0usize; 2];
        for a in 0..grid.dim() {
            let (start, end) = self.node_range(grid, a);
            let (s, e) = (start.max(0), end.min(last));
            if s >= e {
                return None;
            }
            lo[a] = s as usize;
            hi[a] = e as usize;
        }
        Some(NodeBox {
            dim: grid.dim(),
            lo,
            hi,
        })
    }

    /// Like [`Cube::snap`], but `None` unless the snapped cube lies inside
    /// the box without clipping.
    pub fn snap_inside(&self, grid: &Grid) -> Option<NodeBox> {
        let last = grid.n() as isize - 1;
        let inside = (0..grid.dim()).all(|a| {
            let (s, e) = self.node_range(grid, a);
            s >= 0 && e <= last
        });
        if inside {
            self.snap(grid)
        } else {
            None
        }
    }
}

/// Closed box of grid nodes `lo..=hi` along each axis, corners on nodes.
///
/// Integrals over a node box use the tensor trapezoid rule, so a box spanning
/// `k` cells has Lebesgue measure exactly `(k h)^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeBox {
    pub dim: usize,
    pub lo: [usize; 2],
    pub hi: [usize; 2],
}

impl NodeBox {
    /// Square box with `cells` cells per axis starting at node `lo`.
    pub fn square(dim: usize, lo: [usize; 2], cells: usize) -> Self {
        let mut hi = lo;
        for a in 0..dim {
            hi[a] = lo[a] + cells;
        }
        Self { dim, lo, hi }
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.hi[axis] - self.lo[axis]
    }

    /// Number of cells covered, `prod_a (hi_a - lo_a)`.
    pub fn cell_count(&self) -> usize {
        (0..self.dim).map(|a| self.cells(a)).product()
    }

    pub fn contains_index(&self, idx: [usize; 2]) -> bool {
        (0..self.dim).all(|a| (self.lo[a]..=self.hi[a]).contains(&idx[a]))
    }

    /// Trapezoid weight of node `idx` inside the box: a product of 1 for
    /// interior and 1/2 for boundary positions along each axis, 0 outside.
    pub fn trapezoid_weight(&self, idx: [usize; 2]) -> f64 {
        if !self.contains_index(idx) {
            return 0.0;
        }
        (0..self.dim)
            .map(|a| {
                if self.lo[a] == self.hi[a] {
                    0.0
                } else if idx[a] == self.lo[a] || idx[a] == self.hi[a] {
                    0.5
                } else {
                    1.0
                }
            })
            .product()
    }

    /// Center and side (along axis 0) in physical coordinates.
    pub fn to_cube(&self, grid: &Grid) -> Cube {
        let mut c = [0.0; 2];
        for (a, slot) in c.iter_mut().enumerate().take(self.dim) {
            *slot = 0.5 * (grid.coord(self.lo[a]) + grid.coord(self.hi[a]));
        }
        Cube {
            dim: self.dim,
            center: c,
            side: self.cells(0) as f64 * grid.spacing(),
        }
    }
}

/// A scalar field sampled on a [`Grid`]; zero outside the box.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T = f64> {
    grid: Grid,
    values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f` at every node.
    pub fn sample<F>(grid: Grid, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> T,
    {
        let dim = grid.dim();
        let values = grid.nodes().map(|(_, x)| f(&x[..dim])).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, idx: [usize; 2]) -> T {
        self.values[self.grid.flat_index(idx)]
    }

    pub fn ensure_same_grid<U: Scalar>(&self, other: &GridFunction<U>) -> Result<()> {
        if self.grid == *other.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> GridFunction<U> {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| x * a + y * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// Pointwise modulus.
    pub fn abs(&self) -> GridFunction<f64> {
        self.map(|v| v.modulus())
    }

    pub fn to_complex(&self) -> GridFunction<Complex64> {
        self.map(|v| v.to_complex())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }

    /// Riemann sum `h^dim * sum(values)`; each node stands for the cell
    /// centred on it.
    pub fn integrate(&self) -> T {
        let total = self
            .values
            .iter()
            .fold(T::zero(), |acc, &v| acc + v);
        total * self.grid.cell_volume()
    }
}

impl GridFunction<Complex64> {
    pub fn re(&self) -> GridFunction<f64> {
        self.map(|v| v.re)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }
}

/// Zero field on a fresh grid.
pub fn make_grid(dim: usize, half_width: f64, n: usize) -> Result<GridFunction> {
    Ok(GridFunction::zeros(Grid::new(dim, half_width, n)?))
}

/// Largest relative deviation `max|a - b| / max|b|` (absolute when `b == 0`).
pub fn relative_max_diff<T: Scalar>(a: &GridFunction<T>, b: &GridFunction<T>) -> f64 {
    let scale = b.max_abs();
    let diff = a
        .values()
        .iter()
        .zip(b.values())
        .fold(0.0_f64, |m, (&x, &y)| m.max((x - y).modulus()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_zero_init() {
        let f = make_grid(1, 8.0, 257).unwrap();
        assert_eq!(f.grid().spacing(), 0.0625);
        let g = make_grid(2, 4.0, 65).unwrap();
        assert_eq!(g.values().len(), 65 * 65);
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(make_grid(1, 8.0, 256), Err(Error::InvalidGrid(_))));
        assert!(make_grid(1, 0.0, 257).is_err());
        assert!(make_grid(1, -1.0, 257).is_err());
        assert!(make_grid(3, 1.0, 5).is_err());
        assert!(make_grid(1, 1.0, 1).is_err());
    }

    #[test]
    fn node_coordinates_are_mirror_exact() {
        let g = Grid::new(1, 8.0, 257).unwrap();
        for i in 0..g.n() {
            assert_eq!(g.coord(i), -g.coord(g.n() - 1 - i));
        }
        assert_eq!(g.coord(g.center_index()), 0.0);
        assert_eq!(g.coord(0), -8.0);
        assert_eq!(g.coord(256), 8.0);
    }

    #[test]
    fn sampling() {
        let g = Grid::new(1, 8.0, 257).unwrap();
        let one = GridFunction::sample(g, |_| 1.0).unwrap();
        assert!(one.values().iter().all(|&v| v == 1.0));
        let e = GridFunction::sample(g, |x| x[0].abs().exp()).unwrap();
        assert_eq!(e.get([g.center_index(), 0]), 1.0);
        let gauss = GridFunction::sample(g, |x| (-x[0] * x[0]).exp()).unwrap();
        assert_eq!(gauss.get([g.nearest_index(1.0) as usize, 0]), (-1.0f64).exp());
    }

    #[test]
    fn sampling_rejects_non_finite() {
        let g = Grid::new(1, 1.0, 5).unwrap();
        let err = GridFunction::sample(g, |x| 1.0 / x[0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 2 }));
    }

    #[test]
    fn integrate_golden() {
        // h * sum over 257 nodes of 1 with h = 1/16; the trapezoid rule
        // would give 16.0 instead.
        let g = Grid::new(1, 8.0, 257).unwrap();
        let one = GridFunction::sample(g, |_| 1.0).unwrap();
        assert_eq!(one.integrate(), 16.0625);
        assert_eq!(GridFunction::<f64>::zeros(g).integrate(), 0.0);
        let odd = GridFunction::sample(g, |x| x[0] * (-x[0] * x[0]).exp()).unwrap();
        assert!(odd.integrate().abs() < 1e-15);
    }

    #[test]
    fn cube_snapping() {
        let g = Grid::new(1, 8.0, 257).unwrap();
        let q = Cube::new(&[0.5], 1.0).unwrap();
        let b = q.snap(&g).unwrap();
        assert_eq!(g.coord(b.lo[0]), 0.0);
        assert_eq!(g.coord(b.hi[0]), 1.0);
        assert_eq!(b.to_cube(&g), q);
        // clipped at the box edge
        let edge = Cube::new(&[8.0], 1.0).unwrap().snap(&g).unwrap();
        assert_eq!(edge.hi[0], 256);
        assert_eq!(edge.cells(0), 8);
        assert!(Cube::new(&[20.0], 1.0).unwrap().snap(&g).is_none());
        assert!(Cube::new(&[8.0], 1.0).unwrap().snap_inside(&g).is_none());
        assert_eq!(q.snap_inside(&g), Some(b));
    }

    #[test]
    fn dilation_keeps_center() {
        let q = Cube::new(&[1.0, -2.0], 0.5).unwrap();
        let d = q.dilate(3.0);
        assert_eq!(d.center, q.center);
        assert_eq!(d.side, 1.5);
        assert_eq!(d.volume(), 2.25);
    }
}
