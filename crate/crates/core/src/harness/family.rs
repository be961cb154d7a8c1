//! Fixed, versioned test-function families shared by the experiments.
//!
//! Composition is pinned here; only the atom draws depend on the seed. All
//! placements are in physical units on [`Grid::placement_unit`], so a family
//! built on a grid and on its refinement describes the same functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::atoms::{make_atom, random_atom_specs};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::quadrature::mollifier;
use crate::weights::Weight;

/// Bumped whenever the composition of any family below changes.
pub const FAMILY_VERSION: &str = "tf-v1";

/// Smallest half-width the fixed placements fit into.
pub const MIN_HALF_WIDTH: f64 = 6.0;

const ATOMS: usize = 16;
const ATOM_SUMS: usize = 10;
const SUM_TERMS: usize = 3;
const GAUSS_WIDTHS: [f64; 4] = [0.125, 0.25, 0.5, 1.0];
const GAUSS_CENTERS: [f64; 3] = [0.0, 1.5, -2.75];
const BUMP_RADII: [f64; 3] = [0.25, 0.5, 1.0];
const BUMP_CENTERS: [f64; 4] = [-3.0, -1.0, 0.5, 2.5];
const SPIKE_RADII: [f64; 2] = [0.125, 0.25];
const SPIKE_CENTERS: [f64; 5] = [-2.0, -0.5, 0.0, 1.0, 3.0];
const STRONG_BUMP_RADII: [f64; 4] = [0.25, 0.5, 1.0, 1.5];
const ATOM_MARGIN: f64 = 3.0;
/// Smallest atom side; eight cells on the default 257-point grid.
const ATOM_MIN_SIDE: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct Member {
    pub descriptor: String,
    pub f: GridFunction,
}

fn check_box(grid: &Grid) -> Result<()> {
    if grid.half_width() < MIN_HALF_WIDTH {
        return Err(Error::InvalidParameter(format!(
            "test families need a half width of at least {MIN_HALF_WIDTH}, got {}",
            grid.half_width()
        )));
    }
    Ok(())
}

/// Point on the diagonal-ish line through the origin: `c` in 1D,
/// `(c, -c/2)` in 2D.
fn place(grid: &Grid, c: f64) -> [f64; 2] {
    if grid.dim() == 1 {
        [c, 0.0]
    } else {
        [c, -0.5 * c]
    }
}

fn fmt_center(grid: &Grid, c: &[f64; 2]) -> String {
    format!("{:?}", &c[..grid.dim()])
}

pub fn gaussian(grid: Grid, center: [f64; 2], sigma: f64) -> Result<GridFunction> {
    GridFunction::sample(grid, |x| {
        let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
        (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Tensor mollifier bump of half-side `radius`, peak value `e^{-dim}`.
pub fn bump(grid: Grid, center: [f64; 2], radius: f64) -> Result<GridFunction> {
    GridFunction::sample(grid, |x| x.iter().zip(&center).map(|(a, b)| mollifier((a - b) / radius)).product())
}

fn atoms(w: &Weight, count: usize, r_min: f64, r_max: f64, margin: f64, q: f64, seed: u64) -> Result<Vec<Member>> {
    let grid = *w.grid();
    random_atom_specs(&grid, count, r_min, r_max, margin, q, seed)?
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let a = make_atom(spec, w)?;
            Ok(Member {
                descriptor: format!(
                    "atom#{i}(side={},center={})",
                    a.cube.side,
                    fmt_center(&grid, &a.cube.center)
                ),
                f: a.values,
            })
        })
        .collect()
}

/// The 50-member family: 16 atoms, 10 three-term atom sums, 12 Gaussians of
/// width at most 1 and 12 translated bumps.
pub fn standard_family(w: &Weight, seed: u64) -> Result<Vec<Member>> {
    let grid = *w.grid();
    check_box(&grid)?;
    let mut out = atoms(w, ATOMS, ATOM_MIN_SIDE, 2.0, ATOM_MARGIN, 2.0, seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA70_5A75);
    for s in 0..ATOM_SUMS {
        let terms = atoms(w, SUM_TERMS, ATOM_MIN_SIDE, 1.0, ATOM_MARGIN, 2.0, rng.random())?;
        let mut f = GridFunction::zeros(grid);
        let mut coeffs = Vec::with_capacity(SUM_TERMS);
        for t in &terms {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            // multiples of 1/8 in [1/2, 2]
            let c = sign * (rng.random_range(4..=16) as f64) / 8.0;
            f = f.combine(1.0, &t.f, c)?;
            coeffs.push(c);
        }
        out.push(Member {
            descriptor: format!("atom_sum#{s}(coeffs={coeffs:?})"),
            f,
        });
    }

    for &sigma in &GAUSS_WIDTHS {
        for &c in &GAUSS_CENTERS {
            let center = place(&grid, c);
            out.push(Member {
                descriptor: format!("gaussian(sigma={sigma},center={})", fmt_center(&grid, &center)),
                f: gaussian(grid, center, sigma)?,
            });
        }
    }
    for &radius in &BUMP_RADII {
        for &c in &BUMP_CENTERS {
            let center = place(&grid, c);
            out.push(Member {
                descriptor: format!("bump(radius={radius},center={})", fmt_center(&grid, &center)),
                f: bump(grid, center, radius)?,
            });
        }
    }
    Ok(out)
}

/// Ten narrow nonnegative bumps for weak-type ratios.
pub fn spike_family(grid: Grid) -> Result<Vec<Member>> {
    check_box(&grid)?;
    let mut out = Vec::new();
    for &radius in &SPIKE_RADII {
        for &c in &SPIKE_CENTERS {
            let center = place(&grid, c);
            out.push(Member {
                descriptor: format!("spike(radius={radius},center={})", fmt_center(&grid, &center)),
                f: bump(grid, center, radius)?,
            });
        }
    }
    Ok(out)
}

/// Seeded atoms followed by smooth bumps with radii cycling through a fixed
/// list and seeded centres.
#[allow(clippy::too_many_arguments)]
pub fn strong_family(
    w: &Weight,
    n_atoms: usize,
    n_bumps: usize,
    r_min: f64,
    r_max: f64,
    margin: f64,
    q: f64,
    seed: u64,
) -> Result<Vec<Member>> {
    let grid = *w.grid();
    check_box(&grid)?;
    let mut out = atoms(w, n_atoms, r_min, r_max, margin, q, seed)?;
    let unit = grid.placement_unit();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB0_3B5);
    for b in 0..n_bumps {
        let radius = STRONG_BUMP_RADII[b % STRONG_BUMP_RADII.len()];
        let reach = grid.half_width() - margin - radius;
        let mut center = [0.0; 2];
        for c in center.iter_mut().take(grid.dim()) {
            *c = (rng.random_range(-reach..=reach) / unit).round() * unit;
        }
        out.push(Member {
            descriptor: format!("bump#{b}(radius={radius},center={})", fmt_center(&grid, &center)),
            f: bump(grid, center, radius)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_weight, WeightFamily};

    #[test]
    fn composition_is_pinned() {
        let grid = Grid::new(1, 8.0, 129).unwrap();
        let w = make_weight(WeightFamily::Exponential { c: 1.0 }, grid).unwrap();
        let fam = standard_family(&w, 3).unwrap();
        assert_eq!(fam.len(), 50);
        assert!(fam.iter().all(|m| m.f.max_abs() > 0.0));
        assert_eq!(spike_family(grid).unwrap().len(), 10);
        assert_eq!(strong_family(&w, 5, 4, 0.25, 2.0, 3.0, 2.0, 1).unwrap().len(), 9);
    }

    #[test]
    fn family_survives_refinement() {
        // the placement lattice needs h <= 1/16
        let grid = Grid::new(1, 8.0, 257).unwrap();
        let fine = grid.refined();
        let wc = make_weight(WeightFamily::Exponential { c: 1.0 }, grid).unwrap();
        let wf = make_weight(WeightFamily::Exponential { c: 1.0 }, fine).unwrap();
        let a = standard_family(&wc, 9).unwrap();
        let b = standard_family(&wf, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.descriptor, y.descriptor);
        }
    }

    #[test]
    fn small_box_rejected() {
        let grid = Grid::new(1, 4.0, 129).unwrap();
        assert!(spike_family(grid).is_err());
    }
}
