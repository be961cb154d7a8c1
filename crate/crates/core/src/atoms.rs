//! Weighted `(1, q)_ω`-atoms and single atoms: seeded generation that
//! saturates the size condition, validation of the three atom conditions,
//! and the atom-level Hardy norm bound for Riesz transforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, Grid, GridFunction, NodeBox};
use crate::maximal::{BumpSpec, ScaleLadder, SmoothMaximal};
use crate::quadrature::mollifier;
use crate::riesz::RieszTransform;
use crate::weights::{lp_norm, Weight};

const MAX_ATTEMPTS: u64 = 10;
const MODES: usize = 4;

/// Parameters of one atom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub cube: Cube,
    /// Integrability exponent in `(1, ∞]`.
    pub q: f64,
    pub seed: u64,
}

impl AtomSpec {
    pub fn new(cube: Cube, q: f64, seed: u64) -> Result<Self> {
        check_q(q)?;
        if cube.side > 2.0 {
            return Err(Error::InvalidParameter(format!(
                "atom side must be at most 2, got {}",
                cube.side
            )));
        }
        Ok(Self { cube, q, seed })
    }

    /// Whether the cancellation condition applies, i.e. `|Q| < 1`.
    pub fn needs_cancellation(&self) -> bool {
        self.cube.volume() < 1.0
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("atom exponent must lie in (1, inf], got {q}")))
    }
}

/// Whether an atom is tied to a cube or is a single atom on the whole box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AtomKind {
    Cube { cube: Cube, q: f64 },
    Single { q: f64 },
}

/// A realized atom together with its snapped support box.
#[derive(Clone, Debug)]
pub struct Atom {
    pub spec: AtomSpec,
    pub support: NodeBox,
    /// The cube actually used, i.e. `spec.cube` snapped to nodes.
    pub cube: Cube,
    pub values: GridFunction,
}

impl Atom {
    pub fn kind(&self) -> AtomKind {
        AtomKind::Cube {
            cube: self.cube,
            q: self.spec.q,
        }
    }
}

/// Smooth window vanishing on the boundary of the node box, and a random
/// trigonometric profile, both in the box's local coordinates `u ∈ [-1, 1]`.
fn random_profile(grid_fn: &GridFunction, support: Option<&NodeBox>, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let grid = *grid_fn.grid();
    let dim = grid.dim();
    let coeffs: Vec<[f64; 2]> = (0..MODES.pow(dim as u32))
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let (lo, hi) = match support {
        Some(b) => (
            [grid.coord(b.lo[0]), grid.coord(b.lo[1])],
            [grid.coord(b.hi[0]), grid.coord(b.hi[1])],
        ),
        None => ([-grid.half_width(); 2], [grid.half_width(); 2]),
    };
    let mut window = vec![0.0; grid.len()];
    let mut profile = vec![0.0; grid.len()];
    for (k, x) in grid.nodes() {
        if let Some(b) = support {
            if !b.contains_index(grid.multi_index(k)) {
                continue;
            }
        }
        let mut u = [0.0; 2];
        for a in 0..dim {
            u[a] = 2.0 * (x[a] - lo[a]) / (hi[a] - lo[a]) - 1.0;
        }
        let wv: f64 = u[..dim].iter().map(|&v| mollifier(v)).product();
        if wv == 0.0 {
            continue;
        }
        let mut p = 0.0;
        for (m, c) in coeffs.iter().enumerate() {
            let (m0, m1) = (m % MODES, m / MODES);
            let basis = |mode: usize, v: f64| {
                let arg = std::f64::consts::PI * mode as f64 * v;
                (arg.cos(), arg.sin())
            };
            let (c0, s0) = basis(m0, u[0]);
            let (c1, s1) = if dim == 2 { basis(m1, u[1]) } else { (1.0, 0.0) };
            p += c[0] * c0 * c1 + c[1] * (s0 * c1 + c0 * s1);
        }
        window[k] = wv;
        profile[k] = wv * p;
    }
    (window, profile)
}

fn saturate(values: Vec<f64>, grid_fn: &GridFunction, w: &Weight, q: f64, mass: f64) -> Result<GridFunction> {
    let f = GridFunction::from_values(*grid_fn.grid(), values)?;
    let target = mass.powf(1.0 / q - 1.0);
    let norm = lp_norm(&f, w, q)?;
    if !(norm > 0.0) {
        return Err(Error::Degenerate("profile has zero norm".into()));
    }
    Ok(f.scaled(target / norm))
}

/// Generates a `(1, q)_ω`-atom on `spec.cube`.
///
/// The profile is a random trigonometric polynomial times a smooth window
/// vanishing on `∂Q`. When `|Q| < 1` the multiple of the window with the same
/// mean is subtracted, which leaves the support and smoothness intact. The
/// result is scaled so that `‖a‖_{L^q_ω} = ω(Q)^{1/q - 1}` holds with
/// equality.
pub fn make_atom(spec: &AtomSpec, w: &Weight) -> Result<Atom> {
    check_q(spec.q)?;
    let grid = *w.grid();
    let support = spec
        .cube
        .snap_inside(&grid)
        .ok_or_else(|| Error::InvalidParameter("atom cube must lie inside the box".into()))?;
    let cube = support.to_cube(&grid);
    let spec = AtomSpec { cube, ..*spec };
    let template = GridFunction::zeros(grid);
    let mass = w.box_measure(&support);

    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let (window, mut profile) = random_profile(&template, Some(&support), &mut rng);
        if spec.needs_cancellation() {
            let mean: f64 = profile.iter().sum();
            let wmass: f64 = window.iter().sum();
            let c = mean / wmass;
            for (p, wv) in profile.iter_mut().zip(&window) {
                *p -= c * wv;
            }
        }
        let peak = profile.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let wpeak = window.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if peak <= 1e-12 * wpeak {
            continue;
        }
        let values = saturate(profile, &template, w, spec.q, mass)?;
        return Ok(Atom {
            spec,
            support,
            cube,
            values,
        });
    }
    Err(Error::Degenerate(format!(
        "no usable atom profile after {MAX_ATTEMPTS} attempts"
    )))
}

/// Seeded single atom on the whole box: no cancellation, norm saturating
/// `ω(box)^{1/q - 1}`.
pub fn make_single_atom(q: f64, w: &Weight, seed: u64) -> Result<GridFunction> {
    check_q(q)?;
    let template = GridFunction::zeros(*w.grid());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (window, profile) = random_profile(&template, None, &mut rng);
    // a positive offset keeps the profile away from zero
    let values = profile.iter().zip(&window).map(|(p, wv)| p + 1.5 * wv).collect();
    make_single_atom_from(GridFunction::from_values(*w.grid(), values)?, q, w)
}

/// Rescales an arbitrary nonzero profile into a saturating single atom.
pub fn make_single_atom_from(profile: GridFunction, q: f64, w: &Weight) -> Result<GridFunction> {
    check_q(q)?;
    profile.ensure_same_grid(w.base())?;
    if profile.max_abs() == 0.0 {
        return Err(Error::Degenerate("single atom profile is identically zero".into()));
    }
    let template = GridFunction::zeros(*w.grid());
    saturate(profile.into_values(), &template, w, q, w.total_mass())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub support_ok: bool,
    pub norm_ok: bool,
    pub mean_ok: bool,
    pub details: ValidationDetails,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationDetails {
    /// Largest `|a|` at a node outside the support cube.
    pub support_leak: f64,
    pub norm: f64,
    pub norm_bound: f64,
    /// `|∫ a|`, and the tolerance it was held to.
    pub mean: f64,
    pub mean_tolerance: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.support_ok && self.norm_ok && self.mean_ok
    }
}

pub const NORM_RTOL: f64 = 1e-12;
pub const MEAN_RTOL: f64 = 1e-10;

/// Checks the support, size and cancellation conditions.
pub fn validate_atom(a: &GridFunction, kind: &AtomKind, w: &Weight) -> Result<ValidationReport> {
    a.ensure_same_grid(w.base())?;
    let grid = *a.grid();
    let (q, support, mass, cancel) = match *kind {
        AtomKind::Cube { cube, q } => {
            let support = cube.snap(&grid);
            let mass = support.map_or(0.0, |b| w.box_measure(&b));
            (q, support, mass, cube.volume() < 1.0)
        }
        AtomKind::Single { q } => (q, None, w.total_mass(), false),
    };
    check_q(q)?;
    let support_leak = match (kind, support) {
        (AtomKind::Single { .. }, _) => 0.0,
        (_, None) => a.max_abs(),
        (_, Some(b)) => a
            .values()
            .iter()
            .enumerate()
            .filter(|(k, _)| !b.contains_index(grid.multi_index(*k)))
            .fold(0.0_f64, |m, (_, v)| m.max(v.abs())),
    };
    let norm = lp_norm(a, w, q)?;
    let norm_bound = mass.powf(1.0 / q - 1.0);
    let mean = a.integrate().abs();
    let l1 = a.abs().integrate();
    let mean_tolerance = MEAN_RTOL * l1;
    Ok(ValidationReport {
        support_ok: support_leak == 0.0,
        norm_ok: norm <= norm_bound * (1.0 + NORM_RTOL),
        mean_ok: !cancel || mean <= mean_tolerance,
        details: ValidationDetails {
            support_leak,
            norm,
            norm_bound,
            mean,
            mean_tolerance,
        },
    })
}

/// Draws `count` atom specs with sides in `[r_min, r_max]`, centres keeping
/// `margin` clear of the box edge. Centres and half-sides are whole multiples
/// of [`Grid::placement_unit`], so the cubes are centred on nodes and are the
/// same on refined grids.
pub fn random_atom_specs(
    grid: &Grid,
    count: usize,
    r_min: f64,
    r_max: f64,
    margin: f64,
    q: f64,
    seed: u64,
) -> Result<Vec<AtomSpec>> {
    if !(r_min > 0.0 && r_max >= r_min && r_max <= 2.0) {
        return Err(Error::InvalidParameter(format!("atom radii [{r_min}, {r_max}] out of range")));
    }
    let unit = grid.placement_unit();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let raw = rng.random_range(r_min..=r_max);
            let half_units = ((raw / (2.0 * unit)).round()).max(1.0);
            let side = 2.0 * half_units * unit;
            let reach = grid.half_width() - margin - 0.5 * side;
            if reach <= 0.0 {
                return Err(Error::InvalidParameter("box too small for the atom family".into()));
            }
            let mut center = [0.0; 2];
            for c in center.iter_mut().take(grid.dim()) {
                *c = (rng.random_range(-reach..=reach) / unit).round() * unit;
            }
            AtomSpec::new(Cube::new(&center[..grid.dim()], side)?, q, seed ^ ((i as u64 + 1) << 20))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomBoundCase {
    pub descriptor: String,
    pub side: f64,
    /// `‖𝓜(R_j a)‖_{L^1_ω}` per component.
    pub h1_of_riesz: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomBoundSummary {
    pub cases: Vec<AtomBoundCase>,
    /// Largest `‖𝓜(R_j a)‖_{L^1_ω}` over atoms and components.
    pub max_bound: f64,
    /// For the single atom: `‖𝓜(R_j a)‖_{L^1_ω} / (‖R_j a‖_{L^2_ω} ω(box)^{1/2})`,
    /// the constant in the Cauchy–Schwarz route.
    pub single_atom_cs_constant: f64,
}

/// `max ‖𝓜(R_j a)‖_{L^1_ω}` over seeded atoms with sides in `[r_min, 2]`
/// plus one single atom.
#[allow(clippy::too_many_arguments)]
pub fn atom_h1_bound_experiment(
    n_atoms: usize,
    q: f64,
    w: &Weight,
    phi: BumpSpec,
    ladder: &ScaleLadder,
    r_min: f64,
    margin: f64,
    seed: u64,
) -> Result<AtomBoundSummary> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter("at least one atom is required".into()));
    }
    let grid = *w.grid();
    let smooth = SmoothMaximal::new(grid, phi, ladder)?;
    let riesz = RieszTransform::all(grid)?;
    let specs = random_atom_specs(&grid, n_atoms, r_min, 2.0, margin, q, seed)?;
    let mut cases: Vec<AtomBoundCase> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let atom = make_atom(spec, w)?;
            let h1 = riesz
                .iter()
                .map(|r| smooth.h1_norm(&r.apply(&atom.values)?, w))
                .collect::<Result<Vec<_>>>()?;
            Ok(AtomBoundCase {
                descriptor: format!(
                    "atom#{i} center={:?} side={}",
                    &atom.cube.center[..grid.dim()],
                    atom.cube.side
                ),
                side: atom.cube.side,
                h1_of_riesz: h1,
            })
        })
        .collect::<Result<_>>()?;

    let single = make_single_atom(q, w, seed.wrapping_add(0x5151))?;
    let mut cs = 0.0_f64;
    let mut single_h1 = Vec::new();
    for r in &riesz {
        let ra = r.apply(&single)?;
        let h1 = smooth.h1_norm(&ra, w)?;
        let l2 = lp_norm(&ra, w, 2.0)?;
        if l2 > 0.0 {
            cs = cs.max(h1 / (l2 * w.total_mass().sqrt()));
        }
        single_h1.push(h1);
    }
    cases.push(AtomBoundCase {
        descriptor: "single_atom".into(),
        side: 2.0 * grid.half_width(),
        h1_of_riesz: single_h1,
    });
    let max_bound = cases
        .iter()
        .flat_map(|c| c.h1_of_riesz.iter().copied())
        .fold(0.0, f64::max);
    Ok(AtomBoundSummary {
        cases,
        max_bound,
        single_atom_cs_constant: cs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_weight, WeightFamily};

    fn setup() -> (Grid, Weight) {
        let grid = Grid::new(1, 8.0, 257).unwrap();
        let w = make_weight(WeightFamily::Exponential { c: 1.0 }, grid).unwrap();
        (grid, w)
    }

    #[test]
    fn generated_atoms_validate() {
        let (grid, w) = setup();
        for (i, spec) in random_atom_specs(&grid, 30, 0.25, 2.0, 2.0, 2.0, 5).unwrap().iter().enumerate() {
            let atom = make_atom(spec, &w).unwrap();
            let report = validate_atom(&atom.values, &atom.kind(), &w).unwrap();
            assert!(report.is_valid(), "atom {i}: {report:?}");
            let d = &report.details;
            assert!((d.norm - d.norm_bound).abs() <= 1e-12 * d.norm_bound);
            if atom.spec.needs_cancellation() {
                assert!(d.mean <= 1e-10 * atom.values.abs().integrate());
            }
        }
    }
}
