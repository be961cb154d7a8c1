//! Query structures over sampled fields: compensated summed-area tables,
//! square-minimum sparse tables and sliding-window maxima.

use std::collections::VecDeque;

use crate::grid::{Grid, NodeBox};

/// Unevaluated sum `hi + lo` carrying about 106 bits of precision.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

impl Dd {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Self { hi, lo }
    }

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    fn half(self) -> Self {
        Self {
            hi: 0.5 * self.hi,
            lo: 0.5 * self.lo,
        }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Summed-area table with double-double accumulation, so box sums near the
/// origin of a rapidly growing field do not lose digits to cancellation.
#[derive(Clone, Debug)]
pub struct PrefixTable {
    dim: usize,
    n: usize,
    // (n+1)^dim entries; entry (i, j) sums nodes [0, i) x [0, j)
    sums: Vec<Dd>,
    values: Vec<f64>,
}

impl PrefixTable {
    pub fn new(grid: &Grid, values: &[f64]) -> Self {
        let n = grid.n();
        let dim = grid.dim();
        let sums = match dim {
            1 => {
                let mut s = Vec::with_capacity(n + 1);
                s.push(Dd::default());
                for (i, &v) in values.iter().enumerate() {
                    s.push(s[i].add(Dd::from(v)));
                }
                s
            }
            _ => {
                let w = n + 1;
                let mut s = vec![Dd::default(); w * w];
                for i in 0..n {
                    for j in 0..n {
                        let v = Dd::from(values[i * n + j]);
                        s[(i + 1) * w + j + 1] = v
                            .add(s[i * w + j + 1])
                            .add(s[(i + 1) * w + j])
                            .sub(s[i * w + j]);
                    }
                }
                s
            }
        };
        Self {
            dim,
            n,
            sums,
            values: values.to_vec(),
        }
    }

    /// Plain sum over nodes `i0..=i1` (x `j0..=j1` in 2D).
    fn rect(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> Dd {
        match self.dim {
            1 => self.sums[i1 + 1].sub(self.sums[i0]),
            _ => {
                let w = self.n + 1;
                let s = |i: usize, j: usize| self.sums[i * w + j];
                s(i1 + 1, j1 + 1)
                    .sub(s(i0, j1 + 1))
                    .sub(s(i1 + 1, j0))
                    .add(s(i0, j0))
            }
        }
    }

    /// Unweighted node sum over the closed box.
    pub fn box_sum(&self, b: &NodeBox) -> f64 {
        self.rect(b.lo[0], b.hi[0], b.lo[1], b.hi[1]).value()
    }

    /// Trapezoid-weighted node sum over the closed box (boundary nodes count
    /// one half per axis). Multiply by `h^dim` for the integral. Zero when
    /// the box is degenerate along any axis.
    pub fn trapezoid_sum(&self, b: &NodeBox) -> f64 {
        if (0..self.dim).any(|a| b.lo[a] >= b.hi[a]) {
            return 0.0;
        }
        match self.dim {
            1 => {
                let (a, z) = (b.lo[0], b.hi[0]);
                let ends = Dd::from(self.values[a]).add(Dd::from(self.values[z]));
                self.rect(a, z, 0, 0).sub(ends.half()).value()
            }
            _ => {
                let ([i0, j0], [i1, j1]) = (b.lo, b.hi);
                let n = self.n;
                let full = self.rect(i0, i1, j0, j1);
                let rows = self.rect(i0, i0, j0, j1).add(self.rect(i1, i1, j0, j1));
                let cols = self.rect(i0, i1, j0, j0).add(self.rect(i0, i1, j1, j1));
                let corners = Dd::from(self.values[i0 * n + j0])
                    .add(Dd::from(self.values[i0 * n + j1]))
                    .add(Dd::from(self.values[i1 * n + j0]))
                    .add(Dd::from(self.values[i1 * n + j1]));
                full.sub(rows.half())
                    .sub(cols.half())
                    .add(corners.half().half())
                    .value()
            }
        }
    }
}

/// Sparse table answering minimum queries over node squares in O(1).
///
/// Level `k` stores the minimum over the `2^k`-wide square (interval in 1D)
/// anchored at each node; a query covers its square with four overlapping
/// power-of-two squares.
#[derive(Clone, Debug)]
pub struct MinTable {
    dim: usize,
    n: usize,
    levels: Vec<Vec<f64>>,
}

impl MinTable {
    pub fn new(grid: &Grid, values: &[f64]) -> Self {
        let n = grid.n();
        let dim = grid.dim();
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= n {
            let prev = levels.last().unwrap();
            let next = match dim {
                1 => (0..n)
                    .map(|i| {
                        if i + width < n {
                            prev[i].min(prev[i + width])
                        } else {
                            prev[i]
                        }
                    })
                    .collect(),
                _ => {
                    let mut out = vec![f64::INFINITY; n * n];
                    for i in 0..n {
                        for j in 0..n {
                            let mut m = prev[i * n + j];
                            let (ii, jj) = (i + width, j + width);
                            if ii < n {
                                m = m.min(prev[ii * n + j]);
                            }
                            if jj < n {
                                m = m.min(prev[i * n + jj]);
                            }
                            if ii < n && jj < n {
                                m = m.min(prev[ii * n + jj]);
                            }
                            out[i * n + j] = m;
                        }
                    }
                    out
                }
            };
            levels.push(next);
            width *= 2;
        }
        Self { dim, n, levels }
    }

    /// Minimum over the closed node square `b` (must be square in 2D).
    pub fn square_min(&self, b: &NodeBox) -> f64 {
        let len = b.hi[0] - b.lo[0] + 1;
        let k = usize::BITS - 1 - len.leading_zeros();
        let w = 1usize << k;
        let table = &self.levels[k as usize];
        match self.dim {
            1 => table[b.lo[0]].min(table[b.hi[0] + 1 - w]),
            _ => {
                debug_assert_eq!(b.hi[1] - b.lo[1] + 1, len);
                let n = self.n;
                let (i0, j0) = (b.lo[0], b.lo[1]);
                let (i1, j1) = (b.hi[0] + 1 - w, b.hi[1] + 1 - w);
                table[i0 * n + j0]
                    .min(table[i0 * n + j1])
                    .min(table[i1 * n + j0])
                    .min(table[i1 * n + j1])
            }
        }
    }
}

/// `out[x] = max { values[s] : x - reach <= s <= x, s < values.len() }` for
/// `x` in `0..out_len`, via a monotone deque.
pub fn sliding_window_max(values: &[f64], reach: usize, out_len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(out_len);
    let mut deque: VecDeque<usize> = VecDeque::new();
    for x in 0..out_len {
        if x < values.len() {
            while deque.back().is_some_and(|&b| values[b] <= values[x]) {
                deque.pop_back();
            }
            deque.push_back(x);
        }
        while deque.front().is_some_and(|&f| f + reach < x) {
            deque.pop_front();
        }
        out.push(deque.front().map_or(f64::NEG_INFINITY, |&f| values[f]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_trapezoid(grid: &Grid, values: &[f64], b: &NodeBox) -> f64 {
        (0..grid.len())
            .map(|k| b.trapezoid_weight(grid.multi_index(k)) * values[k])
            .sum()
    }

    #[test]
    fn trapezoid_of_ones_is_cell_count() {
        for grid in [Grid::new(1, 2.0, 33).unwrap(), Grid::new(2, 2.0, 33).unwrap()] {
            let ones = vec![1.0; grid.len()];
            let t = PrefixTable::new(&grid, &ones);
            for cells in [1, 2, 7, 16, 32] {
                let b = NodeBox::square(grid.dim(), [0, 0], cells);
                assert_eq!(t.trapezoid_sum(&b), cells.pow(grid.dim() as u32) as f64);
            }
        }
    }

    #[test]
    fn compensated_sums_survive_large_offsets() {
        let grid = Grid::new(1, 8.0, 257).unwrap();
        let values: Vec<f64> = grid.nodes().map(|(_, x)| (x[0].abs() * 3.0).exp()).collect();
        let t = PrefixTable::new(&grid, &values);
        let b = NodeBox::square(1, [126, 0], 4);
        let direct = brute_trapezoid(&grid, &values, &b);
        assert!((t.trapezoid_sum(&b) - direct).abs() <= 1e-14 * direct);
    }

    #[test]
    fn sliding_max_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..1.0)).collect();
        for reach in [0, 1, 3, 9] {
            let out_len = values.len() + reach;
            let got = sliding_window_max(&values, reach, out_len);
            for x in 0..out_len {
                let lo = x.saturating_sub(reach);
                let want = values[lo..=x.min(values.len() - 1)]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(got[x], want);
            }
        }
    }

    proptest! {
        #[test]
        fn prefix_trapezoid_matches_direct_sum(
            seed in 0u64..1000,
            dim in 1usize..=2,
            lo0 in 0usize..20,
            lo1 in 0usize..20,
            cells in 1usize..12,
        ) {
            let grid = Grid::new(dim, 1.0, 33).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.1..5.0)).collect();
            let t = PrefixTable::new(&grid, &values);
            let b = NodeBox::square(dim, [lo0, lo1], cells);
            let direct = brute_trapezoid(&grid, &values, &b);
            prop_assert!((t.trapezoid_sum(&b) - direct).abs() <= 1e-12 * direct);
            let plain: f64 = (0..grid.len())
                .filter(|&k| b.contains_index(grid.multi_index(k)))
                .map(|k| values[k])
                .sum();
            prop_assert!((t.box_sum(&b) - plain).abs() <= 1e-12 * plain);
        }

        #[test]
        fn square_min_matches_brute_force(
            seed in 0u64..1000,
            dim in 1usize..=2,
            lo0 in 0usize..25,
            lo1 in 0usize..25,
            cells in 0usize..8,
        ) {
            let grid = Grid::new(dim, 1.0, 33).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.1..5.0)).collect();
            let t = MinTable::new(&grid, &values);
            let b = NodeBox::square(dim, [lo0, lo1], cells);
            let brute = (0..grid.len())
                .filter(|&k| b.contains_index(grid.multi_index(k)))
                .map(|k| values[k])
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(t.square_min(&b), brute);
        }
    }
}
