//! Symmetric zero-diagonal matrices and order-independent reductions.
//!
//! Every edge matrix in this crate (clean subgraph states, noised states,
//! predicted noise) is symmetric with a zero diagonal. [`SymMat`] enforces
//! that by construction: writes go through the strict upper triangle and
//! are mirrored, so symmetry is exact rather than approximate.

use rand::Rng;
use rand_distr::StandardNormal;

/// Sums a slice after sorting it into a canonical order.
///
/// The result depends only on the multiset of values, not on their input
/// order, which makes reductions over graph neighborhoods bit-identical
/// under node relabeling and independent of iteration order.
pub fn stable_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Dense symmetric matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat {
    m: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(m: usize) -> Self {
        SymMat {
            m,
            data: vec![0.0; m * m],
        }
    }

    /// Builds a matrix by evaluating `f` on every strict-upper-triangle
    /// pair `(i, j)` with `i < j` and mirroring the value.
    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = SymMat::zeros(m);
        for i in 0..m {
            for j in (i + 1)..m {
                let v = f(i, j);
                out.data[i * m + j] = v;
                out.data[j * m + i] = v;
            }
        }
        out
    }

    /// Symmetric matrix of i.i.d. standard normal entries (upper triangle
    /// drawn in row-major order, mirrored).
    pub fn standard_normal(m: usize, rng: &mut impl Rng) -> Self {
        SymMat::from_fn(m, |_, _| rng.sample(StandardNormal))
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Number of strict-upper-triangle entries, i.e. undirected edges.
    pub fn n_pairs(&self) -> usize {
        self.m * (self.m - 1) / 2
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    /// Sets both `(i, j)` and `(j, i)`. Panics on a diagonal index.
    pub fn set_pair(&mut self, i: usize, j: usize, v: f64) {
        assert!(i != j, "diagonal entries are fixed at zero");
        self.data[i * self.m + j] = v;
        self.data[j * self.m + i] = v;
    }

    /// Iterates the strict upper triangle in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = self.m;
        (0..m).flat_map(move |i| ((i + 1)..m).map(move |j| (i, j, self.get(i, j))))
    }

    /// Applies `f` entrywise over the upper triangle, producing a new matrix.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> SymMat {
        SymMat::from_fn(self.m, |i, j| f(self.get(i, j)))
    }

    /// `self * a + other * b`, entrywise over pairs.
    pub fn scaled_add(&self, a: f64, other: &SymMat, b: f64) -> SymMat {
        assert_eq!(self.m, other.m, "dimension mismatch");
        SymMat::from_fn(self.m, |i, j| self.get(i, j) * a + other.get(i, j) * b)
    }

    /// Frobenius distance over the strict upper triangle.
    pub fn upper_distance(&self, other: &SymMat) -> f64 {
        assert_eq!(self.m, other.m, "dimension mismatch");
        self.pairs()
            .map(|(i, j, v)| (v - other.get(i, j)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Maximum absolute difference over the strict upper triangle.
    pub fn max_abs_diff(&self, other: &SymMat) -> f64 {
        assert_eq!(self.m, other.m, "dimension mismatch");
        self.pairs()
            .map(|(i, j, v)| (v - other.get(i, j)).abs())
            .fold(0.0, f64::max)
    }

    /// Validates symmetry and zero diagonal of raw rows (used by parsers).
    pub fn try_from_rows(rows: Vec<Vec<f64>>) -> crate::Result<SymMat> {
        let m = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(crate::Error::invalid(format!(
                    "row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
        }
        for i in 0..m {
            if rows[i][i] != 0.0 {
                return Err(crate::Error::invalid(format!(
                    "nonzero diagonal at row {i}"
                )));
            }
            for j in (i + 1)..m {
                if rows[i][j] != rows[j][i] {
                    return Err(crate::Error::invalid(format!(
                        "asymmetric entries at ({i},{j})"
                    )));
                }
            }
        }
        Ok(SymMat::from_fn(m, |i, j| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn stable_sum_is_order_independent() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let base: Vec<f64> = (0..257).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let mut a = base.clone();
        let mut b = base.clone();
        b.reverse();
        b.rotate_left(37);
        assert_eq!(stable_sum(&mut a).to_bits(), stable_sum(&mut b).to_bits());
    }

    #[test]
    fn from_fn_is_symmetric_zero_diag() {
        let m = SymMat::from_fn(4, |i, j| (i * 10 + j) as f64);
        for i in 0..4 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..4 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn try_from_rows_rejects_asymmetry() {
        let rows = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(SymMat::try_from_rows(rows).is_err());
        let rows = vec![vec![0.5, 1.0], vec![1.0, 0.0]];
        assert!(SymMat::try_from_rows(rows).is_err());
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(SymMat::try_from_rows(rows).is_ok());
    }

    #[test]
    fn standard_normal_is_seeded() {
        let a = SymMat::standard_normal(6, &mut ChaCha20Rng::seed_from_u64(9));
        let b = SymMat::standard_normal(6, &mut ChaCha20Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
