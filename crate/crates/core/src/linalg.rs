//! Small linear-algebra helpers shared by the simulation modules.
//!
//! Dense eigendecompositions are delegated to `nalgebra`. This module adds the
//! pieces that are specific to the simulator: 2×2 single-qubit matrices,
//! a compressed sparse row matrix for Pauli-sum Hamiltonians, the partition of
//! basis states into invariant sectors, and bit spreading for the pair-local
//! layout of doubled registers.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// A single-qubit operator, indexed `[row][column]`.
pub type Mat2 = [[C64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub fn mat2_transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Largest entry of `|A - B|`.
pub fn mat2_max_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            m = m.max((a[r][c] - b[r][c]).norm());
        }
    }
    m
}

/// Max deviation of `A† A` from the identity.
pub fn mat2_unitarity_error(a: &Mat2) -> f64 {
    mat2_max_diff(&mat2_mul(&mat2_adjoint(a), a), &[[ONE, ZERO], [ZERO, ONE]])
}

pub fn mat2_hermiticity_error(a: &Mat2) -> f64 {
    mat2_max_diff(a, &mat2_adjoint(a))
}

/// Eigen-decomposition of a Hermitian 2×2 matrix.
///
/// Returns the eigenvalues in ascending order and the matching orthonormal
/// eigenvectors (`vectors[k]` belongs to `values[k]`).
pub fn mat2_hermitian_eigen(a: &Mat2) -> ([f64; 2], [[C64; 2]; 2]) {
    let p = a[0][0].re;
    let q = a[1][1].re;
    let b = a[0][1];
    let mean = 0.5 * (p + q);
    let half = 0.5 * (p - q);
    let r = libm::hypot(half, b.norm());
    let values = [mean - r, mean + r];
    if b.norm() <= 1e-300 {
        let (lo, hi) = if p <= q { ([ONE, ZERO], [ZERO, ONE]) } else { ([ZERO, ONE], [ONE, ZERO]) };
        return (values, [lo, hi]);
    }
    // (A - λ) v = 0 with v = (b, λ - p) up to normalisation.
    let mut vectors = [[ZERO; 2]; 2];
    for (k, &lambda) in values.iter().enumerate() {
        let v0 = b;
        let v1 = C64::new(lambda - p, 0.0);
        let norm = libm::sqrt(v0.norm_sqr() + v1.norm_sqr());
        vectors[k] = [v0 / norm, v1 / norm];
    }
    (values, vectors)
}

/// Sparse complex matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Entries in a row
    /// are summed per column and exact zeros after summation (up to `drop_tol`)
    /// are discarded.
    pub fn from_rows(dim: usize, mut rows: impl FnMut(usize, &mut Vec<(usize, C64)>), drop_tol: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut scratch: Vec<(usize, C64)> = Vec::new();
        row_ptr.push(0);
        for r in 0..dim {
            scratch.clear();
            rows(r, &mut scratch);
            scratch.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < scratch.len() {
                let c = scratch[k].0;
                let mut v = ZERO;
                while k < scratch.len() && scratch[k].0 == c {
                    v += scratch[k].1;
                    k += 1;
                }
                if v.norm() > drop_tol {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column/value pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|e| e.0 == c).map_or(ZERO, |e| e.1)
    }

    pub fn mul_vec(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Partition of the basis `0..dim` into sectors that a Hamiltonian does not
/// connect. Every sector lists its basis states in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sectors {
    dim: usize,
    sector_of: Vec<u32>,
    position: Vec<u32>,
    members: Vec<Vec<usize>>,
}

impl Sectors {
    /// A single sector holding the whole space.
    pub fn whole(dim: usize) -> Self {
        Self { dim, sector_of: vec![0; dim], position: (0..dim as u32).collect(), members: vec![(0..dim).collect()] }
    }

    /// Every basis state in its own sector (diagonal operators).
    pub fn singletons(dim: usize) -> Self {
        Self {
            dim,
            sector_of: (0..dim as u32).collect(),
            position: vec![0; dim],
            members: (0..dim).map(|x| vec![x]).collect(),
        }
    }

    /// Connected components of the nonzero pattern of `h`.
    pub fn connected_components(h: &CsrMatrix) -> Self {
        let dim = h.dim();
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for r in 0..dim {
            for (c, _) in h.row(r) {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut label = vec![u32::MAX; dim];
        let mut sector_of = vec![0u32; dim];
        let mut position = vec![0u32; dim];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for x in 0..dim {
            let root = find(&mut parent, x);
            if label[root] == u32::MAX {
                label[root] = members.len() as u32;
                members.push(Vec::new());
            }
            let s = label[root] as usize;
            sector_of[x] = s as u32;
            position[x] = members[s].len() as u32;
            members[s].push(x);
        }
        Self { dim, sector_of, position, members }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self, sector: usize) -> &[usize] {
        &self.members[sector]
    }

    pub fn sector_of(&self, x: usize) -> usize {
        self.sector_of[x] as usize
    }

    pub fn position(&self, x: usize) -> usize {
        self.position[x] as usize
    }

    pub fn largest(&self) -> usize {
        self.members.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.members.iter().map(Vec::as_slice)
    }
}

/// Table mapping an `n`-bit index `x` to the index with bit `j` of `x` moved
/// to bit `2j`. `spread[a] | (spread[b] << 1)` is the pair-local index of
/// copy-1 state `a` and copy-2 state `b`.
pub fn spread_table(n: usize) -> Vec<usize> {
    (0..1usize << n).map(|x| spread_bits(x, n)).collect()
}

pub fn spread_bits(x: usize, n: usize) -> usize {
    let mut y = 0;
    for j in 0..n {
        y |= ((x >> j) & 1) << (2 * j);
    }
    y
}

/// Inverse of [`spread_bits`] on the even bits; odd bits are ignored.
pub fn gather_even_bits(y: usize, n: usize) -> usize {
    let mut x = 0;
    for j in 0..n {
        x |= ((y >> (2 * j)) & 1) << j;
    }
    x
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// `max |A† A - 1|`.
pub fn unitarity_error(a: &DMatrix<C64>) -> f64 {
    let prod = a.adjoint() * a;
    let mut m: f64 = 0.0;
    for r in 0..prod.nrows() {
        for c in 0..prod.ncols() {
            let target = if r == c { ONE } else { ZERO };
            m = m.max((prod[(r, c)] - target).norm());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hermitian_eigen_2x2_reconstructs() {
        let a: Mat2 = [[c(0.3, 0.0), c(0.2, -0.7)], [c(0.2, 0.7), c(-1.1, 0.0)]];
        let (vals, vecs) = mat2_hermitian_eigen(&a);
        assert!(vals[0] <= vals[1]);
        for k in 0..2 {
            let v = vecs[k];
            for r in 0..2 {
                let av = a[r][0] * v[0] + a[r][1] * v[1];
                assert!((av - v[r] * vals[k]).norm() < 1e-12);
            }
        }
        let overlap = vecs[0][0].conj() * vecs[1][0] + vecs[0][1].conj() * vecs[1][1];
        assert!(overlap.norm() < 1e-12);
    }

    #[test]
    fn hermitian_eigen_diagonal_input() {
        let a: Mat2 = [[c(1.0, 0.0), ZERO], [ZERO, c(-1.0, 0.0)]];
        let (vals, vecs) = mat2_hermitian_eigen(&a);
        assert_eq!(vals, [-1.0, 1.0]);
        assert_eq!(vecs[0], [ZERO, ONE]);
    }

    #[test]
    fn spread_roundtrip() {
        for x in 0..64 {
            let y = spread_bits(x, 6);
            assert_eq!(y & 0xAAA, 0);
            assert_eq!(gather_even_bits(y, 6), x);
        }
        assert_eq!(spread_bits(0b11, 2), 0b0101);
    }

    #[test]
    fn components_of_block_matrix() {
        // Couples 0-2 and 1-3; leaves 4 alone.
        let m = CsrMatrix::from_rows(
            5,
            |r, row| match r {
                0 => row.push((2, ONE)),
                2 => row.push((0, ONE)),
                1 => row.push((3, I)),
                3 => row.push((1, -I)),
                _ => {}
            },
            0.0,
        );
        let s = Sectors::connected_components(&m);
        assert_eq!(s.len(), 3);
        assert_eq!(s.members(0), &[0, 2]);
        assert_eq!(s.members(1), &[1, 3]);
        assert_eq!(s.members(2), &[4]);
        assert_eq!(s.position(3), 1);
    }

    #[test]
    fn csr_merges_duplicates_and_drops_cancellations() {
        let m = CsrMatrix::from_rows(
            2,
            |r, row| {
                row.push((1 - r, ONE));
                row.push((1 - r, -ONE));
                row.push((r, c(2.0, 0.0)));
            },
            1e-14,
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), c(2.0, 0.0));
        assert_eq!(m.get(0, 1), ZERO);
    }
}
