//! Dense complex-matrix kernel: Hermitian spectra, singular values, trace
//! norm, partial trace and the generalized Gell-Mann operator basis.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

/// Default Hermiticity tolerance for [`herm_eig`].
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_real(a: &RMatrix) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_defect(a: &CMatrix) -> f64 {
    max_abs(&(a - a.adjoint()))
}

fn ensure_square(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `k` belongs to `values[k]`.
    pub vectors: CMatrix,
}

impl HermEig {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut w = CMatrix::zeros(n, n);
        for (k, v) in self.values.iter().enumerate() {
            w[(k, k)] = c(*v, 0.0);
        }
        &self.vectors * w * self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition with the default tolerance.
pub fn herm_eig(a: &CMatrix) -> Result<HermEig> {
    herm_eig_tol(a, HERMITIAN_TOL)
}

/// Hermitian eigendecomposition. Inputs whose Hermiticity defect is below
/// `tol` are symmetrized first; larger defects are rejected.
pub fn herm_eig_tol(a: &CMatrix, tol: f64) -> Result<HermEig> {
    ensure_square(a)?;
    let defect = hermitian_defect(a);
    if !(defect <= tol) {
        return Err(Error::NotHermitian { defect });
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = order.len();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermEig { values: order.iter().map(|&i| eig.eigenvalues[i]).collect(), vectors })
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigvalsh(a: &CMatrix) -> Result<Vec<f64>> {
    Ok(herm_eig(a)?.values)
}

/// Real symmetric spectrum (ascending), used for damping matrices.
pub fn symmetric_eigenvalues(a: &RMatrix) -> Vec<f64> {
    let sym = (a + a.transpose()).scale(0.5);
    let mut values: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Trace norm `Tr sqrt(A^dagger A)`, the sum of singular values.
pub fn trace_norm(a: &CMatrix) -> Result<f64> {
    ensure_square(a)?;
    Ok(a.singular_values().iter().sum())
}

/// Ratio of extreme singular values; infinite for singular matrices.
pub fn condition_number(a: &RMatrix) -> f64 {
    let s = a.singular_values();
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// Which factor of a bipartite space `H_A (x) H_B` to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace over `traced` of an operator on `H_A (x) H_B` with
/// `dims = (d_A, d_B)`.
pub fn partial_trace(a: &CMatrix, dims: (usize, usize), traced: Subsystem) -> Result<CMatrix> {
    let (da, db) = dims;
    if a.nrows() != da * db || a.ncols() != da * db {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator does not factor as {da}x{db}",
            a.nrows(),
            a.ncols()
        )));
    }
    let out = match traced {
        Subsystem::B => CMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| a[(i * db + k, j * db + k)]).sum()
        }),
        Subsystem::A => CMatrix::from_fn(db, db, |i, j| {
            (0..da).map(|k| a[(k * db + i, k * db + j)]).sum()
        }),
    };
    Ok(out)
}

/// Real matrix exponential.
pub fn expm(a: &RMatrix) -> RMatrix {
    a.exp()
}

/// Shared Gell-Mann bases for `2 <= d <= 16`, built on first use.
pub fn gell_mann_basis(d: usize) -> Result<&'static OperatorBasis> {
    use std::sync::OnceLock;
    static CACHE: [OnceLock<OperatorBasis>; 17] = [const { OnceLock::new() }; 17];
    if d < 2 {
        return Err(Error::BadDimension(d));
    }
    if d > 16 {
        return Err(Error::InvalidArgument(format!("dimension {d} exceeds 16")));
    }
    Ok(CACHE[d].get_or_init(|| OperatorBasis::gell_mann(d).expect("d >= 2")))
}

/// Orthonormal Hermitian operator basis: `Tr(G_i G_j) = delta_ij`,
/// `G_0 = I / sqrt(d)` and the remaining elements traceless.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<CMatrix>,
}

impl OperatorBasis {
    /// Normalized generalized Gell-Mann matrices: identity, then the
    /// symmetric off-diagonal, antisymmetric off-diagonal and diagonal
    /// families. For `d = 2` the traceless part is `(sx, sy, sz) / sqrt(2)`.
    pub fn gell_mann(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::BadDimension(d));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut elements = Vec::with_capacity(d * d);
        elements.push(identity(d).scale(1.0 / (d as f64).sqrt()));
        for j in 0..d {
            for k in (j + 1)..d {
                let mut g = CMatrix::zeros(d, d);
                g[(j, k)] = c(s, 0.0);
                g[(k, j)] = c(s, 0.0);
                elements.push(g);
            }
        }
        for j in 0..d {
            for k in (j + 1)..d {
                let mut g = CMatrix::zeros(d, d);
                g[(j, k)] = c(0.0, -s);
                g[(k, j)] = c(0.0, s);
                elements.push(g);
            }
        }
        for l in 1..d {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut g = CMatrix::zeros(d, d);
            for m in 0..l {
                g[(m, m)] = c(norm, 0.0);
            }
            g[(l, l)] = c(-(l as f64) * norm, 0.0);
            elements.push(g);
        }
        Ok(Self { dim: d, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn get(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    /// Hilbert-Schmidt coordinates `Tr(G_i X)`.
    pub fn coords(&self, x: &CMatrix) -> Vec<C64> {
        self.elements.iter().map(|g| hs_inner(g, x)).collect()
    }

    /// `sum_i c_i G_i`.
    pub fn combine(&self, coords: &[C64]) -> CMatrix {
        let d = self.dim;
        let mut out = CMatrix::zeros(d, d);
        for (g, ci) in self.elements.iter().zip(coords) {
            out += g * *ci;
        }
        out
    }

    /// Standard Gell-Mann normalization `Tr(l_i l_j) = 2 delta_ij`; for qubits
    /// these are the Pauli matrices.
    pub fn gell_mann_unnormalized(&self, i: usize) -> CMatrix {
        self.elements[i].scale(std::f64::consts::SQRT_2)
    }
}

/// `Tr(A B)` for Hermitian `A` (no conjugation applied).
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// `|i><j|` in dimension `d`.
pub fn ket_bra(d: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(i, j)] = c(1.0, 0.0);
    m
}

/// Block-diagonal direct sum `A (+) B`.
pub fn direct_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}
