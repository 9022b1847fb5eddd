//! Channel representations: operator-sum (Kraus), transfer matrix in the
//! Gell-Mann basis with its affine block form, and the Choi matrix.
//!
//! The transfer matrix of a map `E` is `F_ij = Tr(G_i E[G_j])`. For a trace
//! preserving map it has the block form
//!
//! ```text
//!     F = ( 1 | 0 )
//!         ( t | M )
//! ```
//!
//! and acts on the Bloch vector `r_i = sqrt(d) Tr(G_i rho)` as `r -> M r + t`.
//! For qubits `r` is the usual Bloch vector.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, condition_number, gell_mann_basis, herm_eig, identity, kron, max_abs, max_abs_real,
    CMatrix, HermEig, RMatrix,
};

/// Operator-sum representation `E[rho] = sum_j E_j rho E_j^dagger`.
#[derive(Debug, Clone)]
pub struct KrausSet {
    dim: usize,
    ops: Vec<CMatrix>,
}

impl KrausSet {
    /// Builds a Kraus set, requiring completeness `sum E^dagger E = I` to `1e-9`.
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerance(ops, 1e-9)
    }

    pub fn with_tolerance(ops: Vec<CMatrix>, tol: f64) -> Result<Self> {
        let Some(first) = ops.first() else {
            return Err(Error::InvalidArgument("empty Kraus set".into()));
        };
        let dim = first.nrows();
        for op in &ops {
            if op.nrows() != op.ncols() {
                return Err(Error::NonSquare { rows: op.nrows(), cols: op.ncols() });
            }
            if op.nrows() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operators of size {} and {}",
                    dim,
                    op.nrows()
                )));
            }
        }
        let set = Self { dim, ops };
        let defect = set.completeness_defect();
        if !(defect <= tol) {
            return Err(Error::IncompleteKraus { defect });
        }
        Ok(set)
    }

    pub fn identity(d: usize) -> Self {
        Self { dim: d, ops: vec![identity(d)] }
    }

    /// Random channel with `k` Kraus operators cut from a random isometry
    /// `C^d -> C^(dk)`.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> Self {
        let (q, _) = crate::state::ginibre(rng, d * k, d).qr().unpack();
        let ops = (0..k).map(|j| q.rows(j * d, d).into_owned()).collect();
        Self { dim: d, ops }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.ops
    }

    /// `max |sum_j E_j^dagger E_j - I|`.
    pub fn completeness_defect(&self) -> f64 {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for op in &self.ops {
            acc += op.adjoint() * op;
        }
        max_abs(&(acc - identity(self.dim)))
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for op in &self.ops {
            out += op * x * op.adjoint();
        }
        out
    }

    /// Transfer matrix `F_ij = Tr(G_i E[G_j])`.
    pub fn to_transfer(&self) -> TransferMatrix {
        let basis = gell_mann_basis(self.dim).expect("Kraus dimension >= 2");
        let n = basis.len();
        let mut f = RMatrix::zeros(n, n);
        for j in 0..n {
            let image = self.apply(basis.get(j));
            for i in 0..n {
                f[(i, j)] = linalg::hs_inner(basis.get(i), &image).re;
            }
        }
        TransferMatrix { dim: self.dim, mat: f }
    }

    /// Choi matrix `(E (x) I)[|Psi><Psi|]` with `|Psi> = sum_i |ii> / sqrt(d)`.
    pub fn to_choi(&self) -> ChoiMatrix {
        let d = self.dim;
        let mut psi = CMatrix::zeros(d * d, 1);
        for i in 0..d {
            psi[(i * d + i, 0)] = c(1.0 / (d as f64).sqrt(), 0.0);
        }
        let mut chi = CMatrix::zeros(d * d, d * d);
        for op in &self.ops {
            let v = kron(op, &identity(d)) * &psi;
            chi += &v * v.adjoint();
        }
        ChoiMatrix { dim: d, mat: chi }
    }

    /// Kraus set of the composition `second . self`.
    pub fn then(&self, second: &KrausSet) -> Result<KrausSet> {
        if self.dim != second.dim {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim, second.dim)));
        }
        let ops = second
            .ops
            .iter()
            .flat_map(|b| self.ops.iter().map(move |a| b * a))
            .collect();
        Ok(KrausSet { dim: self.dim, ops })
    }
}

/// Real `d^2 x d^2` matrix of a trace-preserving map in the Gell-Mann basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    dim: usize,
    mat: RMatrix,
}

impl TransferMatrix {
    /// Checks shape and the trace-preservation row `(1, 0, ..., 0)` to `1e-10`.
    pub fn new(dim: usize, mat: RMatrix) -> Result<Self> {
        Self::with_tolerance(dim, mat, 1e-10)
    }

    pub fn with_tolerance(dim: usize, mat: RMatrix, tol: f64) -> Result<Self> {
        let n = dim * dim;
        if dim < 2 {
            return Err(Error::BadDimension(dim));
        }
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::MalformedTransfer(format!(
                "expected {n}x{n}, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if !mat.iter().all(|x| x.is_finite()) {
            return Err(Error::MalformedTransfer("non-finite entry".into()));
        }
        let row_defect = (0..n)
            .map(|j| (mat[(0, j)] - if j == 0 { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if row_defect > tol {
            return Err(Error::MalformedTransfer(format!(
                "first row deviates from (1, 0, ..., 0) by {row_defect:e}"
            )));
        }
        Ok(Self { dim, mat })
    }

    pub(crate) fn from_raw(dim: usize, mat: RMatrix) -> Self {
        Self { dim, mat }
    }

    pub fn identity(d: usize) -> Self {
        Self { dim: d, mat: RMatrix::identity(d * d, d * d) }
    }

    /// Assembles `(1 | 0 ; tau | M)`.
    pub fn from_affine(dim: usize, affine: &AffineRep) -> Result<Self> {
        let n = dim * dim;
        if affine.m.nrows() != n - 1 || affine.m.ncols() != n - 1 || affine.tau.len() != n - 1 {
            return Err(Error::DimensionMismatch(format!(
                "affine part does not match dimension {dim}"
            )));
        }
        let mut mat = RMatrix::zeros(n, n);
        mat[(0, 0)] = 1.0;
        mat.view_mut((1, 0), (n - 1, 1)).copy_from(&affine.tau);
        mat.view_mut((1, 1), (n - 1, n - 1)).copy_from(&affine.m);
        Ok(Self { dim, mat })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> RMatrix {
        self.mat
    }

    /// Applies the map to an arbitrary (not necessarily Hermitian) operator
    /// by complex-linear extension.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let basis = gell_mann_basis(self.dim).expect("valid dimension");
        let coords = basis.coords(x);
        let n = coords.len();
        let mapped: Vec<C64> = (0..n)
            .map(|i| (0..n).map(|j| coords[j] * self.mat[(i, j)]).sum())
            .collect();
        basis.combine(&mapped)
    }

    /// `(I_A (x) E)[X]` for `X` on `H_A (x) H_d`.
    pub fn apply_with_ancilla(&self, x: &CMatrix, ancilla_dim: usize) -> Result<CMatrix> {
        let d = self.dim;
        let n = ancilla_dim * d;
        if x.nrows() != n || x.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "operator {}x{} is not on a {ancilla_dim}x{d} space",
                x.nrows(),
                x.ncols()
            )));
        }
        let mut out = CMatrix::zeros(n, n);
        for a in 0..ancilla_dim {
            for b in 0..ancilla_dim {
                let block = x.view((a * d, b * d), (d, d)).into_owned();
                out.view_mut((a * d, b * d), (d, d)).copy_from(&self.apply(&block));
            }
        }
        Ok(out)
    }

    /// Exact block extraction of `(M, tau)`.
    pub fn affine(&self) -> AffineRep {
        let n = self.dim * self.dim;
        AffineRep {
            m: self.mat.view((1, 1), (n - 1, n - 1)).into_owned(),
            tau: self.mat.view((1, 0), (n - 1, 1)).column(0).into_owned(),
        }
    }

    /// Choi matrix via the basis expansion `E[|a><b|] = sum_ij F_ij (G_j)_ba G_i`.
    pub fn to_choi(&self) -> ChoiMatrix {
        let d = self.dim;
        let mut chi = choi_unnormalized(self.dim, &self.mat);
        chi.unscale_mut(d as f64);
        ChoiMatrix { dim: d, mat: chi }
    }

    /// `self . first` (apply `first`, then `self`).
    pub fn compose(&self, first: &TransferMatrix) -> Result<TransferMatrix> {
        if self.dim != first.dim {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim, first.dim)));
        }
        Ok(TransferMatrix { dim: self.dim, mat: &self.mat * &first.mat })
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.mat)
    }

    /// Inverse map, refusing matrices with condition number above `max_condition`.
    pub fn inverse(&self, max_condition: f64) -> Result<(TransferMatrix, f64)> {
        let condition = self.condition_number();
        if !(condition <= max_condition) {
            return Err(Error::SingularIntermediate { condition });
        }
        let inv = self
            .mat
            .clone()
            .try_inverse()
            .ok_or(Error::SingularIntermediate { condition: f64::INFINITY })?;
        Ok((TransferMatrix { dim: self.dim, mat: inv }, condition))
    }

    /// Maximum entry difference.
    pub fn distance(&self, other: &TransferMatrix) -> f64 {
        max_abs_real(&(&self.mat - &other.mat))
    }

    /// Same map with the shift vector removed.
    pub fn unital_part(&self) -> TransferMatrix {
        let mut mat = self.mat.clone();
        let n = self.dim * self.dim;
        for i in 1..n {
            mat[(i, 0)] = 0.0;
        }
        TransferMatrix { dim: self.dim, mat }
    }
}

/// `sum_ab E[|a><b|] (x) |a><b|` for the map with transfer matrix `f`.
pub(crate) fn choi_unnormalized(d: usize, f: &RMatrix) -> CMatrix {
    let basis = gell_mann_basis(d).expect("valid dimension");
    let n = d * d;
    let mut chi = CMatrix::zeros(n, n);
    for a in 0..d {
        for b in 0..d {
            // E[|a><b|] = sum_i G_i sum_j F_ij (G_j)_{ba}
            let mut image = CMatrix::zeros(d, d);
            for i in 0..n {
                let w: C64 = (0..n).map(|j| basis.get(j)[(b, a)] * f[(i, j)]).sum();
                if w != C64::new(0.0, 0.0) {
                    image += basis.get(i) * w;
                }
            }
            for r in 0..d {
                for s in 0..d {
                    chi[(r * d + a, s * d + b)] += image[(r, s)];
                }
            }
        }
    }
    chi
}

/// Affine action `r -> M r + tau` on Bloch vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRep {
    pub m: RMatrix,
    pub tau: DVector<f64>,
}

impl AffineRep {
    pub fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        &self.m * r + &self.tau
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.tau.amax() <= tol
    }
}

/// Bloch vector `r_i = sqrt(d) Tr(G_i rho)`, `i >= 1`.
pub fn bloch_vector(rho: &CMatrix) -> Result<DVector<f64>> {
    let d = rho.nrows();
    let basis = gell_mann_basis(d)?;
    let scale = (d as f64).sqrt();
    Ok(DVector::from_iterator(
        d * d - 1,
        basis.elements()[1..].iter().map(|g| scale * linalg::hs_inner(g, rho).re),
    ))
}

/// Inverse of [`bloch_vector`]: `rho = (I + sqrt(d) sum_i r_i G_i) / d`.
pub fn from_bloch_vector(d: usize, r: &DVector<f64>) -> Result<CMatrix> {
    let basis = gell_mann_basis(d)?;
    if r.len() != d * d - 1 {
        return Err(Error::DimensionMismatch(format!("Bloch vector length {}", r.len())));
    }
    let mut coords = vec![c(1.0 / (d as f64).sqrt(), 0.0)];
    coords.extend(r.iter().map(|x| c(x / (d as f64).sqrt(), 0.0)));
    Ok(basis.combine(&coords))
}

/// Unit-trace Choi matrix `(E (x) I)[|Psi><Psi|]`.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    dim: usize,
    mat: CMatrix,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn spectrum(&self) -> Result<HermEig> {
        herm_eig(&self.mat)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.spectrum()?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.spectrum()?.min())
    }

    /// `true` when the represented map is completely positive within `tol`.
    pub fn is_cp(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    pub fn distance(&self, other: &ChoiMatrix) -> f64 {
        max_abs(&(&self.mat - &other.mat))
    }
}

/// Intermediate map `F(t, s) = F(t) F(s)^{-1}` with the condition number of `F(s)`.
#[derive(Debug, Clone)]
pub struct Intermediate {
    pub map: TransferMatrix,
    pub condition: f64,
}

pub fn intermediate_map(
    f_t: &TransferMatrix,
    f_s: &TransferMatrix,
    max_condition: f64,
) -> Result<Intermediate> {
    if f_t.dim != f_s.dim {
        return Err(Error::DimensionMismatch(format!("{} vs {}", f_t.dim, f_s.dim)));
    }
    let (inv, condition) = f_s.inverse(max_condition)?;
    Ok(Intermediate { map: f_t.compose(&inv)?, condition })
}

/// Unital and non-unital parts of the intermediate map:
/// `M(t,s) = M(t) M(s)^{-1}` and `tau(t,s) = tau(t) - M(t,s) tau(s)`.
pub fn unital_nonunital_split(
    f_t: &TransferMatrix,
    f_s: &TransferMatrix,
    max_condition: f64,
) -> Result<AffineRep> {
    let at = f_t.affine();
    let as_ = f_s.affine();
    let condition = condition_number(&as_.m);
    if !(condition <= max_condition) {
        return Err(Error::SingularIntermediate { condition });
    }
    let m_inv = as_
        .m
        .clone()
        .try_inverse()
        .ok_or(Error::SingularIntermediate { condition: f64::INFINITY })?;
    let m = &at.m * m_inv;
    let tau = &at.tau - &m * &as_.tau;
    Ok(AffineRep { m, tau })
}

/// A time-parametrized channel `t -> F(t)`.
pub trait Trajectory: Sync {
    fn dim(&self) -> usize;
    fn transfer_at(&self, t: f64) -> Result<TransferMatrix>;
}

impl<T: Trajectory + ?Sized> Trajectory for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn transfer_at(&self, t: f64) -> Result<TransferMatrix> {
        (**self).transfer_at(t)
    }
}

impl<T: Trajectory + ?Sized> Trajectory for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn transfer_at(&self, t: f64) -> Result<TransferMatrix> {
        (**self).transfer_at(t)
    }
}

/// Trajectory from a closure producing transfer matrices.
pub struct FnTrajectory<F> {
    dim: usize,
    f: F,
}

impl<F> FnTrajectory<F>
where
    F: Fn(f64) -> Result<TransferMatrix> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Trajectory for FnTrajectory<F>
where
    F: Fn(f64) -> Result<TransferMatrix> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn transfer_at(&self, t: f64) -> Result<TransferMatrix> {
        (self.f)(t)
    }
}

/// Trajectory from a closure producing Kraus sets.
pub struct KrausTrajectory<F> {
    dim: usize,
    f: F,
}

impl<F> KrausTrajectory<F>
where
    F: Fn(f64) -> Result<KrausSet> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }

    pub fn kraus_at(&self, t: f64) -> Result<KrausSet> {
        (self.f)(t)
    }
}

impl<F> Trajectory for KrausTrajectory<F>
where
    F: Fn(f64) -> Result<KrausSet> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn transfer_at(&self, t: f64) -> Result<TransferMatrix> {
        Ok((self.f)(t)?.to_transfer())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_x, pauli_y, pauli_z};
    use approx::assert_abs_diff_eq;

    fn gad(lambda: f64, p: f64) -> KrausSet {
        let (a, b) = ((1.0 - p).sqrt(), p.sqrt());
        let s = (1.0 - lambda).sqrt();
        let l = lambda.sqrt();
        let m = |v: [f64; 4]| CMatrix::from_row_slice(2, 2, &v.map(|x| c(x, 0.0)));
        KrausSet::new(vec![
            m([a, 0.0, 0.0, a * s]),
            m([0.0, a * l, 0.0, 0.0]),
            m([b * s, 0.0, 0.0, b]),
            m([0.0, 0.0, b * l, 0.0]),
        ])
        .unwrap()
    }

    #[test]
    fn identity_channel_transfer() {
        let f = KrausSet::identity(2).to_transfer();
        assert!(f.distance(&TransferMatrix::identity(2)) < 1e-15);
        let aff = f.affine();
        assert!(max_abs_real(&(&aff.m - RMatrix::identity(3, 3))) < 1e-15);
        assert!(aff.is_unital(0.0));
    }

    #[test]
    fn gad_affine_form() {
        // Independent oracle: push the Bloch basis through the Kraus operators.
        let k = gad(0.75, 0.25);
        let image_of = |r: [f64; 3]| {
            let rho = from_bloch_vector(2, &DVector::from_row_slice(&r)).unwrap();
            bloch_vector(&k.apply(&rho)).unwrap()
        };
        let tau_oracle = image_of([0.0, 0.0, 0.0]);
        let aff = k.to_transfer().affine();
        assert!((aff.tau.clone() - tau_oracle.clone()).amax() < 1e-14);
        assert_abs_diff_eq!(tau_oracle[2], 0.375, epsilon = 1e-14);
        for (i, col) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].iter().enumerate() {
            let mcol = image_of(*col) - &tau_oracle;
            for r in 0..3 {
                assert_abs_diff_eq!(aff.m[(r, i)], mcol[r], epsilon = 1e-14);
            }
        }
        let expected = RMatrix::from_diagonal(&DVector::from_row_slice(&[0.5, 0.5, 0.25]));
        assert!(max_abs_real(&(aff.m - expected)) < 1e-14);
    }

    #[test]
    fn full_damping_block_extraction() {
        let aff = gad(1.0, 0.3).to_transfer().affine();
        assert!(max_abs_real(&aff.m) < 1e-15);
        assert_abs_diff_eq!(aff.tau[2], 1.0 - 2.0 * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(aff.tau[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pauli_channel_is_unital() {
        let k: f64 = 0.1;
        let ops = vec![
            identity(2).scale((1.0 - 2.0 * k).sqrt()),
            pauli_x().scale(k.sqrt()),
            pauli_y().scale(k.sqrt()),
        ];
        let f = KrausSet::new(ops).unwrap().to_transfer();
        let aff = f.affine();
        assert!(aff.tau.amax() < 1e-15);
        // weights (1-2k, k, k, 0): eigenvalues 1 - 2k - ... computed directly
        assert_abs_diff_eq!(aff.m[(0, 0)], 1.0 - 2.0 * k, epsilon = 1e-14);
        assert_abs_diff_eq!(aff.m[(1, 1)], 1.0 - 2.0 * k, epsilon = 1e-14);
        assert_abs_diff_eq!(aff.m[(2, 2)], 1.0 - 4.0 * k, epsilon = 1e-14);
        assert_abs_diff_eq!(aff.m[(0, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn choi_examples() {
        let id = KrausSet::identity(2).to_choi();
        let ev = id.eigenvalues().unwrap();
        for (v, e) in ev.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-14);
        }
        let depol = KrausSet::new(
            [identity(2), pauli_x(), pauli_y(), pauli_z()].iter().map(|p| p.scale(0.5)).collect(),
        )
        .unwrap()
        .to_choi();
        assert!(max_abs(&(depol.matrix() - identity(4).scale(0.25))) < 1e-15);

        // lambda = 1, p = 1: everything is sent to |1><1|, chi = |1><1| (x) I/2
        let chi = gad(1.0, 1.0).to_choi();
        let expected = kron(&crate::linalg::ket_bra(2, 1, 1), &identity(2).scale(0.5));
        assert!(max_abs(&(chi.matrix() - &expected)) < 1e-15);
        let rank = chi.eigenvalues().unwrap().iter().filter(|v| **v > 1e-12).count();
        assert_eq!(rank, 2);
    }

    #[test]
    fn transfer_choi_matches_kraus_choi() {
        let k = gad(0.4, 0.2);
        assert!(k.to_transfer().to_choi().distance(&k.to_choi()) < 1e-14);
        let not = KrausSet::new(vec![pauli_x()]).unwrap();
        let chi = not.to_transfer().to_choi();
        assert!(chi.distance(&not.to_choi()) < 1e-14);
        let rank = chi.eigenvalues().unwrap().iter().filter(|v| **v > 1e-12).count();
        assert_eq!(rank, 1);
        let id = TransferMatrix::identity(3).to_choi();
        assert!(id.distance(&KrausSet::identity(3).to_choi()) < 1e-14);
    }

    #[test]
    fn composition_of_damping() {
        let (l1, l2) = (0.3, 0.5);
        let f = gad(l2, 0.2).to_transfer().compose(&gad(l1, 0.2).to_transfer()).unwrap();
        assert_abs_diff_eq!(f.matrix()[(3, 3)], (1.0 - l1) * (1.0 - l2), epsilon = 1e-14);
        let id = TransferMatrix::identity(2);
        assert!(f.compose(&id).unwrap().distance(&f) < 1e-15);
        assert!(matches!(f.compose(&TransferMatrix::identity(3)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn intermediate_of_equal_maps_is_identity() {
        let f = gad(0.3, 0.2).to_transfer();
        let mid = intermediate_map(&f, &f, 1e12).unwrap();
        assert!(mid.map.distance(&TransferMatrix::identity(2)) < 1e-14);
        assert!(mid.condition >= 1.0);
    }

    #[test]
    fn singular_intermediate_is_reported() {
        let f = gad(1.0, 0.2).to_transfer();
        assert!(matches!(
            intermediate_map(&f, &f, 1e12),
            Err(Error::SingularIntermediate { .. })
        ));
    }

    #[test]
    fn split_for_constant_p() {
        let p = 0.2;
        let (ls, lt) = (0.3, 0.6);
        let (ft, fs) = (gad(lt, p).to_transfer(), gad(ls, p).to_transfer());
        let split = unital_nonunital_split(&ft, &fs, 1e12).unwrap();
        assert_abs_diff_eq!(split.tau[2], (1.0 - 2.0 * p) * (lt - ls) / (1.0 - ls), epsilon = 1e-14);
        assert_abs_diff_eq!(split.m[(2, 2)], (1.0 - lt) / (1.0 - ls), epsilon = 1e-14);
        // agrees with block extraction of F(t) F(s)^-1
        let mid = intermediate_map(&ft, &fs, 1e12).unwrap().map.affine();
        assert!((mid.tau - &split.tau).amax() < 1e-14);
        // s = 0
        let split0 = unital_nonunital_split(&ft, &TransferMatrix::identity(2), 1e12).unwrap();
        assert_eq!(split0, ft.affine());
    }

    #[test]
    fn malformed_transfer_rejected() {
        let mut m = RMatrix::identity(4, 4);
        m[(0, 1)] = 0.1;
        assert!(matches!(TransferMatrix::new(2, m), Err(Error::MalformedTransfer(_))));
        assert!(matches!(
            TransferMatrix::new(2, RMatrix::identity(3, 3)),
            Err(Error::MalformedTransfer(_))
        ));
    }

    #[test]
    fn incomplete_kraus_rejected() {
        let err = KrausSet::new(vec![identity(2).scale(0.5)]).unwrap_err();
        assert!(matches!(err, Error::IncompleteKraus { .. }));
    }

    #[test]
    fn ancilla_extension_of_identity() {
        let f = TransferMatrix::identity(2);
        let x = crate::state::ginibre(&mut rand::rng(), 6, 6);
        let y = f.apply_with_ancilla(&x, 3).unwrap();
        assert!(max_abs(&(y - x)) < 1e-14);
    }
}
