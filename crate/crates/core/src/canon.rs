//! Generator-level machinery for time-local master equations
//!
//! ```text
//! L(t)[rho] = -i[H, rho] + sum_jk d_jk (l_j rho l_k - 1/2 {l_k l_j, rho})
//! ```
//!
//! with `l_j` the traceless Gell-Mann matrices in their standard normalization
//! `Tr(l_j l_k) = 2 delta_jk` (the Pauli matrices for a qubit). The canonical
//! decay rates are the eigenvalues of the decoherence matrix `d`; for a qubit
//! `sum_j g_j (s_j rho s_j - rho)` they are exactly the `g_j`. A dissipator
//! written with a jump operator of unit Hilbert-Schmidt norm (such as `|0><1|`)
//! shows up with half its coefficient; [`CanonicalRates::orthonormal`] undoes
//! that factor.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::curve::ParamCurve;
use crate::error::{Error, Result};
use crate::linalg::{
    c, condition_number, gell_mann_basis, herm_eig_tol, hermitian_defect, hs_inner, identity,
    max_abs, max_abs_real, CMatrix, RMatrix,
};
use crate::repr::{choi_unnormalized, TransferMatrix, Trajectory};
use crate::tolerance::Tolerances;

/// A dissipator `rate * (A rho A^dagger - 1/2 {A^dagger A, rho})`.
#[derive(Debug, Clone)]
pub struct JumpTerm {
    pub rate: f64,
    pub op: CMatrix,
}

impl JumpTerm {
    pub fn new(rate: f64, op: CMatrix) -> Self {
        Self { rate, op }
    }
}

/// Applies `-i[H, X] + sum rate (A X A^dagger - 1/2 {A^dagger A, X})`.
pub fn apply_terms(hamiltonian: Option<&CMatrix>, terms: &[JumpTerm], x: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(x.nrows(), x.ncols());
    if let Some(h) = hamiltonian {
        out += (h * x - x * h) * c(0.0, -1.0);
    }
    for term in terms {
        if term.rate == 0.0 {
            continue;
        }
        let a = &term.op;
        let ada = a.adjoint() * a;
        let piece = a * x * a.adjoint() - (&ada * x + x * &ada).scale(0.5);
        out += piece.scale(term.rate);
    }
    out
}

/// Transfer-matrix representation `L_ij = Tr(G_i L[G_j])` of a superoperator.
pub fn superoperator_matrix<F: Fn(&CMatrix) -> CMatrix>(d: usize, apply: F) -> Result<RMatrix> {
    let basis = gell_mann_basis(d)?;
    let n = basis.len();
    let mut l = RMatrix::zeros(n, n);
    for j in 0..n {
        let image = apply(basis.get(j));
        for i in 0..n {
            l[(i, j)] = hs_inner(basis.get(i), &image).re;
        }
    }
    Ok(l)
}

/// Hamiltonian and decoherence matrix of a generator at one instant.
#[derive(Debug, Clone)]
pub struct GeneratorSnapshot {
    pub t: f64,
    dim: usize,
    hamiltonian: CMatrix,
    decoherence: CMatrix,
    superop: RMatrix,
}

impl GeneratorSnapshot {
    /// Builds the generator from explicit Hamiltonian and dissipators.
    pub fn from_terms(
        t: f64,
        d: usize,
        hamiltonian: Option<&CMatrix>,
        terms: &[JumpTerm],
    ) -> Result<Self> {
        let l = superoperator_matrix(d, |x| apply_terms(hamiltonian, terms, x))?;
        Self::from_superoperator(t, d, l, 1e-10)
    }

    /// Decomposes a trace-annihilating, Hermiticity-preserving superoperator
    /// (given as a transfer matrix) into its Hamiltonian and decoherence
    /// matrix. Fails with `NotHermitian` when the coefficient matrix has a
    /// Hermiticity defect above `herm_tol`.
    pub fn from_superoperator(t: f64, d: usize, l: RMatrix, herm_tol: f64) -> Result<Self> {
        let basis = gell_mann_basis(d)?;
        let n = basis.len();
        if l.nrows() != n || l.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "superoperator {}x{} for dimension {d}",
                l.nrows(),
                l.ncols()
            )));
        }
        // L[X] = sum_ab coef_ab G_a X G_b with coef_ab = v_a^dagger C v_b,
        // C the (unnormalized) Choi matrix of L and v_a = (G_a (x) I)|Omega>.
        let choi = choi_unnormalized(d, &l);
        let mut v = CMatrix::zeros(n, n);
        for (a, g) in basis.elements().iter().enumerate() {
            for r in 0..d {
                for s in 0..d {
                    v[(r * d + s, a)] = g[(r, s)];
                }
            }
        }
        let coef = v.adjoint() * choi * &v;
        let defect = hermitian_defect(&coef);
        if !(defect <= herm_tol) {
            return Err(Error::NotHermitian { defect });
        }
        let coef = (&coef + coef.adjoint()).scale(0.5);
        let decoherence = coef.view((1, 1), (n - 1, n - 1)).into_owned().scale(0.5);
        let sqrt_d = (d as f64).sqrt();
        let mut k = CMatrix::zeros(d, d);
        for j in 1..n {
            k += basis.get(j) * (coef[(j, 0)] / sqrt_d);
        }
        let hamiltonian = (&k - k.adjoint()) * c(0.0, 0.5);
        Ok(Self { t, dim: d, hamiltonian, decoherence, superop: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    /// Decoherence matrix in standard Gell-Mann coordinates.
    pub fn decoherence(&self) -> &CMatrix {
        &self.decoherence
    }

    /// Transfer-matrix form of the generator.
    pub fn superoperator(&self) -> &RMatrix {
        &self.superop
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        TransferMatrix::from_raw(self.dim, self.superop.clone()).apply(x)
    }

    /// `L[I]`; nonzero exactly when the generated dynamics is non-unital.
    pub fn image_of_identity(&self) -> CMatrix {
        self.apply(&identity(self.dim))
    }

    /// Rebuilds the superoperator from `(H, d)` alone.
    pub fn reconstruct(&self) -> Result<RMatrix> {
        let basis = gell_mann_basis(self.dim)?;
        let n = basis.len();
        let lambdas: Vec<CMatrix> = (1..n).map(|j| basis.gell_mann_unnormalized(j)).collect();
        let dm = &self.decoherence;
        let h = &self.hamiltonian;
        superoperator_matrix(self.dim, |x| {
            let mut out = (h * x - x * h) * c(0.0, -1.0);
            for j in 0..n - 1 {
                for k in 0..n - 1 {
                    let w = dm[(j, k)];
                    if w == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let kj = &lambdas[k] * &lambdas[j];
                    out += (&lambdas[j] * x * &lambdas[k] - (&kj * x + x * &kj).scale(0.5)) * w;
                }
            }
            out
        })
    }
}

/// Canonical decay rates (ascending) and their jump operators. Each jump
/// operator is a unit vector of Gell-Mann coordinates, so `Tr(A^dagger A) = 2`
/// and `L = -i[H, .] + sum_j rate_j D[A_j]`.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalRates {
    pub t: f64,
    pub rates: Vec<f64>,
    #[serde(skip)]
    pub jump_ops: Vec<CMatrix>,
}

impl CanonicalRates {
    /// Rates for jump operators normalized to `Tr(A^dagger A) = 1`.
    pub fn orthonormal(&self) -> Vec<f64> {
        self.rates.iter().map(|r| 2.0 * r).collect()
    }

    pub fn min(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Rates ordered to follow `references`: each reference operator is
    /// greedily paired with the jump operator it overlaps most. Unpaired
    /// rates follow in ascending order.
    pub fn labeled(&self, references: &[CMatrix]) -> Vec<f64> {
        let mut pairs = Vec::new();
        for (r, refop) in references.iter().enumerate() {
            let rn = hs_inner(&refop.adjoint(), refop).re;
            for (j, a) in self.jump_ops.iter().enumerate() {
                let an = hs_inner(&a.adjoint(), a).re;
                let overlap = hs_inner(&a.adjoint(), refop).norm_sqr() / (rn * an);
                pairs.push((overlap, r, j));
            }
        }
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut by_ref = vec![None; references.len()];
        let mut used = vec![false; self.rates.len()];
        for (_, r, j) in pairs {
            if by_ref[r].is_none() && !used[j] {
                by_ref[r] = Some(j);
                used[j] = true;
            }
        }
        let mut out: Vec<f64> = by_ref.iter().flatten().map(|&j| self.rates[j]).collect();
        out.extend((0..self.rates.len()).filter(|j| !used[*j]).map(|j| self.rates[j]));
        out
    }

    /// Superoperator `sum_j rate_j D[A_j]` plus the Hamiltonian part of `snapshot`.
    pub fn reconstruct(&self, snapshot: &GeneratorSnapshot) -> Result<RMatrix> {
        let terms: Vec<JumpTerm> = self
            .rates
            .iter()
            .zip(&self.jump_ops)
            .map(|(r, a)| JumpTerm::new(*r, a.clone()))
            .collect();
        superoperator_matrix(snapshot.dim, |x| {
            apply_terms(Some(snapshot.hamiltonian()), &terms, x)
        })
    }
}

/// Eigen-decomposition of the decoherence matrix.
pub fn canonical_rates(snapshot: &GeneratorSnapshot, tol: &Tolerances) -> Result<CanonicalRates> {
    let eig = herm_eig_tol(snapshot.decoherence(), tol.generator_hermiticity)?;
    let basis = gell_mann_basis(snapshot.dim)?;
    let n = basis.len();
    let jump_ops = (0..n - 1)
        .map(|a| {
            let mut op = CMatrix::zeros(snapshot.dim, snapshot.dim);
            for j in 0..n - 1 {
                op += basis.gell_mann_unnormalized(j + 1) * eig.vectors[(j, a)];
            }
            op
        })
        .collect();
    Ok(CanonicalRates { t: snapshot.t, rates: eig.values, jump_ops })
}

/// `F(t)` and its time derivative estimated by finite differences.
#[derive(Debug, Clone)]
pub struct TrajectoryDerivative {
    pub t: f64,
    pub f: TransferMatrix,
    pub fdot: RMatrix,
}

fn difference<T: Trajectory + ?Sized>(traj: &T, t: f64, f_t: &RMatrix, h: f64) -> Result<RMatrix> {
    if t >= h {
        let plus = traj.transfer_at(t + h)?.into_matrix();
        let minus = traj.transfer_at(t - h)?.into_matrix();
        Ok((plus - minus) / (2.0 * h))
    } else {
        // one-sided, second order; the channel is undefined for t < 0
        let p1 = traj.transfer_at(t + h)?.into_matrix();
        let p2 = traj.transfer_at(t + 2.0 * h)?.into_matrix();
        Ok((p1 * 4.0 - f_t * 3.0 - p2) / (2.0 * h))
    }
}

/// Derivative of the trajectory at `t` with an `h` vs `h/2` agreement check.
pub fn differentiate<T: Trajectory + ?Sized>(
    traj: &T,
    t: f64,
    h: f64,
    tol: &Tolerances,
) -> Result<TrajectoryDerivative> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    let f = traj.transfer_at(t)?;
    let coarse = difference(traj, t, f.matrix(), h)?;
    let fine = difference(traj, t, f.matrix(), 0.5 * h)?;
    let scale = max_abs_real(&fine).max(1.0);
    let relative = max_abs_real(&(&coarse - &fine)) / scale;
    if relative > tol.step_check {
        return Err(Error::StepTooCoarse { relative });
    }
    // Richardson combination of the two second-order estimates
    let fdot = (fine * 4.0 - coarse) / 3.0;
    Ok(TrajectoryDerivative { t, f, fdot })
}

impl TrajectoryDerivative {
    /// `L = F' F^{-1}` decomposed into Hamiltonian and decoherence parts.
    pub fn generator(&self, tol: &Tolerances) -> Result<GeneratorSnapshot> {
        let (inv, _) = self.f.inverse(tol.max_condition)?;
        let l = &self.fdot * inv.matrix();
        GeneratorSnapshot::from_superoperator(self.t, self.f.dim(), l, tol.generator_hermiticity)
    }

    /// `D = M' M^{-1}` and `mu = tau' - D tau`.
    pub fn damping_form(&self, tol: &Tolerances) -> Result<DampingForm> {
        let n = self.f.dim() * self.f.dim();
        let aff = self.f.affine();
        let mdot = self.fdot.view((1, 1), (n - 1, n - 1)).into_owned();
        let taudot: DVector<f64> = self.fdot.view((1, 0), (n - 1, 1)).column(0).into_owned();
        let condition = condition_number(&aff.m);
        if !(condition <= tol.max_condition) {
            return Err(Error::SingularIntermediate { condition });
        }
        let m_inv = aff
            .m
            .try_inverse()
            .ok_or(Error::SingularIntermediate { condition: f64::INFINITY })?;
        let damping = mdot * m_inv;
        let drift = taudot - &damping * &aff.tau;
        Ok(DampingForm { t: self.t, damping, drift })
    }
}

/// Generator of the trajectory at `t`, via `F'(t) F(t)^{-1}`.
pub fn generator_from_trajectory<T: Trajectory + ?Sized>(
    traj: &T,
    t: f64,
    h: f64,
    tol: &Tolerances,
) -> Result<GeneratorSnapshot> {
    differentiate(traj, t, h, tol)?.generator(tol)
}

/// Bloch-vector equation of motion `r' = D r + mu`.
#[derive(Debug, Clone)]
pub struct DampingForm {
    pub t: f64,
    pub damping: RMatrix,
    pub drift: DVector<f64>,
}

pub fn damping_form<T: Trajectory + ?Sized>(
    traj: &T,
    t: f64,
    h: f64,
    tol: &Tolerances,
) -> Result<DampingForm> {
    differentiate(traj, t, h, tol)?.damping_form(tol)
}

/// Canonical rates `(gamma_1, gamma_2)` of the qubit generalized amplitude
/// damping channel with time-dependent mixing `p` and damping `lambda`:
///
/// ```text
/// gamma_1 = lambda p' + lambda' p / (1 - lambda)
/// gamma_2 = lambda q' + lambda' q / (1 - lambda),   q = 1 - p
/// ```
///
/// `gamma_1` multiplies the jump `|1><0|` (relaxation toward `|1>`, weight
/// `p`), `gamma_2` the jump `|0><1|`; both refer to unit-norm jump operators.
pub fn rates_qubit_gad(p: &ParamCurve, lambda: &ParamCurve, t: f64) -> Result<(f64, f64)> {
    let lam = lambda.value(t)?;
    let one_minus = lambda.complement(t)?;
    if one_minus <= 1e-12 {
        return Err(Error::DampingSaturated { lambda: lam });
    }
    let lam_dot = lambda.derivative(t)?;
    let pv = p.value(t)?;
    let p_dot = p.derivative(t)?;
    let g1 = lam * p_dot + lam_dot * pv / one_minus;
    let g2 = -lam * p_dot + lam_dot * (1.0 - pv) / one_minus;
    Ok((g1, g2))
}

type GeneratorFn = dyn Fn(f64) -> Result<GeneratorSnapshot> + Send + Sync;

/// Time-ordered exponential of a generator, sampled on a uniform grid and
/// evaluable anywhere in `[0, t_max]`.
#[derive(Clone)]
pub struct IntegratedTrajectory {
    dim: usize,
    dt: f64,
    t_max: f64,
    checkpoints: Vec<RMatrix>,
    generator: Arc<GeneratorFn>,
    /// Endpoint change between `steps` and `2 steps` integrations.
    pub doubling_error: f64,
}

impl std::fmt::Debug for IntegratedTrajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegratedTrajectory")
            .field("dim", &self.dim)
            .field("dt", &self.dt)
            .field("t_max", &self.t_max)
            .field("doubling_error", &self.doubling_error)
            .finish()
    }
}

/// One fourth-order Magnus step over `[t, t + h]`.
fn magnus_step(generator: &GeneratorFn, t: f64, h: f64) -> Result<RMatrix> {
    let offset = 3f64.sqrt() / 6.0;
    let a1 = generator(t + (0.5 - offset) * h)?.superop;
    let a2 = generator(t + (0.5 + offset) * h)?.superop;
    let comm = &a2 * &a1 - &a1 * &a2;
    let omega = (&a1 + &a2) * (0.5 * h) + comm * (3f64.sqrt() / 12.0 * h * h);
    Ok(omega.exp())
}

fn propagate(generator: &GeneratorFn, d: usize, t_max: f64, steps: usize) -> Result<Vec<RMatrix>> {
    let n = d * d;
    let dt = t_max / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut f = RMatrix::identity(n, n);
    out.push(f.clone());
    for k in 0..steps {
        f = magnus_step(generator, k as f64 * dt, dt)? * f;
        if !f.iter().all(|x| x.is_finite()) {
            return Err(Error::NotConverged(format!("non-finite map at t = {}", (k + 1) as f64 * dt)));
        }
        out.push(f.clone());
    }
    Ok(out)
}

/// Integrates `F' = L(t) F`, `F(0) = I`, on `[0, t_max]` with `steps`
/// fourth-order Magnus steps, and checks that doubling the step count moves
/// the endpoint by less than `tol.integrator`.
pub fn integrate_generator<G>(
    dim: usize,
    generator: G,
    t_max: f64,
    steps: usize,
    tol: &Tolerances,
) -> Result<IntegratedTrajectory>
where
    G: Fn(f64) -> Result<GeneratorSnapshot> + Send + Sync + 'static,
{
    if steps < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 steps, got {steps}")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad integration horizon {t_max}")));
    }
    let generator: Arc<GeneratorFn> = Arc::new(generator);
    let coarse = propagate(&*generator, dim, t_max, steps)?;
    let fine = propagate(&*generator, dim, t_max, 2 * steps)?;
    let doubling_error = max_abs_real(&(&coarse[steps] - &fine[2 * steps]));
    if !(doubling_error < tol.integrator) {
        return Err(Error::NotConverged(format!(
            "step doubling changed the endpoint by {doubling_error:e}"
        )));
    }
    Ok(IntegratedTrajectory {
        dim,
        dt: t_max / (2 * steps) as f64,
        t_max,
        checkpoints: fine,
        generator,
        doubling_error,
    })
}

impl IntegratedTrajectory {
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn generator_at(&self, t: f64) -> Result<GeneratorSnapshot> {
        (self.generator)(t)
    }
}

impl Trajectory for IntegratedTrajectory {
    fn dim(&self) -> usize {
        self.dim
    }

    /// Continues from the nearest earlier checkpoint with one Magnus step.
    /// Times up to one grid step past `t_max` are accepted.
    fn transfer_at(&self, t: f64) -> Result<TransferMatrix> {
        if !(t >= 0.0 && t <= self.t_max + self.dt) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside integrated range [0, {}]",
                self.t_max
            )));
        }
        let last = self.checkpoints.len() - 1;
        let k = ((t / self.dt).floor() as usize).min(last);
        let tk = k as f64 * self.dt;
        let delta = t - tk;
        let mat = if delta <= 0.0 {
            self.checkpoints[k].clone()
        } else {
            magnus_step(&*self.generator, tk, delta)? * &self.checkpoints[k]
        };
        Ok(TransferMatrix::from_raw(self.dim, mat))
    }
}

/// Maximum entry of `|A - B|` for two superoperators.
pub fn superoperator_distance(a: &RMatrix, b: &RMatrix) -> f64 {
    max_abs_real(&(a - b))
}

/// `max |L[I]|`.
pub fn nonunitality(snapshot: &GeneratorSnapshot) -> f64 {
    max_abs(&snapshot.image_of_identity())
}
