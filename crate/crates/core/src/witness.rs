//! Divisibility diagnostics along a trajectory: Choi spectra of intermediate
//! maps, trace-distance derivatives with and without an ancilla, damping
//! matrix criteria, integrated rate negativity and onset detection.

use std::cell::Cell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::canon::{canonical_rates, differentiate, DampingForm};
use crate::error::{Error, Result};
use crate::linalg::{
    eigvalsh, gell_mann_basis, identity, kron, symmetric_eigenvalues, trace_norm,
    CMatrix, RMatrix,
};
use crate::numeric::{bisect, integrate, Quadrature};
use crate::repr::{intermediate_map, unital_nonunital_split, TransferMatrix, Trajectory};
use crate::state::{fibonacci_sphere, random_mixed, random_pure, DensityMatrix};
use crate::tolerance::Tolerances;

/// Pairs of states whose trace distance is tracked in time.
#[derive(Debug, Clone)]
pub struct StatePairEnsemble {
    pub pairs: Vec<(DensityMatrix, DensityMatrix)>,
    pub policy: String,
}

impl StatePairEnsemble {
    pub fn new(pairs: Vec<(DensityMatrix, DensityMatrix)>, policy: impl Into<String>) -> Result<Self> {
        let dim = pairs.first().map(|p| p.0.dim());
        if pairs.iter().any(|(a, b)| Some(a.dim()) != dim || Some(b.dim()) != dim) {
            return Err(Error::DimensionMismatch("ensemble states of different dimensions".into()));
        }
        Ok(Self { pairs, policy: policy.into() })
    }

    pub fn dim(&self) -> Option<usize> {
        self.pairs.first().map(|p| p.0.dim())
    }

    /// Qubits: 200 antipodal pure pairs on a Fibonacci lattice and 100 random
    /// mixed pairs. Other dimensions: 200 random pure pairs, 100 random mixed
    /// pairs and all pairs of distinct basis states.
    pub fn standard(d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::with_capacity(300);
        if d == 2 {
            for r in fibonacci_sphere(200) {
                pairs.push((DensityMatrix::from_bloch(r)?, DensityMatrix::from_bloch(r.map(|x| -x))?));
            }
        } else {
            for _ in 0..200 {
                pairs.push((random_pure(&mut rng, d), random_pure(&mut rng, d)));
            }
            for i in 0..d {
                for j in i + 1..d {
                    let e = |k: usize| {
                        let mut v = vec![0.0; d];
                        v[k] = 1.0;
                        DensityMatrix::diagonal(&v)
                    };
                    pairs.push((e(i)?, e(j)?));
                }
            }
        }
        for _ in 0..100 {
            pairs.push((random_mixed(&mut rng, d), random_mixed(&mut rng, d)));
        }
        let policy = if d == 2 {
            format!("fibonacci-antipodal-200+mixed-100 seed={seed}")
        } else {
            format!("pure-200+basis+mixed-100 seed={seed}")
        };
        Self::new(pairs, policy)
    }

    /// Random pure and mixed pairs on `ancilla (x) system`, plus the pair
    /// `(I/a (x) rho, I/a (x) fixed)` for each supplied system state.
    pub fn with_ancilla(
        d: usize,
        ancilla: usize,
        count: usize,
        anchors: &[(DensityMatrix, DensityMatrix)],
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = d * ancilla;
        let mut pairs = Vec::with_capacity(count + anchors.len());
        let flat = identity(ancilla).scale(1.0 / ancilla as f64);
        for (rho, fixed) in anchors {
            pairs.push((
                DensityMatrix::new(kron(&flat, rho.matrix()))?,
                DensityMatrix::new(kron(&flat, fixed.matrix()))?,
            ));
        }
        for _ in 0..count {
            pairs.push((random_pure(&mut rng, n), random_pure(&mut rng, n)));
        }
        Self::new(pairs, format!("ancilla-{ancilla} pure-{count}+anchors-{} seed={seed}", anchors.len()))
    }
}

/// Diagnostics at one grid time. Missing values mark points where the
/// corresponding computation failed; the reasons are in `errors`.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessRecord {
    pub t: f64,
    pub rates: Vec<f64>,
    pub choi_min_eig: Option<f64>,
    /// Same with half the intermediate-map step.
    pub choi_min_eig_half: Option<f64>,
    pub cp_threshold: f64,
    pub td_derivative_max: Option<f64>,
    pub trace_d: Option<f64>,
    pub hmax_ddt: Option<f64>,
    pub errors: Vec<String>,
}

impl WitnessRecord {
    /// Intermediate map over `[t, t + eps]` is not CP.
    pub fn cp_violation(&self) -> bool {
        self.choi_min_eig.is_some_and(|m| m < -self.cp_threshold)
    }

    /// The CP verdict is unchanged when the step is halved.
    pub fn sign_stable(&self) -> bool {
        match (self.choi_min_eig, self.choi_min_eig_half) {
            (Some(a), Some(b)) => (a < -self.cp_threshold) == (b < -0.5 * self.cp_threshold),
            _ => false,
        }
    }

    pub fn p_violation(&self, tol: &Tolerances) -> bool {
        self.td_derivative_max.is_some_and(|d| d > tol.p)
    }

    pub fn min_rate(&self) -> Option<f64> {
        self.rates.iter().copied().reduce(f64::min)
    }

    pub fn is_complete(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesMetadata {
    pub spec_hash: Option<String>,
    pub tolerances: Tolerances,
    pub epsilon: f64,
    pub p_step: f64,
    pub ensemble: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessSeries {
    pub grid: Vec<f64>,
    pub records: Vec<WitnessRecord>,
    pub metadata: SeriesMetadata,
}

impl WitnessSeries {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_complete()).count()
    }

    pub fn cp_flags(&self) -> Vec<bool> {
        self.records.iter().map(WitnessRecord::cp_violation).collect()
    }
}

/// Step sizes and tolerances of a scan.
#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub tolerances: Tolerances,
    /// Intermediate-map step; `tolerances.intermediate_eps` when `None`.
    pub epsilon: Option<f64>,
    /// Trace-distance derivative step; `min(1e-5, spacing / 10)` when `None`.
    pub p_step: Option<f64>,
    /// Jump operators labeling the rate columns; ascending rates when empty.
    pub references: Vec<CMatrix>,
    pub spec_hash: Option<String>,
}

impl ScanOptions {
    pub fn new(tolerances: Tolerances) -> Self {
        Self { tolerances, epsilon: None, p_step: None, references: Vec::new(), spec_hash: None }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] >= 0.0) {
        return Err(Error::InvalidArgument("grid must be nonnegative and strictly increasing".into()));
    }
    Ok(())
}

fn min_spacing(grid: &[f64]) -> f64 {
    grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Default trace-distance derivative step for a grid.
pub fn default_p_step(grid: &[f64]) -> f64 {
    (min_spacing(grid) / 10.0).min(1e-5)
}

/// Minimum Choi eigenvalue of the intermediate map over `[t, t + eps]`,
/// with the condition number of `F(t)`.
pub fn intermediate_choi_min<T: Trajectory + ?Sized>(
    traj: &T,
    t: f64,
    eps: f64,
    tol: &Tolerances,
) -> Result<(f64, f64)> {
    let f_t = traj.transfer_at(t)?;
    let f_next = traj.transfer_at(t + eps)?;
    let inter = intermediate_map(&f_next, &f_t, tol.max_condition)?;
    Ok((inter.map.to_choi().min_eigenvalue()?, inter.condition))
}

/// Per-time CP diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CpPoint {
    pub t: f64,
    pub min_eig: f64,
    pub min_eig_half: f64,
    pub threshold: f64,
}

impl CpPoint {
    pub fn violation(&self) -> bool {
        self.min_eig < -self.threshold
    }
}

/// Choi spectrum of `F(t + eps) F(t)^{-1}` across the grid. Points where
/// `F(t)` is numerically singular are returned as errors and do not stop
/// the scan.
pub fn cp_divisibility_scan<T: Trajectory + ?Sized>(
    traj: &T,
    grid: &[f64],
    eps: f64,
    tol: &Tolerances,
) -> Result<Vec<Result<CpPoint>>> {
    check_grid(grid)?;
    if !(1e-6..=1e-2).contains(&eps) {
        return Err(Error::InvalidArgument(format!("intermediate step {eps} outside [1e-6, 1e-2]")));
    }
    Ok(grid
        .par_iter()
        .map(|&t| {
            let (min_eig, condition) = intermediate_choi_min(traj, t, eps, tol)?;
            let (min_eig_half, _) = intermediate_choi_min(traj, t, 0.5 * eps, tol)?;
            Ok(CpPoint { t, min_eig, min_eig_half, threshold: tol.cp_threshold(eps, condition) })
        })
        .collect())
}

fn td_derivative(
    f_minus: &TransferMatrix,
    f_plus: &TransferMatrix,
    span: f64,
    ensemble: &StatePairEnsemble,
    ancilla: usize,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for (a, b) in &ensemble.pairs {
        let diff = a.matrix() - b.matrix();
        let (lo, hi) = if ancilla == 1 {
            (f_minus.apply(&diff), f_plus.apply(&diff))
        } else {
            (f_minus.apply_with_ancilla(&diff, ancilla)?, f_plus.apply_with_ancilla(&diff, ancilla)?)
        };
        let rate = (hermitian_trace_norm(&hi)? - hermitian_trace_norm(&lo)?) / span;
        best = best.max(rate);
    }
    Ok(best)
}

fn hermitian_trace_norm(x: &CMatrix) -> Result<f64> {
    let sym = (x + x.adjoint()).scale(0.5);
    Ok(eigvalsh(&sym)?.iter().map(|v| v.abs()).sum())
}

/// Points bracketing `t` for a derivative: central, or forward when `t < h`.
fn stencil(t: f64, h: f64) -> (f64, f64) {
    if t >= h {
        (t - h, t + h)
    } else {
        (t, t + h)
    }
}

/// Largest `d/dt ||E(t)[rho_1 - rho_2]||_1` over the ensemble at each grid time.
pub fn p_divisibility_scan<T: Trajectory + ?Sized>(
    traj: &T,
    ensemble: &StatePairEnsemble,
    grid: &[f64],
    h: f64,
) -> Result<Vec<Result<f64>>> {
    scan_trace_distance(traj, ensemble, grid, h, 1)
}

fn scan_trace_distance<T: Trajectory + ?Sized>(
    traj: &T,
    ensemble: &StatePairEnsemble,
    grid: &[f64],
    h: f64,
    ancilla: usize,
) -> Result<Vec<Result<f64>>> {
    check_grid(grid)?;
    if grid.len() > 1 && h > min_spacing(grid) / 10.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("derivative step {h} exceeds a tenth of the grid spacing")));
    }
    if ensemble.dim() != Some(traj.dim() * ancilla) {
        return Err(Error::DimensionMismatch(format!(
            "ensemble dimension {:?} for system {} with ancilla {ancilla}",
            ensemble.dim(),
            traj.dim()
        )));
    }
    Ok(grid
        .par_iter()
        .map(|&t| {
            let (a, b) = stencil(t, h);
            let fa = traj.transfer_at(a)?;
            let fb = traj.transfer_at(b)?;
            td_derivative(&fa, &fb, b - a, ensemble, ancilla)
        })
        .collect())
}

/// Trace-distance scan of `I_a (x) E(t)` for an ancilla of dimension `a`.
pub fn ancilla_p_scan<T: Trajectory + ?Sized>(
    traj: &T,
    ensemble: &StatePairEnsemble,
    ancilla: usize,
    grid: &[f64],
    h: f64,
) -> Result<Vec<Result<f64>>> {
    scan_trace_distance(traj, ensemble, grid, h, ancilla)
}

/// A state pair on `C^(d+1) (x) C^d` whose trace distance grows right after
/// `t` whenever the dynamics is not CP-divisible there: the preimages under
/// `I (x) E(t)` of `(1 - delta) I/n + delta P_omega` and
/// `(1 - delta) I/n + delta |d><d| (x) I/d`, with `omega` maximally entangled
/// on the first `d` ancilla levels. `delta` is halved until both preimages
/// are states; `None` if that fails down to `2^-30`.
pub fn witness_pair<T: Trajectory + ?Sized>(
    traj: &T,
    t: f64,
    tol: &Tolerances,
) -> Result<Option<(DensityMatrix, DensityMatrix)>> {
    let d = traj.dim();
    let a = d + 1;
    let n = a * d;
    let mut omega = CMatrix::zeros(n, 1);
    for k in 0..d {
        omega[(k * d + k, 0)] = crate::linalg::c(1.0 / (d as f64).sqrt(), 0.0);
    }
    let proj = &omega * omega.adjoint();
    let mut spare = CMatrix::zeros(a, a);
    spare[(d, d)] = crate::linalg::c(1.0, 0.0);
    let other = kron(&spare, &identity(d).scale(1.0 / d as f64));
    let (inv, _) = traj.transfer_at(t)?.inverse(tol.max_condition)?;
    let flat = identity(n).scale(1.0 / n as f64);
    let mut delta = 0.5;
    while delta >= 2f64.powi(-30) {
        let s1 = flat.scale(1.0 - delta) + proj.scale(delta);
        let s2 = flat.scale(1.0 - delta) + other.scale(delta);
        let r1 = inv.apply_with_ancilla(&s1, a)?;
        let r2 = inv.apply_with_ancilla(&s2, a)?;
        if let (Ok(x), Ok(y)) = (DensityMatrix::new(r1), DensityMatrix::new(r2)) {
            return Ok(Some((x, y)));
        }
        delta *= 0.5;
    }
    Ok(None)
}

/// Forward-difference growth rate of `||(I (x) E)(rho_1 - rho_2)||_1` at `t`
/// for the [`witness_pair`] built at `t`. The trace distance of that pair has
/// a kink at `t`, so only the one-sided derivative is meaningful.
pub fn witness_pair_rate<T: Trajectory + ?Sized>(
    traj: &T,
    t: f64,
    h: f64,
    tol: &Tolerances,
) -> Result<Option<f64>> {
    let Some((r1, r2)) = witness_pair(traj, t, tol)? else {
        return Ok(None);
    };
    let ens = StatePairEnsemble::new(vec![(r1, r2)], "witness")?;
    let f0 = traj.transfer_at(t)?;
    let f1 = traj.transfer_at(t + h)?;
    td_derivative(&f0, &f1, h, &ens, traj.dim() + 1).map(Some)
}

/// `(Tr D, largest eigenvalue of D + D^T)`.
pub fn damping_criteria(form: &DampingForm) -> (f64, f64) {
    let sym = &form.damping + form.damping.transpose();
    let hmax = symmetric_eigenvalues(&sym).into_iter().fold(f64::NEG_INFINITY, f64::max);
    (form.damping.trace(), hmax)
}

/// Rates `(g_x, g_y, g_z)` of the unital qubit generator whose damping
/// matrix has symmetric part `D_sym`: eigenvalues of `D_sym / 2 - Tr(D) / 4`.
pub fn unital_rates_qubit(damping: &RMatrix) -> Result<Vec<f64>> {
    if damping.nrows() != 3 || damping.ncols() != 3 {
        return Err(Error::DimensionMismatch("qubit damping matrix must be 3x3".into()));
    }
    let sym = (damping + damping.transpose()) * 0.5;
    let k = &sym * 0.5 - RMatrix::identity(3, 3) * (damping.trace() / 4.0);
    Ok(symmetric_eigenvalues(&k))
}

/// Outcome of the purely non-unital probe on `[s, t]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NonUnitalProbe {
    /// Unital block of the intermediate map has singular values `<= 1`.
    pub contractive: bool,
    /// Unital rates at `s` are nonnegative.
    pub unital_rates_nonnegative: bool,
    pub choi_min_eig: f64,
    pub cp_threshold: f64,
}

impl NonUnitalProbe {
    /// The hypothesis holds but the intermediate map is not CP.
    pub fn counterexample(&self) -> bool {
        self.contractive && self.unital_rates_nonnegative && self.choi_min_eig < -self.cp_threshold
    }
}

pub fn purely_nonunital_probe<T: Trajectory + ?Sized>(
    traj: &T,
    s: f64,
    t: f64,
    tol: &Tolerances,
) -> Result<NonUnitalProbe> {
    if traj.dim() != 2 {
        return Err(Error::BadDimension(traj.dim()));
    }
    let f_s = traj.transfer_at(s)?;
    let f_t = traj.transfer_at(t)?;
    let split = unital_nonunital_split(&f_t, &f_s, tol.max_condition)?;
    let contractive = split.m.singular_values().iter().all(|&x| x <= 1.0 + tol.structural);
    let form = differentiate(traj, s, tol.fd_step, tol)?.damping_form(tol)?;
    let rates = unital_rates_qubit(&form.damping)?;
    let inter = intermediate_map(&f_t, &f_s, tol.max_condition)?;
    Ok(NonUnitalProbe {
        contractive,
        unital_rates_nonnegative: rates.iter().all(|&r| r >= -tol.rate),
        choi_min_eig: inter.map.to_choi().min_eigenvalue()?,
        cp_threshold: tol.cp_threshold(t - s, inter.condition),
    })
}

/// `-int_0^T sum_j min(gamma_j(t), 0) dt` by adaptive quadrature.
pub fn hcla_measure<F>(rates: F, t_max: f64, tol: &Tolerances) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let failure: Cell<Option<Error>> = Cell::new(None);
    let integrand = |t: f64| match rates(t) {
        Ok(r) => -r.iter().map(|g| g.min(0.0)).sum::<f64>(),
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let q = integrate(integrand, 0.0, t_max, 1e-13, tol.quadrature * 1e-3)?;
    match failure.take() {
        Some(e) => Err(e),
        None => Ok(q),
    }
}

/// Earliest time with a CP violation. When the first flagged grid point has
/// an unflagged predecessor, the crossing is refined by bisection on
/// `min_rate` (which must change sign there) to `1e-10`. `None` if nothing
/// is flagged.
pub fn onset_detector<F>(series: &WitnessSeries, min_rate: F, tol: &Tolerances) -> Option<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let idx = series.records.iter().position(WitnessRecord::cp_violation)?;
    let t_hi = series.records[idx].t;
    if idx == 0 {
        return Some(t_hi);
    }
    let t_lo = series.records[idx - 1].t;
    let mut f = min_rate;
    let mut shifted = |t: f64| f(t).map(|r| r + tol.rate);
    match bisect(&mut shifted, t_lo, t_hi, 1e-10) {
        Ok(t) => Some(t),
        Err(_) => Some(t_hi),
    }
}

/// `(||E(rho)[h] - F||_1 - ||rho - F||_1) / h`, the one-sided rate of
/// approach to the fixed point at `t = 0`.
pub fn fixed_point_approach_rate<T: Trajectory + ?Sized>(
    traj: &T,
    rho: &DensityMatrix,
    fixed: &DensityMatrix,
    h: f64,
) -> Result<f64> {
    let d0 = trace_norm(&(rho.matrix() - fixed.matrix()))?;
    let image = traj.transfer_at(h)?.apply(rho.matrix());
    let dh = trace_norm(&(image - fixed.matrix()))?;
    Ok((dh - d0) / h)
}

/// `||E(rho)[t] - F||_1` on a grid.
pub fn distance_to_fixed_point<T: Trajectory + ?Sized>(
    traj: &T,
    rho: &DensityMatrix,
    fixed: &DensityMatrix,
    grid: &[f64],
) -> Result<Vec<f64>> {
    grid.iter()
        .map(|&t| trace_norm(&(traj.transfer_at(t)?.apply(rho.matrix()) - fixed.matrix())))
        .collect()
}

/// Full diagnostic pass: labeled canonical rates, CP and trace-distance
/// verdicts, and damping criteria at every grid time.
pub fn scan<T: Trajectory + ?Sized>(
    traj: &T,
    ensemble: &StatePairEnsemble,
    grid: &[f64],
    opts: &ScanOptions,
) -> Result<WitnessSeries> {
    check_grid(grid)?;
    let tol = &opts.tolerances;
    let eps = opts.epsilon.unwrap_or(tol.intermediate_eps);
    if !(1e-6..=1e-2).contains(&eps) {
        return Err(Error::InvalidArgument(format!("intermediate step {eps} outside [1e-6, 1e-2]")));
    }
    let h = opts.p_step.unwrap_or_else(|| default_p_step(grid));
    if ensemble.dim() != Some(traj.dim()) {
        return Err(Error::DimensionMismatch("ensemble does not match the channel dimension".into()));
    }
    gell_mann_basis(traj.dim())?;
    let records = grid
        .par_iter()
        .map(|&t| {
            let mut errors = Vec::new();
            let mut note = |what: &str, e: Error| errors.push(format!("{what}: {e}"));
            let mut rates = Vec::new();
            let (mut trace_d, mut hmax_ddt) = (None, None);
            match differentiate(traj, t, tol.fd_step, tol) {
                Ok(der) => {
                    match der.generator(tol).and_then(|g| canonical_rates(&g, tol)) {
                        Ok(r) if opts.references.is_empty() => rates = r.rates,
                        Ok(r) => rates = r.labeled(&opts.references),
                        Err(e) => note("rates", e),
                    }
                    match der.damping_form(tol) {
                        Ok(form) => {
                            let (tr, hm) = damping_criteria(&form);
                            trace_d = Some(tr);
                            hmax_ddt = Some(hm);
                        }
                        Err(e) => note("damping", e),
                    }
                }
                Err(e) => note("derivative", e),
            }
            let (mut choi_min_eig, mut choi_min_eig_half, mut cp_threshold) = (None, None, f64::NAN);
            match intermediate_choi_min(traj, t, eps, tol) {
                Ok((m, cond)) => {
                    choi_min_eig = Some(m);
                    cp_threshold = tol.cp_threshold(eps, cond);
                    match intermediate_choi_min(traj, t, 0.5 * eps, tol) {
                        Ok((m2, _)) => choi_min_eig_half = Some(m2),
                        Err(e) => note("choi/2", e),
                    }
                }
                Err(e) => note("choi", e),
            }
            let (a, b) = stencil(t, h);
            let td = traj
                .transfer_at(a)
                .and_then(|fa| Ok((fa, traj.transfer_at(b)?)))
                .and_then(|(fa, fb)| td_derivative(&fa, &fb, b - a, ensemble, 1));
            let td_derivative_max = match td {
                Ok(v) => Some(v),
                Err(e) => {
                    note("trace distance", e);
                    None
                }
            };
            WitnessRecord {
                t,
                rates,
                choi_min_eig,
                choi_min_eig_half,
                cp_threshold,
                td_derivative_max,
                trace_d,
                hmax_ddt,
                errors,
            }
        })
        .collect();
    Ok(WitnessSeries {
        grid: grid.to_vec(),
        records,
        metadata: SeriesMetadata {
            spec_hash: opts.spec_hash.clone(),
            tolerances: *tol,
            epsilon: eps,
            p_step: h,
            ensemble: ensemble.policy.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::FnTrajectory;
    use approx::assert_abs_diff_eq;

    fn dephasing(gamma_integral: impl Fn(f64) -> f64 + Sync) -> impl Trajectory {
        FnTrajectory::new(2, move |t: f64| {
            let mut m = RMatrix::identity(4, 4);
            let k = (-2.0 * gamma_integral(t)).exp();
            m[(1, 1)] = k;
            m[(2, 2)] = k;
            TransferMatrix::new(2, m)
        })
    }

    #[test]
    fn synthetic_dephasing_revival_detected() {
        // rate +1 up to t = 1, -1 afterwards
        let traj = dephasing(|t| if t <= 1.0 { t } else { 2.0 - t });
        let ens = StatePairEnsemble::standard(2, 7).unwrap();
        let grid: Vec<f64> = (0..40).map(|k| 0.05 * k as f64 + 0.025).collect();
        let scan = p_divisibility_scan(&traj, &ens, &grid, 1e-5).unwrap();
        let tol = Tolerances::default();
        for (t, d) in grid.iter().zip(scan) {
            let d = d.unwrap();
            assert_eq!(d > tol.p, *t > 1.0, "t = {t}, derivative {d}");
        }
        let cp = cp_divisibility_scan(&traj, &grid, 1e-3, &tol).unwrap();
        for (t, p) in grid.iter().zip(cp) {
            let p = p.unwrap();
            assert_eq!(p.violation(), *t > 1.0, "t = {t}");
        }
    }

    #[test]
    fn identity_scans_are_flat() {
        let traj = FnTrajectory::new(2, |_| Ok(TransferMatrix::identity(2)));
        let grid = [0.0, 0.5, 1.0];
        let ens = StatePairEnsemble::standard(2, 1).unwrap();
        for d in p_divisibility_scan(&traj, &ens, &grid, 1e-5).unwrap() {
            assert_eq!(d.unwrap(), 0.0);
        }
        let anc = StatePairEnsemble::with_ancilla(2, 3, 20, &[], 1).unwrap();
        for d in ancilla_p_scan(&traj, &anc, 3, &grid, 1e-5).unwrap() {
            assert_eq!(d.unwrap(), 0.0);
        }
    }

    #[test]
    fn step_must_resolve_grid() {
        let traj = FnTrajectory::new(2, |_| Ok(TransferMatrix::identity(2)));
        let ens = StatePairEnsemble::standard(2, 1).unwrap();
        assert!(p_divisibility_scan(&traj, &ens, &[0.0, 5e-5], 1e-5).is_err());
        assert!(cp_divisibility_scan(&traj, &[0.0], 0.5, &Tolerances::default()).is_err());
    }

    #[test]
    fn unital_rates_of_pauli_damping() {
        let (g1, g2, g3) = (0.3, 0.5, -0.1);
        let d = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            -2.0 * (g2 + g3),
            -2.0 * (g1 + g3),
            -2.0 * (g1 + g2),
        ]));
        let r = unital_rates_qubit(&d).unwrap();
        assert_abs_diff_eq!(r[0], g3, epsilon = 1e-14);
        assert_abs_diff_eq!(r[1], g1, epsilon = 1e-14);
        assert_abs_diff_eq!(r[2], g2, epsilon = 1e-14);
    }

    #[test]
    fn hcla_of_tanh_rate() {
        let tol = Tolerances::default();
        let q = hcla_measure(|t| Ok(vec![0.5, 0.5, -0.5 * t.tanh()]), 3.0, &tol).unwrap();
        assert_abs_diff_eq!(q.value, 0.5 * 3f64.cosh().ln(), epsilon = 1e-10);
        let zero = hcla_measure(|_| Ok(vec![1.0]), 3.0, &tol).unwrap();
        assert_eq!(zero.value, 0.0);
    }
}
