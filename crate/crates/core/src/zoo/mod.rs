//! Channel families: generalized amplitude damping (qubit and qudit), the
//! eternally non-Markovian Pauli channel, the quasi-eternal GAD family, and
//! non-unital generators built by mixing unital and damping parts.

mod document;

pub use document::{Channel, ChannelSpec, Family, GridSpec};

use rand::Rng;

use crate::canon::{GeneratorSnapshot, JumpTerm};
use crate::curve::ParamCurve;
use crate::error::{Error, Result};
use crate::linalg::{c, direct_sum, identity, ket_bra, max_abs, pauli_x, pauli_y, pauli_z, CMatrix};
use crate::numeric::{integrate, Quadrature};
use crate::repr::KrausSet;
use crate::state::DensityMatrix;

const RANGE_SLACK: f64 = 1e-12;

fn unit_interval(name: &str, v: f64, t: f64) -> Result<f64> {
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
        return Err(Error::CurveOutOfRange(format!("{name}({t}) = {v} outside [0, 1]")));
    }
    Ok(v.clamp(0.0, 1.0))
}

fn real(d: usize, entries: &[(usize, usize, f64)]) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for &(i, j, v) in entries {
        m[(i, j)] = c(v, 0.0);
    }
    m
}

/// Time-dependent qubit GAD parameters.
#[derive(Debug, Clone)]
pub struct QubitGadParams {
    pub p: ParamCurve,
    pub lambda: ParamCurve,
}

impl QubitGadParams {
    /// Requires `lambda(0) = 0`; ranges are checked on evaluation.
    pub fn new(p: ParamCurve, lambda: ParamCurve) -> Result<Self> {
        let l0 = lambda.value(0.0)?;
        if l0.abs() > RANGE_SLACK {
            return Err(Error::BadParams(format!("lambda(0) = {l0}, the channel must start at the identity")));
        }
        Ok(Self { p, lambda })
    }
}

/// The four GAD Kraus operators at fixed `(lambda, p)`.
pub fn gad_kraus(lambda: f64, p: f64) -> Result<KrausSet> {
    let lambda = unit_interval("lambda", lambda, f64::NAN)?;
    let p = unit_interval("p", p, f64::NAN)?;
    let (a, b) = ((1.0 - p).sqrt(), p.sqrt());
    let (s, l) = ((1.0 - lambda).sqrt(), lambda.sqrt());
    KrausSet::new(vec![
        real(2, &[(0, 0, a), (1, 1, a * s)]),
        real(2, &[(0, 1, a * l)]),
        real(2, &[(0, 0, b * s), (1, 1, b)]),
        real(2, &[(1, 0, b * l)]),
    ])
}

pub fn qubit_gad(params: &QubitGadParams, t: f64) -> Result<KrausSet> {
    let lambda = unit_interval("lambda", params.lambda.value(t)?, t)?;
    let p = unit_interval("p", params.p.value(t)?, t)?;
    gad_kraus(lambda, p)
}

/// Qudit GAD: fixed populations of the fixed point and a damping curve.
#[derive(Debug, Clone)]
pub struct QuditGadParams {
    populations: Vec<f64>,
    pub lambda: ParamCurve,
}

impl QuditGadParams {
    pub fn new(populations: Vec<f64>, lambda: ParamCurve) -> Result<Self> {
        if populations.len() < 2 {
            return Err(Error::BadSimplex(format!("need at least 2 populations, got {}", populations.len())));
        }
        let sum: f64 = populations.iter().sum();
        if populations.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadSimplex(format!("populations {populations:?} (sum {sum})")));
        }
        let l0 = lambda.value(0.0)?;
        if l0.abs() > RANGE_SLACK {
            return Err(Error::BadParams(format!("lambda(0) = {l0}, the channel must start at the identity")));
        }
        Ok(Self { populations, lambda })
    }

    pub fn dim(&self) -> usize {
        self.populations.len()
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }
}

/// The `d^2` qudit GAD Kraus operators `sqrt(p_l) E_{l,j}` at fixed damping.
pub fn qudit_gad_kraus(populations: &[f64], lambda: f64) -> Result<KrausSet> {
    let lambda = unit_interval("lambda", lambda, f64::NAN)?;
    let d = populations.len();
    let s = (1.0 - lambda).sqrt();
    let mut ops = Vec::with_capacity(d * d);
    for (l, &pl) in populations.iter().enumerate() {
        let w = pl.sqrt();
        for j in 0..d {
            if j == l {
                let diag: Vec<_> = (0..d).map(|k| (k, k, if k == l { w } else { w * s })).collect();
                ops.push(real(d, &diag));
            } else {
                ops.push(real(d, &[(l, j, w * lambda.sqrt())]));
            }
        }
    }
    KrausSet::with_tolerance(ops, 1e-10)
}

pub fn qudit_gad(params: &QuditGadParams, t: f64) -> Result<KrausSet> {
    let lambda = unit_interval("lambda", params.lambda.value(t)?, t)?;
    qudit_gad_kraus(&params.populations, lambda)
}

/// The diagonal state left invariant by a damping channel.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub state: DensityMatrix,
}

/// `sum_l p_l |l><l|`, checked for invariance at ten times in `[0, 5]`.
pub fn gad_fixed_point(params: &QuditGadParams) -> Result<FixedPoint> {
    let state = DensityMatrix::diagonal(&params.populations)?;
    let horizon = params.lambda.t_max().min(5.0);
    for k in 0..10 {
        let t = horizon * k as f64 / 9.0;
        let image = qudit_gad(params, t)?.apply(state.matrix());
        let defect = max_abs(&(image - state.matrix()));
        if defect > 1e-9 {
            return Err(Error::InvalidState(format!("fixed point moved by {defect:e} at t = {t}")));
        }
    }
    Ok(FixedPoint { state })
}

/// Pauli-channel eigenvalues `(l_x, l_y, l_z)` of the eternally non-Markovian
/// channel with rates `(c/2, c/2, -(c/2) tanh t)`.
pub fn pauli_enm_eigenvalues(c: f64, t: f64) -> [f64; 3] {
    // l_i = exp(-2 (G_j + G_k)), G the integrated rates
    let gx = 0.5 * c * t;
    let gz = -0.5 * c * t.cosh().ln();
    let lxy = (-2.0 * (gx + gz)).exp();
    [lxy, lxy, (-4.0 * gx).exp()]
}

/// Weights `(w_I, w_x, w_y, w_z)` of a Pauli channel with eigenvalues `l`.
pub fn pauli_weights(l: [f64; 3]) -> [f64; 4] {
    let [a, b, z] = l;
    [
        (1.0 + a + b + z) / 4.0,
        (1.0 + a - b - z) / 4.0,
        (1.0 - a + b - z) / 4.0,
        (1.0 - a - b + z) / 4.0,
    ]
}

fn pauli_enm_weights(c: f64, t: f64) -> Result<[f64; 4]> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::BadRate(format!("c = {c} must be positive")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be nonnegative")));
    }
    let w = pauli_weights(pauli_enm_eigenvalues(c, t));
    if let Some(bad) = w.iter().find(|x| **x < -1e-12) {
        return Err(Error::BadRate(format!("rates with c = {c} give Pauli weight {bad} at t = {t}")));
    }
    Ok(w.map(|x| x.max(0.0)))
}

/// Kraus operators of the eternally non-Markovian Pauli channel, with the
/// weights fixed by integrating its rates. For `c = 1` the `sigma_z` weight
/// vanishes and `w_x = w_y = (1 - exp(-2t)) / 4`.
pub fn pauli_enm(c: f64, t: f64) -> Result<KrausSet> {
    let w = pauli_enm_weights(c, t)?;
    let paulis = [identity(2), pauli_x(), pauli_y(), pauli_z()];
    let ops = w
        .iter()
        .zip(paulis)
        .filter(|(wi, _)| **wi > 0.0)
        .map(|(wi, s)| s.scale(wi.sqrt()))
        .collect();
    KrausSet::new(ops)
}

/// Quasi-eternal GAD family `p(t) = exp(-m t) / n`, `lambda(t) = 1 - exp(-nu t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiEnmParams {
    pub m: f64,
    pub n: f64,
    pub nu: f64,
}

impl QuasiEnmParams {
    pub fn new(m: f64, n: f64, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && m > nu && m.is_finite()) {
            return Err(Error::BadParams(format!("need m > nu > 0, got m = {m}, nu = {nu}")));
        }
        if !(n >= 1.0 && n.is_finite()) {
            return Err(Error::BadParams(format!("need n >= 1, got {n}")));
        }
        Ok(Self { m, n, nu })
    }

    pub fn p_curve(&self) -> ParamCurve {
        ParamCurve::exp(1.0 / self.n, self.m)
    }

    pub fn lambda_curve(&self) -> ParamCurve {
        ParamCurve::saturating(1.0, self.nu)
    }

    pub fn gad_params(&self) -> QubitGadParams {
        QubitGadParams { p: self.p_curve(), lambda: self.lambda_curve() }
    }

    /// `gamma_1(t) = exp(-m t) (m (exp(-nu t) - 1) + nu) / n`
    pub fn gamma1(&self, t: f64) -> f64 {
        let Self { m, n, nu } = *self;
        (-m * t).exp() * (m * (-nu * t).exp_m1() + nu) / n
    }

    /// `gamma_2 = nu - gamma_1`
    pub fn gamma2(&self, t: f64) -> f64 {
        self.nu - self.gamma1(t)
    }
}

pub fn quasi_enm_gad(params: &QuasiEnmParams, t: f64) -> Result<KrausSet> {
    qubit_gad(&params.gad_params(), t)
}

/// Time after which `gamma_1` stays negative: `ln(m / (m - nu)) / nu`.
pub fn t_star(params: &QuasiEnmParams) -> Result<f64> {
    let QuasiEnmParams { m, nu, .. } = QuasiEnmParams::new(params.m, params.n, params.nu)?;
    Ok((m / (m - nu)).ln() / nu)
}

/// Closed form of `-int_{gamma_1 < 0} gamma_1 dt`:
/// `nu / ((nu + m) n) * (m / (m - nu))^(-(m + nu) / nu)`.
pub fn hcla_closed_form(params: &QuasiEnmParams) -> Result<f64> {
    let QuasiEnmParams { m, n, nu } = QuasiEnmParams::new(params.m, params.n, params.nu)?;
    Ok(nu / ((nu + m) * n) * (m / (m - nu)).powf(-(m + nu) / nu))
}

/// Cutoff beyond which `|gamma_1| <= (m + nu) exp(-m t) / n` integrates to below `tail`.
pub fn hcla_cutoff(params: &QuasiEnmParams, tail: f64) -> f64 {
    ((params.m + params.nu) / (params.n * params.m * tail)).ln() / params.m
}

/// Adaptive quadrature of `-gamma_1` over `[t*, T]` with a `1e-12` tail bound.
pub fn hcla_quadrature(params: &QuasiEnmParams, rel_tol: f64) -> Result<Quadrature> {
    let start = t_star(params)?;
    let end = hcla_cutoff(params, 1e-12).max(start + 1.0);
    integrate(|t| -params.gamma1(t), start, end, 1e-15, rel_tol)
}

/// `|0><1|`, decay toward `|0>`.
pub fn sigma_minus() -> CMatrix {
    ket_bra(2, 0, 1)
}

/// `|1><0|`.
pub fn sigma_plus() -> CMatrix {
    ket_bra(2, 1, 0)
}

/// Pauli ENM generator (unit `sigma_x`, `sigma_y` rates, `-tanh t` on
/// `sigma_z`) plus amplitude damping at rate `gamma(t)`.
pub fn nonunital_enm_generator(gamma: &ParamCurve, t: f64) -> Result<GeneratorSnapshot> {
    let g = gamma.value(t)?;
    if !(g >= 0.0) {
        return Err(Error::BadRate(format!("damping rate gamma({t}) = {g} is negative")));
    }
    let terms = [
        JumpTerm::new(1.0, pauli_x()),
        JumpTerm::new(1.0, pauli_y()),
        JumpTerm::new(-t.tanh(), pauli_z()),
        JumpTerm::new(g, sigma_minus()),
    ];
    GeneratorSnapshot::from_terms(t, 2, None, &terms)
}

/// Phase-covariant generator `gamma_z D_z + gamma (D[s+] + D[s-])`.
pub fn phase_covariant_generator(
    gamma_z: &ParamCurve,
    gamma: &ParamCurve,
    t: f64,
) -> Result<GeneratorSnapshot> {
    let g = gamma.value(t)?;
    let terms = [
        JumpTerm::new(gamma_z.value(t)?, pauli_z()),
        JumpTerm::new(g, sigma_plus()),
        JumpTerm::new(g, sigma_minus()),
    ];
    GeneratorSnapshot::from_terms(t, 2, None, &terms)
}

/// Ququart operators `{M_j N_l}`: a Pauli channel with weights `w` on
/// `span{|0>, |1>}` and a GAD block with damping `lambda` and mixing `p` on
/// `span{|2>, |3>}`. The identity is padded onto the first Kraus operator of
/// each block only, so the products form a complete set. With `p = 0` the
/// damping block decays `|3>` into `|2>`.
pub fn ququart_kraus_weights(w: [f64; 4], lambda: f64, p: f64) -> Result<KrausSet> {
    let zero = CMatrix::zeros(2, 2);
    let paulis = [identity(2), pauli_x(), pauli_y(), pauli_z()];
    let mut upper = Vec::new();
    for (k, (wi, s)) in w.iter().zip(paulis).enumerate() {
        if *wi < -1e-12 {
            return Err(Error::BadRate(format!("negative Pauli weight {wi}")));
        }
        let e = s.scale(wi.max(0.0).sqrt());
        upper.push(if k == 0 { direct_sum(&e, &identity(2)) } else { direct_sum(&e, &zero) });
    }
    let lower: Vec<CMatrix> = gad_kraus(lambda, p)?
        .operators()
        .iter()
        .enumerate()
        .map(|(k, e)| if k == 0 { direct_sum(&identity(2), e) } else { direct_sum(&zero, e) })
        .collect();
    let mut ops = Vec::new();
    for m in &upper {
        for n in &lower {
            let prod = m * n;
            if max_abs(&prod) > 0.0 {
                ops.push(prod);
            }
        }
    }
    KrausSet::with_tolerance(ops, 1e-10)
}

/// Ququart set with Pauli weights `(1 - 2k, k, k, 0)`.
pub fn ququart_kraus(k: f64, lambda: f64, p: f64) -> Result<KrausSet> {
    ququart_kraus_weights([1.0 - 2.0 * k, k, k, 0.0], lambda, p)
}

/// Pauli ENM block with rate scale `c` and a damping block following `lambda`.
pub fn ququart_enm(c: f64, lambda: &ParamCurve, p: f64, t: f64) -> Result<KrausSet> {
    let w = pauli_enm_weights(c, t)?;
    let lam = unit_interval("lambda", lambda.value(t)?, t)?;
    ququart_kraus_weights(w, lam, p)
}

/// Random curve admitted as a damping parameter: zero at the origin,
/// nondecreasing initially, within `[0, 1]`.
pub fn random_damping_curve<R: Rng + ?Sized>(rng: &mut R) -> ParamCurve {
    let amplitude = rng.random_range(0.05..=1.0);
    let rate = rng.random_range(0.1..5.0);
    match rng.random_range(0..4) {
        0 => ParamCurve::Saturating { amplitude, rate },
        1 => ParamCurve::Rational { amplitude, rate },
        2 => ParamCurve::Tanh { amplitude },
        _ => ParamCurve::SinSquared { amplitude, frequency: rate },
    }
}

/// Random mixing curve with values in `[0, 1]`.
pub fn random_mixing_curve<R: Rng + ?Sized>(rng: &mut R) -> ParamCurve {
    let start: f64 = rng.random();
    let rate = rng.random_range(0.0..3.0);
    match rng.random_range(0..3) {
        0 => ParamCurve::Constant { value: start },
        1 => ParamCurve::Exp { amplitude: start, rate },
        _ => ParamCurve::SinSquared { amplitude: start, frequency: rate },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_norm;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_at_zero_damping() {
        let k = gad_kraus(0.0, 0.37).unwrap();
        assert!(k.to_transfer().distance(&crate::repr::TransferMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn full_damping_to_ground() {
        let k = gad_kraus(1.0, 0.0).unwrap();
        let aff = k.to_transfer().affine();
        assert_abs_diff_eq!(aff.tau[2], 1.0, epsilon = 1e-14);
        assert!(aff.m.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn qudit_reduces_to_qubit() {
        let (lambda, p) = (0.42, 0.3);
        let q = qudit_gad_kraus(&[1.0 - p, p], lambda).unwrap().to_choi();
        let b = gad_kraus(lambda, p).unwrap().to_choi();
        assert!(q.distance(&b) < 1e-10);
    }

    #[test]
    fn qudit_fixed_point() {
        let params = QuditGadParams::new(vec![0.5, 0.3, 0.2], ParamCurve::saturating(1.0, 1.0)).unwrap();
        let fp = gad_fixed_point(&params).unwrap();
        let image = qudit_gad_kraus(params.populations(), 1.0).unwrap();
        let mut rng = rand::rng();
        let rho = crate::state::random_mixed(&mut rng, 3);
        let out = image.apply(rho.matrix());
        assert!(max_abs(&(out - fp.state.matrix())) < 1e-12);
    }

    #[test]
    fn bad_simplex() {
        assert!(matches!(
            QuditGadParams::new(vec![0.5, 0.6], ParamCurve::constant(0.0)),
            Err(Error::BadSimplex(_))
        ));
    }

    #[test]
    fn pauli_enm_weights_at_ln2() {
        let l = pauli_enm_eigenvalues(1.0, 2f64.ln());
        assert_abs_diff_eq!(l[0], 0.625, epsilon = 1e-14);
        assert_abs_diff_eq!(l[2], 0.25, epsilon = 1e-14);
        let k = pauli_enm(1.0, 2f64.ln()).unwrap();
        assert_eq!(k.operators().len(), 3);
        let t = 0.9;
        let w = pauli_enm_weights(1.0, t).unwrap();
        assert_abs_diff_eq!(w[1], (1.0 - (-2.0 * t).exp()) / 4.0, epsilon = 1e-14);
        assert!(w[3].abs() < 1e-15);
        assert!(matches!(pauli_enm(0.5, 1.0), Err(Error::BadRate(_))));
    }

    #[test]
    fn quasi_enm_values() {
        let q = QuasiEnmParams::new(3.0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(q.gamma1(1.0), -0.0223136, epsilon = 1e-7);
        assert_abs_diff_eq!(q.gamma1(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t_star(&q).unwrap(), 1.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(hcla_closed_form(&q).unwrap(), 2.0 / 81.0, epsilon = 1e-15);
        assert!(matches!(QuasiEnmParams::new(1.0, 2.0, 1.0), Err(Error::BadParams(_))));
    }

    #[test]
    fn ququart_completeness_and_blocks() {
        let set = ququart_kraus(0.1, 0.3, 0.0).unwrap();
        assert!(set.completeness_defect() < 1e-14);
        // no coupling between the two blocks' populations
        let rho = DensityMatrix::diagonal(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        let out = set.apply(rho.matrix());
        assert_abs_diff_eq!(out[(0, 0)].re + out[(1, 1)].re, 1.0, epsilon = 1e-14);
        let rho = DensityMatrix::diagonal(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        let out = set.apply(rho.matrix());
        assert_abs_diff_eq!(out[(2, 2)].re, 0.3, epsilon = 1e-14);
        assert!(trace_norm(&out).unwrap() > 0.99);
    }
}
