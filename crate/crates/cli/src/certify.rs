//! Property suites behind `channelscope certify`.

use channelscope::canon::{
    canonical_rates, damping_form, generator_from_trajectory, nonunitality, rates_qubit_gad,
};
use channelscope::curve::ParamCurve;
use channelscope::linalg::{c, identity, max_abs, trace_norm, CMatrix};
use channelscope::repr::{unital_nonunital_split, FnTrajectory, Trajectory};
use channelscope::state::{ginibre, random_mixed, random_pure, random_simplex, DensityMatrix};
use channelscope::witness::{
    ancilla_p_scan, damping_criteria, default_p_step, onset_detector, purely_nonunital_probe, scan, ScanOptions, StatePairEnsemble,
};
use channelscope::zoo::{
    gad_fixed_point, hcla_closed_form, hcla_quadrature, qubit_gad, qudit_gad, ququart_kraus,
    random_damping_curve, random_mixing_curve, t_star, Channel, ChannelSpec, Family, GridSpec,
    QubitGadParams, QuditGadParams,
};
use channelscope::{Error, Result, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::Suite;

/// One certified property: every sample has a margin, and the property
/// holds when all margins are nonnegative.
#[derive(Debug, Clone, Serialize)]
pub struct Property {
    pub name: String,
    pub samples: usize,
    pub worst_margin: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

impl Property {
    pub fn from_margins(name: &str, margins: Vec<Result<f64>>, detail: impl Into<String>) -> Self {
        let mut detail = detail.into();
        let errors: Vec<&Error> = margins.iter().filter_map(|m| m.as_ref().err()).collect();
        if let Some(first) = errors.first() {
            detail = format!("{detail}; {} sample(s) failed to evaluate, first: {first}", errors.len());
        }
        let values: Vec<f64> = margins.iter().filter_map(|m| m.as_ref().ok().copied()).collect();
        let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
        let passed = errors.is_empty() && !values.is_empty() && values.iter().all(|m| *m >= 0.0);
        Self {
            name: name.to_string(),
            samples: margins.len(),
            worst_margin: worst.is_finite().then_some(worst),
            passed,
            detail,
        }
    }

    pub fn failure(name: &str, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), samples: 0, worst_margin: None, passed: false, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelReport {
    pub family: Family,
    pub grid_points: usize,
    pub cp_flagged: usize,
    pub p_flagged: usize,
    pub onset: Option<f64>,
    pub hcla: Option<f64>,
    pub ancilla: Option<AncillaComparison>,
}

/// Largest trace-distance derivative over a coarse grid with the channel
/// extended by ancillas of dimension `d + 1` (the verdict) and `d`.
#[derive(Debug, Clone, Serialize)]
pub struct AncillaComparison {
    pub grid_points: usize,
    pub pairs: usize,
    pub td_deriv_max_ancilla_d_plus_1: f64,
    pub td_deriv_max_ancilla_d: f64,
    pub p_flagged: bool,
}

fn ancilla_comparison(channel: &Channel, grid: &[f64], seed: u64, tol: &Tolerances) -> Result<AncillaComparison> {
    let stride = grid.len().div_ceil(20).max(1);
    let coarse: Vec<f64> = grid.iter().copied().step_by(stride).collect();
    let h = default_p_step(grid);
    let d = channel.dim();
    let anchors: Vec<_> = channel
        .fixed_point()
        .map(|f| (random_mixed(&mut stream(seed, 40), d), f.clone()))
        .into_iter()
        .collect();
    let worst = |ancilla: usize| -> Result<(f64, usize)> {
        let ens = StatePairEnsemble::with_ancilla(d, ancilla, 50, &anchors, seed)?;
        let values = ancilla_p_scan(channel, &ens, ancilla, &coarse, h)?;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            max = max.max(v?);
        }
        Ok((max, ens.pairs.len()))
    };
    let (plus, pairs) = worst(d + 1)?;
    let (same, _) = worst(d)?;
    Ok(AncillaComparison {
        grid_points: coarse.len(),
        pairs,
        td_deriv_max_ancilla_d_plus_1: plus,
        td_deriv_max_ancilla_d: same,
        p_flagged: plus > tol.p,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub seed: u64,
    pub spec_hash: Option<String>,
    pub passed: bool,
    pub properties: Vec<Property>,
    pub channel: Option<ChannelReport>,
}

impl Report {
    pub fn new(seed: u64, spec_hash: Option<String>, properties: Vec<Property>, channel: Option<ChannelReport>) -> Self {
        let passed = properties.iter().all(|p| p.passed);
        Self { schema: 1, seed, spec_hash, passed, properties, channel }
    }

    pub fn failing(&self) -> Vec<&str> {
        self.properties.iter().filter(|p| !p.passed).map(|p| p.name.as_str()).collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn run_suites(suites: &[Suite], seed: u64, tol: &Tolerances) -> Vec<Property> {
    let mut out = Vec::new();
    for suite in suites {
        match suite {
            Suite::Lemma1 => out.extend(lemma1(seed, 50)),
            Suite::Theorem1 => {
                for d in 2..=4 {
                    out.push(theorem1(d, 50, 50, 10, seed));
                }
            }
            Suite::Neighborhood => {
                for d in 2..=4 {
                    out.push(neighborhood(d, 50, seed));
                }
            }
            Suite::Theorem2 => {
                out.push(theorem2(50, seed, tol));
                out.push(quasi_enm_damping(&GridSpec::default(), tol));
            }
            Suite::Theorem3 => out.extend(theorem3(50, seed, tol)),
            Suite::Probe => out.push(nonunital_probe(50, seed, tol)),
            Suite::Reconstruction => out.push(reconstruction(tol)),
            Suite::Constructions => out.extend(constructions(tol)),
        }
    }
    out
}

/// Admission of damping curves: random admissible curves pass and curves
/// violating `lambda(0) = 0` or the initial slope are rejected.
pub fn lemma1(seed: u64, samples: usize) -> Vec<Property> {
    let mut rng = stream(seed, 1);
    let admitted: Vec<Result<f64>> = (0..samples)
        .map(|_| random_damping_curve(&mut rng).damping_admission(5.0, 1000).map(|a| a.margin()))
        .collect();
    let adversarial = [
        ParamCurve::constant(0.1),
        ParamCurve::exp(1.0, 1.0),
        ParamCurve::saturating(-0.5, 1.0),
        ParamCurve::Rational { amplitude: 2.0, rate: 1.0 },
    ];
    let rejected = adversarial.iter().map(|c| c.damping_admission(5.0, 1000).map(|a| -a.margin())).collect();
    vec![
        Property::from_margins("lemma1_random_curves_admitted", admitted, "admission margin on [0, 5]"),
        Property::from_margins(
            "lemma1_inadmissible_rejected",
            rejected,
            "negated admission margin of curves with lambda(0) != 0, decreasing start or range violation",
        ),
    ]
}

struct T1Sample {
    populations: Vec<f64>,
    curves: Vec<ParamCurve>,
    states: Vec<DensityMatrix>,
}

/// Forward-difference derivative at `t = 0` of the trace distance to the
/// fixed point of qudit GAD stays below `1e-7`.
pub fn theorem1(d: usize, simplices: usize, states: usize, curves: usize, seed: u64) -> Property {
    const H: f64 = 1e-6;
    const BOUND: f64 = 1e-7;
    let mut rng = stream(seed, 100 + d as u64);
    let samples: Vec<T1Sample> = (0..simplices)
        .map(|_| T1Sample {
            populations: random_simplex(&mut rng, d),
            curves: (0..curves).map(|_| random_damping_curve(&mut rng)).collect(),
            states: (0..states)
                .map(|k| if k % 2 == 0 { random_pure(&mut rng, d) } else { random_mixed(&mut rng, d) })
                .collect(),
        })
        .collect();
    let margins: Vec<Result<f64>> = samples
        .par_iter()
        .flat_map_iter(|s| {
            s.curves.iter().flat_map(move |curve| {
                let setup = QuditGadParams::new(s.populations.clone(), curve.clone()).and_then(|params| {
                    let fixed = gad_fixed_point(&params)?.state;
                    Ok((qudit_gad(&params, H)?.to_transfer(), fixed))
                });
                s.states.iter().map(move |rho| {
                    let (f_h, fixed) = setup.as_ref().map_err(Clone::clone)?;
                    let d0 = trace_norm(&(rho.matrix() - fixed.matrix()))?;
                    let dh = trace_norm(&(f_h.apply(rho.matrix()) - fixed.matrix()))?;
                    Ok(BOUND - (dh - d0) / H)
                })
            })
        })
        .collect();
    Property::from_margins(
        &format!("theorem1_d{d}"),
        margins,
        format!("{simplices} simplices x {curves} curves x {states} states, h = {H}, bound {BOUND}"),
    )
}

/// State whose diagonal equals `populations`, with random coherences.
fn with_diagonal<R: Rng + ?Sized>(rng: &mut R, populations: &[f64]) -> Result<DensityMatrix> {
    let d = populations.len();
    let mut v = ginibre(rng, d, d);
    for mut col in v.column_iter_mut() {
        let n = col.norm();
        col.unscale_mut(n);
    }
    let gram = v.adjoint() * &v;
    let rho = CMatrix::from_fn(d, d, |i, j| gram[(i, j)] * (populations[i] * populations[j]).sqrt());
    DensityMatrix::new(rho)
}

/// Trace distance to the fixed point from states sharing its diagonal never
/// grows while the damping parameter is nondecreasing.
pub fn neighborhood(d: usize, samples: usize, seed: u64) -> Property {
    const BOUND: f64 = 1e-10;
    let mut rng = stream(seed, 200 + d as u64);
    let inputs: Vec<_> = (0..samples)
        .map(|_| {
            let populations = random_simplex(&mut rng, d);
            let curve = random_damping_curve(&mut rng);
            let rho = with_diagonal(&mut rng, &populations);
            (populations, curve, rho)
        })
        .collect();
    let times: Vec<f64> = (0..=100).map(|k| 0.05 * k as f64).collect();
    let margins = inputs
        .into_par_iter()
        .map(|(populations, curve, rho)| {
            let rho = rho?;
            let params = QuditGadParams::new(populations, curve.clone())?;
            let fixed = gad_fixed_point(&params)?.state;
            let mut worst = f64::INFINITY;
            let mut prev: Option<(f64, f64)> = None;
            for &t in &times {
                let lam = curve.value(t)?;
                let dist = trace_norm(&(qudit_gad(&params, t)?.apply(rho.matrix()) - fixed.matrix()))?;
                if let Some((lam0, dist0)) = prev {
                    if lam >= lam0 {
                        worst = worst.min(BOUND - (dist - dist0));
                    }
                }
                prev = Some((lam, dist));
            }
            Ok(worst)
        })
        .collect();
    Property::from_margins(
        &format!("neighborhood_d{d}"),
        margins,
        "states with the fixed-point diagonal, grid step 0.05 on [0, 5], intervals with nondecreasing lambda",
    )
}

fn random_gad_pairs(seed: u64, id: u64, count: usize) -> Vec<QubitGadParams> {
    let mut rng = stream(seed, id);
    (0..count)
        .map(|_| {
            QubitGadParams::new(random_mixing_curve(&mut rng), random_damping_curve(&mut rng))
                .expect("random damping curves start at zero")
        })
        .collect()
}

fn gad_trajectory(params: QubitGadParams) -> impl Trajectory {
    FnTrajectory::new(2, move |t| Ok(qubit_gad(&params, t)?.to_transfer()))
}

/// `h_max(D + D^T)` at `t -> 0+` is at most `1e-9` for random qubit GAD.
pub fn theorem2(samples: usize, seed: u64, tol: &Tolerances) -> Property {
    let margins = random_gad_pairs(seed, 300, samples)
        .into_par_iter()
        .map(|params| {
            let form = damping_form(&gad_trajectory(params), 0.0, 1e-5, tol)?;
            Ok(1e-9 - damping_criteria(&form).1)
        })
        .collect();
    Property::from_margins("theorem2_hmax_at_zero", margins, "one-sided difference h = 1e-5, bound 1e-9")
}

/// Quasi-eternal GAD `(3, 2, 1)`: `Tr D = -2 nu` and `h_max = -nu` on the grid.
pub fn quasi_enm_damping(grid: &GridSpec, tol: &Tolerances) -> Property {
    let spec = ChannelSpec::new(Family::QuasiEnmGad);
    let params = match spec.quasi_enm() {
        Ok(p) => p,
        Err(e) => return Property::failure("quasi_enm_damping_identities", e.to_string()),
    };
    let traj = FnTrajectory::new(2, move |t| Ok(channelscope::zoo::quasi_enm_gad(&params, t)?.to_transfer()));
    let nu = params.nu;
    let margins = grid
        .times()
        .into_par_iter()
        .filter(|t| *t > 0.0)
        .map(|t| {
            let (tr, hmax) = damping_criteria(&damping_form(&traj, t, tol.fd_step, tol)?);
            Ok(1e-9 - (tr + 2.0 * nu).abs().max((hmax + nu).abs()))
        })
        .collect();
    Property::from_margins(
        "quasi_enm_damping_identities",
        margins,
        "max(|Tr D + 2 nu|, |h_max + nu|) on the grid, (m, n, nu) = (3, 2, 1), bound 1e-9",
    )
}

/// Rates of random qubit GAD at `t -> 0+` are nonnegative, analytically and
/// as extracted from the trajectory.
pub fn theorem3(samples: usize, seed: u64, tol: &Tolerances) -> Vec<Property> {
    let pairs = random_gad_pairs(seed, 300, samples);
    let analytic = pairs
        .par_iter()
        .map(|params| {
            let (g1, g2) = rates_qubit_gad(&params.p, &params.lambda, 0.0)?;
            Ok(g1.min(g2) + 1e-9)
        })
        .collect();
    let extracted = pairs
        .into_par_iter()
        .map(|params| {
            let gen = generator_from_trajectory(&gad_trajectory(params), 0.0, 1e-5, tol)?;
            Ok(canonical_rates(&gen, tol)?.min() + 1e-6)
        })
        .collect();
    vec![
        Property::from_margins("theorem3_rates_at_zero", analytic, "closed-form rates at t = 0, bound -1e-9"),
        Property::from_margins(
            "theorem3_extracted_rates_at_zero",
            extracted,
            "canonical rates of the numerical generator at t = 0, h = 1e-5, bound -1e-6",
        ),
    ]
}

/// No qubit GAD interval near `t = 0` violates CP while its unital block is
/// contractive and its unital rates are nonnegative.
pub fn nonunital_probe(samples: usize, seed: u64, tol: &Tolerances) -> Property {
    let mut rng = stream(seed, 400);
    let inputs: Vec<_> = random_gad_pairs(seed, 401, samples)
        .into_iter()
        .map(|p| (p, rng.random_range(0.0..0.05)))
        .collect();
    let results: Vec<Result<Option<f64>>> = inputs
        .into_par_iter()
        .map(|(params, s)| {
            let probe = purely_nonunital_probe(&gad_trajectory(params), s, s + 0.005, tol)?;
            let hypothesis = probe.contractive && probe.unital_rates_nonnegative;
            Ok(hypothesis.then_some(probe.choi_min_eig + probe.cp_threshold))
        })
        .collect();
    let vacuous = results.iter().filter(|r| matches!(r, Ok(None))).count();
    let margins = results
        .into_iter()
        .map(|r| r.map(|m| m.unwrap_or(f64::INFINITY)))
        .collect();
    Property::from_margins(
        "nonunital_probe",
        margins,
        format!("intervals [s, s + 0.005], s in [0, 0.05]; {vacuous} sample(s) outside the hypothesis"),
    )
}

/// One representative specification per family.
pub fn reference_specs() -> Vec<ChannelSpec> {
    vec![
        ChannelSpec::new(Family::QubitGad)
            .with_curve("p", ParamCurve::exp(0.8, 0.5))
            .with_curve("lambda", ParamCurve::saturating(0.9, 1.0)),
        ChannelSpec::new(Family::QuditGad)
            .with_param("p_0", 0.5)
            .with_param("p_1", 0.3)
            .with_param("p_2", 0.2)
            .with_curve("lambda", ParamCurve::saturating(1.0, 1.0)),
        ChannelSpec::new(Family::QuasiEnmGad),
        ChannelSpec::new(Family::PauliEnm),
        ChannelSpec::new(Family::NonunitalEnm),
        ChannelSpec::new(Family::PhaseCovariant),
        ChannelSpec::new(Family::QuquartEnm),
    ]
}

/// `M(t) = M(t,s) M(s)` and `tau(t) = M(t,s) tau(s) + tau(t,s)` for the
/// split intermediate map, across all families.
pub fn reconstruction(tol: &Tolerances) -> Property {
    const BOUND: f64 = 1e-8;
    let times: Vec<f64> = (0..=50).map(|k| 0.1 * k as f64).collect();
    let mut pairs = Vec::new();
    for (i, &s) in times.iter().enumerate() {
        if let Some(&next) = times.get(i + 1) {
            pairs.push((s, next));
        }
        if s < 5.0 {
            pairs.push((s, 5.0));
        }
    }
    let mut margins = Vec::new();
    for spec in reference_specs() {
        let channel = match spec.build(5.02, tol) {
            Ok(ch) => ch,
            Err(e) => {
                margins.push(Err(e));
                continue;
            }
        };
        margins.par_extend(pairs.par_iter().map(|&(s, t)| {
            let f_s = channel.transfer_at(s)?;
            let f_t = channel.transfer_at(t)?;
            let split = unital_nonunital_split(&f_t, &f_s, tol.max_condition)?;
            let (at, as_) = (f_t.affine(), f_s.affine());
            let unital = (&at.m - &split.m * &as_.m).abs().max();
            let shift = (&at.tau - (&split.m * &as_.tau + &split.tau)).abs().max();
            Ok(BOUND - unital.max(shift))
        }));
    }
    Property::from_margins(
        "reconstruction",
        margins,
        format!("7 families, {} interval pairs each, bound {BOUND}", pairs.len()),
    )
}

fn min_rate_at(channel: &Channel, t: f64, tol: &Tolerances) -> Result<f64> {
    Ok(canonical_rates(&generator_from_trajectory(channel, t, tol.fd_step, tol)?, tol)?.min())
}

fn positive_grid() -> Vec<f64> {
    GridSpec::default().times().into_iter().filter(|t| *t > 0.01).collect()
}

/// Factors `M_j`, `N_l` of the ququart construction, built entry by entry.
/// The identity pads only the first factor of each block, and the first
/// Pauli factor carries `sqrt(1 - 2k)` so the products are complete.
pub fn ququart_display_factors(k: f64, lambda: f64) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let r = |x: f64| c(x, 0.0);
    let (sk, z) = (k.sqrt(), c(0.0, 0.0));
    let diag = |v: [f64; 4]| CMatrix::from_fn(4, 4, |i, j| if i == j { r(v[i]) } else { z });
    let a = (1.0 - 2.0 * k).sqrt();
    let m1 = diag([a, a, 1.0, 1.0]);
    let m2 = CMatrix::from_row_slice(4, 4, &[z, r(sk), z, z, r(sk), z, z, z, z, z, z, z, z, z, z, z]);
    let m3 = CMatrix::from_row_slice(4, 4, &[z, c(0.0, -sk), z, z, c(0.0, sk), z, z, z, z, z, z, z, z, z, z, z]);
    let n1 = diag([1.0, 1.0, 1.0, (1.0 - lambda).sqrt()]);
    let mut n2 = CMatrix::zeros(4, 4);
    n2[(2, 3)] = r(lambda.sqrt());
    (vec![m1, m2, m3], vec![n1, n2])
}

/// Largest entrywise distance between the ququart Kraus set and the
/// nonzero products of the displayed factors, matched as multisets.
pub fn ququart_entrywise_defect(k: f64, lambda: f64) -> Result<f64> {
    let ours = ququart_kraus(k, lambda, 0.0)?;
    let (ms, ns) = ququart_display_factors(k, lambda);
    let expected: Vec<CMatrix> = ms
        .iter()
        .flat_map(|m| ns.iter().map(move |n| m * n))
        .filter(|p| max_abs(p) > 0.0)
        .collect();
    let mut remaining: Vec<&CMatrix> = ours.operators().iter().collect();
    if remaining.len() != expected.len() {
        return Ok(f64::INFINITY);
    }
    let mut worst: f64 = 0.0;
    for e in &expected {
        let (idx, dist) = remaining
            .iter()
            .enumerate()
            .map(|(i, op)| (i, max_abs(&(*op - e))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("sizes match");
        worst = worst.max(dist);
        remaining.swap_remove(idx);
    }
    Ok(worst)
}

/// Non-unital eternal constructions: negative rates at all times, nonzero
/// image of the identity, and the ququart Kraus layout.
pub fn constructions(tol: &Tolerances) -> Vec<Property> {
    let mut out = Vec::new();
    let grid = positive_grid();
    let detail_grid = format!("{} grid points on (0.01, 5]", grid.len());

    match ChannelSpec::new(Family::NonunitalEnm).build(5.02, tol) {
        Ok(ch) => {
            let margins = grid
                .par_iter()
                .map(|&t| Ok(1e-6 - (min_rate_at(&ch, t, tol)? + t.tanh()).abs()))
                .collect();
            out.push(Property::from_margins(
                "nonunital_enm_min_rate",
                margins,
                format!("|min rate + tanh t| <= 1e-6, {detail_grid}"),
            ));
            let image = generator_from_trajectory(&ch, 1.0, tol.fd_step, tol).map(|g| nonunitality(&g) - 1e-3);
            out.push(Property::from_margins("nonunital_enm_generator_nonunital", vec![image], "|L(I)| at t = 1 exceeds 1e-3"));
        }
        Err(e) => out.push(Property::failure("nonunital_enm_build", e.to_string())),
    }

    match ChannelSpec::new(Family::QuquartEnm).build(5.02, tol) {
        Ok(ch) => {
            let margins = grid.par_iter().map(|&t| Ok(-min_rate_at(&ch, t, tol)? - tol.rate)).collect();
            out.push(Property::from_margins(
                "ququart_enm_negative_rate",
                margins,
                format!("min rate below -{:e}, {detail_grid}", tol.rate),
            ));
            let image = generator_from_trajectory(&ch, 1.0, tol.fd_step, tol).map(|g| nonunitality(&g) - 1e-3);
            out.push(Property::from_margins("ququart_enm_generator_nonunital", vec![image], "|L(I)| at t = 1 exceeds 1e-3"));
        }
        Err(e) => out.push(Property::failure("ququart_enm_build", e.to_string())),
    }

    let mut entrywise = Vec::new();
    for i in 0..=10 {
        for j in 0..=10 {
            let (k, lambda) = (0.25 * i as f64 / 10.0, j as f64 / 10.0);
            entrywise.push(ququart_entrywise_defect(k, lambda).map(|d| 1e-14 - d));
        }
    }
    out.push(Property::from_margins(
        "ququart_kraus_layout",
        entrywise,
        "entrywise match with the block factors on k in [0, 1/4], lambda in [0, 1]",
    ));

    match ChannelSpec::new(Family::PhaseCovariant).build(5.02, tol) {
        Ok(ch) => {
            let cp = grid
                .par_iter()
                .map(|&t| Ok(ch.transfer_at(t)?.to_choi().min_eigenvalue()? + 1e-9))
                .collect();
            out.push(Property::from_margins("phase_covariant_cp", cp, format!("Choi spectrum >= -1e-9, {detail_grid}")));
            let refs = ch.references().to_vec();
            let negative = grid
                .par_iter()
                .map(|&t| {
                    let rates = canonical_rates(&generator_from_trajectory(&ch, t, tol.fd_step, tol)?, tol)?;
                    Ok(-rates.labeled(&refs)[2] - tol.rate)
                })
                .collect();
            out.push(Property::from_margins(
                "phase_covariant_dephasing_rate_negative",
                negative,
                format!("sigma_z rate below -{:e}, {detail_grid}", tol.rate),
            ));
            let mut rng = stream(0, 500);
            let mut cov = Vec::new();
            for &t in &[0.5, 1.0, 2.0, 4.0] {
                for _ in 0..5 {
                    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let rho = random_mixed(&mut rng, 2);
                    cov.push(covariance_defect(&ch, t, theta, &rho).map(|d| 1e-9 - d));
                }
            }
            out.push(Property::from_margins("phase_covariant_covariance", cov, "|E(U rho U+) - U E(rho) U+| <= 1e-9"));
        }
        Err(e) => out.push(Property::failure("phase_covariant_build", e.to_string())),
    }
    out
}

fn covariance_defect(ch: &Channel, t: f64, theta: f64, rho: &DensityMatrix) -> Result<f64> {
    let mut u = identity(2);
    u[(1, 1)] = c(theta.cos(), theta.sin());
    let f = ch.transfer_at(t)?;
    let lhs = f.apply(&(&u * rho.matrix() * u.adjoint()));
    let rhs = &u * f.apply(rho.matrix()) * u.adjoint();
    Ok(max_abs(&(lhs - rhs)))
}

/// Properties of the channel named by a specification document. Damping
/// curves are admitted before the channel is built.
pub fn channel_properties(
    spec: &ChannelSpec,
    tol: &Tolerances,
    seed: u64,
) -> (Vec<Property>, Option<ChannelReport>) {
    let mut props = Vec::new();
    let t_max = spec.grid.t_max;
    match spec.damping_curve() {
        Ok(Some(curve)) => {
            let admission = curve.damping_admission(t_max, 1000);
            let detail = match &admission {
                Ok(a) => format!(
                    "lambda(0) = {:e}, initial slope {:e}, range [{:e}, {:e}]",
                    a.start, a.initial_slope, a.min, a.max
                ),
                Err(e) => e.to_string(),
            };
            let prop = Property::from_margins("lemma1_spec_damping_curve", vec![admission.map(|a| a.margin())], detail);
            let admitted = prop.passed;
            props.push(prop);
            if !admitted {
                return (props, None);
            }
        }
        Ok(None) => {}
        Err(e) => {
            props.push(Property::failure("spec_damping_curve", e.to_string()));
            return (props, None);
        }
    }
    let channel = match spec.build(t_max + 0.02, tol) {
        Ok(ch) => ch,
        Err(e) => {
            props.push(Property::failure("spec_build", e.to_string()));
            return (props, None);
        }
    };

    let gad = match spec.family {
        Family::QubitGad => match (spec.curves.get("p"), spec.curves.get("lambda")) {
            (Some(p), Some(l)) => Some((p.clone(), l.clone())),
            _ => None,
        },
        Family::QuasiEnmGad => spec.quasi_enm().ok().map(|q| (q.p_curve(), q.lambda_curve())),
        _ => None,
    };
    if let Some((p, lambda)) = &gad {
        let hmax = damping_form(&channel, 0.0, 1e-5, tol).map(|f| 1e-9 - damping_criteria(&f).1);
        props.push(Property::from_margins("theorem2_spec", vec![hmax], "h_max(D + D^T) at t = 0+, bound 1e-9"));
        let rates = rates_qubit_gad(p, lambda, 0.0).map(|(a, b)| a.min(b) + 1e-9);
        props.push(Property::from_margins("theorem3_spec", vec![rates], "closed-form rates at t = 0, bound -1e-9"));
    }

    let grid = spec.grid.times();
    let ensemble = match StatePairEnsemble::standard(channel.dim(), seed) {
        Ok(e) => e,
        Err(e) => {
            props.push(Property::failure("spec_ensemble", e.to_string()));
            return (props, None);
        }
    };
    let mut opts = ScanOptions::new(*tol);
    opts.references = channel.references().to_vec();
    let series = match scan(&channel, &ensemble, &grid, &opts) {
        Ok(s) => s,
        Err(e) => {
            props.push(Property::failure("spec_scan", e.to_string()));
            return (props, None);
        }
    };
    let failures = series.failures();
    props.push(Property::from_margins(
        "spec_scan_complete",
        vec![Ok(0.01 * grid.len() as f64 - failures as f64)],
        format!("{failures} of {} grid points incomplete", grid.len()),
    ));
    let cp_flagged = series.records.iter().filter(|r| r.cp_violation()).count();
    let p_flagged = series.records.iter().filter(|r| r.p_violation(tol)).count();
    let onset = onset_detector(&series, |t| min_rate_at(&channel, t, tol), tol);

    let hcla = match spec.family {
        Family::QuasiEnmGad => spec.quasi_enm().and_then(|q| {
            let closed = hcla_closed_form(&q)?;
            let quad = hcla_quadrature(&q, 1e-10)?.value;
            props.push(Property::from_margins(
                "spec_hcla_closed_form_vs_quadrature",
                vec![Ok(1e-6 - ((closed - quad) / closed).abs())],
                format!("closed form {closed:.12e}, quadrature {quad:.12e}"),
            ));
            let ts = t_star(&q)?;
            let det = onset.map(|o| 1e-6 - (o - ts).abs()).ok_or(Error::NotConverged("no onset detected".into()));
            props.push(Property::from_margins(
                "spec_onset_matches_t_star",
                vec![det],
                format!("detected {:?}, closed form {ts:.12e}", onset),
            ));
            Ok(closed)
        }),
        Family::QubitGad => match &gad {
            Some((p, lambda)) => channelscope::witness::hcla_measure(
                |t| rates_qubit_gad(p, lambda, t).map(|(a, b)| vec![a, b]),
                t_max,
                tol,
            )
            .map(|q| q.value),
            None => Err(Error::BadParams("qubit_gad requires curves p and lambda".into())),
        },
        _ => channelscope::witness::hcla_measure(
            |t| Ok(canonical_rates(&generator_from_trajectory(&channel, t, tol.fd_step, tol)?, tol)?.rates),
            t_max,
            tol,
        )
        .map(|q| q.value),
    };
    let hcla = match hcla {
        Ok(v) => Some(v),
        Err(e) => {
            props.push(Property::failure("spec_hcla", e.to_string()));
            None
        }
    };
    let ancilla = match ancilla_comparison(&channel, &grid, seed, tol) {
        Ok(a) => Some(a),
        Err(e) => {
            props.push(Property::failure("spec_ancilla_scan", e.to_string()));
            None
        }
    };
    let report =
        ChannelReport { family: spec.family, grid_points: grid.len(), cp_flagged, p_flagged, onset, hcla, ancilla };
    (props, Some(report))
}
