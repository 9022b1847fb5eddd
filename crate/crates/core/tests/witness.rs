use channelscope::canon::{canonical_rates, generator_from_trajectory};
use channelscope::curve::ParamCurve;
use channelscope::repr::{FnTrajectory, Trajectory};
use channelscope::witness::{
    distance_to_fixed_point, hcla_measure, onset_detector, p_divisibility_scan, purely_nonunital_probe, scan,
    witness_pair_rate, ScanOptions, StatePairEnsemble,
};
use channelscope::zoo::{
    gad_fixed_point, qubit_gad, random_damping_curve, random_mixing_curve, ChannelSpec, Family, GridSpec,
    QubitGadParams, QuditGadParams,
};
use channelscope::Tolerances;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(t_max: f64, points: usize) -> Vec<f64> {
    GridSpec::new(0.0, t_max, points).unwrap().times()
}

#[test]
fn semigroups_are_markovian_in_both_scans() {
    let tol = Tolerances::default();
    let specs = [
        ChannelSpec::new(Family::QubitGad)
            .with_curve("p", ParamCurve::constant(0.3))
            .with_curve("lambda", ParamCurve::saturating(1.0, 0.7)),
        ChannelSpec::new(Family::PhaseCovariant)
            .with_curve("gamma_z", ParamCurve::constant(0.4))
            .with_curve("gamma", ParamCurve::constant(0.25)),
    ];
    for spec in specs {
        let ch = spec.build(3.1, &tol).unwrap();
        let ens = StatePairEnsemble::standard(ch.dim(), 3).unwrap();
        let mut opts = ScanOptions::new(tol);
        opts.references = ch.references().to_vec();
        let series = scan(&ch, &ens, &grid(3.0, 60), &opts).unwrap();
        for r in &series.records {
            assert!(r.is_complete(), "{:?}", r.errors);
            assert!(!r.cp_violation(), "CP flag at {}: {:?}", r.t, r.choi_min_eig);
            assert!(!r.p_violation(&tol), "P flag at {}", r.t);
            assert!(r.min_rate().unwrap() >= -tol.rate);
        }
    }
}

#[test]
fn qutrit_gad_with_exponential_damping_is_not_a_semigroup() {
    let tol = Tolerances::default();
    let ch = ChannelSpec::new(Family::QuditGad)
        .with_param("p_0", 0.2)
        .with_param("p_1", 0.5)
        .with_param("p_2", 0.3)
        .with_curve("lambda", ParamCurve::saturating(1.0, 1.2))
        .build(1.1, &tol)
        .unwrap();
    let ens = StatePairEnsemble::standard(3, 3).unwrap();
    let series = scan(&ch, &ens, &[0.05, 0.5], &ScanOptions::new(tol)).unwrap();
    for r in &series.records {
        assert!(r.min_rate().unwrap() < -1e-4);
        assert!(r.cp_violation());
    }
}

#[test]
fn positive_rates_give_cp_steps() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let eps = tol.intermediate_eps;
    for _ in 0..6 {
        let params = QubitGadParams::new(random_mixing_curve(&mut rng), random_damping_curve(&mut rng)).unwrap();
        let traj = FnTrajectory::new(2, move |t| Ok(qubit_gad(&params, t)?.to_transfer()));
        let ens = StatePairEnsemble::standard(2, 1).unwrap();
        let series = scan(&traj, &ens, &grid(2.0, 40), &ScanOptions::new(tol)).unwrap();
        for r in &series.records {
            let Some(now) = r.min_rate() else { continue };
            let later = canonical_rates(&generator_from_trajectory(&traj, r.t + eps, tol.fd_step, &tol).unwrap(), &tol)
                .unwrap()
                .min();
            if now >= -tol.rate && later >= -tol.rate {
                assert!(!r.cp_violation(), "t = {}: rates {now:e}, {later:e}, choi {:?}", r.t, r.choi_min_eig);
            }
        }
    }
}

#[test]
fn trace_distance_ignores_the_shift() {
    let tol = Tolerances::default();
    let ch = ChannelSpec::new(Family::QuasiEnmGad).build(3.1, &tol).unwrap();
    let stripped = FnTrajectory::new(2, |t| Ok(ChannelSpec::new(Family::QuasiEnmGad)
        .build(3.1, &Tolerances::default())?
        .transfer_at(t)?
        .unital_part()));
    let ens = StatePairEnsemble::standard(2, 4).unwrap();
    let g = grid(3.0, 31);
    let full = p_divisibility_scan(&ch, &ens, &g, 1e-5).unwrap();
    let unital = p_divisibility_scan(&stripped, &ens, &g, 1e-5).unwrap();
    for (a, b) in full.iter().zip(&unital) {
        assert!((a.as_ref().unwrap() - b.as_ref().unwrap()).abs() <= 1e-9);
    }
}

#[test]
fn onset_of_quasi_eternal_family() {
    let tol = Tolerances::default();
    let ch = ChannelSpec::new(Family::QuasiEnmGad).build(2.1, &tol).unwrap();
    let ens = StatePairEnsemble::standard(2, 1).unwrap();
    let mut opts = ScanOptions::new(tol);
    opts.references = ch.references().to_vec();
    let series = scan(&ch, &ens, &grid(2.0, 200), &opts).unwrap();
    let onset = onset_detector(
        &series,
        |t| Ok(canonical_rates(&generator_from_trajectory(&ch, t, tol.fd_step, &tol)?, &tol)?.min()),
        &tol,
    )
    .unwrap();
    assert!((onset - 1.5f64.ln()).abs() < 1e-6, "onset {onset}");
}

#[test]
fn constructed_pair_witnesses_pauli_enm() {
    let tol = Tolerances::default();
    let ch = ChannelSpec::new(Family::PauliEnm).build(5.1, &tol).unwrap();
    for t in [0.1, 0.5, 1.0, 2.0] {
        let rate = witness_pair_rate(&ch, t, 1e-5, &tol).unwrap().unwrap();
        assert!(rate > 1e-6, "t = {t}: {rate}");
    }
}

#[test]
fn probe_holds_near_zero() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let params = QubitGadParams::new(random_mixing_curve(&mut rng), random_damping_curve(&mut rng)).unwrap();
        let traj = FnTrajectory::new(2, move |t| Ok(qubit_gad(&params, t)?.to_transfer()));
        let probe = purely_nonunital_probe(&traj, 0.01, 0.015, &tol).unwrap();
        assert!(!probe.counterexample(), "{probe:?}");
    }
}

#[test]
fn hcla_of_pauli_enm() {
    let tol = Tolerances::default();
    let ch = ChannelSpec::new(Family::PauliEnm).build(2.1, &tol).unwrap();
    let xi = hcla_measure(
        |t| Ok(canonical_rates(&generator_from_trajectory(&ch, t, tol.fd_step, &tol)?, &tol)?.rates),
        2.0,
        &tol,
    )
    .unwrap();
    let exact = 0.5 * 2f64.cosh().ln();
    assert!((xi.value - exact).abs() < 1e-6, "{} vs {exact}", xi.value);
}

#[test]
fn distance_to_fixed_point_decreases_for_monotone_damping() {
    let params = QuditGadParams::new(vec![0.6, 0.3, 0.1], ParamCurve::saturating(1.0, 1.5)).unwrap();
    let fixed = gad_fixed_point(&params).unwrap().state;
    let p2 = params.clone();
    let traj = FnTrajectory::new(3, move |t| Ok(channelscope::zoo::qudit_gad(&p2, t)?.to_transfer()));
    let rho = channelscope::state::random_mixed(&mut ChaCha8Rng::seed_from_u64(8), 3);
    let dist = distance_to_fixed_point(&traj, &rho, &fixed, &grid(4.0, 41)).unwrap();
    assert!(dist.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}
