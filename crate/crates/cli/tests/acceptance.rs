//! Acceptance criteria 1-9. Each criterion prints one PASS/FAIL line with
//! its pinned tolerance and runtime; any failure makes the target fail.

use std::panic::AssertUnwindSafe;
use std::process::Command;
use std::time::{Duration, Instant};

use channelscope::canon::{integrate_generator, superoperator_matrix, GeneratorSnapshot, JumpTerm};
use channelscope::linalg::{c, identity, max_abs, pauli_x, pauli_y, pauli_z, CMatrix};
use channelscope::repr::{KrausSet, TransferMatrix, Trajectory};
use channelscope::state::random_pure;
use channelscope::witness::{scan, ScanOptions, StatePairEnsemble};
use channelscope::zoo::{ququart_kraus, ChannelSpec, Family, GridSpec};
use channelscope::Tolerances;
use channelscope_cli::certify::{self, Property};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion(id: usize, title: &str, limit: Duration, body: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(body))
        .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
    let elapsed = start.elapsed();
    let outcome = outcome.and_then(|s| {
        ensure(elapsed <= limit, || format!("runtime {elapsed:.2?} exceeds {limit:?}")).map(|()| s)
    });
    match outcome {
        Ok(summary) => {
            println!("[PASS] {id}. {title}: {summary} [{elapsed:.2?} / limit {limit:?}]");
            true
        }
        Err(reason) => {
            println!("[FAIL] {id}. {title}: {reason} [{elapsed:.2?} / limit {limit:?}]");
            false
        }
    }
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_channelscope"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect()).collect();
    (header, rows)
}

/// Composite Simpson rule, used as an oracle independent of the library quadrature.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn gamma1(m: f64, n: f64, nu: f64, t: f64) -> f64 {
    (-m * t).exp() * (m * ((-nu * t).exp() - 1.0) + nu) / n
}

fn c1_tstar() -> Check {
    let (_, rows) = parse_csv(&cli(&["tstar", "--stdout"])?);
    let row = rows.first().ok_or("no tstar row")?;
    let (closed, bis) = (row[3], row[4]);
    let exact = 1.5f64.ln();
    ensure((closed - exact).abs() <= 1e-9, || format!("t* = {closed}, expected {exact} +- 1e-9"))?;
    ensure((bis - closed).abs() <= 1e-8, || format!("bisection {bis} vs closed form {closed}, tol 1e-8"))?;
    ensure(gamma1(3.0, 2.0, 1.0, exact - 1e-6) > 0.0 && gamma1(3.0, 2.0, 1.0, exact + 1e-6) < 0.0, || {
        "oracle: gamma_1 does not change sign at ln(3/2)".into()
    })?;
    Ok(format!("t* = {closed:.12}, |t* - ln 1.5| = {:.1e} <= 1e-9, bisection diff {:.1e} <= 1e-8", (closed - exact).abs(), (bis - closed).abs()))
}

fn c2_hcla() -> Check {
    let (_, rows) = parse_csv(&cli(&["hcla", "--stdout"])?);
    let row = rows.first().ok_or("no hcla row")?;
    let (closed, quad) = (row[3], row[4]);
    let rel = ((closed - quad) / closed).abs();
    ensure(rel <= 1e-6, || format!("closed form {closed} vs quadrature {quad}: rel {rel:e} > 1e-6"))?;
    let target = 2.0 / 81.0;
    ensure((closed - target).abs() <= 1e-7, || format!("xi = {closed}, expected 2/81 +- 1e-7"))?;
    let ts = 1.5f64.ln();
    let oracle = -simpson(|t| gamma1(3.0, 2.0, 1.0, t), ts, 40.0, 400_000);
    ensure((oracle - closed).abs() / closed <= 1e-6, || format!("Simpson oracle {oracle} vs {closed}"))?;
    Ok(format!(
        "xi = {closed:.12e}, |xi - 2/81| = {:.1e} <= 1e-7, closed vs quadrature rel {rel:.1e} <= 1e-6, Simpson oracle rel {:.1e}",
        (closed - target).abs(),
        ((oracle - closed) / closed).abs()
    ))
}

fn c3_fig1() -> Check {
    let (header, rows) = parse_csv(&cli(&["fig1", "--stdout", "--grid", "0:5:500"])?);
    ensure(header == ["t", "gamma_1", "gamma_2"], || format!("header {header:?}"))?;
    ensure(rows.len() == 500, || format!("{} rows, expected 500", rows.len()))?;
    let mut worst_sum: f64 = 0.0;
    let mut crossings = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        worst_sum = worst_sum.max((r[1] + r[2] - 1.0).abs());
        if r[0] > 0.0 {
            ensure(r[2] > 0.0, || format!("gamma_2({}) = {} not positive", r[0], r[2]))?;
        }
        if i > 0 && (rows[i - 1][1] > 0.0) != (r[1] > 0.0) {
            crossings.push((rows[i - 1][0], r[0]));
        }
    }
    ensure(worst_sum <= 1e-9, || format!("max |gamma_1 + gamma_2 - nu| = {worst_sum:e} > 1e-9"))?;
    ensure(crossings.len() == 1, || format!("{} sign changes of gamma_1", crossings.len()))?;
    let (a, b) = crossings[0];
    let ts = 1.5f64.ln();
    ensure(a < ts && ts <= b, || format!("sign change in [{a}, {b}] does not bracket t*"))?;
    Ok(format!(
        "gamma_2 > 0 on (0,5], one sign change in [{a:.5}, {b:.5}] around t*, max |gamma_1 + gamma_2 - nu| = {worst_sum:.1e} <= 1e-9"
    ))
}

fn c4_quasi_verdicts() -> Check {
    let tol = Tolerances::default();
    let spec = ChannelSpec::new(Family::QuasiEnmGad);
    let grid = GridSpec::default().times();
    let channel = spec.build(5.02, &tol).map_err(|e| e.to_string())?;
    let ensemble = StatePairEnsemble::standard(2, 1).map_err(|e| e.to_string())?;
    ensure(ensemble.pairs.len() == 300, || format!("{} ensemble pairs", ensemble.pairs.len()))?;
    let mut opts = ScanOptions::new(tol);
    opts.references = channel.references().to_vec();
    let series = scan(&channel, &ensemble, &grid, &opts).map_err(|e| e.to_string())?;
    ensure(series.records.len() == 500, || "grid size".into())?;
    let ts = 1.5f64.ln();
    let (mut flagged_late, mut clean_early, mut p_clean) = (0, 0, 0);
    for r in &series.records {
        if r.t > ts + 0.01 {
            ensure(r.cp_violation(), || format!("t = {} after t* not flagged (choi {:?})", r.t, r.choi_min_eig))?;
            flagged_late += 1;
        }
        if r.t > 0.01 && r.t < ts - 0.01 {
            ensure(!r.cp_violation(), || format!("t = {} before t* flagged", r.t))?;
            clean_early += 1;
        }
        if r.t > 0.01 {
            ensure(!r.p_violation(&tol), || format!("P flag at t = {} ({:?})", r.t, r.td_derivative_max))?;
            p_clean += 1;
        }
    }
    Ok(format!(
        "CP flags on all {flagged_late} points in (t*+0.01, 5], none on {clean_early} points in (0.01, t*-0.01); P scan (300 pairs, tol {:e}) clean on {p_clean} points",
        tol.p
    ))
}

fn c5_pauli_enm() -> Check {
    let tol = Tolerances::default();
    let channel = ChannelSpec::new(Family::PauliEnm).build(5.02, &tol).map_err(|e| e.to_string())?;
    let grid = GridSpec::default().times();
    let ensemble = StatePairEnsemble::standard(2, 1).map_err(|e| e.to_string())?;
    let mut opts = ScanOptions::new(tol);
    opts.references = channel.references().to_vec();
    let series = scan(&channel, &ensemble, &grid, &opts).map_err(|e| e.to_string())?;
    let mut worst_rate: f64 = 0.0;
    for r in &series.records {
        if r.t > 0.05 {
            let expected = [0.5, 0.5, -0.5 * r.t.tanh()];
            for (got, want) in r.rates.iter().zip(expected) {
                worst_rate = worst_rate.max((got - want).abs());
            }
        }
        if r.t > 0.0 {
            ensure(r.cp_violation(), || format!("t = {} not CP-flagged", r.t))?;
        }
        ensure(!r.p_violation(&tol), || format!("P flag at t = {}", r.t))?;
    }
    ensure(worst_rate <= 1e-5, || format!("max rate error {worst_rate:e} > 1e-5"))?;

    let generator = |t: f64| {
        let terms = [
            JumpTerm::new(0.5, pauli_x()),
            JumpTerm::new(0.5, pauli_y()),
            JumpTerm::new(-0.5 * t.tanh(), pauli_z()),
        ];
        GeneratorSnapshot::from_terms(t, 2, None, &terms)
    };
    let t = 2f64.ln();
    let integrated = integrate_generator(2, generator, 1.0, 400, &tol).map_err(|e| e.to_string())?;
    let f = integrated.transfer_at(t).map_err(|e| e.to_string())?;
    let eig = [f.matrix()[(1, 1)], f.matrix()[(2, 2)], f.matrix()[(3, 3)]];
    // lambda_i = exp(-2 int (gamma_j + gamma_k)), integrals by Simpson
    let g_xy = simpson(|_| 0.5, 0.0, t, 2000);
    let g_z = simpson(|s| -0.5 * s.tanh(), 0.0, t, 2000);
    let oracle = [(-2.0 * (g_xy + g_z)).exp(), (-2.0 * (g_xy + g_z)).exp(), (-4.0 * g_xy).exp()];
    for ((got, want), paper) in eig.iter().zip(oracle).zip([0.625, 0.625, 0.25]) {
        ensure((got - want).abs() <= 1e-6 && (got - paper).abs() <= 1e-6, || {
            format!("Pauli eigenvalues {eig:?} vs quadrature oracle {oracle:?} and (5/8, 5/8, 1/4)")
        })?;
    }
    Ok(format!(
        "max rate error {worst_rate:.1e} <= 1e-5 on (0.05, 5], CP flags at every t > 0, no P flags, eigenvalues at ln 2 = ({:.9}, {:.9}, {:.9}) +- 1e-6",
        eig[0], eig[1], eig[2]
    ))
}

fn summarize(props: &[Property]) -> Check {
    let mut parts = Vec::new();
    for p in props {
        ensure(p.passed, || format!("{} failed: worst margin {:?}; {}", p.name, p.worst_margin, p.detail))?;
        parts.push(format!("{} n={} margin {:.2e}", p.name, p.samples, p.worst_margin.unwrap_or(f64::NAN)));
    }
    Ok(parts.join("; "))
}

fn c6_theorem1() -> Check {
    let props: Vec<Property> = (2..=4).map(|d| certify::theorem1(d, 50, 50, 10, 1)).collect();
    for p in &props {
        ensure(p.samples == 25_000, || format!("{}: {} samples", p.name, p.samples))?;
    }
    summarize(&props).map(|s| format!("derivative <= 1e-7 (h = 1e-6): {s}"))
}

fn c7_theorems23() -> Check {
    let tol = Tolerances::default();
    let mut props = vec![certify::theorem2(50, 1, &tol)];
    props.extend(certify::theorem3(50, 1, &tol).into_iter().take(1));
    props.push(certify::quasi_enm_damping(&GridSpec::default(), &tol));
    summarize(&props)
}

/// Ququart factors written out entry by entry; the first Pauli factor uses
/// sqrt(1 - 2k), the coefficient that makes the set complete.
fn ququart_oracle(k: f64, lambda: f64) -> Vec<CMatrix> {
    let z = c(0.0, 0.0);
    let r = |x: f64| c(x, 0.0);
    let s = k.sqrt();
    let a = (1.0 - 2.0 * k).sqrt();
    let m = [
        CMatrix::from_row_slice(4, 4, &[r(a), z, z, z, z, r(a), z, z, z, z, r(1.0), z, z, z, z, r(1.0)]),
        CMatrix::from_row_slice(4, 4, &[z, r(s), z, z, r(s), z, z, z, z, z, z, z, z, z, z, z]),
        CMatrix::from_row_slice(4, 4, &[z, c(0.0, -s), z, z, c(0.0, s), z, z, z, z, z, z, z, z, z, z, z]),
    ];
    let n = [
        CMatrix::from_row_slice(
            4,
            4,
            &[r(1.0), z, z, z, z, r(1.0), z, z, z, z, r(1.0), z, z, z, z, r((1.0 - lambda).sqrt())],
        ),
        CMatrix::from_row_slice(4, 4, &[z, z, z, z, z, z, z, z, z, z, z, r(lambda.sqrt()), z, z, z, z]),
    ];
    m.iter().flat_map(|mj| n.iter().map(move |nl| mj * nl)).filter(|p| max_abs(p) > 0.0).collect()
}

fn c8_constructions() -> Check {
    let tol = Tolerances::default();
    let wanted = [
        "nonunital_enm_min_rate",
        "nonunital_enm_generator_nonunital",
        "ququart_enm_negative_rate",
        "ququart_enm_generator_nonunital",
    ];
    let props: Vec<Property> =
        certify::constructions(&tol).into_iter().filter(|p| wanted.contains(&p.name.as_str())).collect();
    ensure(props.len() == wanted.len(), || format!("missing properties: {:?}", props.iter().map(|p| &p.name).collect::<Vec<_>>()))?;
    let summary = summarize(&props)?;
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for i in 0..=10 {
        for j in 0..=10 {
            let (k, lambda) = (0.025 * i as f64, 0.1 * j as f64);
            let ours = ququart_kraus(k, lambda, 0.0).map_err(|e| e.to_string())?;
            let expected = ququart_oracle(k, lambda);
            ensure(ours.operators().len() == expected.len(), || {
                format!("k = {k}, lambda = {lambda}: {} operators, expected {}", ours.operators().len(), expected.len())
            })?;
            for e in &expected {
                let best = ours.operators().iter().map(|o| max_abs(&(o - e))).fold(f64::INFINITY, f64::min);
                worst = worst.max(best);
            }
            samples += 1;
        }
    }
    ensure(worst <= 1e-14, || format!("ququart Kraus entrywise defect {worst:e}"))?;
    Ok(format!("{summary}; ququart Kraus entrywise defect {worst:.1e} <= 1e-14 at {samples} (k, lambda) samples"))
}

fn transpose_transfer(d: usize) -> Result<TransferMatrix, String> {
    let m = superoperator_matrix(d, |x| x.transpose()).map_err(|e| e.to_string())?;
    TransferMatrix::new(d, m).map_err(|e| e.to_string())
}

fn depolarizing_transfer(d: usize) -> Result<TransferMatrix, String> {
    let m = superoperator_matrix(d, |x| identity(d).scale(x.trace().re / d as f64)).map_err(|e| e.to_string())?;
    TransferMatrix::new(d, m).map_err(|e| e.to_string())
}

fn c9_structural() -> Check {
    let tol = Tolerances::default();
    let recon = certify::reconstruction(&tol);
    ensure(recon.passed, || format!("reconstruction: {:?} {}", recon.worst_margin, recon.detail))?;
    let residual = 1e-8 - recon.worst_margin.unwrap_or(f64::NAN);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_round_trip: f64 = 0.0;
    let mut worst_output: f64 = f64::INFINITY;
    for i in 0..200 {
        let d = 2 + i % 2;
        let k = rng.random_range(1..=d * d);
        let kraus = KrausSet::random(&mut rng, d, k);
        let direct = kraus.to_choi();
        worst_round_trip = worst_round_trip.max(kraus.to_transfer().to_choi().distance(&direct));
        ensure(direct.is_cp(tol.cp).map_err(|e| e.to_string())?, || format!("random channel {i} not CP by Choi test"))?;
        // Kraus form is CP by construction: every extended output stays positive.
        let f = kraus.to_transfer();
        for _ in 0..3 {
            let psi = random_pure(&mut rng, d * d);
            let out = f.apply_with_ancilla(psi.matrix(), d).map_err(|e| e.to_string())?;
            let min = channelscope::linalg::eigvalsh(&out).map_err(|e| e.to_string())?[0];
            worst_output = worst_output.min(min);
        }
    }
    ensure(worst_round_trip <= 1e-9, || format!("round trip defect {worst_round_trip:e} > 1e-9"))?;
    ensure(worst_output >= -1e-12, || format!("extended output eigenvalue {worst_output:e}"))?;

    // q T + (1 - q) depolarizing is CP iff q <= 1/(d + 1).
    let mut agreements = 0;
    for i in 0..200 {
        let d = 2 + i % 2;
        let q: f64 = rng.random_range(0.0..1.0);
        let boundary = 1.0 / (d as f64 + 1.0);
        if (q - boundary).abs() < 1e-6 {
            continue;
        }
        let mixed = transpose_transfer(d)?.matrix().scale(q) + depolarizing_transfer(d)?.matrix().scale(1.0 - q);
        let map = TransferMatrix::new(d, mixed).map_err(|e| e.to_string())?;
        let cp = map.to_choi().is_cp(tol.cp).map_err(|e| e.to_string())?;
        ensure(cp == (q <= boundary), || format!("d = {d}, q = {q}: Choi test says CP = {cp}"))?;
        agreements += 1;
    }
    Ok(format!(
        "reconstruction residual {residual:.1e} <= 1e-8 over {} pairs; Kraus/transfer/Choi round trip {worst_round_trip:.1e} <= 1e-9 on 200 channels; CP <=> Choi positivity on 200 random channels and {agreements} transpose mixtures",
        recon.samples
    ))
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        criterion(1, "t* reproduction", s(1), c1_tstar),
        criterion(2, "HCLA reproduction", s(1), c2_hcla),
        criterion(3, "rate curve shape", s(5), c3_fig1),
        criterion(4, "quasi-eternal verdict pattern", s(60), c4_quasi_verdicts),
        criterion(5, "Pauli eternal channel", s(60), c5_pauli_enm),
        criterion(6, "fixed-point approach certificate", s(120), c6_theorem1),
        criterion(7, "short-time rate and damping certificate", s(60), c7_theorems23),
        criterion(8, "non-unital eternal constructions", s(60), c8_constructions),
        criterion(9, "structural identities", s(60), c9_structural),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
