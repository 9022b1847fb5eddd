use std::path::{Path, PathBuf};

use channelscope::canon::{canonical_rates, generator_from_trajectory, rates_qubit_gad};
use channelscope::numeric::bisect;
use channelscope::repr::Trajectory;
use channelscope::witness::{hcla_measure, intermediate_choi_min, scan, ScanOptions, StatePairEnsemble};
use channelscope::zoo::{hcla_closed_form, hcla_quadrature, t_star, ChannelSpec, Family, GridSpec, QuasiEnmParams};
use channelscope::Tolerances;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::args::{Command, Common, QuasiEnmArgs, Suite};
use crate::certify::{channel_properties, run_suites, Report};
use crate::error::CliError;
use crate::output::{num, opt, Csv, Sink};

/// Largest fraction of grid points allowed to fail before a scan is rejected.
const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Extra trajectory range past the grid end, covering difference stencils.
const HORIZON_MARGIN: f64 = 0.02;

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Scan { common } => cmd_scan(&common),
        Command::Fig1 { common, params } => cmd_fig1(&common, &params),
        Command::Fig2 { common, n, nu, m_range, verify_every } => cmd_fig2(&common, n, nu, &m_range, verify_every),
        Command::Certify { common, suites } => cmd_certify(&common, &suites),
        Command::ChoiSpectrum { common } => cmd_choi_spectrum(&common),
        Command::Tstar { common, params } => cmd_tstar(&common, &params),
        Command::Hcla { common, params } => cmd_hcla(&common, &params),
    }
}

fn sink(common: &Common, default: &str) -> Sink {
    match (&common.out, common.stdout) {
        (_, true) => Sink::Stdout,
        (Some(p), false) => Sink::File(p.clone()),
        (None, false) => Sink::File(PathBuf::from(default)),
    }
}

pub fn tolerances(common: &Common) -> Result<Tolerances, CliError> {
    let mut tol = Tolerances::default();
    for (name, value) in &common.tol {
        tol.set(name, *value).map_err(|e| CliError::Parse(e.to_string()))?;
    }
    Ok(tol)
}

/// Parses a specification document, applying the `--grid` override.
pub fn load_spec(path: &Path, grid: Option<GridSpec>) -> Result<ChannelSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut spec: ChannelSpec =
        toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    if let Some(g) = grid {
        spec.grid = g;
    }
    spec.validate_names().map_err(|e| CliError::Parse(e.to_string()))?;
    spec.grid.validate().map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(spec)
}

/// SHA-256 of the canonical TOML rendering of a specification.
pub fn spec_hash(spec: &ChannelSpec) -> Result<String, CliError> {
    let canonical = toml::to_string(spec).map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

fn require_spec(common: &Common) -> Result<ChannelSpec, CliError> {
    let path = common.spec.as_ref().ok_or_else(|| CliError::Parse("--spec is required".into()))?;
    load_spec(path, common.grid)
}

fn grid_of(common: &Common, spec: Option<&ChannelSpec>) -> GridSpec {
    common.grid.or(spec.map(|s| s.grid)).unwrap_or_default()
}

/// Quasi-eternal parameters from the spec when it names that family,
/// otherwise from the flags.
fn quasi_params(common: &Common, flags: &QuasiEnmArgs) -> Result<QuasiEnmParams, CliError> {
    if let Some(path) = &common.spec {
        let spec = load_spec(path, common.grid)?;
        if spec.family != Family::QuasiEnmGad {
            return Err(CliError::Parse(format!("expected a quasi_enm_gad spec, got {}", spec.family.name())));
        }
        return Ok(spec.quasi_enm()?);
    }
    Ok(QuasiEnmParams::new(flags.m, flags.n, flags.nu)?)
}

pub fn scan_csv(spec: &ChannelSpec, tol: &Tolerances, seed: u64) -> Result<String, CliError> {
    let grid = spec.grid.times();
    let channel = spec.build(spec.grid.t_max + HORIZON_MARGIN, tol)?;
    let d = channel.dim();
    let ensemble = StatePairEnsemble::standard(d, seed)?;
    let mut opts = ScanOptions::new(*tol);
    opts.references = channel.references().to_vec();
    opts.spec_hash = Some(spec_hash(spec)?);
    let series = scan(&channel, &ensemble, &grid, &opts)?;
    let failures = series.failures();
    for r in series.records.iter().filter(|r| !r.errors.is_empty()) {
        eprintln!("t = {}: {}", r.t, r.errors.join("; "));
    }
    if failures as f64 > MAX_FAILURE_FRACTION * grid.len() as f64 {
        return Err(CliError::Numerical(format!("{failures} of {} grid points failed", grid.len())));
    }
    let k = d * d - 1;
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|j| format!("gamma_{j}")));
    header.extend(["choi_min_eig", "td_deriv_max", "trace_D", "hmax_DDT"].map(String::from));
    let mut csv = Csv::new(header);
    for r in &series.records {
        let mut row = vec![num(r.t)];
        row.extend((0..k).map(|j| opt(r.rates.get(j).copied())));
        row.extend([opt(r.choi_min_eig), opt(r.td_derivative_max), opt(r.trace_d), opt(r.hmax_ddt)]);
        csv.push(row);
    }
    Ok(csv.render())
}

fn cmd_scan(common: &Common) -> Result<(), CliError> {
    let spec = require_spec(common)?;
    let csv = scan_csv(&spec, &tolerances(common)?, common.seed)?;
    sink(common, "scan.csv").emit(&csv)
}

pub fn fig1_csv(params: &QuasiEnmParams, grid: &GridSpec) -> String {
    let mut csv = Csv::new(["t", "gamma_1", "gamma_2"]);
    for t in grid.times() {
        csv.push(vec![num(t), num(params.gamma1(t)), num(params.gamma2(t))]);
    }
    csv.render()
}

fn cmd_fig1(common: &Common, flags: &QuasiEnmArgs) -> Result<(), CliError> {
    let params = quasi_params(common, flags)?;
    let spec = common.spec.as_ref().map(|p| load_spec(p, common.grid)).transpose()?;
    let grid = grid_of(common, spec.as_ref());
    sink(common, "fig1.csv").emit(&fig1_csv(&params, &grid))
}

pub fn fig2_csv(n: f64, nu: f64, m_range: &GridSpec, verify_every: usize) -> Result<String, CliError> {
    let mut csv = Csv::new(["m", "xi_hcla"]);
    for (i, m) in m_range.times().into_iter().enumerate() {
        let params = QuasiEnmParams::new(m, n, nu)?;
        let xi = hcla_closed_form(&params)?;
        if verify_every > 0 && i % verify_every == 0 {
            let quad = hcla_quadrature(&params, 1e-10)?.value;
            let rel = ((xi - quad) / xi).abs();
            if !(rel <= 1e-6) {
                return Err(CliError::Numerical(format!(
                    "m = {m}: closed form {xi:e} and quadrature {quad:e} differ by {rel:e}"
                )));
            }
        }
        csv.push(vec![num(m), num(xi)]);
    }
    Ok(csv.render())
}

fn cmd_fig2(common: &Common, n: f64, nu: f64, m_range: &GridSpec, verify_every: usize) -> Result<(), CliError> {
    sink(common, "fig2.csv").emit(&fig2_csv(n, nu, m_range, verify_every)?)
}

/// Closed-form onset and an independent bisection on the first rate.
pub fn tstar_values(params: &QuasiEnmParams) -> Result<(f64, f64), CliError> {
    let closed = t_star(params)?;
    let mut hi = 1.0;
    while params.gamma1(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(CliError::Numerical("no sign change of gamma_1 found".into()));
        }
    }
    let root = bisect(|t| Ok(params.gamma1(t)), 0.0, hi, 1e-13)?;
    Ok((closed, root))
}

fn cmd_tstar(common: &Common, flags: &QuasiEnmArgs) -> Result<(), CliError> {
    let params = quasi_params(common, flags)?;
    let (closed, root) = tstar_values(&params)?;
    let mut csv = Csv::new(["m", "n", "nu", "t_star", "t_star_bisection"]);
    csv.push(vec![num(params.m), num(params.n), num(params.nu), num(closed), num(root)]);
    sink(common, "tstar.csv").emit(&csv.render())
}

fn cmd_hcla(common: &Common, flags: &QuasiEnmArgs) -> Result<(), CliError> {
    let tol = tolerances(common)?;
    let spec = common.spec.as_ref().map(|p| load_spec(p, common.grid)).transpose()?;
    let csv = match spec {
        Some(spec) if spec.family != Family::QuasiEnmGad => hcla_numeric_csv(&spec, &tol)?,
        _ => {
            let params = quasi_params(common, flags)?;
            let closed = hcla_closed_form(&params)?;
            let quad = hcla_quadrature(&params, 1e-10)?.value;
            let mut csv = Csv::new(["m", "n", "nu", "xi_closed_form", "xi_quadrature"]);
            csv.push(vec![num(params.m), num(params.n), num(params.nu), num(closed), num(quad)]);
            csv.render()
        }
    };
    sink(common, "hcla.csv").emit(&csv)
}

/// Integrated negativity on `[0, t_max]`: closed-form rates for qubit GAD,
/// extracted canonical rates otherwise.
fn hcla_numeric_csv(spec: &ChannelSpec, tol: &Tolerances) -> Result<String, CliError> {
    let t_max = spec.grid.t_max;
    let q = if let (Family::QubitGad, Some(p), Some(l)) =
        (spec.family, spec.curves.get("p"), spec.curves.get("lambda"))
    {
        spec.build(t_max, tol)?;
        hcla_measure(|t| rates_qubit_gad(p, l, t).map(|(a, b)| vec![a, b]), t_max, tol)?
    } else {
        let channel = spec.build(t_max + HORIZON_MARGIN, tol)?;
        hcla_measure(
            |t| Ok(canonical_rates(&generator_from_trajectory(&channel, t, tol.fd_step, tol)?, tol)?.rates),
            t_max,
            tol,
        )?
    };
    let mut csv = Csv::new(["t_max", "xi", "error_estimate"]);
    csv.push(vec![num(t_max), num(q.value), num(q.error)]);
    Ok(csv.render())
}

pub fn choi_spectrum_csv(spec: &ChannelSpec, tol: &Tolerances) -> Result<String, CliError> {
    let channel = spec.build(spec.grid.t_max + HORIZON_MARGIN, tol)?;
    let n = channel.dim() * channel.dim();
    let eps = tol.intermediate_eps;
    let rows: Vec<Result<Vec<String>, CliError>> = spec
        .grid
        .times()
        .into_par_iter()
        .map(|t| {
            let eig = channel.transfer_at(t)?.to_choi().eigenvalues()?;
            let (inter, cond) = intermediate_choi_min(&channel, t, eps, tol)?;
            let mut row = vec![num(t)];
            row.extend(eig.iter().map(|x| num(*x)));
            row.extend([num(inter), num(tol.cp_threshold(eps, cond))]);
            Ok(row)
        })
        .collect();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|j| format!("choi_eig_{j}")));
    header.extend(["intermediate_min_eig", "cp_threshold"].map(String::from));
    let mut csv = Csv::new(header);
    let total = rows.len();
    let mut failures = 0;
    for row in rows {
        match row {
            Ok(r) => csv.push(r),
            Err(e) => {
                eprintln!("{e}");
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Numerical(format!("{failures} of {total} grid points failed")));
    }
    Ok(csv.render())
}

fn cmd_choi_spectrum(common: &Common) -> Result<(), CliError> {
    let spec = require_spec(common)?;
    let csv = choi_spectrum_csv(&spec, &tolerances(common)?)?;
    sink(common, "choi_spectrum.csv").emit(&csv)
}

pub fn certify_report(
    spec: Option<&ChannelSpec>,
    suites: &[Suite],
    seed: u64,
    tol: &Tolerances,
) -> Result<Report, CliError> {
    let suites: &[Suite] = if suites.is_empty() { &Suite::ALL } else { suites };
    let mut properties = run_suites(suites, seed, tol);
    let (hash, channel) = match spec {
        Some(spec) => {
            let (props, report) = channel_properties(spec, tol, seed);
            properties.extend(props);
            (Some(spec_hash(spec)?), report)
        }
        None => (None, None),
    };
    Ok(Report::new(seed, hash, properties, channel))
}

fn cmd_certify(common: &Common, suites: &[Suite]) -> Result<(), CliError> {
    let tol = tolerances(common)?;
    let spec = common.spec.as_ref().map(|p| load_spec(p, common.grid)).transpose()?;
    let report = certify_report(spec.as_ref(), suites, common.seed, &tol)?;
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    sink(common, "certificate.json").emit(&json)?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Certify(report.failing().join(", ")))
    }
}
