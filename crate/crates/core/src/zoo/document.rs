//! Channel-specification documents and their realization as trajectories.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::canon::integrate_generator;
use crate::curve::ParamCurve;
use crate::error::{Error, Result};
use crate::linalg::{pauli_x, pauli_y, pauli_z, CMatrix};
use crate::repr::{FnTrajectory, TransferMatrix, Trajectory};
use crate::state::DensityMatrix;
use crate::tolerance::Tolerances;

use super::{
    gad_fixed_point, nonunital_enm_generator, pauli_enm, phase_covariant_generator, qubit_gad,
    quasi_enm_gad, ququart_enm, qudit_gad, sigma_minus, sigma_plus, QuasiEnmParams, QubitGadParams,
    QuditGadParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    QubitGad,
    QuditGad,
    QuasiEnmGad,
    PauliEnm,
    NonunitalEnm,
    PhaseCovariant,
    QuquartEnm,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Self::QubitGad => "qubit_gad",
            Self::QuditGad => "qudit_gad",
            Self::QuasiEnmGad => "quasi_enm_gad",
            Self::PauliEnm => "pauli_enm",
            Self::NonunitalEnm => "nonunital_enm",
            Self::PhaseCovariant => "phase_covariant",
            Self::QuquartEnm => "ququart_enm",
        }
    }
}

/// Uniform time grid including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { t_min: 0.0, t_max: 5.0, points: 500 }
    }
}

impl GridSpec {
    pub fn new(t_min: f64, t_max: f64, points: usize) -> Result<Self> {
        let grid = Self { t_min, t_max, points };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min >= 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) || self.points < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs 0 <= t_min < t_max and at least 2 points, got {}:{}:{}",
                self.t_min, self.t_max, self.points
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.t_max - self.t_min) / (self.points - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points)
            .map(|k| if k + 1 == self.points { self.t_max } else { self.t_min + k as f64 * h })
            .collect()
    }
}

/// A channel family with its numeric parameters, curves and scan grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub family: Family,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub curves: BTreeMap<String, ParamCurve>,
    #[serde(default)]
    pub grid: GridSpec,
}

/// A realized channel: a trajectory plus the reference jump operators used
/// to label its canonical rates.
pub struct Channel {
    pub family: Family,
    dim: usize,
    trajectory: Box<dyn Trajectory + Send>,
    references: Vec<CMatrix>,
    fixed_point: Option<DensityMatrix>,
}

impl std::fmt::Debug for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Channel").field("family", &self.family).field("dim", &self.dim).finish()
    }
}

impl Trajectory for Channel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn transfer_at(&self, t: f64) -> Result<TransferMatrix> {
        self.trajectory.transfer_at(t)
    }
}

impl Channel {
    /// Jump operators, one per rate column, or empty when rates are reported ascending.
    pub fn references(&self) -> &[CMatrix] {
        &self.references
    }

    pub fn fixed_point(&self) -> Option<&DensityMatrix> {
        self.fixed_point.as_ref()
    }
}

fn qubit_references() -> Vec<CMatrix> {
    vec![sigma_plus().scale(SQRT_2), sigma_minus().scale(SQRT_2), pauli_z()]
}

impl ChannelSpec {
    pub fn new(family: Family) -> Self {
        Self { family, params: BTreeMap::new(), curves: BTreeMap::new(), grid: GridSpec::default() }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_curve(mut self, name: &str, curve: ParamCurve) -> Self {
        self.curves.insert(name.to_string(), curve);
        self
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }

    fn allowed(&self) -> (&'static [&'static str], &'static [&'static str]) {
        match self.family {
            Family::QubitGad => (&[], &["p", "lambda"]),
            Family::QuditGad => (&[], &["lambda"]),
            Family::QuasiEnmGad => (&["m", "n", "nu"], &[]),
            Family::PauliEnm => (&["c"], &[]),
            Family::NonunitalEnm => (&[], &["gamma"]),
            Family::PhaseCovariant => (&[], &["gamma_z", "gamma"]),
            Family::QuquartEnm => (&["c", "p"], &["lambda"]),
        }
    }

    /// Rejects parameter and curve names the family does not use.
    pub fn validate_names(&self) -> Result<()> {
        let (params, curves) = self.allowed();
        for name in self.params.keys() {
            let populations = self.family == Family::QuditGad && name.starts_with("p_");
            if !params.contains(&name.as_str()) && !populations {
                return Err(Error::BadParams(format!("{} has no parameter '{name}'", self.family.name())));
            }
        }
        for name in self.curves.keys() {
            if !curves.contains(&name.as_str()) {
                return Err(Error::BadParams(format!("{} has no curve '{name}'", self.family.name())));
            }
        }
        Ok(())
    }

    fn param(&self, name: &str, default: f64) -> f64 {
        self.params.get(name).copied().unwrap_or(default)
    }

    fn curve(&self, name: &str, default: Option<ParamCurve>) -> Result<ParamCurve> {
        match (self.curves.get(name), default) {
            (Some(c), _) => Ok(c.clone()),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::BadParams(format!(
                "{} requires curve '{name}'",
                self.family.name()
            ))),
        }
    }

    /// Populations `p_0, p_1, ...` of a qudit GAD spec.
    pub fn populations(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        while let Some(v) = self.params.get(&format!("p_{}", out.len())) {
            out.push(*v);
        }
        let named = self.params.keys().filter(|k| k.starts_with("p_")).count();
        if named != out.len() {
            return Err(Error::BadParams("populations must be named p_0, p_1, ... without gaps".into()));
        }
        Ok(out)
    }

    /// The damping curve of GAD-type families, if any.
    pub fn damping_curve(&self) -> Result<Option<ParamCurve>> {
        Ok(match self.family {
            Family::QubitGad | Family::QuditGad => Some(self.curve("lambda", None)?),
            Family::QuasiEnmGad => Some(self.quasi_enm()?.lambda_curve()),
            Family::QuquartEnm => Some(self.curve("lambda", Some(ParamCurve::saturating(1.0, 1.0)))?),
            _ => None,
        })
    }

    pub fn quasi_enm(&self) -> Result<QuasiEnmParams> {
        QuasiEnmParams::new(self.param("m", 3.0), self.param("n", 2.0), self.param("nu", 1.0))
    }

    /// Realizes the channel on `[0, horizon]`. Generator-defined families are
    /// integrated numerically, so `horizon` should cover every time that will
    /// be queried.
    pub fn build(&self, horizon: f64, tol: &Tolerances) -> Result<Channel> {
        self.validate_names()?;
        let family = self.family;
        let kraus = |dim: usize, f: Box<dyn Fn(f64) -> Result<TransferMatrix> + Send + Sync>| {
            Box::new(FnTrajectory::new(dim, f)) as Box<dyn Trajectory + Send>
        };
        let (dim, trajectory, references, fixed_point) = match family {
            Family::QubitGad => {
                let params = QubitGadParams::new(self.curve("p", None)?, self.curve("lambda", None)?)?;
                let traj = kraus(2, Box::new(move |t| Ok(qubit_gad(&params, t)?.to_transfer())));
                (2, traj, qubit_references(), None)
            }
            Family::QuditGad => {
                let params = QuditGadParams::new(self.populations()?, self.curve("lambda", None)?)?;
                let fixed = gad_fixed_point(&params)?.state;
                let d = params.dim();
                let traj = kraus(d, Box::new(move |t| Ok(qudit_gad(&params, t)?.to_transfer())));
                (d, traj, Vec::new(), Some(fixed))
            }
            Family::QuasiEnmGad => {
                let params = self.quasi_enm()?;
                let traj = kraus(2, Box::new(move |t| Ok(quasi_enm_gad(&params, t)?.to_transfer())));
                (2, traj, qubit_references(), None)
            }
            Family::PauliEnm => {
                let c = self.param("c", 1.0);
                pauli_enm(c, 0.0)?;
                let traj = kraus(2, Box::new(move |t| Ok(pauli_enm(c, t)?.to_transfer())));
                (2, traj, vec![pauli_x(), pauli_y(), pauli_z()], Some(DensityMatrix::maximally_mixed(2)))
            }
            Family::NonunitalEnm => {
                let gamma = self.curve("gamma", Some(ParamCurve::constant(1.0)))?;
                let steps = integration_steps(horizon);
                let traj = integrate_generator(2, move |t| nonunital_enm_generator(&gamma, t), horizon, steps, tol)?;
                (2, Box::new(traj) as Box<dyn Trajectory + Send>, qubit_references(), None)
            }
            Family::PhaseCovariant => {
                let gamma_z = self.curve("gamma_z", Some(ParamCurve::tanh(-0.5)))?;
                let gamma = self.curve("gamma", Some(ParamCurve::constant(1.5)))?;
                let steps = integration_steps(horizon);
                let traj = integrate_generator(
                    2,
                    move |t| phase_covariant_generator(&gamma_z, &gamma, t),
                    horizon,
                    steps,
                    tol,
                )?;
                (2, Box::new(traj) as Box<dyn Trajectory + Send>, qubit_references(), None)
            }
            Family::QuquartEnm => {
                let c = self.param("c", 1.0);
                let p = self.param("p", 0.0);
                let lambda = self.curve("lambda", Some(ParamCurve::saturating(1.0, 1.0)))?;
                QubitGadParams::new(ParamCurve::constant(p), lambda.clone())?;
                ququart_enm(c, &lambda, p, 0.0)?;
                let traj = kraus(4, Box::new(move |t| Ok(ququart_enm(c, &lambda, p, t)?.to_transfer())));
                (4, traj, Vec::new(), None)
            }
        };
        Ok(Channel { family, dim, trajectory, references, fixed_point })
    }
}

fn integration_steps(horizon: f64) -> usize {
    ((horizon * 200.0).ceil() as usize).max(100)
}
