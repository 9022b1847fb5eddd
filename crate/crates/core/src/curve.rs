//! Scalar time curves `t -> x(t)` parametrizing channel families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Pchip;

/// An analytic family or a tabulated, monotone-cubic-interpolated curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamCurve {
    /// `value`
    Constant { value: f64 },
    /// `amplitude * exp(-rate t)`
    Exp { amplitude: f64, rate: f64 },
    /// `amplitude * (1 - exp(-rate t))`
    Saturating { amplitude: f64, rate: f64 },
    /// `amplitude * tanh(t)`
    Tanh { amplitude: f64 },
    /// `amplitude * sin^2(frequency t)`
    SinSquared { amplitude: f64, frequency: f64 },
    /// `amplitude * rate t / (1 + rate t)`
    Rational { amplitude: f64, rate: f64 },
    /// Samples `(times, values)`.
    Table(Tabulated),
}

/// Tabulated samples with a PCHIP interpolant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TableDoc", into = "TableDoc")]
pub struct Tabulated {
    times: Vec<f64>,
    values: Vec<f64>,
    interp: Pchip,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<TableDoc> for Tabulated {
    type Error = Error;
    fn try_from(doc: TableDoc) -> Result<Self> {
        Tabulated::new(doc.times, doc.values)
    }
}

impl From<Tabulated> for TableDoc {
    fn from(t: Tabulated) -> Self {
        TableDoc { times: t.times, values: t.values }
    }
}

impl Tabulated {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let interp = Pchip::new(times.clone(), values.clone())?;
        Ok(Self { times, values, interp })
    }

    fn check(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.interp.domain();
        // tolerate rounding at the ends of the table
        let slack = 1e-9 * (hi - lo);
        if t < lo - slack || t > hi + slack {
            return Err(Error::CurveOutOfRange(format!("t = {t} outside table [{lo}, {hi}]")));
        }
        Ok(())
    }
}

impl ParamCurve {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn exp(amplitude: f64, rate: f64) -> Self {
        Self::Exp { amplitude, rate }
    }

    pub fn saturating(amplitude: f64, rate: f64) -> Self {
        Self::Saturating { amplitude, rate }
    }

    pub fn tanh(amplitude: f64) -> Self {
        Self::Tanh { amplitude }
    }

    pub fn table(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Self::Table(Tabulated::new(times, values)?))
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let v = match self {
            Self::Constant { value } => *value,
            Self::Exp { amplitude, rate } => amplitude * (-rate * t).exp(),
            Self::Saturating { amplitude, rate } => amplitude * -(-rate * t).exp_m1(),
            Self::Tanh { amplitude } => amplitude * t.tanh(),
            Self::SinSquared { amplitude, frequency } => amplitude * (frequency * t).sin().powi(2),
            Self::Rational { amplitude, rate } => amplitude * rate * t / (1.0 + rate * t),
            Self::Table(tab) => {
                tab.check(t)?;
                tab.interp.value(t)
            }
        };
        if !v.is_finite() {
            return Err(Error::CurveOutOfRange(format!("non-finite value at t = {t}")));
        }
        Ok(v)
    }

    /// `1 - value(t)`, computed without cancellation where the family allows.
    pub fn complement(&self, t: f64) -> Result<f64> {
        match self {
            Self::Saturating { amplitude, rate } if *amplitude == 1.0 => Ok((-rate * t).exp()),
            _ => Ok(1.0 - self.value(t)?),
        }
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        let v = match self {
            Self::Constant { .. } => 0.0,
            Self::Exp { amplitude, rate } => -amplitude * rate * (-rate * t).exp(),
            Self::Saturating { amplitude, rate } => amplitude * rate * (-rate * t).exp(),
            Self::Tanh { amplitude } => amplitude / t.cosh().powi(2),
            Self::SinSquared { amplitude, frequency } => {
                amplitude * frequency * (2.0 * frequency * t).sin()
            }
            Self::Rational { amplitude, rate } => amplitude * rate / (1.0 + rate * t).powi(2),
            Self::Table(tab) => {
                tab.check(t)?;
                tab.interp.derivative(t)
            }
        };
        Ok(v)
    }

    /// Largest time at which the curve can be evaluated.
    pub fn t_max(&self) -> f64 {
        match self {
            Self::Table(tab) => tab.interp.domain().1,
            _ => f64::INFINITY,
        }
    }

    /// Checks that the curve stays in `[0, 1]` at `samples` points of `[0, t_max]`.
    pub fn check_probability(&self, t_max: f64, samples: usize) -> Result<()> {
        for k in 0..=samples {
            let t = t_max * k as f64 / samples as f64;
            let v = self.value(t)?;
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::CurveOutOfRange(format!("value {v} at t = {t} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Admission test for a damping curve: starts at zero, cannot decrease
    /// initially, and stays in `[0, 1]`.
    pub fn damping_admission(&self, t_max: f64, samples: usize) -> Result<DampingAdmission> {
        let h = 1e-7;
        let start = self.value(0.0)?;
        let initial_slope = (self.value(h)? - start) / h;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let upper = t_max.min(self.t_max());
        for k in 0..=samples {
            let v = self.value(upper * k as f64 / samples as f64)?;
            min = min.min(v);
            max = max.max(v);
        }
        Ok(DampingAdmission { start, initial_slope, min, max })
    }
}

/// Measurements behind [`ParamCurve::damping_admission`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DampingAdmission {
    pub start: f64,
    /// Forward-difference slope at `t = 0`.
    pub initial_slope: f64,
    pub min: f64,
    pub max: f64,
}

impl DampingAdmission {
    pub fn admitted(&self) -> bool {
        self.start.abs() <= 1e-12
            && self.initial_slope >= -1e-9
            && self.min >= -1e-12
            && self.max <= 1.0 + 1e-12
    }

    /// Signed distance to the nearest admission boundary (negative on failure).
    pub fn margin(&self) -> f64 {
        [
            1e-12 - self.start.abs(),
            self.initial_slope + 1e-9,
            self.min + 1e-12,
            1.0 + 1e-12 - self.max,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.admitted() {
            Ok(self)
        } else {
            Err(Error::CurveOutOfRange(format!(
                "damping curve not admissible: lambda(0) = {:e}, slope(0) = {:e}, range [{}, {}]",
                self.start, self.initial_slope, self.min, self.max
            )))
        }
    }
}
