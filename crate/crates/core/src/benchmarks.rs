//! The two algebraic benchmark models: piston cycle time and the midpoint
//! voltage of a transformerless push-pull circuit.
//!
//! Both expose hand-derived natural-scale gradients. The value and gradient
//! paths share their intermediates.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{Model, ParameterSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkId {
    Piston,
    Circuit,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 2] = [BenchmarkId::Piston, BenchmarkId::Circuit];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkId::Piston => "piston",
            BenchmarkId::Circuit => "circuit",
        }
    }

    pub fn build(self) -> Box<dyn Model> {
        match self {
            BenchmarkId::Piston => Box::new(Piston::new()),
            BenchmarkId::Circuit => Box::new(Circuit::new()),
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "piston" => Ok(BenchmarkId::Piston),
            "circuit" | "otlcircuit" => Ok(BenchmarkId::Circuit),
            other => Err(Error::Precondition(format!(
                "unknown model '{other}' (expected piston or circuit)"
            ))),
        }
    }
}

/// Cycle time `t` (seconds) of a cylindrical piston.
///
/// Inputs in order: `M, S, V0, k, P0, Ta, T0`.
#[derive(Debug, Clone)]
pub struct Piston {
    params: Vec<ParameterSpec>,
}

impl Piston {
    pub fn new() -> Self {
        Self {
            params: vec![
                ParameterSpec::new("M", 30.0, 60.0, "kg"),
                ParameterSpec::new("S", 0.005, 0.020, "m^2"),
                ParameterSpec::new("V0", 0.002, 0.010, "m^3"),
                ParameterSpec::new("k", 1000.0, 5000.0, "N/m"),
                ParameterSpec::new("P0", 90000.0, 110000.0, "N/m^2"),
                ParameterSpec::new("Ta", 290.0, 296.0, "K"),
                ParameterSpec::new("T0", 340.0, 360.0, "K"),
            ],
        }
    }

    fn eval_impl(z: &[f64], want_grad: bool) -> (f64, Option<[f64; 7]>) {
        const G: f64 = 19.62;
        let [m, s, v0, k, p0, ta, t0] = [z[0], z[1], z[2], z[3], z[4], z[5], z[6]];

        let q = p0 * v0 * ta / t0;
        let a = p0 * s + G * m - k * v0 / s;
        let r = (a * a + 4.0 * k * q).sqrt();
        let vol = s / (2.0 * k) * (r - a);
        let d = k + s * s * q / (vol * vol);
        let t = 2.0 * PI * (m / d).sqrt();
        if !want_grad {
            return (t, None);
        }

        // Indices into the input vector.
        const IM: usize = 0;
        const IS: usize = 1;
        const IV0: usize = 2;
        const IK: usize = 3;
        const IP0: usize = 4;
        const ITA: usize = 5;
        const IT0: usize = 6;

        let mut dq = [0.0; 7];
        dq[IP0] = q / p0;
        dq[IV0] = q / v0;
        dq[ITA] = q / ta;
        dq[IT0] = -q / t0;

        let mut da = [0.0; 7];
        da[IM] = G;
        da[IS] = p0 + k * v0 / (s * s);
        da[IV0] = -k / s;
        da[IK] = -v0 / s;
        da[IP0] = s;

        let mut grad = [0.0; 7];
        for i in 0..7 {
            let dkq = if i == IK { q } else { 0.0 } + k * dq[i];
            let dr = (a * da[i] + 2.0 * dkq) / r;
            let mut dvol = s / (2.0 * k) * (dr - da[i]);
            if i == IS {
                dvol += (r - a) / (2.0 * k);
            }
            if i == IK {
                dvol -= vol / k;
            }
            let ds2q = if i == IS { 2.0 * s * q } else { 0.0 } + s * s * dq[i];
            let mut dd = ds2q / (vol * vol) - 2.0 * s * s * q / (vol * vol * vol) * dvol;
            if i == IK {
                dd += 1.0;
            }
            let dm = if i == IM { 1.0 / m } else { 0.0 };
            grad[i] = 0.5 * t * (dm - dd / d);
        }
        (t, Some(grad))
    }
}

impl Default for Piston {
    fn default() -> Self {
        Self::new()
    }
}

impl Model for Piston {
    fn parameters(&self) -> &[ParameterSpec] {
        &self.params
    }

    fn evaluate(&self, natural: &[f64]) -> f64 {
        Self::eval_impl(natural, false).0
    }

    fn gradient(&self, natural: &[f64]) -> Vec<f64> {
        Self::eval_impl(natural, true).1.unwrap().to_vec()
    }

    fn value_and_gradient(&self, natural: &[f64]) -> (f64, Vec<f64>) {
        let (t, g) = Self::eval_impl(natural, true);
        (t, g.unwrap().to_vec())
    }
}

/// Midpoint voltage `V` of a transformerless push-pull circuit.
///
/// Inputs in order: `Rb1, Rb2, Rf, Rc1, Rc2, beta`.
#[derive(Debug, Clone)]
pub struct Circuit {
    params: Vec<ParameterSpec>,
}

impl Circuit {
    pub fn new() -> Self {
        Self {
            params: vec![
                ParameterSpec::new("Rb1", 50.0, 150.0, "K-Ohms"),
                ParameterSpec::new("Rb2", 25.0, 70.0, "K-Ohms"),
                ParameterSpec::new("Rf", 0.5, 3.0, "K-Ohms"),
                ParameterSpec::new("Rc1", 1.2, 2.5, "K-Ohms"),
                ParameterSpec::new("Rc2", 0.25, 1.20, "K-Ohms"),
                ParameterSpec::new("beta", 50.0, 300.0, "Amperes"),
            ],
        }
    }

    fn eval_impl(z: &[f64], want_grad: bool) -> (f64, Option<[f64; 6]>) {
        let [rb1, rb2, rf, rc1, rc2, beta] = [z[0], z[1], z[2], z[3], z[4], z[5]];

        let vb1 = 12.0 * rb2 / (rb1 + rb2);
        let b = beta * (rc2 + 9.0);
        let d = b + rf;
        let u = b / d;
        let v = (vb1 + 0.74) * u + 11.35 * rf / d + 0.74 * rf * u / rc1;
        if !want_grad {
            return (v, None);
        }

        let d2 = d * d;
        let sum2 = (rb1 + rb2) * (rb1 + rb2);
        // dV/dB with B = beta (Rc2 + 9)
        let dv_db = (vb1 + 0.74) * rf / d2 - 11.35 * rf / d2 + 0.74 * rf * rf / (d2 * rc1);
        let grad = [
            -12.0 * rb2 / sum2 * u,
            12.0 * rb1 / sum2 * u,
            -(vb1 + 0.74) * b / d2 + 11.35 * b / d2 + 0.74 * (u - rf * b / d2) / rc1,
            -0.74 * rf * u / (rc1 * rc1),
            dv_db * beta,
            dv_db * (rc2 + 9.0),
        ];
        (v, Some(grad))
    }
}

impl Default for Circuit {
    fn default() -> Self {
        Self::new()
    }
}

impl Model for Circuit {
    fn parameters(&self) -> &[ParameterSpec] {
        &self.params
    }

    fn evaluate(&self, natural: &[f64]) -> f64 {
        Self::eval_impl(natural, false).0
    }

    fn gradient(&self, natural: &[f64]) -> Vec<f64> {
        Self::eval_impl(natural, true).1.unwrap().to_vec()
    }

    fn value_and_gradient(&self, natural: &[f64]) -> (f64, Vec<f64>) {
        let (v, g) = Self::eval_impl(natural, true);
        (v, g.unwrap().to_vec())
    }
}
