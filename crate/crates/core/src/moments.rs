//! Single-particle and coincidence momentum statistics, and the variance
//! ratio `R = σ_single / σ_coinc`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::amplitude::AmplitudeField;
use crate::error::{Error, Result};
use crate::params::{AxisNodes, ControlParams};

/// Minimum fraction of the total norm a conditional slice must carry.
pub const SLICE_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Atomic recoil momentum Δq.
    #[default]
    Q,
    /// Photon detuning Δk.
    K,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::Q => Axis::K,
            Axis::K => Axis::Q,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Q => "q",
            Axis::K => "k",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" | "Q" => Ok(Axis::Q),
            "k" | "K" => Ok(Axis::K),
            other => Err(Error::InvalidParameter(format!("unknown axis '{other}' (expected q or k)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceReport {
    pub axis: Axis,
    pub single_variance: f64,
    pub coinc_variance: f64,
    pub fixed_axis: Axis,
    /// Requested value of the conditioning coordinate.
    pub fixed_value: f64,
    /// Grid node actually used for the slice.
    pub fixed_node: f64,
    pub ratio: f64,
}

/// Marginal probability density along `axis` at each of its nodes:
/// `p(x_i) = Σ_j w_j |A(x_i, y_j)|²`.
pub fn marginal_density(field: &AmplitudeField, axis: Axis) -> Vec<f64> {
    let (q, k) = field.axes();
    let values = field.values();
    match axis {
        Axis::Q => {
            values.outer_iter().map(|row| row.iter().zip(&k.weights).map(|(v, w)| w * v.norm_sqr()).sum()).collect()
        }
        Axis::K => {
            let mut density = vec![0.0; k.len()];
            for (row, wq) in values.outer_iter().zip(&q.weights) {
                for (d, v) in density.iter_mut().zip(row.iter()) {
                    *d += wq * v.norm_sqr();
                }
            }
            density
        }
    }
}

/// Unconditional (single-particle) variance along `axis`.
pub fn unconditional_variance(field: &AmplitudeField, axis: Axis) -> Result<f64> {
    let (q, k) = field.axes();
    let nodes = pick(axis, &q, &k);
    let density = marginal_density(field, axis);
    weighted_variance(&nodes.nodes, &nodes.weights, &density).ok_or(Error::DegenerateField)
}

/// Variance along `axis` conditioned on the other coordinate, evaluated on
/// the grid slice nearest `fixed_value`.
pub fn conditional_variance(field: &AmplitudeField, axis: Axis, fixed_value: f64) -> Result<f64> {
    conditional(field, axis, fixed_value).map(|(var, _)| var)
}

fn conditional(field: &AmplitudeField, axis: Axis, fixed_value: f64) -> Result<(f64, f64)> {
    let (q, k) = field.axes();
    let nodes = pick(axis, &q, &k);
    let fixed = pick(axis.other(), &q, &k);
    let grid = field.grid();
    let (range_lo, range_hi) = match axis.other() {
        Axis::Q => (grid.q_min, grid.q_max),
        Axis::K => (grid.k_min, grid.k_max),
    };
    if !(fixed_value.is_finite() && fixed_value >= range_lo && fixed_value <= range_hi) {
        return Err(Error::InvalidParameter(format!(
            "conditioning value {fixed_value} lies outside the {} range [{range_lo}, {range_hi}]",
            axis.other()
        )));
    }
    let slot = fixed.nearest(fixed_value);
    let values = field.values();
    let slice: Vec<f64> = match axis {
        Axis::Q => values.column(slot).iter().map(|v| v.norm_sqr()).collect(),
        Axis::K => values.row(slot).iter().map(|v| v.norm_sqr()).collect(),
    };

    let total = field.norm_squared();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::DegenerateField);
    }
    let slice_mass: f64 = slice.iter().zip(&nodes.weights).map(|(p, w)| p * w).sum::<f64>() * fixed.weights[slot];
    let relative = slice_mass / total;
    if !(relative > SLICE_NORM_FLOOR) {
        return Err(Error::SliceUnderflow { axis: axis.other().name(), value: fixed_value, relative });
    }
    let var = weighted_variance(&nodes.nodes, &nodes.weights, &slice).ok_or(Error::SliceUnderflow {
        axis: axis.other().name(),
        value: fixed_value,
        relative,
    })?;
    Ok((var, fixed.nodes[slot]))
}

/// Variance ratio report for `axis` conditioned at `fixed_value` of the
/// other coordinate; `ratio` is the quotient of standard deviations.
pub fn ratio_r(field: &AmplitudeField, axis: Axis, fixed_value: f64) -> Result<VarianceReport> {
    let single = unconditional_variance(field, axis)?;
    let (coinc, node) = conditional(field, axis, fixed_value)?;
    if !(coinc > 0.0) {
        return Err(Error::DegenerateField);
    }
    Ok(VarianceReport {
        axis,
        single_variance: single,
        coinc_variance: coinc,
        fixed_axis: axis.other(),
        fixed_value,
        fixed_node: node,
        ratio: (single / coinc).sqrt(),
    })
}

/// Large-η closed form `R ≈ (η + √(2/π)·(1 + τ)) / (2√τ)`.
///
/// Logs a warning when `eta <= 1`, outside the regime the formula describes.
pub fn ratio_r_asymptotic(ctrl: &ControlParams) -> f64 {
    if ctrl.eta() <= 1.0 {
        log::warn!("asymptotic R evaluated at eta = {} (valid for eta > 1)", ctrl.eta());
    }
    (ctrl.eta() + (2.0 / PI).sqrt() * (1.0 + ctrl.tau())) / (2.0 * ctrl.tau().sqrt())
}

fn pick<'a>(axis: Axis, q: &'a AxisNodes, k: &'a AxisNodes) -> &'a AxisNodes {
    match axis {
        Axis::Q => q,
        Axis::K => k,
    }
}

/// Two-pass variance of the density `p` with quadrature weights `w`.
fn weighted_variance(x: &[f64], w: &[f64], p: &[f64]) -> Option<f64> {
    let mass: f64 = w.iter().zip(p).map(|(w, p)| w * p).sum();
    if !(mass.is_finite() && mass > 0.0) {
        return None;
    }
    let mean = x.iter().zip(w).zip(p).map(|((x, w), p)| x * w * p).sum::<f64>() / mass;
    let var = x.iter().zip(w).zip(p).map(|((x, w), p)| (x - mean).powi(2) * w * p).sum::<f64>() / mass;
    Some(var)
}
