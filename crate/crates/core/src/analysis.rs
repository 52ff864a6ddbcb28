//! Parameter sweeps over (η, τ), straight-line fits of the entanglement
//! measures, and the entanglement pumping coefficient (EPC): the ratio of the
//! K-vs-η slope for resonant scattering to the same slope for bare
//! spontaneous emission.

use rayon::prelude::*;
use serde::Serialize;

use crate::amplitude::{scattered_field, spontaneous_field, AmplitudeField};
use crate::error::{Error, Result};
use crate::moments::{ratio_r, Axis};
use crate::params::{ControlParams, GridPolicy};
use crate::schmidt::schmidt_coefficients;

/// Smallest η accepted by the slope-based EPC estimate.
pub const LINEAR_REGIME_ETA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    R,
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Scattered,
    /// τ plays no role in the amplitude; it only sizes the grid.
    Spontaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    pub tau: f64,
    pub r: Option<f64>,
    pub k: Option<f64>,
    pub n_q: usize,
    pub n_k: usize,
    /// `1 − ∬|A|²` of the analytically normalized samples.
    pub truncation: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub source: Source,
    pub policy: GridPolicy,
    pub version: &'static str,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// (η, K) pairs at one τ, skipping rows without a K value.
    pub fn k_series(&self, tau: f64) -> (Vec<f64>, Vec<f64>) {
        self.series(tau, |r| r.k)
    }

    pub fn r_series(&self, tau: f64) -> (Vec<f64>, Vec<f64>) {
        self.series(tau, |r| r.r)
    }

    fn series(&self, tau: f64, pick: impl Fn(&SweepRow) -> Option<f64>) -> (Vec<f64>, Vec<f64>) {
        self.rows.iter().filter(|r| r.tau == tau).filter_map(|r| pick(r).map(|y| (r.eta, y))).unzip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpcCurveFit {
    /// Coefficient of 1/τ.
    pub a: f64,
    pub b: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpcPoint {
    pub tau: f64,
    pub scattered: FitResult,
    pub baseline_slope: f64,
    pub epc: f64,
}

/// Scattered-field sweep; see [`sweep_source`].
pub fn sweep(etas: &[f64], taus: &[f64], measures: &[Measure], policy: &GridPolicy) -> Result<SweepTable> {
    sweep_source(Source::Scattered, etas, taus, measures, policy)
}

/// Evaluates `measures` at every (η, τ) pair.
///
/// Duplicate parameters are collapsed and rows come out sorted by (η, τ).
/// A point that fails keeps its row with the error message and no values.
pub fn sweep_source(
    source: Source,
    etas: &[f64],
    taus: &[f64],
    measures: &[Measure],
    policy: &GridPolicy,
) -> Result<SweepTable> {
    let etas = sorted_unique("eta", etas)?;
    let taus = sorted_unique("tau", taus)?;
    let points: Vec<(f64, f64)> = etas.iter().flat_map(|&e| taus.iter().map(move |&t| (e, t))).collect();
    let rows = points.par_iter().map(|&(eta, tau)| evaluate_point(source, eta, tau, measures, policy)).collect();
    Ok(SweepTable { source, policy: *policy, version: env!("CARGO_PKG_VERSION"), rows })
}

fn evaluate_point(source: Source, eta: f64, tau: f64, measures: &[Measure], policy: &GridPolicy) -> SweepRow {
    let mut row = SweepRow { eta, tau, r: None, k: None, n_q: 0, n_k: 0, truncation: f64::NAN, error: None };
    let outcome = (|| -> Result<()> {
        let ctrl = ControlParams::new(eta, tau)?;
        let grid = policy.grid_for(&ctrl)?;
        row.n_q = grid.n_q;
        row.n_k = grid.n_k;
        if measures.is_empty() {
            return Ok(());
        }
        let field: AmplitudeField = match source {
            Source::Scattered => scattered_field(&ctrl, &grid)?,
            Source::Spontaneous => spontaneous_field(eta, &grid)?,
        };
        row.truncation = 1.0 - field.sampled_norm();
        if measures.contains(&Measure::R) {
            row.r = Some(ratio_r(&field, Axis::Q, 0.0)?.ratio);
        }
        if measures.contains(&Measure::K) {
            row.k = Some(schmidt_coefficients(&field)?.schmidt_number);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.r = None;
        row.k = None;
        row.error = Some(e.to_string());
    }
    row
}

fn sorted_unique(name: &str, xs: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = xs.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidParameter(format!("{name} values must be finite and > 0, got {bad}")));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Ordinary least-squares line through `(xs, ys)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!("abscissa has {} points, ordinate {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::TooFewPoints { need: 3, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 1e-14 * xs.iter().map(|x| x * x).sum::<f64>()) {
        return Err(Error::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    Ok(FitResult { slope, intercept, rms_residual: (ss / n).sqrt(), n_points: xs.len() })
}

/// Least-squares fit of `a/τ + b`.
pub fn epc_curve_fit(taus: &[f64], epcs: &[f64]) -> Result<EpcCurveFit> {
    if taus.len() < 4 {
        return Err(Error::TooFewPoints { need: 4, got: taus.len() });
    }
    if let Some(bad) = taus.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0, 1], got {bad}")));
    }
    let inv: Vec<f64> = taus.iter().map(|t| 1.0 / t).collect();
    let fit = linear_fit(&inv, epcs)?;
    Ok(EpcCurveFit { a: fit.slope, b: fit.intercept, rms: fit.rms_residual })
}

fn check_linear_regime(etas: &[f64]) -> Result<()> {
    if let Some(bad) = etas.iter().find(|e| !(**e >= LINEAR_REGIME_ETA)) {
        return Err(Error::InvalidParameter(format!("slope fits need eta >= {LINEAR_REGIME_ETA}, got {bad}")));
    }
    Ok(())
}

fn fit_k(source: Source, tau: f64, etas: &[f64], policy: &GridPolicy) -> Result<FitResult> {
    check_linear_regime(etas)?;
    let table = sweep_source(source, etas, &[tau], &[Measure::K], policy)?;
    if let Some(row) = table.rows.iter().find(|r| r.error.is_some()) {
        log::warn!("K failed at eta = {}, tau = {}: {:?}", row.eta, row.tau, row.error);
    }
    let (xs, ys) = table.k_series(tau);
    linear_fit(&xs, &ys)
}

/// K(η) fit for bare spontaneous emission.
pub fn baseline_fit(etas: &[f64], policy: &GridPolicy) -> Result<FitResult> {
    fit_k(Source::Spontaneous, 1.0, etas, policy)
}

/// EPC at `tau` against a previously fitted baseline slope.
pub fn epc_with_baseline(tau: f64, etas: &[f64], baseline_slope: f64, policy: &GridPolicy) -> Result<EpcPoint> {
    if !(baseline_slope.is_finite() && baseline_slope > 0.0) {
        return Err(Error::InvalidParameter(format!("baseline slope must be > 0, got {baseline_slope}")));
    }
    let scattered = fit_k(Source::Scattered, tau, etas, policy)?;
    Ok(EpcPoint { tau, scattered, baseline_slope, epc: scattered.slope / baseline_slope })
}

/// Entanglement pumping coefficient at `tau`, fitting both slopes over `etas`.
pub fn epc(tau: f64, etas: &[f64], policy: &GridPolicy) -> Result<f64> {
    let baseline = baseline_fit(etas, policy)?;
    Ok(epc_with_baseline(tau, etas, baseline.slope, policy)?.epc)
}
