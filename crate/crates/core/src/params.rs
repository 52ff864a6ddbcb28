//! Dimensionless control parameters, conversion from physical units, and the
//! momentum grids every other module samples on.
//!
//! All physics downstream of this module happens in the dimensionless
//! coordinates `Δq` (atomic recoil momentum in units of `mΓ/ħk₀`) and `Δk`
//! (photon detuning in units of `Γ/c`).

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest node count accepted on either grid axis.
pub const MIN_NODES: usize = 8;

/// Upper bound on node counts chosen automatically by [`GridPolicy`].
pub const MAX_RESOLVED_NODES: usize = 4096;

/// The knobs that fully determine every joint amplitude.
///
/// * `eta`: atomic momentum spread `δq·ħk₀/(mΓ)`.
/// * `tau`: incident photon linewidth `δk/(Γ/c)`.
/// * `epsilon`: recoil shift `ħk₀²/(2mΓ)` in the scattered Lorentzian, normally neglected.
/// * `coupling`: prefactor of the scattered term in the forward (transmitted) channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlParams {
    eta: f64,
    tau: f64,
    epsilon: f64,
    coupling: f64,
}

impl ControlParams {
    pub fn new(eta: f64, tau: f64) -> Result<Self> {
        check_positive("eta", eta)?;
        check_positive("tau", tau)?;
        Ok(Self { eta, tau, epsilon: 0.0, coupling: 0.0 })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        check_non_negative("epsilon", epsilon)?;
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_coupling(mut self, coupling: f64) -> Result<Self> {
        check_non_negative("g_c", coupling)?;
        self.coupling = coupling;
        Ok(self)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

/// Cartesian axis of the laboratory frame; the incident photon travels along `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpatialAxis {
    X,
    Y,
    Z,
}

impl SpatialAxis {
    fn index(self) -> usize {
        match self {
            SpatialAxis::X => 0,
            SpatialAxis::Y => 1,
            SpatialAxis::Z => 2,
        }
    }
}

/// Raw physical quantities in any consistent unit system (SI in the tests).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    pub mass: f64,
    /// Atomic linewidth Γ (angular frequency).
    pub gamma: f64,
    /// Resonant wavenumber ω_a/c.
    pub k0: f64,
    pub c: f64,
    pub hbar: f64,
    /// Atomic momentum (wavenumber) bandwidth per axis.
    pub dq: [f64; 3],
    /// Photon wavenumber bandwidth per axis.
    pub dk: [f64; 3],
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("mass", self.mass)?;
        check_positive("gamma", self.gamma)?;
        check_positive("k0", self.k0)?;
        check_positive("c", self.c)?;
        check_positive("hbar", self.hbar)?;
        for (i, v) in self.dq.iter().enumerate() {
            check_positive(["dq_x", "dq_y", "dq_z"][i], *v)?;
        }
        for (i, v) in self.dk.iter().enumerate() {
            check_positive(["dk_x", "dk_y", "dk_z"][i], *v)?;
        }
        Ok(())
    }

    /// Photon linewidth parameter along one axis.
    pub fn tau_along(&self, axis: SpatialAxis) -> f64 {
        self.dk[axis.index()] * self.c / self.gamma
    }

    /// Atomic spread parameter along one axis.
    pub fn eta_along(&self, axis: SpatialAxis) -> f64 {
        self.dq[axis.index()] * self.hbar * self.k0 / (self.mass * self.gamma)
    }
}

/// Converts physical quantities to the dimensionless knobs.
///
/// `axis_q` selects the atomic bandwidth entering `eta`, `axis_k` the photon
/// bandwidth entering `tau`. The transmitted-channel coupling always uses the
/// two transverse photon bandwidths.
pub fn derive_controls(phys: &PhysicalParams, axis_q: SpatialAxis, axis_k: SpatialAxis) -> Result<ControlParams> {
    phys.validate()?;
    let eta = phys.eta_along(axis_q);
    let tau = phys.tau_along(axis_k);
    let epsilon = phys.hbar * phys.k0 * phys.k0 / (2.0 * phys.mass * phys.gamma);
    let ratio = phys.gamma / (phys.c * phys.k0);
    let coupling = PI / 4.0 * ratio * ratio * phys.tau_along(SpatialAxis::X) * phys.tau_along(SpatialAxis::Y);
    ControlParams::new(eta, tau)?.with_epsilon(epsilon)?.with_coupling(coupling)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureRule {
    #[default]
    Midpoint,
    Trapezoid,
}

/// Nodes and weights along one grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisNodes {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisNodes {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node closest to `x` (lowest index on ties).
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &node) in self.nodes.iter().enumerate() {
            let d = (node - x).abs();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }
}

/// Rectangular grid over (Δq, Δk).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub n_q: usize,
    pub n_k: usize,
    pub rule: QuadratureRule,
}

impl GridSpec {
    pub fn new(
        (q_min, q_max): (f64, f64),
        (k_min, k_max): (f64, f64),
        n_q: usize,
        n_k: usize,
        rule: QuadratureRule,
    ) -> Result<Self> {
        let grid = Self { q_min, q_max, k_min, k_max, n_q, n_k, rule };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi) in [("q", self.q_min, self.q_max), ("k", self.k_min, self.k_max)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!("{name} range must satisfy min < max, got [{lo}, {hi}]")));
            }
        }
        if self.n_q < MIN_NODES {
            return Err(Error::GridTooCoarse { axis: "q", nodes: self.n_q, min: MIN_NODES });
        }
        if self.n_k < MIN_NODES {
            return Err(Error::GridTooCoarse { axis: "k", nodes: self.n_k, min: MIN_NODES });
        }
        Ok(())
    }

    pub fn q_axis(&self) -> AxisNodes {
        axis_nodes(self.q_min, self.q_max, self.n_q, self.rule)
    }

    pub fn k_axis(&self) -> AxisNodes {
        axis_nodes(self.k_min, self.k_max, self.n_k, self.rule)
    }

    /// Same grid with the roles of the two axes exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            q_min: self.k_min,
            q_max: self.k_max,
            k_min: self.q_min,
            k_max: self.q_max,
            n_q: self.n_k,
            n_k: self.n_q,
            rule: self.rule,
        }
    }
}

/// Nodes are built as `center + offset(i)` with `offset(n-1-i) == -offset(i)`
/// bit for bit, so a range with `min == -max` gives an exactly symmetric set.
fn axis_nodes(lo: f64, hi: f64, n: usize, rule: QuadratureRule) -> AxisNodes {
    let center = 0.5 * (lo + hi);
    let len = hi - lo;
    let (nodes, weights) = match rule {
        QuadratureRule::Midpoint => {
            let h = len / n as f64;
            let half = 0.5 * h;
            let nodes = (0..n).map(|i| center + (2.0 * i as f64 + 1.0 - n as f64) * half).collect();
            (nodes, vec![h; n])
        }
        QuadratureRule::Trapezoid => {
            let h = len / (n - 1) as f64;
            let half = 0.5 * h;
            let nodes = (0..n).map(|i| center + (2.0 * i as f64 - (n - 1) as f64) * half).collect();
            let mut w = vec![h; n];
            w[0] = half;
            w[n - 1] = half;
            (nodes, w)
        }
    };
    AxisNodes { nodes, weights }
}

/// Default grid: Δq ∈ ±6·max(eta, 1), Δk ∈ ±50·(1 + tau), `n` nodes per axis.
pub fn default_grid(ctrl: &ControlParams, n: usize) -> Result<GridSpec> {
    let q = 6.0 * ctrl.eta().max(1.0);
    let k = 50.0 * (1.0 + ctrl.tau());
    GridSpec::new((-q, q), (-k, k), n, n, QuadratureRule::Midpoint)
}

/// How a grid is chosen for each parameter point of a sweep or CLI run.
///
/// Extents follow [`default_grid`] unless overridden. With `resolve_linewidth`
/// the node count on each axis is raised until the spacing is at most
/// `min(tau, 1)`, the width of the narrower of the two Lorentzian factors,
/// capped at [`MAX_RESOLVED_NODES`]. Raised counts are odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPolicy {
    pub n: usize,
    pub resolve_linewidth: bool,
    pub rule: QuadratureRule,
    pub q_range: Option<(f64, f64)>,
    pub k_range: Option<(f64, f64)>,
}

impl GridPolicy {
    pub fn new(n: usize) -> Self {
        Self { n, resolve_linewidth: true, rule: QuadratureRule::Midpoint, q_range: None, k_range: None }
    }

    /// Plain default grid, no linewidth refinement.
    pub fn fixed(n: usize) -> Self {
        Self { resolve_linewidth: false, ..Self::new(n) }
    }

    pub fn grid_for(&self, ctrl: &ControlParams) -> Result<GridSpec> {
        let base = default_grid(ctrl, self.n)?;
        let q_range = self.q_range.unwrap_or((base.q_min, base.q_max));
        let k_range = self.k_range.unwrap_or((base.k_min, base.k_max));
        let (mut n_q, mut n_k) = (self.n, self.n);
        if self.resolve_linewidth {
            let spacing = ctrl.tau().min(1.0);
            // odd counts put a node on the centre of a symmetric range, which
            // is where the conditional slice for R is taken
            let needed = |span: f64| {
                let n = (span / spacing).ceil();
                let n = if n.is_finite() { (n as usize).min(MAX_RESOLVED_NODES - 1) } else { MAX_RESOLVED_NODES - 1 };
                n | 1
            };
            let raise = |current: usize, span: f64| {
                let n = needed(span);
                if n > current {
                    n
                } else {
                    current
                }
            };
            n_q = raise(n_q, q_range.1 - q_range.0);
            n_k = raise(n_k, k_range.1 - k_range.0);
        }
        GridSpec::new(q_range, k_range, n_q, n_k, self.rule)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HBAR: f64 = 1.054_571_817e-34;
    const C: f64 = 299_792_458.0;

    /// ⁸⁷Rb on the D2 line: m = 1.443e-25 kg, Γ = 2π·6.07 MHz, λ = 780.24 nm.
    fn rubidium(dq: [f64; 3], dk: [f64; 3]) -> PhysicalParams {
        PhysicalParams {
            mass: 1.443_160_6e-25,
            gamma: 2.0 * PI * 6.0666e6,
            k0: 2.0 * PI / 780.241e-9,
            c: C,
            hbar: HBAR,
            dq,
            dk,
        }
    }

    #[test]
    fn eta_and_tau_from_definitions() {
        let base = rubidium([1.0; 3], [1.0; 3]);
        let dq10 = 10.0 * base.mass * base.gamma / (base.hbar * base.k0);
        let dk1 = base.gamma / base.c;
        let phys = rubidium([dq10, dq10, dq10], [dk1, dk1, dk1]);
        let ctrl = derive_controls(&phys, SpatialAxis::X, SpatialAxis::Z).unwrap();
        assert!((ctrl.eta() - 10.0).abs() < 1e-12);
        assert!((ctrl.tau() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn realistic_atom_has_negligible_recoil_shift() {
        // δq of a ~1 µK cloud, photon bandwidth equal to the natural linewidth.
        let phys = rubidium([1.0e6; 3], [0.13; 3]);
        let ctrl = derive_controls(&phys, SpatialAxis::X, SpatialAxis::Z).unwrap();
        let expected = HBAR * phys.k0 * phys.k0 / (2.0 * phys.mass * phys.gamma);
        assert!((ctrl.epsilon() - expected).abs() < 1e-18);
        assert!(ctrl.epsilon() > 1e-4 && ctrl.epsilon() < 1e-3, "epsilon = {}", ctrl.epsilon());
        // the forward-channel prefactor is tiny for a real atom
        assert!(ctrl.coupling() < 1e-10);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        let mut phys = rubidium([1.0; 3], [1.0; 3]);
        phys.gamma = 0.0;
        assert!(matches!(derive_controls(&phys, SpatialAxis::X, SpatialAxis::Z), Err(Error::InvalidParameter(_))));
        let mut phys = rubidium([1.0; 3], [1.0; 3]);
        phys.dk[1] = -1.0;
        assert!(derive_controls(&phys, SpatialAxis::X, SpatialAxis::Z).is_err());
        assert!(ControlParams::new(0.0, 1.0).is_err());
        assert!(ControlParams::new(1.0, -1.0).is_err());
        assert!(ControlParams::new(f64::NAN, 1.0).is_err());
        assert!(ControlParams::new(1.0, 1.0).unwrap().with_epsilon(-1e-3).is_err());
        assert!(ControlParams::new(1.0, 1.0).unwrap().with_coupling(f64::INFINITY).is_err());
    }

    #[test]
    fn default_grid_extents() {
        let g = default_grid(&ControlParams::new(10.0, 1.0).unwrap(), 1000).unwrap();
        assert_eq!((g.q_min, g.q_max, g.k_min, g.k_max), (-60.0, 60.0, -100.0, 100.0));
        assert_eq!((g.n_q, g.n_k), (1000, 1000));

        let g = default_grid(&ControlParams::new(0.5, 1.0).unwrap(), 64).unwrap();
        assert_eq!((g.q_min, g.q_max), (-6.0, 6.0));

        let g = default_grid(&ControlParams::new(10.0, 0.1).unwrap(), 1000).unwrap();
        assert!((g.k_max - 55.0).abs() < 1e-12 && (g.k_min + 55.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_or_inverted_grids_rejected() {
        assert!(matches!(
            GridSpec::new((-1.0, 1.0), (-1.0, 1.0), 7, 8, QuadratureRule::Midpoint),
            Err(Error::GridTooCoarse { axis: "q", .. })
        ));
        assert!(GridSpec::new((1.0, -1.0), (-1.0, 1.0), 8, 8, QuadratureRule::Midpoint).is_err());
        assert!(default_grid(&ControlParams::new(1.0, 1.0).unwrap(), 4).is_err());
    }

    #[test]
    fn linewidth_policy_refines_narrow_photons() {
        let ctrl = ControlParams::new(20.0, 0.1).unwrap();
        let g = GridPolicy::new(1000).grid_for(&ctrl).unwrap();
        assert_eq!(g.n_q, 2401);
        assert_eq!(g.n_k, 1101);
        let g = GridPolicy::fixed(1000).grid_for(&ctrl).unwrap();
        assert_eq!((g.n_q, g.n_k), (1000, 1000));
        // broad photons keep the requested count
        let g = GridPolicy::new(1000).grid_for(&ControlParams::new(10.0, 1.0).unwrap()).unwrap();
        assert_eq!(g, default_grid(&ControlParams::new(10.0, 1.0).unwrap(), 1000).unwrap());
    }

    #[test]
    fn nearest_node_prefers_lower_index_on_ties() {
        let axis = axis_nodes(-1.0, 1.0, 8, QuadratureRule::Midpoint);
        assert_eq!(axis.nearest(0.0), 3);
        assert_eq!(axis.nearest(10.0), 7);
    }

    proptest! {
        #[test]
        fn derive_controls_scales_linearly(s in 0.01f64..100.0, dq in 1e3f64..1e7, dk in 1e-2f64..1e2) {
            let a = derive_controls(&rubidium([dq; 3], [dk; 3]), SpatialAxis::X, SpatialAxis::Z).unwrap();
            let b = derive_controls(&rubidium([dq * s; 3], [dk * s; 3]), SpatialAxis::X, SpatialAxis::Z).unwrap();
            prop_assert!((b.eta() / a.eta() - s).abs() <= 1e-12 * s);
            prop_assert!((b.tau() / a.tau() - s).abs() <= 1e-12 * s);
        }

        #[test]
        fn weights_positive_and_sum_to_length(
            lo in -100.0f64..0.0, len in 0.1f64..200.0, n in 8usize..600, trap in any::<bool>()
        ) {
            let rule = if trap { QuadratureRule::Trapezoid } else { QuadratureRule::Midpoint };
            let axis = axis_nodes(lo, lo + len, n, rule);
            prop_assert_eq!(axis.len(), n);
            prop_assert!(axis.weights.iter().all(|&w| w > 0.0));
            let total: f64 = axis.weights.iter().sum();
            prop_assert!((total - len).abs() <= 1e-10 * len);
            prop_assert!(axis.nodes.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn symmetric_ranges_give_symmetric_nodes(half in 0.1f64..500.0, n in 8usize..600, trap in any::<bool>()) {
            let rule = if trap { QuadratureRule::Trapezoid } else { QuadratureRule::Midpoint };
            let axis = axis_nodes(-half, half, n, rule);
            for i in 0..n {
                prop_assert_eq!(axis.nodes[i], -axis.nodes[n - 1 - i]);
            }
        }
    }
}
