//! Discretized Schmidt decomposition of a joint amplitude.
//!
//! The continuum kernel `A(q, k)` is discretized as the weight-symmetrized
//! matrix `M_ij = √w_i · A(q_i, k_j) · √w_j`. Its singular values squared are
//! the eigenvalues λ_n of the reduced density operators, and its singular
//! vectors rescaled by `1/√w` are the continuum mode functions, so that
//!
//! ```text
//! A(q, k) = Σ_n √λ_n · ψ_n(q) · φ_n(k)
//! ```
//!
//! with `φ_n` the photon modes and `ψ_n` the atom modes, each orthonormal
//! under the grid quadrature.
//!
//! [`oracle_schmidt`] reaches the same spectrum by forming the photon density
//! matrix explicitly and diagonalizing it with cyclic Jacobi rotations. It is
//! O(n³) in memory traffic and only meant for small validation grids.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::matmul::matmul;
use faer::linalg::svd::{self as faer_svd, ComputeSvdVectors};
use faer::{Accum, Mat, MatRef, Par};
use ndarray::{Array2, ArrayView1};
use num_complex::Complex64 as C64;

use crate::amplitude::AmplitudeField;
use crate::error::{Error, Result};
use crate::jacobi::hermitian_eigen;
use crate::params::GridSpec;

/// Node limit per axis for the density-matrix oracle.
pub const ORACLE_MAX_NODES: usize = 256;

/// Schmidt coefficients below this are treated as numerically zero.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// Schmidt coefficients without mode functions.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtCoefficients {
    /// Descending, summing to one.
    pub lambdas: Vec<f64>,
    pub schmidt_number: f64,
    /// `Σ σ²` before renormalization; departs from 1 only by rounding for a normalized field.
    pub raw_sum: f64,
}

#[derive(Debug, Clone)]
pub struct SchmidtSpectrum {
    lambdas: Vec<f64>,
    schmidt_number: f64,
    raw_sum: f64,
    /// Column `n` is φ_n sampled on the k nodes.
    photon_modes: Array2<C64>,
    /// Column `n` is ψ_n sampled on the q nodes.
    atom_modes: Array2<C64>,
    grid: GridSpec,
}

impl SchmidtSpectrum {
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn schmidt_number(&self) -> f64 {
        self.schmidt_number
    }

    pub fn raw_sum(&self) -> f64 {
        self.raw_sum
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.photon_modes.ncols()
    }

    pub fn photon_modes(&self) -> &Array2<C64> {
        &self.photon_modes
    }

    pub fn atom_modes(&self) -> &Array2<C64> {
        &self.atom_modes
    }

    pub fn photon_mode(&self, n: usize) -> ArrayView1<'_, C64> {
        self.photon_modes.column(n)
    }

    pub fn atom_mode(&self, n: usize) -> ArrayView1<'_, C64> {
        self.atom_modes.column(n)
    }
}

/// `K = 1 / Σ λ²`.
pub fn schmidt_number(lambdas: &[f64]) -> f64 {
    1.0 / lambdas.iter().map(|l| l * l).sum::<f64>()
}

fn weighted_matrix(field: &AmplitudeField) -> Mat<C64> {
    let (q, k) = field.axes();
    let sq: Vec<f64> = q.weights.iter().map(|w| w.sqrt()).collect();
    let sk: Vec<f64> = k.weights.iter().map(|w| w.sqrt()).collect();
    let values = field.values();
    Mat::from_fn(q.len(), k.len(), |i, j| values[[i, j]] * (sq[i] * sk[j]))
}

struct Factorization {
    singular_values: Vec<f64>,
    u: Option<Mat<C64>>,
    v: Option<Mat<C64>>,
}

/// Sequential SVD so results do not depend on thread scheduling.
fn factorize(m: MatRef<'_, C64>, with_vectors: bool) -> Result<Factorization> {
    let (rows, cols) = m.shape();
    let size = rows.min(cols);
    let compute = if with_vectors { ComputeSvdVectors::Thin } else { ComputeSvdVectors::No };
    let mut s = Diag::<C64>::zeros(size);
    let mut u = with_vectors.then(|| Mat::<C64>::zeros(rows, size));
    let mut v = with_vectors.then(|| Mat::<C64>::zeros(cols, size));
    let mut mem =
        MemBuffer::new(faer_svd::svd_scratch::<C64>(rows, cols, compute, compute, Par::Seq, Default::default()));
    faer_svd::svd(
        m,
        s.as_mut(),
        u.as_mut().map(|u| u.as_mut()),
        v.as_mut().map(|v| v.as_mut()),
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|_| Error::SvdNoConvergence { rows, cols })?;
    let singular_values = s.column_vector().iter().map(|x| x.re).collect();
    Ok(Factorization { singular_values, u, v })
}

fn require_normalized(field: &AmplitudeField) -> Result<()> {
    if field.is_normalized() {
        Ok(())
    } else {
        Err(Error::NotNormalized)
    }
}

fn coefficients_from(raw: Vec<f64>) -> Result<SchmidtCoefficients> {
    let raw_sum: f64 = raw.iter().sum();
    if !(raw_sum.is_finite() && raw_sum > 0.0) {
        return Err(Error::DegenerateField);
    }
    let lambdas: Vec<f64> = raw.iter().map(|x| x / raw_sum).collect();
    let schmidt_number = schmidt_number(&lambdas);
    Ok(SchmidtCoefficients { lambdas, schmidt_number, raw_sum })
}

/// Schmidt coefficients only. Skips the singular vectors, which roughly
/// halves the cost of a full decomposition.
pub fn schmidt_coefficients(field: &AmplitudeField) -> Result<SchmidtCoefficients> {
    require_normalized(field)?;
    let f = factorize(weighted_matrix(field).as_ref(), false)?;
    coefficients_from(f.singular_values.iter().map(|s| s * s).collect())
}

/// Full decomposition keeping the leading `n_modes` mode pairs.
///
/// Each photon mode is rotated so that its largest-magnitude sample is real
/// and positive; the paired atom mode absorbs the conjugate phase.
pub fn schmidt_decompose(field: &AmplitudeField, n_modes: usize) -> Result<SchmidtSpectrum> {
    require_normalized(field)?;
    let grid = *field.grid();
    let max_modes = grid.n_q.min(grid.n_k);
    if n_modes == 0 || n_modes > max_modes {
        return Err(Error::InvalidParameter(format!("n_modes must lie in 1..={max_modes}, got {n_modes}")));
    }
    let (q, k) = field.axes();
    let f = factorize(weighted_matrix(field).as_ref(), true)?;
    let u = f.u.expect("vectors requested");
    let v = f.v.expect("vectors requested");
    let coeffs = coefficients_from(f.singular_values.iter().map(|s| s * s).collect())?;

    let mut photon_modes = Array2::<C64>::zeros((k.len(), n_modes));
    let mut atom_modes = Array2::<C64>::zeros((q.len(), n_modes));
    for n in 0..n_modes {
        for (j, w) in k.weights.iter().enumerate() {
            photon_modes[[j, n]] = v[(j, n)].conj() / w.sqrt();
        }
        for (i, w) in q.weights.iter().enumerate() {
            atom_modes[[i, n]] = u[(i, n)] / w.sqrt();
        }
    }
    fix_gauge(&mut photon_modes, Some(&mut atom_modes));

    Ok(SchmidtSpectrum {
        lambdas: coeffs.lambdas,
        schmidt_number: coeffs.schmidt_number,
        raw_sum: coeffs.raw_sum,
        photon_modes,
        atom_modes,
        grid,
    })
}

fn fix_gauge(photon: &mut Array2<C64>, atom: Option<&mut Array2<C64>>) {
    let mut phases = Vec::with_capacity(photon.ncols());
    for mut col in photon.columns_mut() {
        // first sample within a relative 1e-6 of the maximum, so near-ties
        // resolve the same way for any factorization route
        let max = col.iter().fold(0.0f64, |m, x| m.max(x.norm()));
        let peak = col.iter().copied().find(|x| x.norm() >= max * (1.0 - 1e-6)).unwrap_or_default();
        let phase = if peak.norm() > 0.0 { peak / peak.norm() } else { C64::new(1.0, 0.0) };
        col.mapv_inplace(|x| x * phase.conj());
        phases.push(phase);
    }
    if let Some(atom) = atom {
        for (mut col, phase) in atom.columns_mut().into_iter().zip(phases) {
            col.mapv_inplace(|x| x * phase);
        }
    }
}

/// Truncated product expansion `Σ_{n < n_terms} √λ_n ψ_n(q) φ_n(k)`.
pub fn reconstruct(spectrum: &SchmidtSpectrum, n_terms: usize) -> Result<AmplitudeField> {
    if n_terms > spectrum.n_modes() {
        return Err(Error::InvalidParameter(format!(
            "asked for {n_terms} terms, spectrum stores {} modes",
            spectrum.n_modes()
        )));
    }
    let grid = spectrum.grid;
    let left = Mat::from_fn(grid.n_q, n_terms, |i, n| spectrum.atom_modes[[i, n]] * spectrum.lambdas[n].sqrt());
    let right = Mat::from_fn(n_terms, grid.n_k, |n, j| spectrum.photon_modes[[j, n]]);
    let mut product = Mat::<C64>::zeros(grid.n_q, grid.n_k);
    matmul(product.as_mut(), Accum::Replace, left.as_ref(), right.as_ref(), C64::new(1.0, 0.0), Par::Seq);
    let values = Array2::from_shape_fn((grid.n_q, grid.n_k), |(i, j)| product[(i, j)]);
    AmplitudeField::synthetic(grid, values)
}

/// Atom modes recovered from photon modes by projecting the amplitude,
/// `ψ_n(q) = λ_n^{-1/2} ∫ dk A(q, k) φ_n*(k)`, for the first `n` modes.
pub fn atom_modes_from_photon(field: &AmplitudeField, spectrum: &SchmidtSpectrum, n: usize) -> Result<Array2<C64>> {
    if n > spectrum.n_modes() {
        return Err(Error::InvalidParameter(format!("asked for {n} modes, spectrum stores {}", spectrum.n_modes())));
    }
    project_photon_modes(field, &spectrum.photon_modes, &spectrum.lambdas, n)
}

fn project_photon_modes(
    field: &AmplitudeField,
    photon_modes: &Array2<C64>,
    lambdas: &[f64],
    n: usize,
) -> Result<Array2<C64>> {
    let (q, k) = field.axes();
    let values = field.values();
    let mut out = Array2::<C64>::zeros((q.len(), n));
    for m in 0..n {
        let lambda = lambdas[m];
        if !(lambda >= LAMBDA_FLOOR) {
            return Err(Error::LambdaUnderflow { index: m, lambda, floor: LAMBDA_FLOOR });
        }
        let inv = 1.0 / lambda.sqrt();
        for (i, row) in values.outer_iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (j, a) in row.iter().enumerate() {
                acc += a * photon_modes[[j, m]].conj() * k.weights[j];
            }
            out[[i, m]] = acc * inv;
        }
    }
    Ok(out)
}

/// Brute-force spectrum from the photon density matrix
/// `ρ(k, k') = Σ_q w_q A(q, k) A*(q, k')`, diagonalized by Jacobi rotations.
///
/// Keeps the modes whose coefficient exceeds [`LAMBDA_FLOOR`]; all
/// coefficients are returned.
pub fn oracle_schmidt(field: &AmplitudeField) -> Result<SchmidtSpectrum> {
    require_normalized(field)?;
    let grid = *field.grid();
    let largest = grid.n_q.max(grid.n_k);
    if largest > ORACLE_MAX_NODES {
        return Err(Error::GridTooLarge { nodes: largest, limit: ORACLE_MAX_NODES });
    }
    let (q, k) = field.axes();
    let values = field.values();
    let nk = k.len();

    // √w_k ρ(k, k') √w_k', Hermitian
    let mut rho = Array2::<C64>::zeros((nk, nk));
    for a in 0..nk {
        for b in a..nk {
            let mut acc = C64::new(0.0, 0.0);
            for (i, wq) in q.weights.iter().enumerate() {
                acc += values[[i, a]] * values[[i, b]].conj() * *wq;
            }
            let x = acc * (k.weights[a] * k.weights[b]).sqrt();
            rho[[a, b]] = x;
            rho[[b, a]] = x.conj();
        }
    }
    let (eigenvalues, vectors) = hermitian_eigen(rho)?;
    let coeffs = coefficients_from(eigenvalues.iter().map(|x| x.max(0.0)).collect())?;
    let kept = coeffs.lambdas.iter().take_while(|&&l| l >= LAMBDA_FLOOR).count();

    let mut photon_modes = Array2::<C64>::zeros((nk, kept));
    for n in 0..kept {
        for j in 0..nk {
            photon_modes[[j, n]] = vectors[[j, n]] / k.weights[j].sqrt();
        }
    }
    fix_gauge(&mut photon_modes, None);
    let atom_modes = project_photon_modes(field, &photon_modes, &coeffs.lambdas, kept)?;

    Ok(SchmidtSpectrum {
        lambdas: coeffs.lambdas,
        schmidt_number: coeffs.schmidt_number,
        raw_sum: coeffs.raw_sum,
        photon_modes,
        atom_modes,
        grid,
    })
}

/// Quadrature inner product `Σ_i w_i conj(a_i) b_i`.
pub fn inner_product(a: ArrayView1<'_, C64>, b: ArrayView1<'_, C64>, weights: &[f64]) -> C64 {
    a.iter().zip(b.iter()).zip(weights).map(|((x, y), w)| x.conj() * y * *w).sum()
}

/// Number of peaks of `|mode|²` above `rel_threshold` times its maximum.
///
/// The intensity is first smoothed with a 3-point moving average. A peak is
/// an interior sample, or a run of samples equal to within 1e-9 of the
/// maximum, that is strictly higher than both neighbours.
pub fn count_peaks(mode: ArrayView1<'_, C64>, rel_threshold: f64) -> Result<usize> {
    const MIN_SAMPLES: usize = 32;
    if mode.len() < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "peak counting needs at least {MIN_SAMPLES} samples, got {}",
            mode.len()
        )));
    }
    let raw: Vec<f64> = mode.iter().map(|x| x.norm_sqr()).collect();
    let n = raw.len();
    let mut smooth = raw.clone();
    for i in 1..n - 1 {
        smooth[i] = (raw[i - 1] + raw[i] + raw[i + 1]) / 3.0;
    }
    let top = smooth.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(0);
    }
    let flat = 1e-9 * top;
    let floor = rel_threshold * top;

    let mut peaks = 0;
    let mut i = 1;
    while i < n - 1 {
        let mut j = i;
        while j + 1 < n && (smooth[j + 1] - smooth[i]).abs() <= flat {
            j += 1;
        }
        let rises = smooth[i - 1] < smooth[i] - flat;
        let falls = j + 1 < n && smooth[j + 1] < smooth[j] - flat;
        if rises && falls && smooth[i] > floor {
            peaks += 1;
        }
        i = j + 1;
    }
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{scattered_field, transmitted_field, FieldKind};
    use crate::params::{default_grid, ControlParams, QuadratureRule};
    use ndarray::Array1;
    use proptest::prelude::*;

    fn small_scattered(eta: f64, tau: f64, n: usize) -> AmplitudeField {
        let c = ControlParams::new(eta, tau).unwrap();
        scattered_field(&c, &default_grid(&c, n).unwrap()).unwrap()
    }

    fn weighted_distance(a: &AmplitudeField, b: &AmplitudeField) -> f64 {
        let (q, k) = a.axes();
        let diff = a.values() - b.values();
        crate::amplitude::weighted_norm_squared(&diff, &q.weights, &k.weights).sqrt()
    }

    #[test]
    fn schmidt_number_of_simple_spectra() {
        assert_eq!(schmidt_number(&[1.0]), 1.0);
        assert_eq!(schmidt_number(&[0.5, 0.5]), 2.0);
        assert!((schmidt_number(&[0.5, 0.25, 0.25]) - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn product_state_has_unit_schmidt_number() {
        let c = ControlParams::new(10.0, 1.0).unwrap();
        let f = transmitted_field(&c, &default_grid(&c, 64).unwrap()).unwrap();
        let s = schmidt_decompose(&f, 4).unwrap();
        assert!((s.schmidt_number() - 1.0).abs() < 1e-6);
        assert!((s.lambdas()[0] - 1.0).abs() < 1e-12);
        let one = reconstruct(&s, 1).unwrap();
        assert!(weighted_distance(&one, &f) < 1e-10);
        // leading atom mode is the Gaussian factor exp(-(q/η)²), up to phase and norm
        let (q, _) = f.axes();
        let gauss: Array1<C64> = q.nodes.iter().map(|x| C64::from((-(x / 10.0f64).powi(2)).exp())).collect();
        let gnorm = inner_product(gauss.view(), gauss.view(), &q.weights).re.sqrt();
        let overlap = inner_product(s.atom_mode(0), gauss.view(), &q.weights).norm() / gnorm;
        assert!((overlap - 1.0).abs() < 1e-10);
        let psi = atom_modes_from_photon(&f, &s, 1).unwrap();
        let overlap = inner_product(psi.column(0), gauss.view(), &q.weights).norm() / gnorm;
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unnormalized_field_rejected() {
        let g = GridSpec::new((-1.0, 1.0), (-1.0, 1.0), 8, 8, QuadratureRule::Midpoint).unwrap();
        let f = AmplitudeField::synthetic(g, Array2::from_elem((8, 8), C64::new(1.0, 0.0))).unwrap();
        assert_eq!(schmidt_decompose(&f, 1).unwrap_err(), Error::NotNormalized);
        assert_eq!(oracle_schmidt(&f).unwrap_err(), Error::NotNormalized);
        assert_eq!(schmidt_coefficients(&f).unwrap_err(), Error::NotNormalized);
    }

    #[test]
    fn too_many_modes_rejected() {
        let f = small_scattered(5.0, 1.0, 32);
        assert!(schmidt_decompose(&f, 33).is_err());
        assert!(schmidt_decompose(&f, 0).is_err());
    }

    #[test]
    fn oracle_refuses_large_grids() {
        let f = small_scattered(5.0, 1.0, 300);
        assert_eq!(oracle_schmidt(&f).unwrap_err(), Error::GridTooLarge { nodes: 300, limit: 256 });
    }

    #[test]
    fn oracle_matches_svd_on_small_grid() {
        let f = small_scattered(10.0, 1.0, 128);
        let svd = schmidt_decompose(&f, 10).unwrap();
        let oracle = oracle_schmidt(&f).unwrap();
        for n in 0..10 {
            assert!((svd.lambdas()[n] - oracle.lambdas()[n]).abs() < 1e-10);
        }
        let rel = (svd.schmidt_number() - oracle.schmidt_number()).abs() / svd.schmidt_number();
        assert!(rel < 1e-10, "{rel}");
        // same gauge, so the leading modes agree sample by sample
        let (q, k) = f.axes();
        for n in 0..3 {
            let dphi = inner_product(svd.photon_mode(n), oracle.photon_mode(n), &k.weights);
            let dpsi = inner_product(svd.atom_mode(n), oracle.atom_mode(n), &q.weights);
            assert!((dphi - C64::from(1.0)).norm() < 1e-8, "{n}: {dphi}");
            assert!((dpsi - C64::from(1.0)).norm() < 1e-8, "{n}: {dpsi}");
        }
    }

    #[test]
    fn planted_rank_three_spectrum() {
        // orthonormal Hermite-Gauss-like products with weights 0.6 / 0.3 / 0.1
        let g = GridSpec::new((-10.0, 10.0), (-12.0, 12.0), 96, 80, QuadratureRule::Midpoint).unwrap();
        let f = planted_field(&g, &[0.6, 0.3, 0.1]);
        let oracle = oracle_schmidt(&f).unwrap();
        let svd = schmidt_decompose(&f, 3).unwrap();
        for (n, want) in [0.6, 0.3, 0.1].iter().enumerate() {
            assert!((oracle.lambdas()[n] - want).abs() < 1e-10, "{:?}", &oracle.lambdas()[..4]);
            assert!((svd.lambdas()[n] - want).abs() < 1e-10);
        }
        assert_eq!(oracle.n_modes(), 3);
        assert!((oracle.schmidt_number() - 1.0 / 0.46).abs() < 1e-9);
    }

    /// Σ √λ_n a_n(q) b_n(k) with a_n, b_n orthonormalized on the grid by Gram-Schmidt.
    pub(crate) fn planted_field(g: &GridSpec, lambdas: &[f64]) -> AmplitudeField {
        let q = g.q_axis();
        let k = g.k_axis();
        let basis = |axis: &crate::params::AxisNodes, width: f64, shift: f64| {
            let mut out: Vec<Array1<C64>> = Vec::new();
            for n in 0..lambdas.len() {
                let mut v: Array1<C64> = axis
                    .nodes
                    .iter()
                    .map(|&x| {
                        let y = x / width;
                        C64::from_polar(y.powi(n as i32) * (-0.5 * y * y).exp(), shift * x)
                    })
                    .collect();
                for prev in &out {
                    let c = inner_product(prev.view(), v.view(), &axis.weights);
                    v = &v - &prev.mapv(|p| p * c);
                }
                let norm = inner_product(v.view(), v.view(), &axis.weights).re.sqrt();
                out.push(v.mapv(|x| x / norm));
            }
            out
        };
        let a = basis(&q, 2.0, 0.0);
        let b = basis(&k, 3.0, 0.4);
        let values = Array2::from_shape_fn((g.n_q, g.n_k), |(i, j)| {
            lambdas.iter().enumerate().map(|(n, l)| a[n][i] * b[n][j] * l.sqrt()).sum::<C64>()
        });
        AmplitudeField::synthetic(*g, values).unwrap().normalized().unwrap()
    }

    #[test]
    fn modes_are_orthonormal_and_reconstruct() {
        let f = small_scattered(5.0, 0.5, 120);
        let s = schmidt_decompose(&f, 120).unwrap();
        let (q, k) = f.axes();
        for m in 0..8 {
            for n in 0..8 {
                let want = if m == n { 1.0 } else { 0.0 };
                let pk = inner_product(s.photon_mode(m), s.photon_mode(n), &k.weights);
                let pq = inner_product(s.atom_mode(m), s.atom_mode(n), &q.weights);
                assert!((pk - C64::from(want)).norm() < 1e-10);
                assert!((pq - C64::from(want)).norm() < 1e-10);
            }
        }
        let full = reconstruct(&s, 120).unwrap();
        assert!(weighted_distance(&full, &f) < 1e-10);

        let mut last = f64::INFINITY;
        for terms in [1, 2, 4, 8, 16, 32, 64, 120] {
            let r = weighted_distance(&reconstruct(&s, terms).unwrap(), &f);
            assert!(r <= last + 1e-14, "{terms}: {r} > {last}");
            last = r;
        }
    }

    #[test]
    fn truncation_at_ceil_k_captures_most_of_the_norm() {
        let f = small_scattered(10.0, 1.0, 300);
        let s = schmidt_coefficients(&f).unwrap();
        let terms = s.schmidt_number.ceil() as usize;
        let captured: f64 = s.lambdas[..terms].iter().sum();
        assert!(captured >= 1.0 - 1.0 / s.schmidt_number, "{captured}");
    }

    #[test]
    fn coefficients_agree_with_full_decomposition() {
        let f = small_scattered(5.0, 0.3, 100);
        let a = schmidt_coefficients(&f).unwrap();
        let b = schmidt_decompose(&f, 5).unwrap();
        assert!((a.schmidt_number - b.schmidt_number()).abs() < 1e-10);
        assert!((a.lambdas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_invariant_under_phase_and_transpose() {
        let f = small_scattered(5.0, 1.0, 90);
        let base = schmidt_coefficients(&f).unwrap().schmidt_number;
        let rotated = schmidt_coefficients(&f.clone().with_global_phase(2.1)).unwrap().schmidt_number;
        let flipped = schmidt_coefficients(&f.transposed()).unwrap().schmidt_number;
        assert!((rotated - base).abs() < 1e-10 * base);
        assert!((flipped - base).abs() < 1e-10 * base);
        // atom density matrix through the oracle
        let atom = oracle_schmidt(&f.transposed()).unwrap().schmidt_number();
        assert!((atom - base).abs() < 1e-8 * base);
    }

    #[test]
    fn underflowing_mode_reported() {
        let c = ControlParams::new(10.0, 1.0).unwrap();
        let f = transmitted_field(&c, &default_grid(&c, 48).unwrap()).unwrap();
        let s = schmidt_decompose(&f, 3).unwrap();
        assert!(matches!(atom_modes_from_photon(&f, &s, 2), Err(Error::LambdaUnderflow { index: 1, .. })));
    }

    #[test]
    fn gauge_makes_peak_sample_real_positive() {
        let f = small_scattered(5.0, 1.0, 64).with_global_phase(0.9);
        let s = schmidt_decompose(&f, 4).unwrap();
        for n in 0..4 {
            let mode = s.photon_mode(n);
            let max = mode.iter().fold(0.0f64, |m, x| m.max(x.norm()));
            let peak = *mode.iter().find(|x| x.norm() >= max * (1.0 - 1e-6)).unwrap();
            assert!(peak.re > 0.0 && peak.im.abs() < 1e-12 * peak.re);
        }
        assert_eq!(f.kind(), FieldKind::Scattered);
    }

    #[test]
    fn peak_counting() {
        let x: Vec<f64> = (0..200).map(|i| -10.0 + 0.1 * i as f64).collect();
        let gauss: Array1<C64> = x.iter().map(|&x| C64::from((-x * x / 4.0).exp())).collect();
        assert_eq!(count_peaks(gauss.view(), 0.05).unwrap(), 1);
        let two: Array1<C64> = x.iter().map(|&x| C64::from(x * (-x * x / 4.0).exp())).collect();
        assert_eq!(count_peaks(two.view(), 0.05).unwrap(), 2);
        let three: Array1<C64> = x.iter().map(|&x| C64::from((x * x - 2.0) * (-x * x / 4.0).exp())).collect();
        assert_eq!(count_peaks(three.view(), 0.05).unwrap(), 3);
        // flat top from an even, symmetric sampling still counts once
        let even: Array1<C64> = (0..64).map(|i| -3.15 + 0.1 * i as f64).map(|x| C64::from((-x * x).exp())).collect();
        assert_eq!(count_peaks(even.view(), 0.05).unwrap(), 1);
        assert!(count_peaks(gauss.slice(ndarray::s![..20]), 0.05).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spectrum_is_a_probability_distribution(eta in 1.0f64..12.0, tau in 0.2f64..5.0, phase in 0.0f64..6.3) {
            let f = small_scattered(eta, tau, 96);
            let c = schmidt_coefficients(&f).unwrap();
            prop_assert!((c.lambdas.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(c.lambdas.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(c.schmidt_number >= 1.0 - 1e-12);
            let rotated = schmidt_coefficients(&f.with_global_phase(phase)).unwrap();
            prop_assert!((rotated.schmidt_number - c.schmidt_number).abs() < 1e-9 * c.schmidt_number);
        }
    }
}
