//! Exact second moments `C_kl = ⟨a_k† a_l⟩` for a number-conserving quadratic
//! chain coupled to independent thermal baths. The Lindblad equation closes on
//! these moments, so populations follow without any Fock-space truncation:
//!
//! `dC/dt = i(hC − Ch) − ½(γ_k + γ_l) C_kl + γ_k n̄ δ_kl`
//!
//! where `h` is the single-particle matrix of `H = Σ h_kl a_k† a_l`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::integrator::{integrate, IntegrateError, IntegratorOptions};
use super::lindblad::BathSpec;
use super::OpenError;
use crate::model::SiteHamiltonian;

#[derive(Debug, Clone)]
pub struct MomentGenerator {
    h: DMatrix<Complex64>,
    gamma: Vec<f64>,
    nbar: f64,
}

impl MomentGenerator {
    /// `h` is the single-particle matrix (hopping sign as in the Fock-space
    /// Hamiltonian).
    pub fn new(h: &SiteHamiltonian, bath: &BathSpec) -> Result<Self, OpenError> {
        bath.validate(h.n_sites())?;
        Ok(Self { h: h.dense().map(|v| Complex64::new(v, 0.0)), gamma: bath.gamma.clone(), nbar: bath.nbar })
    }

    pub fn n_sites(&self) -> usize {
        self.gamma.len()
    }

    /// Overwrites `out` with `dC/dt`; column-major `N×N`.
    pub fn apply(&self, c: &[Complex64], out: &mut [Complex64]) {
        let n = self.n_sites();
        let cm = DMatrix::from_column_slice(n, n, c);
        let comm = (&self.h * &cm - &cm * &self.h) * Complex64::new(0.0, 1.0);
        for l in 0..n {
            for k in 0..n {
                let mut v = comm[(k, l)] - cm[(k, l)] * (0.5 * (self.gamma[k] + self.gamma[l]));
                if k == l {
                    v += self.gamma[k] * self.nbar;
                }
                out[l * n + k] = v;
            }
        }
    }
}

/// `C = e_site e_siteᵀ`: one quantum on `site`, everything else empty.
pub fn single_excitation_moments(n_sites: usize, site: usize) -> DMatrix<Complex64> {
    let mut c = DMatrix::zeros(n_sites, n_sites);
    c[(site, site)] = Complex64::new(1.0, 0.0);
    c
}

/// Integrates the moment equation, returning `C` at every output time.
pub fn propagate_moments(
    h: &SiteHamiltonian,
    bath: &BathSpec,
    c0: &DMatrix<Complex64>,
    times: &[f64],
    options: &IntegratorOptions,
) -> Result<Vec<DMatrix<Complex64>>, OpenError> {
    let generator = MomentGenerator::new(h, bath)?;
    let n = generator.n_sites();
    if c0.nrows() != n || c0.ncols() != n {
        return Err(OpenError::Dimension { expected: n, got: c0.nrows() });
    }
    let mut y = c0.as_slice().to_vec();
    let mut out = Vec::with_capacity(times.len());
    integrate(
        |_, c, dc| generator.apply(c, dc),
        0.0,
        &mut y,
        times,
        options,
        |_, _, c| {
            out.push(DMatrix::from_column_slice(n, n, c));
            Ok::<(), OpenError>(())
        },
    )
    .map_err(|e| match e {
        IntegrateError::Failure(f) => OpenError::Integration(f),
        IntegrateError::Observer(e) => e,
    })?;
    Ok(out)
}

/// Closed form for uniform damping:
/// `C(t) = e^{−γt} e^{iht} C₀ e^{−iht} + n̄ (1 − e^{−γt}) I`.
pub fn spectral_moments(
    h: &SiteHamiltonian,
    bath: &BathSpec,
    c0: &DMatrix<Complex64>,
    times: &[f64],
) -> Result<Vec<DMatrix<Complex64>>, OpenError> {
    let n = h.n_sites();
    bath.validate(n)?;
    let gamma = bath
        .uniform_gamma()
        .ok_or_else(|| OpenError::InvalidBath("closed-form moments need a uniform damping rate".into()))?;
    if c0.nrows() != n || c0.ncols() != n {
        return Err(OpenError::Dimension { expected: n, got: c0.nrows() });
    }
    let eig = SymmetricEigen::new(h.dense());
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let vt = v.transpose();
    // C₀ in the eigenbasis
    let c_eig = &vt * c0 * &v;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let decay = (-gamma * t).exp();
        let mut rotated = c_eig.clone();
        for q in 0..n {
            for p in 0..n {
                rotated[(p, q)] *= Complex64::from_polar(decay, (eig.eigenvalues[p] - eig.eigenvalues[q]) * t);
            }
        }
        let mut c = &v * rotated * &vt;
        let fill = bath.nbar * (1.0 - decay);
        for k in 0..n {
            c[(k, k)] += fill;
        }
        out.push(c);
    }
    Ok(out)
}

/// Site populations for one quantum started on `site`, by the closed form.
/// With `C₀ = e_s e_sᵀ` the coherent part is rank one, `φφ†` with
/// `φ = e^{iht} e_s`, so only `O(N²)` work is needed per time.
pub fn spectral_single_excitation_populations(
    h: &SiteHamiltonian,
    bath: &BathSpec,
    site: usize,
    times: &[f64],
) -> Result<Vec<Vec<f64>>, OpenError> {
    let n = h.n_sites();
    bath.validate(n)?;
    let gamma = bath
        .uniform_gamma()
        .ok_or_else(|| OpenError::InvalidBath("closed-form moments need a uniform damping rate".into()))?;
    if site >= n {
        return Err(OpenError::Dimension { expected: n, got: site + 1 });
    }
    let eig = SymmetricEigen::new(h.dense());
    let v = &eig.eigenvectors;
    let weights: Vec<f64> = (0..n).map(|k| v[(site, k)]).collect();
    let mut out = Vec::with_capacity(times.len());
    let mut phase = vec![Complex64::new(0.0, 0.0); n];
    for &t in times {
        let decay = (-gamma * t).exp();
        for (k, p) in phase.iter_mut().enumerate() {
            *p = Complex64::from_polar(weights[k], eig.eigenvalues[k] * t);
        }
        let fill = bath.nbar * (1.0 - decay);
        let pops = (0..n)
            .map(|j| {
                let phi: Complex64 = (0..n).map(|k| phase[k] * v[(j, k)]).sum();
                decay * phi.norm_sqr() + fill
            })
            .collect();
        out.push(pops);
    }
    Ok(out)
}

/// Site populations `C_jj`.
pub fn moment_populations(c: &DMatrix<Complex64>) -> Vec<f64> {
    c.diagonal().iter().map(|z| z.re).collect()
}
