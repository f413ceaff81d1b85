//! Unitary dynamics and spectral diagnostics in the one-excitation sector.

mod state;
pub mod tridiag;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::model::SiteHamiltonian;

pub use state::{PopulationProfile, PureState, StateBasis, NORM_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosedError {
    #[error("state has dimension {got}, Hamiltonian expects {expected}")]
    BasisMismatch { expected: usize, got: usize },
    #[error("state is not normalised (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("exponential fit needs {needed} usable sites on a wing, found at most {found}")]
    FitInsufficient { needed: usize, found: usize },
    #[error("no output time falls inside the ballistic window")]
    EmptyWindow,
    #[error("center site {center} outside a chain of {n_sites}")]
    CenterOutOfRange { center: usize, n_sites: usize },
}

/// Exact propagator `exp(−iHt)` from a full eigendecomposition.
#[derive(Debug, Clone)]
pub struct UnitaryPropagator {
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
    basis: StateBasis,
}

impl UnitaryPropagator {
    pub fn new(h: DMatrix<f64>, basis: StateBasis) -> Result<Self, ClosedError> {
        if h.nrows() != basis.dim() || h.ncols() != basis.dim() {
            return Err(ClosedError::BasisMismatch { expected: basis.dim(), got: h.nrows() });
        }
        let eig = SymmetricEigen::new(h);
        Ok(Self { energies: eig.eigenvalues, vectors: eig.eigenvectors, basis })
    }

    pub fn from_site_hamiltonian(h: &SiteHamiltonian) -> Self {
        let n = h.n_sites();
        Self::new(h.dense(), StateBasis::Sites(n)).expect("dimension matches by construction")
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// `ψ(t) = exp(−iHt) ψ₀` at each requested time. `t = 0` returns `ψ₀`
    /// unchanged.
    pub fn evolve(&self, psi0: &PureState, times: &[f64]) -> Result<Vec<PureState>, ClosedError> {
        if !psi0.basis.same_as(&self.basis) {
            return Err(ClosedError::BasisMismatch { expected: self.basis.dim(), got: psi0.basis.dim() });
        }
        let n = self.energies.len();
        let vt = self.vectors.transpose();
        let coeffs: Vec<Complex64> = (0..n)
            .map(|k| vt.row(k).iter().zip(psi0.amplitudes.iter()).map(|(v, a)| a * *v).sum())
            .collect();
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if t == 0.0 {
                out.push(psi0.clone());
                continue;
            }
            let phased: Vec<Complex64> = coeffs
                .iter()
                .zip(self.energies.iter())
                .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t))
                .collect();
            let mut amp = DVector::<Complex64>::zeros(n);
            for (k, c) in phased.iter().enumerate() {
                let col = self.vectors.column(k);
                for (a, &v) in amp.iter_mut().zip(col.iter()) {
                    *a += c * v;
                }
            }
            out.push(PureState { amplitudes: amp, basis: psi0.basis.clone() });
        }
        Ok(out)
    }
}

/// Convenience wrapper around [`UnitaryPropagator`].
pub fn evolve_pure(
    h: DMatrix<f64>,
    basis: StateBasis,
    psi0: &PureState,
    times: &[f64],
) -> Result<Vec<PureState>, ClosedError> {
    UnitaryPropagator::new(h, basis)?.evolve(psi0, times)
}

/// First moment and spread of a site distribution, sites numbered `1..=N`.
pub fn site_moments(p: &[f64]) -> (f64, f64) {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (i, &w) in p.iter().enumerate() {
        let j = (i + 1) as f64;
        m1 += j * w;
        m2 += j * j * w;
    }
    (m1, (m2 - m1 * m1).max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateDispersion {
    pub energy: f64,
    /// `λ₁ − λ₀`, zero for a single site.
    pub gap: f64,
    pub n_av: f64,
    pub delta_n: f64,
    /// `Δn / n_av`.
    pub relative: f64,
    /// Set when the two lowest levels are closer than `1e-12 ‖H‖`; the
    /// reported vector is then an arbitrary member of the degenerate pair.
    pub degenerate: bool,
}

/// Site-population statistics of the lowest eigenvector.
pub fn ground_state_dispersion(h: &SiteHamiltonian) -> GroundStateDispersion {
    let n = h.n_sites();
    let (energy, gap, vector) = if h.is_tridiagonal() {
        let off = vec![h.hopping; n.saturating_sub(1)];
        let e0 = tridiag::kth_eigenvalue(&h.onsite, &off, 0);
        let gap = if n > 1 { tridiag::kth_eigenvalue(&h.onsite, &off, 1) - e0 } else { 0.0 };
        (e0, gap, tridiag::eigenvector(&h.onsite, &off, e0))
    } else {
        let eig = SymmetricEigen::new(h.dense());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let e0 = eig.eigenvalues[order[0]];
        let gap = if n > 1 { eig.eigenvalues[order[1]] - e0 } else { 0.0 };
        (e0, gap, eig.eigenvectors.column(order[0]).iter().copied().collect())
    };
    let norm_h = h.onsite.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 2.0 * h.hopping.abs();
    let degenerate = n > 1 && gap <= 1e-12 * norm_h;
    if degenerate {
        log::debug!("degenerate ground state (gap {gap:e})");
    }
    let p: Vec<f64> = vector.iter().map(|v| v * v).collect();
    let (n_av, delta_n) = site_moments(&p);
    GroundStateDispersion { energy, gap, n_av, delta_n, relative: delta_n / n_av, degenerate }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub floor: f64,
    pub min_sites_per_wing: usize,
    /// Fits below this coefficient of determination are flagged as not
    /// exponential.
    pub min_r_squared: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { floor: 1e-12, min_sites_per_wing: 5, min_r_squared: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationFit {
    /// Localization length in sites, from `p_j ∝ exp(−2|j − c|/ξ)`.
    pub xi: f64,
    pub r_squared: f64,
    pub sites_used: usize,
    pub exponential: bool,
}

/// Least-squares fit of `ln p_j` against `|j − c|` over both wings.
pub fn localization_length_fit(
    profile: &PopulationProfile,
    center: usize,
    options: FitOptions,
) -> Result<LocalizationFit, ClosedError> {
    let p = &profile.populations;
    if center >= p.len() {
        return Err(ClosedError::CenterOutOfRange { center, n_sites: p.len() });
    }
    let left: Vec<(f64, f64)> = (0..center)
        .rev()
        .map(|j| ((center - j) as f64, p[j]))
        .filter(|&(_, w)| w > options.floor)
        .collect();
    let right: Vec<(f64, f64)> = (center + 1..p.len())
        .map(|j| ((j - center) as f64, p[j]))
        .filter(|&(_, w)| w > options.floor)
        .collect();
    let mut points = Vec::new();
    for wing in [&left, &right] {
        if wing.len() >= options.min_sites_per_wing {
            points.extend(wing.iter().map(|&(r, w)| (r, w.ln())));
        }
    }
    if points.is_empty() {
        return Err(ClosedError::FitInsufficient {
            needed: options.min_sites_per_wing,
            found: left.len().max(right.len()),
        });
    }
    let (slope, _intercept, r_squared) = linear_fit(&points);
    let xi = -2.0 / slope;
    Ok(LocalizationFit {
        xi,
        r_squared,
        sites_used: points.len(),
        exponential: slope < 0.0 && r_squared >= options.min_r_squared,
    })
}

/// Ordinary least squares `y = a x + b`, returning `(a, b, R²)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - a * p.0 - b).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    (a, b, r2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadFit {
    pub times: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Fitted `v` in `σ = v t`.
    pub velocity: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points_used: usize,
}

/// Standard deviation of the site distribution over time and a fit of
/// `σ = v t` through the origin. Only times before the ballistic front
/// (`2|J|t`) reaches the nearer chain edge are fitted, further restricted to
/// `window` when given.
pub fn ctqw_spread(
    states: &[PureState],
    times: &[f64],
    center: usize,
    coupling: f64,
    window: Option<(f64, f64)>,
) -> Result<SpreadFit, ClosedError> {
    assert_eq!(states.len(), times.len(), "one state per time");
    let sigma: Vec<f64> = states.iter().map(|s| site_moments(&s.populations()).1).collect();
    let n = states.first().map(|s| s.basis.n_sites()).unwrap_or(0);
    fit_spread(times, &sigma, n, center, coupling, window)
}

/// The fitting half of [`ctqw_spread`], for an already computed `σ(t)`.
pub fn fit_spread(
    times: &[f64],
    sigma: &[f64],
    n_sites: usize,
    center: usize,
    coupling: f64,
    window: Option<(f64, f64)>,
) -> Result<SpreadFit, ClosedError> {
    if center >= n_sites {
        return Err(ClosedError::CenterOutOfRange { center, n_sites });
    }
    let edge = center.min(n_sites - 1 - center) as f64;
    let (lo, hi) = window.unwrap_or((0.0, f64::INFINITY));
    let fitted: Vec<(f64, f64)> = times
        .iter()
        .zip(sigma)
        .filter(|(&t, _)| t > 0.0 && t >= lo && t <= hi && 2.0 * coupling.abs() * t < edge)
        .map(|(&t, &s)| (t, s))
        .collect();
    if fitted.is_empty() {
        return Err(ClosedError::EmptyWindow);
    }
    let stt: f64 = fitted.iter().map(|p| p.0 * p.0).sum();
    let sts: f64 = fitted.iter().map(|p| p.0 * p.1).sum();
    let velocity = sts / stt;
    let mean = fitted.iter().map(|p| p.1).sum::<f64>() / fitted.len() as f64;
    let ss_tot: f64 = fitted.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = fitted.iter().map(|p| (p.1 - velocity * p.0).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SpreadFit {
        times: times.to_vec(),
        sigma: sigma.to_vec(),
        velocity,
        r_squared,
        window: (fitted[0].0, fitted[fitted.len() - 1].0),
        points_used: fitted.len(),
    })
}

/// Time average of the site populations over `times >= discard_before`.
pub fn time_averaged_profile(states: &[PureState], times: &[f64], discard_before: f64) -> Option<PopulationProfile> {
    let kept: Vec<&PureState> =
        states.iter().zip(times).filter(|(_, &t)| t >= discard_before).map(|(s, _)| s).collect();
    let first = kept.first()?;
    let mut acc = vec![0.0; first.basis.n_sites()];
    for s in &kept {
        for (a, p) in acc.iter_mut().zip(s.populations()) {
            *a += p;
        }
    }
    acc.iter_mut().for_each(|a| *a /= kept.len() as f64);
    let t_mid = times.iter().copied().filter(|&t| t >= discard_before).fold(0.0, f64::max);
    Some(PopulationProfile::new(t_mid, acc))
}
