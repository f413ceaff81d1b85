//! Two-site reduced states, Wootters concurrence and concurrence maps along
//! the chain.

use std::collections::HashMap;

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::closed::{PureState, StateBasis};
use crate::model::FockBasis;
use crate::open::DensityMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntanglementError {
    #[error("sites must differ (got {0} twice)")]
    SameSite(usize),
    #[error("site {site} outside a chain of {n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("not a valid two-qubit state: eigenvalue {0:e}")]
    InvalidState(f64),
    #[error("qubit projection keeps no weight")]
    EmptyProjection,
    #[error("state has weight {0:e} outside the zero- and one-excitation sectors")]
    Inapplicable(f64),
}

/// Weight outside the qubit subspace or sectors tolerated as rounding noise.
pub const SECTOR_TOLERANCE: f64 = 1e-9;
/// Concurrence values below this are reported as exactly zero.
pub const FLUSH_TO_ZERO: f64 = 1e-12;
const NEGATIVE_CLAMP: f64 = 1e-12;
const NEGATIVE_ERROR: f64 = 1e-9;

/// Borrowed view of either kind of state.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a PureState> for StateRef<'a> {
    fn from(s: &'a PureState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    pub fn n_sites(&self) -> usize {
        match self {
            StateRef::Pure(p) => p.basis.n_sites(),
            StateRef::Mixed(m) => m.basis.n_sites(),
        }
    }
}

/// Two-site state over `{|00⟩, |01⟩, |10⟩, |11⟩}`, the first label being
/// site `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    pub rho: Matrix4<Complex64>,
    pub sites: (usize, usize),
    /// Probability removed by projecting each site onto occupations 0 and 1.
    pub trace_deficit: f64,
}

impl TwoQubitState {
    /// Wraps a 4×4 matrix, normalising its trace.
    pub fn from_matrix(rho: Matrix4<Complex64>) -> Result<Self, EntanglementError> {
        let tr: f64 = rho.diagonal().iter().map(|z| z.re).sum();
        if tr <= 0.0 {
            return Err(EntanglementError::EmptyProjection);
        }
        Ok(Self { rho: rho / Complex64::new(tr, 0.0), sites: (0, 1), trace_deficit: 0.0 })
    }
}

fn check_sites(n: usize, i: usize, j: usize) -> Result<(), EntanglementError> {
    if i == j {
        return Err(EntanglementError::SameSite(i));
    }
    for s in [i, j] {
        if s >= n {
            return Err(EntanglementError::SiteOutOfRange { site: s, n_sites: n });
        }
    }
    Ok(())
}

/// Qubit label of a Fock state for the pair, or `None` if either site holds
/// more than one quantum.
fn qubit_index(occ: &[u8], i: usize, j: usize) -> Option<usize> {
    let (a, b) = (occ[i], occ[j]);
    (a <= 1 && b <= 1).then_some(2 * a as usize + b as usize)
}

/// Occupations of every other site, used to match environment states.
fn environment_key(occ: &[u8], i: usize, j: usize) -> Vec<u8> {
    occ.iter().enumerate().filter(|&(k, _)| k != i && k != j).map(|(_, &n)| n).collect()
}

/// Index groups sharing the same environment, each entry `(basis index, qubit)`.
fn environment_groups(basis: &FockBasis, i: usize, j: usize) -> Vec<Vec<(usize, usize)>> {
    let mut map: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for (idx, occ) in basis.states().iter().enumerate() {
        let Some(q) = qubit_index(occ, i, j) else { continue };
        let key = environment_key(occ, i, j);
        let g = *map.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push((idx, q));
    }
    groups
}

/// Partial trace over all sites but `i` and `j`, projected onto occupations
/// {0, 1} per site and renormalised.
pub fn reduce_two_site(state: StateRef<'_>, i: usize, j: usize) -> Result<TwoQubitState, EntanglementError> {
    check_sites(state.n_sites(), i, j)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut rho = Matrix4::from_element(zero);
    let total;
    match state {
        StateRef::Pure(p) => match &p.basis {
            StateBasis::Sites(_) => {
                // one quantum somewhere: the environment is either empty or
                // holds the quantum, which leaves the pair in |00⟩
                let a = &p.amplitudes;
                let (ai, aj) = (a[i], a[j]);
                let norm: f64 = a.iter().map(|z| z.norm_sqr()).sum();
                rho[(1, 1)] = aj * aj.conj();
                rho[(2, 2)] = ai * ai.conj();
                rho[(1, 2)] = aj * ai.conj();
                rho[(2, 1)] = ai * aj.conj();
                rho[(0, 0)] = Complex64::new(norm - ai.norm_sqr() - aj.norm_sqr(), 0.0);
                total = norm;
            }
            StateBasis::Fock(basis) => {
                for group in environment_groups(basis, i, j) {
                    let mut v = [zero; 4];
                    for &(idx, q) in &group {
                        v[q] += p.amplitudes[idx];
                    }
                    for r in 0..4 {
                        for c in 0..4 {
                            rho[(r, c)] += v[r] * v[c].conj();
                        }
                    }
                }
                total = p.amplitudes.iter().map(|z| z.norm_sqr()).sum();
            }
        },
        StateRef::Mixed(m) => {
            for group in environment_groups(&m.basis, i, j) {
                for &(r_idx, r_q) in &group {
                    for &(c_idx, c_q) in &group {
                        rho[(r_q, c_q)] += m.data[(r_idx, c_idx)];
                    }
                }
            }
            total = m.trace();
        }
    }
    let kept: f64 = rho.diagonal().iter().map(|z| z.re).sum();
    if kept <= 0.0 {
        return Err(EntanglementError::EmptyProjection);
    }
    let trace_deficit = ((total - kept) / total).max(0.0);
    Ok(TwoQubitState { rho: rho / Complex64::new(kept, 0.0), sites: (i, j), trace_deficit })
}

fn sigma_yy() -> Matrix4<Complex64> {
    // σ_y ⊗ σ_y is real: anti-diagonal (−1, 1, 1, −1)
    let mut m = Matrix4::from_element(Complex64::new(0.0, 0.0));
    m[(0, 3)] = Complex64::new(-1.0, 0.0);
    m[(1, 2)] = Complex64::new(1.0, 0.0);
    m[(2, 1)] = Complex64::new(1.0, 0.0);
    m[(3, 0)] = Complex64::new(-1.0, 0.0);
    m
}

fn hermitian_part(m: &Matrix4<Complex64>) -> Matrix4<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn finish(mut e: [f64; 4]) -> f64 {
    e.sort_by(|a, b| b.total_cmp(a));
    let c = (e[0] - e[1] - e[2] - e[3]).clamp(0.0, 1.0);
    if c < FLUSH_TO_ZERO {
        0.0
    } else {
        c
    }
}

/// Wootters concurrence `max(0, e₁ − e₂ − e₃ − e₄)`. The `e_k` (square roots of
/// the eigenvalues of `ρρ̃`) are taken as the singular values of
/// `τ = Wᵀ (σ_y⊗σ_y) W` with `ρ = W W†`, which avoids square roots of tiny
/// eigenvalues.
pub fn concurrence(state: &TwoQubitState) -> Result<f64, EntanglementError> {
    let eig = SymmetricEigen::new(hermitian_part(&state.rho));
    let mut w = eig.eigenvectors;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -NEGATIVE_ERROR {
            return Err(EntanglementError::InvalidState(lam));
        }
        let s = Complex64::new(lam.max(0.0).sqrt(), 0.0);
        w.column_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    let tau = w.transpose() * sigma_yy() * w;
    let sv = tau.singular_values();
    Ok(finish([sv[0], sv[1], sv[2], sv[3]]))
}

/// Same quantity through the Hermitian matrix `√ρ ρ̃ √ρ`, whose eigenvalues
/// equal those of `ρρ̃`. Kept as an independent route for cross-checks.
pub fn concurrence_hermitian(state: &TwoQubitState) -> Result<f64, EntanglementError> {
    let rho = hermitian_part(&state.rho);
    let eig = SymmetricEigen::new(rho);
    if let Some(&lam) = eig.eigenvalues.iter().find(|&&l| l < -NEGATIVE_ERROR) {
        return Err(EntanglementError::InvalidState(lam));
    }
    let sqrt_vals = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    let sqrt_rho = eig.eigenvectors * Matrix4::from_diagonal(&sqrt_vals) * eig.eigenvectors.adjoint();
    let yy = sigma_yy();
    let rho_tilde = yy * rho.conjugate() * yy;
    let r = hermitian_part(&(sqrt_rho * rho_tilde * sqrt_rho));
    let vals = SymmetricEigen::new(r).eigenvalues;
    let mut e = [0.0; 4];
    for (k, &l) in vals.iter().enumerate() {
        if l < -NEGATIVE_ERROR {
            return Err(EntanglementError::InvalidState(l));
        }
        e[k] = if l < NEGATIVE_CLAMP { 0.0 } else { l.sqrt() };
    }
    Ok(finish(e))
}

/// `2|⟨1_i|ρ|1_j⟩|`, valid when the state lives in the vacuum and
/// one-excitation sectors.
pub fn single_excitation_concurrence_oracle(state: StateRef<'_>, i: usize, j: usize) -> Result<f64, EntanglementError> {
    check_sites(state.n_sites(), i, j)?;
    match state {
        StateRef::Pure(p) => match &p.basis {
            StateBasis::Sites(_) => Ok(2.0 * (p.amplitudes[i] * p.amplitudes[j]).norm()),
            StateBasis::Fock(basis) => {
                let outside: f64 =
                    (0..basis.dim()).filter(|&k| basis.total(k) > 1).map(|k| p.amplitudes[k].norm_sqr()).sum();
                if outside > SECTOR_TOLERANCE {
                    return Err(EntanglementError::Inapplicable(outside));
                }
                let (a, b) = (basis.single_excitation(i), basis.single_excitation(j));
                Ok(2.0 * (p.amplitudes[a] * p.amplitudes[b]).norm())
            }
        },
        StateRef::Mixed(m) => {
            let basis = &m.basis;
            let outside: f64 = (0..basis.dim()).filter(|&k| basis.total(k) > 1).map(|k| m.data[(k, k)].re).sum();
            if outside > SECTOR_TOLERANCE {
                return Err(EntanglementError::Inapplicable(outside));
            }
            let (a, b) = (basis.single_excitation(i), basis.single_excitation(j));
            Ok(2.0 * m.data[(a, b)].norm() / m.trace())
        }
    }
}

/// A maximal run of samples with concurrence exactly zero, bounded on both
/// sides by positive samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SuddenDeath {
    pub site: usize,
    pub first_index: usize,
    pub last_index: usize,
    pub start_time: f64,
    pub end_time: f64,
}

/// `C(center, j)` for every `j ≠ center` at each recorded time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConcurrenceMap {
    pub center: usize,
    pub sites: Vec<usize>,
    pub times: Vec<f64>,
    /// `values[t][k]` belongs to `sites[k]`.
    pub values: Vec<Vec<f64>>,
    pub trace_deficits: Vec<Vec<f64>>,
}

impl ConcurrenceMap {
    pub fn new(n_sites: usize, center: usize) -> Self {
        Self { center, sites: (0..n_sites).filter(|&j| j != center).collect(), ..Self::default() }
    }

    /// Appends the concurrences of one state.
    pub fn push(&mut self, time: f64, state: StateRef<'_>) -> Result<(), EntanglementError> {
        let center = self.center;
        let row: Result<Vec<(f64, f64)>, EntanglementError> = self
            .sites
            .par_iter()
            .map(|&j| {
                let two = reduce_two_site(state, center, j)?;
                Ok((concurrence(&two)?, two.trace_deficit))
            })
            .collect();
        let (values, deficits) = row?.into_iter().unzip();
        self.times.push(time);
        self.values.push(values);
        self.trace_deficits.push(deficits);
        Ok(())
    }

    /// Time series for the `k`-th entry of `sites`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[k]).collect()
    }

    pub fn sudden_deaths(&self) -> Vec<SuddenDeath> {
        let mut out = Vec::new();
        for (k, &site) in self.sites.iter().enumerate() {
            let series = self.column(k);
            for (first, last) in zero_runs(&series) {
                out.push(SuddenDeath {
                    site,
                    first_index: first,
                    last_index: last,
                    start_time: self.times[first],
                    end_time: self.times[last],
                });
            }
        }
        out
    }
}

/// Index ranges of exact-zero runs with a positive sample on each side.
pub fn zero_runs(series: &[f64]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut k = 0;
    while k < series.len() {
        if series[k] == 0.0 {
            let start = k;
            while k < series.len() && series[k] == 0.0 {
                k += 1;
            }
            if start > 0 && k < series.len() && series[start - 1] > 0.0 && series[k] > 0.0 {
                runs.push((start, k - 1));
            }
        } else {
            k += 1;
        }
    }
    runs
}

/// Builds the map from a time-ordered sequence of states.
pub fn concurrence_map<'a, I>(states: I, n_sites: usize, center: usize) -> Result<ConcurrenceMap, EntanglementError>
where
    I: IntoIterator<Item = (f64, StateRef<'a>)>,
{
    if center >= n_sites {
        return Err(EntanglementError::SiteOutOfRange { site: center, n_sites });
    }
    let mut map = ConcurrenceMap::new(n_sites, center);
    for (t, s) in states {
        map.push(t, s)?;
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn werner(p: f64) -> TwoQubitState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = nalgebra::Vector4::new(c(s), c(0.0), c(0.0), c(s));
        let rho = phi * phi.adjoint() * c(p) + Matrix4::identity() * c((1.0 - p) / 4.0);
        TwoQubitState::from_matrix(rho).unwrap()
    }

    #[test]
    fn werner_family() {
        for p in [0.0, 1.0 / 3.0, 0.6, 1.0, 0.9] {
            let expected = ((3.0 * p - 1.0) / 2.0f64).max(0.0);
            let got = concurrence(&werner(p)).unwrap();
            assert!((got - expected).abs() < 1e-10, "p={p}: {got} vs {expected}");
            assert!((concurrence_hermitian(&werner(p)).unwrap() - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn product_and_bell_states() {
        let mut prod = Matrix4::from_element(c(0.0));
        prod[(1, 1)] = c(1.0);
        assert_eq!(concurrence(&TwoQubitState::from_matrix(prod).unwrap()).unwrap(), 0.0);
        let psi = PureState::new(
            DVector::from_vec(vec![c(std::f64::consts::FRAC_1_SQRT_2), c(std::f64::consts::FRAC_1_SQRT_2)]),
            StateBasis::Sites(2),
        )
        .unwrap();
        let two = reduce_two_site((&psi).into(), 0, 1).unwrap();
        assert_eq!(two.trace_deficit, 0.0);
        assert!((concurrence(&two).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_states() {
        let mut m = Matrix4::from_element(c(0.0));
        m[(0, 0)] = c(1.2);
        m[(1, 1)] = c(-0.2);
        let s = TwoQubitState { rho: m, sites: (0, 1), trace_deficit: 0.0 };
        assert!(matches!(concurrence(&s), Err(EntanglementError::InvalidState(_))));
    }

    #[test]
    fn zero_runs_need_positive_edges() {
        let s = [0.0, 0.2, 0.0, 0.0, 0.1, 0.0];
        assert_eq!(zero_runs(&s), vec![(2, 3)]);
        assert!(zero_runs(&[0.1, 0.1]).is_empty());
    }

    #[test]
    fn site_checks() {
        let psi = PureState::localized(3, 1);
        assert_eq!(reduce_two_site((&psi).into(), 1, 1).unwrap_err(), EntanglementError::SameSite(1));
        assert!(matches!(
            reduce_two_site((&psi).into(), 0, 3),
            Err(EntanglementError::SiteOutOfRange { site: 3, .. })
        ));
    }
}
