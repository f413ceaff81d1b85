use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use super::ClosedError;
use crate::model::FockBasis;

/// Which Hilbert space a state vector lives in.
#[derive(Debug, Clone)]
pub enum StateBasis {
    /// One-excitation sector, amplitude `k` on `|k⟩`.
    Sites(usize),
    Fock(Arc<FockBasis>),
}

impl StateBasis {
    pub fn dim(&self) -> usize {
        match self {
            StateBasis::Sites(n) => *n,
            StateBasis::Fock(b) => b.dim(),
        }
    }

    pub fn n_sites(&self) -> usize {
        match self {
            StateBasis::Sites(n) => *n,
            StateBasis::Fock(b) => b.n_sites(),
        }
    }

    pub fn same_as(&self, other: &StateBasis) -> bool {
        match (self, other) {
            (StateBasis::Sites(a), StateBasis::Sites(b)) => a == b,
            (StateBasis::Fock(a), StateBasis::Fock(b)) => a.cutoffs() == b.cutoffs(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PureState {
    pub amplitudes: DVector<Complex64>,
    pub basis: StateBasis,
}

pub const NORM_TOLERANCE: f64 = 1e-10;

impl PureState {
    pub fn new(amplitudes: DVector<Complex64>, basis: StateBasis) -> Result<Self, ClosedError> {
        if amplitudes.len() != basis.dim() {
            return Err(ClosedError::BasisMismatch { expected: basis.dim(), got: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(ClosedError::NotNormalized { norm });
        }
        Ok(Self { amplitudes, basis })
    }

    /// Single excitation on `site` (zero based) in the site basis.
    pub fn localized(n_sites: usize, site: usize) -> Self {
        let mut amplitudes = DVector::zeros(n_sites);
        amplitudes[site] = Complex64::new(1.0, 0.0);
        Self { amplitudes, basis: StateBasis::Sites(n_sites) }
    }

    /// Single excitation on `site` in a Fock basis.
    pub fn localized_fock(basis: Arc<FockBasis>, site: usize) -> Self {
        let mut amplitudes = DVector::zeros(basis.dim());
        amplitudes[basis.single_excitation(site)] = Complex64::new(1.0, 0.0);
        Self { amplitudes, basis: StateBasis::Fock(basis) }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Mean occupation `⟨n_j⟩` of every site.
    pub fn populations(&self) -> Vec<f64> {
        match &self.basis {
            StateBasis::Sites(_) => self.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
            StateBasis::Fock(b) => {
                let mut pops = vec![0.0; b.n_sites()];
                for (idx, amp) in self.amplitudes.iter().enumerate() {
                    let w = amp.norm_sqr();
                    if w == 0.0 {
                        continue;
                    }
                    for (p, &n) in pops.iter_mut().zip(b.state(idx)) {
                        *p += n as f64 * w;
                    }
                }
                pops
            }
        }
    }
}

/// Site populations at one instant, in units of `1/J` for the time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationProfile {
    pub time: f64,
    pub populations: Vec<f64>,
}

impl PopulationProfile {
    pub fn new(time: f64, populations: Vec<f64>) -> Self {
        Self { time, populations }
    }

    pub fn total(&self) -> f64 {
        self.populations.iter().sum()
    }
}
