use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::DensityMatrix;
use super::OpenError;
use crate::model::{CsrMatrix, FockBasis, LadderOp};

/// Independent thermal bath on every site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    /// Damping rate of each site, in the same time unit as the Hamiltonian.
    pub gamma: Vec<f64>,
    /// Mean thermal occupation shared by all baths.
    pub nbar: f64,
}

impl BathSpec {
    pub fn uniform(n_sites: usize, gamma: f64, nbar: f64) -> Self {
        Self { gamma: vec![gamma; n_sites], nbar }
    }

    pub fn validate(&self, n_sites: usize) -> Result<(), OpenError> {
        if self.gamma.len() != n_sites {
            return Err(OpenError::Dimension { expected: n_sites, got: self.gamma.len() });
        }
        if let Some(g) = self.gamma.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(OpenError::InvalidBath(format!("damping rate {g} must be finite and non-negative")));
        }
        if !(self.nbar.is_finite() && self.nbar >= 0.0) {
            return Err(OpenError::InvalidBath(format!("thermal occupation {} must be non-negative", self.nbar)));
        }
        Ok(())
    }

    /// The common rate when every site has the same damping.
    pub fn uniform_gamma(&self) -> Option<f64> {
        let first = *self.gamma.first()?;
        self.gamma.iter().all(|&g| g == first).then_some(first)
    }
}

/// Right-hand side of the thermal master equation on a truncated Fock basis.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    h: CsrMatrix,
    basis: Arc<FockBasis>,
    bath: BathSpec,
    lowering: Vec<LadderOp>,
    /// Diagonal of `Σ_j γ_j/2 [(n̄+1) a_j†a_j + n̄ a_j a_j†]`.
    anti: Vec<f64>,
}

impl LindbladGenerator {
    pub fn new(h: CsrMatrix, basis: Arc<FockBasis>, bath: BathSpec) -> Result<Self, OpenError> {
        let d = basis.dim();
        if h.dim() != d {
            return Err(OpenError::Dimension { expected: d, got: h.dim() });
        }
        bath.validate(basis.n_sites())?;
        let lowering: Vec<LadderOp> = (0..basis.n_sites()).map(|j| basis.annihilation(j)).collect();
        let mut anti = vec![0.0; d];
        for (j, a) in lowering.iter().enumerate() {
            let g = bath.gamma[j];
            if g == 0.0 {
                continue;
            }
            let n_op = a.dagger_times_self_diagonal(d);
            let raised = basis.creation(j).dagger_times_self_diagonal(d);
            for i in 0..d {
                anti[i] += 0.5 * g * ((bath.nbar + 1.0) * n_op[i] + bath.nbar * raised[i]);
            }
        }
        Ok(Self { h, basis, bath, lowering, anti })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn bath(&self) -> &BathSpec {
        &self.bath
    }

    pub fn hamiltonian(&self) -> &CsrMatrix {
        &self.h
    }

    /// Overwrites `out` with `L[ρ]`; both are column-major `D×D`.
    pub fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim();
        debug_assert_eq!(rho.len(), d * d);
        debug_assert_eq!(out.len(), d * d);
        let i = Complex64::new(0.0, 1.0);
        for c in 0..d {
            let mc = self.anti[c];
            let col = &rho[c * d..(c + 1) * d];
            for ((o, r), mr) in out[c * d..(c + 1) * d].iter_mut().zip(col).zip(&self.anti) {
                *o = -r * (mr + mc);
            }
        }
        self.h.left_mul_acc(rho, -i, out);
        self.h.right_mul_symmetric_acc(rho, i, out);
        let nbar = self.bath.nbar;
        for (a, &g) in self.lowering.iter().zip(&self.bath.gamma) {
            if g == 0.0 {
                continue;
            }
            let down = g * (nbar + 1.0);
            let up = g * nbar;
            for e2 in &a.entries {
                for e1 in &a.entries {
                    let amp = e1.amplitude * e2.amplitude;
                    // a ρ a†
                    out[e2.to * d + e1.to] += rho[e2.from * d + e1.from] * (down * amp);
                    if up != 0.0 {
                        // a† ρ a
                        out[e2.from * d + e1.from] += rho[e2.to * d + e1.to] * (up * amp);
                    }
                }
            }
        }
    }
}

/// `dρ/dt` for the given Hamiltonian and baths.
pub fn lindblad_rhs(h: &CsrMatrix, bath: &BathSpec, rho: &DensityMatrix) -> Result<DMatrix<Complex64>, OpenError> {
    let generator = LindbladGenerator::new(h.clone(), rho.basis.clone(), bath.clone())?;
    let d = rho.dim();
    let mut out = DMatrix::zeros(d, d);
    generator.apply(rho.data.as_slice(), out.as_mut_slice());
    Ok(out)
}
