use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::OpenError;
use crate::closed::{PureState, StateBasis};
use crate::model::{build_fock_basis, FockBasis};

/// Density operator over a truncated Fock basis, stored densely.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub data: DMatrix<Complex64>,
    pub basis: Arc<FockBasis>,
}

pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-8;
pub const POSITIVITY_TOLERANCE: f64 = 1e-7;

impl DensityMatrix {
    /// Checks shape, Hermiticity and trace.
    pub fn new(data: DMatrix<Complex64>, basis: Arc<FockBasis>) -> Result<Self, OpenError> {
        let d = basis.dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(OpenError::Dimension { expected: d, got: data.nrows() });
        }
        let rho = Self { data, basis };
        let herm = rho.hermiticity_error();
        if herm > HERMITICITY_TOLERANCE {
            return Err(OpenError::InvalidState(format!("not Hermitian (max asymmetry {herm:e})")));
        }
        let drift = (rho.trace() - 1.0).abs();
        if drift > TRACE_TOLERANCE {
            return Err(OpenError::InvalidState(format!("trace off by {drift:e}")));
        }
        Ok(rho)
    }

    pub fn from_pure(psi: &PureState) -> Result<Self, OpenError> {
        let StateBasis::Fock(basis) = &psi.basis else {
            return Err(OpenError::InvalidState("pure state must live in a Fock basis".into()));
        };
        let v = &psi.amplitudes;
        Ok(Self { data: v * v.adjoint(), basis: basis.clone() })
    }

    /// `|1_site⟩⟨1_site|`.
    pub fn single_excitation(basis: Arc<FockBasis>, site: usize) -> Self {
        let d = basis.dim();
        let i = basis.single_excitation(site);
        let mut data = DMatrix::zeros(d, d);
        data[(i, i)] = Complex64::new(1.0, 0.0);
        Self { data, basis }
    }

    /// Product of per-site thermal states `∝ Π x^{n_j}` with `x = n̄/(n̄+1)`,
    /// restricted to the basis and renormalised.
    pub fn truncated_thermal(basis: Arc<FockBasis>, nbar: f64) -> Self {
        let d = basis.dim();
        let x = nbar / (nbar + 1.0);
        let weights: Vec<f64> = (0..d).map(|i| x.powi(basis.total(i) as i32)).collect();
        let z: f64 = weights.iter().sum();
        let data = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            weights.iter().map(|w| Complex64::new(w / z, 0.0)),
        ));
        Self { data, basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn trace(&self) -> f64 {
        self.data.diagonal().iter().map(|z| z.re).sum()
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(self.data.as_slice(), self.dim())
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `⟨n_j⟩` for every site.
    pub fn populations(&self) -> Vec<f64> {
        populations(self.data.as_slice(), &self.basis)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data.iter().zip(other.data.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn hermiticity_error(rho: &[Complex64], d: usize) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..d {
        for r in c..d {
            let diff = (rho[c * d + r] - rho[r * d + c].conj()).norm();
            worst = worst.max(diff);
        }
    }
    worst
}

pub(crate) fn populations(rho: &[Complex64], basis: &FockBasis) -> Vec<f64> {
    let d = basis.dim();
    let mut pops = vec![0.0; basis.n_sites()];
    for i in 0..d {
        let w = rho[i * d + i].re;
        if w == 0.0 {
            continue;
        }
        for (p, &n) in pops.iter_mut().zip(basis.state(i)) {
            *p += n as f64 * w;
        }
    }
    pops
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"NEMRHO01";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Writes `ρ` with a header holding the format version, the basis cutoffs and
/// the time stamp, followed by little-endian `(re, im)` pairs in column-major
/// order.
pub fn write_snapshot<W: Write>(mut out: W, rho: &DensityMatrix, time: f64) -> std::io::Result<()> {
    let cut = rho.basis.cutoffs();
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    out.write_all(&(cut.n_sites as u64).to_le_bytes())?;
    out.write_all(&[cut.n_max, cut.max_total])?;
    out.write_all(&(rho.dim() as u64).to_le_bytes())?;
    out.write_all(&time.to_le_bytes())?;
    for z in rho.data.iter() {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a snapshot, rebuilding its basis. Returns the matrix and time.
pub fn read_snapshot<R: Read>(mut input: R) -> Result<(DensityMatrix, f64), OpenError> {
    let bad = |m: &str| OpenError::Snapshot(m.to_string());
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(bad("not a density-matrix snapshot"));
    }
    let mut u32b = [0u8; 4];
    let mut u64b = [0u8; 8];
    input.read_exact(&mut u32b)?;
    let version = u32::from_le_bytes(u32b);
    if version != SNAPSHOT_VERSION {
        return Err(bad(&format!("unsupported snapshot version {version}")));
    }
    input.read_exact(&mut u64b)?;
    let n_sites = u64::from_le_bytes(u64b) as usize;
    let mut cut = [0u8; 2];
    input.read_exact(&mut cut)?;
    input.read_exact(&mut u64b)?;
    let dim = u64::from_le_bytes(u64b) as usize;
    input.read_exact(&mut u64b)?;
    let time = f64::from_le_bytes(u64b);
    let basis = build_fock_basis(n_sites, cut[0], cut[1]).map_err(|e| bad(&e.to_string()))?;
    if basis.dim() != dim {
        return Err(bad("dimension does not match the recorded cutoffs"));
    }
    let mut data = DMatrix::zeros(dim, dim);
    for z in data.iter_mut() {
        input.read_exact(&mut u64b)?;
        let re = f64::from_le_bytes(u64b);
        input.read_exact(&mut u64b)?;
        *z = Complex64::new(re, f64::from_le_bytes(u64b));
    }
    Ok((DensityMatrix { data, basis: Arc::new(basis) }, time))
}
