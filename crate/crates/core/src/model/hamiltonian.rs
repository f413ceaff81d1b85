use nalgebra::DMatrix;

use super::chain::{Boundary, DisorderRealization, Frame};
use super::fock::FockBasis;
use super::sparse::CsrMatrix;

/// Single-excitation (tight-binding) Hamiltonian: on-site energies plus a
/// uniform nearest-neighbour hopping amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteHamiltonian {
    pub onsite: Vec<f64>,
    pub hopping: f64,
    pub boundary: Boundary,
}

/// Nearest-neighbour links `(j, j+1)`, plus `(N−1, 0)` for a periodic ring of
/// at least three sites.
pub fn links(n_sites: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n_sites.saturating_sub(1)).map(|j| (j, j + 1)).collect();
    if boundary == Boundary::Periodic && n_sites >= 3 {
        out.push((n_sites - 1, 0));
    }
    out
}

impl SiteHamiltonian {
    pub fn n_sites(&self) -> usize {
        self.onsite.len()
    }

    /// True when the matrix is tridiagonal.
    pub fn is_tridiagonal(&self) -> bool {
        self.boundary == Boundary::HardWall || self.n_sites() < 3
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let mut h = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.onsite));
        for (a, b) in links(n, self.boundary) {
            h[(a, b)] += self.hopping;
            h[(b, a)] += self.hopping;
        }
        h
    }

    /// The same chain with the hopping sign flipped (gauge `a_j → (−1)^j a_j`
    /// on open chains).
    pub fn gauge_flipped(&self) -> Self {
        Self { hopping: -self.hopping, ..self.clone() }
    }
}

/// `Σ ω_j |j⟩⟨j| + J(|j⟩⟨j+1| + |j+1⟩⟨j|)` with `+J` hopping.
pub fn build_single_excitation_h(
    real: &DisorderRealization,
    coupling: f64,
    boundary: Boundary,
    frame: Frame,
) -> SiteHamiltonian {
    SiteHamiltonian { onsite: real.onsite(frame), hopping: coupling, boundary }
}

/// `Σ ω_j n_j − J Σ (a_j† a_{j+1} + a_j a_{j+1}†)` on a truncated basis.
pub fn build_fock_hamiltonian(
    real: &DisorderRealization,
    coupling: f64,
    boundary: Boundary,
    frame: Frame,
    basis: &FockBasis,
) -> CsrMatrix {
    fock_hamiltonian_with_hopping(&real.onsite(frame), -coupling, boundary, basis)
}

/// Number-conserving quadratic Hamiltonian with the given hopping amplitude.
/// Matrix elements are inserted symmetrically, so the result is exactly
/// symmetric.
pub fn fock_hamiltonian_with_hopping(
    onsite: &[f64],
    hopping: f64,
    boundary: Boundary,
    basis: &FockBasis,
) -> CsrMatrix {
    assert_eq!(onsite.len(), basis.n_sites(), "realization and basis disagree on N");
    let cut = basis.cutoffs();
    let link_list = links(basis.n_sites(), boundary);
    let mut triplets = Vec::new();
    let mut buf: Vec<u8> = Vec::with_capacity(basis.n_sites());
    for (idx, s) in basis.states().iter().enumerate() {
        let diag: f64 = s.iter().zip(onsite).map(|(&n, &w)| n as f64 * w).sum();
        if diag != 0.0 {
            triplets.push((idx, idx, diag));
        }
        if hopping == 0.0 {
            continue;
        }
        for &(a, b) in &link_list {
            // a_a† a_b and a_b† a_a, each moving one quantum across the link
            for (to_site, from_site) in [(a, b), (b, a)] {
                let n_from = s[from_site];
                let n_to = s[to_site];
                if n_from == 0 || n_to >= cut.n_max {
                    continue;
                }
                buf.clear();
                buf.extend_from_slice(s);
                buf[from_site] -= 1;
                buf[to_site] += 1;
                let target = basis.index_of(&buf).expect("hop stays inside the basis");
                let amp = hopping * ((n_from as f64) * (n_to as f64 + 1.0)).sqrt();
                triplets.push((target, idx, amp));
            }
        }
    }
    CsrMatrix::from_triplets(basis.dim(), triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_fock_basis, sample_disorder, ChainSpec};
    use nalgebra::SymmetricEigen;

    #[test]
    fn one_site_chain() {
        let spec = ChainSpec { mean_frequency: 2.0, frame: Frame::Lab, ..ChainSpec::new(1, 0.0, 1.0) };
        let r = sample_disorder(&spec, 0, 0);
        let h = build_single_excitation_h(&r, 1.0, Boundary::Periodic, Frame::Lab).dense();
        assert_eq!(h, DMatrix::from_element(1, 1, 2.0));
    }

    #[test]
    fn three_site_spectrum() {
        let spec = ChainSpec::new(3, 0.0, 1.0);
        let r = sample_disorder(&spec, 0, 0);
        let j = 0.7;
        let h = build_single_excitation_h(&r, j, Boundary::HardWall, Frame::Rotating).dense();
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let s = 2f64.sqrt() * j;
        for (a, b) in ev.iter().zip([-s, 0.0, s]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn periodic_adds_wrap_link() {
        let spec = ChainSpec::new(4, 1.0, 1.0);
        let r = sample_disorder(&spec, 3, 0);
        let open = build_single_excitation_h(&r, 1.0, Boundary::HardWall, Frame::Rotating).dense();
        let ring = build_single_excitation_h(&r, 1.0, Boundary::Periodic, Frame::Rotating).dense();
        assert_eq!(open[(0, 3)], 0.0);
        assert_eq!(ring[(0, 3)], 1.0);
        assert_eq!(ring, ring.transpose());
    }

    #[test]
    fn diagonal_shift_moves_spectrum() {
        let spec = ChainSpec::new(6, 2.0, 1.0);
        let r = sample_disorder(&spec, 5, 1);
        let h = build_single_excitation_h(&r, 1.0, Boundary::HardWall, Frame::Rotating).dense();
        let shifted = &h + DMatrix::identity(6, 6) * 3.5;
        let mut a: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        let mut b: Vec<f64> = SymmetricEigen::new(shifted).eigenvalues.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x + 3.5 - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fock_h_properties() {
        let spec = ChainSpec::new(4, 1.5, 1.0);
        let r = sample_disorder(&spec, 9, 2);
        for boundary in [Boundary::HardWall, Boundary::Periodic] {
            let basis = build_fock_basis(4, 2, 3).unwrap();
            let h = build_fock_hamiltonian(&r, 1.0, boundary, Frame::Rotating, &basis);
            assert!(h.is_symmetric());
            // vacuum decouples with zero energy in the rotating frame
            assert!(h.row(0).all(|(_, v)| v == 0.0));
            // number conservation: every element connects equal totals
            for i in 0..basis.dim() {
                for (c, _) in h.row(i) {
                    assert_eq!(basis.total(i), basis.total(c));
                }
            }
            // one-excitation block = single-excitation H with flipped hopping
            let single = build_single_excitation_h(&r, 1.0, boundary, Frame::Rotating).gauge_flipped().dense();
            let block = basis.sector(1);
            for (a, i) in block.clone().enumerate() {
                for (b, k) in block.clone().enumerate() {
                    assert_eq!(h.get(i, k), single[(a, b)]);
                }
            }
        }
    }
}
