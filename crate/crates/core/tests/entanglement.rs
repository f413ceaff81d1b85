mod common;

use std::sync::Arc;

use common::{c, random_density};
use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use proptest::prelude::*;

use nemsim::closed::{PureState, StateBasis};
use nemsim::entanglement::{
    concurrence, concurrence_hermitian, reduce_two_site, single_excitation_concurrence_oracle, StateRef, TwoQubitState,
};
use nemsim::model::{build_fock_basis, FockBasis};
use nemsim::open::DensityMatrix;

/// Embeds `ρ` in the full product space `(n_max+1)^N`, traces out every site
/// but `i` and `j` by index arithmetic, and keeps the `{0,1}²` block.
fn brute_force_reduction(rho: &DMatrix<Complex64>, basis: &FockBasis, i: usize, j: usize) -> (Matrix4<Complex64>, f64) {
    let n = basis.n_sites();
    let levels = basis.cutoffs().n_max as usize + 1;
    let code = |occ: &[u8]| occ.iter().rev().fold(0usize, |acc, &o| acc * levels + o as usize);
    let full_dim = levels.pow(n as u32);
    let mut full = DMatrix::<Complex64>::zeros(full_dim, full_dim);
    for r in 0..basis.dim() {
        for col in 0..basis.dim() {
            full[(code(basis.state(r)), code(basis.state(col)))] = rho[(r, col)];
        }
    }
    let digit = |x: usize, k: usize| (x / levels.pow(k as u32)) % levels;
    let pair = levels * levels;
    let mut reduced = DMatrix::<Complex64>::zeros(pair, pair);
    for r in 0..full_dim {
        for col in 0..full_dim {
            let env_equal = (0..n).filter(|&k| k != i && k != j).all(|k| digit(r, k) == digit(col, k));
            if env_equal {
                let a = digit(r, i) * levels + digit(r, j);
                let b = digit(col, i) * levels + digit(col, j);
                reduced[(a, b)] += full[(r, col)];
            }
        }
    }
    let keep = [0, 1, levels, levels + 1];
    let mut out = Matrix4::from_element(c(0.0));
    for (x, &a) in keep.iter().enumerate() {
        for (y, &b) in keep.iter().enumerate() {
            out[(x, y)] = reduced[(a, b)];
        }
    }
    let kept: f64 = (0..4).map(|k| out[(k, k)].re).sum();
    let total = rho.trace().re;
    (out / c(kept), (total - kept) / total)
}

#[test]
fn reduction_matches_brute_force_partial_trace() {
    for (n, n_max, k) in [(3, 2, 3), (4, 1, 2), (3, 3, 4)] {
        let basis = Arc::new(build_fock_basis(n, n_max, k).unwrap());
        for seed in 0..4 {
            let data = random_density(basis.dim(), seed + 17);
            let rho = DensityMatrix::new(data.clone(), basis.clone()).unwrap();
            for (i, j) in [(0, 1), (0, n - 1), (n - 1, 1)] {
                let fast = reduce_two_site(StateRef::Mixed(&rho), i, j).unwrap();
                let (slow, deficit) = brute_force_reduction(&data, &basis, i, j);
                let err = (fast.rho - slow).iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(err < 1e-13, "N={n} ({i},{j}): {err:e}");
                assert!((fast.trace_deficit - deficit).abs() < 1e-13);
            }
        }
    }
}

fn werner(p: f64) -> TwoQubitState {
    // p |Ψ⁻⟩⟨Ψ⁻| + (1 − p) I/4
    let mut m = Matrix4::identity() * c((1.0 - p) / 4.0);
    m[(1, 1)] += c(p / 2.0);
    m[(2, 2)] += c(p / 2.0);
    m[(1, 2)] -= c(p / 2.0);
    m[(2, 1)] -= c(p / 2.0);
    TwoQubitState::from_matrix(m).unwrap()
}

#[test]
fn werner_states_follow_closed_form() {
    for p in [0.0, 1.0 / 3.0, 0.6, 1.0] {
        let expected = f64::max(0.0, (3.0 * p - 1.0) / 2.0);
        assert!((concurrence(&werner(p)).unwrap() - expected).abs() < 1e-10, "p = {p}");
        assert!((concurrence_hermitian(&werner(p)).unwrap() - expected).abs() < 1e-6, "p = {p}");
    }
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

#[test]
fn sector_formula_agrees_on_random_states() {
    let n = 5;
    let basis = Arc::new(build_fock_basis(n, 2, 2).unwrap());
    let mut rng = Lcg(42);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let amps: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.next(), rng.next())).collect();
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let (i, j) = (trial % n, (trial / n + 1 + trial % n) % n);
        let (i, j) = if i == j { (i, (j + 1) % n) } else { (i, j) };
        let est = match trial % 3 {
            0 => {
                let psi = PureState::new(
                    DVector::from_iterator(n, amps.iter().map(|z| z / norm)),
                    StateBasis::Sites(n),
                )
                .unwrap();
                let exact = concurrence(&reduce_two_site(StateRef::Pure(&psi), i, j).unwrap()).unwrap();
                (exact, single_excitation_concurrence_oracle(StateRef::Pure(&psi), i, j).unwrap())
            }
            1 => {
                let mut v = DVector::zeros(basis.dim());
                for (s, z) in amps.iter().enumerate() {
                    v[basis.single_excitation(s)] = z / norm;
                }
                let psi = PureState::new(v, StateBasis::Fock(basis.clone())).unwrap();
                let exact = concurrence(&reduce_two_site(StateRef::Pure(&psi), i, j).unwrap()).unwrap();
                (exact, single_excitation_concurrence_oracle(StateRef::Pure(&psi), i, j).unwrap())
            }
            _ => {
                // mixture with the vacuum and a second one-quantum state
                let w = 0.5 * (rng.next() + 1.0);
                let other: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.next(), rng.next())).collect();
                let on = other.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let d = basis.dim();
                let mut data = DMatrix::<Complex64>::zeros(d, d);
                data[(basis.vacuum(), basis.vacuum())] = c(0.3 * w);
                for (a, b) in [(&amps, norm), (&other, on)] {
                    let weight = if b == norm { 0.7 * w } else { 1.0 - w };
                    for (x, za) in a.iter().enumerate() {
                        for (y, zb) in a.iter().enumerate() {
                            data[(basis.single_excitation(x), basis.single_excitation(y))] += za * zb.conj() / (b * b) * weight;
                        }
                    }
                }
                let rho = DensityMatrix::new(data, basis.clone()).unwrap();
                let exact = concurrence(&reduce_two_site(StateRef::Mixed(&rho), i, j).unwrap()).unwrap();
                (exact, single_excitation_concurrence_oracle(StateRef::Mixed(&rho), i, j).unwrap())
            }
        };
        worst = worst.max((est.0 - est.1).abs());
    }
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn oracle_refuses_states_outside_the_sector() {
    let basis = Arc::new(build_fock_basis(3, 2, 2).unwrap());
    let rho = DensityMatrix::truncated_thermal(basis, 0.5);
    assert!(single_excitation_concurrence_oracle(StateRef::Mixed(&rho), 0, 1).is_err());
}

/// `Π_k e^{iθ_k n_k}` applied to `ρ`.
fn local_phases(rho: &DMatrix<Complex64>, basis: &FockBasis, theta: &[f64]) -> DMatrix<Complex64> {
    let phase: Vec<Complex64> = (0..basis.dim())
        .map(|k| {
            let arg: f64 = basis.state(k).iter().zip(theta).map(|(&o, t)| o as f64 * t).sum();
            Complex64::from_polar(1.0, arg)
        })
        .collect();
    DMatrix::from_fn(rho.nrows(), rho.ncols(), |r, col| phase[r] * rho[(r, col)] * phase[col].conj())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn concurrence_is_bounded_and_locally_invariant(seed in 0u64..10_000, t0 in -3.0f64..3.0, t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let basis = Arc::new(build_fock_basis(3, 2, 2).unwrap());
        let data = random_density(basis.dim(), seed);
        let rho = DensityMatrix::new(data.clone(), basis.clone()).unwrap();
        let before = concurrence(&reduce_two_site(StateRef::Mixed(&rho), 0, 2).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&before));
        let rotated = DensityMatrix::new(local_phases(&data, &basis, &[t0, t1, t2]), basis.clone()).unwrap();
        let after = concurrence(&reduce_two_site(StateRef::Mixed(&rotated), 0, 2).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-10);
        let swapped = concurrence(&reduce_two_site(StateRef::Mixed(&rho), 2, 0).unwrap()).unwrap();
        prop_assert!((before - swapped).abs() < 1e-10);
    }

    #[test]
    fn pure_single_quantum_routes_agree(re in proptest::collection::vec(-1.0f64..1.0, 4), im in proptest::collection::vec(-1.0f64..1.0, 4)) {
        let norm = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let amps = DVector::from_iterator(4, re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b) / norm));
        let psi = PureState::new(amps, StateBasis::Sites(4)).unwrap();
        let q = reduce_two_site(StateRef::Pure(&psi), 1, 3).unwrap();
        let a = concurrence(&q).unwrap();
        let b = concurrence_hermitian(&q).unwrap();
        prop_assert!((a - b).abs() < 1e-6);
    }
}
