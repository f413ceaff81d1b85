mod common;

use std::sync::Arc;

use common::{c, dense_liouvillian, random_density, vec_of};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use nemsim::closed::{evolve_pure, PureState, StateBasis};
use nemsim::model::{
    build_fock_basis, build_fock_hamiltonian, build_single_excitation_h, sample_disorder, Boundary, ChainSpec,
    CsrMatrix, Frame,
};
use nemsim::open::{
    moment_trace, propagate_master, read_snapshot, truncation_convergence, write_snapshot, BathSpec, DensityMatrix,
    IntegratorOptions, LindbladGenerator, MasterOptions, Method,
};

fn tight() -> MasterOptions {
    MasterOptions {
        integrator: IntegratorOptions { method: Method::DormandPrince { rtol: 1e-10, atol: 1e-13 }, ..Default::default() },
        positivity_checks: 3,
    }
}

fn chain_h(n: usize, disorder: f64, seed: u64, basis: &nemsim::model::FockBasis) -> CsrMatrix {
    let spec = ChainSpec::new(n, disorder, 1.0);
    build_fock_hamiltonian(&sample_disorder(&spec, seed, 0), 1.0, Boundary::HardWall, Frame::Rotating, basis)
}

fn apply(gen: &LindbladGenerator, rho: &DMatrix<Complex64>) -> Vec<Complex64> {
    let mut out = vec![c(0.0); rho.len()];
    gen.apply(rho.as_slice(), &mut out);
    out
}

#[test]
fn generator_matches_dense_superoperator() {
    for (n, n_max, k) in [(1, 4, 4), (2, 2, 2), (2, 3, 6), (3, 2, 2), (3, 2, 3)] {
        let basis = Arc::new(build_fock_basis(n, n_max, k).unwrap());
        let h = chain_h(n, 3.0, 11, &basis);
        let bath = BathSpec { gamma: (0..n).map(|j| 0.05 + 0.02 * j as f64).collect(), nbar: 0.3 };
        let gen = LindbladGenerator::new(h.clone(), basis.clone(), bath.clone()).unwrap();
        let l = dense_liouvillian(&h.to_dense(), &basis, &bath);
        for seed in 0..3 {
            let rho = random_density(basis.dim(), seed);
            let fast = apply(&gen, &rho);
            let slow = &l * nalgebra::DVector::from_vec(vec_of(&rho));
            let err = fast.iter().zip(slow.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "N={n} n_max={n_max} K={k}: {err:e}");
        }
    }
}

#[test]
fn single_mode_amplitude_damping() {
    // one mode from |1⟩: ⟨n⟩(t) = e^{−γt} + n̄(1 − e^{−γt}), up to truncation
    let basis = Arc::new(build_fock_basis(1, 8, 8).unwrap());
    let h = CsrMatrix::from_triplets(basis.dim(), vec![]);
    let (gamma, nbar) = (0.3, 0.05);
    let gen = LindbladGenerator::new(h, basis.clone(), BathSpec::uniform(1, gamma, nbar)).unwrap();
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
    let run = propagate_master(&gen, &DensityMatrix::single_excitation(basis, 0), &times, &tight()).unwrap();
    for (t, p) in times.iter().zip(&run.trace.populations) {
        let e = (-gamma * t).exp();
        assert!((p[0] - (e + nbar * (1.0 - e))).abs() < 1e-7, "t={t}: {}", p[0]);
    }
}

#[test]
fn zero_temperature_decay_without_hopping() {
    let basis = Arc::new(build_fock_basis(3, 2, 2).unwrap());
    let h = CsrMatrix::from_triplets(basis.dim(), vec![]);
    let gen = LindbladGenerator::new(h, basis.clone(), BathSpec::uniform(3, 0.2, 0.0)).unwrap();
    let run = propagate_master(&gen, &DensityMatrix::single_excitation(basis, 1), &[1.0, 4.0], &tight()).unwrap();
    for (t, p) in [1.0f64, 4.0].iter().zip(&run.trace.populations) {
        assert!((p[1] - (-0.2 * t).exp()).abs() < 1e-9);
        assert!(p[0].abs() < 1e-12 && p[2].abs() < 1e-12);
    }
}

#[test]
fn truncated_thermal_state_is_nearly_stationary() {
    let basis = Arc::new(build_fock_basis(2, 4, 8).unwrap());
    let h = chain_h(2, 2.0, 5, &basis);
    let nbar = 1e-2;
    let gen = LindbladGenerator::new(h, basis.clone(), BathSpec::uniform(2, 0.05, nbar)).unwrap();
    let rho = DensityMatrix::truncated_thermal(basis, nbar);
    let r = apply(&gen, &rho.data);
    let residual = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(residual < 1e-4, "{residual:e}");
}

#[test]
fn long_time_state_matches_null_space() {
    for (n, n_max, k) in [(2, 2, 2), (3, 2, 2), (4, 1, 2)] {
        let basis = Arc::new(build_fock_basis(n, n_max, k).unwrap());
        let h = chain_h(n, 2.0, 3, &basis);
        let bath = BathSpec::uniform(n, 0.5, 0.2);
        let l = dense_liouvillian(&h.to_dense(), &basis, &bath);
        let svd = l.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        let (kmin, smin) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &s)| if s < a.1 { (i, s) } else { a });
        assert!(smin < 1e-10, "no stationary state: {smin:e}");
        let d = basis.dim();
        let null: Vec<Complex64> = v_t.row(kmin).iter().map(|z| z.conj()).collect();
        let mut ss = DMatrix::from_column_slice(d, d, &null);
        let tr = ss.trace();
        ss /= tr;
        let gen = LindbladGenerator::new(h, basis.clone(), bath).unwrap();
        let run = propagate_master(&gen, &DensityMatrix::single_excitation(basis, 0), &[80.0], &tight()).unwrap();
        let err = (&run.final_state.data - &ss).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-7, "N={n}: {err:e}");
    }
}

#[test]
fn no_bath_matches_unitary_evolution() {
    let n = 5;
    let basis = Arc::new(build_fock_basis(n, 1, 1).unwrap());
    let spec = ChainSpec::new(n, 3.0, 1.0);
    let real = sample_disorder(&spec, 9, 2);
    let h = build_fock_hamiltonian(&real, 1.0, Boundary::HardWall, Frame::Rotating, &basis);
    let gen = LindbladGenerator::new(h.clone(), basis.clone(), BathSpec::uniform(n, 0.0, 0.0)).unwrap();
    let times = [0.5, 2.0, 7.0];
    let run = propagate_master(&gen, &DensityMatrix::single_excitation(basis.clone(), 2), &times, &tight()).unwrap();
    let psi0 = PureState::localized_fock(basis.clone(), 2);
    let states = evolve_pure(h.to_dense(), StateBasis::Fock(basis), &psi0, &times).unwrap();
    for (p, s) in run.trace.populations.iter().zip(&states) {
        for (a, b) in p.iter().zip(s.populations()) {
            assert!((a - b).abs() < 1e-7);
        }
    }
}

#[test]
fn fock_and_moments_agree_at_zero_temperature() {
    // with n̄ = 0 the single quantum never gains a partner, so K = 2 is exact
    let n = 6;
    let basis = Arc::new(build_fock_basis(n, 2, 2).unwrap());
    let spec = ChainSpec::new(n, 4.0, 1.0);
    let real = sample_disorder(&spec, 1, 0);
    let h = build_fock_hamiltonian(&real, 1.0, Boundary::HardWall, Frame::Rotating, &basis);
    let bath = BathSpec::uniform(n, 0.1, 0.0);
    let gen = LindbladGenerator::new(h, basis.clone(), bath.clone()).unwrap();
    let times: Vec<f64> = (1..=10).map(|k| k as f64).collect();
    let run = propagate_master(&gen, &DensityMatrix::single_excitation(basis, 3), &times, &tight()).unwrap();
    let site_h = build_single_excitation_h(&real, 1.0, Boundary::HardWall, Frame::Rotating).gauge_flipped();
    let moments = moment_trace(&site_h, &bath, 3, &times, None).unwrap();
    for (a, b) in run.trace.populations.iter().zip(&moments.populations) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }
}

#[test]
fn populations_do_not_depend_on_frame() {
    let n = 3;
    let basis = Arc::new(build_fock_basis(n, 2, 2).unwrap());
    let mut spec = ChainSpec::new(n, 1.0, 1.0);
    spec.mean_frequency = 4.0;
    let real = sample_disorder(&spec, 4, 0);
    let bath = BathSpec::uniform(n, 0.1, 0.05);
    let times = [1.0, 3.0, 6.0];
    let traces: Vec<_> = [Frame::Lab, Frame::Rotating]
        .into_iter()
        .map(|frame| {
            let h = build_fock_hamiltonian(&real, 1.0, Boundary::HardWall, frame, &basis);
            let gen = LindbladGenerator::new(h, basis.clone(), bath.clone()).unwrap();
            propagate_master(&gen, &DensityMatrix::single_excitation(basis.clone(), 1), &times, &tight()).unwrap().trace
        })
        .collect();
    for (a, b) in traces[0].populations.iter().zip(&traces[1].populations) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}

#[test]
fn truncation_study_converges() {
    let n = 3;
    let bath = BathSpec::uniform(n, 0.2, 0.1);
    let times = [2.0, 5.0];
    let report = truncation_convergence(
        n,
        |b| chain_h(n, 1.0, 2, b),
        &bath,
        |b| DensityMatrix::single_excitation(b, 1),
        |tr| tr.populations.concat(),
        &[(1, 1), (2, 2), (3, 3), (4, 4)],
        &times,
        &tight(),
    )
    .unwrap();
    assert_eq!(report.deviations.len(), 3);
    assert!(report.monotone, "{:?}", report.deviations);
    assert!(report.deviations[2] < 1e-3);
}

#[test]
fn fixed_step_runs_are_reproducible_and_snapshots_round_trip() {
    let basis = Arc::new(build_fock_basis(3, 2, 2).unwrap());
    let h = chain_h(3, 2.0, 8, &basis);
    let gen = LindbladGenerator::new(h, basis.clone(), BathSpec::uniform(3, 0.1, 0.01)).unwrap();
    let opts = MasterOptions { integrator: IntegratorOptions::rk4(0.01), positivity_checks: 2 };
    let a = propagate_master(&gen, &DensityMatrix::single_excitation(basis.clone(), 1), &[1.0, 2.0], &opts).unwrap();
    let b = propagate_master(&gen, &DensityMatrix::single_excitation(basis, 1), &[1.0, 2.0], &opts).unwrap();
    assert_eq!(a.final_state.data, b.final_state.data);
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &a.final_state, 2.0).unwrap();
    let (back, t) = read_snapshot(&buf[..]).unwrap();
    assert_eq!(t, 2.0);
    assert_eq!(back.data, a.final_state.data);
    assert!(read_snapshot(&buf[..buf.len() - 3]).is_err());
}

#[test]
fn integrity_report_stays_within_limits() {
    let basis = Arc::new(build_fock_basis(5, 2, 2).unwrap());
    let h = chain_h(5, 10.0, 6, &basis);
    let gen = LindbladGenerator::new(h, basis.clone(), BathSpec::uniform(5, 0.05, 1e-2)).unwrap();
    let times: Vec<f64> = (1..=40).map(|k| k as f64).collect();
    let run = propagate_master(&gen, &DensityMatrix::single_excitation(basis, 2), &times, &MasterOptions::default()).unwrap();
    assert!(run.integrity.max_trace_drift < 1e-6);
    assert!(run.integrity.max_hermiticity_error < 1e-9);
    assert!(run.integrity.min_eigenvalue > -1e-7);
    assert_eq!(run.integrity.positivity_checks, 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generator_is_linear_trace_free_and_hermitian(seed_a in 0u64..1000, seed_b in 0u64..1000, alpha in -2.0f64..2.0) {
        let basis = Arc::new(build_fock_basis(3, 2, 3).unwrap());
        let h = chain_h(3, 2.0, 7, &basis);
        let gen = LindbladGenerator::new(h, basis.clone(), BathSpec::uniform(3, 0.3, 0.4)).unwrap();
        let (ra, rb) = (random_density(basis.dim(), seed_a), random_density(basis.dim(), seed_b));
        let combo = &ra + &rb * c(alpha);
        let (la, lb, lc) = (apply(&gen, &ra), apply(&gen, &rb), apply(&gen, &combo));
        for ((x, y), z) in la.iter().zip(&lb).zip(&lc) {
            prop_assert!((x + y * alpha - z).norm() < 1e-12);
        }
        let d = basis.dim();
        let lm = DMatrix::from_column_slice(d, d, &la);
        prop_assert!(lm.trace().norm() < 1e-12);
        prop_assert!((&lm - lm.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }
}
