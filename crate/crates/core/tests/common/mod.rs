#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use nemsim::model::FockBasis;
use nemsim::open::BathSpec;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `J_n(x)` from `(1/π)∫₀^π cos(nτ − x sin τ) dτ`; the integrand is smooth and
/// periodic, so the trapezoid rule converges geometrically.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = 400;
    let h = PI / m as f64;
    let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for k in 1..m {
        s += f(k as f64 * h);
    }
    s * h / PI
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// Dense Liouvillian acting on column-major `vec(ρ)`, assembled from
/// `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
pub fn dense_liouvillian(h: &DMatrix<f64>, basis: &FockBasis, bath: &BathSpec) -> DMatrix<Complex64> {
    let d = basis.dim();
    let id = DMatrix::<Complex64>::identity(d, d);
    let hc = h.map(c);
    let i = Complex64::new(0.0, 1.0);
    let mut l = (kron(&id, &hc) - kron(&hc.transpose(), &id)) * (-i);
    for (site, &g) in bath.gamma.iter().enumerate() {
        let a = basis.annihilation(site).to_dense(d).map(c);
        let ad = a.adjoint();
        for (op, rate) in [(&a, g * (bath.nbar + 1.0)), (&ad, g * bath.nbar)] {
            let opd = op.adjoint();
            let n = &opd * op;
            let term = kron(&opd.transpose(), op) - (kron(&id, &n) + kron(&n.transpose(), &id)) * c(0.5);
            l += term * c(rate);
        }
    }
    l
}

pub fn vec_of(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    m.as_slice().to_vec()
}

/// Deterministic pseudo-random density matrix `G G† / tr`.
pub fn random_density(d: usize, seed: u64) -> DMatrix<Complex64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let g = DMatrix::from_fn(d, d, |_, _| Complex64::new(next(), next()));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}
