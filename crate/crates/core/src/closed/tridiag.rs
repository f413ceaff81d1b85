//! Extremal eigenpairs of real symmetric tridiagonal matrices by Sturm-sequence
//! bisection and inverse iteration.

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let scale = scale_of(diag, off);
    let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] / q };
        q = diag[i] - x - coupling;
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn scale_of(diag: &[f64], off: &[f64]) -> f64 {
    let d = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let e = off.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    d + 2.0 * e
}

/// Gershgorin interval containing the whole spectrum.
fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (zero based).
pub fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    assert!(k < diag.len());
    let (mut lo, mut hi) = gershgorin(diag, off);
    let pad = f64::EPSILON * scale_of(diag, off).max(1.0);
    lo -= pad;
    hi += pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T − σ) x = b` by the Thomas algorithm.
fn solve_shifted(diag: &[f64], off: &[f64], sigma: f64, b: &mut [f64], work: &mut [f64]) {
    let n = diag.len();
    let tiny = f64::EPSILON * scale_of(diag, off).max(f64::MIN_POSITIVE);
    let mut denom = diag[0] - sigma;
    if denom.abs() < tiny {
        denom = tiny;
    }
    if n > 1 {
        work[0] = off[0] / denom;
    }
    b[0] /= denom;
    for i in 1..n {
        denom = diag[i] - sigma - off[i - 1] * work[i - 1];
        if denom.abs() < tiny {
            denom = tiny;
        }
        if i + 1 < n {
            work[i] = off[i] / denom;
        }
        b[i] = (b[i] - off[i - 1] * b[i - 1]) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        b[i] -= work[i] * b[i + 1];
    }
}

/// Normalised eigenvector for an (accurately known) eigenvalue.
pub fn eigenvector(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    if n == 1 {
        return vec![1.0];
    }
    let scale = scale_of(diag, off).max(f64::MIN_POSITIVE);
    let sigma = lambda - 1e-12 * scale;
    // deterministic, non-symmetric start so no eigenvector is orthogonal to it
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7 % 13) as f64) / 13.0).collect();
    let mut work = vec![0.0; n];
    for _ in 0..30 {
        solve_shifted(diag, off, sigma, &mut x, &mut work);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        if residual(diag, off, lambda, &x) < 1e-13 * scale {
            break;
        }
    }
    x
}

/// `‖T x − λ x‖₂`.
pub fn residual(diag: &[f64], off: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let n = diag.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut y = (diag[i] - lambda) * x[i];
        if i > 0 {
            y += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            y += off[i] * x[i + 1];
        }
        acc += y * y;
    }
    acc.sqrt()
}
