//! Explicit Runge–Kutta integration of `dy/dt = f(t, y)` over complex state
//! vectors, with dense output only at requested times.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Dormand–Prince 5(4) with PI step-size control.
    DormandPrince { rtol: f64, atol: f64 },
    /// Classical fourth order with a fixed maximal step. Each output interval is
    /// split into equal substeps so output times are hit exactly.
    Rk4 { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorOptions {
    pub method: Method,
    pub initial_step: Option<f64>,
    /// Smallest admissible step relative to `max(|t|, 1)`.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            method: Method::DormandPrince { rtol: 1e-8, atol: 1e-12 },
            initial_step: None,
            min_step: 1e-13,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn rk4(step: f64) -> Self {
        Self { method: Method::Rk4 { step }, ..Self::default() }
    }

    pub fn is_fixed_step(&self) -> bool {
        matches!(self.method, Method::Rk4 { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrationFailure {
    #[error("step size underflow at t = {time} (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },
    #[error("step budget of {max_steps} exhausted at t = {time}")]
    TooManySteps { time: f64, max_steps: usize },
    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },
    #[error("output times must be non-decreasing and not before the start time")]
    BadTimeGrid,
    #[error("invalid integrator option: {0}")]
    BadOptions(String),
}

impl IntegrationFailure {
    /// Time reached before the failure, when meaningful.
    pub fn time(&self) -> Option<f64> {
        match self {
            Self::StepUnderflow { time, .. } | Self::TooManySteps { time, .. } | Self::NonFinite { time } => {
                Some(*time)
            }
            _ => None,
        }
    }
}

#[derive(Debug)]
pub enum IntegrateError<E> {
    Failure(IntegrationFailure),
    Observer(E),
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// `out = y + h Σ c_i k_i`.
fn combine(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    out.copy_from_slice(y);
    for &(c, k) in terms {
        if c == 0.0 {
            continue;
        }
        let s = h * c;
        for (o, v) in out.iter_mut().zip(k) {
            *o += v * s;
        }
    }
}

fn rms_norm(v: &[Complex64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt()
}

fn check_grid(t0: f64, outputs: &[f64]) -> Result<(), IntegrationFailure> {
    let mut prev = t0;
    for &t in outputs {
        if !t.is_finite() || t < prev {
            return Err(IntegrationFailure::BadTimeGrid);
        }
        prev = t;
    }
    Ok(())
}

/// Integrates from `t0` through every time in `outputs`, calling `observer`
/// with `(output_index, t, y)` as each is reached. `y` holds the final state on
/// return.
pub fn integrate<F, O, E>(
    mut rhs: F,
    t0: f64,
    y: &mut [Complex64],
    outputs: &[f64],
    options: &IntegratorOptions,
    mut observer: O,
) -> Result<IntegrationStats, IntegrateError<E>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]) -> Result<(), E>,
{
    check_grid(t0, outputs).map_err(IntegrateError::Failure)?;
    match options.method {
        Method::DormandPrince { rtol, atol } => {
            if !(rtol > 0.0 && atol >= 0.0) {
                return Err(IntegrateError::Failure(IntegrationFailure::BadOptions(format!(
                    "rtol {rtol}, atol {atol}"
                ))));
            }
            dormand_prince(&mut rhs, t0, y, outputs, options, rtol, atol, &mut observer)
        }
        Method::Rk4 { step } => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(IntegrateError::Failure(IntegrationFailure::BadOptions(format!("step {step}"))));
            }
            rk4(&mut rhs, t0, y, outputs, step, &mut observer)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dormand_prince<F, O, E>(
    rhs: &mut F,
    t0: f64,
    y: &mut [Complex64],
    outputs: &[f64],
    options: &IntegratorOptions,
    rtol: f64,
    atol: f64,
    observer: &mut O,
) -> Result<IntegrationStats, IntegrateError<E>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]) -> Result<(), E>,
{
    let n = y.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut k: Vec<Vec<Complex64>> = (0..7).map(|_| vec![zero; n]).collect();
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut stats = IntegrationStats::default();
    let mut t = t0;

    let mut out_idx = 0;
    while out_idx < outputs.len() && outputs[out_idx] == t {
        observer(out_idx, t, y).map_err(IntegrateError::Observer)?;
        out_idx += 1;
    }
    if out_idx == outputs.len() {
        return Ok(stats);
    }

    rhs(t, y, &mut k[0]);
    stats.rhs_evals += 1;
    let mut h = options.initial_step.unwrap_or_else(|| {
        let d0 = rms_norm(y);
        let d1 = rms_norm(&k[0]);
        if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        }
    });
    h = h.min(outputs[outputs.len() - 1] - t0);
    let mut err_old = 1e-4f64;
    let mut steps = 0usize;

    while out_idx < outputs.len() {
        let target = outputs[out_idx];
        let remaining = target - t;
        let hits = h >= remaining;
        let h_step = if hits { remaining } else { h };
        if h_step < options.min_step * t.abs().max(1.0) {
            return Err(IntegrateError::Failure(IntegrationFailure::StepUnderflow { time: t, step: h_step }));
        }
        steps += 1;
        if steps > options.max_steps {
            return Err(IntegrateError::Failure(IntegrationFailure::TooManySteps {
                time: t,
                max_steps: options.max_steps,
            }));
        }

        {
            let (k1, rest) = k.split_first_mut().unwrap();
            let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
            combine(&mut tmp, y, h_step, &[(A21, k1)]);
            rhs(t + C2 * h_step, &tmp, k2);
            combine(&mut tmp, y, h_step, &[(A31, k1), (A32, k2)]);
            rhs(t + C3 * h_step, &tmp, k3);
            combine(&mut tmp, y, h_step, &[(A41, k1), (A42, k2), (A43, k3)]);
            rhs(t + C4 * h_step, &tmp, k4);
            combine(&mut tmp, y, h_step, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
            rhs(t + C5 * h_step, &tmp, k5);
            combine(&mut tmp, y, h_step, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
            rhs(t + h_step, &tmp, k6);
            combine(&mut y_new, y, h_step, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
            rhs(t + h_step, &y_new, k7);
            stats.rhs_evals += 6;

            let mut acc = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h_step;
                let sc = atol + rtol * y[i].norm().max(y_new[i].norm());
                let r = if sc > 0.0 { e.norm() / sc } else if e.norm() == 0.0 { 0.0 } else { f64::INFINITY };
                acc += r * r;
            }
            let err = if n == 0 { 0.0 } else { (acc / n as f64).sqrt() };

            if !err.is_finite() {
                stats.rejected += 1;
                h = h_step * FAC_MIN;
                continue;
            }
            let fac11 = err.powf(0.2 - BETA * 0.75);
            if err <= 1.0 {
                let fac = (fac11 / err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let proposed = h_step / fac;
                err_old = err.max(1e-4);
                stats.accepted += 1;
                t = if hits { target } else { t + h_step };
                y.copy_from_slice(&y_new);
                std::mem::swap(k1, k7);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(IntegrateError::Failure(IntegrationFailure::NonFinite { time: t }));
                }
                // a step shortened only to land on an output keeps the larger proposal
                h = if hits { proposed.max(h) } else { proposed };
            } else {
                stats.rejected += 1;
                h = h_step / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                continue;
            }
        }

        while out_idx < outputs.len() && outputs[out_idx] == t {
            observer(out_idx, t, y).map_err(IntegrateError::Observer)?;
            out_idx += 1;
        }
    }
    Ok(stats)
}

fn rk4<F, O, E>(
    rhs: &mut F,
    t0: f64,
    y: &mut [Complex64],
    outputs: &[f64],
    step: f64,
    observer: &mut O,
) -> Result<IntegrationStats, IntegrateError<E>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]) -> Result<(), E>,
{
    let n = y.len();
    let zero = Complex64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut tmp = vec![zero; n];
    let mut stats = IntegrationStats::default();
    let mut t = t0;
    for (idx, &target) in outputs.iter().enumerate() {
        let span = target - t;
        if span > 0.0 {
            let substeps = (span / step).ceil().max(1.0) as usize;
            let h = span / substeps as f64;
            for s in 0..substeps {
                let ts = t + s as f64 * h;
                rhs(ts, y, &mut k1);
                combine(&mut tmp, y, h, &[(0.5, &k1)]);
                rhs(ts + 0.5 * h, &tmp, &mut k2);
                combine(&mut tmp, y, h, &[(0.5, &k2)]);
                rhs(ts + 0.5 * h, &tmp, &mut k3);
                combine(&mut tmp, y, h, &[(1.0, &k3)]);
                rhs(ts + h, &tmp, &mut k4);
                for i in 0..n {
                    y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                }
                stats.rhs_evals += 4;
                stats.accepted += 1;
            }
            t = target;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(IntegrateError::Failure(IntegrationFailure::NonFinite { time: t }));
            }
        }
        observer(idx, t, y).map_err(IntegrateError::Observer)?;
    }
    Ok(stats)
}

/// Collects the state at every output time.
pub fn integrate_collect<F>(
    rhs: F,
    t0: f64,
    y0: &[Complex64],
    outputs: &[f64],
    options: &IntegratorOptions,
) -> Result<Vec<Vec<Complex64>>, IntegrationFailure>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(outputs.len());
    integrate(rhs, t0, &mut y, outputs, options, |_, _, s| {
        out.push(s.to_vec());
        Ok::<(), std::convert::Infallible>(())
    })
    .map_err(|e| match e {
        IntegrateError::Failure(f) => f,
        IntegrateError::Observer(never) => match never {},
    })?;
    Ok(out)
}
