use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Mean and standard error of each observable across realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub mean: Vec<f64>,
    /// Sample standard deviation over `√R`; zero when `R = 1`.
    pub stderr: Vec<f64>,
    pub count: usize,
    pub master_seed: u64,
}

impl EnsembleStats {
    /// Folds the samples in index order, so the result does not depend on
    /// which worker produced which sample.
    pub fn from_samples(samples: &[Vec<f64>], master_seed: u64) -> Self {
        let count = samples.len();
        let width = samples.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; width];
        for s in samples {
            assert_eq!(s.len(), width, "samples must share one layout");
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count.max(1) as f64);
        let mut stderr = vec![0.0; width];
        if count > 1 {
            for s in samples {
                for ((e, v), m) in stderr.iter_mut().zip(s).zip(&mean) {
                    *e += (v - m) * (v - m);
                }
            }
            let r = count as f64;
            stderr.iter_mut().for_each(|e| *e = (*e / (r - 1.0)).sqrt() / r.sqrt());
        }
        Self { mean, stderr, count, master_seed }
    }
}

/// A realization that could not be completed.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationFailure {
    pub index: u64,
    pub time: Option<f64>,
    pub message: String,
}

/// Outcome of running every realization: the successes in index order and the
/// first failure by index, if any.
#[derive(Debug)]
pub struct EnsembleOutcome<T> {
    pub completed: Vec<(u64, T)>,
    pub failure: Option<RealizationFailure>,
}

impl<T> EnsembleOutcome<T> {
    pub fn into_result(self) -> Result<Vec<T>, HarnessError> {
        match self.failure {
            Some(f) => Err(HarnessError::Numerical { realization: Some(f.index), time: f.time, message: f.message }),
            None => Ok(self.completed.into_iter().map(|(_, v)| v).collect()),
        }
    }
}

/// Runs `f(k)` for `k = 0..realizations` on a pool of `workers` threads (0 means
/// one per core) and returns results ordered by `k`.
pub fn run_ensemble<T, F>(realizations: usize, workers: usize, f: F) -> Result<EnsembleOutcome<T>, HarnessError>
where
    T: Send,
    F: Fn(u64) -> Result<T, RealizationFailure> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<T, RealizationFailure>> =
        pool.install(|| (0..realizations as u64).into_par_iter().map(&f).collect());
    let mut completed = Vec::with_capacity(results.len());
    let mut failure = None;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => completed.push((k as u64, v)),
            Err(e) if failure.is_none() => failure = Some(e),
            Err(_) => {}
        }
    }
    Ok(EnsembleOutcome { completed, failure })
}
