//! Truncated occupation-number basis and ladder operators on it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Default cap on the basis dimension: a `D × D` complex density matrix at
/// this size takes 4 GiB.
pub const DEFAULT_MAX_DIMENSION: usize = 16_384;

/// Cutoffs identifying a truncated basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockCutoffs {
    pub n_sites: usize,
    pub n_max: u8,
    pub max_total: u8,
}

/// Occupation tuples with per-site occupation `<= n_max` and total `<= K`,
/// ordered by total excitation and then descending lexicographically
/// (`00, 10, 01, 20, 11, 02` for two sites).
#[derive(Debug, Clone)]
pub struct FockBasis {
    cutoffs: FockCutoffs,
    states: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    sector_start: Vec<usize>,
}

/// Nonzero elements of a ladder operator that maps each basis state to at
/// most one other: `op |from⟩ = amplitude |to⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderOp {
    pub entries: Vec<LadderEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderEntry {
    pub from: usize,
    pub to: usize,
    pub amplitude: f64,
}

/// Number of tuples of `n` sites with occupations `<= n_max` summing to `k`.
fn count_sector(n: usize, n_max: usize, k: usize) -> u128 {
    // ways[t] = number of prefixes with total t
    let mut ways = vec![0u128; k + 1];
    ways[0] = 1;
    for _ in 0..n {
        let mut next = vec![0u128; k + 1];
        for (t, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for occ in 0..=n_max.min(k - t) {
                next[t + occ] = next[t + occ].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[k]
}

/// Basis dimension without enumerating it.
pub fn fock_dimension(n_sites: usize, n_max: u8, max_total: u8) -> u128 {
    (0..=max_total as usize)
        .map(|k| count_sector(n_sites, n_max as usize, k))
        .fold(0u128, |a, b| a.saturating_add(b))
}

fn push_sector(prefix: &mut Vec<u8>, n_sites: usize, n_max: u8, remaining: u8, out: &mut Vec<Vec<u8>>) {
    if prefix.len() == n_sites {
        if remaining == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    let sites_left = (n_sites - prefix.len()) as u32;
    for occ in (0..=n_max.min(remaining)).rev() {
        let rest = remaining - occ;
        if (rest as u32) > (sites_left - 1) * n_max as u32 {
            // cannot place the remainder downstream
            continue;
        }
        prefix.push(occ);
        push_sector(prefix, n_sites, n_max, rest, out);
        prefix.pop();
    }
}

/// Enumerates the basis, refusing dimensions above [`DEFAULT_MAX_DIMENSION`].
pub fn build_fock_basis(n_sites: usize, n_max: u8, max_total: u8) -> Result<FockBasis, ModelError> {
    build_fock_basis_with_budget(n_sites, n_max, max_total, DEFAULT_MAX_DIMENSION)
}

pub fn build_fock_basis_with_budget(
    n_sites: usize,
    n_max: u8,
    max_total: u8,
    max_dimension: usize,
) -> Result<FockBasis, ModelError> {
    if n_sites == 0 {
        return Err(ModelError::InvalidBasis("n_sites must be at least 1".into()));
    }
    if n_max == 0 || max_total == 0 {
        return Err(ModelError::InvalidBasis("cutoffs n_max and K must be at least 1".into()));
    }
    let dim = fock_dimension(n_sites, n_max, max_total);
    if dim > max_dimension as u128 {
        return Err(ModelError::Resource { dimension: dim, limit: max_dimension });
    }
    let mut states = Vec::with_capacity(dim as usize);
    let mut sector_start = Vec::with_capacity(max_total as usize + 2);
    let mut prefix = Vec::with_capacity(n_sites);
    for k in 0..=max_total {
        sector_start.push(states.len());
        push_sector(&mut prefix, n_sites, n_max, k, &mut states);
    }
    sector_start.push(states.len());
    let lookup = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(FockBasis {
        cutoffs: FockCutoffs { n_sites, n_max, max_total },
        states,
        lookup,
        sector_start,
    })
}

impl FockBasis {
    pub fn cutoffs(&self) -> FockCutoffs {
        self.cutoffs
    }

    pub fn n_sites(&self) -> usize {
        self.cutoffs.n_sites
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, index: usize) -> &[u8] {
        &self.states[index]
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn index_of(&self, occupations: &[u8]) -> Option<usize> {
        self.lookup.get(occupations).copied()
    }

    pub fn total(&self, index: usize) -> u32 {
        self.states[index].iter().map(|&n| n as u32).sum()
    }

    /// Index range of the states with exactly `k` excitations.
    pub fn sector(&self, k: usize) -> std::ops::Range<usize> {
        if k + 1 >= self.sector_start.len() {
            return self.dim()..self.dim();
        }
        self.sector_start[k]..self.sector_start[k + 1]
    }

    pub fn vacuum(&self) -> usize {
        0
    }

    /// Index of the state with one excitation on `site` (zero based).
    pub fn single_excitation(&self, site: usize) -> usize {
        self.sector(1).start + site
    }

    /// Annihilation operator `a_j` restricted to the basis.
    pub fn annihilation(&self, site: usize) -> LadderOp {
        let mut entries = Vec::new();
        let mut buf = Vec::with_capacity(self.n_sites());
        for (from, s) in self.states.iter().enumerate() {
            let n = s[site];
            if n == 0 {
                continue;
            }
            buf.clear();
            buf.extend_from_slice(s);
            buf[site] -= 1;
            let to = self.lookup[&buf];
            entries.push(LadderEntry { from, to, amplitude: (n as f64).sqrt() });
        }
        LadderOp { entries }
    }

    /// `P a_j† P`, which annihilates states at either cutoff.
    pub fn creation(&self, site: usize) -> LadderOp {
        let a = self.annihilation(site);
        LadderOp {
            entries: a
                .entries
                .iter()
                .map(|e| LadderEntry { from: e.to, to: e.from, amplitude: e.amplitude })
                .collect(),
        }
    }

    /// Diagonal of `n_j` for every basis state.
    pub fn number_diagonal(&self, site: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[site] as f64).collect()
    }
}

impl LadderOp {
    /// Diagonal of `op† op`, i.e. the squared amplitude leaving each state.
    pub fn dagger_times_self_diagonal(&self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        for e in &self.entries {
            d[e.from] += e.amplitude * e.amplitude;
        }
        d
    }

    pub fn to_dense(&self, dim: usize) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for e in &self.entries {
            m[(e.to, e.from)] += e.amplitude;
        }
        m
    }
}
