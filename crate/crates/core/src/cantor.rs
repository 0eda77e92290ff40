//! Cantor-like index sets used to decouple blocks of a dependent sequence.
//!
//! `{1, …, A}` is split recursively: every block of `n_{j-1}` consecutive
//! integers becomes a left block of `n_j`, a dropped gap of `d_{j-1}`, and a
//! right block of `n_j`. After `ℓ` rounds the `2^ℓ` surviving leaves form
//! `K_A`, which keeps at least half of the indices while every pair of
//! sibling blocks is separated by a known gap.
//!
//! All indices are 1-based, matching the usual `{1, …, A}` labelling.

use serde::Serialize;

use crate::error::{invalid, Result};

/// Closed interval of consecutive integers `start..=end`; empty when `len == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub start: usize,
    pub len: usize,
}

impl Interval {
    pub fn end(&self) -> usize {
        self.start + self.len - 1
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CantorParams {
    pub a: usize,
    pub delta: f64,
    pub ell: usize,
    /// `n_0 = A, n_1, …, n_ℓ`.
    pub n_seq: Vec<usize>,
    /// `d_0, …, d_{ℓ-1}`.
    pub d_seq: Vec<usize>,
}

impl CantorParams {
    pub fn leaf_size(&self) -> usize {
        self.n_seq[self.ell]
    }

    /// `2^ℓ n_ℓ`.
    pub fn kept(&self) -> usize {
        (1usize << self.ell) * self.leaf_size()
    }
}

/// Splitting depth condition `A δ (1-δ)^{k-1} / 2^k >= 2`.
fn depth_admissible(a: f64, delta: f64, k: usize) -> bool {
    a * delta * (1.0 - delta).powi(k as i32 - 1) / 2f64.powi(k as i32) >= 2.0
}

/// Computes `δ`, `ℓ`, the block sizes `n_j` and gaps `d_j`.
///
/// When no depth `k >= 1` is admissible (small `A`) the depth is 0 and the
/// whole of `{1, …, A}` is kept.
pub fn cantor_params(a: usize) -> Result<CantorParams> {
    if a < 2 {
        return Err(invalid(format!("A must be at least 2, got {a}")));
    }
    let af = a as f64;
    let delta = 2f64.ln() / (2.0 * af.ln());
    let mut ell = 0;
    while depth_admissible(af, delta, ell + 1) {
        ell += 1;
    }
    let mut n_seq = vec![a];
    for j in 1..=ell {
        let size = af * (1.0 - delta).powi(j as i32) / 2f64.powi(j as i32);
        n_seq.push(size.ceil() as usize);
    }
    let d_seq = (1..=ell).map(|j| n_seq[j - 1] - 2 * n_seq[j]).collect();
    Ok(CantorParams { a, delta, ell, n_seq, d_seq })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CantorPartition {
    pub params: CantorParams,
    /// Sorted members of `K_A`.
    pub k_a: Vec<usize>,
    /// The `2^ℓ` leaf blocks `I_{ℓ,i}`, left to right.
    pub leaves: Vec<Interval>,
    /// `remainders[j][i]` is the gap `I*_{j,i}` dropped when splitting level `j`.
    pub remainders: Vec<Vec<Interval>>,
}

pub fn cantor_set(a: usize) -> Result<CantorPartition> {
    let params = cantor_params(a)?;
    let mut level = vec![Interval { start: 1, len: a }];
    let mut remainders = Vec::with_capacity(params.ell);
    for j in 1..=params.ell {
        let (size, gap) = (params.n_seq[j], params.d_seq[j - 1]);
        let mut next = Vec::with_capacity(2 * level.len());
        let mut gaps = Vec::with_capacity(level.len());
        for block in &level {
            next.push(Interval { start: block.start, len: size });
            gaps.push(Interval { start: block.start + size, len: gap });
            next.push(Interval { start: block.start + size + gap, len: size });
        }
        remainders.push(gaps);
        level = next;
    }
    let k_a = level.iter().flat_map(Interval::indices).collect();
    Ok(CantorPartition { params, k_a, leaves: level, remainders })
}

impl CantorPartition {
    /// The `2^k` blocks `K_{k,j}`, each the union of `2^{ℓ-k}` consecutive leaves.
    pub fn level_blocks(&self, k: usize) -> Result<Vec<Vec<usize>>> {
        let ell = self.params.ell;
        if k > ell {
            return Err(invalid(format!("level {k} exceeds depth {ell}")));
        }
        let per_block = 1usize << (ell - k);
        Ok(self
            .leaves
            .chunks(per_block)
            .map(|leaves| leaves.iter().flat_map(Interval::indices).collect())
            .collect())
    }

    /// Lists every broken structural guarantee; empty when the partition is sound.
    pub fn violations(&self) -> Vec<String> {
        let p = &self.params;
        let a = p.a;
        let af = a as f64;
        let mut out = Vec::new();
        let kept = self.k_a.len();
        if kept > a || 2 * kept < a {
            out.push(format!("A={a}: |K_A| = {kept} outside [A/2, A]"));
        }
        if (1usize << p.ell) > a || (p.ell as f64) > af.log2() {
            out.push(format!("A={a}: depth {} exceeds log2 A", p.ell));
        }
        if a - p.kept() > a / 2 {
            out.push(format!("A={a}: A - 2^ℓ n_ℓ = {} > A/2", a - p.kept()));
        }
        for (j, &d) in p.d_seq.iter().enumerate() {
            let floor = af * p.delta * (1.0 - p.delta).powi(j as i32) / 2f64.powi(j as i32 + 1);
            if (d as f64) < floor {
                out.push(format!("A={a}: d_{j} = {d} < {floor}"));
            }
        }
        if p.ell >= 1 {
            let ceiling = af * (1.0 - p.delta).powi(p.ell as i32) / 2f64.powi(p.ell as i32 - 1);
            if p.leaf_size() as f64 > ceiling {
                out.push(format!("A={a}: n_ℓ = {} > {ceiling}", p.leaf_size()));
            }
        }
        for k in 0..=p.ell {
            let blocks = match self.level_blocks(k) {
                Ok(b) => b,
                Err(e) => {
                    out.push(e.to_string());
                    continue;
                }
            };
            let want = (1usize << (p.ell - k)) * p.leaf_size();
            if blocks.len() != 1 << k {
                out.push(format!("A={a}: level {k} has {} blocks", blocks.len()));
            }
            if let Some(b) = blocks.iter().find(|b| b.len() != want) {
                out.push(format!("A={a}: level {k} block of size {} != {want}", b.len()));
            }
            if k >= 1 {
                let gap = p.d_seq[k - 1];
                for pair in blocks.chunks(2) {
                    let between = pair[1][0] - pair[0][pair[0].len() - 1] - 1;
                    if between != gap {
                        out.push(format!("A={a}: level {k} sibling gap {between} != d_{} = {gap}", k - 1));
                    }
                }
            }
        }
        if self.level_blocks(0).map(|b| b[0] != self.k_a).unwrap_or(true) {
            out.push(format!("A={a}: K_0,1 differs from K_A"));
        }
        let mut seen = vec![false; a + 1];
        let all = self.k_a.iter().copied().chain(self.remainders.iter().flatten().flat_map(|r| r.start..r.start + r.len));
        for idx in all {
            if idx == 0 || idx > a || std::mem::replace(&mut seen[idx], true) {
                out.push(format!("A={a}: index {idx} out of range or covered twice"));
            }
        }
        if seen[1..].iter().any(|s| !s) {
            out.push(format!("A={a}: K_A and remainders do not cover 1..=A"));
        }
        out
    }

    /// Indices of `{1, …, A}` outside `K_A`, sorted.
    pub fn complement(&self) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.remainders.iter().flatten().flat_map(Interval::indices).collect();
        out.sort_unstable();
        out
    }
}

/// Repeated extraction of Cantor-like sets until at most two indices remain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullDecomposition {
    pub n: usize,
    /// `levels[i]` holds `K_{A_i}` mapped back to positions in `{1, …, n}`.
    pub levels: Vec<Vec<usize>>,
    /// Positions left once `A_L <= 2`.
    pub remainder: Vec<usize>,
    /// `A_0 = n, A_1, …, A_L`.
    pub sizes: Vec<usize>,
}

impl FullDecomposition {
    /// Number of extraction rounds `L`.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn violations(&self) -> Vec<String> {
        let n = self.n;
        let mut out = Vec::new();
        let mut seen = vec![false; n + 1];
        for &idx in self.levels.iter().flatten().chain(&self.remainder) {
            if idx == 0 || idx > n || std::mem::replace(&mut seen[idx], true) {
                out.push(format!("n={n}: index {idx} out of range or repeated"));
            }
        }
        if seen[1..].iter().any(|s| !s) {
            out.push(format!("n={n}: levels and remainder do not cover 1..=n"));
        }
        for (i, level) in self.levels.iter().enumerate() {
            if self.sizes[i + 1] != self.sizes[i] - level.len() {
                out.push(format!("n={n}: A_{} != A_{i} - |C_{i}|", i + 1));
            }
        }
        for (i, &a) in self.sizes.iter().enumerate() {
            if (a as f64) > n as f64 / 2f64.powi(i as i32) {
                out.push(format!("n={n}: A_{i} = {a} > n 2^-{i}"));
            }
        }
        if self.remainder.len() > 2 {
            out.push(format!("n={n}: remainder has {} > 2 indices", self.remainder.len()));
        }
        let max_depth = ((n as f64).log2() - 1.0).floor() as usize + 1;
        if self.depth() > max_depth {
            out.push(format!("n={n}: depth {} > {max_depth}", self.depth()));
        }
        out
    }
}

pub fn full_decomposition(n: usize) -> Result<FullDecomposition> {
    if n < 2 {
        return Err(invalid(format!("n must be at least 2, got {n}")));
    }
    let mut surviving: Vec<usize> = (1..=n).collect();
    let mut levels = Vec::new();
    let mut sizes = vec![n];
    while surviving.len() > 2 {
        let part = cantor_set(surviving.len())?;
        levels.push(part.k_a.iter().map(|&k| surviving[k - 1]).collect());
        surviving = part.complement().into_iter().map(|k| surviving[k - 1]).collect();
        sizes.push(surviving.len());
    }
    Ok(FullDecomposition { n, levels, remainder: surviving, sizes })
}

/// Cuts a block `K` of size `q` into `2m` consecutive runs of length `p`
/// (`m = ⌊q / 2p⌋`) and alternates them into two families. The leftover run
/// of length `q - 2pm` closes the odd family, so it has `m + 1` members
/// (the last possibly empty) and the even family has `m`.
pub fn sub_block_partition(k: &[usize], p: usize) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    let q = k.len();
    if p == 0 || 2 * p > q {
        return Err(invalid(format!("need 1 <= p and 2p <= q, got p = {p}, q = {q}")));
    }
    let m = q / (2 * p);
    let (mut odd, mut even) = (Vec::with_capacity(m + 1), Vec::with_capacity(m));
    for (idx, run) in k[..2 * p * m].chunks(p).enumerate() {
        if idx % 2 == 0 { odd.push(run.to_vec()) } else { even.push(run.to_vec()) }
    }
    odd.push(k[2 * p * m..].to_vec());
    Ok((odd, even))
}
