//! Generative model: incoherent dictionaries, sparse codes and observed samples.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, normalize};
use crate::rng;

/// Column-norm tolerance accepted when wrapping externally supplied columns.
const UNIT_TOL: f64 = 1e-9;

/// An n x m matrix with unit-norm columns, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    n: usize,
    m: usize,
    data: Vec<f64>,
    mu: f64,
}

impl Dictionary {
    /// Wrap unit-norm columns (column-major). Columns must already have norm 1.
    pub fn from_columns(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() % n != 0 || data.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} entries do not form columns of length {n}",
                data.len()
            )));
        }
        let m = data.len() / n;
        for (j, c) in data.chunks(n).enumerate() {
            let nrm = norm(c);
            if (nrm - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidParameter(format!(
                    "column {j} has norm {nrm}"
                )));
            }
        }
        let mu = coherence_of(n, m, &data);
        Ok(Self { n, m, data, mu })
    }

    /// Normalise arbitrary nonzero columns (column-major) and wrap them.
    pub fn normalized(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() % n != 0 || data.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} entries do not form columns of length {n}",
                data.len()
            )));
        }
        for (j, c) in data.chunks_mut(n).enumerate() {
            if normalize(c) == 0.0 {
                return Err(Error::ZeroNorm(j));
            }
        }
        let m = data.len() / n;
        let mu = coherence_of(n, m, &data);
        Ok(Self { n, m, data, mu })
    }

    /// Build from a row-major `rows x cols` matrix whose columns are the atoms.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let mut colmajor = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                colmajor[c * rows + r] = data[r * cols + c];
            }
        }
        // keep the exact bits of columns that are already unit norm
        if colmajor
            .chunks(rows.max(1))
            .all(|c| (norm(c) - 1.0).abs() <= 1e-12)
        {
            Self::from_columns(rows, colmajor)
        } else {
            Self::normalized(rows, colmajor)
        }
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.m];
        for c in 0..self.m {
            for r in 0..self.n {
                out[r * self.m + c] = self.data[c * self.n + r];
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Measured incoherence: sqrt(n) * max_{i != j} |<A_i, A_j>| (0 for one column).
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.n)
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    /// Dictionary-weighted sum of a sparse code, written into `out`.
    pub fn apply(&self, code: &SparseCode, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (&i, &v) in code.support.iter().zip(&code.values) {
            axpy(v, self.col(i), out);
        }
    }
}

fn coherence_of(n: usize, m: usize, data: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m {
        let ci = &data[i * n..(i + 1) * n];
        for j in i + 1..m {
            best = best.max(dot(ci, &data[j * n..(j + 1) * n]).abs());
        }
    }
    (n as f64).sqrt() * best
}

/// sqrt(n) * max_{i != j} |<A_i, A_j>|.
pub fn incoherence(dict: &Dictionary) -> Result<f64> {
    if dict.m() < 2 {
        return Err(Error::TooFewColumns(dict.m()));
    }
    Ok(coherence_of(dict.n, dict.m, &dict.data))
}

/// Options for [`gen_random_dictionary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictOptions {
    /// Regenerate until the measured mu is at most this value.
    pub target_mu: Option<f64>,
    /// Orthonormalise the Gaussian columns (requires m <= n).
    pub orthonormalize: bool,
    pub max_attempts: usize,
}

impl Default for DictOptions {
    fn default() -> Self {
        Self {
            target_mu: None,
            orthonormalize: false,
            max_attempts: 100,
        }
    }
}

/// Normalised i.i.d. Gaussian columns, optionally orthonormalised, with an
/// optional mu-rejection loop.
pub fn gen_random_dictionary(
    n: usize,
    m: usize,
    opts: &DictOptions,
    seed: u64,
) -> Result<Dictionary> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("n={n}, m={m}")));
    }
    if opts.orthonormalize && m > n {
        return Err(Error::InvalidParameter(format!(
            "cannot orthonormalise {m} columns in dimension {n}"
        )));
    }
    let attempts = opts.max_attempts.max(1);
    let mut best = f64::INFINITY;
    for attempt in 0..attempts {
        let mut rng = rng::stream(seed, "dictionary", attempt as u64);
        let mut data: Vec<f64> = (0..n * m).map(|_| rng.sample(StandardNormal)).collect();
        if opts.orthonormalize {
            gram_schmidt(n, m, &mut data);
        }
        let dict = Dictionary::normalized(n, data)?;
        match opts.target_mu {
            Some(t) if dict.mu > t => best = best.min(dict.mu),
            _ => return Ok(dict),
        }
    }
    Err(Error::TargetMuInfeasible {
        target: opts.target_mu.unwrap_or(f64::NAN),
        attempts,
        best,
    })
}

fn gram_schmidt(n: usize, m: usize, data: &mut [f64]) {
    for j in 0..m {
        // two passes of modified Gram-Schmidt keep the result orthogonal to
        // working precision
        for _ in 0..2 {
            for i in 0..j {
                let (prev, cur) = data.split_at_mut(j * n);
                let qi = &prev[i * n..(i + 1) * n];
                let cj = &mut cur[..n];
                let r = dot(qi, cj);
                axpy(-r, qi, cj);
            }
        }
        normalize(&mut data[j * n..(j + 1) * n]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueDist {
    /// Uniform random sign, magnitude 1.
    Rademacher,
    /// Magnitude uniform on [1, C] times a uniform random sign.
    UniformSigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportDist {
    /// Uniformly random k-subset of the m coordinates.
    UniformKSubset,
    /// Supports that favour pairs inside fixed coordinate blocks.
    CorrelatedBlocks,
}

impl std::str::FromStr for ValueDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rademacher" => Ok(Self::Rademacher),
            "uniform_signed" => Ok(Self::UniformSigned),
            _ => Err(Error::Parse(format!("unknown value_dist '{s}'"))),
        }
    }
}

impl std::str::FromStr for SupportDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_k_subset" => Ok(Self::UniformKSubset),
            "correlated_blocks" => Ok(Self::CorrelatedBlocks),
            _ => Err(Error::Parse(format!("unknown support_dist '{s}'"))),
        }
    }
}

impl ValueDist {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rademacher => "rademacher",
            Self::UniformSigned => "uniform_signed",
        }
    }
}

impl SupportDist {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::UniformKSubset => "uniform_k_subset",
            Self::CorrelatedBlocks => "correlated_blocks",
        }
    }
}

/// Parameters of the synthetic sample generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// Magnitude cap C of the nonzero values.
    pub c_max: f64,
    pub value_dist: ValueDist,
    pub support_dist: SupportDist,
    /// Block width for `CorrelatedBlocks`; must divide m.
    pub block_size: usize,
    /// Bound on Pr[i,j in support] / (Pr[i] Pr[j]) for same-block pairs.
    pub inflation: f64,
    /// Per-coordinate standard deviation of the additive Gaussian noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n: 64,
            m: 100,
            k: 3,
            c_max: 1.0,
            value_dist: ValueDist::Rademacher,
            support_dist: SupportDist::UniformKSubset,
            block_size: 10,
            inflation: 2.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n == 0 || self.m == 0 || self.k == 0 {
            return bad(format!(
                "n={}, m={}, k={} must be positive",
                self.n, self.m, self.k
            ));
        }
        if self.k > self.m {
            return bad(format!("k={} exceeds m={}", self.k, self.m));
        }
        if !(self.c_max >= 1.0) {
            return bad(format!("C={} must be >= 1", self.c_max));
        }
        if !(self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma={} must be >= 0", self.noise_sigma));
        }
        if self.support_dist == SupportDist::CorrelatedBlocks {
            let b = self.block_size;
            if b < 2 || self.m % b != 0 {
                return bad(format!(
                    "block_size={b} must be >= 2 and divide m={}",
                    self.m
                ));
            }
            if self.k < 2 || self.k - 2 > self.m - b {
                return bad(format!(
                    "correlated blocks need 2 <= k <= m - block_size + 2 (k={})",
                    self.k
                ));
            }
            if !(self.inflation >= 1.0) {
                return bad(format!("inflation={} must be >= 1", self.inflation));
            }
        }
        Ok(())
    }
}

/// Probability of drawing a block-anchored support in the correlated sampler.
///
/// An anchored support takes 2 coordinates from one uniformly chosen block and
/// the remaining k-2 uniformly from outside it, which leaves every marginal at
/// k/m. The mixture weight is chosen so that a same-block pair is jointly
/// present with probability `inflation * (k/m)^2`, clamped to [0, 1].
pub fn correlated_mix_weight(m: usize, k: usize, block_size: usize, inflation: f64) -> f64 {
    let (mf, kf, bf) = (m as f64, k as f64, block_size as f64);
    let uniform_pair = kf * (kf - 1.0) / (mf * (mf - 1.0));
    let anchored_pair = 2.0 / (mf * (bf - 1.0));
    let target = inflation * (kf / mf).powi(2);
    if anchored_pair <= uniform_pair {
        return 0.0;
    }
    ((target - uniform_pair) / (anchored_pair - uniform_pair)).clamp(0.0, 1.0)
}

/// A k-sparse coefficient vector: sorted support and the matching values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCode {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseCode {
    pub fn value_at(&self, i: usize) -> Option<f64> {
        self.support
            .binary_search(&i)
            .ok()
            .map(|pos| self.values[pos])
    }

    pub fn contains(&self, i: usize) -> bool {
        self.support.binary_search(&i).is_ok()
    }

    /// Size of the support intersection with another code.
    pub fn overlap(&self, other: &SparseCode) -> usize {
        let (mut a, mut b, mut count) = (0, 0, 0);
        while a < self.support.len() && b < other.support.len() {
            match self.support[a].cmp(&other.support[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        count
    }
}

/// Draw one sparse code according to `cfg`.
pub fn sample_code<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> SparseCode {
    let (m, k) = (cfg.m, cfg.k);
    let mut support: Vec<usize> = match cfg.support_dist {
        SupportDist::UniformKSubset => index::sample(rng, m, k).into_vec(),
        SupportDist::CorrelatedBlocks => {
            let b = cfg.block_size;
            let rho = correlated_mix_weight(m, k, b, cfg.inflation);
            if rng.random::<f64>() < rho {
                let block = rng.random_range(0..m / b);
                let start = block * b;
                let mut s: Vec<usize> =
                    index::sample(rng, b, 2).iter().map(|i| start + i).collect();
                s.extend(index::sample(rng, m - b, k - 2).iter().map(|i| {
                    if i < start {
                        i
                    } else {
                        i + b
                    }
                }));
                s
            } else {
                index::sample(rng, m, k).into_vec()
            }
        }
    };
    support.sort_unstable();
    let values = support
        .iter()
        .map(|_| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mag = match cfg.value_dist {
                ValueDist::Rademacher => 1.0,
                ValueDist::UniformSigned => {
                    if cfg.c_max > 1.0 {
                        rng.random_range(1.0..=cfg.c_max)
                    } else {
                        1.0
                    }
                }
            };
            sign * mag
        })
        .collect();
    SparseCode { support, values }
}

/// Observed samples, stored row-major (one contiguous length-n row per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    data: Vec<f64>,
    pub ground_truth: Option<Vec<SparseCode>>,
}

impl SampleSet {
    pub fn new(n: usize, data: Vec<f64>, ground_truth: Option<Vec<SparseCode>>) -> Result<Self> {
        if n == 0 || data.len() % n != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} entries do not form rows of length {n}",
                data.len()
            )));
        }
        if let Some(gt) = &ground_truth {
            if gt.len() != data.len() / n {
                return Err(Error::DimensionMismatch(format!(
                    "{} codes for {} samples",
                    gt.len(),
                    data.len() / n
                )));
            }
        }
        Ok(Self {
            n,
            data,
            ground_truth,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.n)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn truth(&self) -> Result<&[SparseCode]> {
        self.ground_truth.as_deref().ok_or(Error::NoGroundTruth)
    }

    /// Contiguous sub-range of samples (with the matching ground truth).
    pub fn slice(&self, range: std::ops::Range<usize>) -> SampleSet {
        SampleSet {
            n: self.n,
            data: self.data[range.start * self.n..range.end * self.n].to_vec(),
            ground_truth: self.ground_truth.as_ref().map(|g| g[range].to_vec()),
        }
    }

    /// Samples at the given indices, in order.
    pub fn select(&self, idx: &[usize]) -> SampleSet {
        let mut data = Vec::with_capacity(idx.len() * self.n);
        for &i in idx {
            data.extend_from_slice(self.sample(i));
        }
        SampleSet {
            n: self.n,
            data,
            ground_truth: self
                .ground_truth
                .as_ref()
                .map(|g| idx.iter().map(|&i| g[i].clone()).collect()),
        }
    }
}

/// Draw `p` samples `A X + eta` with per-sample random streams.
pub fn generate_samples(dict: &Dictionary, cfg: &GenConfig, p: usize) -> Result<SampleSet> {
    cfg.validate()?;
    if dict.n() != cfg.n || dict.m() != cfg.m {
        return Err(Error::DimensionMismatch(format!(
            "dictionary is {}x{}, config asks for {}x{}",
            dict.n(),
            dict.m(),
            cfg.n,
            cfg.m
        )));
    }
    let n = cfg.n;
    let mut data = vec![0.0; n * p];
    let codes: Vec<SparseCode> = data
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let mut rng = rng::stream(cfg.seed, "sample", i as u64);
            let code = sample_code(cfg, &mut rng);
            dict.apply(&code, row);
            if cfg.noise_sigma > 0.0 {
                for x in row.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x += cfg.noise_sigma * z;
                }
            }
            code
        })
        .collect();
    SampleSet::new(n, data, Some(codes))
}

/// Largest support intersection over all sample pairs (the Q diagnostic).
pub fn max_pairwise_support_overlap(set: &SampleSet) -> Result<usize> {
    let codes = set.truth()?;
    let m = codes
        .iter()
        .flat_map(|c| c.support.iter())
        .max()
        .map_or(0, |&x| x + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (j, c) in codes.iter().enumerate() {
        for &i in &c.support {
            members[i].push(j);
        }
    }
    let mut counts = vec![0usize; codes.len()];
    let mut touched = Vec::new();
    let mut best = 0;
    for (j, c) in codes.iter().enumerate() {
        for &i in &c.support {
            // members lists are sorted, so later samples start after j
            let list = &members[i];
            let start = list.partition_point(|&x| x <= j);
            for &other in &list[start..] {
                if counts[other] == 0 {
                    touched.push(other);
                }
                counts[other] += 1;
                best = best.max(counts[other]);
            }
        }
        for t in touched.drain(..) {
            counts[t] = 0;
        }
    }
    Ok(best)
}
