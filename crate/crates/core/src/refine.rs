//! Local refinement by iterative averaging of per-sample residuals.
//!
//! Each round infers every sample's support by thresholding `<y, B_j>`,
//! solves least squares on the inferred support, and replaces `B_j` by the
//! normalised sum over samples with `<y, B_j> > tau` of
//! `y - sum_{t != j} B_t x_t`. Every round consumes a fresh batch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::align_partial;
use crate::linalg::{axpy, dist, dot, lstsq_columns, normalize};
use crate::model::{generate_samples, Dictionary, GenConfig, SampleSet};
use crate::rng;

/// Samples per partial sum; partial sums are reduced in chunk order.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Support threshold on `|<y, B_j>|`.
    pub tau: f64,
    /// Fresh samples per round.
    pub batch_size: usize,
    pub rounds: usize,
    /// Stop once the largest column change of a round falls below this.
    pub target_error: Option<f64>,
    /// Changes below this never count towards the divergence detector.
    pub divergence_floor: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            batch_size: 1000,
            rounds: 10,
            target_error: None,
            divergence_floor: 1e-10,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) || self.batch_size == 0 {
            return Err(Error::InvalidParameter(format!(
                "tau={} must lie in (0, 1) and batch_size={} must be positive",
                self.tau, self.batch_size
            )));
        }
        Ok(())
    }
}

/// Coordinates `j` with `|<y, B_j>| > tau`.
pub fn infer_support(y: &[f64], b: &Dictionary, tau: f64) -> Result<Vec<usize>> {
    if y.len() != b.n() {
        return Err(Error::DimensionMismatch(format!(
            "sample length {} vs n={}",
            y.len(),
            b.n()
        )));
    }
    Ok(b.columns()
        .enumerate()
        .filter(|(_, c)| dot(y, c).abs() > tau)
        .map(|(j, _)| j)
        .collect())
}

/// Least-squares coefficients of `y` on the given columns.
pub fn least_squares_coeffs(b_sub: &[&[f64]], y: &[f64]) -> Result<Vec<f64>> {
    lstsq_columns(b_sub, y)
}

/// Result of one averaging round.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub dictionary: Dictionary,
    /// Columns with no positive-side sample, carried over unchanged.
    pub empty_columns: Vec<usize>,
    /// Inferred support of every batch sample.
    pub supports: Vec<Vec<usize>>,
}

struct Partial {
    sums: Vec<f64>,
    hits: Vec<usize>,
    supports: Vec<Vec<usize>>,
}

/// One round of iterative averaging on `batch`.
pub fn iterative_average_step(b: &Dictionary, batch: &SampleSet, tau: f64) -> Result<StepOutput> {
    let (n, m) = (b.n(), b.m());
    if batch.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "batch dimension {} vs n={n}",
            batch.n()
        )));
    }
    let p = batch.p();
    let partials: Vec<Partial> = (0..p.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut part = Partial {
                sums: vec![0.0; n * m],
                hits: vec![0; m],
                supports: Vec::with_capacity(CHUNK),
            };
            let mut resid = vec![0.0; n];
            for i in c * CHUNK..((c + 1) * CHUNK).min(p) {
                let y = batch.sample(i);
                let ips: Vec<f64> = b.columns().map(|col| dot(y, col)).collect();
                let omega: Vec<usize> = (0..m).filter(|&j| ips[j].abs() > tau).collect();
                let cols: Vec<&[f64]> = omega.iter().map(|&j| b.col(j)).collect();
                let x = lstsq_columns(&cols, y)?;
                resid.copy_from_slice(y);
                for (col, &xj) in cols.iter().zip(&x) {
                    axpy(-xj, col, &mut resid);
                }
                for (pos, &j) in omega.iter().enumerate() {
                    if ips[j] > tau {
                        let acc = &mut part.sums[j * n..(j + 1) * n];
                        axpy(1.0, &resid, acc);
                        axpy(x[pos], cols[pos], acc);
                        part.hits[j] += 1;
                    }
                }
                part.supports.push(omega);
            }
            Ok(part)
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![0.0; n * m];
    let mut hits = vec![0usize; m];
    let mut supports = Vec::with_capacity(p);
    for part in partials {
        axpy(1.0, &part.sums, &mut sums);
        hits.iter_mut().zip(&part.hits).for_each(|(h, x)| *h += x);
        supports.extend(part.supports);
    }
    let mut empty_columns = Vec::new();
    for j in 0..m {
        let col = &mut sums[j * n..(j + 1) * n];
        if hits[j] == 0 {
            col.copy_from_slice(b.col(j));
            empty_columns.push(j);
        } else if normalize(col) == 0.0 {
            return Err(Error::ZeroNorm(j));
        }
    }
    Ok(StepOutput {
        dictionary: Dictionary::normalized(n, sums)?,
        empty_columns,
        supports,
    })
}

/// Supplier of fresh, independent batches.
pub trait SampleSource {
    fn next_batch(&mut self, q: usize) -> Result<SampleSet>;
}

/// Consecutive disjoint slices of one pre-drawn pool.
pub struct PoolSource {
    pool: SampleSet,
    cursor: usize,
}

impl PoolSource {
    pub fn new(pool: SampleSet) -> Self {
        Self { pool, cursor: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.pool.p() - self.cursor
    }
}

impl SampleSource for PoolSource {
    fn next_batch(&mut self, q: usize) -> Result<SampleSet> {
        if q > self.remaining() {
            return Err(Error::PoolExhausted {
                wanted: q,
                remaining: self.remaining(),
            });
        }
        let batch = self.pool.slice(self.cursor..self.cursor + q);
        self.cursor += q;
        Ok(batch)
    }
}

/// Batches drawn on demand from a planted model, each with its own seed.
pub struct GeneratorSource {
    dict: Dictionary,
    cfg: GenConfig,
    batches: u64,
}

impl GeneratorSource {
    pub fn new(dict: Dictionary, cfg: GenConfig) -> Self {
        Self {
            dict,
            cfg,
            batches: 0,
        }
    }
}

impl SampleSource for GeneratorSource {
    fn next_batch(&mut self, q: usize) -> Result<SampleSet> {
        let cfg = GenConfig {
            seed: rng::derive_seed(self.cfg.seed, "refine-batch", self.batches),
            ..self.cfg.clone()
        };
        self.batches += 1;
        generate_samples(&self.dict, &cfg, q)
    }
}

/// One line of the refinement trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Aligned error of the updated estimate (needs a reference).
    pub max_err: Option<f64>,
    pub mean_err: Option<f64>,
    /// Fraction of batch samples whose inferred support was exact (needs ground truth).
    pub support_acc: Option<f64>,
    /// Largest column change `||B'_j - B_j||` of the round.
    pub changed_norm: f64,
    pub empty_columns: usize,
    pub perm: Option<Vec<usize>>,
    pub signs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RefineTrace {
    pub rounds: Vec<RoundRecord>,
}

fn support_accuracy(
    supports: &[Vec<usize>],
    batch: &SampleSet,
    b: &Dictionary,
    reference: &Dictionary,
) -> Result<Option<f64>> {
    let Some(truth) = batch.ground_truth.as_ref() else {
        return Ok(None);
    };
    let perm = align_partial(reference, b)?.perm;
    let exact = supports
        .iter()
        .zip(truth)
        .filter(|(s, code)| {
            let mut mapped: Vec<usize> = s.iter().map(|&j| perm[j]).collect();
            mapped.sort_unstable();
            mapped == code.support
        })
        .count();
    Ok(Some(exact as f64 / supports.len().max(1) as f64))
}

/// Run up to `cfg.rounds` averaging rounds on fresh batches.
///
/// When `reference` is given, each round records the aligned error of the
/// new estimate and the support accuracy of the estimate it started from.
pub fn refine(
    b0: &Dictionary,
    source: &mut dyn SampleSource,
    cfg: &RefineConfig,
    reference: Option<&Dictionary>,
) -> Result<(Dictionary, RefineTrace)> {
    cfg.validate()?;
    let mut b = b0.clone();
    let mut trace = RefineTrace::default();
    for round in 1..=cfg.rounds {
        let batch = source.next_batch(cfg.batch_size)?;
        let step = iterative_average_step(&b, &batch, cfg.tau)?;
        let changed_norm = b
            .columns()
            .zip(step.dictionary.columns())
            .map(|(x, y)| dist(x, y))
            .fold(0.0, f64::max);
        let (mut max_err, mut mean_err, mut support_acc, mut perm, mut signs) =
            (None, None, None, None, None);
        if let Some(a) = reference {
            support_acc = support_accuracy(&step.supports, &batch, &b, a)?;
            let al = align_partial(a, &step.dictionary)?;
            max_err = Some(al.max_err);
            mean_err = Some(al.mean_err());
            perm = Some(al.perm);
            signs = Some(al.signs);
        }
        trace.rounds.push(RoundRecord {
            round,
            max_err,
            mean_err,
            support_acc,
            changed_norm,
            empty_columns: step.empty_columns.len(),
            perm,
            signs,
        });
        b = step.dictionary;

        let changes: Vec<f64> = trace.rounds.iter().map(|r| r.changed_norm).collect();
        if let [.., c0, c1, c2] = changes[..] {
            if c2 > c1 && c1 > c0 && c2 > cfg.divergence_floor {
                return Err(Error::Diverged {
                    round,
                    changes: vec![c0, c1, c2],
                });
            }
        }
        if cfg.target_error.is_some_and(|t| changed_norm < t) {
            break;
        }
    }
    Ok((b, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_random_dictionary, DictOptions, SparseCode};

    fn identity(n: usize) -> Dictionary {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 1.0;
        }
        Dictionary::from_columns(n, d).unwrap()
    }

    #[test]
    fn support_examples() {
        let b = identity(4);
        let y = [1.0, 1.0, 0.0, 0.0];
        assert_eq!(infer_support(&y, &b, 0.5).unwrap(), vec![0, 1]);
        assert!(infer_support(&[0.0; 4], &b, 0.5).unwrap().is_empty());
        assert!(infer_support(&[0.0; 3], &b, 0.5).is_err());
    }

    #[test]
    fn single_sample_keeps_its_column() {
        let opts = DictOptions {
            orthonormalize: true,
            ..Default::default()
        };
        let a = gen_random_dictionary(8, 5, &opts, 3).unwrap();
        let code = SparseCode {
            support: vec![2],
            values: vec![2.0],
        };
        let mut y = vec![0.0; 8];
        a.apply(&code, &mut y);
        let batch = SampleSet::new(8, y, Some(vec![code])).unwrap();
        let out = iterative_average_step(&a, &batch, 0.5).unwrap();
        assert!(dist(out.dictionary.col(2), a.col(2)) < 1e-14);
        assert_eq!(out.empty_columns, vec![0, 1, 3, 4]);
    }

    #[test]
    fn planted_dictionary_is_a_fixed_point() {
        let opts = DictOptions {
            orthonormalize: true,
            ..Default::default()
        };
        let a = gen_random_dictionary(32, 20, &opts, 5).unwrap();
        let cfg = GenConfig {
            n: 32,
            m: 20,
            k: 3,
            seed: 9,
            ..Default::default()
        };
        let batch = generate_samples(&a, &cfg, 400).unwrap();
        let out = iterative_average_step(&a, &batch, 0.5).unwrap();
        for j in 0..20 {
            assert!(dist(out.dictionary.col(j), a.col(j)) < 1e-10);
        }
    }

    #[test]
    fn zero_rounds_returns_start() {
        let a = identity(3);
        let mut src = PoolSource::new(SampleSet::new(3, vec![], None).unwrap());
        let cfg = RefineConfig {
            rounds: 0,
            ..Default::default()
        };
        let (b, trace) = refine(&a, &mut src, &cfg, None).unwrap();
        assert_eq!(b, a);
        assert!(trace.rounds.is_empty());
    }

    #[test]
    fn pool_exhaustion_is_reported() {
        let a = identity(2);
        let mut src = PoolSource::new(SampleSet::new(2, vec![1.0, 0.0], None).unwrap());
        let cfg = RefineConfig {
            batch_size: 2,
            rounds: 1,
            ..Default::default()
        };
        assert!(matches!(
            refine(&a, &mut src, &cfg, None),
            Err(Error::PoolExhausted {
                wanted: 2,
                remaining: 1
            })
        ));
    }

    #[test]
    fn starting_at_truth_stops_after_one_round() {
        let opts = DictOptions {
            orthonormalize: true,
            ..Default::default()
        };
        let a = gen_random_dictionary(16, 10, &opts, 2).unwrap();
        let gen = GenConfig {
            n: 16,
            m: 10,
            k: 2,
            seed: 4,
            ..Default::default()
        };
        let mut src = GeneratorSource::new(a.clone(), gen);
        let cfg = RefineConfig {
            batch_size: 200,
            rounds: 5,
            target_error: Some(1e-9),
            ..Default::default()
        };
        let (_, trace) = refine(&a, &mut src, &cfg, Some(&a)).unwrap();
        assert_eq!(trace.rounds.len(), 1);
        assert!(trace.rounds[0].changed_norm < 1e-12);
        assert_eq!(trace.rounds[0].support_acc, Some(1.0));
    }
}
