use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{ColumnDiagnostics, RecoverConfig, RecoverStrategy, Recovery};
use crate::cluster::OverlapClustering;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, normalize};
use crate::model::{Dictionary, SampleSet};
use crate::registry::Named;
use crate::rng;

/// Relative eigenvalue gap below which a result is flagged degenerate.
const DEGENERATE_GAP: f64 = 1e-9;

/// A symmetric linear map on R^n.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// Dense empirical second moment `(1/|C|) sum Y Y^T`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub n: usize,
    pub sigma_hat: Vec<f64>,
    pub count: usize,
}

impl CovarianceEstimate {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sigma_hat[i * self.n + j]
    }
}

impl SymmetricOperator for CovarianceEstimate {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.sigma_hat[i * self.n..(i + 1) * self.n], x);
        }
    }
}

pub fn empirical_covariance(set: &SampleSet, cluster: &[usize]) -> Result<CovarianceEstimate> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster(0));
    }
    let n = set.n();
    let mut s = vec![0.0; n * n];
    for &j in cluster {
        let y = set.sample(j);
        for a in 0..n {
            let ya = y[a];
            for b in a..n {
                s[a * n + b] += ya * y[b];
            }
        }
    }
    let inv = 1.0 / cluster.len() as f64;
    for a in 0..n {
        for b in a..n {
            let v = s[a * n + b] * inv;
            s[a * n + b] = v;
            s[b * n + a] = v;
        }
    }
    Ok(CovarianceEstimate {
        n,
        sigma_hat: s,
        count: cluster.len(),
    })
}

/// The same second moment applied implicitly as `(1/|C|) sum Y (Y^T x)`,
/// which avoids the n x n matrix for large n.
pub struct ClusterOperator<'a> {
    pub set: &'a SampleSet,
    pub members: &'a [usize],
}

impl SymmetricOperator for ClusterOperator<'_> {
    fn dim(&self) -> usize {
        self.set.n()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &j in self.members {
            let y = self.set.sample(j);
            axpy(dot(y, x), y, out);
        }
        let inv = 1.0 / self.members.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub vector: Vec<f64>,
    pub sigma1: f64,
    /// Top eigenvalue after deflating `sigma1 v v^T`.
    pub sigma2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// No usable gap between the two leading eigenvalues.
    pub degenerate: bool,
}

struct Deflated<'a, O: SymmetricOperator + ?Sized> {
    op: &'a O,
    v: &'a [f64],
    sigma: f64,
}

impl<O: SymmetricOperator + ?Sized> SymmetricOperator for Deflated<'_, O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply(x, out);
        axpy(-self.sigma * dot(self.v, x), self.v, out);
    }
}

/// Power iteration; returns (vector, rayleigh quotient, iterations, converged).
fn power<O: SymmetricOperator + ?Sized>(
    op: &O,
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let n = op.dim();
    let mut x = start;
    let mut y = vec![0.0; n];
    for it in 1..=max_iter {
        op.apply(&x, &mut y);
        if normalize(&mut y) == 0.0 {
            // x lies in the null space; it is an eigenvector for 0
            return (x, 0.0, it, true);
        }
        let c = dot(&x, &y);
        let sine = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - c * b).powi(2))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut x, &mut y);
        if sine < tol {
            let mut ax = vec![0.0; n];
            op.apply(&x, &mut ax);
            return (x.clone(), dot(&x, &ax), it, true);
        }
    }
    let mut ax = vec![0.0; n];
    op.apply(&x, &mut ax);
    let rq = dot(&x, &ax);
    (x, rq, max_iter, false)
}

fn random_unit(n: usize, seed: u64, label: &str) -> Vec<f64> {
    let mut r = rng::stream(seed, label, 0);
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        if normalize(&mut v) > 0.0 {
            return v;
        }
    }
}

/// Leading eigenvector of a symmetric PSD operator by power iteration, with
/// the second eigenvalue from one deflated pass.
pub fn top_singular_vector<O: SymmetricOperator + ?Sized>(
    op: &O,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> PowerResult {
    let n = op.dim();
    let (v, sigma1, iterations, converged) =
        power(op, random_unit(n, seed, "power"), tol, max_iter);
    let sigma2 = if n > 1 {
        let defl = Deflated {
            op,
            v: &v,
            sigma: sigma1,
        };
        let mut start = random_unit(n, seed, "power-deflated");
        axpy(-dot(&start, &v), &v, &mut start);
        normalize(&mut start);
        power(&defl, start, tol, max_iter).1
    } else {
        0.0
    };
    let degenerate = sigma1 <= 0.0 || sigma1 - sigma2 <= DEGENERATE_GAP * sigma1.abs();
    PowerResult {
        vector: v,
        sigma1,
        sigma2,
        iterations,
        converged,
        degenerate,
    }
}

/// Accuracy floor `max(mu k / sqrt(n), sqrt(k / m))`.
pub fn zeta(mu: f64, k: usize, n: usize, m: usize) -> f64 {
    (mu * k as f64 / (n as f64).sqrt()).max((k as f64 / m as f64).sqrt())
}

#[derive(Debug, Clone)]
pub struct SvdRecovery {
    pub dictionary: Dictionary,
    pub power: Vec<PowerResult>,
    pub columns: Vec<ColumnDiagnostics>,
}

/// Per cluster, the top eigenvector of the cluster second moment.
pub fn svd_recover(
    set: &SampleSet,
    clustering: &OverlapClustering,
    cfg: &RecoverConfig,
) -> Result<SvdRecovery> {
    let n = set.n();
    let results: Vec<PowerResult> = clustering
        .clusters
        .par_iter()
        .enumerate()
        .map(|(c, members)| {
            if members.is_empty() {
                return Err(Error::EmptyCluster(c));
            }
            let seed = rng::derive_seed(cfg.seed, "svd-cluster", c as u64);
            // a dense matrix is cheaper once the cluster outgrows the dimension
            Ok(if members.len() > 2 * n {
                let cov = empirical_covariance(set, members)?;
                top_singular_vector(&cov, cfg.tol, cfg.max_iter, seed)
            } else {
                top_singular_vector(
                    &ClusterOperator { set, members },
                    cfg.tol,
                    cfg.max_iter,
                    seed,
                )
            })
        })
        .collect::<Result<_>>()?;
    let columns = clustering
        .clusters
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(c, (members, r))| ColumnDiagnostics {
            cluster: c,
            size: members.len(),
            sigma1: Some(r.sigma1),
            sigma2: Some(r.sigma2),
            zeta: cfg.zeta,
        })
        .collect();
    let data: Vec<f64> = results
        .iter()
        .flat_map(|r| r.vector.iter().copied())
        .collect();
    Ok(SvdRecovery {
        dictionary: Dictionary::normalized(n, data)?,
        power: results,
        columns,
    })
}

/// Top-eigenvector recovery.
pub struct SvdRecover;

impl Named for SvdRecover {
    fn name(&self) -> &'static str {
        "svd"
    }
}

impl RecoverStrategy for SvdRecover {
    fn recover(
        &self,
        set: &SampleSet,
        clustering: &OverlapClustering,
        cfg: &RecoverConfig,
    ) -> Result<Recovery> {
        let r = svd_recover(set, clustering, cfg)?;
        Ok(Recovery {
            dictionary: r.dictionary,
            columns: r.columns,
            signed: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> CovarianceEstimate {
        let n = values.len();
        let mut s = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            s[i * n + i] = *v;
        }
        CovarianceEstimate {
            n,
            sigma_hat: s,
            count: 1,
        }
    }

    #[test]
    fn covariance_of_signed_unit_vectors() {
        let set = SampleSet::new(2, vec![1.0, 0.0, -1.0, 0.0], None).unwrap();
        let one = empirical_covariance(&set, &[0]).unwrap();
        assert_eq!(one.sigma_hat, vec![1.0, 0.0, 0.0, 0.0]);
        let both = empirical_covariance(&set, &[0, 1]).unwrap();
        assert_eq!(both.sigma_hat, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(empirical_covariance(&set, &[]).is_err());
    }

    #[test]
    fn power_on_diagonal() {
        let r = top_singular_vector(&diag(&[2.0, 1.0]), 1e-12, 10_000, 1);
        assert!(r.converged && !r.degenerate);
        assert!((r.vector[0].abs() - 1.0).abs() < 1e-12);
        assert!((r.sigma1 - 2.0).abs() < 1e-12 && (r.sigma2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_degenerate() {
        let r = top_singular_vector(&diag(&[1.0, 1.0, 1.0]), 1e-12, 100, 4);
        assert!(r.degenerate);
        assert!((r.sigma1 - 1.0).abs() < 1e-12 && (r.sigma2 - 1.0).abs() < 1e-12);
        assert!((dot(&r.vector, &r.vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn implicit_operator_matches_dense() {
        let set =
            SampleSet::new(3, vec![1.0, 2.0, 0.5, -1.0, 0.0, 2.0, 0.3, 0.3, 0.3], None).unwrap();
        let members = [0, 1, 2];
        let cov = empirical_covariance(&set, &members).unwrap();
        let op = ClusterOperator {
            set: &set,
            members: &members,
        };
        let x = [0.2, -0.7, 1.1];
        let (mut a, mut b) = (vec![0.0; 3], vec![0.0; 3]);
        cov.apply(&x, &mut a);
        op.apply(&x, &mut b);
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-14));
    }

    #[test]
    fn cluster_of_signed_atoms_recovers_atom() {
        let a = [0.6, 0.0, 0.8];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let set = SampleSet::new(3, [a.to_vec(), neg, a.to_vec()].concat(), None).unwrap();
        let cl = OverlapClustering {
            clusters: vec![vec![0, 1, 2]],
            provenance: vec![crate::cluster::Provenance::Coordinate(0)],
        };
        let r = svd_recover(&set, &cl, &RecoverConfig::default()).unwrap();
        let c = dot(r.dictionary.col(0), &a).abs();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_takes_the_larger_term() {
        assert_eq!(zeta(0.0, 4, 16, 100), 0.2);
        assert_eq!(zeta(4.0, 4, 16, 100), 4.0);
    }
}
