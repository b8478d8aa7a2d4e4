//! Error metrics up to column permutation and sign, and clustering scores.

use serde::{Deserialize, Serialize};

use crate::cluster::OverlapClustering;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{Dictionary, SparseCode};
use crate::recover::SignedCluster;

/// Matching of estimated columns to reference columns.
///
/// Estimated column `i` is matched to reference column `perm[i]` with sign
/// `signs[i]`; `per_column_err[i] = ||hat_i - signs[i] * ref_{perm[i]}||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
    pub per_column_err: Vec<f64>,
    pub max_err: f64,
}

impl Alignment {
    pub fn mean_err(&self) -> f64 {
        if self.per_column_err.is_empty() {
            return 0.0;
        }
        self.per_column_err.iter().sum::<f64>() / self.per_column_err.len() as f64
    }
}

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// `cost` is row-major `rows x cols`; returns the column for each row.
pub fn hungarian(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols && cost.len() == rows * cols);
    // potentials formulation with 1-based sentinels
    let inf = f64::INFINITY;
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    assign
}

fn column_error(hat: &[f64], reference: &[f64], sign: f64) -> f64 {
    hat.iter()
        .zip(reference)
        .map(|(h, r)| (h - sign * r).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn align_rows(a_ref: &Dictionary, a_hat: &Dictionary) -> Alignment {
    let (mr, mh) = (a_ref.m(), a_hat.m());
    let score: Vec<f64> = (0..mh)
        .flat_map(|i| (0..mr).map(move |j| (i, j)))
        .map(|(i, j)| dot(a_hat.col(i), a_ref.col(j)))
        .collect();
    let perm = if mh <= mr {
        let cost: Vec<f64> = score.iter().map(|s| -s.abs()).collect();
        hungarian(&cost, mh, mr)
    } else {
        // more estimates than references: match each reference once and
        // pair leftover estimates with their best reference column
        let cost: Vec<f64> = (0..mr)
            .flat_map(|j| (0..mh).map(move |i| (i, j)))
            .map(|(i, j)| -score[i * mr + j].abs())
            .collect();
        let of_ref = hungarian(&cost, mr, mh);
        let mut perm: Vec<Option<usize>> = vec![None; mh];
        for (j, &i) in of_ref.iter().enumerate() {
            perm[i] = Some(j);
        }
        perm.iter()
            .enumerate()
            .map(|(i, p)| {
                p.unwrap_or_else(|| {
                    (0..mr)
                        .max_by(|&a, &b| {
                            score[i * mr + a].abs().total_cmp(&score[i * mr + b].abs())
                        })
                        .unwrap_or(0)
                })
            })
            .collect()
    };
    let signs: Vec<f64> = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| if score[i * mr + j] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let per_column_err: Vec<f64> = perm
        .iter()
        .zip(&signs)
        .enumerate()
        .map(|(i, (&j, &s))| column_error(a_hat.col(i), a_ref.col(j), s))
        .collect();
    let max_err = per_column_err.iter().copied().fold(0.0, f64::max);
    Alignment {
        perm,
        signs,
        per_column_err,
        max_err,
    }
}

/// Optimal permutation and signs matching `a_hat` to `a_ref` (same shape).
///
/// The assignment maximises the total absolute inner product; the reported
/// error is the largest column distance under that assignment.
pub fn align_dictionaries(a_ref: &Dictionary, a_hat: &Dictionary) -> Result<Alignment> {
    if a_ref.n() != a_hat.n() || a_ref.m() != a_hat.m() {
        return Err(Error::DimensionMismatch(format!(
            "reference {}x{}, estimate {}x{}",
            a_ref.n(),
            a_ref.m(),
            a_hat.n(),
            a_hat.m()
        )));
    }
    Ok(align_rows(a_ref, a_hat))
}

/// Like [`align_dictionaries`] but tolerates a different number of columns.
/// With fewer estimates each is matched to a distinct reference column; with
/// more, the surplus estimates reuse their closest reference column.
pub fn align_partial(a_ref: &Dictionary, a_hat: &Dictionary) -> Result<Alignment> {
    if a_ref.n() != a_hat.n() {
        return Err(Error::DimensionMismatch(format!(
            "reference dimension {}, estimate dimension {}",
            a_ref.n(),
            a_hat.n()
        )));
    }
    Ok(align_rows(a_ref, a_hat))
}

/// Reorder and re-sign an estimate so that column `j` estimates `A_j`.
/// Requires a bijective alignment.
pub fn apply_alignment(a_hat: &Dictionary, al: &Alignment) -> Result<Dictionary> {
    let m = a_hat.m();
    let n = a_hat.n();
    let mut data = vec![0.0; n * m];
    let mut seen = vec![false; m];
    for (i, (&j, &s)) in al.perm.iter().zip(&al.signs).enumerate() {
        if j >= m || seen[j] {
            return Err(Error::InvalidParameter(
                "alignment is not a bijection".into(),
            ));
        }
        seen[j] = true;
        for (d, x) in data[j * n..(j + 1) * n].iter_mut().zip(a_hat.col(i)) {
            *d = s * x;
        }
    }
    Dictionary::normalized(n, data)
}

/// Greedy Jaccard matching of found clusters to oracle clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    /// Per oracle cluster, the Jaccard similarity of its match (0 if missed).
    pub jaccard: Vec<f64>,
    /// Per oracle cluster, the index of the matched found cluster.
    pub matched: Vec<Option<usize>>,
    pub exact: usize,
    pub missed: usize,
    pub spurious: usize,
}

impl ClusterScore {
    /// Every oracle cluster matched exactly and nothing spurious.
    pub fn exact_match(&self) -> bool {
        self.missed == 0 && self.spurious == 0 && self.exact == self.jaccard.len()
    }
}

pub fn clustering_score(oracle: &OverlapClustering, found: &OverlapClustering) -> ClusterScore {
    let p = oracle
        .clusters
        .iter()
        .chain(&found.clusters)
        .flatten()
        .max()
        .map_or(0, |&x| x + 1);
    let mut of_sample: Vec<Vec<usize>> = vec![Vec::new(); p];
    for (o, members) in oracle.clusters.iter().enumerate() {
        for &j in members {
            of_sample[j].push(o);
        }
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    let mut inter = vec![0usize; oracle.len()];
    let mut touched = Vec::new();
    for (f, members) in found.clusters.iter().enumerate() {
        for &j in members {
            for &o in &of_sample[j] {
                if inter[o] == 0 {
                    touched.push(o);
                }
                inter[o] += 1;
            }
        }
        for o in touched.drain(..) {
            let i = inter[o];
            let union = oracle.clusters[o].len() + members.len() - i;
            pairs.push((i as f64 / union as f64, o, f));
            inter[o] = 0;
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut jaccard = vec![0.0; oracle.len()];
    let mut matched = vec![None; oracle.len()];
    let mut used = vec![false; found.len()];
    for (jac, o, f) in pairs {
        if matched[o].is_none() && !used[f] {
            matched[o] = Some(f);
            used[f] = true;
            jaccard[o] = jac;
        }
    }
    let exact = jaccard.iter().filter(|&&j| j == 1.0).count();
    let missed = matched.iter().filter(|m| m.is_none()).count();
    let spurious = used.iter().filter(|u| !**u).count();
    ClusterScore {
        jaccard,
        matched,
        exact,
        missed,
        spurious,
    }
}

/// Coordinate shared by most members of a cluster.
fn majority_coordinate(codes: &[SparseCode], members: &[usize]) -> Option<usize> {
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    for &j in members {
        for &i in &codes[j].support {
            *counts.entry(i).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
}

/// Per cluster, the better of the two sign conventions' agreement rates.
pub fn sign_accuracy_per_cluster(codes: &[SparseCode], signed: &[SignedCluster]) -> Vec<f64> {
    signed
        .iter()
        .map(|s| {
            let Some(i) = majority_coordinate(codes, &s.members_all) else {
                return 0.0;
            };
            let agree = s
                .members_all
                .iter()
                .filter(|&&u| {
                    let positive = codes[u].value_at(i).is_some_and(|x| x > 0.0);
                    let chosen = s.members_pos.binary_search(&u).is_ok();
                    positive == chosen
                })
                .count();
            let disagree = s
                .members_all
                .iter()
                .filter(|&&u| {
                    let negative = codes[u].value_at(i).is_some_and(|x| x < 0.0);
                    let chosen = s.members_pos.binary_search(&u).is_ok();
                    negative == chosen
                })
                .count();
            agree.max(disagree) as f64 / s.members_all.len() as f64
        })
        .collect()
}

/// Mean over clusters of [`sign_accuracy_per_cluster`]; NaN for no clusters.
pub fn sign_accuracy(codes: &[SparseCode], signed: &[SignedCluster]) -> f64 {
    let per = sign_accuracy_per_cluster(codes, signed);
    per.iter().sum::<f64>() / per.len() as f64
}
