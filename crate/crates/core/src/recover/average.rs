use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ColumnDiagnostics, RecoverConfig, RecoverStrategy, Recovery};
use crate::cluster::OverlapClustering;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::model::{Dictionary, SampleSet};
use crate::registry::Named;

/// One side of a cluster split by the sign of the cluster's coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedCluster {
    /// Index of the cluster in the clustering it came from.
    pub tag: usize,
    pub members_pos: Vec<usize>,
    pub members_all: Vec<usize>,
}

/// For each sample, the sorted ids of the clusters containing it.
fn membership(p: usize, clustering: &OverlapClustering) -> Vec<Vec<usize>> {
    let mut of: Vec<Vec<usize>> = vec![Vec::new(); p];
    for (c, members) in clustering.clusters.iter().enumerate() {
        for &j in members {
            of[j].push(c);
        }
    }
    of
}

fn shared_clusters(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Split every cluster into the two sides of its coordinate's sign.
///
/// Pairs that share exactly one cluster are labelled with the sign of their
/// inner product. Starting from the smallest member `u`, a member `v` joins
/// the positive side if `(u, v)` is labelled +1 or some `w` carries equal
/// labels on `(u, w)` and `(v, w)`. Intermediate members `w` are drawn from the
/// first `label_cap` members of the cluster.
pub fn find_relative_signs(
    set: &SampleSet,
    clustering: &OverlapClustering,
    label_cap: usize,
) -> Result<Vec<SignedCluster>> {
    let p = set.p();
    if let Some(bad) = clustering.clusters.iter().flatten().find(|&&j| j >= p) {
        return Err(Error::InvalidNodes(format!(
            "sample {bad} out of range (p={p})"
        )));
    }
    let of = membership(p, clustering);
    let label = |a: usize, b: usize| -> Option<bool> {
        if shared_clusters(&of[a], &of[b]) != 1 {
            return None;
        }
        let ip = dot(set.sample(a), set.sample(b));
        (ip != 0.0).then_some(ip > 0.0)
    };

    clustering
        .clusters
        .par_iter()
        .enumerate()
        .map(|(c, members)| {
            if members.is_empty() {
                return Err(Error::EmptyCluster(c));
            }
            let u = members[0];
            let via: Vec<(usize, bool)> = members
                .iter()
                .skip(1)
                .take(label_cap.max(1))
                .filter_map(|&w| label(u, w).map(|l| (w, l)))
                .collect();
            let mut pos = vec![u];
            for &v in &members[1..] {
                let direct = label(u, v);
                if direct == Some(true) {
                    pos.push(v);
                    continue;
                }
                let mut linked = direct.is_some();
                let mut joined = false;
                for &(w, lu) in &via {
                    if w == v {
                        continue;
                    }
                    if let Some(lv) = label(v, w) {
                        linked = true;
                        if lv == lu {
                            joined = true;
                            break;
                        }
                    }
                }
                if joined {
                    pos.push(v);
                } else if !linked {
                    return Err(Error::UnlabelledMember {
                        cluster: c,
                        member: v,
                    });
                }
            }
            if 2 * pos.len() <= members.len() {
                pos = members
                    .iter()
                    .copied()
                    .filter(|x| pos.binary_search(x).is_err())
                    .collect();
            }
            Ok(SignedCluster {
                tag: c,
                members_pos: pos,
                members_all: members.clone(),
            })
        })
        .collect()
}

/// Normalised sum of each cluster's positive side.
pub fn average_recover(set: &SampleSet, signed: &[SignedCluster]) -> Result<Dictionary> {
    let n = set.n();
    let cols: Vec<Vec<f64>> = signed
        .par_iter()
        .map(|s| {
            if s.members_pos.is_empty() {
                return Err(Error::EmptyCluster(s.tag));
            }
            let mut acc = vec![0.0; n];
            for &j in &s.members_pos {
                axpy(1.0, set.sample(j), &mut acc);
            }
            if acc.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroNorm(s.tag));
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Dictionary::normalized(n, cols.concat())
}

/// Sign-consistent averaging.
pub struct AverageRecover;

impl Named for AverageRecover {
    fn name(&self) -> &'static str {
        "average"
    }
}

impl RecoverStrategy for AverageRecover {
    fn recover(
        &self,
        set: &SampleSet,
        clustering: &OverlapClustering,
        cfg: &RecoverConfig,
    ) -> Result<Recovery> {
        let signed = find_relative_signs(set, clustering, cfg.label_cap)?;
        let dictionary = average_recover(set, &signed)?;
        let columns = signed
            .iter()
            .map(|s| ColumnDiagnostics {
                cluster: s.tag,
                size: s.members_all.len(),
                sigma1: None,
                sigma2: None,
                zeta: cfg.zeta,
            })
            .collect();
        Ok(Recovery {
            dictionary,
            columns,
            signed: Some(signed),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Provenance;

    fn clustering(sets: Vec<Vec<usize>>) -> OverlapClustering {
        let provenance = (0..sets.len()).map(Provenance::Coordinate).collect();
        OverlapClustering {
            clusters: sets,
            provenance,
        }
    }

    #[test]
    fn two_positive_samples_share_a_side() {
        let set = SampleSet::new(2, vec![1.0, 0.0, 1.0, 0.0], None).unwrap();
        let s = find_relative_signs(&set, &clustering(vec![vec![0, 1]]), 500).unwrap();
        assert_eq!(s[0].members_pos, vec![0, 1]);
    }

    #[test]
    fn opposite_pair_keeps_one_side() {
        let set = SampleSet::new(2, vec![1.0, 0.0, -1.0, 0.0], None).unwrap();
        let s = find_relative_signs(&set, &clustering(vec![vec![0, 1]]), 500).unwrap();
        assert_eq!(s[0].members_pos.len(), 1);
        assert!(s[0].members_pos == vec![0] || s[0].members_pos == vec![1]);
    }

    #[test]
    fn member_without_labelled_path_is_reported() {
        // samples 0 and 1 share two clusters, so their pair carries no label
        let set = SampleSet::new(1, vec![1.0, 1.0, 1.0], None).unwrap();
        let c = clustering(vec![vec![0, 1], vec![0, 1, 2]]);
        assert!(matches!(
            find_relative_signs(&set, &c, 500),
            Err(Error::UnlabelledMember {
                cluster: 0,
                member: 1
            })
        ));
    }

    #[test]
    fn averaging_fixed_point_and_cancellation() {
        let a = [0.6, 0.8, 0.0];
        let set = SampleSet::new(3, [a, a].concat(), None).unwrap();
        let s = SignedCluster {
            tag: 0,
            members_pos: vec![0, 1],
            members_all: vec![0, 1],
        };
        let d = average_recover(&set, &[s.clone()]).unwrap();
        assert!(d.col(0).iter().zip(&a).all(|(x, y)| (x - y).abs() < 1e-15));

        let z = [0.0, 0.0, 0.3];
        let plus: Vec<f64> = a.iter().zip(&z).map(|(x, y)| x + y).collect();
        let minus: Vec<f64> = a.iter().zip(&z).map(|(x, y)| x - y).collect();
        let set = SampleSet::new(3, [plus, minus].concat(), None).unwrap();
        let d = average_recover(&set, &[s]).unwrap();
        assert!(d.col(0).iter().zip(&a).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn cancelling_sum_is_an_error() {
        let set = SampleSet::new(2, vec![1.0, 0.0, -1.0, 0.0], None).unwrap();
        let s = SignedCluster {
            tag: 3,
            members_pos: vec![0, 1],
            members_all: vec![0, 1],
        };
        assert!(matches!(
            average_recover(&set, &[s]),
            Err(Error::ZeroNorm(3))
        ));
    }
}
