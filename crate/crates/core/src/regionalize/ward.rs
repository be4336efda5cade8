use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::WeightsMatrix;

/// One agglomeration step. Node ids follow the usual linkage convention:
/// leaves are `0..n`, merge `t` creates node `n + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Ward increase in total within-cluster sum of squares.
    pub dissimilarity: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

#[derive(Clone)]
struct Cluster {
    size: usize,
    sum: Vec<f64>,
    min_leaf: usize,
    neighbors: BTreeSet<usize>,
    alive: bool,
}

impl Cluster {
    fn centroid(&self) -> impl Iterator<Item = f64> + '_ {
        self.sum.iter().map(move |s| s / self.size as f64)
    }
}

fn ward_cost(a: &Cluster, b: &Cluster) -> f64 {
    let d2: f64 = a.centroid().zip(b.centroid()).map(|(x, y)| (x - y).powi(2)).sum();
    (a.size * b.size) as f64 / (a.size + b.size) as f64 * d2
}

#[derive(PartialEq)]
struct Candidate {
    cost: f64,
    /// `(min leaf of one side, min leaf of the other)`, smaller first.
    tie: (usize, usize),
    a: usize,
    b: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // reversed: BinaryHeap pops the cheapest, then the smallest tie key
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.tie.cmp(&self.tie))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ward agglomeration in which only clusters adjacent in `contiguity` may
/// merge. Runs until no adjacent pair remains, so the tree has `n - c`
/// merges for `c` connected components.
pub fn constrained_ward(features: &[Vec<f64>], contiguity: &WeightsMatrix) -> Result<MergeTree> {
    let n = features.len();
    if contiguity.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: contiguity.n(),
        });
    }
    let mut clusters: Vec<Cluster> = features
        .iter()
        .enumerate()
        .map(|(i, f)| Cluster {
            size: 1,
            sum: f.clone(),
            min_leaf: i,
            neighbors: BTreeSet::new(),
            alive: true,
        })
        .collect();
    for (i, j, _) in contiguity.triplets() {
        clusters[i].neighbors.insert(j);
        clusters[j].neighbors.insert(i);
    }

    let candidate = |clusters: &[Cluster], a: usize, b: usize| {
        let (ma, mb) = (clusters[a].min_leaf, clusters[b].min_leaf);
        Candidate {
            cost: ward_cost(&clusters[a], &clusters[b]),
            tie: (ma.min(mb), ma.max(mb)),
            a,
            b,
        }
    };
    let mut heap = BinaryHeap::new();
    for a in 0..n {
        for &b in &clusters[a].neighbors {
            if a < b {
                heap.push(candidate(&clusters, a, b));
            }
        }
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while let Some(c) = heap.pop() {
        if !clusters[c.a].alive || !clusters[c.b].alive {
            continue;
        }
        let (left, right) = (c.a.min(c.b), c.a.max(c.b));
        let id = clusters.len();
        let (l, r) = (clusters[left].clone(), clusters[right].clone());
        let mut neighbors: BTreeSet<usize> = l.neighbors.union(&r.neighbors).copied().collect();
        neighbors.remove(&left);
        neighbors.remove(&right);
        for &nb in &neighbors {
            let set = &mut clusters[nb].neighbors;
            set.remove(&left);
            set.remove(&right);
            set.insert(id);
        }
        clusters[left].alive = false;
        clusters[right].alive = false;
        clusters.push(Cluster {
            size: l.size + r.size,
            sum: l.sum.iter().zip(&r.sum).map(|(x, y)| x + y).collect(),
            min_leaf: l.min_leaf.min(r.min_leaf),
            neighbors: neighbors.clone(),
            alive: true,
        });
        merges.push(Merge {
            left,
            right,
            dissimilarity: c.cost,
            size: l.size + r.size,
        });
        for nb in neighbors {
            heap.push(candidate(&clusters, id, nb));
        }
    }
    Ok(MergeTree { n_leaves: n, merges })
}

impl MergeTree {
    /// Number of connected components of the contiguity graph.
    pub fn components(&self) -> usize {
        self.n_leaves - self.merges.len()
    }

    /// Merges whose dissimilarity is below that of the merge before.
    pub fn inversions(&self) -> usize {
        self.merges
            .windows(2)
            .filter(|p| p[1].dissimilarity < p[0].dissimilarity)
            .count()
    }

    /// Cluster id per leaf after applying the first `steps` merges. Ids are
    /// the node ids of the cluster roots.
    pub fn roots_after(&self, steps: usize) -> Vec<usize> {
        let n = self.n_leaves;
        let mut root: Vec<usize> = (0..n + steps).collect();
        for (t, m) in self.merges[..steps].iter().enumerate() {
            root[m.left] = n + t;
            root[m.right] = n + t;
        }
        (0..n)
            .map(|mut x| {
                while root[x] != x {
                    x = root[x];
                }
                x
            })
            .collect()
    }

    /// Cuts to `k` clusters by merge count; when the graph has more than `k`
    /// components the cut stops at the full forest.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
        }
        let steps = (n - k).min(self.merges.len());
        Ok(self.roots_after(steps))
    }

    /// Depth-first leaf order. At every internal node the child created
    /// earlier (the smaller node id) comes first; roots of a forest are
    /// taken in the same order.
    pub fn leaf_order(&self) -> Vec<usize> {
        let n = self.n_leaves;
        let total = n + self.merges.len();
        let mut has_parent = vec![false; total];
        for m in &self.merges {
            has_parent[m.left] = true;
            has_parent[m.right] = true;
        }
        let mut out = Vec::with_capacity(n);
        for root in (0..total).filter(|&v| !has_parent[v]) {
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                if v < n {
                    out.push(v);
                } else {
                    let m = self.merges[v - n];
                    let (first, second) = (m.left.min(m.right), m.left.max(m.right));
                    stack.push(second);
                    stack.push(first);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightsKind;

    fn chain(n: usize) -> WeightsMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = Vec::new();
                if i > 0 {
                    r.push((i - 1, 1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, 1.0));
                }
                r
            })
            .collect();
        WeightsMatrix::from_rows(rows, WeightsKind::Rook).unwrap()
    }

    #[test]
    fn chain_two_blocks() {
        let f: Vec<Vec<f64>> = [0.0, 0.0, 10.0, 10.0].iter().map(|&v| vec![v]).collect();
        let t = constrained_ward(&f, &chain(4)).unwrap();
        assert_eq!(t.merges.len(), 3);
        let labels = t.cut(2).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[1], labels[2]);
        assert_eq!(t.merges[2].dissimilarity, 100.0);
    }

    #[test]
    fn contiguity_blocks_distant_merge() {
        // 0 and 2 are identical but not adjacent
        let f = vec![vec![0.0], vec![5.0], vec![0.0]];
        let t = constrained_ward(&f, &chain(3)).unwrap();
        let first = t.merges[0];
        assert!(first.left == 1 || first.right == 1);
    }

    #[test]
    fn two_leaves_order() {
        let f = vec![vec![1.0], vec![2.0]];
        let t = constrained_ward(&f, &chain(2)).unwrap();
        assert_eq!(t.leaf_order(), vec![0, 1]);
    }

    #[test]
    fn forest_when_disconnected() {
        let w = WeightsMatrix::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)], vec![]], WeightsKind::Queen)
            .unwrap();
        let t = constrained_ward(&[vec![0.0], vec![1.0], vec![2.0]], &w).unwrap();
        assert_eq!(t.components(), 2);
        let labels = t.cut(1).unwrap();
        assert_ne!(labels[0], labels[2]);
        let mut order = t.leaf_order();
        order.sort();
        assert_eq!(order, vec![0, 1, 2]);
    }
}
