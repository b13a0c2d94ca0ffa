//! CART classification tree with Gini impurity.
//!
//! Split search is exhaustive over midpoints of consecutive distinct values.
//! Candidate splits are compared exactly in integer arithmetic so that ties
//! are resolved by (lower feature index, lower threshold) regardless of
//! floating point noise.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data_model::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

/// Candidate split quality as the exact fraction `num / den`, where
/// `num / den = sum_c(left_c^2) / n_left + sum_c(right_c^2) / n_right`.
/// Larger is purer.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn new(sq_left: u64, n_left: u64, sq_right: u64, n_right: u64) -> Self {
        Purity {
            num: sq_left as u128 * n_right as u128 + sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn cmp(&self, other: &Purity) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    min_split: usize,
    nodes: Vec<Node>,
    pairs: Vec<(f64, usize)>,
}

pub(crate) fn majority(counts: &[u64]) -> usize {
    // max_by_key keeps the last maximum; scan manually to prefer lower ids.
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

impl<'a> Builder<'a> {
    fn class_counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        counts
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(&counts) });
        if pure || depth >= self.max_depth || rows.len() < self.min_split {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, &counts) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x.get(r, feature) <= threshold);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    fn best_split(&mut self, rows: &[usize], counts: &[u64]) -> Option<(usize, f64)> {
        let n = rows.len() as u64;
        let total_sq: u64 = counts.iter().map(|c| c * c).sum();
        let mut best: Option<(Purity, usize, f64)> = None;
        let mut left = vec![0u64; self.n_classes];
        let mut right = vec![0u64; self.n_classes];

        for f in 0..self.x.cols() {
            self.pairs.clear();
            self.pairs.extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[self.pairs.len() - 1].0 {
                continue;
            }
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(counts);
            let (mut sq_left, mut sq_right) = (0u64, total_sq);
            for i in 0..self.pairs.len() - 1 {
                let c = self.pairs[i].1;
                sq_left += 2 * left[c] + 1;
                left[c] += 1;
                sq_right -= 2 * right[c] - 1;
                right[c] -= 1;
                let (lo, hi) = (self.pairs[i].0, self.pairs[i + 1].0);
                if lo == hi {
                    continue;
                }
                let n_left = i as u64 + 1;
                let purity = Purity::new(sq_left, n_left, sq_right, n - n_left);
                if best.as_ref().is_none_or(|(b, _, _)| purity.cmp(b) == Ordering::Greater) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((purity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl DecisionTree {
    /// Fits on all rows of `x`. `y` must be nonempty with labels `< n_classes`.
    pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize, max_depth: usize, min_split: usize) -> Self {
        let mut builder = Builder {
            x,
            y,
            n_classes,
            max_depth,
            min_split,
            nodes: Vec::new(),
            pairs: Vec::with_capacity(y.len()),
        };
        builder.build((0..y.len()).collect(), 0);
        DecisionTree { nodes: builder.nodes }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    id = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// `(feature, threshold)` at the root, if the root splits.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}
