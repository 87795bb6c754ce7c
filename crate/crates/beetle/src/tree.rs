//! CART regression trees: recursive binary splits that minimize the children's
//! summed squared deviation, with leaf predictions equal to the leaf mean.

use serde::{Deserialize, Serialize};

use crate::data::Configuration;
use crate::error::{Error, Result};

/// Tree hyperparameters. The model family is fixed; only the stopping rule varies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TreeParams {
    /// Smallest number of training rows either side of a split may hold.
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { min_samples_leaf: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A trained regression tree over one configuration space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    n_options: usize,
    nodes: Vec<Node>,
    params: TreeParams,
}

/// Best split of one node: lowest summed child SSE, ties broken by the lowest
/// feature index and then the lowest threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub sse: f64,
}

pub fn train_regression_tree(
    rows: &[(Configuration, f64)],
    params: TreeParams,
) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(Error::InsufficientData(
            "cannot train a regression tree on zero rows".into(),
        ));
    }
    let n_options = rows[0].0.values.len();
    let mut tree = RegressionTree {
        n_options,
        nodes: Vec::new(),
        params,
    };
    let indices: Vec<usize> = (0..rows.len()).collect();
    tree.grow(rows, indices);
    Ok(tree)
}

impl RegressionTree {
    pub fn n_options(&self) -> usize {
        self.n_options
    }

    /// Predicted performance for one configuration of the training space.
    pub fn predict(&self, config: &Configuration) -> f64 {
        assert_eq!(
            config.values.len(),
            self.n_options,
            "configuration does not match the training space"
        );
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if config.values[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// The split at the root, if the tree has one. Exposed so tests can compare
    /// against an exhaustive search over all candidate splits.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first() {
            Some(Node::Split {
                feature, threshold, ..
            }) => Some((*feature, *threshold)),
            _ => None,
        }
    }

    fn grow(&mut self, rows: &[(Configuration, f64)], indices: Vec<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        // Exact-constant check, not a variance tolerance: a leaf over equal
        // targets must reproduce that target bit-for-bit.
        let first = rows[indices[0]].1;
        let constant = indices.iter().all(|&i| rows[i].1 == first);
        if constant {
            self.nodes[id] = Node::Leaf { value: first };
            return id;
        }
        match best_split(rows, &indices, self.params.min_samples_leaf) {
            None => {
                let mean =
                    indices.iter().map(|&i| rows[i].1).sum::<f64>() / indices.len() as f64;
                self.nodes[id] = Node::Leaf { value: mean };
                id
            }
            Some(split) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = indices
                    .into_iter()
                    .partition(|&i| rows[i].0.values[split.feature] <= split.threshold);
                let left = self.grow(rows, left_rows);
                let right = self.grow(rows, right_rows);
                self.nodes[id] = Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
                id
            }
        }
    }
}

/// Search every feature and every midpoint between consecutive distinct values
/// for the split minimizing the children's summed squared deviation.
pub fn best_split(
    rows: &[(Configuration, f64)],
    indices: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    let n = indices.len();
    if n < 2 * min_samples_leaf.max(1) {
        return None;
    }
    let n_options = rows[indices[0]].0.values.len();
    let mut best: Option<SplitChoice> = None;
    for feature in 0..n_options {
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_by(|&a, &b| {
            rows[a].0.values[feature]
                .partial_cmp(&rows[b].0.values[feature])
                .unwrap()
        });
        // Prefix sums let each candidate split score in O(1):
        // SSE = sum(y^2) - sum(y)^2 / n on each side.
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        let total_sum: f64 = order.iter().map(|&i| rows[i].1).sum();
        let total_sq: f64 = order.iter().map(|&i| rows[i].1 * rows[i].1).sum();
        for cut in 1..n {
            let y = rows[order[cut - 1]].1;
            left_sum += y;
            left_sq += y * y;
            let a = rows[order[cut - 1]].0.values[feature];
            let b = rows[order[cut]].0.values[feature];
            if a == b {
                continue; // no threshold separates equal values
            }
            if cut < min_samples_leaf || n - cut < min_samples_leaf {
                continue;
            }
            let threshold = a + (b - a) / 2.0;
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / cut as f64)
                + (right_sq - right_sum * right_sum / (n - cut) as f64);
            let better = match best {
                None => true,
                Some(b) => {
                    sse < b.sse
                        || (sse == b.sse
                            && (feature < b.feature
                                || (feature == b.feature && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    sse,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(values: &[f64]) -> Configuration {
        Configuration::new(values.to_vec())
    }

    fn binary_rows(perfs: &[f64]) -> Vec<(Configuration, f64)> {
        let n = perfs.len().next_power_of_two().trailing_zeros().max(1) as usize;
        perfs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let bits: Vec<f64> = (0..n).map(|b| ((i >> b) & 1) as f64).collect();
                (config(&bits), p)
            })
            .collect()
    }

    #[test]
    fn a_single_row_predicts_its_target_everywhere() {
        let rows = vec![(config(&[0.0, 1.0]), 7.0)];
        let tree = train_regression_tree(&rows, TreeParams::default()).unwrap();
        assert_eq!(tree.predict(&config(&[0.0, 1.0])), 7.0);
        assert_eq!(tree.predict(&config(&[1.0, 0.0])), 7.0);
    }

    #[test]
    fn constant_targets_become_one_exact_leaf() {
        let rows = binary_rows(&[3.0, 3.0, 3.0, 3.0]);
        let tree = train_regression_tree(&rows, TreeParams::default()).unwrap();
        for (c, _) in &rows {
            assert_eq!(tree.predict(c), 3.0);
        }
        assert!(tree.root_split().is_none());
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(matches!(
            train_regression_tree(&[], TreeParams::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn perfect_split_on_the_signal_option_memorizes_two_binary_options() {
        // Targets equal option 1's value: splitting there zeroes both child SSEs.
        let rows = vec![
            (config(&[0.0, 0.0]), 0.0),
            (config(&[0.0, 1.0]), 0.0),
            (config(&[1.0, 0.0]), 1.0),
            (config(&[1.0, 1.0]), 1.0),
        ];
        let tree =
            train_regression_tree(&rows, TreeParams { min_samples_leaf: 1 }).unwrap();
        for (c, y) in &rows {
            assert_eq!(tree.predict(c), *y);
        }
        assert_eq!(tree.root_split(), Some((0, 0.5)));
    }

    #[test]
    fn min_leaf_one_reproduces_distinct_rows_exactly() {
        let rows = binary_rows(&[5.0, 1.0, 4.0, 2.0, 9.0, 8.0, 7.0, 3.0]);
        let tree =
            train_regression_tree(&rows, TreeParams { min_samples_leaf: 1 }).unwrap();
        for (c, y) in &rows {
            assert_eq!(tree.predict(c), *y);
        }
    }

    #[test]
    fn training_error_never_grows_as_min_leaf_shrinks() {
        let rows = binary_rows(&[5.0, 1.0, 4.0, 2.0, 9.0, 8.0, 7.0, 3.0, 2.5, 6.0, 0.5, 1.5, 8.5, 4.5, 3.5, 7.5]);
        let mut last = f64::INFINITY;
        for min_leaf in (1..=8).rev() {
            let tree = train_regression_tree(
                &rows,
                TreeParams {
                    min_samples_leaf: min_leaf,
                },
            )
            .unwrap();
            let sse: f64 = rows
                .iter()
                .map(|(c, y)| (tree.predict(c) - y) * (tree.predict(c) - y))
                .sum();
            assert!(
                sse <= last + 1e-12,
                "SSE rose from {last} to {sse} at min_leaf={min_leaf}"
            );
            last = sse;
        }
    }

    #[test]
    fn split_ties_break_to_the_lowest_feature_then_lowest_threshold() {
        // Both options split the targets identically; feature 0 must win.
        let rows = vec![
            (config(&[0.0, 0.0]), 0.0),
            (config(&[1.0, 1.0]), 10.0),
        ];
        let split = best_split(&rows, &[0, 1], 1).unwrap();
        assert_eq!(split.feature, 0);
        assert_eq!(split.threshold, 0.5);
    }
}
