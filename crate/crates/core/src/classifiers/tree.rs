use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Gini impurity of a node holding `pos` positives out of `n` rows.
pub fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    /// Minimum number of rows in each child of a split.
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 10,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Fraction of positive training rows that reached this leaf.
        score: f64,
        n: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary CART tree grown on Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl DecisionTree {
    /// Grows a tree on the rows of `x`.
    ///
    /// Thresholds are midpoints between consecutive distinct sorted values.
    /// Among equally good splits the lowest feature index and threshold win.
    pub fn fit(x: &DMatrix<f64>, y: &[u8], cfg: &TreeConfig) -> Self {
        let mut tree = DecisionTree {
            nodes: Vec::new(),
            n_features: x.ncols(),
        };
        let rows: Vec<usize> = (0..x.nrows()).collect();
        tree.grow(x, y, rows, 0, cfg);
        tree
    }

    fn grow(&mut self, x: &DMatrix<f64>, y: &[u8], rows: Vec<usize>, depth: usize, cfg: &TreeConfig) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| y[r] == 1).count();
        let id = self.nodes.len();
        let leaf = Node::Leaf {
            score: if n == 0 { 0.0 } else { pos as f64 / n as f64 },
            n,
        };
        self.nodes.push(leaf);
        if pos == 0 || pos == n || depth >= cfg.max_depth || n < 2 * cfg.min_leaf.max(1) {
            return id;
        }
        let Some((feature, threshold)) = best_split(x, y, &rows, pos, cfg.min_leaf.max(1)) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x[(i, feature)] <= threshold);
        let left = self.grow(x, y, l, depth + 1, cfg);
        let right = self.grow(x, y, r, depth + 1, cfg);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { score, .. } => return score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

fn best_split(x: &DMatrix<f64>, y: &[u8], rows: &[usize], pos: usize, min_leaf: usize) -> Option<(usize, f64)> {
    let n = rows.len();
    let parent = gini(pos, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = rows.to_vec();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]));
        let mut left_pos = 0;
        for k in 0..n - 1 {
            left_pos += usize::from(y[order[k]] == 1);
            let (v, next) = (x[(order[k], f)], x[(order[k + 1], f)]);
            let n_left = k + 1;
            if v == next || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let n_right = n - n_left;
            let weighted =
                (n_left as f64 * gini(left_pos, n_left) + n_right as f64 * gini(pos - left_pos, n_right)) / n as f64;
            if weighted < parent - 1e-12 && best.is_none_or(|(b, _, _)| weighted < b - 1e-12) {
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                best = Some((weighted, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_of_balanced_node() {
        assert_eq!(gini(5, 10), 0.5);
        assert_eq!(gini(0, 10), 0.0);
    }

    #[test]
    fn pure_input_is_a_single_leaf() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let t = DecisionTree::fit(&x, &[1, 1, 1, 1], &TreeConfig::default());
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.score_row(&[10.0]), 1.0);
    }

    #[test]
    fn threshold_step_is_one_split() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = DMatrix::from_column_slice(6, 1, &xs);
        let y: Vec<u8> = xs.iter().map(|&v| u8::from(v > 3.0)).collect();
        let t = DecisionTree::fit(&x, &y, &TreeConfig::default());
        assert_eq!(t.depth(), 1);
        match t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 3.5),
            _ => panic!("expected a split"),
        }
        for (i, &v) in xs.iter().enumerate() {
            assert_eq!(u8::from(t.score_row(&[v]) >= 0.5), y[i]);
        }
    }

    #[test]
    fn respects_min_leaf() {
        let x = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let t = DecisionTree::fit(&x, &[1, 0, 0, 0, 0], &TreeConfig::default());
        for node in &t.nodes {
            if let Node::Leaf { n, .. } = node {
                assert!(*n >= 2);
            }
        }
    }
}
