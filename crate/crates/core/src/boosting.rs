//! Multi-output gradient boosting over regression trees with vector leaves.
//!
//! One ensemble predicts all outputs jointly: every tree stores a full output
//! vector per leaf (the mean residual vector of the rows reaching it, scaled
//! by the learning rate), and split quality is squared-error reduction summed
//! over all outputs. Split search is exact over the sorted unique values of
//! each feature; candidate thresholds are midpoints of consecutive distinct
//! values, rows with `x < threshold` go left. Equal gains resolve to the
//! lowest feature index, then the lowest threshold.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Seed for the validation split of [`grid_search`]; plain fits are
    /// deterministic and do not consume randomness.
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_iterations: 5000,
            learning_rate: 0.1,
            max_depth: 6,
            min_samples_leaf: 1,
            seed: 42,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BoostError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {what} at row {row}, column {col}")]
    NonFiniteInput { what: &'static str, row: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { values: Vec<f64> },
}

/// One regression tree as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] < *threshold { *left } else { *right };
                }
                Node::Leaf { values } => return values,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub params: BoostParams,
    pub n_features: usize,
    pub n_outputs: usize,
    /// Column means of the training targets; the model before any tree.
    pub base_prediction: Vec<f64>,
    pub trees: Vec<Tree>,
    /// Training loss (half mean squared residual norm) after the base
    /// prediction and after each tree; length `n_iterations + 1`.
    pub train_loss: Vec<f64>,
}

impl TreeEnsemble {
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_features, "feature dimension mismatch");
        let mut out = self.base_prediction.clone();
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.leaf_for(x)) {
                *o += *v;
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ensemble serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<(usize, usize), BoostError> {
    if x.is_empty() {
        return Err(BoostError::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(BoostError::DimensionMismatch(format!(
            "{} feature rows vs {} target rows",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    let m = y[0].len();
    if d == 0 || m == 0 {
        return Err(BoostError::DimensionMismatch("zero-width features or targets".into()));
    }
    for (row, (xi, yi)) in x.iter().zip(y).enumerate() {
        if xi.len() != d {
            return Err(BoostError::DimensionMismatch(format!("row {row} has {} features, expected {d}", xi.len())));
        }
        if yi.len() != m {
            return Err(BoostError::DimensionMismatch(format!("row {row} has {} targets, expected {m}", yi.len())));
        }
        for (col, v) in xi.iter().enumerate() {
            if !v.is_finite() {
                return Err(BoostError::NonFiniteInput { what: "features", row, col });
            }
        }
        for (col, v) in yi.iter().enumerate() {
            if !v.is_finite() {
                return Err(BoostError::NonFiniteInput { what: "targets", row, col });
            }
        }
    }
    Ok((d, m))
}

/// Fits an ensemble of `params.n_iterations` trees to the squared-error
/// residuals of the running prediction, starting from the column means.
pub fn fit_ensemble(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    params: &BoostParams,
) -> Result<TreeEnsemble, BoostError> {
    let (d, m) = check_inputs(x, y)?;
    let n = x.len();

    // Column-major copy of the features for cache-friendly split scans.
    let mut cols = vec![vec![0.0f64; n]; d];
    for (i, xi) in x.iter().enumerate() {
        for (f, v) in xi.iter().enumerate() {
            cols[f][i] = *v;
        }
    }

    let mut base = vec![0.0f64; m];
    for yi in y {
        for (b, v) in base.iter_mut().zip(yi) {
            *b += *v;
        }
    }
    for b in &mut base {
        *b /= n as f64;
    }

    let mut residuals: Vec<Vec<f64>> = y
        .iter()
        .map(|yi| yi.iter().zip(&base).map(|(v, b)| v - b).collect())
        .collect();

    let loss = |residuals: &[Vec<f64>]| -> f64 {
        let s: f64 = residuals.iter().flatten().map(|r| r * r).sum();
        s / (2.0 * n as f64)
    };

    let mut train_loss = Vec::with_capacity(params.n_iterations + 1);
    train_loss.push(loss(&residuals));

    let mut trees = Vec::with_capacity(params.n_iterations);
    for _ in 0..params.n_iterations {
        let mut nodes = Vec::new();
        let indices: Vec<usize> = (0..n).collect();
        build_node(&mut nodes, &cols, &mut residuals, indices, 0, params);
        trees.push(Tree { nodes });
        train_loss.push(loss(&residuals));
    }

    Ok(TreeEnsemble {
        params: params.clone(),
        n_features: d,
        n_outputs: m,
        base_prediction: base,
        trees,
        train_loss,
    })
}

/// Builds one node over `indices`, updating `residuals` in leaves; returns
/// the node's index in the arena.
fn build_node(
    nodes: &mut Vec<Node>,
    cols: &[Vec<f64>],
    residuals: &mut Vec<Vec<f64>>,
    indices: Vec<usize>,
    depth: usize,
    params: &BoostParams,
) -> usize {
    let n = indices.len();
    let m = residuals[0].len();

    let split = if depth < params.max_depth && n >= 2 * params.min_samples_leaf.max(1) {
        best_split(cols, residuals, &indices, params.min_samples_leaf.max(1))
    } else {
        None
    };

    match split {
        Some((feature, threshold)) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                indices.into_iter().partition(|&i| cols[feature][i] < threshold);
            let id = nodes.len();
            nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
            let left = build_node(nodes, cols, residuals, left_idx, depth + 1, params);
            let right = build_node(nodes, cols, residuals, right_idx, depth + 1, params);
            nodes[id] = Node::Split { feature, threshold, left, right };
            id
        }
        None => {
            let mut values = vec![0.0f64; m];
            for &i in &indices {
                for (v, r) in values.iter_mut().zip(&residuals[i]) {
                    *v += *r;
                }
            }
            for v in &mut values {
                *v = *v / n as f64 * params.learning_rate;
            }
            for &i in &indices {
                for (r, v) in residuals[i].iter_mut().zip(&values) {
                    *r -= *v;
                }
            }
            let id = nodes.len();
            nodes.push(Node::Leaf { values });
            id
        }
    }
}

/// Exact search for the split maximizing squared-error reduction summed over
/// outputs. Returns None when no candidate strictly improves on the parent.
fn best_split(
    cols: &[Vec<f64>],
    residuals: &[Vec<f64>],
    indices: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = indices.len();
    let m = residuals[0].len();

    let mut total = vec![0.0f64; m];
    for &i in indices {
        for (t, r) in total.iter_mut().zip(&residuals[i]) {
            *t += *r;
        }
    }
    let parent_score: f64 = total.iter().map(|s| s * s).sum::<f64>() / n as f64;

    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut sorted: Vec<usize> = Vec::with_capacity(n);
    let mut left_sum = vec![0.0f64; m];

    for (feature, col) in cols.iter().enumerate() {
        sorted.clear();
        sorted.extend_from_slice(indices);
        sorted.sort_unstable_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("finite features"));

        left_sum.iter_mut().for_each(|s| *s = 0.0);
        for (pos, &i) in sorted.iter().enumerate().take(n - 1) {
            for (s, r) in left_sum.iter_mut().zip(&residuals[i]) {
                *s += *r;
            }
            let (v, v_next) = (col[i], col[sorted[pos + 1]]);
            if v >= v_next {
                continue; // not a boundary between distinct values
            }
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let mut score = 0.0;
            for (s, t) in left_sum.iter().zip(&total) {
                score += s * s / n_left as f64 + (t - s) * (t - s) / n_right as f64;
            }
            let gain = score - parent_score;
            // Strict improvement over the incumbent keeps the lowest feature
            // and threshold on ties (features and thresholds scan ascending).
            if gain > 0.0 && best.map_or(true, |(g, _, _)| gain > g) {
                best = Some((gain, feature, 0.5 * (v + v_next)));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// One evaluated grid point of [`grid_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub val_loss: f64,
}

/// Selects depth and learning rate by validation loss on a held-out row
/// slice (seeded shuffle, `val_fraction` of rows). Ties keep the earliest
/// grid entry; grids scan depths outer, rates inner.
pub fn grid_search(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    base: &BoostParams,
    depths: &[usize],
    learning_rates: &[f64],
    val_fraction: f64,
) -> Result<(BoostParams, Vec<GridPoint>), BoostError> {
    use rand::{Rng, SeedableRng};
    check_inputs(x, y)?;
    let n = x.len();
    let n_val = ((n as f64 * val_fraction).ceil() as usize).clamp(1, n.saturating_sub(1));
    if n_val == 0 || n - n_val == 0 {
        return Err(BoostError::DimensionMismatch(format!(
            "cannot split {n} rows into non-empty train/validation parts"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(base.seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let pick = |ids: &[usize]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (ids.iter().map(|&i| x[i].clone()).collect(), ids.iter().map(|&i| y[i].clone()).collect())
    };
    let (val_x, val_y) = pick(&order[..n_val]);
    let (train_x, train_y) = pick(&order[n_val..]);

    let mut table = Vec::new();
    let mut best: Option<(f64, BoostParams)> = None;
    for &depth in depths {
        for &lr in learning_rates {
            let params = BoostParams { max_depth: depth, learning_rate: lr, ..base.clone() };
            let model = fit_ensemble(&train_x, &train_y, &params)?;
            let mut sse = 0.0;
            for (xi, yi) in val_x.iter().zip(&val_y) {
                let p = model.predict(xi);
                sse += p.iter().zip(yi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
            let val_loss = sse / (2.0 * val_x.len() as f64);
            table.push(GridPoint { max_depth: depth, learning_rate: lr, val_loss });
            if best.as_ref().map_or(true, |(l, _)| val_loss < *l) {
                best = Some((val_loss, params));
            }
        }
    }
    Ok((best.expect("non-empty grid").1, table))
}
