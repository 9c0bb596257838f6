//! Gradient-boosted decision trees with logistic loss, trained from scratch.
//!
//! Newton boosting: per round the gradients are `p - y` and hessians
//! `p (1 - p)`, splits are found by exact greedy search over sorted unique
//! values (no histogram approximation), and leaf values are
//! `-G / (H + lambda) * learning_rate`. Categorical features split on
//! one-vs-rest code equality. This is the fallback model served behind the
//! RPC interface.

use crate::dataset::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::first_stage::sigmoid;
use crate::rng::SplitMix64;

#[derive(Debug, Clone)]
pub struct GbdtParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_rows: usize,
    pub l2_leaf: f64,
    /// Row fraction per boosting round, in (0, 1].
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            num_trees: 200,
            max_depth: 6,
            learning_rate: 0.1,
            min_child_rows: 20,
            l2_leaf: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidParameter("learning_rate must be in (0,1]".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidParameter("subsample must be in (0,1]".into()));
        }
        if self.l2_leaf < 0.0 {
            return Err(Error::InvalidParameter("l2_leaf must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitKind {
    /// Rows with `value < threshold` go left.
    NumericLt(f64),
    /// Rows whose code equals this one go left, everything else right.
    CategoryEq(u16),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: u16,
        kind: SplitKind,
        left: u32,
        right: u32,
        /// Training-time split gain; zero on imported models.
        gain: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    kind,
                    left,
                    right,
                    ..
                } => {
                    let v = row[*feature as usize];
                    let go_left = match kind {
                        SplitKind::NumericLt(th) => v < *th,
                        SplitKind::CategoryEq(code) => v == *code as f64,
                    };
                    at = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone)]
pub struct GbdtModel {
    trees: Vec<Tree>,
    base_score: f64,
    feature_count: u16,
    schema_fingerprint: u64,
    /// Mean training log-loss after each round; empty on imported models.
    train_losses: Vec<f64>,
}

impl GbdtModel {
    pub fn from_parts(
        trees: Vec<Tree>,
        base_score: f64,
        feature_count: u16,
        schema_fingerprint: u64,
    ) -> Self {
        Self {
            trees,
            base_score,
            feature_count,
            schema_fingerprint,
            train_losses: Vec::new(),
        }
    }

    pub fn train_losses(&self) -> &[f64] {
        &self.train_losses
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count as usize
    }

    pub fn schema_fingerprint(&self) -> u64 {
        self.schema_fingerprint
    }

    /// Raw log-odds: base score plus leaf values along every tree's path.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

pub fn predict_gbdt(model: &GbdtModel, row: &[f64]) -> Result<f64> {
    if row.len() != model.feature_count as usize {
        return Err(Error::SchemaMismatch(format!(
            "row has {} features, model expects {}",
            row.len(),
            model.feature_count
        )));
    }
    Ok(sigmoid(model.margin(row)))
}

/// Stable `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn mean_log_loss(margins: &[f64], labels: &[u8]) -> f64 {
    margins
        .iter()
        .zip(labels)
        .map(|(&z, &y)| softplus(z) - f64::from(y) * z)
        .sum::<f64>()
        / margins.len() as f64
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: u16,
    kind: SplitKind,
    left_grad: f64,
    left_hess: f64,
    left_rows: usize,
}

struct ActiveNode {
    tree_pos: usize,
    depth: usize,
    grad: f64,
    hess: f64,
    rows: usize,
}

#[derive(Clone, Copy, Default)]
struct NumScan {
    grad: f64,
    hess: f64,
    rows: usize,
    last: f64,
    seen: bool,
}

fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let g = gl + gr;
    let h = hl + hr;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda))
}

/// Train by Newton boosting on logistic loss. Requires both classes present.
pub fn train_gbdt(train: &Dataset, params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    let n = train.n_rows();
    let positives = train.positives();
    if n < 2 || positives == 0 || positives == n {
        return Err(Error::SingleClassDataset);
    }
    let f = train.n_features();
    let lambda = params.l2_leaf;
    let base_rate = positives as f64 / n as f64;
    let base_score = (base_rate / (1.0 - base_rate)).ln();

    // Global presort of ordered features; categorical features are handled by
    // per-code accumulation instead.
    let ordered: Vec<usize> = (0..f)
        .filter(|&j| !matches!(train.schema().feature(j).kind, FeatureKind::Categorical { .. }))
        .collect();
    let categorical: Vec<(usize, usize)> = (0..f)
        .filter_map(|j| match train.schema().feature(j).kind {
            FeatureKind::Categorical { cardinality } => Some((j, cardinality + 1)),
            _ => None,
        })
        .collect();
    let sorted_idx: Vec<Vec<u32>> = ordered
        .iter()
        .map(|&j| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                train
                    .value(a as usize, j)
                    .partial_cmp(&train.value(b as usize, j))
                    .expect("finite values")
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let labels = train.labels();
    let mut margins = vec![base_score; n];
    let mut rng = SplitMix64::new(params.seed);
    let mut trees: Vec<Tree> = Vec::with_capacity(params.num_trees);
    let mut train_losses = Vec::with_capacity(params.num_trees);
    let mut prev_loss = mean_log_loss(&margins, labels);
    let full_batch = params.subsample >= 1.0;

    let mut node_of_row: Vec<i32> = vec![0; n];
    let mut sample_pool: Vec<u32> = (0..n as u32).collect();

    for _round in 0..params.num_trees {
        // gradients and hessians at the current margins
        let mut grad = vec![0.0f64; n];
        let mut hess = vec![0.0f64; n];
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - f64::from(labels[i]);
            hess[i] = p * (1.0 - p);
        }

        // row sample for this round
        if full_batch {
            node_of_row.fill(0);
        } else {
            node_of_row.fill(-1);
            let take = ((params.subsample * n as f64).floor() as usize).max(1);
            for i in 0..take {
                let j = i + rng.next_below((n - i) as u64) as usize;
                sample_pool.swap(i, j);
                node_of_row[sample_pool[i] as usize] = 0;
            }
        }

        let mut root = ActiveNode {
            tree_pos: 0,
            depth: 0,
            grad: 0.0,
            hess: 0.0,
            rows: 0,
        };
        for i in 0..n {
            if node_of_row[i] == 0 {
                root.grad += grad[i];
                root.hess += hess[i];
                root.rows += 1;
            }
        }

        let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
        let mut active: Vec<ActiveNode> = vec![root];

        while !active.is_empty() {
            let mut best: Vec<Option<Candidate>> = vec![None; active.len()];

            let splittable = |a: &ActiveNode| {
                a.depth < params.max_depth && a.rows >= 2 * params.min_child_rows.max(1)
            };

            // ordered features: stream every row in global sorted order and
            // evaluate boundaries per active node
            let mut states: Vec<NumScan> = vec![NumScan::default(); active.len()];
            for (oi, &j) in ordered.iter().enumerate() {
                states.fill(NumScan::default());
                for &ri in &sorted_idx[oi] {
                    let slot = node_of_row[ri as usize];
                    if slot < 0 {
                        continue;
                    }
                    let slot = slot as usize;
                    if !splittable(&active[slot]) {
                        continue;
                    }
                    let v = train.value(ri as usize, j);
                    let st = &mut states[slot];
                    if st.seen && v > st.last {
                        let node = &active[slot];
                        let right_rows = node.rows - st.rows;
                        if st.rows >= params.min_child_rows && right_rows >= params.min_child_rows {
                            let gain = split_gain(
                                st.grad,
                                st.hess,
                                node.grad - st.grad,
                                node.hess - st.hess,
                                lambda,
                            );
                            if gain > 0.0
                                && best[slot].as_ref().is_none_or(|c| gain > c.gain)
                            {
                                best[slot] = Some(Candidate {
                                    gain,
                                    feature: j as u16,
                                    kind: SplitKind::NumericLt((st.last + v) / 2.0),
                                    left_grad: st.grad,
                                    left_hess: st.hess,
                                    left_rows: st.rows,
                                });
                            }
                        }
                    }
                    st.grad += grad[ri as usize];
                    st.hess += hess[ri as usize];
                    st.rows += 1;
                    st.last = v;
                    st.seen = true;
                }
            }

            // categorical features: one-vs-rest on each observed code
            for &(j, bins) in &categorical {
                let mut stats = vec![(0.0f64, 0.0f64, 0usize); active.len() * bins];
                for i in 0..n {
                    let slot = node_of_row[i];
                    if slot < 0 {
                        continue;
                    }
                    let slot = slot as usize;
                    if !splittable(&active[slot]) {
                        continue;
                    }
                    let code = (train.value(i, j) as usize).min(bins - 1);
                    let s = &mut stats[slot * bins + code];
                    s.0 += grad[i];
                    s.1 += hess[i];
                    s.2 += 1;
                }
                for (slot, node) in active.iter().enumerate() {
                    if !splittable(node) {
                        continue;
                    }
                    for code in 0..bins {
                        let (cg, ch, crows) = stats[slot * bins + code];
                        let right_rows = node.rows - crows;
                        if crows < params.min_child_rows || right_rows < params.min_child_rows {
                            continue;
                        }
                        let gain = split_gain(cg, ch, node.grad - cg, node.hess - ch, lambda);
                        if gain > 0.0 && best[slot].as_ref().is_none_or(|c| gain > c.gain) {
                            best[slot] = Some(Candidate {
                                gain,
                                feature: j as u16,
                                kind: SplitKind::CategoryEq(code as u16),
                                left_grad: cg,
                                left_hess: ch,
                                left_rows: crows,
                            });
                        }
                    }
                }
            }

            // materialize splits and leaves; relabel rows into child slots
            let mut next_active: Vec<ActiveNode> = Vec::new();
            // child slot pair per current slot, or None when the node leafed
            let mut routing: Vec<Option<(i32, u16, SplitKind)>> = Vec::with_capacity(active.len());
            for (slot, node) in active.iter().enumerate() {
                match best[slot] {
                    Some(c) => {
                        let left_pos = nodes.len();
                        nodes.push(Node::Leaf { value: 0.0 });
                        let right_pos = nodes.len();
                        nodes.push(Node::Leaf { value: 0.0 });
                        nodes[node.tree_pos] = Node::Split {
                            feature: c.feature,
                            kind: c.kind,
                            left: left_pos as u32,
                            right: right_pos as u32,
                            gain: c.gain,
                        };
                        let base = next_active.len() as i32;
                        routing.push(Some((base, c.feature, c.kind)));
                        next_active.push(ActiveNode {
                            tree_pos: left_pos,
                            depth: node.depth + 1,
                            grad: c.left_grad,
                            hess: c.left_hess,
                            rows: c.left_rows,
                        });
                        next_active.push(ActiveNode {
                            tree_pos: right_pos,
                            depth: node.depth + 1,
                            grad: node.grad - c.left_grad,
                            hess: node.hess - c.left_hess,
                            rows: node.rows - c.left_rows,
                        });
                    }
                    None => {
                        let value =
                            -node.grad / (node.hess + lambda) * params.learning_rate;
                        nodes[node.tree_pos] = Node::Leaf { value };
                        routing.push(None);
                    }
                }
            }

            for (i, slot) in node_of_row.iter_mut().enumerate() {
                if *slot < 0 {
                    continue;
                }
                match routing[*slot as usize] {
                    Some((base, feature, kind)) => {
                        let v = train.value(i, feature as usize);
                        let go_left = match kind {
                            SplitKind::NumericLt(th) => v < th,
                            SplitKind::CategoryEq(code) => v == code as f64,
                        };
                        *slot = base + i32::from(!go_left);
                    }
                    None => *slot = -1,
                }
            }
            active = next_active;
        }

        let tree = Tree { nodes };
        for (i, margin) in margins.iter_mut().enumerate() {
            *margin += tree.predict(train.row(i));
        }
        trees.push(tree);

        let loss = mean_log_loss(&margins, labels);
        if full_batch {
            assert!(
                loss <= prev_loss + 1e-9,
                "training loss increased: {prev_loss} -> {loss}"
            );
        }
        prev_loss = loss;
        train_losses.push(loss);
    }

    Ok(GbdtModel {
        trees,
        base_score,
        feature_count: f as u16,
        schema_fingerprint: train.schema().fingerprint(),
        train_losses,
    })
}
