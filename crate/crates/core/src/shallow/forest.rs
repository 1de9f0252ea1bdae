//! Random forest of CART trees split on Gini impurity, with bootstrap
//! sampling and per-node feature subsampling.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubsample {
    Sqrt,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    /// `None` grows trees until leaves are pure or `min_leaf` stops them.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            max_depth: None,
            min_leaf: 1,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in a flat arena; node 0 is the root. `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a, R: Rng> {
    features: &'a [Vec<f64>],
    labels: &'a [usize],
    class_count: usize,
    params: &'a ForestParams,
    mtry: usize,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let mut counts = vec![0usize; self.class_count];
        for &i in idx.iter() {
            counts[self.labels[i]] += 1;
        }
        let node = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
        });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || idx.len() < 2 * self.params.min_leaf {
            return node;
        }
        let Some((feature, threshold)) = self.best_split(idx, &counts) else {
            return node;
        };
        let mut split = 0;
        for k in 0..idx.len() {
            if self.features[idx[k]][feature] <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[node] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        node
    }

    fn best_split(&mut self, idx: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let dim = self.features[0].len();
        let candidates = index::sample(&mut self.rng, dim, self.mtry).into_vec();
        let n = idx.len();
        let parent = gini(counts, n);
        let min_leaf = self.params.min_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for feature in candidates {
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.features[i][feature], self.labels[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.class_count];
            let mut right = counts.to_vec();
            for k in 1..n {
                let (v_prev, l_prev) = sorted[k - 1];
                left[l_prev] += 1;
                right[l_prev] -= 1;
                let v = sorted[k].0;
                if v_prev == v || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let impurity = (k as f64 * gini(&left, k) + (n - k) as f64 * gini(&right, n - k)) / n as f64;
                if impurity < parent && best.is_none_or(|(b, _, _)| impurity < b) {
                    let mut threshold = v_prev + (v - v_prev) / 2.0;
                    if threshold >= v {
                        threshold = v_prev;
                    }
                    best = Some((impurity, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub class_count: usize,
    pub trees: Vec<Tree>,
}

impl RandomForest {
    /// Trees are grown in parallel; tree `t` uses its own seed derived from
    /// the master seed, so the forest does not depend on scheduling.
    pub fn fit(features: &[Vec<f64>], labels: &[usize], class_count: usize, params: &ForestParams) -> Self {
        let dim = features.first().map_or(0, Vec::len);
        let mtry = match params.feature_subsample {
            FeatureSubsample::All => dim,
            FeatureSubsample::Sqrt => ((dim as f64).sqrt().floor() as usize).max(1),
        }
        .min(dim)
        .max(1);
        let n = features.len();
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut r = rng(derive_seed(params.seed, t as u64));
                let mut idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| r.random_range(0..n)).collect()
                } else {
                    let mut all: Vec<usize> = (0..n).collect();
                    all.shuffle(&mut r);
                    all
                };
                let mut b = Builder {
                    features,
                    labels,
                    class_count,
                    params,
                    mtry,
                    rng: r,
                    nodes: Vec::new(),
                };
                b.build(&mut idx, 0);
                Tree { nodes: b.nodes }
            })
            .collect();
        RandomForest { class_count, trees }
    }

    /// Fraction of trees voting for each class.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.class_count];
        for t in &self.trees {
            votes[t.predict(x)] += 1.0;
        }
        let n = self.trees.len().max(1) as f64;
        votes.iter().map(|v| v / n).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        crate::util::argmax(&self.scores(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn pair_data(copies: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..copies {
            x.push(vec![2.0, 0.0]);
            y.push(0);
            x.push(vec![0.0, 2.0]);
            y.push(1);
        }
        (x, y)
    }

    #[test]
    fn single_stump_separates_pair() {
        let (x, y) = pair_data(10);
        let params = ForestParams {
            trees: 1,
            max_depth: Some(1),
            seed: 3,
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, 2, &params);
        assert_eq!(f.trees[0].depth(), 1);
        for (p, &l) in x.iter().zip(&y) {
            assert_eq!(f.predict(p), l);
        }
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 5], 10), 0.5);
        assert_eq!(gini(&[4, 0], 4), 0.0);
        assert_eq!(majority(&[2, 2, 1]), 0);
    }

    #[test]
    fn min_leaf_respected() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| (i % 3 == 0) as usize).collect();
        let params = ForestParams {
            trees: 1,
            min_leaf: 5,
            bootstrap: false,
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, 2, &params);
        // Count training points per leaf by routing them.
        let mut per_leaf = std::collections::HashMap::new();
        for p in &x {
            let mut i = 0;
            while let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = &f.trees[0].nodes[i]
            {
                i = if p[*feature] <= *threshold { *left } else { *right };
            }
            *per_leaf.entry(i).or_insert(0) += 1;
        }
        assert!(per_leaf.values().all(|&n| n >= 5), "{per_leaf:?}");
    }

    fn noisy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut r = rng(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| r.random_range(0.0..5.0)).collect())
            .collect();
        let y = x
            .iter()
            .map(|v| ((v[0] + v[1] * 0.5 > 3.5) as usize + (v[2] > 4.0) as usize).min(2))
            .collect();
        (x, y)
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, y) = noisy(200, 1);
        let params = ForestParams {
            trees: 15,
            seed: 9,
            ..Default::default()
        };
        let a = RandomForest::fit(&x, &y, 3, &params);
        let b = RandomForest::fit(&x, &y, 3, &params);
        assert_eq!(a, b);
        let train_acc = x.iter().zip(&y).filter(|(p, &l)| a.predict(p) == l).count() as f64 / 200.0;
        assert!(train_acc > 0.95);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn positive_scaling_preserves_predictions(scale in 0.01f64..100.0, seed in any::<u64>()) {
            let (x, y) = noisy(120, seed);
            let (tx, _) = noisy(60, seed.wrapping_add(1));
            let params = ForestParams { trees: 7, seed, ..Default::default() };
            let plain = RandomForest::fit(&x, &y, 3, &params);
            let sx: Vec<Vec<f64>> = x.iter().map(|v| v.iter().map(|a| a * scale).collect()).collect();
            let scaled = RandomForest::fit(&sx, &y, 3, &params);
            for p in &tx {
                let sp: Vec<f64> = p.iter().map(|a| a * scale).collect();
                prop_assert_eq!(plain.predict(p), scaled.predict(&sp));
            }
        }
    }
}
