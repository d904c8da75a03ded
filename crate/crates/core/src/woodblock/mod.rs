//! Reinforcement-learning construction of qd-trees.
//!
//! Each tree node is a state; an action applies one candidate cut. Legality
//! is decided on a fixed row sample, and each action is rewarded with the
//! normalized number of skipped sample rows in the subtree it created.

mod features;
mod network;

pub use features::{bound_bits, Featurizer};
pub use network::{masked_softmax, Adam, Forward, Network};

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::harness::rng::{indexed_stream, substream};
use crate::model::{Cut, Dataset, Workload};
use crate::skipcost::block_capacity;
use crate::tree::{NodeId, QdTree, SemanticDescription};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    /// Fraction of rows sampled once per run, in `(0, 1]`.
    pub sample_ratio: f64,
    pub min_block_size: usize,
    pub episodes: usize,
    pub timeout: Option<Duration>,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Episodes per policy update.
    pub batch_episodes: usize,
    pub epochs: usize,
    pub seed: u64,
    /// With `false` the policy keeps its initial weights.
    pub learn: bool,
    pub execution: Execution,
}

impl RlConfig {
    pub fn new(min_block_size: usize) -> Self {
        RlConfig {
            sample_ratio: 0.01,
            min_block_size,
            episodes: 500,
            timeout: None,
            hidden_width: 64,
            learning_rate: 3e-4,
            clip_epsilon: 0.2,
            entropy_coef: 0.01,
            value_coef: 0.5,
            batch_episodes: 8,
            epochs: 1,
            seed: 0,
            learn: true,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.sample_ratio > 0.0 && self.sample_ratio <= 1.0) {
            return bad("sample ratio must be in (0, 1]");
        }
        if self.min_block_size == 0 {
            return bad("min block size must be at least 1");
        }
        if self.episodes == 0 || self.timeout.is_some_and(|t| t.is_zero()) {
            return bad("budgets must be positive");
        }
        if self.hidden_width == 0 || self.batch_episodes == 0 || self.epochs == 0 {
            return bad("hidden width, batch size and epochs must be positive");
        }
        if !(self.learning_rate.is_finite() && self.clip_epsilon >= 0.0) {
            return bad("learning rate must be finite and clip epsilon non-negative");
        }
        Ok(())
    }

    /// Sample-row count a child must exceed for a cut to be legal.
    pub fn threshold(&self) -> f64 {
        self.sample_ratio * self.min_block_size as f64
    }
}

/// `mask[i]` is true iff cut `i` leaves both children with more than
/// `threshold` sample rows.
pub fn legal_actions(data: &Dataset, rows: &[usize], cuts: &[Cut], threshold: f64) -> Vec<bool> {
    cuts.iter()
        .map(|c| {
            let l = rows.iter().filter(|&&r| c.eval(data.row(r))).count();
            l as f64 > threshold && (rows.len() - l) as f64 > threshold
        })
        .collect()
}

/// `S(n) / (|W| * |n.records|)`.
pub fn reward(skipped: u64, rows: usize, w: &Workload) -> f64 {
    if rows == 0 {
        return 0.0;
    }
    skipped as f64 / (w.len() as f64 * rows as f64)
}

#[derive(Debug, Clone)]
pub struct Step {
    pub node: NodeId,
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub old_logp: f64,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub steps: Vec<Step>,
    pub tree: QdTree,
    /// `C(T)` on the sample.
    pub capacity: u64,
}

/// Everything that stays fixed across episodes.
pub struct Env<'a> {
    pub sample: &'a Dataset,
    pub w: &'a Workload,
    pub cuts: &'a [Cut],
    pub featurizer: Featurizer,
    pub threshold: f64,
}

impl<'a> Env<'a> {
    pub fn new(sample: &'a Dataset, w: &'a Workload, cuts: &'a [Cut], cfg: &RlConfig) -> Self {
        Env {
            sample,
            w,
            cuts,
            featurizer: Featurizer::new(sample.schema(), w.registry.len()),
            threshold: cfg.threshold(),
        }
    }

    fn leaf_skipped(&self, rows: &[usize]) -> u64 {
        let d = SemanticDescription::of_rows(
            self.sample.schema(),
            &self.w.registry,
            rows.iter().map(|&r| self.sample.row(r)),
        );
        block_capacity(d.as_ref(), rows.len(), self.w)
    }
}

/// Rolls out one tree: FIFO over open nodes, masked sampling of cuts,
/// then bottom-up rewards.
pub fn run_episode(policy: &Network, env: &Env, rng: &mut impl Rng) -> Result<EpisodeRecord> {
    let mut tree = QdTree::new(env.sample.schema().clone(), env.w.registry.clone());
    let mut rows_of: Vec<Vec<usize>> = vec![(0..env.sample.len()).collect()];
    let mut steps = Vec::new();
    let mut queue = VecDeque::from([tree.root()]);
    while let Some(node) = queue.pop_front() {
        let rows = std::mem::take(&mut rows_of[node]);
        let mask = legal_actions(env.sample, &rows, env.cuts, env.threshold);
        if !mask.iter().any(|&m| m) {
            rows_of[node] = rows;
            continue;
        }
        let features = env.featurizer.encode(&tree.node(node).desc);
        let probs = masked_softmax(&policy.forward(&features).logits, &mask);
        let action = sample_action(&probs, rng);
        let cut = &env.cuts[action];
        let (l, r) = tree.split_mut(node, cut.clone())?;
        let (lr, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| cut.eval(env.sample.row(i)));
        rows_of.resize(tree.nodes().len(), Vec::new());
        rows_of[node] = rows;
        rows_of[l] = lr;
        rows_of[r] = rr;
        queue.extend([l, r]);
        steps.push(Step {
            node,
            features,
            mask,
            action,
            old_logp: probs[action].ln(),
            reward: 0.0,
        });
    }
    // children always have larger ids than parents
    let mut skipped = vec![0u64; tree.nodes().len()];
    for id in (0..tree.nodes().len()).rev() {
        let n = tree.node(id);
        skipped[id] = match (n.left, n.right) {
            (Some(l), Some(r)) => skipped[l] + skipped[r],
            _ => env.leaf_skipped(&rows_of[id]),
        };
    }
    for s in &mut steps {
        s.reward = reward(skipped[s.node], rows_of[s.node].len(), env.w);
    }
    Ok(EpisodeRecord {
        steps,
        capacity: skipped[tree.root()],
        tree,
    })
}

fn sample_action(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// One training example; `advantage` is held fixed during the update.
#[derive(Debug, Clone)]
pub struct Sample {
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub old_logp: f64,
    pub reward: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefs {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Mean clipped-surrogate loss `-min(r A, clip(r) A) + c_v (V - R)^2 - β H`;
/// accumulates its gradient into `grad` when given.
pub fn loss_and_grad(net: &Network, batch: &[Sample], k: LossCoefs, mut grad: Option<&mut [f64]>) -> LossTerms {
    let mut t = LossTerms::default();
    let scale = 1.0 / batch.len().max(1) as f64;
    for s in batch {
        let f = net.forward(&s.features);
        let p = masked_softmax(&f.logits, &s.mask);
        let logp = p[s.action].ln();
        let ratio = (logp - s.old_logp).exp();
        let a = s.advantage;
        let clipped = ratio.clamp(1.0 - k.clip_epsilon, 1.0 + k.clip_epsilon);
        let surrogate = (ratio * a).min(clipped * a);
        let entropy: f64 = -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>();
        let verr = f.value - s.reward;
        t.policy -= surrogate * scale;
        t.value += verr * verr * scale;
        t.entropy += entropy * scale;
        if let Some(g) = grad.as_deref_mut() {
            // d(-surrogate)/d logp is -r A while the unclipped branch is active
            let active = if a >= 0.0 {
                ratio <= 1.0 + k.clip_epsilon
            } else {
                ratio >= 1.0 - k.clip_epsilon
            };
            let dlogp = if active { -ratio * a } else { 0.0 };
            let dlogits: Vec<f64> = (0..p.len())
                .map(|i| {
                    if !s.mask[i] {
                        return 0.0;
                    }
                    let onehot = if i == s.action { 1.0 } else { 0.0 };
                    let pg = dlogp * (onehot - p[i]);
                    let ent = k.entropy_coef * p[i] * (p[i].ln() + entropy);
                    (pg + ent) * scale
                })
                .collect();
            let dvalue = 2.0 * k.value_coef * verr * scale;
            net.backward(&f, &dlogits, dvalue, g);
        }
    }
    t.total = t.policy + k.value_coef * t.value - k.entropy_coef * t.entropy;
    t
}

/// Builds training samples with advantages `R - V(s)` under the current network.
pub fn make_samples(net: &Network, episodes: &[EpisodeRecord]) -> Vec<Sample> {
    episodes
        .iter()
        .flat_map(|e| e.steps.iter())
        .map(|s| Sample {
            advantage: s.reward - net.forward(&s.features).value,
            features: s.features.clone(),
            mask: s.mask.clone(),
            action: s.action,
            old_logp: s.old_logp,
            reward: s.reward,
        })
        .collect()
}

/// One clipped-surrogate update (`epochs` full-batch Adam steps).
pub fn update_policy(
    net: &mut Network,
    adam: &mut Adam,
    batch: &[Sample],
    k: LossCoefs,
    epochs: usize,
    update: usize,
) -> Result<LossTerms> {
    if batch.is_empty() {
        return Ok(LossTerms::default());
    }
    let mut last = LossTerms::default();
    for _ in 0..epochs {
        let mut grad = vec![0.0; net.num_params()];
        last = loss_and_grad(net, batch, k, Some(&mut grad));
        if !last.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                update,
                detail: format!(
                    "policy={} value={} entropy={} over {} samples",
                    last.policy,
                    last.value,
                    last.entropy,
                    batch.len()
                ),
            });
        }
        adam.step(&mut net.params, &grad);
    }
    Ok(last)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub elapsed_ms: u128,
    pub best_access_fraction: f64,
    pub episode_access_fraction: f64,
}

pub const CURVE_HEADER: &str = "episode,elapsed_ms,best_access_fraction,episode_access_fraction";

impl CurvePoint {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.episode, self.elapsed_ms, self.best_access_fraction, self.episode_access_fraction
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Best tree by `C` on the sample; freeze it on the full data before use.
    pub best_tree: QdTree,
    pub best_capacity: u64,
    pub curve: Vec<CurvePoint>,
    pub policy: Network,
    pub episodes_run: usize,
    pub sample_rows: usize,
}

/// Uniform sample without replacement of `ceil(ratio * |V|)` rows, sorted.
pub fn draw_sample(data: &Dataset, ratio: f64, seed: u64) -> Vec<usize> {
    let n = data.len();
    let k = ((ratio * n as f64).ceil() as usize).clamp(1.min(n), n);
    let mut idx = sample_indices(&mut substream(seed, "sample"), n, k).into_vec();
    idx.sort_unstable();
    idx
}

pub fn train(data: &Dataset, w: &Workload, cuts: &[Cut], cfg: &RlConfig) -> Result<TrainResult> {
    train_with(data, w, cuts, cfg, |_| {})
}

/// Runs episodes in waves of `batch_episodes` (rolled out in parallel against
/// a frozen policy), updating between waves. `on_point` sees each curve point
/// as soon as its episode finishes.
pub fn train_with(
    data: &Dataset,
    w: &Workload,
    cuts: &[Cut],
    cfg: &RlConfig,
    mut on_point: impl FnMut(&CurvePoint),
) -> Result<TrainResult> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cuts.is_empty() {
        return Err(Error::Config("candidate cut set is empty".into()));
    }
    let sample = data.select(&draw_sample(data, cfg.sample_ratio, cfg.seed));
    let env = Env::new(&sample, w, cuts, cfg);
    let mut net = Network::new(
        env.featurizer.width(),
        cfg.hidden_width,
        cuts.len(),
        &mut substream(cfg.seed, "init"),
    );
    let mut adam = Adam::new(net.num_params(), cfg.learning_rate);
    let coefs = LossCoefs {
        clip_epsilon: cfg.clip_epsilon,
        value_coef: cfg.value_coef,
        entropy_coef: cfg.entropy_coef,
    };
    let total = (w.len() * sample.len()) as f64;
    let start = Instant::now();
    let mut best: Option<(u64, QdTree)> = None;
    let mut curve = Vec::new();
    let mut done = 0;
    let mut update = 0;
    // the first wave always runs so a best tree exists
    while done < cfg.episodes && (done == 0 || cfg.timeout.is_none_or(|t| start.elapsed() < t)) {
        let wave = cfg.batch_episodes.min(cfg.episodes - done);
        let policy = &net;
        let records = cfg.execution.map_range(wave, |i| {
            run_episode(policy, &env, &mut indexed_stream(cfg.seed, "agent", (done + i) as u64))
        });
        let records: Vec<EpisodeRecord> = records.into_iter().collect::<Result<_>>()?;
        for r in &records {
            if best.as_ref().is_none_or(|(c, _)| r.capacity > *c) {
                best = Some((r.capacity, r.tree.clone()));
            }
            let point = CurvePoint {
                episode: done,
                elapsed_ms: start.elapsed().as_millis(),
                best_access_fraction: 1.0 - best.as_ref().unwrap().0 as f64 / total,
                episode_access_fraction: 1.0 - r.capacity as f64 / total,
            };
            on_point(&point);
            curve.push(point);
            done += 1;
        }
        if cfg.learn {
            let batch = make_samples(&net, &records);
            update_policy(&mut net, &mut adam, &batch, coefs, cfg.epochs, update)?;
            update += 1;
        }
    }
    let (best_capacity, best_tree) = best.expect("at least one episode runs");
    Ok(TrainResult {
        best_tree,
        best_capacity,
        curve,
        policy: net,
        episodes_run: done,
        sample_rows: sample.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CmpOp, Column, Query, Schema, UnaryPredicate};
    use rand::SeedableRng;

    fn line(n: u32) -> (Schema, Dataset) {
        let s = Schema::new(vec![Column::numeric("x", 100)]).unwrap();
        let d = Dataset::new(s.clone(), (0..n).map(|i| vec![i]).collect()).unwrap();
        (s, d)
    }

    fn lt(s: &Schema, v: u32) -> Cut {
        Cut::Unary(UnaryPredicate::cmp(s, 0, CmpOp::Lt, v).unwrap())
    }

    #[test]
    fn legality_threshold() {
        let (s, d) = line(100);
        let rows: Vec<usize> = (0..100).collect();
        let cuts = [lt(&s, 40), lt(&s, 20)];
        assert_eq!(legal_actions(&d, &rows, &cuts, 30.0), vec![true, false]);
        assert_eq!(legal_actions(&d, &rows, &cuts, 90.0), vec![false, false]);
    }

    #[test]
    fn reward_cases() {
        let (s, _) = line(1);
        let q = |v| Query::Pred(UnaryPredicate::cmp(&s, 0, CmpOp::Ge, v).unwrap());
        let w = Workload::simple(&s, vec![q(50), q(60)]).unwrap();
        assert_eq!(reward(10, 10, &w), 0.5);
        assert_eq!(reward(20, 10, &w), 1.0);
        assert_eq!(reward(0, 10, &w), 0.0);
    }

    #[test]
    fn forced_actions_and_singletons() {
        let (s, d) = line(10);
        let w = Workload::simple(&s, vec![Query::Pred(UnaryPredicate::cmp(&s, 0, CmpOp::Lt, 5).unwrap())]).unwrap();
        let cuts = [lt(&s, 5)];
        let mut cfg = RlConfig::new(2);
        cfg.sample_ratio = 1.0;
        let env = Env::new(&d, &w, &cuts, &cfg);
        let net = Network::new(
            env.featurizer.width(),
            4,
            1,
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(0),
        );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let e = run_episode(&net, &env, &mut rng).unwrap();
        assert_eq!(e.steps.len(), 1);
        assert_eq!(e.tree.num_leaves(), 2);
        // the right child (x >= 5) skips the only query
        assert_eq!(e.capacity, 5);
        assert_eq!(e.steps[0].reward, 0.5);
        cfg.min_block_size = 10;
        let env = Env::new(&d, &w, &cuts, &cfg);
        let e = run_episode(&net, &env, &mut rng).unwrap();
        assert!(e.steps.is_empty());
        assert_eq!(e.tree.num_leaves(), 1);
    }

    fn bandit(net: &Network) -> Vec<Sample> {
        let x = vec![1.0, 0.0, 1.0];
        let mask = vec![true, true, false];
        let p = masked_softmax(&net.forward(&x).logits, &mask);
        let v = net.forward(&x).value;
        (0..2)
            .map(|a| {
                let r = if a == 0 { 1.0 } else { 0.0 };
                Sample {
                    features: x.clone(),
                    mask: mask.clone(),
                    action: a,
                    old_logp: p[a].ln(),
                    reward: r,
                    advantage: r - v,
                }
            })
            .collect()
    }

    #[test]
    fn rewarded_action_gains_probability() {
        let mut net = Network::new(3, 8, 3, &mut rand_chacha::ChaCha8Rng::seed_from_u64(2));
        let mut adam = Adam::new(net.num_params(), 1e-2);
        let k = LossCoefs {
            clip_epsilon: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
        };
        let prob = |n: &Network| masked_softmax(&n.forward(&[1.0, 0.0, 1.0]).logits, &[true, true, false])[0];
        let mut last = prob(&net);
        for u in 0..10 {
            let batch = bandit(&net);
            update_policy(&mut net, &mut adam, &batch, k, 1, u).unwrap();
            let p = prob(&net);
            assert!(p > last, "step {u}: {p} <= {last}");
            last = p;
        }
        assert_eq!(
            masked_softmax(&net.forward(&[1.0, 0.0, 1.0]).logits, &[true, true, false])[2],
            0.0
        );
    }

    #[test]
    fn zero_advantage_leaves_policy_gradient_empty() {
        let net = Network::new(3, 8, 3, &mut rand_chacha::ChaCha8Rng::seed_from_u64(4));
        let mut batch = bandit(&net);
        for s in &mut batch {
            s.advantage = 0.0;
        }
        let k = LossCoefs {
            clip_epsilon: 0.2,
            value_coef: 0.0,
            entropy_coef: 0.0,
        };
        let mut g = vec![0.0; net.num_params()];
        loss_and_grad(&net, &batch, k, Some(&mut g));
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn unclipped_loss_is_vanilla_policy_gradient() {
        let net = Network::new(3, 8, 3, &mut rand_chacha::ChaCha8Rng::seed_from_u64(6));
        let batch = bandit(&net);
        let k = LossCoefs {
            clip_epsilon: 0.0,
            value_coef: 0.0,
            entropy_coef: 0.0,
        };
        let t = loss_and_grad(&net, &batch, k, None);
        let vanilla = -batch.iter().map(|s| s.advantage).sum::<f64>() / batch.len() as f64;
        assert!((t.policy - vanilla).abs() < 1e-12);
    }
}
