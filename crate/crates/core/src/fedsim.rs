//! In-process federated averaging over a small multilayer perceptron.
//!
//! Clients hold stratified shards of the training split, train a copy of the
//! global network locally with Adam and mini-batches, and the server replaces
//! the global parameters by the sample-weighted mean of the client copies.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_folds_for_labels, Dataset, Level};
use crate::error::{Error, Result};
use crate::learners::{argmax, softmax};
use crate::matrix::Matrix;
use crate::metrics::{confusion, metric_table, MetricTable};
use crate::seed::{self, StageRng};

/// Fully connected ReLU network with a softmax output.
///
/// Parameters live in one flat vector; layer `l` stores its
/// `sizes[l+1] × sizes[l]` weights row-major followed by `sizes[l+1]` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    pub dropout: f64,
    pub params: Vec<f64>,
}

fn layer_len(sizes: &[usize], l: usize) -> usize {
    sizes[l + 1] * sizes[l] + sizes[l + 1]
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(n_in: usize, hidden: &[usize], n_out: usize, dropout: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidConfig(format!("dropout must lie in [0, 1), got {dropout}")));
        }
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(hidden);
        sizes.push(n_out);
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        let mut params = Vec::new();
        for l in 0..sizes.len() - 1 {
            let limit = (6.0 / (sizes[l] + sizes[l + 1]) as f64).sqrt();
            params.extend((0..sizes[l] * sizes[l + 1]).map(|_| rng.gen_range(-limit..limit)));
            params.extend(std::iter::repeat(0.0).take(sizes[l + 1]));
        }
        Ok(MlpModel { sizes, dropout, params })
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Pre-activations of every layer; hidden activations pass through ReLU
    /// and, when `masks` is given, through inverted dropout.
    fn forward(&self, row: &[f64], masks: Option<&[Vec<f64>]>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut acts = vec![row.to_vec()];
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut off = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + layer_len(&self.sizes, l)];
            off += layer_len(&self.sizes, l);
            let input = &acts[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            if l + 1 < self.n_layers() {
                let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
                if let Some(m) = masks {
                    a.iter_mut().zip(&m[l]).for_each(|(v, k)| *v *= k);
                }
                acts.push(a);
            }
            pre.push(z);
        }
        (pre, acts)
    }

    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        softmax(self.forward(row, None).0.last().expect("output layer"))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.n_cols() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                actual: x.n_cols(),
            });
        }
        Ok(x.rows().map(|r| argmax(&self.proba_row(r))).collect())
    }

    /// Mean cross-entropy over `rows` and its gradient. `masks[i]` holds the
    /// dropout multipliers of sample `i` (one vector per hidden layer).
    pub fn loss_and_gradient(&self, x: &Matrix, rows: &[usize], y: &[usize], masks: Option<&[Vec<Vec<f64>>]>) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let n = rows.len() as f64;
        let offsets: Vec<usize> = (0..self.n_layers())
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += layer_len(&self.sizes, l);
                Some(o)
            })
            .collect();
        for (s, &i) in rows.iter().enumerate() {
            let mask = masks.map(|m| m[s].as_slice());
            let (pre, acts) = self.forward(x.row(i), mask);
            let logits = pre.last().expect("output layer");
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            loss += lse - logits[y[i]];
            let mut delta: Vec<f64> = softmax(logits);
            delta[y[i]] -= 1.0;
            for l in (0..self.n_layers()).rev() {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let off = offsets[l];
                let input = &acts[l];
                for o in 0..n_out {
                    let d = delta[o] / n;
                    grad[off + n_in * n_out + o] += d;
                    for (g, a) in grad[off + o * n_in..off + (o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                if l == 0 {
                    break;
                }
                let w = &self.params[off..off + n_in * n_out];
                let mut back = vec![0.0; n_in];
                for o in 0..n_out {
                    for (b, wv) in back.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *b += delta[o] * wv;
                    }
                }
                let z_prev = &pre[l - 1];
                for (k, b) in back.iter_mut().enumerate() {
                    let keep = mask.map_or(1.0, |m| m[l - 1][k]);
                    *b *= if z_prev[k] > 0.0 { keep } else { 0.0 };
                }
                delta = back;
            }
        }
        (loss / n, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    pub n_clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// The held-out test split is one fold of this many.
    pub test_folds: usize,
    /// Stop early once the mean client loss improves by less than this
    /// between rounds; off when `None`.
    pub plateau_tolerance: Option<f64>,
    pub seed: u64,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            n_clients: 10,
            rounds: 5,
            local_epochs: 50,
            batch_size: 25,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-7,
            hidden: vec![64, 32, 16],
            dropout: 0.2,
            test_folds: 5,
            plateau_tolerance: None,
            seed: 0,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 || self.rounds == 0 || self.local_epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("client, round, epoch and batch counts must be at least 1".into()));
        }
        if self.test_folds < 2 {
            return Err(Error::InvalidConfig("test_folds must be at least 2".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Stratified i.i.d. shards of `indices` (ascending within each shard).
pub fn shard(labels: &[usize], indices: &[usize], n_clients: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_clients == 0 {
        return Err(Error::InvalidConfig("at least one client is required".into()));
    }
    if n_clients > indices.len() {
        return Err(Error::InvalidConfig(format!(
            "{n_clients} clients but only {} records",
            indices.len()
        )));
    }
    if n_clients == 1 {
        let mut all = indices.to_vec();
        all.sort_unstable();
        return Ok(vec![all]);
    }
    let sub: Vec<usize> = indices.iter().map(|&i| labels[i]).collect();
    let folds = stratified_folds_for_labels(&sub, n_clients, seed::derive(seed, "shard", &[]))?;
    let mut shards = vec![Vec::new(); n_clients];
    for (pos, &f) in folds.fold_of.iter().enumerate() {
        shards[f].push(indices[pos]);
    }
    shards.iter_mut().for_each(|s| s.sort_unstable());
    Ok(shards)
}

/// Adam on mini-batches for `config.local_epochs` epochs; optimizer state
/// starts fresh on every call. Randomness comes from `(seed, round, client)`.
pub fn local_train(
    model: &MlpModel,
    x: &Matrix,
    y: &[usize],
    rows: &[usize],
    config: &FedConfig,
    client: usize,
    round: usize,
) -> Result<(MlpModel, f64)> {
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("client {client} has no records")));
    }
    if x.n_cols() != model.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: model.n_inputs(),
            actual: x.n_cols(),
        });
    }
    let mut rng = seed::rng(config.seed, "local-train", &[round as u64, client as u64]);
    let mut model = model.clone();
    let mut m = vec![0.0; model.params.len()];
    let mut v = vec![0.0; model.params.len()];
    let mut t = 0i32;
    let mut order = rows.to_vec();
    let mut last_loss = 0.0;
    for _ in 0..config.local_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let masks = dropout_masks(&model, batch.len(), &mut rng);
            let (loss, grad) = model.loss_and_gradient(x, batch, y, masks.as_deref());
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    learning_rate: config.learning_rate,
                });
            }
            epoch_loss += loss * batch.len() as f64;
            t += 1;
            let c1 = 1.0 - config.beta1.powi(t);
            let c2 = 1.0 - config.beta2.powi(t);
            for (((p, g), mi), vi) in model.params.iter_mut().zip(&grad).zip(&mut m).zip(&mut v) {
                *mi = config.beta1 * *mi + (1.0 - config.beta1) * g;
                *vi = config.beta2 * *vi + (1.0 - config.beta2) * g * g;
                *p -= config.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + config.adam_epsilon);
            }
        }
        last_loss = epoch_loss / rows.len() as f64;
    }
    if model.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Divergence {
            learning_rate: config.learning_rate,
        });
    }
    Ok((model, last_loss))
}

fn dropout_masks(model: &MlpModel, n: usize, rng: &mut StageRng) -> Option<Vec<Vec<Vec<f64>>>> {
    if model.dropout == 0.0 {
        return None;
    }
    let keep = 1.0 - model.dropout;
    let hidden = &model.sizes[1..model.sizes.len() - 1];
    Some(
        (0..n)
            .map(|_| {
                hidden
                    .iter()
                    .map(|&w| (0..w).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect())
                    .collect()
            })
            .collect(),
    )
}

/// Parameter-wise `Σ (w_i / W) θ_i`, computed as `θ_0 + Σ (w_i / W)(θ_i − θ_0)`.
pub fn fedavg(models: &[MlpModel], weights: &[f64]) -> Result<MlpModel> {
    let first = models
        .first()
        .ok_or_else(|| Error::EmptyInput("no models to average".into()))?;
    if weights.len() != models.len() {
        return Err(Error::DimensionMismatch {
            expected: models.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidConfig("averaging weights must be positive".into()));
    }
    if models.iter().any(|m| m.sizes != first.sizes) {
        return Err(Error::ArchitectureMismatch("models have different layer sizes".into()));
    }
    // offsets from the first model keep the mean of equal models exact
    let total: f64 = weights.iter().sum();
    let mut params = first.params.clone();
    for (m, &w) in models.iter().zip(weights).skip(1) {
        let share = w / total;
        for ((p, q), base) in params.iter_mut().zip(&m.params).zip(&first.params) {
            *p += share * (q - base);
        }
    }
    Ok(MlpModel {
        sizes: first.sizes.clone(),
        dropout: first.dropout,
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub client_samples: Vec<usize>,
    /// Sample-weighted mean of the clients' last-epoch training loss.
    pub train_loss: f64,
    pub metrics: MetricTable,
    pub parameters: MlpModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedRun {
    pub level: Level,
    pub features: Vec<String>,
    pub config: FedConfig,
    pub test_records: usize,
    pub rounds: Vec<RoundRecord>,
}

impl FedRun {
    pub fn final_metrics(&self) -> &MetricTable {
        &self.rounds.last().expect("at least one round").metrics
    }

    /// `round,clients,samples,train_loss,accuracy,weighted_f1,macro_f1`.
    pub fn rounds_csv(&self) -> String {
        let mut out = String::from("round,clients,samples,train_loss,accuracy,weighted_f1,macro_f1\n");
        for r in &self.rounds {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.2},{:.2},{:.2}\n",
                r.round,
                r.client_samples.len(),
                r.client_samples.iter().sum::<usize>(),
                r.train_loss,
                r.metrics.accuracy,
                r.metrics.weighted_avg.f1,
                r.metrics.macro_avg.f1
            ));
        }
        out
    }
}

struct Prepared {
    x: Matrix,
    y: Vec<usize>,
    train: Vec<usize>,
    test: Vec<usize>,
    classes: Vec<String>,
    initial: MlpModel,
}

fn prepare(ds: &Dataset, level: Level, features: &[String], config: &FedConfig) -> Result<Prepared> {
    config.validate()?;
    if features.is_empty() {
        return Err(Error::InvalidConfig("federation needs at least one feature".into()));
    }
    let cols = ds.schema().resolve(features)?;
    let x = ds.features().select_cols(&cols);
    let y = ds.labels_at(level);
    let holdout = stratified_folds_for_labels(&y, config.test_folds, seed::derive(config.seed, "holdout", &[]))?;
    let classes = ds.hierarchy().classes(level).to_vec();
    let initial = MlpModel::init(
        cols.len(),
        &config.hidden,
        classes.len(),
        config.dropout,
        &mut seed::rng(config.seed, "mlp-init", &[]),
    )?;
    Ok(Prepared {
        x,
        y,
        train: holdout.train_indices(0),
        test: holdout.test_indices(0),
        classes,
        initial,
    })
}

fn evaluate(p: &Prepared, model: &MlpModel) -> Result<MetricTable> {
    let pred = model.predict(&p.x.select_rows(&p.test))?;
    let truth: Vec<usize> = p.test.iter().map(|&i| p.y[i]).collect();
    Ok(metric_table(&confusion(&truth, &pred, &p.classes)?))
}

pub fn run_federation(ds: &Dataset, level: Level, features: &[String], config: &FedConfig) -> Result<FedRun> {
    let p = prepare(ds, level, features, config)?;
    let shards = shard(&p.y, &p.train, config.n_clients, config.seed)?;
    let counts: Vec<usize> = shards.iter().map(Vec::len).collect();
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut global = p.initial.clone();
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut previous_loss = f64::INFINITY;
    for round in 0..config.rounds {
        let local: Vec<(MlpModel, f64)> = shards
            .par_iter()
            .enumerate()
            .map(|(c, rows)| local_train(&global, &p.x, &p.y, rows, config, c, round))
            .collect::<Result<_>>()?;
        let models: Vec<MlpModel> = local.iter().map(|(m, _)| m.clone()).collect();
        global = fedavg(&models, &weights)?;
        let total: f64 = weights.iter().sum();
        let train_loss = local.iter().zip(&weights).map(|((_, l), w)| l * w).sum::<f64>() / total;
        rounds.push(RoundRecord {
            round: round + 1,
            client_samples: counts.clone(),
            train_loss,
            metrics: evaluate(&p, &global)?,
            parameters: global.clone(),
        });
        if let Some(tol) = config.plateau_tolerance {
            if previous_loss - train_loss < tol {
                break;
            }
        }
        previous_loss = train_loss;
    }
    Ok(FedRun {
        level,
        features: features.to_vec(),
        config: config.clone(),
        test_records: p.test.len(),
        rounds,
    })
}

/// The same schedule on the whole training split with no averaging: one
/// `local_train` call per round, as client 0.
pub fn run_centralized(ds: &Dataset, level: Level, features: &[String], config: &FedConfig) -> Result<FedRun> {
    let p = prepare(ds, level, features, config)?;
    let mut model = p.initial.clone();
    let mut rounds = Vec::with_capacity(config.rounds);
    for round in 0..config.rounds {
        let (next, train_loss) = local_train(&model, &p.x, &p.y, &p.train, config, 0, round)?;
        model = next;
        rounds.push(RoundRecord {
            round: round + 1,
            client_samples: vec![p.train.len()],
            train_loss,
            metrics: evaluate(&p, &model)?,
            parameters: model.clone(),
        });
    }
    Ok(FedRun {
        level,
        features: features.to_vec(),
        config: FedConfig {
            n_clients: 1,
            ..config.clone()
        },
        test_records: p.test.len(),
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, PlantedFeature, SynthSpec};

    fn tiny(seed: u64, dropout: f64) -> MlpModel {
        MlpModel::init(3, &[4, 3], 3, dropout, &mut seed::rng(seed, "t", &[])).unwrap()
    }

    #[test]
    fn softmax_output_normalized() {
        let m = tiny(1, 0.2);
        for row in [[0.0, 1.0, 0.5], [10.0, -3.0, 2.0]] {
            assert!((m.proba_row(&row).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(MlpModel::init(3, &[4], 2, 1.0, &mut seed::rng(0, "t", &[])).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = Matrix::from_rows(&[[0.2, -1.0, 0.7], [1.0, 0.5, -0.3], [-0.4, 0.9, 0.1]]).unwrap();
        let y = [0, 2, 1];
        let rows = [0, 1, 2];
        let m = tiny(4, 0.0);
        let (_, g) = m.loss_and_gradient(&x, &rows, &y, None);
        let h = 1e-6;
        for k in 0..m.params.len() {
            let (mut a, mut b) = (m.clone(), m.clone());
            a.params[k] += h;
            b.params[k] -= h;
            let fd = (a.loss_and_gradient(&x, &rows, &y, None).0 - b.loss_and_gradient(&x, &rows, &y, None).0) / (2.0 * h);
            let err = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-8);
            assert!(err < 1e-4 || (fd - g[k]).abs() < 1e-9, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn averaging_examples() {
        let mut a = tiny(1, 0.0);
        let mut b = a.clone();
        a.params.iter_mut().for_each(|p| *p = 0.0);
        b.params.iter_mut().for_each(|p| *p = 2.0);
        assert!(fedavg(&[a.clone(), b.clone()], &[1.0, 1.0]).unwrap().params.iter().all(|&p| p == 1.0));
        b.params.iter_mut().for_each(|p| *p = 4.0);
        assert!(fedavg(&[a.clone(), b], &[3.0, 1.0]).unwrap().params.iter().all(|&p| p == 1.0));
        let c = tiny(9, 0.0);
        assert_eq!(fedavg(&[c.clone(), c.clone(), c.clone()], &[1.0, 5.0, 2.0]).unwrap().params, c.params);
        let other = MlpModel::init(3, &[5], 3, 0.0, &mut seed::rng(0, "t", &[])).unwrap();
        assert!(matches!(fedavg(&[c.clone(), other], &[1.0, 1.0]), Err(Error::ArchitectureMismatch(_))));
        assert!(fedavg(&[c], &[0.0]).is_err());
    }

    #[test]
    fn shards_partition_and_stratify() {
        let labels: Vec<usize> = (0..1000).map(|i| usize::from(i % 10 == 0)).collect();
        let idx: Vec<usize> = (0..1000).collect();
        let shards = shard(&labels, &idx, 10, 3).unwrap();
        assert!(shards.iter().all(|s| s.len() == 100));
        let mut all: Vec<usize> = shards.concat();
        all.sort_unstable();
        assert_eq!(all, idx);
        for s in &shards {
            let ones = s.iter().filter(|&&i| labels[i] == 1).count();
            assert!((ones as i64 - 10).abs() <= 1);
        }
        assert!(shard(&labels, &idx[..5], 10, 3).is_err());
    }

    fn separable(n: usize) -> Dataset {
        synth_generate(
            &SynthSpec {
                n_records: n,
                n_features: 6,
                informative: (0..6).map(|c| PlantedFeature { feature: c, class: c, bias: 1.0 }).collect(),
                class_mix: vec![1.0 / 6.0; 6],
            },
            7,
        )
        .unwrap()
    }

    #[test]
    fn zero_rate_keeps_parameters() {
        let ds = separable(60);
        let cfg = FedConfig {
            learning_rate: 0.0,
            local_epochs: 2,
            ..FedConfig::default()
        };
        let m = MlpModel::init(6, &[8], 6, 0.2, &mut seed::rng(0, "t", &[])).unwrap();
        let rows: Vec<usize> = (0..60).collect();
        let (out, _) = local_train(&m, ds.features(), ds.labels(), &rows, &cfg, 0, 0).unwrap();
        assert_eq!(out.params, m.params);
    }

    #[test]
    fn divergence_is_reported() {
        let ds = separable(60);
        let cfg = FedConfig {
            learning_rate: 1e300,
            local_epochs: 5,
            ..FedConfig::default()
        };
        let m = MlpModel::init(6, &[8], 6, 0.0, &mut seed::rng(0, "t", &[])).unwrap();
        let rows: Vec<usize> = (0..60).collect();
        assert!(matches!(
            local_train(&m, ds.features(), ds.labels(), &rows, &cfg, 0, 0),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn federation_learns_separable_data_deterministically() {
        let ds = separable(600);
        let names = ds.schema().feature_names.clone();
        let cfg = FedConfig {
            local_epochs: 20,
            hidden: vec![16, 8],
            learning_rate: 0.01,
            seed: 5,
            ..FedConfig::default()
        };
        let run = run_federation(&ds, Level::Fine, &names, &cfg).unwrap();
        assert_eq!(run.rounds.len(), 5);
        assert!(run.final_metrics().accuracy >= 99.0, "{}", run.final_metrics().accuracy);
        assert_eq!(run_federation(&ds, Level::Fine, &names, &cfg).unwrap(), run);
        assert!(run.rounds_csv().lines().count() == 6);
    }
}
