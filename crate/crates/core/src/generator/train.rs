use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracing::debug;

use super::model::{Example, GeneratorModel, Packed};
use super::tape::Tape;
use super::TrainConfig;
use crate::corpus::{PhonemeSequence, TokenSequence};
use crate::error::{Error, Result};

const DROPOUT_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// One training example: phonemes (absent for decoder-only models) and the
/// target token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub phonemes: Option<PhonemeSequence>,
    pub tokens: TokenSequence,
}

impl TrainingPair {
    pub fn new(phonemes: Option<PhonemeSequence>, tokens: TokenSequence) -> Self {
        Self { phonemes, tokens }
    }
}

/// Per-epoch mean per-token training loss (nats) and optimizer step count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

/// Minimizes the teacher-forced cross-entropy of the target tokens with
/// AdamW.
///
/// Examples are put in a canonical order before the seeded per-epoch
/// shuffle, so results depend on the seed and the multiset of pairs but not
/// on their input order. Over-length sequences are truncated with a warning.
pub fn train(model: &mut GeneratorModel, pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::validation("empty training corpus"));
    }
    model.precision = cfg.precision;
    model.apply_precision();

    let mut examples = pairs
        .iter()
        .map(|p| model.prepare(p.phonemes.as_ref(), &p.tokens, true))
        .collect::<Result<Vec<Example>>>()?;
    examples.sort();

    let batches_per_epoch = examples.len().div_ceil(cfg.batch_size);
    let total_steps = (cfg.epochs * batches_per_epoch) as u64;
    let warmup_steps = (cfg.warmup_fraction * total_steps as f64).ceil() as u64;
    let mut optimizer = AdamW::new(model, cfg);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffle_rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);

        let (mut epoch_nll, mut epoch_tokens) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let step = report.steps + 1;
            let refs: Vec<&Example> = batch.iter().map(|&i| &examples[i]).collect();
            let packed = Packed::new(&refs, model.config().heads);
            let tokens = packed.targets.len();

            let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_STREAM_SALT);
            dropout_rng.set_stream(step);
            let (nll, mut grads) = {
                let mut tape = Tape::new(&model.params);
                let logits = model.forward(&mut tape, &packed, Some(&mut dropout_rng));
                let loss = tape.cross_entropy(logits, packed.targets.clone());
                let nll = tape.value(loss)[[0, 0]];
                if !nll.is_finite() {
                    return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}, step {step}")));
                }
                (nll, tape.backward(loss))
            };
            let scale = 1.0 / tokens as f64;
            for g in grads.iter_mut().flatten() {
                *g *= scale;
            }
            if let Some(max_norm) = cfg.grad_clip {
                clip_global_norm(&mut grads, max_norm);
            }
            let lr = if warmup_steps > 0 && step <= warmup_steps {
                cfg.learning_rate * step as f64 / warmup_steps as f64
            } else {
                cfg.learning_rate
            };
            optimizer.step(model, &grads, lr);
            model.apply_precision();

            report.steps = step;
            epoch_nll += nll;
            epoch_tokens += tokens;
        }
        let loss = epoch_nll / epoch_tokens as f64;
        debug!(epoch, loss, "epoch finished");
        report.epoch_losses.push(loss);
    }
    model.trained_steps += report.steps;
    Ok(report)
}

/// Mean per-token negative log-likelihood over `pairs` in evaluation mode.
pub fn evaluate_loss(model: &GeneratorModel, pairs: &[TrainingPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::validation("empty evaluation set"));
    }
    let examples = pairs
        .iter()
        .map(|p| model.prepare(p.phonemes.as_ref(), &p.tokens, true))
        .collect::<Result<Vec<Example>>>()?;
    let (mut nll, mut count) = (0.0, 0usize);
    for chunk in examples.chunks(32) {
        let refs: Vec<&Example> = chunk.iter().collect();
        for (dist, ex) in model.log_distributions(&refs).iter().zip(chunk) {
            nll -= ex.targets.iter().enumerate().map(|(i, &t)| dist[[i, t]]).sum::<f64>();
            count += ex.targets.len();
        }
    }
    Ok(nll / count as f64)
}

/// Mean per-token loss over `pairs` in evaluation mode together with its
/// gradient for every parameter (in [`GeneratorModel::param_names`] order).
pub fn loss_gradients(model: &GeneratorModel, pairs: &[TrainingPair]) -> Result<(f64, Vec<Array2<f64>>)> {
    if pairs.is_empty() {
        return Err(Error::validation("empty evaluation set"));
    }
    let examples = pairs
        .iter()
        .map(|p| model.prepare(p.phonemes.as_ref(), &p.tokens, true))
        .collect::<Result<Vec<Example>>>()?;
    let refs: Vec<&Example> = examples.iter().collect();
    let packed = Packed::new(&refs, model.config().heads);
    let mut tape = Tape::new(&model.params);
    let logits = model.forward(&mut tape, &packed, None);
    let loss = tape.cross_entropy(logits, packed.targets.clone());
    let n = packed.targets.len() as f64;
    let value = tape.value(loss)[[0, 0]] / n;
    let grads = tape
        .backward(loss)
        .into_iter()
        .zip(&model.params)
        .map(|(g, p)| g.map(|g| g / n).unwrap_or_else(|| Array2::zeros(p.raw_dim())))
        .collect();
    Ok((value, grads))
}

fn clip_global_norm(grads: &mut [Option<Array2<f64>>], max_norm: f64) {
    let norm = grads
        .iter()
        .flatten()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut().flatten() {
            *g *= s;
        }
    }
}

struct AdamW {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    decay: Vec<bool>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl AdamW {
    fn new(model: &GeneratorModel, cfg: &TrainConfig) -> Self {
        let zeros = || model.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            // biases, norm parameters and the logit bias are not decayed
            decay: model
                .param_names()
                .iter()
                .map(|n| !(n.ends_with(".b") || n.ends_with(".g") || n.ends_with("logits_bias")))
                .collect(),
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
        }
    }

    fn step(&mut self, model: &mut GeneratorModel, grads: &[Option<Array2<f64>>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (i, param) in model.params.iter_mut().enumerate() {
            let wd = if self.decay[i] { self.weight_decay } else { 0.0 };
            match &grads[i] {
                Some(g) => {
                    Zip::from(&mut *param)
                        .and(&mut self.m[i])
                        .and(&mut self.v[i])
                        .and(g)
                        .for_each(|p, m, v, &g| {
                            *m = b1 * *m + (1.0 - b1) * g;
                            *v = b2 * *v + (1.0 - b2) * g * g;
                            let update = (*m / c1) / ((*v / c2).sqrt() + eps);
                            *p -= lr * (update + wd * *p);
                        });
                }
                None => {
                    Zip::from(&mut *param)
                        .and(&mut self.m[i])
                        .and(&mut self.v[i])
                        .for_each(|p, m, v| {
                            *m *= b1;
                            *v *= b2;
                            let update = (*m / c1) / ((*v / c2).sqrt() + eps);
                            *p -= lr * (update + wd * *p);
                        });
                }
            }
        }
    }
}
