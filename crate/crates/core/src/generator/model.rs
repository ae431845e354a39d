use std::ops::Range;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tracing::warn;

use super::tape::{log_softmax_rows, AttentionPlan, Tape, Var};
use super::{GeneratorConfig, Precision};
use crate::corpus::special::{BOS, EOS, NUM_SPECIAL};
use crate::corpus::{PhonemeInventory, PhonemeSequence, TokenSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
}

#[derive(Debug, Clone, Copy)]
struct FeedForward {
    fc1: Linear,
    fc2: Linear,
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    attn_norm: Norm,
    attn: Attention,
    ffn_norm: Norm,
    ffn: FeedForward,
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    self_norm: Norm,
    self_attn: Attention,
    cross: Option<(Norm, Attention)>,
    ffn_norm: Norm,
    ffn: FeedForward,
}

#[derive(Debug, Clone)]
struct Encoder {
    embed: usize,
    proj: Option<Linear>,
    pos: usize,
    layers: Vec<EncoderLayer>,
    norm: Norm,
}

/// Parameter indices for every tensor of the network.
#[derive(Debug, Clone)]
struct Layout {
    encoder: Option<Encoder>,
    tgt_embed: usize,
    dec_proj: Option<Linear>,
    dec_pos: usize,
    dec_layers: Vec<DecoderLayer>,
    dec_norm: Norm,
    out_proj: Option<Linear>,
    logits_bias: usize,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Normal(f64),
    Zeros,
    Ones,
}

#[derive(Default)]
struct Registry {
    names: Vec<String>,
    shapes: Vec<(usize, usize)>,
    inits: Vec<Init>,
}

impl Registry {
    fn add(&mut self, name: String, shape: (usize, usize), init: Init) -> usize {
        self.names.push(name);
        self.shapes.push(shape);
        self.inits.push(init);
        self.names.len() - 1
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize, gain: f64) -> Linear {
        Linear {
            w: self.add(
                format!("{name}.w"),
                (fan_in, fan_out),
                Init::Normal(gain / (fan_in as f64).sqrt()),
            ),
            b: self.add(format!("{name}.b"), (1, fan_out), Init::Zeros),
        }
    }

    fn norm(&mut self, name: &str, dim: usize) -> Norm {
        Norm {
            g: self.add(format!("{name}.g"), (1, dim), Init::Ones),
            b: self.add(format!("{name}.b"), (1, dim), Init::Zeros),
        }
    }

    fn attention(&mut self, name: &str, dim: usize, out_gain: f64) -> Attention {
        Attention {
            q: self.linear(&format!("{name}.q"), dim, dim, 1.0),
            k: self.linear(&format!("{name}.k"), dim, dim, 1.0),
            v: self.linear(&format!("{name}.v"), dim, dim, 1.0),
            o: self.linear(&format!("{name}.o"), dim, dim, out_gain),
        }
    }

    fn ffn(&mut self, name: &str, dim: usize, hidden: usize, out_gain: f64) -> FeedForward {
        FeedForward {
            fc1: self.linear(&format!("{name}.fc1"), dim, hidden, 1.0),
            fc2: self.linear(&format!("{name}.fc2"), hidden, dim, out_gain),
        }
    }
}

fn build_layout(c: &GeneratorConfig) -> (Layout, Registry) {
    let mut r = Registry::default();
    let (d, e) = (c.model_dim, c.embed_dim);
    let embed_std = 1.0 / (e as f64).sqrt();
    let residual_gain = 1.0 / ((2 * (c.enc_layers + c.dec_layers)).max(1) as f64).sqrt();

    let encoder = c.conditional.then(|| {
        let embed = r.add("enc.embed".into(), (c.src_vocab, e), Init::Normal(embed_std));
        let proj = (e != d).then(|| r.linear("enc.in_proj", e, d, 1.0));
        let pos = r.add("enc.pos".into(), (c.max_len, d), Init::Normal(0.1));
        let layers = (0..c.enc_layers)
            .map(|i| EncoderLayer {
                attn_norm: r.norm(&format!("enc.{i}.attn_norm"), d),
                attn: r.attention(&format!("enc.{i}.attn"), d, residual_gain),
                ffn_norm: r.norm(&format!("enc.{i}.ffn_norm"), d),
                ffn: r.ffn(&format!("enc.{i}.ffn"), d, c.ffn_dim, residual_gain),
            })
            .collect();
        let norm = r.norm("enc.norm", d);
        Encoder {
            embed,
            proj,
            pos,
            layers,
            norm,
        }
    });

    let tgt_embed = r.add("dec.embed".into(), (c.tgt_vocab, e), Init::Normal(embed_std));
    let dec_proj = (e != d).then(|| r.linear("dec.in_proj", e, d, 1.0));
    let dec_pos = r.add("dec.pos".into(), (c.max_len, d), Init::Normal(0.1));
    let dec_layers = (0..c.dec_layers)
        .map(|i| DecoderLayer {
            self_norm: r.norm(&format!("dec.{i}.self_norm"), d),
            self_attn: r.attention(&format!("dec.{i}.self_attn"), d, residual_gain),
            cross: c.conditional.then(|| {
                (
                    r.norm(&format!("dec.{i}.cross_norm"), d),
                    r.attention(&format!("dec.{i}.cross_attn"), d, residual_gain),
                )
            }),
            ffn_norm: r.norm(&format!("dec.{i}.ffn_norm"), d),
            ffn: r.ffn(&format!("dec.{i}.ffn"), d, c.ffn_dim, residual_gain),
        })
        .collect();
    let dec_norm = r.norm("dec.norm", d);
    let out_proj = (e != d).then(|| r.linear("dec.out_proj", d, e, 1.0));
    let logits_bias = r.add("dec.logits_bias".into(), (1, c.tgt_vocab), Init::Zeros);

    let layout = Layout {
        encoder,
        tgt_embed,
        dec_proj,
        dec_pos,
        dec_layers,
        dec_norm,
        out_proj,
        logits_bias,
    };
    (layout, r)
}

/// One teacher-forced training/scoring example in model ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Example {
    pub src: Vec<usize>,
    /// `BOS` followed by the data tokens.
    pub dec_in: Vec<usize>,
    /// The data tokens followed by `EOS`.
    pub targets: Vec<usize>,
}

/// Several examples concatenated row-wise; attention never crosses example
/// boundaries, so no padding is involved.
pub(crate) struct Packed {
    src_ids: Vec<usize>,
    src_pos: Vec<usize>,
    dec_ids: Vec<usize>,
    dec_pos: Vec<usize>,
    pub targets: Vec<usize>,
    pub dec_segments: Vec<Range<usize>>,
    enc_self: AttentionPlan,
    dec_self: AttentionPlan,
    cross: AttentionPlan,
}

impl Packed {
    pub fn new(examples: &[&Example], heads: usize) -> Self {
        let mut p = Packed {
            src_ids: Vec::new(),
            src_pos: Vec::new(),
            dec_ids: Vec::new(),
            dec_pos: Vec::new(),
            targets: Vec::new(),
            dec_segments: Vec::new(),
            enc_self: AttentionPlan {
                pairs: Vec::new(),
                heads,
                causal: false,
            },
            dec_self: AttentionPlan {
                pairs: Vec::new(),
                heads,
                causal: true,
            },
            cross: AttentionPlan {
                pairs: Vec::new(),
                heads,
                causal: false,
            },
        };
        for ex in examples {
            let src = p.src_ids.len()..p.src_ids.len() + ex.src.len();
            p.src_ids.extend(&ex.src);
            p.src_pos.extend(0..ex.src.len());
            let dec = p.dec_ids.len()..p.dec_ids.len() + ex.dec_in.len();
            p.dec_ids.extend(&ex.dec_in);
            p.dec_pos.extend(0..ex.dec_in.len());
            p.targets.extend(&ex.targets);
            p.enc_self.pairs.push((src.clone(), src.clone()));
            p.dec_self.pairs.push((dec.clone(), dec.clone()));
            p.cross.pairs.push((dec.clone(), src));
            p.dec_segments.push(dec);
        }
        p
    }
}

/// A trainable text-to-token generator (or unconditional token LM).
#[derive(Debug, Clone)]
pub struct GeneratorModel {
    config: GeneratorConfig,
    inventory: Option<PhonemeInventory>,
    layout: Layout,
    names: Vec<String>,
    pub(crate) params: Vec<Array2<f64>>,
    pub(crate) precision: Precision,
    pub trained_steps: u64,
}

impl GeneratorModel {
    /// Builds a model with seeded random initialization. Conditional models
    /// need the phoneme inventory their source vocabulary is built from.
    pub fn build(config: GeneratorConfig, inventory: Option<PhonemeInventory>, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config, inventory)?;
        let (_, registry) = build_layout(&model.config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (param, init) in model.params.iter_mut().zip(&registry.inits) {
            match *init {
                Init::Normal(std) => {
                    let normal = Normal::new(0.0, std).expect("positive std");
                    param.mapv_inplace(|_| normal.sample(&mut rng));
                }
                Init::Zeros => param.fill(0.0),
                Init::Ones => param.fill(1.0),
            }
        }
        Ok(model)
    }

    /// A model whose parameters are all zero except layer-norm gains (one).
    /// Every output distribution of such a model is uniform; useful as a
    /// base for hand-built models.
    pub fn zeros(config: GeneratorConfig, inventory: Option<PhonemeInventory>) -> Result<Self> {
        config.validate()?;
        match (&inventory, config.conditional) {
            (Some(inv), true) if inv.vocab_size() as usize != config.src_vocab => {
                return Err(Error::Config(format!(
                    "inventory implies src_vocab {}, config has {}",
                    inv.vocab_size(),
                    config.src_vocab
                )))
            }
            (None, true) => return Err(Error::Config("conditional model needs a phoneme inventory".into())),
            (Some(_), false) => return Err(Error::Config("decoder-only model takes no phoneme inventory".into())),
            _ => {}
        }
        let (layout, registry) = build_layout(&config);
        let params = registry
            .shapes
            .iter()
            .zip(&registry.inits)
            .map(|(&shape, init)| match init {
                Init::Ones => Array2::ones(shape),
                _ => Array2::zeros(shape),
            })
            .collect();
        Ok(Self {
            config,
            inventory,
            layout,
            names: registry.names,
            params,
            precision: Precision::Double,
            trained_steps: 0,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn inventory(&self) -> Option<&PhonemeInventory> {
        self.inventory.as_ref()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn is_conditional(&self) -> bool {
        self.config.conditional
    }

    /// Number of data tokens (target vocabulary without specials).
    pub fn data_vocab(&self) -> usize {
        self.config.tgt_vocab - NUM_SPECIAL as usize
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param(&self, name: &str) -> Option<&Array2<f64>> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.params[i])
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    pub(crate) fn from_parts(
        config: GeneratorConfig,
        inventory: Option<PhonemeInventory>,
        named: Vec<(String, Array2<f64>)>,
        precision: Precision,
        trained_steps: u64,
    ) -> Result<Self> {
        let mut model = Self::zeros(config, inventory)?;
        if named.len() != model.names.len() {
            return Err(Error::validation(format!(
                "expected {} tensors, found {}",
                model.names.len(),
                named.len()
            )));
        }
        for ((name, value), (expected, slot)) in named.into_iter().zip(model.names.iter().zip(&mut model.params)) {
            if &name != expected {
                return Err(Error::validation(format!("expected tensor {expected}, found {name}")));
            }
            if value.dim() != slot.dim() {
                return Err(Error::validation(format!(
                    "tensor {name} has shape {:?}, config implies {:?}",
                    value.dim(),
                    slot.dim()
                )));
            }
            if value.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("tensor {name} has non-finite values")));
            }
            *slot = value;
        }
        model.precision = precision;
        model.trained_steps = trained_steps;
        Ok(model)
    }

    /// Rounds every parameter to the nearest `f32` when training in single
    /// precision.
    pub(crate) fn apply_precision(&mut self) {
        if self.precision == Precision::Single {
            for p in &mut self.params {
                p.mapv_inplace(|v| v as f32 as f64);
            }
        }
    }

    /// Converts one (phonemes, tokens) pair into model ids. Over-length
    /// sequences are truncated from the right when `truncate` is set and
    /// rejected otherwise.
    pub(crate) fn prepare(
        &self,
        phonemes: Option<&PhonemeSequence>,
        tokens: &TokenSequence,
        truncate: bool,
    ) -> Result<Example> {
        if tokens.vocab_size() as usize + NUM_SPECIAL as usize != self.config.tgt_vocab {
            return Err(Error::validation(format!(
                "token vocabulary {} does not match model vocabulary {} ({} data tokens)",
                tokens.vocab_size(),
                self.config.tgt_vocab,
                self.data_vocab()
            )));
        }
        let max_body = self.config.max_len - 1;
        let src = match (phonemes, &self.inventory) {
            (Some(ph), Some(inv)) => {
                let mut ids: Vec<usize> = inv.encode(ph).into_iter().map(|i| i as usize).collect();
                if ids.len() > max_body {
                    if !truncate {
                        return Err(Error::validation(format!(
                            "{} phonemes exceed max_len {}",
                            ids.len(),
                            self.config.max_len
                        )));
                    }
                    warn!(
                        len = ids.len(),
                        max_len = self.config.max_len,
                        "truncating phoneme sequence"
                    );
                    ids.truncate(max_body);
                }
                ids.push(EOS as usize);
                ids
            }
            (None, None) => Vec::new(),
            (None, Some(_)) => return Err(Error::validation("conditional model requires phonemes")),
            (Some(_), None) => return Err(Error::validation("unconditional model does not take phonemes")),
        };
        let mut body: Vec<usize> = tokens.ids().iter().map(|&t| (t + NUM_SPECIAL) as usize).collect();
        if body.len() > max_body {
            if !truncate {
                return Err(Error::validation(format!(
                    "{} tokens exceed max_len {}",
                    body.len(),
                    self.config.max_len
                )));
            }
            warn!(
                len = body.len(),
                max_len = self.config.max_len,
                "truncating token sequence"
            );
            body.truncate(max_body);
        }
        let mut dec_in = Vec::with_capacity(body.len() + 1);
        dec_in.push(BOS as usize);
        dec_in.extend(&body);
        let mut targets = body;
        targets.push(EOS as usize);
        Ok(Example { src, dec_in, targets })
    }

    /// Builds the graph for a packed batch and returns the logits
    /// (`decoder rows × tgt_vocab`). Dropout is active only when `rng` is
    /// given.
    pub(crate) fn forward<'a>(&'a self, tape: &mut Tape<'a>, batch: &Packed, mut rng: Option<&mut ChaCha8Rng>) -> Var {
        let memory = self.layout.encoder.as_ref().map(|enc| {
            let mut x = self.embed(tape, enc.embed, enc.proj, enc.pos, &batch.src_ids, &batch.src_pos);
            x = self.dropout(tape, x, &mut rng);
            for layer in &enc.layers {
                let h = self.norm(tape, layer.attn_norm, x);
                let a = self.attention(tape, &layer.attn, h, h, &batch.enc_self);
                let a = self.dropout(tape, a, &mut rng);
                x = tape.add(x, a);
                let h = self.norm(tape, layer.ffn_norm, x);
                let f = self.feed_forward(tape, &layer.ffn, h);
                let f = self.dropout(tape, f, &mut rng);
                x = tape.add(x, f);
            }
            self.norm(tape, enc.norm, x)
        });

        let l = &self.layout;
        let mut x = self.embed(tape, l.tgt_embed, l.dec_proj, l.dec_pos, &batch.dec_ids, &batch.dec_pos);
        x = self.dropout(tape, x, &mut rng);
        for layer in &l.dec_layers {
            let h = self.norm(tape, layer.self_norm, x);
            let a = self.attention(tape, &layer.self_attn, h, h, &batch.dec_self);
            let a = self.dropout(tape, a, &mut rng);
            x = tape.add(x, a);
            if let (Some((norm, attn)), Some(mem)) = (&layer.cross, memory) {
                let h = self.norm(tape, *norm, x);
                let a = self.attention(tape, attn, h, mem, &batch.cross);
                let a = self.dropout(tape, a, &mut rng);
                x = tape.add(x, a);
            }
            let h = self.norm(tape, layer.ffn_norm, x);
            let f = self.feed_forward(tape, &layer.ffn, h);
            let f = self.dropout(tape, f, &mut rng);
            x = tape.add(x, f);
        }
        let mut y = self.norm(tape, l.dec_norm, x);
        if let Some(proj) = l.out_proj {
            y = self.linear(tape, proj, y);
        }
        let table = tape.param(l.tgt_embed);
        let logits = tape.matmul_bt(y, table);
        let bias = tape.param(l.logits_bias);
        tape.add_row(logits, bias)
    }

    fn embed(
        &self,
        tape: &mut Tape<'_>,
        table: usize,
        proj: Option<Linear>,
        pos_table: usize,
        ids: &[usize],
        positions: &[usize],
    ) -> Var {
        let t = tape.param(table);
        let mut x = tape.gather(t, ids.to_vec());
        if let Some(p) = proj {
            x = self.linear(tape, p, x);
        }
        let pt = tape.param(pos_table);
        let pos = tape.gather(pt, positions.to_vec());
        tape.add(x, pos)
    }

    fn linear(&self, tape: &mut Tape<'_>, lin: Linear, x: Var) -> Var {
        let w = tape.param(lin.w);
        let b = tape.param(lin.b);
        let y = tape.matmul(x, w);
        tape.add_row(y, b)
    }

    fn norm(&self, tape: &mut Tape<'_>, n: Norm, x: Var) -> Var {
        let g = tape.param(n.g);
        let b = tape.param(n.b);
        tape.layer_norm(x, g, b)
    }

    fn attention(&self, tape: &mut Tape<'_>, a: &Attention, query: Var, kv: Var, plan: &AttentionPlan) -> Var {
        let q = self.linear(tape, a.q, query);
        let k = self.linear(tape, a.k, kv);
        let v = self.linear(tape, a.v, kv);
        let o = tape.attention(q, k, v, plan);
        self.linear(tape, a.o, o)
    }

    fn feed_forward(&self, tape: &mut Tape<'_>, f: &FeedForward, x: Var) -> Var {
        let h = self.linear(tape, f.fc1, x);
        let h = tape.gelu(h);
        self.linear(tape, f.fc2, h)
    }

    fn dropout(&self, tape: &mut Tape<'_>, x: Var, rng: &mut Option<&mut ChaCha8Rng>) -> Var {
        let p = self.config.dropout;
        match rng {
            Some(rng) if p > 0.0 => {
                let keep = 1.0 / (1.0 - p);
                let mask = tape.value(x).mapv(|_| if rng.random::<f64>() < p { 0.0 } else { keep });
                tape.dropout(x, mask)
            }
            _ => x,
        }
    }

    /// Log-probability distributions (rows = scored positions, columns =
    /// target vocabulary) for a batch of examples, evaluated without
    /// dropout, split per example.
    pub(crate) fn log_distributions(&self, examples: &[&Example]) -> Vec<Array2<f64>> {
        let packed = Packed::new(examples, self.config.heads);
        let mut tape = Tape::new(&self.params);
        let logits = self.forward(&mut tape, &packed, None);
        let logp = log_softmax_rows(tape.value(logits).view());
        packed
            .dec_segments
            .iter()
            .map(|seg| logp.slice(ndarray::s![seg.clone(), ..]).to_owned())
            .collect()
    }

    /// `log p(token_i | tokens_<i, phonemes)` for every data token followed
    /// by the end-of-sequence position, with dropout disabled.
    pub fn token_logprobs(&self, phonemes: Option<&PhonemeSequence>, tokens: &TokenSequence) -> Result<Vec<f64>> {
        Ok(self.token_logprobs_batch(&[(phonemes, tokens)])?.remove(0))
    }

    /// Scores several utterances in one packed forward pass.
    pub fn token_logprobs_batch(&self, items: &[(Option<&PhonemeSequence>, &TokenSequence)]) -> Result<Vec<Vec<f64>>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let examples = items
            .iter()
            .map(|(ph, tok)| self.prepare(*ph, tok, false))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Example> = examples.iter().collect();
        let dists = self.log_distributions(&refs);
        let out: Vec<Vec<f64>> = dists
            .iter()
            .zip(&examples)
            .map(|(d, ex)| ex.targets.iter().enumerate().map(|(i, &t)| d[[i, t]]).collect())
            .collect();
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite log-probability".into()));
        }
        Ok(out)
    }

    /// Full next-token log-distributions for each scored position.
    pub fn next_token_log_probs(
        &self,
        phonemes: Option<&PhonemeSequence>,
        tokens: &TokenSequence,
    ) -> Result<Array2<f64>> {
        let ex = self.prepare(phonemes, tokens, false)?;
        Ok(self.log_distributions(&[&ex]).remove(0))
    }
}
