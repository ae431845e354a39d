use std::path::PathBuf;

use tracing::info;
use ttscore::corpus::special::NUM_SPECIAL;
use ttscore::corpus::{read_tokens_for, PhonemeInventory};
use ttscore::generator::{train, GeneratorConfig, GeneratorModel, Precision, TrainConfig, TrainingPair};
use ttscore::quantizer::codebook_vocab;

use super::{finish, read_all, token_table, Ctx};
use crate::args::TrainGenArgs;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Content,
    Prosody,
    Ulm,
}

pub fn train_gen(a: TrainGenArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let kind = match ctx.resolver.or("kind", a.kind, "content".to_string())?.as_str() {
        "content" => Kind::Content,
        "prosody" => Kind::Prosody,
        "ulm" => Kind::Ulm,
        other => {
            return Err(CliError::Usage(format!(
                "unknown --kind `{other}` (content, prosody or ulm)"
            )))
        }
    };
    let tokens_path: Option<PathBuf> = ctx.resolver.optional("tokens", a.tokens)?;
    let codebook: Option<PathBuf> = ctx.resolver.optional("codebook", a.codebook)?;
    let vocab = match (ctx.resolver.optional("vocab", a.vocab)?, &codebook) {
        (Some(v), _) => v,
        (None, Some(cb)) => codebook_vocab(cb)?,
        (None, None) => {
            return Err(CliError::Usage(
                "give the token vocabulary with --vocab or --codebook".into(),
            ))
        }
    };
    let inventory_path: Option<PathBuf> = ctx.resolver.optional("inventory", a.inventory)?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;

    let conditional = kind != Kind::Ulm;
    let inventory = if !conditional {
        None
    } else if let Some(p) = &inventory_path {
        Some(PhonemeInventory::read(p)?)
    } else {
        let seqs = read_all(&manifest, |r| Ok(manifest.phonemes(r)?))?;
        Some(PhonemeInventory::from_sequences(&seqs)?)
    };
    let src_vocab = inventory
        .as_ref()
        .map_or(NUM_SPECIAL as usize, |i| i.vocab_size() as usize);
    let tgt_vocab = vocab + NUM_SPECIAL as usize;

    let arch = ctx.resolver.or("arch", a.arch, "toy".to_string())?;
    let mut config = match arch.as_str() {
        "toy" => GeneratorConfig::toy(src_vocab, tgt_vocab),
        "full" => GeneratorConfig::full(src_vocab, tgt_vocab),
        other => return Err(CliError::Usage(format!("unknown --arch `{other}` (toy or full)"))),
    };
    if !conditional {
        config = config.unconditional();
    }
    let r = &mut ctx.resolver;
    if conditional {
        config.enc_layers = r.or("enc-layers", a.enc_layers, config.enc_layers)?;
    }
    config.dec_layers = r.or("dec-layers", a.dec_layers, config.dec_layers)?;
    config.model_dim = r.or("model-dim", a.model_dim, config.model_dim)?;
    config.embed_dim = r.or("embed-dim", a.embed_dim, config.embed_dim)?;
    config.heads = r.or("heads", a.heads, config.heads)?;
    config.ffn_dim = r.or("ffn-dim", a.ffn_dim, config.ffn_dim)?;
    config.dropout = r.or("dropout", a.dropout, config.dropout)?;
    config.max_len = r.or("max-len", a.max_len, config.max_len)?;

    let defaults = TrainConfig::default();
    let grad_clip = r.or("grad-clip", a.grad_clip, defaults.grad_clip.unwrap_or(0.0))?;
    let precision: Precision = r.or(
        "precision",
        a.precision.map(|p| p.parse()).transpose()?,
        defaults.precision,
    )?;
    let train_config = TrainConfig {
        epochs: r.or("epochs", a.epochs, defaults.epochs)?,
        batch_size: r.or("batch-size", a.batch_size, defaults.batch_size)?,
        learning_rate: r.or("lr", a.lr, defaults.learning_rate)?,
        weight_decay: r.or("weight-decay", a.weight_decay, defaults.weight_decay)?,
        warmup_fraction: r.or("warmup-fraction", a.warmup_fraction, defaults.warmup_fraction)?,
        grad_clip: (grad_clip > 0.0).then_some(grad_clip),
        precision,
        seed: ctx.seed,
        ..defaults
    };

    let table = tokens_path
        .as_deref()
        .map(|p| token_table(p, vocab as u32))
        .transpose()?;
    let pairs = read_all(&manifest, |rec| {
        let tokens = match &table {
            Some(t) => t
                .get(&rec.utt_id)
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("no tokens for utterance `{}`", rec.utt_id)))?,
            None => {
                let path = match kind {
                    Kind::Prosody => manifest.require(rec, "prosody_token_path", &rec.prosody_token_path)?,
                    _ => manifest.require(rec, "token_path", &rec.token_path)?,
                };
                read_tokens_for(&path, &rec.utt_id, vocab as u32)?
            }
        };
        let phonemes = if conditional {
            Some(manifest.phonemes(rec)?)
        } else {
            None
        };
        Ok(TrainingPair::new(phonemes, tokens))
    })?;

    let mut model = GeneratorModel::build(config, inventory, ctx.seed)?;
    info!(
        parameters = model.num_parameters(),
        utterances = pairs.len(),
        epochs = train_config.epochs,
        "training generator"
    );
    let report = train(&mut model, &pairs, &train_config)?;
    for (e, loss) in report.epoch_losses.iter().enumerate() {
        info!(epoch = e + 1, loss, "epoch done");
    }
    model.save(&out)?;

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    for p in [&tokens_path, &codebook, &inventory_path].into_iter().flatten() {
        run.input(p)?;
    }
    run.output(&out);
    run.summary("parameters", model.num_parameters());
    run.summary("steps", report.steps);
    run.summary("epoch_losses", &report.epoch_losses);
    finish(&run, &out)
}
