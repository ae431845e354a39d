use std::path::PathBuf;

use tracing::{info, warn};
use ttscore::generator::GeneratorModel;
use ttscore::scoring::{batch_score, LengthPolicy, Metric, TokenSource};

use super::{finish, token_table, write_records, Ctx};
use crate::args::ScoreArgs;
use crate::error::{CliError, CliResult};

pub fn score(a: ScoreArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let model_path: PathBuf = ctx.resolver.required("model", a.model)?;
    let metric_text: String = ctx.resolver.required("metric", a.metric)?;
    let metric: Metric = metric_text.parse()?;
    let tokens_path: Option<PathBuf> = ctx.resolver.optional("tokens", a.tokens)?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;
    let policy = match ctx
        .resolver
        .or("length-policy", a.length_policy, "reject".to_string())?
        .as_str()
    {
        "reject" => LengthPolicy::Reject,
        "warn" => LengthPolicy::Warn,
        other => {
            return Err(CliError::Usage(format!(
                "unknown --length-policy `{other}` (reject or warn)"
            )))
        }
    };

    let model = GeneratorModel::load(&model_path)?;
    let table = tokens_path
        .as_deref()
        .map(|p| token_table(p, model.data_vocab() as u32))
        .transpose()?;
    let source = match &table {
        Some(t) => TokenSource::Table(t),
        None => TokenSource::Manifest,
    };
    let outcome = batch_score(&model, metric, &manifest, source, policy)?;
    write_records(&out, &outcome.results)?;
    if !outcome.failures.is_empty() {
        warn!(failed = outcome.failures.len(), "some utterances could not be scored");
    }
    info!(scored = outcome.results.len(), %metric, "wrote {}", out.display());

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    run.input(&model_path)?;
    if let Some(p) = &tokens_path {
        run.input(p)?;
    }
    run.output(&out);
    run.summary("scored", outcome.results.len());
    run.summary("failures", &outcome.failures);
    finish(&run, &out)
}
