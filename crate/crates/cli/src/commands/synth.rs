use std::path::PathBuf;

use tracing::info;
use ttscore::synth::{write_corpus, CorpusSpec};

use super::{finish, Ctx};
use crate::args::SynthCorpusArgs;
use crate::error::CliResult;

pub fn synth_corpus(a: SynthCorpusArgs, ctx: &mut Ctx) -> CliResult<()> {
    let out: PathBuf = ctx.resolver.required("out", a.out)?;
    let d = CorpusSpec::default();
    let r = &mut ctx.resolver;
    let spec = CorpusSpec {
        seed: ctx.seed,
        train_utts: r.or("train-utts", a.train_utts, d.train_utts)?,
        eval_texts: r.or("eval-texts", a.eval_texts, d.eval_texts)?,
        systems: r.or("systems", a.systems, d.systems)?,
        perturb_utts: r.or("perturb-utts", a.perturb_utts, d.perturb_utts)?,
        feature_dims: r.or("feature-dims", a.feature_dims, d.feature_dims)?,
    };
    let summary = write_corpus(&out, &spec)?;
    info!(
        train = summary.train_utts,
        eval = summary.eval_utts,
        perturb = summary.perturb_utts,
        "wrote corpus to {}",
        out.display()
    );
    let mut run = ctx.record();
    run.output(&out);
    run.summary("corpus", &summary);
    finish(&run, &out.join("synth-corpus"))
}
