use std::path::PathBuf;

use tracing::info;
use ttscore::corpus::{read_alignment, F0Contour};
use ttscore::evalbench::{perturb, PerturbKind};
use ttscore::prosody::{pool_phoneme, rvq_encode, rvq_fit_with, write_stacked, PoolMode, RvqCodebook};
use ttscore::quantizer::KMeansParams;

use super::{create_dir, finish, frame_features, pooled_features, read_all, Ctx};
use crate::args::{EncodeRvqArgs, FitRvqArgs, PerturbF0Args, PoolArgs};
use crate::error::{CliError, CliResult};

pub fn pool(a: PoolArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let out_dir: PathBuf = ctx.resolver.required("out-dir", a.out_dir)?;
    let mode: PoolMode = ctx
        .resolver
        .or("mode", a.mode.map(|m| m.parse()).transpose()?, PoolMode::Mean)?;
    let field = ctx.resolver.or("field", a.field, "prosody".to_string())?;
    create_dir(&out_dir)?;
    let phonemes = read_all(&manifest, |r| {
        let features = frame_features(&manifest, r, &field)?;
        let ph = manifest.phonemes(r)?;
        let align = manifest.require(r, "alignment_path", &r.alignment_path)?;
        let segments = read_alignment(&align, &r.utt_id, ph.len(), features.frames())?;
        pool_phoneme(&features, &segments, mode)?.write(&out_dir.join(format!("{}.ttsf", r.utt_id)))?;
        Ok(ph.len())
    })?;
    info!(
        utterances = phonemes.len(),
        phonemes = phonemes.iter().sum::<usize>(),
        "pooled into {}",
        out_dir.display()
    );

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    run.output(&out_dir);
    finish(&run, &out_dir.join("pool"))
}

pub fn fit_rvq(a: FitRvqArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let pooled_dir: Option<PathBuf> = ctx.resolver.optional("pooled-dir", a.pooled_dir)?;
    let stages = ctx.resolver.or("stages", a.stages, 2usize)?;
    let k = ctx.resolver.or("k", a.k, 32usize)?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;
    let mut params = KMeansParams::new(k, ctx.seed);
    params.max_iters = ctx.resolver.or("max-iters", a.max_iters, params.max_iters)?;

    let pooled = read_all(&manifest, |r| pooled_features(&manifest, r, pooled_dir.as_deref()))?;
    info!(utterances = pooled.len(), stages, k, "fitting residual quantizer");
    let rvq = rvq_fit_with(&pooled, stages, &params)?;
    rvq.write(&out)?;

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    run.output(&out);
    run.summary(
        "stage_inertia",
        (0..stages).map(|s| rvq.stage(s).inertia).collect::<Vec<_>>(),
    );
    finish(&run, &out)
}

pub fn encode_rvq(a: EncodeRvqArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let pooled_dir: Option<PathBuf> = ctx.resolver.optional("pooled-dir", a.pooled_dir)?;
    let codebook_path: PathBuf = ctx.resolver.required("codebook", a.codebook)?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;
    let rvq = RvqCodebook::read(&codebook_path)?;
    let encoded = read_all(&manifest, |r| {
        let pooled = pooled_features(&manifest, r, pooled_dir.as_deref())?;
        Ok((r.utt_id.clone(), rvq_encode(&pooled, &rvq)?))
    })?;
    if encoded.is_empty() {
        return Err(CliError::Usage("manifest has no records to encode".into()));
    }
    let files = write_stacked(&out, &encoded)?;
    info!(utterances = encoded.len(), "wrote {} stage files", files.len());

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    run.input(&codebook_path)?;
    for f in &files {
        run.output(f);
    }
    finish(&run, &out)
}

pub fn perturb_f0(a: PerturbF0Args, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let kind_text: String = ctx.resolver.required("kind", a.kind)?;
    let kind: PerturbKind = kind_text.parse()?;
    let out_dir: PathBuf = ctx.resolver.required("out-dir", a.out_dir)?;
    create_dir(&out_dir)?;
    let n = read_all(&manifest, |r| {
        let f0 = F0Contour::read(&manifest.require(r, "f0_path", &r.f0_path)?)?;
        perturb(&f0, kind)?.write(&out_dir.join(format!("{}.ttsf", r.utt_id)))?;
        Ok(())
    })?
    .len();
    info!(utterances = n, "wrote {}", out_dir.display());

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    run.output(&out_dir);
    finish(&run, &out_dir.join("perturb-f0"))
}
