use std::path::PathBuf;

use tracing::info;
use ttscore::corpus::write_tokens;
use ttscore::quantizer::{kmeans_assign, kmeans_fit_traced, Codebook, KMeansParams};

use super::{finish, frame_features, read_all, Ctx};
use crate::args::{FitKmeansArgs, TokenizeArgs};
use crate::error::CliResult;

pub fn fit_kmeans(a: FitKmeansArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let k: usize = ctx.resolver.required("k", a.k)?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;
    let field = ctx.resolver.or("field", a.field, "feature".to_string())?;
    let mut params = KMeansParams::new(k, ctx.seed);
    params.max_iters = ctx.resolver.or("max-iters", a.max_iters, params.max_iters)?;
    params.tol = ctx.resolver.or("tol", a.tol, params.tol)?;
    params.max_frames = ctx.resolver.optional("max-frames", a.max_frames)?;

    let features = read_all(&manifest, |r| frame_features(&manifest, r, &field))?;
    let frames: usize = features.iter().map(|f| f.frames()).sum();
    info!(utterances = features.len(), frames, k, "fitting k-means");
    let fit = kmeans_fit_traced(&features, &params)?;
    info!(
        inertia = fit.codebook.inertia,
        iterations = fit.trace.len() - 1,
        converged = fit.converged,
        "done"
    );
    fit.codebook.write(&out)?;

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    run.output(&out);
    run.summary("frames", frames);
    run.summary("inertia", fit.codebook.inertia);
    run.summary("iterations", fit.trace.len() - 1);
    run.summary("converged", fit.converged);
    finish(&run, &out)
}

pub fn tokenize(a: TokenizeArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let codebook_path: PathBuf = ctx.resolver.required("codebook", a.codebook)?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;
    let field = ctx.resolver.or("field", a.field, "feature".to_string())?;
    let codebook = Codebook::read(&codebook_path)?;
    let tokens = read_all(&manifest, |r| {
        let f = frame_features(&manifest, r, &field)?;
        Ok((r.utt_id.clone(), kmeans_assign(&f, &codebook)?))
    })?;
    write_tokens(&out, &tokens)?;
    info!(utterances = tokens.len(), "wrote {}", out.display());

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    run.input(&codebook_path)?;
    run.output(&out);
    finish(&run, &out)
}
