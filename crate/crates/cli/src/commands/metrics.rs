use std::collections::HashMap;
use std::path::PathBuf;

use tracing::{info, warn};
use ttscore::corpus::{jsonl, F0Contour};
use ttscore::evalbench::{cer, f0_corr, f0_rmse, wer as word_error_rate, MetricRecord};
use ttscore::synth::Hypothesis;

use super::{finish, read_all, write_records, Ctx};
use crate::args::{F0MetricsArgs, WerArgs};
use crate::error::{CliError, CliResult};

fn metric(utt_id: &str, system_id: &str, name: &str, value: f64) -> MetricRecord {
    MetricRecord {
        utt_id: utt_id.to_string(),
        system_id: Some(system_id.to_string()),
        metric: name.to_string(),
        value,
        token_count: None,
    }
}

pub fn wer(a: WerArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let hyp_path: PathBuf = ctx.resolver.required("hyp", a.hyp)?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;
    let unit = ctx.resolver.or("unit", a.unit, "word".to_string())?;
    let normalize = ctx.resolver.or("normalize", a.normalize, true)?;
    type Rate = fn(&str, &str, bool) -> ttscore::Result<f64>;
    let (name, rate): (&str, Rate) = match unit.as_str() {
        "word" => ("wer", word_error_rate),
        "char" => ("cer", cer),
        other => return Err(CliError::Usage(format!("unknown --unit `{other}` (word or char)"))),
    };
    let hyps: HashMap<String, String> = jsonl::read::<Hypothesis>(&hyp_path)?
        .into_iter()
        .map(|(_, h)| (h.utt_id, h.text))
        .collect();

    let mut records = Vec::new();
    let mut skipped = 0;
    for r in &manifest.records {
        let Some(h) = hyps.get(&r.utt_id) else {
            warn!(utt_id = %r.utt_id, "no hypothesis");
            skipped += 1;
            continue;
        };
        match rate(&r.text, h, normalize) {
            Ok(v) => records.push(metric(&r.utt_id, &r.system_id, name, v)),
            Err(e) => {
                warn!(utt_id = %r.utt_id, "skipping: {e}");
                skipped += 1;
            }
        }
    }
    write_records(&out, &records)?;
    info!(utterances = records.len(), skipped, "wrote {}", out.display());

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    run.input(&hyp_path)?;
    run.output(&out);
    run.summary("skipped", skipped);
    finish(&run, &out)
}

pub fn f0_metrics(a: F0MetricsArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (manifest_path, manifest) = ctx.manifest(a.manifest)?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;
    let per_record = read_all(&manifest, |r| {
        let load = |field: &str, v: &Option<String>| -> ttscore::Result<F0Contour> {
            F0Contour::read(&manifest.require(r, field, v)?)
        };
        let pair = load("f0_path", &r.f0_path).and_then(|h| Ok((load("ref_f0_path", &r.ref_f0_path)?, h)));
        let (reference, hyp) = match pair {
            Ok(p) => p,
            Err(e) => {
                warn!(utt_id = %r.utt_id, "skipping: {e}");
                return Ok(Vec::new());
            }
        };
        let mut rows = Vec::new();
        let computed = [
            ("f0_rmse", f0_rmse(&reference, &hyp, false)),
            ("log_f0_rmse", f0_rmse(&reference, &hyp, true)),
            ("f0_corr", f0_corr(&reference, &hyp)),
        ];
        for (name, value) in computed {
            match value {
                Ok(v) => rows.push(metric(&r.utt_id, &r.system_id, name, v)),
                Err(e) => warn!(utt_id = %r.utt_id, "no {name}: {e}"),
            }
        }
        Ok(rows)
    })?;
    let records: Vec<MetricRecord> = per_record.into_iter().flatten().collect();
    write_records(&out, &records)?;
    info!(values = records.len(), "wrote {}", out.display());

    let mut run = ctx.record();
    run.input(&manifest_path)?;
    run.output(&out);
    finish(&run, &out)
}
