use std::path::{Path, PathBuf};

use tracing::{info, warn};
use ttscore::corpus::jsonl;
use ttscore::evalbench::{correlation_run, distribution_summary, render_table, Level, MetricRecord, MetricTable};

use super::{finish, write_records, Ctx};
use crate::args::{CorrelateArgs, DistributionsArgs};
use crate::config::parse_pair;
use crate::error::{io_error, CliError, CliResult};
use crate::run::RunRecord;

fn load_table(
    ctx: &mut Ctx,
    manifest: Option<PathBuf>,
    results: Vec<PathBuf>,
) -> CliResult<(MetricTable, Vec<PathBuf>)> {
    let (manifest_path, manifest) = ctx.manifest(manifest)?;
    let results: Vec<PathBuf> = ctx
        .resolver
        .list("results", results.iter().map(|p| p.display().to_string()).collect())?
        .into_iter()
        .map(PathBuf::from)
        .collect();
    let mut table = MetricTable::from_manifest(&manifest.records);
    for path in &results {
        let records: Vec<MetricRecord> = jsonl::read(path)?.into_iter().map(|(_, r)| r).collect();
        let unmatched = table.merge(&records);
        if unmatched > 0 {
            warn!(
                unmatched,
                "{}: results for utterances missing from the manifest",
                path.display()
            );
        }
    }
    let mut inputs = vec![manifest_path];
    inputs.extend(results);
    Ok((table, inputs))
}

fn record_inputs(run: &mut RunRecord, inputs: &[PathBuf]) -> CliResult<()> {
    inputs.iter().try_for_each(|p| run.input(p))
}

pub fn correlate(a: CorrelateArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (table, inputs) = load_table(ctx, a.manifest, a.results)?;
    let pairs = ctx
        .resolver
        .list("pair", a.pairs)?
        .iter()
        .map(|p| parse_pair(p))
        .collect::<CliResult<Vec<_>>>()?;
    if pairs.is_empty() {
        return Err(CliError::Usage("give at least one --pair a:b".into()));
    }
    let levels = ctx
        .resolver
        .or("levels", a.levels, "utterance,system".to_string())?
        .split(',')
        .map(|l| l.trim().parse::<Level>())
        .collect::<ttscore::Result<Vec<_>>>()?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;
    let table_path: Option<PathBuf> = ctx.resolver.optional("table", a.table)?;

    let reports = correlation_run(&table, &pairs, &levels)?;
    write_records(&out, &reports)?;
    let text = render_table(&reports);
    print!("{text}");
    if let Some(p) = &table_path {
        std::fs::write(p, &text).map_err(|e| io_error(p, e))?;
    }
    info!(reports = reports.len(), "wrote {}", out.display());

    let mut run = ctx.record();
    record_inputs(&mut run, &inputs)?;
    run.output(&out);
    if let Some(p) = &table_path {
        run.output(p);
    }
    finish(&run, &out)
}

pub fn distributions(a: DistributionsArgs, ctx: &mut Ctx) -> CliResult<()> {
    let (table, inputs) = load_table(ctx, a.manifest, a.results)?;
    let metric: String = ctx.resolver.required("metric", a.metric)?;
    let bins = ctx.resolver.or("bins", a.bins, 20usize)?;
    let compare = ctx
        .resolver
        .list("compare", a.compare)?
        .iter()
        .map(|p| parse_pair(p))
        .collect::<CliResult<Vec<_>>>()?;
    let out: PathBuf = ctx.resolver.required("out", a.out)?;

    let values = table.values(&metric);
    if values.is_empty() {
        return Err(CliError::Core(ttscore::Error::Validation(format!(
            "no values for metric `{metric}`"
        ))));
    }
    let report = distribution_summary(&values, bins, &compare)?;
    write_json(&out, &report)?;
    for s in &report.shifts {
        let d = s.cohens_d.map_or("undefined".to_string(), |d| format!("{d:.3}"));
        println!(
            "{} - {}: mean difference {:.4}, Cohen's d {d}",
            s.group_a, s.group_b, s.mean_diff
        );
    }

    let mut run = ctx.record();
    record_inputs(&mut run, &inputs)?;
    run.output(&out);
    finish(&run, &out)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}
