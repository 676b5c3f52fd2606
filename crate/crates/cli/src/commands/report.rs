use crowdcell_core::annotation::aggregate_corpus;
use crowdcell_core::metrics::{full_report, MatrixStack, NaPolicy};
use serde_json::json;

use super::{load_truth, load_votes, rule};
use crate::error::CliError;
use crate::manifest::RunRecorder;
use crate::{Context, NaPolicyArg, ReportArgs, ReportFormat};

pub fn run(ctx: &Context, args: &ReportArgs) -> Result<(), CliError> {
    let mut rec = RunRecorder::new("report", None, ctx.config)?;
    rec.params(json!({
        "k": args.k,
        "quorum": args.quorum,
        "na_policy": format!("{:?}", args.na_policy),
    }));
    let rule = rule(args.k, args.quorum)?;
    let votes = load_votes(&args.votes)?;
    let truth = load_truth(&args.truth)?;
    rec.input(&args.votes)?;
    rec.input(&args.truth)?;
    let agg = aggregate_corpus(&votes, &rule).map_err(|e| CliError::data(&args.votes, e))?;
    if !agg.incomplete.is_empty() {
        eprintln!(
            "warning: {} items have fewer than {} votes and are left out of the consensus rows",
            agg.incomplete.len(),
            args.k
        );
    }
    let stack = MatrixStack::build(&votes, &agg.results, &truth, &rule)
        .map_err(|e| CliError::data(&args.votes, e))?;
    let policy = match args.na_policy {
        NaPolicyArg::Exclude => NaPolicy::Exclude,
        NaPolicyArg::CountAsError => NaPolicy::CountAsError,
    };
    let report = full_report(&stack, policy);
    let (text, ext) = match args.format {
        ReportFormat::Text => (report.to_text(), "txt"),
        ReportFormat::Csv => (report.to_csv(), "csv"),
        ReportFormat::Json => (report.to_json(), "json"),
    };
    print!("{text}");
    if !text.ends_with('\n') {
        println!();
    }
    if let Some(dir) = ctx.out_dir()? {
        let path = dir.join(format!("report.{ext}"));
        std::fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
        rec.output(&path)?;
        rec.finish(dir)?;
    }
    Ok(())
}
