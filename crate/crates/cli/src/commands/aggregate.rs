use crowdcell_core::annotation::aggregate_corpus;
use crowdcell_core::records::write_consensus;
use serde_json::json;

use super::{agreement_summary, create_file, load_votes, rule};
use crate::error::CliError;
use crate::manifest::RunRecorder;
use crate::{AggregateArgs, Context};

pub fn run(ctx: &Context, args: &AggregateArgs) -> Result<(), CliError> {
    let mut rec = RunRecorder::new("aggregate", None, ctx.config)?;
    rec.params(json!({ "k": args.k, "quorum": args.quorum }));
    let rule = rule(args.k, args.quorum)?;
    let votes = load_votes(&args.votes)?;
    rec.input(&args.votes)?;
    let agg = aggregate_corpus(&votes, &rule).map_err(|e| CliError::data(&args.votes, e))?;

    for b in &agg.incomplete {
        eprintln!("warning: item {} has {} of {} votes, skipped", b.item_id, b.votes, b.needed);
    }
    let labelled = agg.results.iter().filter(|r| !r.is_no_consensus()).count();
    println!("votes: {}", votes.len());
    println!(
        "ballots: {} complete, {} incomplete",
        agg.results.len(),
        agg.incomplete.len()
    );
    println!("consensus: {labelled}");
    println!("no consensus: {}", agg.results.len() - labelled);
    println!("agreement: {}", agreement_summary(&agg.histogram));
    println!("patterns: {}", agg.histogram);

    if let Some(dir) = ctx.out_dir()? {
        let path = dir.join("consensus.csv");
        write_consensus(create_file(&path)?, &agg.results).map_err(|e| CliError::data(&path, e))?;
        rec.output(&path)?;
        rec.finish(dir)?;
    }
    Ok(())
}
