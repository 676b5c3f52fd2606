use crowdcell_core::annotation::estimate_consensus_accuracy;
use serde_json::json;

use crate::error::CliError;
use crate::manifest::RunRecorder;
use crate::{Context, EstimateArgs};

pub fn run(ctx: &Context, args: &EstimateArgs) -> Result<(), CliError> {
    let mut rows = Vec::with_capacity(args.alpha.len());
    for &alpha in &args.alpha {
        let p = estimate_consensus_accuracy(alpha, args.k, args.quorum)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        rows.push((alpha, p));
    }
    println!("{:>10}  {:>10}", "alpha", "consensus");
    for (alpha, p) in &rows {
        println!("{:>10}  {:>9.2}%", alpha, p * 100.0);
    }
    if let Some(dir) = ctx.out_dir()? {
        let mut rec = RunRecorder::new("estimate", None, ctx.config)?;
        rec.params(json!({
            "k": args.k,
            "quorum": args.quorum,
            "alpha": args.alpha,
            "consensus": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
        }));
        rec.finish(dir)?;
    }
    Ok(())
}
