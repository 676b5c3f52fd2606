use crowdcell_core::annotation::ItemId;
use crowdcell_orchestrator::state::BatchSpec;
use crowdcell_orchestrator::{BatchItem, Pairing};
use serde_json::json;

use super::segment::CropRow;
use super::{create_file, load_truth};
use crate::error::CliError;
use crate::manifest::RunRecorder;
use crate::{BatchArgs, Context};

pub fn run(ctx: &Context, args: &BatchArgs) -> Result<(), CliError> {
    let mut rec = RunRecorder::new("batch", ctx.seed, ctx.config)?;
    let items: Vec<BatchItem> = if let Some(path) = &args.crops {
        rec.input(path)?;
        let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(f);
        let mut items = Vec::new();
        for row in rdr.deserialize::<CropRow>() {
            let row = row.map_err(|e| CliError::data(path, e))?;
            items.push(BatchItem {
                item_id: ItemId::new(row.item_id),
                image: Some(row.crop_path),
                truth: None,
            });
        }
        items
    } else {
        let path = args.truth.as_ref().expect("clap requires crops or truth");
        rec.input(path)?;
        let truth = load_truth(path)?;
        truth
            .records()
            .iter()
            .map(|r| BatchItem {
                item_id: r.item_id.clone(),
                image: Some(r.crop_path.to_string_lossy().replace('\\', "/")),
                truth: args.include_truth.then_some(r.true_label),
            })
            .collect()
    };
    if items.is_empty() {
        return Err(CliError::Data("no items".into()));
    }
    let pairing = if args.shuffle {
        Pairing::Shuffled(ctx.seed.unwrap_or(0))
    } else {
        Pairing::Sequential
    };
    let spec = BatchSpec {
        items,
        pairing,
        k: args.k,
        reward_usd: args.reward_usd,
        lifetime_secs: args.lifetime_secs,
    };
    rec.params(json!({
        "shuffle": args.shuffle,
        "k": args.k,
        "reward_usd": args.reward_usd,
        "lifetime_secs": args.lifetime_secs,
        "include_truth": args.include_truth,
    }));

    let out = ctx.out_or_cwd()?;
    let path = out.join("batch.json");
    serde_json::to_writer_pretty(create_file(&path)?, &spec).map_err(|e| CliError::data(&path, e))?;
    rec.output(&path)?;
    println!("items: {}", spec.items.len());
    println!("tasks: {}", spec.items.len().div_ceil(2));
    println!("wrote {}", path.display());
    rec.finish(&out)?;
    Ok(())
}
