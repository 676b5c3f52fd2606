use std::path::{Path, PathBuf};

use crowdcell_core::segmentation::{segment_image, ChanVeseParams, GrayImage, Initialization, Polarity};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{create_dir, create_file, from_table};
use crate::error::{from_segmentation, CliError};
use crate::manifest::RunRecorder;
use crate::{Context, InitKind, PolarityArg, SegmentArgs};

const EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "tif", "tiff", "bmp"];

/// One row of `crops.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRow {
    pub item_id: String,
    pub crop_path: String,
    pub source_image_id: String,
    pub area: usize,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub cx: f64,
    pub cy: f64,
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if path.is_file() && ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn params(ctx: &Context, args: &SegmentArgs) -> Result<ChanVeseParams, CliError> {
    let mut p: ChanVeseParams = from_table("segment", ctx.section("segment")?)?;
    if let Some(mu) = args.mu {
        p.mu = mu;
    }
    if let Some(n) = args.max_iter {
        p.max_iter = n;
    }
    if let Some(tol) = args.tol {
        p.tol = tol;
    }
    if let Some(dt) = args.dt {
        p.dt = dt;
    }
    match args.init {
        Some(InitKind::Checkerboard) => p.init = Initialization::default(),
        Some(InitKind::Circle) => p.init = Initialization::Circle { radius_fraction: 0.35 },
        None => {}
    }
    match args.polarity {
        Some(PolarityArg::Dark) => p.polarity = Polarity::Dark,
        Some(PolarityArg::Bright) => p.polarity = Polarity::Bright,
        None => {}
    }
    Ok(p)
}

pub fn run(ctx: &Context, args: &SegmentArgs) -> Result<(), CliError> {
    let params = params(ctx, args)?;
    let images = list_images(&args.input)?;
    if images.is_empty() {
        return Err(CliError::data(&args.input, "no images found"));
    }
    let out = ctx.out_or_cwd()?;
    let mut rec = RunRecorder::new("segment", None, ctx.config)?;
    rec.params(json!({ "chan_vese": params, "min_area": args.min_area, "pad": args.pad }));
    create_dir(&out.join("crops"))?;
    create_dir(&out.join("masks"))?;

    let mut rows = Vec::new();
    for path in &images {
        rec.input(path)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::data(path, "file name is not utf-8"))?;
        let img = GrayImage::open(path).map_err(|e| from_segmentation(path, e))?;
        let seg = segment_image(&img, &params, args.min_area, args.pad, stem)
            .map_err(|e| from_segmentation(path, e))?;
        if !seg.converged {
            eprintln!("warning: {} stopped after {} iterations without converging", path.display(), seg.iterations);
        }
        let mask_path = out.join("masks").join(format!("{stem}.png"));
        seg.mask
            .to_luma8()
            .save(&mask_path)
            .map_err(|e| from_segmentation(&mask_path, e.into()))?;
        rec.output(&mask_path)?;
        for crop in &seg.crops {
            let rel = format!("crops/{}.png", crop.item_id);
            let crop_path = out.join(&rel);
            crop.image.save_png(&crop_path).map_err(|e| from_segmentation(&crop_path, e))?;
            rec.output(&crop_path)?;
            rows.push(CropRow {
                item_id: crop.item_id.to_string(),
                crop_path: rel,
                source_image_id: crop.source_image_id.clone(),
                area: crop.area,
                x0: crop.bbox.x0,
                y0: crop.bbox.y0,
                x1: crop.bbox.x1,
                y1: crop.bbox.y1,
                cx: crop.centroid.0,
                cy: crop.centroid.1,
            });
        }
        println!(
            "{}: {} cells, {} iterations",
            path.display(),
            seg.crops.len(),
            seg.iterations
        );
    }

    let csv_path = out.join("crops.csv");
    let mut w = csv::Writer::from_writer(create_file(&csv_path)?);
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::data(&csv_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&csv_path, e))?;
    drop(w);
    rec.output(&csv_path)?;
    println!("crops: {}", rows.len());
    rec.finish(&out)?;
    Ok(())
}
