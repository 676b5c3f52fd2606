use serde::{Deserialize, Serialize};

use super::{BinaryMask, BoundingBox, GrayImage};
use crate::annotation::ItemId;

/// One 8-connected foreground region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// 1-based, in raster order of each component's first pixel.
    pub label: u32,
    pub area: usize,
    pub bbox: BoundingBox,
    pub centroid: (f64, f64),
}

/// Labels 8-connected components. Returns the label grid (0 is background)
/// and the components in label order.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.as_slice()[start] || labels[start] != 0 {
            continue;
        }
        let label = comps.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let (mut area, mut sx, mut sy) = (0usize, 0.0, 0.0);
        let mut bbox = BoundingBox {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            sx += x as f64;
            sy += y as f64;
            bbox.x0 = bbox.x0.min(x);
            bbox.y0 = bbox.y0.min(y);
            bbox.x1 = bbox.x1.max(x + 1);
            bbox.y1 = bbox.y1.max(y + 1);
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let j = ny * w + nx;
                    if mask.as_slice()[j] && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        comps.push(Component {
            label,
            area,
            bbox,
            centroid: (sx / area as f64, sy / area as f64),
        });
    }
    (labels, comps)
}

/// Drops 8-connected components with fewer than `min_area` pixels.
pub fn remove_small_objects(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    let (labels, comps) = label_components(mask);
    let keep: Vec<bool> = comps.iter().map(|c| c.area >= min_area).collect();
    let data = labels
        .iter()
        .map(|&l| l > 0 && keep[l as usize - 1])
        .collect();
    BinaryMask::from_vec(mask.width(), mask.height(), data).expect("same shape")
}

/// A single cell cut out of a smear image.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCrop {
    pub item_id: ItemId,
    pub source_image_id: String,
    /// Padded box in source coordinates.
    pub bbox: BoundingBox,
    /// Component pixels inside `bbox`; other cells in the box are not set.
    pub mask: BinaryMask,
    pub area: usize,
    pub centroid: (f64, f64),
    pub image: GrayImage,
}

pub fn crop_item_id(source_image_id: &str, index: usize) -> ItemId {
    ItemId::new(format!("{source_image_id}_{index:04}"))
}

/// One crop per connected component, numbered in raster order.
pub fn extract_cells(
    img: &GrayImage,
    mask: &BinaryMask,
    pad: usize,
    source_image_id: &str,
) -> Vec<CellCrop> {
    assert_eq!(
        (img.width(), img.height()),
        (mask.width(), mask.height()),
        "mask and image shapes differ"
    );
    let (labels, comps) = label_components(mask);
    comps
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let bbox = c.bbox.padded(pad, img.width(), img.height());
            let own = BinaryMask::from_fn(bbox.width(), bbox.height(), |x, y| {
                labels[(bbox.y0 + y) * img.width() + bbox.x0 + x] == c.label
            });
            CellCrop {
                item_id: crop_item_id(source_image_id, index),
                source_image_id: source_image_id.to_string(),
                bbox,
                mask: own,
                area: c.area,
                centroid: c.centroid,
                image: img.crop(&bbox),
            }
        })
        .collect()
}
