//! Cell extraction from smear images: Chan-Vese segmentation, small object
//! removal and per-component crops.

mod chan_vese;
mod components;
mod image;
pub mod phantom;

pub use self::chan_vese::{
    chan_vese, chan_vese_from, initial_phi, partition_energy, ChanVeseOutcome, ChanVeseParams,
    Initialization, LevelSetState, Polarity,
};
pub use self::components::{
    crop_item_id, extract_cells, label_components, remove_small_objects, CellCrop, Component,
};
pub use self::image::{BinaryMask, BoundingBox, GrayImage};

/// Components smaller than this are dropped before cropping.
pub const DEFAULT_MIN_AREA: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum SegmentationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("energy became non-finite at iteration {iteration}; reduce the time step")]
    NonFiniteEnergy { iteration: usize },
    #[error("shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Image(#[from] ::image::ImageError),
}

/// Segmentation result for one image.
#[derive(Debug, Clone)]
pub struct Segmented {
    pub raw_mask: BinaryMask,
    pub mask: BinaryMask,
    pub crops: Vec<CellCrop>,
    pub iterations: usize,
    pub converged: bool,
    pub energy_trace: Vec<f64>,
}

/// Chan-Vese, then small object removal, then one crop per component.
pub fn segment_image(
    img: &GrayImage,
    params: &ChanVeseParams,
    min_area: usize,
    pad: usize,
    source_image_id: &str,
) -> Result<Segmented, SegmentationError> {
    let out = chan_vese(img, params)?;
    let mask = remove_small_objects(&out.mask, min_area);
    let crops = extract_cells(img, &mask, pad, source_image_id);
    Ok(Segmented {
        raw_mask: out.mask,
        mask,
        crops,
        iterations: out.state.iteration,
        converged: out.converged,
        energy_trace: out.energy_trace,
    })
}
