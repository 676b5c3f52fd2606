use crowdcell_core::segmentation::phantom::{disk, speckled_disk, two_disks};
use crowdcell_core::segmentation::*;

const SIZE: usize = 96;

fn assert_monotone(trace: &[f64]) {
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-6 * w[0].abs(), "energy rose {} -> {}", w[0], w[1]);
    }
}

#[test]
fn single_disk() {
    let p = disk(SIZE);
    let out = chan_vese(&p.image, &ChanVeseParams::default()).unwrap();
    assert!(out.converged && out.iterations() < 1000);
    assert_monotone(&out.energy_trace);
    assert!(out.mask.dice(&p.truth) >= 0.98);
}

#[test]
fn two_disks_from_one_checkerboard() {
    let p = two_disks(SIZE);
    let out = chan_vese(&p.image, &ChanVeseParams::default()).unwrap();
    assert!(out.converged);
    assert_monotone(&out.energy_trace);
    assert!(out.mask.dice(&p.truth) >= 0.98);
}

#[test]
fn two_disks_from_one_circle() {
    // a single initial contour has to split to capture both cells
    let p = two_disks(SIZE);
    let params = ChanVeseParams {
        init: Initialization::Circle { radius_fraction: 0.45 },
        ..Default::default()
    };
    let out = chan_vese(&p.image, &params).unwrap();
    assert_monotone(&out.energy_trace);
    assert!(out.mask.dice(&p.truth) >= 0.98, "dice {}", out.mask.dice(&p.truth));
    let (_, comps) = label_components(&out.mask);
    assert_eq!(comps.len(), 2);
}

#[test]
fn speckle_is_removed() {
    let clean = disk(SIZE);
    let p = speckled_disk(SIZE, 25, 1);
    let out = chan_vese(&p.image, &ChanVeseParams::default()).unwrap();
    assert!(out.converged);
    assert_monotone(&out.energy_trace);
    let filtered = remove_small_objects(&out.mask, DEFAULT_MIN_AREA);
    let d = filtered.dice(&p.truth);
    assert!(d >= 0.98, "dice {d}");
    let clean_out = chan_vese(&clean.image, &ChanVeseParams::default()).unwrap();
    assert!((d - clean_out.mask.dice(&clean.truth)).abs() <= 0.01);
    assert_eq!(remove_small_objects(&filtered, DEFAULT_MIN_AREA), filtered);
}

#[test]
fn affine_rescaling_does_not_move_the_contour() {
    for p in [disk(SIZE), two_disks(SIZE), speckled_disk(SIZE, 25, 3)] {
        let base = chan_vese(&p.image, &ChanVeseParams::default()).unwrap();
        for (a, b) in [(0.5, 0.25), (0.8, 0.0), (0.3, 0.6)] {
            let scaled = p.image.map(|v| a * v + b);
            let out = chan_vese(&scaled, &ChanVeseParams::default()).unwrap();
            assert!(out.mask.dice(&base.mask) >= 0.99);
        }
    }
}

#[test]
fn crops_follow_components() {
    let p = two_disks(SIZE);
    let seg = segment_image(&p.image, &ChanVeseParams::default(), DEFAULT_MIN_AREA, 4, "smear7").unwrap();
    assert_eq!(seg.crops.len(), 2);
    let (_, comps) = label_components(&seg.mask);
    assert_eq!(seg.crops.len(), comps.len());
    for (crop, center) in seg.crops.iter().zip(&p.centers) {
        assert!((crop.centroid.0 - center.0).abs() < 1.0);
        assert!((crop.centroid.1 - center.1).abs() < 1.0);
        assert!(crop.area >= DEFAULT_MIN_AREA);
        assert!(crop.bbox.x1 <= SIZE && crop.bbox.y1 <= SIZE);
        assert_eq!(crop.mask.count(), crop.area);
        assert_eq!(crop.image.width(), crop.bbox.width());
    }
    assert_eq!(seg.crops[0].item_id.as_str(), "smear7_0000");
    assert_eq!(seg.crops[1].item_id.as_str(), "smear7_0001");
}

#[test]
fn speckle_phantom_stays_fast() {
    let start = std::time::Instant::now();
    for p in [disk(SIZE), two_disks(SIZE), speckled_disk(SIZE, 25, 1)] {
        chan_vese(&p.image, &ChanVeseParams::default()).unwrap();
    }
    assert!(start.elapsed().as_secs_f64() < 30.0);
}
