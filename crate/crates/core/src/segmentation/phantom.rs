//! Synthetic smear images with known cell masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BinaryMask, GrayImage};

pub const CELL: f64 = 0.2;
pub const BACKGROUND: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: GrayImage,
    /// Cells only, speckle excluded.
    pub truth: BinaryMask,
    /// Disk centres `(x, y)`.
    pub centers: Vec<(f64, f64)>,
}

fn disks(size: usize, disks: &[(f64, f64, f64)]) -> BinaryMask {
    BinaryMask::from_fn(size, size, |x, y| {
        disks.iter().any(|&(cx, cy, r)| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            dx * dx + dy * dy <= r * r
        })
    })
}

fn render(truth: &BinaryMask, extra: Option<&BinaryMask>) -> GrayImage {
    GrayImage::from_fn(truth.width(), truth.height(), |x, y| {
        if truth.get(x, y) || extra.is_some_and(|m| m.get(x, y)) {
            CELL
        } else {
            BACKGROUND
        }
    })
    .expect("phantom intensities are in range")
}

/// One dark disk of radius `0.21 * size`.
pub fn disk(size: usize) -> Phantom {
    let s = size as f64;
    let c = (0.5 * s, 0.46 * s, 0.21 * s);
    let truth = disks(size, &[c]);
    Phantom {
        image: render(&truth, None),
        centers: vec![(c.0, c.1)],
        truth,
    }
}

/// Two disjoint disks of different sizes.
pub fn two_disks(size: usize) -> Phantom {
    let s = size as f64;
    let a = (0.26 * s, 0.31 * s, 0.125 * s);
    let b = (0.73 * s, 0.68 * s, 0.156 * s);
    let truth = disks(size, &[a, b]);
    Phantom {
        image: render(&truth, None),
        centers: vec![(a.0, a.1), (b.0, b.1)],
        truth,
    }
}

/// The single disk plus `count` dark specks of 1 to 4 pixels scattered over
/// the background, none touching the disk.
pub fn speckled_disk(size: usize, count: usize, seed: u64) -> Phantom {
    let base = disk(size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specks = BinaryMask::empty(size, size);
    let mut placed = 0;
    while placed < count {
        let x = rng.random_range(0..size - 2);
        let y = rng.random_range(0..size - 2);
        let (w, h) = (rng.random_range(1..3), rng.random_range(1..3));
        let near_cell = (x.saturating_sub(2)..(x + w + 2).min(size))
            .any(|xx| (y.saturating_sub(2)..(y + h + 2).min(size)).any(|yy| base.truth.get(xx, yy)));
        if near_cell {
            continue;
        }
        for yy in y..y + h {
            for xx in x..x + w {
                specks.set(xx, yy, true);
            }
        }
        placed += 1;
    }
    Phantom {
        image: render(&base.truth, Some(&specks)),
        ..base
    }
}
