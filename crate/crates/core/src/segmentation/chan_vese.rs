//! Two-phase Chan-Vese segmentation without edges.
//!
//! The level set is advanced with the semi-implicit curvature scheme of
//! Chan and Vese. Each sweep proposes new signs for φ; a proposed sign change
//! is kept only if it does not raise the piecewise-constant energy
//!
//! ```text
//! E = mu * TV(inside) + l1 * sum_in (I - c1)^2 + l2 * sum_out (I - c2)^2
//! ```
//!
//! with `c1`, `c2` the means of the current partition. Iteration stops once
//! the energy has dropped by less than `tol` (relative) over `window` sweeps.

use serde::{Deserialize, Serialize};

use super::{BinaryMask, GrayImage, SegmentationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Initialization {
    /// `sin(pi x / p) * sin(pi y / p)`.
    Checkerboard { period: f64 },
    /// Positive inside a centred circle with the given radius as a fraction of
    /// the shorter side.
    Circle { radius_fraction: f64 },
}

impl Default for Initialization {
    fn default() -> Self {
        Initialization::Checkerboard { period: 5.0 }
    }
}

/// Which side of the final contour is reported as foreground.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// The region with the lower mean intensity (cells on a bright field).
    #[default]
    Dark,
    Bright,
    /// `phi > 0`, whatever its intensity.
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChanVeseParams {
    pub mu: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub window: usize,
    pub init: Initialization,
    pub polarity: Polarity,
}

impl Default for ChanVeseParams {
    fn default() -> Self {
        Self {
            mu: 0.2,
            lambda1: 1.0,
            lambda2: 1.0,
            dt: 0.5,
            epsilon: 1.0,
            max_iter: 1000,
            tol: 1e-4,
            window: 5,
            init: Initialization::default(),
            polarity: Polarity::default(),
        }
    }
}

impl ChanVeseParams {
    fn validate(&self) -> Result<(), SegmentationError> {
        let bad = |what: &str| Err(SegmentationError::InvalidParameter(what.to_string()));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be positive");
        }
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return bad("lambda1 and lambda2 must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be non-negative");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        Ok(())
    }
}

/// Level set and region statistics after the last sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetState {
    pub width: usize,
    pub height: usize,
    pub phi: Vec<f64>,
    /// Mean normalized intensity where `phi > 0`.
    pub c1: f64,
    /// Mean normalized intensity where `phi <= 0`.
    pub c2: f64,
    pub mu: f64,
    pub iteration: usize,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct ChanVeseOutcome {
    pub mask: BinaryMask,
    pub state: LevelSetState,
    /// Energy before the first sweep and after each sweep.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
    /// Proposed sign changes refused because they would raise the energy.
    pub rejected_flips: usize,
}

impl ChanVeseOutcome {
    pub fn iterations(&self) -> usize {
        self.state.iteration
    }
}

pub fn chan_vese(img: &GrayImage, params: &ChanVeseParams) -> Result<ChanVeseOutcome, SegmentationError> {
    let phi0 = initial_phi(img.width(), img.height(), &params.init);
    chan_vese_from(img, params, phi0)
}

/// Starts from a caller-provided level set, positive inside.
pub fn chan_vese_from(
    img: &GrayImage,
    params: &ChanVeseParams,
    phi0: Vec<f64>,
) -> Result<ChanVeseOutcome, SegmentationError> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    if phi0.len() != w * h {
        return Err(SegmentationError::Shape("initial level set has the wrong size".into()));
    }
    if phi0.iter().any(|v| !v.is_finite()) {
        return Err(SegmentationError::InvalidParameter("initial level set is not finite".into()));
    }
    let (lo, hi) = img
        .pixels()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo <= f64::EPSILON {
        // nothing to separate
        return Ok(ChanVeseOutcome {
            mask: BinaryMask::empty(w, h),
            state: LevelSetState {
                width: w,
                height: h,
                phi: phi0,
                c1: lo,
                c2: lo,
                mu: params.mu,
                iteration: 0,
                energy: 0.0,
            },
            energy_trace: vec![0.0],
            converged: true,
            rejected_flips: 0,
        });
    }
    let intensity: Vec<f64> = img.pixels().iter().map(|v| (v - lo) / (hi - lo)).collect();
    let mut solver = Solver::new(w, h, intensity, phi0, params);
    let mut trace = vec![solver.energy()];
    let mut converged = false;
    let mut iteration = 0;
    while iteration < params.max_iter {
        iteration += 1;
        solver.sweep();
        let e = solver.energy();
        if !e.is_finite() || solver.phi.iter().any(|v| !v.is_finite()) {
            return Err(SegmentationError::NonFiniteEnergy { iteration });
        }
        trace.push(e);
        let n = trace.len() - 1;
        if n >= params.window {
            let drop = trace[n - params.window] - e;
            if drop / e.abs().max(1e-12) < params.tol {
                converged = true;
                break;
            }
        }
    }
    let (c1, c2) = solver.means();
    let inside = solver.inside.clone();
    let positive_is_fg = match params.polarity {
        Polarity::Positive => true,
        Polarity::Dark => c1 <= c2,
        Polarity::Bright => c1 > c2,
    };
    let mask = BinaryMask::from_vec(w, h, inside.iter().map(|&v| v == positive_is_fg).collect())?;
    Ok(ChanVeseOutcome {
        mask,
        state: LevelSetState {
            width: w,
            height: h,
            c1: lo + c1 * (hi - lo),
            c2: lo + c2 * (hi - lo),
            energy: *trace.last().unwrap(),
            phi: solver.phi,
            mu: params.mu,
            iteration,
        },
        energy_trace: trace,
        converged,
        rejected_flips: solver.rejected,
    })
}

pub fn initial_phi(width: usize, height: usize, init: &Initialization) -> Vec<f64> {
    let mut phi = Vec::with_capacity(width * height);
    match *init {
        Initialization::Checkerboard { period } => {
            let f = std::f64::consts::PI / period;
            for y in 0..height {
                for x in 0..width {
                    phi.push((f * x as f64).sin() * (f * y as f64).sin());
                }
            }
        }
        Initialization::Circle { radius_fraction } => {
            let r = radius_fraction * width.min(height) as f64;
            let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
            for y in 0..height {
                for x in 0..width {
                    phi.push(r - ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt());
                }
            }
            let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale > 0.0 {
                phi.iter_mut().for_each(|v| *v /= scale);
            }
        }
    }
    phi
}

/// Piecewise-constant energy of a partition: `inside` pixels against the rest.
pub fn partition_energy(
    intensity: &[f64],
    inside: &[bool],
    width: usize,
    mu: f64,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    let height = intensity.len() / width;
    let (mut s1, mut n1, mut s2, mut n2) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &m) in intensity.iter().zip(inside) {
        if m {
            s1 += v;
            n1 += 1;
        } else {
            s2 += v;
            n2 += 1;
        }
    }
    let c1 = if n1 > 0 { s1 / n1 as f64 } else { 0.0 };
    let c2 = if n2 > 0 { s2 / n2 as f64 } else { 0.0 };
    let mut data = 0.0;
    for (&v, &m) in intensity.iter().zip(inside) {
        data += if m {
            lambda1 * (v - c1).powi(2)
        } else {
            lambda2 * (v - c2).powi(2)
        };
    }
    let mut length = 0.0;
    for y in 0..height {
        for x in 0..width {
            length += grad_norm(inside, width, height, x, y);
        }
    }
    mu * length + data
}

/// Forward-difference gradient magnitude of the indicator at `(x, y)`.
fn grad_norm(inside: &[bool], width: usize, height: usize, x: usize, y: usize) -> f64 {
    let c = inside[y * width + x] as i32;
    let gx = if x + 1 < width {
        inside[y * width + x + 1] as i32 - c
    } else {
        0
    };
    let gy = if y + 1 < height {
        inside[(y + 1) * width + x] as i32 - c
    } else {
        0
    };
    ((gx * gx + gy * gy) as f64).sqrt()
}

struct Solver<'p> {
    w: usize,
    h: usize,
    intensity: Vec<f64>,
    phi: Vec<f64>,
    next: Vec<f64>,
    inside: Vec<bool>,
    p: &'p ChanVeseParams,
    total_s: f64,
    total_q: f64,
    rejected: usize,
}

const ETA: f64 = 1e-8;

impl<'p> Solver<'p> {
    fn new(w: usize, h: usize, intensity: Vec<f64>, phi: Vec<f64>, p: &'p ChanVeseParams) -> Self {
        let inside = phi.iter().map(|&v| v > 0.0).collect();
        let total_s = intensity.iter().sum();
        let total_q = intensity.iter().map(|v| v * v).sum();
        Self {
            w,
            h,
            next: vec![0.0; phi.len()],
            intensity,
            phi,
            inside,
            p,
            total_s,
            total_q,
            rejected: 0,
        }
    }

    fn sums(&self) -> (f64, f64, usize) {
        let (mut s, mut q, mut n) = (0.0, 0.0, 0);
        for (&v, &m) in self.intensity.iter().zip(&self.inside) {
            if m {
                s += v;
                q += v * v;
                n += 1;
            }
        }
        (s, q, n)
    }

    fn means(&self) -> (f64, f64) {
        let (s, _, n) = self.sums();
        let m = self.intensity.len();
        let c1 = if n > 0 { s / n as f64 } else { 0.0 };
        let c2 = if n < m {
            (self.total_s - s) / (m - n) as f64
        } else {
            0.0
        };
        (c1, c2)
    }

    /// Data term for given inside sums, each region at its own mean.
    fn data_energy(&self, s1: f64, q1: f64, n1: usize) -> f64 {
        let n2 = self.intensity.len() - n1;
        let e1 = if n1 > 0 { q1 - s1 * s1 / n1 as f64 } else { 0.0 };
        let (s2, q2) = (self.total_s - s1, self.total_q - q1);
        let e2 = if n2 > 0 { q2 - s2 * s2 / n2 as f64 } else { 0.0 };
        self.p.lambda1 * e1.max(0.0) + self.p.lambda2 * e2.max(0.0)
    }

    fn energy(&self) -> f64 {
        partition_energy(
            &self.intensity,
            &self.inside,
            self.w,
            self.p.mu,
            self.p.lambda1,
            self.p.lambda2,
        )
    }

    /// Length contributions that change when pixel `(x, y)` flips.
    fn local_length(&self, x: usize, y: usize) -> f64 {
        let mut s = grad_norm(&self.inside, self.w, self.h, x, y);
        if x > 0 {
            s += grad_norm(&self.inside, self.w, self.h, x - 1, y);
        }
        if y > 0 {
            s += grad_norm(&self.inside, self.w, self.h, x, y - 1);
        }
        s
    }

    fn sweep(&mut self) {
        let (w, h) = (self.w, self.h);
        let (c1, c2) = self.means();
        let p = self.p;
        let at = |phi: &[f64], x: isize, y: isize| {
            let x = x.clamp(0, w as isize - 1) as usize;
            let y = y.clamp(0, h as isize - 1) as usize;
            phi[y * w + x]
        };
        for y in 0..h {
            for x in 0..w {
                let (xi, yi) = (x as isize, y as isize);
                let i = y * w + x;
                let c = self.phi[i];
                let xp = at(&self.phi, xi + 1, yi);
                let xm = at(&self.phi, xi - 1, yi);
                let yp = at(&self.phi, xi, yi + 1);
                let ym = at(&self.phi, xi, yi - 1);
                let x0 = (xp - xm) / 2.0;
                let y0 = (yp - ym) / 2.0;
                let k1 = 1.0 / (ETA + (xp - c).powi(2) + y0 * y0).sqrt();
                let k2 = 1.0 / (ETA + (c - xm).powi(2) + y0 * y0).sqrt();
                let k3 = 1.0 / (ETA + x0 * x0 + (yp - c).powi(2)).sqrt();
                let k4 = 1.0 / (ETA + x0 * x0 + (c - ym).powi(2)).sqrt();
                let delta = p.epsilon / (std::f64::consts::PI * (p.epsilon.powi(2) + c * c));
                let d = p.dt * delta;
                let v = self.intensity[i];
                let num = c
                    + d * (p.mu * (k1 * xp + k2 * xm + k3 * yp + k4 * ym)
                        - p.lambda1 * (v - c1).powi(2)
                        + p.lambda2 * (v - c2).powi(2));
                self.next[i] = num / (1.0 + d * p.mu * (k1 + k2 + k3 + k4));
            }
        }

        let (mut s1, mut q1, mut n1) = self.sums();
        let mut current = self.data_energy(s1, q1, n1);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let into = self.next[i] > 0.0;
                if into == self.inside[i] {
                    continue;
                }
                let v = self.intensity[i];
                let (ns, nq, nn) = if into {
                    (s1 + v, q1 + v * v, n1 + 1)
                } else {
                    (s1 - v, q1 - v * v, n1 - 1)
                };
                let proposed = self.data_energy(ns, nq, nn);
                let before = self.local_length(x, y);
                self.inside[i] = into;
                let after = self.local_length(x, y);
                if proposed - current + p.mu * (after - before) <= 0.0 {
                    s1 = ns;
                    q1 = nq;
                    n1 = nn;
                    current = proposed;
                } else {
                    self.inside[i] = !into;
                    self.next[i] = self.phi[i];
                    self.rejected += 1;
                }
            }
        }
        std::mem::swap(&mut self.phi, &mut self.next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_image(n: usize) -> (GrayImage, BinaryMask) {
        let truth = BinaryMask::from_fn(n, n, |x, y| {
            let (dx, dy) = (x as f64 - 48.0, y as f64 - 44.0);
            dx * dx + dy * dy <= 400.0
        });
        let img = GrayImage::from_fn(n, n, |x, y| if truth.get(x, y) { 0.2 } else { 0.9 }).unwrap();
        (img, truth)
    }

    #[test]
    fn uniform_image_has_no_contour() {
        let img = GrayImage::from_fn(20, 20, |_, _| 0.5).unwrap();
        let out = chan_vese(&img, &ChanVeseParams::default()).unwrap();
        assert!(out.mask.is_empty());
        assert!(out.energy_trace.iter().all(|&e| e == out.energy_trace[0]));
    }

    #[test]
    fn disk_is_recovered() {
        let (img, truth) = disk_image(96);
        let out = chan_vese(&img, &ChanVeseParams::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations() < 1000);
        assert!(out.mask.dice(&truth) >= 0.98, "dice {}", out.mask.dice(&truth));
        for w in out.energy_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
        assert!((out.state.c1 - 0.2).abs() < 1e-9 || (out.state.c2 - 0.2).abs() < 1e-9);
    }

    #[test]
    fn circle_initialization() {
        let (img, truth) = disk_image(96);
        let params = ChanVeseParams {
            init: Initialization::Circle { radius_fraction: 0.4 },
            ..Default::default()
        };
        let out = chan_vese(&img, &params).unwrap();
        assert!(out.mask.dice(&truth) >= 0.98);
    }

    #[test]
    fn polarity_choices() {
        let (img, truth) = disk_image(64 + 32);
        let bright = ChanVeseParams {
            polarity: Polarity::Bright,
            ..Default::default()
        };
        let out = chan_vese(&img, &bright).unwrap();
        assert!(out.mask.dice(&truth.invert()) >= 0.98);
    }

    #[test]
    fn rejects_bad_parameters() {
        let (img, _) = disk_image(96);
        for p in [
            ChanVeseParams { mu: 0.0, ..Default::default() },
            ChanVeseParams { max_iter: 0, ..Default::default() },
            ChanVeseParams { dt: -1.0, ..Default::default() },
        ] {
            assert!(matches!(
                chan_vese(&img, &p),
                Err(SegmentationError::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn partition_energy_of_exact_split_is_length_only() {
        let inside: Vec<bool> = (0..16).map(|i| i % 4 < 2).collect();
        let intensity: Vec<f64> = inside.iter().map(|&m| if m { 0.0 } else { 1.0 }).collect();
        // vertical boundary of height 4
        let e = partition_energy(&intensity, &inside, 4, 0.5, 1.0, 1.0);
        assert!((e - 2.0).abs() < 1e-12);
    }
}
