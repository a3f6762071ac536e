//! Perturbations and synthetic scenes.
//!
//! Lighting changes are modelled as LIP scalar multiplications: a global
//! exposure change multiplies every sample by one scalar, a drift
//! interpolates the scalar along an axis. Noise is additive Gaussian noise on
//! the classic intensity scale, applied to a seeded random subset of pixels.

use crate::error::{Error, Result};
use crate::image::{Image, Rect};
use crate::lip::GrayScale;
use crate::probe_map::Probe;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(alpha)
    } else {
        Err(Error::domain(format!("lighting multiplier must be > 0, got {alpha}")))
    }
}

/// Multiplies every sample by `alpha` in the LIP sense: darker for
/// `alpha > 1`, brighter for `alpha < 1`.
pub fn global_relight(image: &Image, alpha: f64) -> Result<Image> {
    let alpha = check_alpha(alpha)?;
    let scale = image.scale();
    image.map_samples(|_, _, v| scale.mul(alpha, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Multiplier varies with the column.
    Horizontal,
    /// Multiplier varies with the row.
    Vertical,
}

/// Lighting drift: the multiplier goes linearly from `alpha_start` on the
/// first row (or column) to `alpha_end` on the last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub axis: Axis,
    pub alpha_start: f64,
    pub alpha_end: f64,
}

impl DriftSpec {
    /// Multiplier at position `i` of an axis of length `extent`.
    pub fn multiplier(&self, i: usize, extent: usize) -> f64 {
        if extent <= 1 {
            return self.alpha_start;
        }
        self.alpha_start + (self.alpha_end - self.alpha_start) * i as f64 / (extent - 1) as f64
    }
}

pub fn apply_drift(image: &Image, drift: DriftSpec) -> Result<Image> {
    check_alpha(drift.alpha_start)?;
    check_alpha(drift.alpha_end)?;
    let scale = image.scale();
    let (w, h) = (image.width(), image.height());
    image.map_samples(|x, y, v| {
        let alpha = match drift.axis {
            Axis::Horizontal => drift.multiplier(x, w),
            Axis::Vertical => drift.multiplier(y, h),
        };
        scale.mul(alpha, v)
    })
}

/// Impulsive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Variance on the normalized `[0, 1]` intensity scale.
    pub variance: f64,
    /// Fraction of pixels affected.
    pub density: f64,
    pub seed: u64,
}

impl NoiseSpec {
    fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance >= 0.0) {
            return Err(Error::domain(format!("noise variance must be >= 0, got {}", self.variance)));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::domain(format!("noise density must lie in [0, 1], got {}", self.density)));
        }
        Ok(())
    }

    /// Number of pixels hit in an image of `n` pixels.
    pub fn affected(&self, n: usize) -> usize {
        ((self.density * n as f64 + 1e-9).floor() as usize).min(n)
    }
}

/// Adds zero-mean Gaussian noise to `floor(density * #pixels)` distinct
/// pixels chosen by the seeded generator. Every channel of a chosen pixel
/// receives its own sample, scaled by `M - 1` and added to the classic
/// intensity, then clipped to `[0, M - 1]`. Other pixels are untouched.
pub fn add_noise(image: &Image, spec: NoiseSpec) -> Result<Image> {
    spec.validate()?;
    let n = image.pixel_count();
    let count = spec.affected(n);
    let mut out = image.clone();
    if count == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.variance.sqrt()).expect("finite standard deviation");
    let mut chosen = index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let top = image.scale().m() - 1.0;
    let ch = image.channels();
    let data = out.data_mut();
    for p in chosen {
        for v in &mut data[p * ch..(p + 1) * ch] {
            let classic = top - *v;
            let noisy = (classic + normal.sample(&mut rng) * top).clamp(0.0, top);
            *v = top - noisy;
        }
    }
    Ok(out)
}

/// A synthetic scene with known template positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Image,
    /// Anchor positions at which the probe matches, in generation order.
    pub truth: Vec<(usize, usize)>,
    /// Where the reference probe is cut from `image`.
    pub probe_rect: Rect,
}

impl Scene {
    /// The reference probe, centre-anchored.
    pub fn probe(&self) -> Probe {
        self.probe_from(&self.image)
    }

    /// Probe cut at [`Scene::probe_rect`] from another rendering of the
    /// scene (for instance a relit one).
    pub fn probe_from(&self, image: &Image) -> Probe {
        let r = self.probe_rect;
        Probe::new(image.crop(r.x, r.y, r.width, r.height).expect("probe rectangle inside scene"))
    }
}

fn check_colour(colour: &[f64], channels: usize, scale: &GrayScale) -> Result<()> {
    if colour.len() != channels {
        return Err(Error::usage(format!(
            "colour has {} channels, scene has {channels}",
            colour.len()
        )));
    }
    for &c in colour {
        scale.check(c)?;
    }
    Ok(())
}

/// One filled circle.
#[derive(Debug, Clone, PartialEq)]
pub struct Disc {
    pub cx: usize,
    pub cy: usize,
    pub radius: usize,
    pub colour: Vec<f64>,
    /// Whether the disc counts as a ground-truth match.
    pub target: bool,
}

impl Disc {
    fn covers(&self, x: usize, y: usize) -> bool {
        let dx = x.abs_diff(self.cx);
        let dy = y.abs_diff(self.cy);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// Renders discs on a constant background. Discs must lie inside the canvas
/// and must not overlap. The probe is the square around the first target
/// disc, with a one-pixel ring of background.
pub fn render_discs(
    width: usize,
    height: usize,
    background: &[f64],
    discs: &[Disc],
    scale: GrayScale,
) -> Result<Scene> {
    let ch = background.len();
    check_colour(background, ch, &scale)?;
    for (i, d) in discs.iter().enumerate() {
        check_colour(&d.colour, ch, &scale)?;
        let reach = d.radius + 1;
        if d.cx < reach || d.cy < reach || d.cx + reach >= width || d.cy + reach >= height {
            return Err(Error::usage(format!(
                "disc {i} at ({}, {}) with radius {} does not fit the {width}x{height} canvas",
                d.cx, d.cy, d.radius
            )));
        }
        for (j, e) in discs[..i].iter().enumerate() {
            let gap = d.radius + e.radius + 1;
            let (dx, dy) = (d.cx.abs_diff(e.cx), d.cy.abs_diff(e.cy));
            if dx * dx + dy * dy <= gap * gap {
                return Err(Error::usage(format!("discs {j} and {i} overlap")));
            }
        }
    }
    let first = discs
        .iter()
        .find(|d| d.target)
        .ok_or_else(|| Error::usage("scene needs at least one target disc"))?;
    let image = Image::from_fn(width, height, ch, scale, |x, y, c| {
        discs
            .iter()
            .find(|d| d.covers(x, y))
            .map_or(background[c], |d| d.colour[c])
    })?;
    let reach = first.radius + 1;
    let probe_rect = Rect::new(first.cx - reach, first.cy - reach, 2 * reach + 1, 2 * reach + 1)?;
    let truth = discs.iter().filter(|d| d.target).map(|d| (d.cx, d.cy)).collect();
    Ok(Scene { image, truth, probe_rect })
}

/// Random layout of equally sized discs.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscLayout {
    pub width: usize,
    pub height: usize,
    pub radius: usize,
    /// Number of target discs.
    pub count: usize,
    pub colour: Vec<f64>,
    /// Number of extra discs in `distractor_colour`, not part of the truth.
    pub distractors: usize,
    pub distractor_colour: Vec<f64>,
    pub background: Vec<f64>,
    pub seed: u64,
}

impl Default for DiscLayout {
    fn default() -> Self {
        DiscLayout {
            width: 96,
            height: 72,
            radius: 6,
            count: 3,
            colour: vec![150.0, 60.0, 40.0],
            distractors: 2,
            distractor_colour: vec![40.0, 120.0, 150.0],
            background: vec![30.0, 35.0, 25.0],
            seed: 0,
        }
    }
}

impl DiscLayout {
    /// Places the discs by seeded rejection sampling and renders them.
    pub fn generate(&self, scale: GrayScale) -> Result<Scene> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let reach = self.radius + 1;
        if self.width <= 2 * reach + 1 || self.height <= 2 * reach + 1 {
            return Err(Error::usage("canvas too small for a single disc"));
        }
        let total = self.count + self.distractors;
        let mut discs: Vec<Disc> = Vec::with_capacity(total);
        // Keep probe-sized windows of different discs apart.
        let spacing = 2 * reach + 2;
        let mut attempts = 0;
        while discs.len() < total {
            attempts += 1;
            if attempts > 10_000 {
                return Err(Error::usage(format!(
                    "cannot place {total} discs of radius {} on a {}x{} canvas",
                    self.radius, self.width, self.height
                )));
            }
            let cx = rng.random_range(reach..self.width - reach);
            let cy = rng.random_range(reach..self.height - reach);
            if discs
                .iter()
                .any(|d| d.cx.abs_diff(cx).max(d.cy.abs_diff(cy)) < spacing)
            {
                continue;
            }
            let target = discs.len() < self.count;
            let colour = if target { &self.colour } else { &self.distractor_colour };
            discs.push(Disc {
                cx,
                cy,
                radius: self.radius,
                colour: colour.clone(),
                target,
            });
        }
        render_discs(self.width, self.height, &self.background, &discs, scale)
    }
}

/// Grid of homogeneous bricks separated by mortar.
///
/// Every brick is the base colour multiplied (LIP sense) by a seeded shade
/// in `shade_range`, so all bricks are homothetic to one another and a probe
/// cut from one brick interior matches all of them at distance zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BrickLayout {
    pub columns: usize,
    pub rows: usize,
    pub brick_width: usize,
    pub brick_height: usize,
    pub mortar: usize,
    pub base: Vec<f64>,
    pub mortar_colour: Vec<f64>,
    pub shade_range: (f64, f64),
    pub seed: u64,
}

impl Default for BrickLayout {
    fn default() -> Self {
        BrickLayout {
            columns: 3,
            rows: 3,
            brick_width: 40,
            brick_height: 30,
            mortar: 2,
            base: vec![110.0, 170.0, 190.0],
            mortar_colour: vec![60.0, 60.0, 60.0],
            shade_range: (0.8, 1.25),
            seed: 0,
        }
    }
}

impl BrickLayout {
    pub fn width(&self) -> usize {
        self.mortar + self.columns * (self.brick_width + self.mortar)
    }

    pub fn height(&self) -> usize {
        self.mortar + self.rows * (self.brick_height + self.mortar)
    }

    /// Top-left corner of brick `(col, row)`.
    pub fn brick_origin(&self, col: usize, row: usize) -> (usize, usize) {
        (
            self.mortar + col * (self.brick_width + self.mortar),
            self.mortar + row * (self.brick_height + self.mortar),
        )
    }

    pub fn generate(&self, scale: GrayScale) -> Result<Scene> {
        if self.columns == 0 || self.rows == 0 || self.brick_width == 0 || self.brick_height == 0 {
            return Err(Error::usage("brick layout needs at least one non-empty brick"));
        }
        let ch = self.base.len();
        check_colour(&self.base, ch, &scale)?;
        check_colour(&self.mortar_colour, ch, &scale)?;
        let (lo, hi) = self.shade_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::domain(format!("bad shade range ({lo}, {hi})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut colours = Vec::with_capacity(self.columns * self.rows);
        for _ in 0..self.columns * self.rows {
            let shade = if lo == hi { lo } else { rng.random_range(lo..hi) };
            let colour = self
                .base
                .iter()
                .map(|&v| scale.mul(shade, v))
                .collect::<Result<Vec<_>>>()?;
            colours.push(colour);
        }
        let period_x = self.brick_width + self.mortar;
        let period_y = self.brick_height + self.mortar;
        let image = Image::from_fn(self.width(), self.height(), ch, scale, |x, y, c| {
            let (bx, by) = (x.checked_sub(self.mortar), y.checked_sub(self.mortar));
            match (bx, by) {
                (Some(bx), Some(by)) if bx % period_x < self.brick_width && by % period_y < self.brick_height => {
                    colours[(by / period_y) * self.columns + bx / period_x][c]
                }
                _ => self.mortar_colour[c],
            }
        })?;
        let (ax, ay) = ((self.brick_width - 1) / 2, (self.brick_height - 1) / 2);
        let mut truth = Vec::with_capacity(colours.len());
        for row in 0..self.rows {
            for col in 0..self.columns {
                let (x0, y0) = self.brick_origin(col, row);
                truth.push((x0 + ax, y0 + ay));
            }
        }
        let (x0, y0) = self.brick_origin(0, 0);
        let probe_rect = Rect::new(x0, y0, self.brick_width, self.brick_height)?;
        Ok(Scene { image, truth, probe_rect })
    }
}
