//! Sliding-window maps of Asplund distances.
//!
//! A [`Probe`] is a template plus an anchor inside it. For every anchor
//! position `x` where the translated template fits inside the image, the map
//! holds the colour distance between the template and the window it covers,
//! optionally with a [`Tolerance`]. Other positions carry `+inf`.

use crate::error::{Error, Result};
use crate::image::{Image, Rect};
use crate::metrics::{ProbeBounds, TolerantSearch, Tolerance};
use rayon::prelude::*;

/// Environment variable capping the number of worker threads (0 = auto).
pub const THREADS_ENV: &str = "ASPLUND_THREADS";

/// Template image and the pixel of it that is placed on each map position.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    image: Image,
    anchor: (usize, usize),
}

impl Probe {
    /// Probe anchored at its centre, rounding down for even sizes.
    pub fn new(image: Image) -> Self {
        let anchor = ((image.width() - 1) / 2, (image.height() - 1) / 2);
        Probe { image, anchor }
    }

    pub fn with_anchor(image: Image, ax: usize, ay: usize) -> Result<Self> {
        if ax >= image.width() || ay >= image.height() {
            return Err(Error::usage(format!(
                "anchor ({ax}, {ay}) outside {}x{} template",
                image.width(),
                image.height()
            )));
        }
        Ok(Probe {
            image,
            anchor: (ax, ay),
        })
    }

    #[inline]
    pub fn image(&self) -> &Image {
        &self.image
    }

    #[inline]
    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    pub fn shape(&self) -> ProbeShape {
        ProbeShape {
            width: self.image.width(),
            height: self.image.height(),
            anchor: self.anchor,
        }
    }

    /// Support of the template when its anchor sits on `(x, y)`, or `None`
    /// when part of it would fall left of or above the image.
    pub fn support_at(&self, x: usize, y: usize) -> Option<Rect> {
        self.shape().support_at(x, y)
    }
}

/// Template dimensions and anchor, without the pixel data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeShape {
    pub width: usize,
    pub height: usize,
    pub anchor: (usize, usize),
}

impl ProbeShape {
    pub fn support_at(&self, x: usize, y: usize) -> Option<Rect> {
        let x0 = x.checked_sub(self.anchor.0)?;
        let y0 = y.checked_sub(self.anchor.1)?;
        Some(Rect {
            x: x0,
            y: y0,
            width: self.width,
            height: self.height,
        })
    }

    /// Anchor positions at which the template fits inside a
    /// `width x height` image: a `(W - Wt + 1) x (H - Ht + 1)` rectangle.
    pub fn valid_anchors(&self, width: usize, height: usize) -> Option<Rect> {
        if self.width > width || self.height > height {
            return None;
        }
        Some(Rect {
            x: self.anchor.0,
            y: self.anchor.1,
            width: width - self.width + 1,
            height: height - self.height + 1,
        })
    }
}

/// Per-pixel distance values with a validity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DistanceMap {
    /// Wraps row-major values. Non-finite entries are invalid and are stored
    /// as `+inf`.
    pub fn new(width: usize, height: usize, mut values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::usage(format!(
                "map of {width}x{height} cannot hold {} values",
                values.len()
            )));
        }
        for v in &mut values {
            if !v.is_finite() {
                *v = f64::INFINITY;
            }
        }
        Ok(DistanceMap {
            width,
            height,
            values,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x].is_finite()
    }

    #[inline]
    pub fn is_valid_index(&self, i: usize) -> bool {
        self.values[i].is_finite()
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    /// Smallest and largest valid values.
    pub fn valid_range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

/// Global minimum over valid pixels, ties going to the first in row-major
/// order.
pub fn map_minimum(map: &DistanceMap) -> Result<((usize, usize), f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in map.values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    let (i, v) = best.ok_or_else(|| Error::usage("distance map has no valid pixel"))?;
    Ok(((i % map.width, i / map.width), v))
}

/// Map computation settings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MapEngine {
    threads: usize,
}

impl MapEngine {
    /// Uses rayon's global pool.
    pub fn new() -> Self {
        MapEngine { threads: 0 }
    }

    /// Dedicated pool of `threads` workers; 0 means the global pool.
    pub fn with_threads(threads: usize) -> Self {
        MapEngine { threads }
    }

    /// Reads [`THREADS_ENV`]; unset or unparsable means auto.
    pub fn from_env() -> Self {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(0);
        MapEngine { threads }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Map of distances between `probe` and each window of `image`.
    pub fn distance_map(&self, image: &Image, probe: &Probe) -> Result<DistanceMap> {
        self.compute(image, probe, Tolerance::NONE)
    }

    /// Map of distances with a tolerance.
    pub fn distance_map_tol(&self, image: &Image, probe: &Probe, tolerance: Tolerance) -> Result<DistanceMap> {
        self.compute(image, probe, tolerance)
    }

    fn compute(&self, image: &Image, probe: &Probe, tolerance: Tolerance) -> Result<DistanceMap> {
        let job = Job::new(image, probe, tolerance)?;
        let mut values = vec![f64::INFINITY; image.pixel_count()];
        let width = image.width();
        let rows = job.valid.y..job.valid.y + job.valid.height;
        let run = |values: &mut [f64]| {
            values
                .par_chunks_mut(width)
                .enumerate()
                .filter(|(y, _)| rows.contains(y))
                .for_each_init(Scratch::default, |scratch, (y, row)| job.fill_row(y, row, scratch));
        };
        if self.threads == 0 {
            run(&mut values);
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.threads)
                .build()
                .map_err(|e| Error::usage(format!("cannot start {} worker threads: {e}", self.threads)))?;
            pool.install(|| run(&mut values));
        }
        DistanceMap::new(width, image.height(), values)
    }
}

/// [`MapEngine::distance_map`] on the default engine.
pub fn distance_map(image: &Image, probe: &Probe) -> Result<DistanceMap> {
    MapEngine::from_env().distance_map(image, probe)
}

/// [`MapEngine::distance_map_tol`] on the default engine.
pub fn distance_map_tol(image: &Image, probe: &Probe, tolerance: Tolerance) -> Result<DistanceMap> {
    MapEngine::from_env().distance_map_tol(image, probe, tolerance)
}

#[derive(Default)]
struct Scratch {
    low: Vec<f64>,
    high: Vec<f64>,
    search: TolerantSearch,
}

struct Job {
    /// LIP logarithm of every image sample.
    image_log: Vec<f64>,
    /// LIP logarithm of every template sample.
    probe_log: Vec<f64>,
    image_width: usize,
    channels: usize,
    shape: ProbeShape,
    valid: Rect,
    discard: usize,
}

impl Job {
    fn new(image: &Image, probe: &Probe, tolerance: Tolerance) -> Result<Self> {
        let t = probe.image();
        if t.channels() != image.channels() {
            return Err(Error::usage(format!(
                "probe has {} channels, image has {}",
                t.channels(),
                image.channels()
            )));
        }
        if t.scale() != image.scale() {
            return Err(Error::usage("probe and image use different grey scales"));
        }
        let shape = probe.shape();
        let valid = shape.valid_anchors(image.width(), image.height()).ok_or_else(|| {
            Error::usage(format!(
                "{}x{} template does not fit in {}x{} image",
                t.width(),
                t.height(),
                image.width(),
                image.height()
            ))
        })?;
        let support = t.pixel_count();
        let discard = tolerance.max_discard(support);
        if discard >= support {
            return Err(Error::usage(format!(
                "tolerance {} would discard all {support} template pixels",
                tolerance.kept_fraction()
            )));
        }
        let scale = image.scale();
        Ok(Job {
            image_log: image.data().iter().map(|&v| scale.log(v)).collect(),
            probe_log: t.data().iter().map(|&v| scale.log(v)).collect(),
            image_width: image.width(),
            channels: image.channels(),
            shape,
            valid,
            discard,
        })
    }

    fn fill_row(&self, y: usize, row: &mut [f64], scratch: &mut Scratch) {
        let first = self.valid.x;
        for (x, out) in row[first..first + self.valid.width].iter_mut().enumerate() {
            *out = self.anchor_distance(first + x, y, scratch);
        }
    }

    fn anchor_distance(&self, x: usize, y: usize, scratch: &mut Scratch) -> f64 {
        let support = self.shape.support_at(x, y).expect("valid anchor");
        let ch = self.channels;
        let tw = self.shape.width * ch;
        if self.discard == 0 {
            let mut mu = f64::INFINITY;
            let mut lambda = f64::NEG_INFINITY;
            for ty in 0..self.shape.height {
                let start = ((support.y + ty) * self.image_width + support.x) * ch;
                let window = &self.image_log[start..start + tw];
                let template = &self.probe_log[ty * tw..(ty + 1) * tw];
                for (&f, &t) in window.iter().zip(template) {
                    let r = f / t;
                    mu = mu.min(r);
                    lambda = lambda.max(r);
                }
            }
            return ProbeBounds { mu, lambda }.distance();
        }
        scratch.low.clear();
        scratch.high.clear();
        for ty in 0..self.shape.height {
            let start = ((support.y + ty) * self.image_width + support.x) * ch;
            let window = &self.image_log[start..start + tw];
            let template = &self.probe_log[ty * tw..(ty + 1) * tw];
            for (wp, tp) in window.chunks_exact(ch).zip(template.chunks_exact(ch)) {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (&f, &t) in wp.iter().zip(tp) {
                    let r = f / t;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
                scratch.low.push(lo);
                scratch.high.push(hi);
            }
        }
        scratch
            .search
            .run(&scratch.low, &scratch.high, self.discard)
            .expect("discard count checked against the template size")
            .distance()
    }
}
