//! Asplund distances between grey-scale, colour and multivariate images.
//!
//! All of them reduce to log-ratios. For a probe value `t` and a value `f`,
//! the scalar `k` with `k (x) t = f` is `r = log(f) / log(t)` (see
//! [`GrayScale::ratio`]). Probing a set of samples from above and below with
//! homothetic copies of the probe gives
//!
//! ```text
//! lambda = inf { k : k (x) t >= f everywhere } = max r
//! mu     = sup { k : k (x) t <= f everywhere } = min r
//! d      = ln(lambda / mu)
//! ```
//!
//! so the distance is zero exactly when the two restrictions are LIP
//! homothetic, and it is unchanged when either side is relit by a scalar.

use crate::error::{Error, Result};
use crate::image::{Image, Region};
use crate::lip::GrayScale;
use std::cmp::Ordering;

/// The tightest homothetic multipliers of the probe from below (`mu`) and
/// from above (`lambda`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBounds {
    pub mu: f64,
    pub lambda: f64,
}

impl ProbeBounds {
    /// `ln(lambda / mu)`.
    #[inline]
    pub fn distance(&self) -> f64 {
        (self.lambda / self.mu).ln()
    }

    fn empty() -> Self {
        ProbeBounds {
            mu: f64::INFINITY,
            lambda: f64::NEG_INFINITY,
        }
    }

    #[inline]
    fn include(&mut self, low: f64, high: f64) {
        self.mu = self.mu.min(low);
        self.lambda = self.lambda.max(high);
    }
}

/// Fraction of points that must be kept when measuring a distance.
///
/// `p = 1` keeps everything. `p = 0.8` on ten points lets the two most
/// disturbing points be discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    p: f64,
}

impl Tolerance {
    pub const NONE: Tolerance = Tolerance { p: 1.0 };

    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("tolerance must lie in (0, 1], got {p}")));
        }
        Ok(Tolerance { p })
    }

    #[inline]
    pub fn kept_fraction(&self) -> f64 {
        self.p
    }

    /// Number of points that may be discarded out of `n`: `floor((1 - p) n)`.
    pub fn max_discard(&self, n: usize) -> usize {
        // Absorb representation error: (1 - 0.8) * 10 evaluates to 1.999...
        ((1.0 - self.p) * n as f64 + 1e-9).floor() as usize
    }
}

/// Result of a distance computed with a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct TolerantDistance {
    /// Bounds over the kept points.
    pub bounds: ProbeBounds,
    /// Row-major indices of the discarded pixels, ascending.
    pub discarded: Vec<usize>,
}

impl TolerantDistance {
    pub fn distance(&self) -> f64 {
        self.bounds.distance()
    }
}

fn check_same_len(probe: &[f64], value: &[f64]) -> Result<()> {
    if probe.len() != value.len() || probe.is_empty() {
        return Err(Error::usage(format!(
            "colour values carry {} and {} channels",
            probe.len(),
            value.len()
        )));
    }
    Ok(())
}

/// Per-channel bounds of `value` probed by `probe`: `(min_c r_c, max_c r_c)`
/// with `r_c = ratio(value_c, probe_c)`.
pub fn pixel_color_bounds(probe: &[f64], value: &[f64], scale: &GrayScale) -> Result<ProbeBounds> {
    check_same_len(probe, value)?;
    let mut b = ProbeBounds::empty();
    for (&t, &f) in probe.iter().zip(value) {
        let r = scale.ratio(f, t);
        b.include(r, r);
    }
    Ok(b)
}

/// Asplund distance between two colours (or any two `L`-vectors).
///
/// ```
/// use asplund::{metrics::pixel_color_distance, GrayScale};
///
/// let s = GrayScale::default();
/// // Channel ratios are 2, 3 and 1.
/// let d = pixel_color_distance(&[128.0; 3], &[192.0, 224.0, 128.0], &s).unwrap();
/// assert!((d - 3f64.ln()).abs() < 1e-12);
/// ```
pub fn pixel_color_distance(probe: &[f64], value: &[f64], scale: &GrayScale) -> Result<f64> {
    pixel_color_bounds(probe, value, scale).map(|b| b.distance())
}

fn check_pair(f: &Image, g: &Image) -> Result<()> {
    if f.width() != g.width() || f.height() != g.height() {
        return Err(Error::usage(format!(
            "images have different domains: {}x{} and {}x{}",
            f.width(),
            f.height(),
            g.width(),
            g.height()
        )));
    }
    if f.channels() != g.channels() {
        return Err(Error::usage(format!(
            "images carry {} and {} channels",
            f.channels(),
            g.channels()
        )));
    }
    if f.scale() != g.scale() {
        return Err(Error::usage("images use different grey scales"));
    }
    Ok(())
}

/// Per-pixel `(min_c r_c, max_c r_c)` of `value` probed by `probe` over the
/// region, in row-major order.
fn pixel_bounds(probe: &Image, value: &Image, idx: &[usize]) -> Vec<ProbeBounds> {
    let scale = probe.scale();
    idx.iter()
        .map(|&i| {
            let mut b = ProbeBounds::empty();
            for (&t, &f) in probe.pixel_at(i).iter().zip(value.pixel_at(i)) {
                let r = scale.ratio(f, t);
                b.include(r, r);
            }
            b
        })
        .collect()
}

/// Bounds of the grey-scale distance, `g` probing `f` on the region.
pub fn gray_region_bounds(f: &Image, g: &Image, region: &Region) -> Result<ProbeBounds> {
    check_pair(f, g)?;
    if f.channels() != 1 {
        return Err(Error::usage(format!(
            "grey-scale distance needs single-channel images, got {} channels",
            f.channels()
        )));
    }
    let idx = region.indices(f.width(), f.height())?;
    let scale = f.scale();
    let mut b = ProbeBounds::empty();
    for i in idx {
        let r = scale.ratio(f.data()[i], g.data()[i]);
        b.include(r, r);
    }
    Ok(b)
}

/// Functional Asplund distance between grey-scale images: `g` is scaled to
/// bound `f` from above and below on the region.
pub fn gray_region_distance(f: &Image, g: &Image, region: &Region) -> Result<f64> {
    gray_region_bounds(f, g, region).map(|b| b.distance())
}

/// Global colour Asplund distance on a region. `probe` is the image being
/// scaled: the bounds are extrema of `ratio(value_c(x), probe_c(x))` over all
/// pixels and channels.
pub fn color_region_distance(probe: &Image, value: &Image, region: &Region) -> Result<ProbeBounds> {
    check_pair(probe, value)?;
    let idx = region.indices(probe.width(), probe.height())?;
    let mut b = ProbeBounds::empty();
    for pb in pixel_bounds(probe, value, &idx) {
        b.include(pb.mu, pb.lambda);
    }
    Ok(b)
}

fn pixel_distances(f: &Image, g: &Image, region: &Region) -> Result<Vec<f64>> {
    check_pair(f, g)?;
    let idx = region.indices(f.width(), f.height())?;
    Ok(pixel_bounds(f, g, &idx).iter().map(ProbeBounds::distance).collect())
}

/// Mean over the region of the per-pixel colour distances.
pub fn d1_region(f: &Image, g: &Image, region: &Region) -> Result<f64> {
    let d = pixel_distances(f, g, region)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Supremum over the region of the per-pixel colour distances.
pub fn dinf_region(f: &Image, g: &Image, region: &Region) -> Result<f64> {
    let d = pixel_distances(f, g, region)?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

/// Colour distance with a tolerance: the smallest [`color_region_distance`]
/// over all subsets of the region that drop at most
/// [`Tolerance::max_discard`] pixels. Whole pixels are discarded.
pub fn tolerance_region_distance(
    probe: &Image,
    value: &Image,
    region: &Region,
    tolerance: Tolerance,
) -> Result<TolerantDistance> {
    check_pair(probe, value)?;
    let idx = region.indices(probe.width(), probe.height())?;
    let bounds = pixel_bounds(probe, value, &idx);
    let low: Vec<f64> = bounds.iter().map(|b| b.mu).collect();
    let high: Vec<f64> = bounds.iter().map(|b| b.lambda).collect();
    let k = tolerance.max_discard(idx.len());
    let mut search = TolerantSearch::default();
    let (b, local) = search.run_with_discards(&low, &high, k)?;
    let mut discarded: Vec<usize> = local.into_iter().map(|i| idx[i]).collect();
    discarded.sort_unstable();
    Ok(TolerantDistance {
        bounds: b,
        discarded,
    })
}

/// Optimal discard search over points carrying an interval `[low, high]`.
///
/// Discarding a set `S` leaves bounds `mu' = min low`, `lambda' = max high`
/// over the kept points. Any optimal `S` can be taken to consist of the `j`
/// points with the smallest `low` followed by the `k - j` points with the
/// largest `high` among the rest, for some `j` in `0..=k`. Only the `k + 1`
/// extreme points on each side are ever inspected, so they are selected
/// instead of sorting the whole window.
///
/// Ties order by point index, which makes the reported discard set
/// deterministic.
#[derive(Debug, Default)]
pub(crate) struct TolerantSearch {
    by_low: Vec<usize>,
    by_high: Vec<usize>,
    low_rank: Vec<usize>,
    high_rank: Vec<usize>,
}

struct Best {
    bounds: ProbeBounds,
    j: usize,
    taken: usize,
}

impl TolerantSearch {
    /// Best bounds after discarding at most `k` of the `low.len()` points.
    pub(crate) fn run(&mut self, low: &[f64], high: &[f64], k: usize) -> Result<ProbeBounds> {
        self.search(low, high, k).map(|b| b.bounds)
    }

    pub(crate) fn run_with_discards(
        &mut self,
        low: &[f64],
        high: &[f64],
        k: usize,
    ) -> Result<(ProbeBounds, Vec<usize>)> {
        let best = self.search(low, high, k)?;
        let n = low.len();
        if k == 0 {
            return Ok((best.bounds, Vec::new()));
        }
        // Rebuild the rank tables for the winning split.
        self.prepare(low, high, k);
        let mut discarded: Vec<usize> = self.by_low[..best.j].to_vec();
        discarded.extend(
            self.by_high[..best.taken]
                .iter()
                .copied()
                .filter(|&e| self.low_rank[e] >= best.j),
        );
        self.reset_ranks();
        debug_assert!(discarded.len() <= k && discarded.len() < n);
        Ok((best.bounds, discarded))
    }

    fn search(&mut self, low: &[f64], high: &[f64], k: usize) -> Result<Best> {
        let n = low.len();
        if n == 0 || high.len() != n {
            return Err(Error::usage("tolerance search needs a nonempty point set"));
        }
        if k >= n {
            return Err(Error::usage(format!(
                "tolerance would discard {k} of {n} points; at least one must be kept"
            )));
        }
        if k == 0 {
            let mut b = ProbeBounds::empty();
            for (&l, &h) in low.iter().zip(high) {
                b.include(l, h);
            }
            return Ok(Best {
                bounds: b,
                j: 0,
                taken: 0,
            });
        }
        self.prepare(low, high, k);
        let mut best: Option<Best> = None;
        for j in 0..=k {
            // Drop the k - j largest `high` among points outside the j lowest.
            let mut taken = 0;
            let mut dropped = 0;
            let mut lambda = f64::NEG_INFINITY;
            for (pos, &e) in self.by_high.iter().enumerate() {
                if self.low_rank[e] < j {
                    continue;
                }
                if dropped < k - j {
                    dropped += 1;
                    taken = pos + 1;
                } else {
                    lambda = high[e];
                    break;
                }
            }
            let mut mu = f64::INFINITY;
            for &e in &self.by_low[j..] {
                if self.high_rank[e] < taken {
                    continue;
                }
                mu = low[e];
                break;
            }
            let bounds = ProbeBounds { mu, lambda };
            let better = match &best {
                None => true,
                Some(b) => bounds.distance() < b.bounds.distance(),
            };
            if better {
                best = Some(Best { bounds, j, taken });
            }
        }
        self.reset_ranks();
        Ok(best.expect("k >= 1 yields at least one split"))
    }

    /// Selects the `k + 1` lowest and highest points, sorted, and records
    /// their ranks. Unselected points keep rank `usize::MAX`.
    fn prepare(&mut self, low: &[f64], high: &[f64], k: usize) {
        let n = low.len();
        let m = (k + 1).min(n);
        let by_low = |a: &usize, b: &usize| low[*a].total_cmp(&low[*b]).then(a.cmp(b));
        let by_high = |a: &usize, b: &usize| high[*b].total_cmp(&high[*a]).then(a.cmp(b));
        select_sorted(&mut self.by_low, n, m, by_low);
        select_sorted(&mut self.by_high, n, m, by_high);
        if self.low_rank.len() < n {
            self.low_rank.resize(n, usize::MAX);
            self.high_rank.resize(n, usize::MAX);
        }
        for (r, &e) in self.by_low.iter().enumerate() {
            self.low_rank[e] = r;
        }
        for (r, &e) in self.by_high.iter().enumerate() {
            self.high_rank[e] = r;
        }
    }

    fn reset_ranks(&mut self) {
        for &e in &self.by_low {
            self.low_rank[e] = usize::MAX;
        }
        for &e in &self.by_high {
            self.high_rank[e] = usize::MAX;
        }
    }
}

/// Fills `out` with the first `m` of `0..n` under `cmp`, in order.
fn select_sorted(out: &mut Vec<usize>, n: usize, m: usize, cmp: impl Fn(&usize, &usize) -> Ordering) {
    out.clear();
    out.extend(0..n);
    if m < n {
        out.select_nth_unstable_by(m - 1, &cmp);
        out.truncate(m);
    }
    out.sort_unstable_by(cmp);
}
