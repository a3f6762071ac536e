//! From distance maps to match locations.
//!
//! Matches are regional minima of the map: 4-connected plateaus whose valid
//! outer neighbours are all strictly higher. Shallow minima caused by noise
//! are removed with the h-minima transform, i.e. the regional minima of the
//! reconstruction by erosion of `map + h` over `map`. Invalid (border)
//! pixels never take part.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::probe_map::{DistanceMap, ProbeShape};
use std::fmt::Write as _;
use std::str::FromStr;

/// Binary image over the map domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// 4-neighbours of pixel `i` inside a `w x h` grid.
#[inline]
fn neighbours(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (y > 0).then(|| i - w),
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

/// Connected components of the regional minima of `values` (non-finite
/// entries excluded). Each component lists its pixels in ascending order;
/// components are ordered by their first pixel.
fn minima_components(values: &[f64], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; values.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..values.len() {
        if seen[start] || !values[start].is_finite() {
            continue;
        }
        let level = values[start];
        let mut component = Vec::new();
        let mut is_minimum = true;
        seen[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            component.push(p);
            for q in neighbours(p, w, h) {
                let v = values[q];
                if !v.is_finite() {
                    continue;
                }
                if v == level {
                    if !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                } else if v < level {
                    is_minimum = false;
                }
            }
        }
        if is_minimum {
            component.sort_unstable();
            out.push(component);
        }
    }
    out
}

/// Reconstruction by erosion of `marker` over `floor` (`marker >= floor`),
/// by alternating forward and backward raster scans until stable.
///
/// Non-finite pixels of `floor` are outside the domain and are left as they
/// are in `marker`.
pub fn reconstruct_by_erosion(marker: &[f64], floor: &[f64], w: usize, h: usize) -> Vec<f64> {
    assert_eq!(marker.len(), w * h);
    assert_eq!(floor.len(), w * h);
    let mut r: Vec<f64> = marker.iter().zip(floor).map(|(&m, &f)| m.max(f)).collect();
    let inside = |i: usize| floor[i].is_finite();
    loop {
        let mut changed = false;
        for i in 0..w * h {
            if !inside(i) {
                continue;
            }
            let (x, y) = (i % w, i / w);
            let mut v = r[i];
            if x > 0 && inside(i - 1) {
                v = v.min(r[i - 1]);
            }
            if y > 0 && inside(i - w) {
                v = v.min(r[i - w]);
            }
            let v = v.max(floor[i]);
            if v != r[i] {
                r[i] = v;
                changed = true;
            }
        }
        for i in (0..w * h).rev() {
            if !inside(i) {
                continue;
            }
            let (x, y) = (i % w, i / w);
            let mut v = r[i];
            if x + 1 < w && inside(i + 1) {
                v = v.min(r[i + 1]);
            }
            if y + 1 < h && inside(i + w) {
                v = v.min(r[i + w]);
            }
            let v = v.max(floor[i]);
            if v != r[i] {
                r[i] = v;
                changed = true;
            }
        }
        if !changed {
            return r;
        }
    }
}

/// Values whose regional minima are the h-minima of the map.
fn h_filtered(map: &DistanceMap, h: f64) -> Vec<f64> {
    if h == 0.0 {
        return map.values().to_vec();
    }
    let marker: Vec<f64> = map.values().iter().map(|v| v + h).collect();
    reconstruct_by_erosion(&marker, map.values(), map.width(), map.height())
}

fn check_depth(h: f64) -> Result<()> {
    if !(h.is_finite() && h >= 0.0) {
        return Err(Error::domain(format!("minimum depth h must be finite and >= 0, got {h}")));
    }
    Ok(())
}

/// Regional minima (`h = 0`) or h-minima (`h > 0`) of the map.
pub fn regional_minima(map: &DistanceMap, h: f64) -> Result<Mask> {
    check_depth(h)?;
    let (w, ht) = (map.width(), map.height());
    let values = h_filtered(map, h);
    let mut bits = vec![false; w * ht];
    for component in minima_components(&values, w, ht) {
        for p in component {
            bits[p] = true;
        }
    }
    Ok(Mask { width: w, height: ht, bits })
}

/// One detected probe position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

impl Match {
    fn chebyshev(&self, other: &Match) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

/// Knobs for [`extract_matches`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    /// Minimum depth of a retained minimum.
    pub h: f64,
    /// Largest accepted map value.
    pub score_max: f64,
    /// Kept matches are at least this far apart (Chebyshev distance).
    pub min_separation: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            h: 0.0,
            score_max: f64::INFINITY,
            min_separation: 0,
        }
    }
}

/// Matches sorted by ascending score, with the probe geometry needed to
/// draw them.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pub probe: ProbeShape,
    pub matches: Vec<Match>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Text record: a `# probe WxH anchor ax,ay` header, then one
    /// `x y score` line per match with six decimals.
    pub fn to_text(&self) -> String {
        let p = &self.probe;
        let mut s = format!(
            "# probe {}x{} anchor {},{}\n",
            p.width, p.height, p.anchor.0, p.anchor.1
        );
        for m in &self.matches {
            writeln!(s, "{} {} {:.6}", m.x, m.y, m.score).unwrap();
        }
        s
    }
}

impl FromStr for MatchSet {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::format("match list", msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let probe = parse_header(header).ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let mut matches = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [x, y, s] => x
                    .parse()
                    .ok()
                    .zip(y.parse().ok())
                    .zip(s.parse().ok())
                    .map(|((x, y), score)| Match { x, y, score }),
                _ => None,
            };
            matches.push(parsed.ok_or_else(|| bad(format!("bad match line {line:?}")))?);
        }
        Ok(MatchSet { probe, matches })
    }
}

fn parse_header(line: &str) -> Option<ProbeShape> {
    let rest = line.strip_prefix("# probe ")?;
    let (dims, anchor) = rest.split_once(" anchor ")?;
    let (w, h) = dims.split_once('x')?;
    let (ax, ay) = anchor.trim().split_once(',')?;
    Some(ProbeShape {
        width: w.parse().ok()?,
        height: h.parse().ok()?,
        anchor: (ax.parse().ok()?, ay.parse().ok()?),
    })
}

/// Extracts matches from a map: one representative per h-minimum (its
/// lowest pixel, first in row-major order on ties), kept when its score is
/// at most `score_max`, then greedily suppressed in ascending score order so
/// that kept matches are at least `min_separation` apart.
pub fn extract_matches(map: &DistanceMap, probe: ProbeShape, params: MatchParams) -> Result<MatchSet> {
    check_depth(params.h)?;
    if params.score_max.is_nan() || params.score_max < 0.0 {
        return Err(Error::domain(format!(
            "score threshold must be >= 0, got {}",
            params.score_max
        )));
    }
    let w = map.width();
    let filtered = h_filtered(map, params.h);
    let mut candidates: Vec<(usize, f64)> = minima_components(&filtered, w, map.height())
        .into_iter()
        .map(|component| {
            component
                .into_iter()
                .map(|p| (p, map.values()[p]))
                .fold((usize::MAX, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
        })
        .filter(|&(_, score)| score <= params.score_max)
        .collect();
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut matches: Vec<Match> = Vec::new();
    for (p, score) in candidates {
        let m = Match { x: p % w, y: p / w, score };
        if matches.iter().all(|k| k.chebyshev(&m) >= params.min_separation) {
            matches.push(m);
        }
    }
    Ok(MatchSet { probe, matches })
}

/// Copy of `image` with the template support of each match outlined in
/// `colour` (LIP scale; `None` draws white, i.e. 0 in every channel).
/// Parts of a rectangle falling outside the image are clipped.
pub fn overlay(image: &Image, matches: &MatchSet, colour: Option<&[f64]>) -> Result<Image> {
    let white = vec![0.0; image.channels()];
    let colour = colour.unwrap_or(&white);
    if colour.len() != image.channels() {
        return Err(Error::usage(format!(
            "overlay colour has {} channels, image has {}",
            colour.len(),
            image.channels()
        )));
    }
    for &c in colour {
        image.scale().check(c)?;
    }
    let mut out = image.clone();
    let (iw, ih, ch) = (image.width() as i64, image.height() as i64, image.channels());
    let p = matches.probe;
    for m in &matches.matches {
        let x0 = m.x as i64 - p.anchor.0 as i64;
        let y0 = m.y as i64 - p.anchor.1 as i64;
        let x1 = x0 + p.width as i64 - 1;
        let y1 = y0 + p.height as i64 - 1;
        let data = out.data_mut();
        let mut paint = |x: i64, y: i64| {
            if (0..iw).contains(&x) && (0..ih).contains(&y) {
                let i = (y as usize * iw as usize + x as usize) * ch;
                data[i..i + ch].copy_from_slice(colour);
            }
        };
        for x in x0..=x1 {
            paint(x, y0);
            paint(x, y1);
        }
        for y in y0..=y1 {
            paint(x0, y);
            paint(x1, y);
        }
    }
    Ok(out)
}
