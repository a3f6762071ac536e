//! Bounded grey-scale arithmetic of the logarithmic image processing model.
//!
//! Grey levels live on the inverted scale `[0, M)`: `0` is the source
//! intensity (nothing between source and sensor) and `M` is the excluded
//! limit where no light gets through. Every operation here goes through the
//! transmittance `T(v) = 1 - v / M`, which is multiplicative under
//! superposition of obstacles:
//!
//! ```text
//! a (+) b    = a + b - a b / M               T(a (+) b)    = T(a) T(b)
//! k (x) a    = M - M (1 - a / M)^k           T(k (x) a)    = T(a)^k
//! ```
//!
//! Taking `-ln T` turns both into ordinary arithmetic, which is what
//! [`GrayScale::log`] and [`GrayScale::ratio`] exploit.

use crate::error::{Error, Result};

/// Parameters of a bounded grey scale.
///
/// `m` is the excluded upper bound. `v_min` and `v_max` bound the values fed
/// to the logarithm so that every log-ratio stays finite: a grey level of
/// exactly 0 would make the logarithm vanish and the probing scalars blow up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayScale {
    m: f64,
    v_min: f64,
    v_max: f64,
}

impl Default for GrayScale {
    fn default() -> Self {
        GrayScale {
            m: 256.0,
            v_min: 1.0,
            v_max: 255.0,
        }
    }
}

impl GrayScale {
    /// Scale `[0, m)` with the default clamp `[1, m - 1]`.
    pub fn new(m: f64) -> Result<Self> {
        Self::with_clamp(m, 1.0, m - 1.0)
    }

    pub fn with_clamp(m: f64, v_min: f64, v_max: f64) -> Result<Self> {
        if !(m.is_finite() && m > 1.0) {
            return Err(Error::domain(format!("grey-scale bound M must be > 1, got {m}")));
        }
        if !(v_min > 0.0 && v_min <= v_max && v_max < m) {
            return Err(Error::domain(format!(
                "clamp interval must satisfy 0 < v_min <= v_max < M, got [{v_min}, {v_max}] with M = {m}"
            )));
        }
        Ok(GrayScale { m, v_min, v_max })
    }

    /// Replaces the clamp floor, keeping the ceiling.
    pub fn with_v_min(self, v_min: f64) -> Result<Self> {
        Self::with_clamp(self.m, v_min, self.v_max)
    }

    #[inline]
    pub fn m(&self) -> f64 {
        self.m
    }

    #[inline]
    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    #[inline]
    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// `true` when `v` lies in `[0, M)`.
    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        (0.0..self.m).contains(&v)
    }

    pub fn check(&self, v: f64) -> Result<f64> {
        if self.contains(v) {
            Ok(v)
        } else {
            Err(Error::domain(format!("grey value {v} outside [0, {})", self.m)))
        }
    }

    /// `1 - v / M`, the fraction of source light passing through `v`.
    pub fn transmittance(&self, v: f64) -> Result<f64> {
        Ok(1.0 - self.check(v)? / self.m)
    }

    /// Grey level whose transmittance is `t`. Inverse of [`transmittance`].
    ///
    /// [`transmittance`]: GrayScale::transmittance
    #[inline]
    pub fn from_transmittance(&self, t: f64) -> f64 {
        self.m * (1.0 - t)
    }

    /// Logarithmic addition: superposition of the two obstacles.
    pub fn add(&self, a: f64, b: f64) -> Result<f64> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        Ok(a + b - a * b / self.m)
    }

    /// Logarithmic scalar multiplication: scales the obstacle thickness by
    /// `lambda`. Darkens for `lambda > 1`, brightens for `lambda < 1`.
    pub fn mul(&self, lambda: f64, a: f64) -> Result<f64> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::domain(format!("scalar must be finite and >= 0, got {lambda}")));
        }
        let a = self.check(a)?;
        let v = self.m - self.m * (1.0 - a / self.m).powf(lambda);
        // (1 - a/M)^lambda underflows to 0 for huge thickness; stay inside [0, M).
        Ok(if v < self.m { v } else { self.m.next_down() })
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.v_min, self.v_max)
    }

    /// `-ln(1 - v / M)` after clamping `v` into `[v_min, v_max]`.
    ///
    /// Always finite and strictly positive, and `log(k (x) v) = k log(v)`
    /// whenever neither side is clamped.
    #[inline]
    pub fn log(&self, v: f64) -> f64 {
        -(-self.clamp(v) / self.m).ln_1p()
    }

    /// The scalar `k` with `k (x) probe = value`: the ratio of LIP logarithms.
    #[inline]
    pub fn ratio(&self, value: f64, probe: f64) -> f64 {
        self.log(value) / self.log(probe)
    }

    /// Maps a classic intensity (0 = black) to the inverted scale, and back:
    /// `v -> (M - 1) - v`.
    pub fn invert(&self, v: f64) -> Result<f64> {
        let v = self.check(v)?;
        Ok((self.m - 1.0 - v).max(0.0))
    }
}
