//! Multichannel images on the inverted grey scale, and pixel regions.

use crate::error::{Error, Result};
use crate::lip::GrayScale;

/// An `L`-channel image over a rectangular domain.
///
/// Values are stored row-major, pixel-interleaved, as `f64` on the LIP
/// (inverted) scale: 0 is white. A grey-scale image is the `L = 1` case and a
/// colour image the `L = 3` case with channels in R, G, B order.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    scale: GrayScale,
}

impl Image {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
        scale: GrayScale,
    ) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::usage(format!(
                "image dimensions must be positive, got {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::usage(format!(
                "expected {} samples for a {width}x{height}x{channels} image, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !scale.contains(**v)) {
            return Err(Error::domain(format!(
                "grey value {bad} outside [0, {})",
                scale.m()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
            scale,
        })
    }

    /// Grey-scale image from row-major values.
    pub fn gray(width: usize, height: usize, data: Vec<f64>, scale: GrayScale) -> Result<Self> {
        Self::new(width, height, 1, data, scale)
    }

    /// Image with every pixel set to `pixel`.
    pub fn constant(width: usize, height: usize, pixel: &[f64], scale: GrayScale) -> Result<Self> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width * height * pixel.len())
            .collect();
        Self::new(width, height, pixel.len(), data, scale)
    }

    /// Builds an image from `f(x, y, channel)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        scale: GrayScale,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data, scale)
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
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn scale(&self) -> GrayScale {
        self.scale
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// The `L` channel values of pixel `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Channel values of the pixel with row-major index `index`.
    #[inline]
    pub fn pixel_at(&self, index: usize) -> &[f64] {
        let i = index * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Sets one sample. Values outside `[0, M)` are rejected.
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) -> Result<()> {
        let v = self.scale.check(v)?;
        self.data[(y * self.width + x) * self.channels + c] = v;
        Ok(())
    }

    /// Copy of the `w x h` sub-image whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Image> {
        let rect = Rect::new(x, y, w, h)?;
        if !rect.fits(self.width, self.height) {
            return Err(Error::usage(format!(
                "crop {w}x{h}+{x}+{y} exceeds {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for row in y..y + h {
            let start = (row * self.width + x) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Ok(Image {
            width: w,
            height: h,
            channels: self.channels,
            data,
            scale: self.scale,
        })
    }

    /// Single-channel image holding channel `c`.
    pub fn channel(&self, c: usize) -> Result<Image> {
        if c >= self.channels {
            return Err(Error::usage(format!(
                "channel {c} requested from a {}-channel image",
                self.channels
            )));
        }
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Ok(Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
            scale: self.scale,
        })
    }

    /// Applies `f(x, y, value)` to every sample, validating the result.
    pub fn map_samples(&self, mut f: impl FnMut(usize, usize, f64) -> Result<f64>) -> Result<Image> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, &v) in self.data.iter().enumerate() {
            let p = i / self.channels;
            data.push(f(p % self.width, p / self.width, v)?);
        }
        Image::new(self.width, self.height, self.channels, data, self.scale)
    }

    /// Same samples interpreted on another scale.
    pub fn with_scale(self, scale: GrayScale) -> Result<Image> {
        Image::new(self.width, self.height, self.channels, self.data, scale)
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Axis-aligned rectangle `w x h` with top-left corner `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::usage(format!("empty rectangle {width}x{height}")));
        }
        Ok(Rect {
            x,
            y,
            width,
            height,
        })
    }

    /// `true` when the rectangle lies inside a `width x height` domain.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x + self.width <= width && self.y + self.height <= height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.width && y < self.y + self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

/// A set of pixels shared by the two images being compared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Region {
    /// The whole domain.
    Full,
    Rect(Rect),
    /// Explicit `(x, y)` coordinates. Duplicates are ignored.
    Points(Vec<(usize, usize)>),
}

impl Region {
    /// Row-major pixel indices of the region inside a `width x height`
    /// domain, sorted and deduplicated.
    pub fn indices(&self, width: usize, height: usize) -> Result<Vec<usize>> {
        let idx = match self {
            Region::Full => (0..width * height).collect::<Vec<_>>(),
            Region::Rect(r) => {
                if !r.fits(width, height) {
                    return Err(Error::usage(format!(
                        "region {}x{}+{}+{} exceeds {width}x{height} domain",
                        r.width, r.height, r.x, r.y
                    )));
                }
                (r.y..r.y + r.height)
                    .flat_map(|y| (r.x..r.x + r.width).map(move |x| y * width + x))
                    .collect()
            }
            Region::Points(points) => {
                let mut idx = Vec::with_capacity(points.len());
                for &(x, y) in points {
                    if x >= width || y >= height {
                        return Err(Error::usage(format!(
                            "region point ({x}, {y}) outside {width}x{height} domain"
                        )));
                    }
                    idx.push(y * width + x);
                }
                idx.sort_unstable();
                idx.dedup();
                idx
            }
        };
        if idx.is_empty() {
            return Err(Error::usage("region is empty"));
        }
        Ok(idx)
    }
}

impl From<Rect> for Region {
    fn from(r: Rect) -> Self {
        Region::Rect(r)
    }
}
