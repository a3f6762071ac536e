//! File formats.
//!
//! Images are 8-bit binary PGM (`P5`, one channel), PPM (`P6`, three
//! channels) or PNG (8-bit grey or RGB). Files hold classic intensities
//! (0 = black); they are mapped to the LIP scale with `v = (M - 1) - c` on
//! load and back on save, so 8-bit data round-trips exactly.
//!
//! Distance maps are single-channel PFM files (`Pf`, 32-bit floats, scale
//! `-1.0` for little-endian, rows stored bottom to top). Invalid pixels are
//! written as `+inf`.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::lip::GrayScale;
use crate::matching::MatchSet;
use crate::probe_map::DistanceMap;
use std::fs;
use std::io::Write;
use std::path::Path;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ImageFormat {
    Pgm,
    Ppm,
    Png,
}

fn format_from_extension(path: &Path, channels: usize) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" => Ok(ImageFormat::Pgm),
        "ppm" => Ok(ImageFormat::Ppm),
        "pnm" if channels == 1 => Ok(ImageFormat::Pgm),
        "pnm" => Ok(ImageFormat::Ppm),
        "png" => Ok(ImageFormat::Png),
        other => Err(Error::format(
            "image",
            format!("unsupported file extension {other:?}; use pgm, ppm, pnm or png"),
        )),
    }
}

/// Loads an 8-bit image and maps it onto the LIP scale of `scale`.
pub fn load_image(path: impl AsRef<Path>, scale: GrayScale) -> Result<Image> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let (width, height, channels, samples) = if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes)?
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)?
    } else if bytes.starts_with(b"Pf") || bytes.starts_with(b"PF") {
        return Err(Error::format("PFM", "float maps are not images; use load_map"));
    } else {
        return Err(Error::format("image", "unrecognised file signature"));
    };
    let data = samples
        .into_iter()
        .map(|c| scale.invert(c as f64))
        .collect::<Result<Vec<_>>>()?;
    Image::new(width, height, channels, data, scale)
}

/// Saves an image as 8-bit classic intensities, quantizing to the nearest
/// level. The format follows the extension (`pgm`, `ppm`, `pnm`, `png`).
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = format_from_extension(path, image.channels())?;
    let ch = image.channels();
    let wanted = match format {
        ImageFormat::Pgm => ch == 1,
        ImageFormat::Ppm => ch == 3,
        ImageFormat::Png => ch == 1 || ch == 3,
    };
    if !wanted {
        return Err(Error::format(
            match format {
                ImageFormat::Pgm => "PGM",
                ImageFormat::Ppm => "PPM",
                ImageFormat::Png => "PNG",
            },
            format!("cannot store a {ch}-channel image"),
        ));
    }
    let top = image.scale().m() - 1.0;
    let samples: Vec<u8> = image
        .data()
        .iter()
        .map(|&v| (top - v).round().clamp(0.0, 255.0) as u8)
        .collect();
    let (w, h) = (image.width(), image.height());
    match format {
        ImageFormat::Pgm | ImageFormat::Ppm => {
            let magic = if ch == 1 { "P5" } else { "P6" };
            let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
            out.extend_from_slice(&samples);
            write(path, &out)
        }
        ImageFormat::Png => write_png(path, &samples, w, h, ch),
    }
}

fn write_png(path: &Path, samples: &[u8], w: usize, h: usize, ch: usize) -> Result<()> {
    let colour = if ch == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    image::save_buffer_with_format(path, samples, w as u32, h as u32, colour, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => Error::format("PNG", other.to_string()),
        })
}

/// Parses the whitespace/comment separated header fields of a netpbm file.
struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn token(&mut self, format: &'static str) -> Result<&'a str> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(Error::format(format, "truncated header")),
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(format, "non-ASCII header"))
    }

    fn number<T: std::str::FromStr>(&mut self, format: &'static str, what: &str) -> Result<T> {
        let tok = self.token(format)?;
        tok.parse()
            .map_err(|_| Error::format(format, format!("bad {what} {tok:?}")))
    }

    /// Skips the single whitespace byte that ends a header.
    fn end_of_header(&mut self, format: &'static str) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::format(format, "missing whitespace after header")),
        }
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let (format, channels) = if bytes.starts_with(b"P5") { ("PGM", 1) } else { ("PPM", 3) };
    let mut r = HeaderReader { bytes, pos: 2 };
    let width: usize = r.number(format, "width")?;
    let height: usize = r.number(format, "height")?;
    let maxval: u32 = r.number(format, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(format, format!("bad maxval {maxval}")));
    }
    if maxval > 255 {
        return Err(Error::format(format, "16-bit samples are not supported"));
    }
    let start = r.end_of_header(format)?;
    let n = width * height * channels;
    let body = bytes
        .get(start..start + n)
        .ok_or_else(|| Error::format(format, format!("expected {n} samples, file is truncated")))?;
    if width == 0 || height == 0 {
        return Err(Error::format(format, "empty image"));
    }
    let samples = if maxval == 255 {
        body.to_vec()
    } else {
        // Rescale reduced ranges to 0..=255.
        body.iter()
            .map(|&b| ((b as u32 * 255 + maxval / 2) / maxval).min(255) as u8)
            .collect()
    };
    Ok((width, height, channels, samples))
}

fn decode_png(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::format("PNG", e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageLuma8(buf) => Ok((w, h, 1, buf.into_raw())),
        image::DynamicImage::ImageRgb8(buf) => Ok((w, h, 3, buf.into_raw())),
        other => {
            let colour = other.color();
            let msg = if colour.bytes_per_pixel() / colour.channel_count() > 1 {
                format!("16-bit PNG ({colour:?}) is not supported")
            } else {
                format!("colour type {colour:?} is not supported; use 8-bit grey or RGB")
            };
            Err(Error::format("PNG", msg))
        }
    }
}

/// Encodes a map as single-channel little-endian PFM.
pub fn encode_pfm(map: &DistanceMap) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&(map.get(x, y) as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DistanceMap> {
    const F: &str = "PFM";
    if bytes.starts_with(b"PF") {
        return Err(Error::format(F, "three-channel PFM cannot hold a distance map"));
    }
    if !bytes.starts_with(b"Pf") {
        return Err(Error::format(F, "missing Pf signature"));
    }
    let mut r = HeaderReader { bytes, pos: 2 };
    let width: usize = r.number(F, "width")?;
    let height: usize = r.number(F, "height")?;
    let scale: f64 = r.number(F, "scale")?;
    if width == 0 || height == 0 {
        return Err(Error::format(F, "empty map"));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(F, format!("bad scale {scale}")));
    }
    let start = r.end_of_header(F)?;
    let n = width * height;
    let body = bytes
        .get(start..start + 4 * n)
        .ok_or_else(|| Error::format(F, format!("expected {n} floats, file is truncated")))?;
    let mut values = vec![0.0; n];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if scale < 0.0 { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (x, row) = (i % width, i / width);
        values[(height - 1 - row) * width + x] = v as f64;
    }
    DistanceMap::new(width, height, values)
}

pub fn save_map(map: &DistanceMap, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_pfm(map))
}

pub fn load_map(path: impl AsRef<Path>) -> Result<DistanceMap> {
    decode_pfm(&read(path.as_ref())?)
}

/// 8-bit rendering of a map: valid values stretched from black (minimum) to
/// white (maximum); invalid pixels black.
pub fn map_preview(map: &DistanceMap) -> Vec<u8> {
    let Some((lo, hi)) = map.valid_range() else {
        return vec![0; map.width() * map.height()];
    };
    let span = hi - lo;
    map.values()
        .iter()
        .map(|&v| {
            if !v.is_finite() || span <= 0.0 {
                0
            } else {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect()
}

/// Writes [`map_preview`] as a grey PNG.
pub fn save_map_preview(map: &DistanceMap, path: impl AsRef<Path>) -> Result<()> {
    write_png(path.as_ref(), &map_preview(map), map.width(), map.height(), 1)
}

pub fn save_matches(matches: &MatchSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(matches.to_text().as_bytes()).map_err(io_err(path))
}

pub fn load_matches(path: impl AsRef<Path>) -> Result<MatchSet> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(io_err(path))?.parse()
}
