//! Pixel foundations: the 8-bit RGB carrier, HSV conversion, level histograms,
//! bilinear resizing, and PNG/JPEG file I/O.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Rgb = [u8; 3];

/// Interleaved 3-channel 8-bit image, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ImageU8 {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageU8 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageU8")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageU8 {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimension { width, height });
        }
        if data.len() != width * height * 3 {
            return Err(Error::BufferSize {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: Rgb) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
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
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Apply `f` to every subpixel.
    pub fn map_subpixels(&self, f: impl Fn(u8) -> u8) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// One channel (0 = R, 1 = G, 2 = B) as a level sequence.
    pub fn channel(&self, c: usize) -> Vec<u8> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    pub fn mean_level(&self) -> f64 {
        let sum: u64 = self.data.iter().map(|&v| v as u64).sum();
        sum as f64 / self.data.len() as f64
    }
}

/// HSV pixel with continuous hue (degrees) and saturation and an integer value
/// level. Chroma stays unquantized so value-only edits leave it untouched.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsvPixel<T = f64> {
    pub h: T,
    pub s: T,
    pub v: u8,
}

pub fn rgb_to_hsv<T: Real>(p: Rgb) -> HsvPixel<T> {
    let [r, g, b] = p;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    if max == min {
        return HsvPixel {
            h: T::zero(),
            s: T::zero(),
            v: max,
        };
    }
    let lvl = |x: u8| T::lit(x as f64);
    let delta = lvl(max) - lvl(min);
    let sixty = T::lit(60.0);
    let h = if max == r {
        let h = sixty * ((lvl(g) - lvl(b)) / delta);
        if h < T::zero() {
            h + T::lit(360.0)
        } else {
            h
        }
    } else if max == g {
        sixty * ((lvl(b) - lvl(r)) / delta + T::lit(2.0))
    } else {
        sixty * ((lvl(r) - lvl(g)) / delta + T::lit(4.0))
    };
    HsvPixel {
        h,
        s: delta / lvl(max),
        v: max,
    }
}

pub fn hsv_to_rgb<T: Real>(p: HsvPixel<T>) -> Rgb {
    let v = T::lit(p.v as f64);
    let delta = (p.s * v).round();
    if delta <= T::zero() {
        return [p.v; 3];
    }
    let min = v - delta;
    let hh = p.h / T::lit(60.0);
    let sector = hh.floor().to_usize().unwrap_or(0).min(5);
    let f = hh - T::lit(sector as f64);
    let rising = crate::scalar::quantize(min + f * delta);
    let falling = crate::scalar::quantize(min + (T::one() - f) * delta);
    let lo = crate::scalar::quantize(min);
    let hi = p.v;
    match sector {
        0 => [hi, rising, lo],
        1 => [falling, hi, lo],
        2 => [lo, hi, rising],
        3 => [lo, falling, hi],
        4 => [rising, lo, hi],
        _ => [hi, lo, falling],
    }
}

/// 256-bin level histogram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram256 {
    bins: [u64; 256],
    total: u64,
}

impl Histogram256 {
    pub fn from_bins(bins: [u64; 256]) -> Result<Self> {
        let total: u64 = bins.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self { bins, total })
    }

    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn cumulative(&self) -> [u64; 256] {
        let mut out = [0u64; 256];
        let mut acc = 0;
        for (o, &b) in out.iter_mut().zip(&self.bins) {
            acc += b;
            *o = acc;
        }
        out
    }

    pub fn lowest_occupied(&self) -> Option<u8> {
        self.bins.iter().position(|&b| b > 0).map(|i| i as u8)
    }
}

pub fn channel_histogram(values: &[u8]) -> Result<Histogram256> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut bins = [0u64; 256];
    for &v in values {
        bins[v as usize] += 1;
    }
    Ok(Histogram256 {
        bins,
        total: values.len() as u64,
    })
}

/// Bilinear resize with half-pixel-centered sampling and edge clamping.
pub fn resize_bilinear(img: &ImageU8, out_w: usize, out_h: usize) -> Result<ImageU8> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidDimension {
            width: out_w,
            height: out_h,
        });
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }
    let xs = sample_taps(img.width, out_w);
    let ys = sample_taps(img.height, out_h);
    let src = img.data();
    let stride = img.width * 3;
    let mut data = Vec::with_capacity(out_w * out_h * 3);
    for &(y0, y1, fy) in &ys {
        let row0 = &src[y0 * stride..(y0 + 1) * stride];
        let row1 = &src[y1 * stride..(y1 + 1) * stride];
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let p00 = row0[x0 * 3 + c] as f64;
                let p01 = row0[x1 * 3 + c] as f64;
                let p10 = row1[x0 * 3 + c] as f64;
                let p11 = row1[x1 * 3 + c] as f64;
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                data.push(crate::scalar::quantize(top + (bottom - top) * fy));
            }
        }
    }
    ImageU8::new(out_w, out_h, data)
}

fn sample_taps(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    let last = (in_len - 1) as f64;
    (0..out_len)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

fn from_rgb_image(rgb: RgbImage) -> Result<ImageU8> {
    let (w, h) = rgb.dimensions();
    ImageU8::new(w as usize, h as usize, rgb.into_raw())
}

fn to_rgb_image(img: &ImageU8) -> RgbImage {
    RgbImage::from_raw(img.width as u32, img.height as u32, img.data.clone())
        .expect("buffer length checked at construction")
}

/// Decode a PNG or JPEG file; alpha and extra depth are dropped.
pub fn load_image(path: &Path) -> Result<ImageU8> {
    let dynimg = image::open(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    from_rgb_image(dynimg.to_rgb8())
}

pub fn save_png(img: &ImageU8, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    to_rgb_image(img)
        .save_with_format(path, ImageFormat::Png)
        .map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })
}

pub fn encode_png(img: &ImageU8) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    to_rgb_image(img)
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(|source| Error::Codec {
            path: "<memory>".into(),
            source,
        })?;
    Ok(buf.into_inner())
}

pub fn decode_image_bytes(bytes: &[u8]) -> Result<ImageU8> {
    let dynimg = image::load_from_memory(bytes).map_err(|source| Error::Codec {
        path: "<memory>".into(),
        source,
    })?;
    from_rgb_image(dynimg.to_rgb8())
}
