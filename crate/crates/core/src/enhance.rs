//! Histogram equalization on the HSV value channel and single-scale Retinex
//! with a Gaussian surround.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{channel_histogram, hsv_to_rgb, rgb_to_hsv, Histogram256, HsvPixel, ImageU8};
use crate::scalar::{quantize, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnhanceKind {
    None,
    He,
    Rx,
}

impl EnhanceKind {
    pub const ALL: [EnhanceKind; 3] = [EnhanceKind::None, EnhanceKind::He, EnhanceKind::Rx];

    pub fn name(self) -> &'static str {
        match self {
            EnhanceKind::None => "none",
            EnhanceKind::He => "he",
            EnhanceKind::Rx => "rx",
        }
    }
}

impl fmt::Display for EnhanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnhanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnhanceKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown enhancement `{s}`")))
    }
}

/// Single-scale Retinex configuration. `sigma` is the Gaussian surround scale
/// in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsrConfig<T = f64> {
    sigma: T,
}

impl<T: Real> SsrConfig<T> {
    pub const DEFAULT_SIGMA: f64 = 100.0;

    pub fn new(sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma:?}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }
}

impl<T: Real> Default for SsrConfig<T> {
    fn default() -> Self {
        Self {
            sigma: T::lit(Self::DEFAULT_SIGMA),
        }
    }
}

// ---------------------------------------------------------------------------
// Histogram equalization

/// Level remapping table; monotone non-decreasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualizationLut {
    map: [u8; 256],
}

impl EqualizationLut {
    pub fn identity() -> Self {
        let mut map = [0u8; 256];
        for (i, m) in map.iter_mut().enumerate() {
            *m = i as u8;
        }
        Self { map }
    }

    pub fn map(&self) -> &[u8; 256] {
        &self.map
    }

    #[inline]
    pub fn apply(&self, level: u8) -> u8 {
        self.map[level as usize]
    }
}

/// Classical cdf_min-normalized equalization:
/// `map[i] = round((cdf(i) - cdf_min) / (total - cdf_min) * 255)`, computed in
/// exact integer arithmetic. A single occupied level yields the identity.
pub fn build_equalization_lut(h: &Histogram256) -> EqualizationLut {
    let cdf = h.cumulative();
    let total = h.total();
    let lowest = h.lowest_occupied().expect("histogram total is positive");
    let cdf_min = cdf[lowest as usize];
    if total == cdf_min {
        return EqualizationLut::identity();
    }
    let den = (total - cdf_min) as u128;
    let mut map = [0u8; 256];
    for (m, &c) in map.iter_mut().zip(&cdf) {
        let num = c.saturating_sub(cdf_min) as u128 * 255;
        *m = ((2 * num + den) / (2 * den)) as u8;
    }
    EqualizationLut { map }
}

/// Planar HSV form of an image.
#[derive(Clone, Debug, PartialEq)]
pub struct HsvImage<T = f64> {
    pub width: usize,
    pub height: usize,
    pub hue: Vec<T>,
    pub saturation: Vec<T>,
    pub value: Vec<u8>,
}

impl<T: Real> HsvImage<T> {
    pub fn from_rgb(img: &ImageU8) -> Self {
        let n = img.pixel_count();
        let mut hue = Vec::with_capacity(n);
        let mut saturation = Vec::with_capacity(n);
        let mut value = Vec::with_capacity(n);
        for p in img.pixels() {
            let hsv = rgb_to_hsv::<T>(p);
            hue.push(hsv.h);
            saturation.push(hsv.s);
            value.push(hsv.v);
        }
        Self {
            width: img.width(),
            height: img.height(),
            hue,
            saturation,
            value,
        }
    }

    pub fn to_rgb(&self) -> ImageU8 {
        let mut data = Vec::with_capacity(self.value.len() * 3);
        for ((&h, &s), &v) in self.hue.iter().zip(&self.saturation).zip(&self.value) {
            data.extend_from_slice(&hsv_to_rgb(HsvPixel { h, s, v }));
        }
        ImageU8::new(self.width, self.height, data).expect("planes share one shape")
    }

    /// Equalize the value plane; hue and saturation are carried over untouched.
    pub fn equalize_value(&self) -> Self {
        let hist = channel_histogram(&self.value).expect("image is non-empty");
        let lut = build_equalization_lut(&hist);
        Self {
            width: self.width,
            height: self.height,
            hue: self.hue.clone(),
            saturation: self.saturation.clone(),
            value: self.value.iter().map(|&v| lut.apply(v)).collect(),
        }
    }
}

pub fn enhance_he(img: &ImageU8) -> ImageU8 {
    HsvImage::<f64>::from_rgb(img).equalize_value().to_rgb()
}

// ---------------------------------------------------------------------------
// Gaussian surround

/// Real-valued single-channel plane, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T = f64> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Real> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimension { width, height });
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "plane data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_channel(img: &ImageU8, c: usize) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.channel(c).into_iter().map(|v| T::lit(v as f64)).collect(),
        }
    }

    fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.data[y * self.width + x]);
            }
        }
        Self {
            width: self.height,
            height: self.width,
            data,
        }
    }
}

pub fn kernel_radius<T: Real>(sigma: T) -> usize {
    (T::lit(3.0) * sigma).ceil().to_usize().unwrap_or(0)
}

/// Normalized 1-D Gaussian weights `exp(-i²/2σ²)` for `i` in `-r..=r`,
/// `r = ceil(3σ)`.
pub fn gaussian_kernel<T: Real>(sigma: T) -> Result<Vec<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma:?}"
        )));
    }
    let r = kernel_radius(sigma) as isize;
    let two_var = T::lit(2.0) * sigma * sigma;
    let raw: Vec<T> = (-r..=r)
        .map(|i| {
            let d = T::lit(i as f64);
            (-(d * d) / two_var).exp()
        })
        .collect();
    let sum: T = raw.iter().copied().sum();
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

/// Mirror an out-of-range index back into `0..n` without repeating the edge
/// sample (`... 2 1 | 0 1 2 ... n-1 | n-2 ...`).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// 1-D reflected convolution over lines of one fixed length.
enum LineFilter<T> {
    /// Kernel shorter than the line: slide it, reflecting only near borders.
    Direct { kernel: Vec<T>, radius: usize },
    /// Kernel wider than the line: reflections folded into a dense
    /// `n × n` weight matrix, so each output costs `n` instead of `2r + 1`.
    Folded { weights: Vec<T>, n: usize },
}

impl<T: Real> LineFilter<T> {
    fn new(kernel: &[T], n: usize) -> Self {
        let radius = kernel.len() / 2;
        if kernel.len() <= n {
            return LineFilter::Direct {
                kernel: kernel.to_vec(),
                radius,
            };
        }
        let mut weights = vec![T::zero(); n * n];
        for o in 0..n {
            for (k, &w) in kernel.iter().enumerate() {
                let s = reflect_index(o as isize + k as isize - radius as isize, n);
                weights[o * n + s] = weights[o * n + s] + w;
            }
        }
        LineFilter::Folded { weights, n }
    }

    // Accumulates offsets from the center sample so that a constant line is
    // returned exactly.
    fn run(&self, line: &[T], out: &mut [T]) {
        match self {
            LineFilter::Direct { kernel, radius } => {
                let n = line.len();
                let r = *radius as isize;
                for (o, dst) in out.iter_mut().enumerate() {
                    let center = line[o];
                    let mut acc = T::zero();
                    let oi = o as isize;
                    if oi >= r && oi + r < n as isize {
                        let window = &line[o - *radius..=o + *radius];
                        for (&w, &x) in kernel.iter().zip(window) {
                            acc = acc + w * (x - center);
                        }
                    } else {
                        for (k, &w) in kernel.iter().enumerate() {
                            let x = line[reflect_index(oi + k as isize - r, n)];
                            acc = acc + w * (x - center);
                        }
                    }
                    *dst = center + acc;
                }
            }
            LineFilter::Folded { weights, n } => {
                for (o, dst) in out.iter_mut().enumerate() {
                    let center = line[o];
                    let row = &weights[o * n..(o + 1) * n];
                    let acc = row.iter().zip(line).fold(T::zero(), |a, (&w, &x)| a + w * (x - center));
                    *dst = center + acc;
                }
            }
        }
    }
}

fn blur_rows<T: Real>(plane: &Plane<T>, kernel: &[T]) -> Plane<T> {
    let filter = LineFilter::new(kernel, plane.width);
    let mut data = vec![T::zero(); plane.data.len()];
    for (src, dst) in plane
        .data
        .chunks_exact(plane.width)
        .zip(data.chunks_exact_mut(plane.width))
    {
        filter.run(src, dst);
    }
    Plane {
        width: plane.width,
        height: plane.height,
        data,
    }
}

/// Separable Gaussian blur: horizontal pass then vertical pass, reflected
/// borders, radius `ceil(3σ)`.
pub fn gaussian_blur<T: Real>(plane: &Plane<T>, sigma: T) -> Result<Plane<T>> {
    if plane.data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let kernel = gaussian_kernel(sigma)?;
    let horizontal = blur_rows(plane, &kernel);
    Ok(blur_rows(&horizontal.transpose(), &kernel).transpose())
}

// ---------------------------------------------------------------------------
// Single-scale Retinex

/// Output level of a channel whose reflectance is constant.
pub const SSR_FLAT_LEVEL: u8 = 127;

/// Log-domain reflectance `ln(I + 1) - ln(blur(I) + 1)` of one channel.
pub fn ssr_reflectance<T: Real>(channel: &Plane<T>, sigma: T) -> Result<Plane<T>> {
    let surround = gaussian_blur(channel, sigma)?;
    let data = channel
        .data
        .iter()
        .zip(&surround.data)
        .map(|(&i, &b)| (i + T::one()).ln() - (b + T::one()).ln())
        .collect();
    Ok(Plane {
        width: channel.width,
        height: channel.height,
        data,
    })
}

/// Min-max stretch of reflectance to the full level range.
pub fn stretch_to_levels<T: Real>(r: &Plane<T>) -> Vec<u8> {
    let (lo, hi) = r.data.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(hi > lo) {
        return vec![SSR_FLAT_LEVEL; r.data.len()];
    }
    let range = hi - lo;
    let full = T::lit(255.0);
    r.data.iter().map(|&v| quantize((v - lo) / range * full)).collect()
}

pub fn enhance_ssr(img: &ImageU8, cfg: &SsrConfig) -> ImageU8 {
    enhance_ssr_with::<f64>(img, cfg)
}

pub fn enhance_ssr_with<T: Real>(img: &ImageU8, cfg: &SsrConfig<T>) -> ImageU8 {
    let channels: Vec<Vec<u8>> = (0..3)
        .into_par_iter()
        .map(|c| {
            let plane = Plane::<T>::from_channel(img, c);
            let r = ssr_reflectance(&plane, cfg.sigma()).expect("validated sigma, non-empty plane");
            stretch_to_levels(&r)
        })
        .collect();
    let mut data = Vec::with_capacity(img.data().len());
    for ((r, g), b) in channels[0].iter().zip(&channels[1]).zip(&channels[2]) {
        data.extend([*r, *g, *b]);
    }
    ImageU8::new(img.width(), img.height(), data).expect("same shape as input")
}

pub fn apply_enhancement(img: &ImageU8, kind: EnhanceKind, cfg: &SsrConfig) -> ImageU8 {
    match kind {
        EnhanceKind::None => img.clone(),
        EnhanceKind::He => enhance_he(img),
        EnhanceKind::Rx => enhance_ssr(img, cfg),
    }
}
