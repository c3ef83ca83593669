//! Adverse-condition simulations: dark, over-exposed, fog, and dark & rainy,
//! plus the identity augment used for the clean-image ablation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageU8;
use crate::scalar::{quantize, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentKind {
    Identity,
    Dark,
    #[serde(rename = "overexpose")]
    OverExposed,
    Fog,
    DarkRainy,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 5] = [
        AugmentKind::Identity,
        AugmentKind::Dark,
        AugmentKind::OverExposed,
        AugmentKind::Fog,
        AugmentKind::DarkRainy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentKind::Identity => "identity",
            AugmentKind::Dark => "dark",
            AugmentKind::OverExposed => "overexpose",
            AugmentKind::Fog => "fog",
            AugmentKind::DarkRainy => "dark-rainy",
        }
    }

    pub fn apply(self, img: &ImageU8) -> ImageU8 {
        match self {
            AugmentKind::Identity => augment_identity(img),
            AugmentKind::Dark => augment_dark(img),
            AugmentKind::OverExposed => augment_overexpose(img),
            AugmentKind::Fog => augment_fog(img),
            AugmentKind::DarkRainy => augment_dark_rainy(img),
        }
    }
}

impl fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AugmentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown augment `{s}`")))
    }
}

/// Unbounded intermediate subpixel values of one image, same layout as the
/// source [`ImageU8`].
#[derive(Clone, Debug, PartialEq)]
pub struct IntermediateImage<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Real> IntermediateImage<T> {
    pub fn from_image(img: &ImageU8, f: impl Fn(T) -> T) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.data().iter().map(|&v| f(T::lit(v as f64))).collect(),
        }
    }
}

/// Maximum over every subpixel of every pixel (one scalar, not per channel).
pub fn image_max<T: Real>(img: &IntermediateImage<T>) -> Result<T> {
    img.data.iter().copied().reduce(T::max).ok_or(Error::EmptyInput)
}

pub fn augment_identity(img: &ImageU8) -> ImageU8 {
    img.clone()
}

/// `y = floor(x / 8)`.
pub fn augment_dark(img: &ImageU8) -> ImageU8 {
    img.map_subpixels(|x| x / 8)
}

/// `y = min(255, 2x)`.
pub fn augment_overexpose(img: &ImageU8) -> ImageU8 {
    img.map_subpixels(|x| (x as u16 * 2).min(255) as u8)
}

const LIFT_FOG: f64 = 255.0 * 10.0;
const LIFT_RAIN: f64 = 255.0 * 2.0;
/// Integer levels strictly above 255 × 0.75.
const RAIN_KEEP_LEVEL: u8 = 192;

/// Lift every subpixel by 2550 and rescale so the image maximum maps to 255.
pub fn augment_fog(img: &ImageU8) -> ImageU8 {
    fog_with::<f64>(img)
}

pub fn fog_with<T: Real>(img: &ImageU8) -> ImageU8 {
    let lifted = IntermediateImage::<T>::from_image(img, |x| x + T::lit(LIFT_FOG));
    let max = image_max(&lifted).expect("ImageU8 is never empty");
    let full = T::lit(255.0);
    let data = lifted.data.iter().map(|&v| quantize(v * full / max)).collect();
    ImageU8::new(img.width(), img.height(), data).expect("same shape as input")
}

/// Invert, lift by 510, normalize by the image maximum, invert back; pixels
/// whose original has any subpixel >= 192 are kept as-is.
pub fn augment_dark_rainy(img: &ImageU8) -> ImageU8 {
    dark_rainy_with::<f64>(img)
}

pub fn dark_rainy_with<T: Real>(img: &ImageU8) -> ImageU8 {
    let full = T::lit(255.0);
    let inverted = IntermediateImage::<T>::from_image(img, |x| (full - x) + T::lit(LIFT_RAIN));
    let max = image_max(&inverted).expect("ImageU8 is never empty");
    let mut data = Vec::with_capacity(img.data().len());
    for (orig, inter) in img.data().chunks_exact(3).zip(inverted.data.chunks_exact(3)) {
        if orig.iter().any(|&x| x >= RAIN_KEEP_LEVEL) {
            data.extend_from_slice(orig);
        } else {
            data.extend(inter.iter().map(|&v| quantize(full - v * full / max)));
        }
    }
    ImageU8::new(img.width(), img.height(), data).expect("same shape as input")
}
