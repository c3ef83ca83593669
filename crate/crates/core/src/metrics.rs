//! Classification accuracy, COCO-style mAP 50:95, and pooled pixel statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageU8;
use crate::scalar::{Real, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub top1: f64,
    pub top5: f64,
    /// Arithmetic mean of `top1` and `top5`.
    pub combined: f64,
}

/// Score ranked class predictions against labels. Each ranking must hold at
/// least five distinct classes.
pub fn classification_score(predictions: &[Vec<usize>], labels: &[usize]) -> Result<ClassificationResult> {
    if predictions.len() != labels.len() {
        return Err(Error::InputMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut top1 = 0usize;
    let mut top5 = 0usize;
    for (i, (ranking, &label)) in predictions.iter().zip(labels).enumerate() {
        if ranking.len() < 5 {
            return Err(Error::InvalidPrediction(format!(
                "sample {i}: ranking has {} entries, need at least 5",
                ranking.len()
            )));
        }
        let head = &ranking[..5];
        if head.iter().enumerate().any(|(j, c)| head[..j].contains(c)) {
            return Err(Error::InvalidPrediction(format!(
                "sample {i}: duplicate class in top 5"
            )));
        }
        if ranking[0] == label {
            top1 += 1;
        }
        if head.contains(&label) {
            top5 += 1;
        }
    }
    let n = labels.len() as f64;
    let (top1, top5) = (top1 as f64 / n, top5 as f64 / n);
    Ok(ClassificationResult {
        top1,
        top5,
        combined: (top1 + top5) / 2.0,
    })
}

/// Axis-aligned box as `(x_min, y_min, width, height)` in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxXywh<T = f64> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> BoxXywh<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    fn has_area(&self) -> bool {
        self.w > T::zero() && self.h > T::zero()
    }
}

fn max_of<T: PartialOrd>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

fn min_of<T: PartialOrd>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

pub fn iou<T: Scalar>(a: &BoxXywh<T>, b: &BoxXywh<T>) -> Result<T> {
    for bx in [a, b] {
        if !bx.has_area() {
            return Err(Error::InvalidBox(format!("{bx:?} has non-positive area")));
        }
    }
    Ok(iou_unchecked(a, b))
}

fn iou_unchecked<T: Scalar>(a: &BoxXywh<T>, b: &BoxXywh<T>) -> T {
    let iw = min_of(a.x + a.w, b.x + b.w) - max_of(a.x, b.x);
    let ih = min_of(a.y + a.h, b.y + b.h) - max_of(a.y, b.y);
    if !(iw > T::zero() && ih > T::zero()) {
        return T::zero();
    }
    let inter = iw * ih;
    inter / (a.area() + b.area() - inter)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth<T = f64> {
    pub image: usize,
    pub class: usize,
    pub bbox: BoxXywh<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection<T = f64> {
    pub image: usize,
    pub class: usize,
    pub bbox: BoxXywh<T>,
    pub score: f64,
}

/// Number of recall samples used for interpolated precision.
pub const RECALL_SAMPLES: usize = 101;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds<T: Scalar>() -> [T; 10] {
    std::array::from_fn(|k| T::ratio(50 + 5 * k, 100))
}

/// 101-point interpolated average precision for one class.
///
/// Predictions are visited by descending confidence (stable for ties); each is
/// matched to the unmatched ground truth in the same image with the highest
/// IoU, provided that IoU reaches `iou_thr`. Returns 0 when there is no ground
/// truth.
pub fn average_precision<T: Scalar>(preds: &[Detection<T>], gts: &[GroundTruth<T>], iou_thr: T) -> T {
    if gts.is_empty() {
        return T::zero();
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));

    let mut matched = vec![false; gts.len()];
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(order.len());
    let mut recall = Vec::with_capacity(order.len());
    for (rank, &pi) in order.iter().enumerate() {
        let p = &preds[pi];
        let mut best: Option<(usize, T)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if matched[gi] || g.image != p.image {
                continue;
            }
            let v = iou_unchecked(&p.bbox, &g.bbox);
            if v >= iou_thr && best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, _)) = best {
            matched[gi] = true;
            tp += 1;
        }
        precision.push(T::ratio(tp, rank + 1));
        recall.push(T::ratio(tp, gts.len()));
    }

    // precision envelope: max precision at this rank or any later one
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = max_of(precision[k], precision[k + 1]);
    }

    let mut sum = T::zero();
    let mut k = 0;
    for j in 0..RECALL_SAMPLES {
        let r = T::ratio(j, RECALL_SAMPLES - 1);
        while k < recall.len() && recall[k] < r {
            k += 1;
        }
        if k == recall.len() {
            break;
        }
        sum = sum + precision[k];
    }
    sum / T::from_usize_exact(RECALL_SAMPLES)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult<T = f64> {
    pub map_50_95: T,
    pub per_threshold: [T; 10],
}

/// Mean over IoU thresholds 0.50..=0.95 of the mean AP over classes present in
/// the ground truth. Classes with no ground truth are excluded.
pub fn map_50_95<T: Scalar>(preds: &[Detection<T>], gts: &[GroundTruth<T>]) -> DetectionResult<T> {
    let mut classes: Vec<usize> = gts.iter().map(|g| g.class).collect();
    classes.sort_unstable();
    classes.dedup();

    type ClassSplit<T> = (Vec<Detection<T>>, Vec<GroundTruth<T>>);
    let per_class: Vec<ClassSplit<T>> = classes
        .iter()
        .map(|&c| {
            (
                preds.iter().filter(|p| p.class == c).copied().collect(),
                gts.iter().filter(|g| g.class == c).copied().collect(),
            )
        })
        .collect();

    let thresholds = iou_thresholds::<T>();
    let mut per_threshold = [T::zero(); 10];
    if !classes.is_empty() {
        for (slot, &thr) in per_threshold.iter_mut().zip(&thresholds) {
            let sum = per_class
                .iter()
                .fold(T::zero(), |acc, (p, g)| acc + average_precision(p, g, thr));
            *slot = sum / T::from_usize_exact(classes.len());
        }
    }
    let total = per_threshold.iter().fold(T::zero(), |a, &b| a + b);
    DetectionResult {
        map_50_95: total / T::from_usize_exact(10),
        per_threshold,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelStats<T = f64> {
    pub mean: T,
    /// Population standard deviation.
    pub std: T,
}

/// Streaming mean/variance accumulator (Welford) with an associative merge
/// for combining partial results from parallel streams.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatsAccumulator<T = f64> {
    count: u64,
    mean: T,
    m2: T,
}

impl<T: Real> Default for StatsAccumulator<T> {
    fn default() -> Self {
        Self {
            count: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }
}

impl<T: Real> StatsAccumulator<T> {
    pub fn push(&mut self, v: T) {
        self.count += 1;
        let d = v - self.mean;
        self.mean = self.mean + d / T::lit(self.count as f64);
        self.m2 = self.m2 + d * (v - self.mean);
    }

    pub fn push_image(&mut self, img: &ImageU8) {
        // per-image histogram keeps the inner loop to 256 weighted updates
        let mut bins = [0u64; 256];
        for &v in img.data() {
            bins[v as usize] += 1;
        }
        let mut part = StatsAccumulator::<T>::default();
        let n: u64 = bins.iter().sum();
        let mean = bins
            .iter()
            .enumerate()
            .fold(T::zero(), |a, (lvl, &c)| a + T::lit(lvl as f64) * T::lit(c as f64))
            / T::lit(n as f64);
        let m2 = bins.iter().enumerate().fold(T::zero(), |a, (lvl, &c)| {
            let d = T::lit(lvl as f64) - mean;
            a + d * d * T::lit(c as f64)
        });
        part.count = n;
        part.mean = mean;
        part.m2 = m2;
        self.merge(&part);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let (na, nb, nn) = (T::lit(self.count as f64), T::lit(other.count as f64), T::lit(n as f64));
        let d = other.mean - self.mean;
        self.mean = self.mean + d * nb / nn;
        self.m2 = self.m2 + other.m2 + d * d * na * nb / nn;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self) -> Result<PixelStats<T>> {
        if self.count == 0 {
            return Err(Error::EmptyInput);
        }
        let var = (self.m2 / T::lit(self.count as f64)).max(T::zero());
        Ok(PixelStats {
            mean: self.mean,
            std: var.sqrt(),
        })
    }
}

/// Mean and population std over all subpixels of all images, pooled.
pub fn dataset_pixel_stats<'a, I>(images: I) -> Result<PixelStats>
where
    I: IntoIterator<Item = &'a ImageU8>,
{
    let mut acc = StatsAccumulator::<f64>::default();
    for img in images {
        acc.push_image(img);
    }
    acc.finish()
}
