//! Validation-set ingestion: classification (directory-per-class or index
//! file) and COCO-style detection annotations, plus resize-only preprocessing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{resize_bilinear, ImageU8};
use crate::metrics::BoxXywh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Detection,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Detection => "detection",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassificationSample {
    pub image_path: PathBuf,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedBox {
    pub class: usize,
    pub bbox: BoxXywh<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionSample {
    pub image_path: PathBuf,
    /// Image id as given in the annotation file.
    pub image_id: u64,
    pub boxes: Vec<AnnotatedBox>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Samples {
    Classification(Vec<ClassificationSample>),
    Detection(Vec<DetectionSample>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub samples: Samples,
    /// Degenerate boxes removed while loading.
    pub dropped_boxes: usize,
}

impl DatasetManifest {
    pub fn task(&self) -> Task {
        match self.samples {
            Samples::Classification(_) => Task::Classification,
            Samples::Detection(_) => Task::Detection,
        }
    }

    pub fn len(&self) -> usize {
        match &self.samples {
            Samples::Classification(s) => s.len(),
            Samples::Detection(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image_path(&self, i: usize) -> &Path {
        match &self.samples {
            Samples::Classification(s) => &s[i].image_path,
            Samples::Detection(s) => &s[i].image_path,
        }
    }

    /// Keep `limit` samples chosen by a seeded shuffle, in original order.
    pub fn subsample(&self, limit: usize, seed: u64) -> Self {
        if limit >= self.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(limit);
        idx.sort_unstable();
        let samples = match &self.samples {
            Samples::Classification(s) => Samples::Classification(idx.iter().map(|&i| s[i].clone()).collect()),
            Samples::Detection(s) => Samples::Detection(idx.iter().map(|&i| s[i].clone()).collect()),
        };
        Self {
            class_names: self.class_names.clone(),
            samples,
            dropped_boxes: self.dropped_boxes,
        }
    }
}

pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Load a classification set from either a directory with one subdirectory
/// per class, or a tab-separated `relative/path<TAB>label` index file.
///
/// Index labels that are all non-negative integers are used as class indices
/// directly; otherwise they are treated as names and indexed in sorted order.
pub fn load_classification_manifest(root: &Path) -> Result<DatasetManifest> {
    if !root.exists() {
        return Err(Error::manifest(root, "dataset root does not exist"));
    }
    let (class_names, mut samples) = if root.is_dir() {
        load_class_dirs(root)?
    } else {
        load_index_file(root)?
    };
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    samples.sort_by(|a, b| a.image_path.cmp(&b.image_path));
    Ok(DatasetManifest {
        class_names,
        samples: Samples::Classification(samples),
        dropped_boxes: 0,
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        out.push(entry?.path());
    }
    out.sort();
    Ok(out)
}

fn load_class_dirs(root: &Path) -> Result<(Vec<String>, Vec<ClassificationSample>)> {
    let mut class_names = Vec::new();
    let mut samples = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let label = class_names.len();
        class_names.push(dir.file_name().unwrap_or_default().to_string_lossy().into_owned());
        for file in sorted_entries(&dir)?.into_iter().filter(|p| is_image_file(p)) {
            samples.push(ClassificationSample {
                image_path: file,
                label,
            });
        }
    }
    Ok((class_names, samples))
}

fn load_index_file(index: &Path) -> Result<(Vec<String>, Vec<ClassificationSample>)> {
    let base = index.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(index)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (path, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::manifest(index, format!("line {}: expected `path<TAB>label`", lineno + 1)))?;
        let path = base.join(path.trim());
        if !path.is_file() {
            return Err(Error::manifest(path, "image file not found"));
        }
        rows.push((path, label.trim().to_owned()));
    }

    let numeric: Option<Vec<usize>> = rows.iter().map(|(_, l)| l.parse().ok()).collect();
    if let Some(labels) = numeric {
        let count = labels.iter().max().map_or(0, |m| m + 1);
        let class_names = (0..count).map(|i| i.to_string()).collect();
        let samples = rows
            .into_iter()
            .zip(labels)
            .map(|((image_path, _), label)| ClassificationSample { image_path, label })
            .collect();
        return Ok((class_names, samples));
    }

    let names: BTreeSet<&str> = rows.iter().map(|(_, l)| l.as_str()).collect();
    let class_names: Vec<String> = names.into_iter().map(str::to_owned).collect();
    let samples = rows
        .into_iter()
        .map(|(image_path, l)| ClassificationSample {
            label: class_names.binary_search(&l).expect("collected above"),
            image_path,
        })
        .collect();
    Ok((class_names, samples))
}

#[derive(Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    height: Option<f64>,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// Load a COCO-style annotation file. Category ids are remapped to contiguous
/// indices in ascending id order; samples are ordered by image id.
pub fn load_detection_manifest(annotations: &Path, image_root: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(annotations)?;
    let coco: CocoFile =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", annotations.display())))?;

    let mut categories: Vec<&CocoCategory> = coco.categories.iter().collect();
    categories.sort_by_key(|c| c.id);
    let class_of: BTreeMap<u64, usize> = categories.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    let class_names = categories.iter().map(|c| c.name.clone()).collect();

    let mut images: BTreeMap<u64, (&CocoImage, Vec<AnnotatedBox>)> = BTreeMap::new();
    for img in &coco.images {
        if images.insert(img.id, (img, Vec::new())).is_some() {
            return Err(Error::Parse(format!("duplicate image id {}", img.id)));
        }
    }

    let mut dropped = 0usize;
    for ann in &coco.annotations {
        let (img, boxes) = images.get_mut(&ann.image_id).ok_or_else(|| {
            Error::manifest(
                annotations,
                format!("annotation references unknown image id {}", ann.image_id),
            )
        })?;
        let class = *class_of.get(&ann.category_id).ok_or_else(|| {
            Error::manifest(
                annotations,
                format!("annotation references unknown category id {}", ann.category_id),
            )
        })?;
        match clamp_box(ann.bbox, img.width, img.height) {
            Some(bbox) => boxes.push(AnnotatedBox { class, bbox }),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} degenerate box(es) from {}", annotations.display());
    }

    let mut samples = Vec::with_capacity(images.len());
    for (id, (img, boxes)) in images {
        let image_path = image_root.join(&img.file_name);
        if !image_path.is_file() {
            return Err(Error::manifest(image_path, "image file not found"));
        }
        samples.push(DetectionSample {
            image_path,
            image_id: id,
            boxes,
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(DatasetManifest {
        class_names,
        samples: Samples::Detection(samples),
        dropped_boxes: dropped,
    })
}

/// In-bounds boxes pass through untouched; out-of-bounds ones are clipped to
/// the image; anything left without positive area is rejected.
fn clamp_box(b: [f64; 4], width: Option<f64>, height: Option<f64>) -> Option<BoxXywh<f64>> {
    let [x, y, w, h] = b;
    if !b.iter().all(|v| v.is_finite()) || !(w > 0.0 && h > 0.0) {
        return None;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (x, y, x + w, y + h);
    if let Some(iw) = width {
        x0 = x0.clamp(0.0, iw);
        x1 = x1.clamp(0.0, iw);
    }
    if let Some(ih) = height {
        y0 = y0.clamp(0.0, ih);
        y1 = y1.clamp(0.0, ih);
    }
    if (x0, y0, x1, y1) == (x, y, x + w, y + h) {
        return Some(BoxXywh::new(x, y, w, h));
    }
    (x1 > x0 && y1 > y0).then(|| BoxXywh::new(x0, y0, x1 - x0, y1 - y0))
}

/// Resize-only preprocessing: no normalization, crop, or channel reordering.
pub fn prepare(img: &ImageU8, target_w: usize, target_h: usize) -> Result<ImageU8> {
    resize_bilinear(img, target_w, target_h)
}
