//! Evaluation matrix: every augment × enhancement pair is pushed through
//! decode → augment → enhance → prepare → infer → score, then reported as
//! metric cells plus percentage-point deltas against the unenhanced arm.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentKind;
use crate::dataset::{prepare, DatasetManifest, Samples, Task};
use crate::enhance::{apply_enhancement, EnhanceKind, SsrConfig};
use crate::error::{Error, Result};
use crate::image::{load_image, ImageU8};
use crate::metrics::{classification_score, map_50_95, ClassificationResult, Detection, DetectionResult, GroundTruth};
use crate::protocol::{InferenceBackend, WireBox};

pub const METRIC_COMBINED: &str = "combined_accuracy";
pub const METRIC_MAP: &str = "map_50_95";

#[derive(Clone, Debug)]
pub struct MatrixConfig {
    pub augments: Vec<AugmentKind>,
    pub enhancements: Vec<EnhanceKind>,
    pub ssr: SsrConfig,
    pub workers: usize,
    /// Keep the backend-echoed checksum of every image sent.
    pub record_checksums: bool,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            augments: AugmentKind::ALL.to_vec(),
            enhancements: EnhanceKind::ALL.to_vec(),
            ssr: SsrConfig::default(),
            workers: 1,
            record_checksums: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub augment: AugmentKind,
    pub enhancement: EnhanceKind,
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub augment: AugmentKind,
    pub enhancement: EnhanceKind,
    pub baseline: f64,
    pub enhanced: f64,
    /// `100 × (enhanced − baseline)`, in percentage points.
    pub delta_pp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChecksumRecord {
    pub sample: usize,
    pub augment: AugmentKind,
    pub enhancement: EnhanceKind,
    pub checksum: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub model: String,
    pub task: Task,
    pub samples: usize,
    pub cells: Vec<MatrixCell>,
    pub deltas: Vec<DeltaRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checksums: Vec<ChecksumRecord>,
}

impl MatrixReport {
    pub fn cell(&self, augment: AugmentKind, enhancement: EnhanceKind) -> Option<&MatrixCell> {
        self.cells
            .iter()
            .find(|c| c.augment == augment && c.enhancement == enhancement)
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &MatrixCell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

/// Percentage-point change from `baseline` to `enhanced` (both fractions).
pub fn delta_pp(baseline: f64, enhanced: f64) -> f64 {
    100.0 * enhanced - 100.0 * baseline
}

/// Delta of every scored enhanced cell against the unenhanced cell of the same
/// augment. A missing or failed baseline is an error.
pub fn delta_report(r: &MatrixReport) -> Result<Vec<DeltaRow>> {
    let mut rows = Vec::new();
    for cell in r.cells.iter().filter(|c| c.enhancement != EnhanceKind::None) {
        let Some(enhanced) = cell.value else { continue };
        let baseline = r
            .cell(cell.augment, EnhanceKind::None)
            .and_then(|b| b.value)
            .ok_or_else(|| Error::Report(format!("no baseline cell for augment `{}`", cell.augment)))?;
        rows.push(DeltaRow {
            augment: cell.augment,
            enhancement: cell.enhancement,
            baseline,
            enhanced,
            delta_pp: delta_pp(baseline, enhanced),
        });
    }
    Ok(rows)
}

fn lenient_deltas(cells: &[MatrixCell]) -> Vec<DeltaRow> {
    let mut rows = Vec::new();
    for cell in cells.iter().filter(|c| c.enhancement != EnhanceKind::None) {
        let base = cells
            .iter()
            .find(|b| b.augment == cell.augment && b.enhancement == EnhanceKind::None)
            .and_then(|b| b.value);
        if let (Some(baseline), Some(enhanced)) = (base, cell.value) {
            rows.push(DeltaRow {
                augment: cell.augment,
                enhancement: cell.enhancement,
                baseline,
                enhanced,
                delta_pp: delta_pp(baseline, enhanced),
            });
        }
    }
    rows
}

/// The image a backend sees for one matrix cell: augment first, then enhance,
/// then resize.
pub fn pipeline_image(
    img: &ImageU8,
    augment: AugmentKind,
    enhancement: EnhanceKind,
    ssr: &SsrConfig,
    target: (usize, usize),
) -> Result<ImageU8> {
    let augmented = augment.apply(img);
    let enhanced = apply_enhancement(&augmented, enhancement, ssr);
    prepare(&enhanced, target.0, target.1)
}

enum Outcome {
    Ranking(Vec<usize>),
    Boxes(Vec<WireBox>),
}

struct CellOutcome {
    outcome: std::result::Result<Outcome, String>,
    checksum: Option<String>,
}

pub type Launcher<'a> = dyn Fn() -> Result<Box<dyn InferenceBackend>> + Sync + 'a;

struct Worker<'a> {
    launcher: &'a Launcher<'a>,
    backend: Option<Box<dyn InferenceBackend>>,
}

impl Worker<'_> {
    fn infer(&mut self, task: Task, img: &ImageU8, orig: (usize, usize)) -> CellOutcome {
        if self.backend.is_none() {
            match (self.launcher)() {
                Ok(b) => self.backend = Some(b),
                Err(e) => {
                    return CellOutcome {
                        outcome: Err(e.to_string()),
                        checksum: None,
                    }
                }
            }
        }
        let backend = self.backend.as_mut().expect("launched above");
        let result = match task {
            Task::Classification => backend.classify(img, orig).map(|c| {
                (
                    Outcome::Ranking(c.ranking.iter().map(|r| r.class).collect()),
                    c.checksum,
                )
            }),
            Task::Detection => backend.detect(img, orig).map(|d| (Outcome::Boxes(d.boxes), d.checksum)),
        };
        match result {
            Ok((outcome, checksum)) => CellOutcome {
                outcome: Ok(outcome),
                checksum,
            },
            Err(e) => {
                log::warn!("backend request failed, restarting session: {e}");
                // lockstep state is unknown after a failure
                self.backend = None;
                CellOutcome {
                    outcome: Err(e.to_string()),
                    checksum: None,
                }
            }
        }
    }
}

/// Run the augment × enhancement matrix over a dataset. `launcher` opens a new
/// backend session; one is opened up front for the handshake and each extra
/// worker opens its own.
pub fn run_matrix(manifest: &DatasetManifest, launcher: &Launcher<'_>, cfg: &MatrixConfig) -> Result<MatrixReport> {
    if cfg.augments.is_empty() || cfg.enhancements.is_empty() {
        return Err(Error::InvalidParameter("empty augment or enhancement list".into()));
    }
    if manifest.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let first = launcher()?;
    let handshake = first.handshake().clone();
    if handshake.task != manifest.task() {
        return Err(Error::Run(format!(
            "backend `{}` serves {} but the dataset is {}",
            handshake.name,
            handshake.task,
            manifest.task()
        )));
    }
    let target = (handshake.input_w, handshake.input_h);
    let pairs: Vec<(AugmentKind, EnhanceKind)> = cfg
        .augments
        .iter()
        .flat_map(|&a| cfg.enhancements.iter().map(move |&e| (a, e)))
        .collect();

    let n = manifest.len();
    let results: Mutex<Vec<Option<Vec<CellOutcome>>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let first = Mutex::new(Some(first));
    let workers = cfg.workers.clamp(1, n);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut worker = Worker {
                    launcher,
                    backend: first.lock().expect("poisoned").take(),
                };
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let outcomes = process_sample(&mut worker, manifest, i, &pairs, cfg, target, handshake.task);
                    results.lock().expect("poisoned")[i] = Some(outcomes);
                }
            });
        }
    });

    let results: Vec<Vec<CellOutcome>> = results
        .into_inner()
        .expect("poisoned")
        .into_iter()
        .map(|r| r.expect("every sample processed"))
        .collect();

    let mut cells = Vec::with_capacity(pairs.len());
    let mut checksums = Vec::new();
    for (ci, &(augment, enhancement)) in pairs.iter().enumerate() {
        let per_sample: Vec<&CellOutcome> = results.iter().map(|r| &r[ci]).collect();
        if cfg.record_checksums {
            for (sample, o) in per_sample.iter().enumerate() {
                if let Some(checksum) = &o.checksum {
                    checksums.push(ChecksumRecord {
                        sample,
                        augment,
                        enhancement,
                        checksum: checksum.clone(),
                    });
                }
            }
        }
        cells.push(score_cell(manifest, augment, enhancement, &per_sample));
    }

    if cells.iter().all(|c| c.error.is_some()) {
        return Err(Error::Run(format!(
            "all {} cells failed; first error: {}",
            cells.len(),
            cells[0].error.as_deref().unwrap_or_default()
        )));
    }
    let deltas = lenient_deltas(&cells);
    Ok(MatrixReport {
        model: handshake.name,
        task: handshake.task,
        samples: n,
        cells,
        deltas,
        checksums,
    })
}

fn process_sample(
    worker: &mut Worker<'_>,
    manifest: &DatasetManifest,
    i: usize,
    pairs: &[(AugmentKind, EnhanceKind)],
    cfg: &MatrixConfig,
    target: (usize, usize),
    task: Task,
) -> Vec<CellOutcome> {
    let img = match load_image(manifest.image_path(i)) {
        Ok(img) => img,
        Err(e) => {
            return pairs
                .iter()
                .map(|_| CellOutcome {
                    outcome: Err(e.to_string()),
                    checksum: None,
                })
                .collect()
        }
    };
    let orig = (img.width(), img.height());
    let mut out = Vec::with_capacity(pairs.len());
    let mut augmented: Option<(AugmentKind, ImageU8)> = None;
    for &(augment, enhancement) in pairs {
        if augmented.as_ref().map(|(a, _)| *a) != Some(augment) {
            augmented = Some((augment, augment.apply(&img)));
        }
        let aug_img = &augmented.as_ref().expect("set above").1;
        let enhanced = apply_enhancement(aug_img, enhancement, &cfg.ssr);
        let outcome = match prepare(&enhanced, target.0, target.1) {
            Ok(prepared) => worker.infer(task, &prepared, orig),
            Err(e) => CellOutcome {
                outcome: Err(e.to_string()),
                checksum: None,
            },
        };
        out.push(outcome);
    }
    out
}

fn score_cell(
    manifest: &DatasetManifest,
    augment: AugmentKind,
    enhancement: EnhanceKind,
    per_sample: &[&CellOutcome],
) -> MatrixCell {
    let metric = match manifest.task() {
        Task::Classification => METRIC_COMBINED,
        Task::Detection => METRIC_MAP,
    };
    let mut cell = MatrixCell {
        augment,
        enhancement,
        metric: metric.to_owned(),
        value: None,
        classification: None,
        detection: None,
        error: None,
    };
    if let Some((i, e)) = per_sample
        .iter()
        .enumerate()
        .find_map(|(i, o)| o.outcome.as_ref().err().map(|e| (i, e)))
    {
        cell.error = Some(format!("sample {i} ({}): {e}", manifest.image_path(i).display()));
        return cell;
    }
    let outcomes = per_sample
        .iter()
        .map(|o| o.outcome.as_ref().expect("errors handled above"));
    match &manifest.samples {
        Samples::Classification(samples) => {
            let rankings: Vec<Vec<usize>> = outcomes
                .map(|o| match o {
                    Outcome::Ranking(r) => r.clone(),
                    Outcome::Boxes(_) => Vec::new(),
                })
                .collect();
            let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
            match classification_score(&rankings, &labels) {
                Ok(r) => {
                    cell.value = Some(r.combined);
                    cell.classification = Some(r);
                }
                Err(e) => cell.error = Some(e.to_string()),
            }
        }
        Samples::Detection(samples) => {
            let mut preds = Vec::new();
            for (image, o) in outcomes.enumerate() {
                if let Outcome::Boxes(boxes) = o {
                    preds.extend(boxes.iter().filter(|b| b.w > 0.0 && b.h > 0.0).map(|b| Detection {
                        image,
                        class: b.class,
                        bbox: b.bbox(),
                        score: b.score,
                    }));
                }
            }
            let gts: Vec<GroundTruth> = samples
                .iter()
                .enumerate()
                .flat_map(|(image, s)| {
                    s.boxes.iter().map(move |b| GroundTruth {
                        image,
                        class: b.class,
                        bbox: b.bbox,
                    })
                })
                .collect();
            let r = map_50_95(&preds, &gts);
            cell.value = Some(r.map_50_95);
            cell.detection = Some(r);
        }
    }
    cell
}

/// Average several reports cell by cell under one model name (e.g. the sizes
/// of one model family). Deltas are recomputed from the averaged cells.
pub fn average_reports(reports: &[MatrixReport], name: &str) -> Result<MatrixReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Report("no reports to average".into()))?;
    if reports.iter().any(|r| r.task != first.task) {
        return Err(Error::Report("cannot average reports of different tasks".into()));
    }
    // metric name, values, first error
    type CellSums = (String, Vec<f64>, Option<String>);
    let mut sums: BTreeMap<(AugmentKind, EnhanceKind), CellSums> = BTreeMap::new();
    for r in reports {
        for c in &r.cells {
            let entry = sums
                .entry((c.augment, c.enhancement))
                .or_insert_with(|| (c.metric.clone(), Vec::new(), None));
            match (c.value, &c.error) {
                (Some(v), _) => entry.1.push(v),
                (None, e) => {
                    entry
                        .2
                        .get_or_insert_with(|| format!("{}: {}", r.model, e.as_deref().unwrap_or("no value")));
                }
            }
        }
    }
    let mut cells = Vec::new();
    for ((augment, enhancement), (metric, values, error)) in sums {
        let complete = error.is_none() && values.len() == reports.len();
        cells.push(MatrixCell {
            augment,
            enhancement,
            metric,
            value: complete.then(|| values.iter().sum::<f64>() / values.len() as f64),
            classification: None,
            detection: None,
            error: if complete {
                None
            } else {
                Some(error.unwrap_or_else(|| "cell missing from some reports".into()))
            },
        });
    }
    let deltas = lenient_deltas(&cells);
    Ok(MatrixReport {
        model: name.to_owned(),
        task: first.task,
        samples: reports.iter().map(|r| r.samples).sum(),
        cells,
        deltas,
        checksums: Vec::new(),
    })
}

/// Metric rows: `model,augment,enhancement,metric,value`.
pub fn write_metric_csv<W: Write>(r: &MatrixReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "augment", "enhancement", "metric", "value"])?;
    for c in &r.cells {
        let (a, e) = (c.augment.name(), c.enhancement.name());
        if let Some(err) = &c.error {
            w.write_record([r.model.as_str(), a, e, "error", err])?;
            continue;
        }
        if let Some(v) = c.value {
            w.write_record([r.model.as_str(), a, e, &c.metric, &v.to_string()])?;
        }
        if let Some(cl) = &c.classification {
            w.write_record([r.model.as_str(), a, e, "top1", &cl.top1.to_string()])?;
            w.write_record([r.model.as_str(), a, e, "top5", &cl.top5.to_string()])?;
        }
    }
    for d in &r.deltas {
        w.write_record([
            r.model.as_str(),
            d.augment.name(),
            d.enhancement.name(),
            "delta_pp",
            &d.delta_pp.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Delta table: `model,augment,enhancement,baseline,enhanced,delta_pp`.
pub fn write_delta_csv<W: Write>(model: &str, rows: &[DeltaRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "augment", "enhancement", "baseline", "enhanced", "delta_pp"])?;
    for d in rows {
        w.write_record([
            model,
            d.augment.name(),
            d.enhancement.name(),
            &d.baseline.to_string(),
            &d.enhanced.to_string(),
            &d.delta_pp.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
