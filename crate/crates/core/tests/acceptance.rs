#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! `UPDATE_GOLDEN=1` re-records the end-to-end golden report.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use advlens::augment::{augment_dark, augment_dark_rainy, augment_fog, augment_overexpose, AugmentKind};
use advlens::enhance::{
    build_equalization_lut, enhance_he, enhance_ssr, gaussian_blur, gaussian_kernel, HsvImage, Plane, SsrConfig,
};
use advlens::image::rgb_to_hsv;
use advlens::metrics::{dataset_pixel_stats, map_50_95, BoxXywh, Detection, GroundTruth, PixelStats};
use advlens::runner::{delta_pp, delta_report, MatrixCell, MatrixReport};
use advlens::{EnhanceKind, Histogram256, ImageU8, Task};
use num_rational::Ratio;
use rand::Rng;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion {
            name: "augment-formula-oracle",
            budget: Duration::from_secs(10),
            run: augment_oracle,
        },
        Criterion {
            name: "he-property-suite",
            budget: Duration::from_secs(30),
            run: he_suite,
        },
        Criterion {
            name: "ssr-property-suite",
            budget: Duration::from_secs(60),
            run: ssr_suite,
        },
        Criterion {
            name: "map-oracle-equivalence",
            budget: Duration::from_secs(10),
            run: map_oracle,
        },
        Criterion {
            name: "pixel-stats-qualitative",
            budget: Duration::from_secs(60),
            run: pixel_stats_qualitative,
        },
        Criterion {
            name: "end-to-end-determinism",
            budget: Duration::from_secs(60),
            run: end_to_end,
        },
        Criterion {
            name: "delta-semantics",
            budget: Duration::from_secs(1),
            run: delta_semantics,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!(
                "{detail}; runtime {:.2}s exceeds {:.0}s budget",
                elapsed.as_secs_f64(),
                c.budget.as_secs_f64()
            )),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {:<26} {:>7.2}s  {detail}", c.name, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:<26} {:>7.2}s  {why}", c.name, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Augment formulas, evaluated one subpixel at a time in exact integer
// arithmetic. `round_half_up(n / d)` = floor((2n + d) / 2d) for n, d >= 0.

fn round_ratio(num: u64, den: u64) -> u8 {
    ((2 * num + den) / (2 * den)) as u8
}

fn ref_dark(img: &ImageU8) -> Vec<u8> {
    img.data().iter().map(|&x| (x as f64 / 8.0).floor() as u8).collect()
}

fn ref_overexpose(img: &ImageU8) -> Vec<u8> {
    img.data()
        .iter()
        .map(|&x| std::cmp::min(255, x as u32 * 2) as u8)
        .collect()
}

fn ref_fog(img: &ImageU8) -> Vec<u8> {
    let lifted: Vec<u64> = img.data().iter().map(|&x| x as u64 + 255 * 10).collect();
    let max = *lifted.iter().max().unwrap();
    lifted.iter().map(|&v| round_ratio(v * 255, max)).collect()
}

fn ref_dark_rainy(img: &ImageU8) -> Vec<u8> {
    let x1: Vec<u64> = img.data().iter().map(|&x| (255 - x as u64) + 255 * 2).collect();
    let max = *x1.iter().max().unwrap();
    // x3 = 255 - x1 * 255 / max = (255 * max - 255 * x1) / max
    let x3: Vec<u8> = x1.iter().map(|&v| round_ratio(255 * max - 255 * v, max)).collect();
    let mut out = Vec::with_capacity(x3.len());
    for (orig, computed) in img.data().chunks(3).zip(x3.chunks(3)) {
        // any subpixel greater than 255 * 0.75, i.e. 4x > 765
        if orig.iter().any(|&x| 4 * x as u32 > 765) {
            out.extend_from_slice(orig);
        } else {
            out.extend_from_slice(computed);
        }
    }
    out
}

fn augment_oracle() -> Check {
    let mut r = common::rng(0xA11);
    let mut checked = 0usize;
    for n in 0..1000 {
        let (w, h) = (r.gen_range(1..=32), r.gen_range(1..=32));
        let lo = r.gen_range(0..=255u8);
        let hi = r.gen_range(lo..=255u8);
        let mut img = common::uniform_image(&mut r, w, h, lo, hi);
        if n % 5 == 0 {
            // plant black and white pixels to hit the anchored normalizations
            let mut data = img.clone().into_data();
            let k = r.gen_range(0..w * h) * 3;
            data[k..k + 3].copy_from_slice(&[0, 0, 0]);
            let k = r.gen_range(0..w * h) * 3 + r.gen_range(0..3);
            data[k] = 255;
            img = ImageU8::new(w, h, data).unwrap();
        }
        let pairs: [(&str, Vec<u8>, Vec<u8>); 4] = [
            ("dark", augment_dark(&img).into_data(), ref_dark(&img)),
            ("overexpose", augment_overexpose(&img).into_data(), ref_overexpose(&img)),
            ("fog", augment_fog(&img).into_data(), ref_fog(&img)),
            ("dark-rainy", augment_dark_rainy(&img).into_data(), ref_dark_rainy(&img)),
        ];
        for (name, got, want) in pairs {
            ensure!(
                got == want,
                "{name} differs from scalar reference on image {n} ({w}x{h})"
            );
            checked += want.len();
        }
        let out = augment_dark_rainy(&img);
        for (i, p) in img.pixels().enumerate() {
            if p.iter().any(|&x| x >= 192) {
                ensure!(out.pixel(i % w, i / w) == p, "threshold retention broken on image {n}");
            }
        }
    }

    let two = ImageU8::new(2, 1, vec![0, 255, 0, 255, 0, 255]).unwrap();
    ensure!(
        augment_fog(&two).data() == [232, 255, 232, 255, 232, 255],
        "fog {{0,255}} case"
    );
    let rainy = ImageU8::new(3, 1, vec![0, 0, 0, 90, 90, 90, 200, 10, 10]).unwrap();
    ensure!(
        augment_dark_rainy(&rainy).data() == [0, 0, 0, 30, 30, 30, 200, 10, 10],
        "dark-rainy worked example"
    );
    Ok(format!("1000 images, {checked} subpixels match exactly"))
}

// ---------------------------------------------------------------------------

fn he_suite() -> Check {
    let mut r = common::rng(0x4E);
    for n in 0..500 {
        let occupied = r.gen_range(1..=256);
        let mut bins = [0u64; 256];
        for _ in 0..occupied {
            bins[r.gen_range(0..256)] += r.gen_range(1..1000);
        }
        let lut = build_equalization_lut(&Histogram256::from_bins(bins).unwrap());
        ensure!(lut.map().windows(2).all(|w| w[0] <= w[1]), "LUT {n} not monotone");
    }

    let mut max_double = 0i32;
    for n in 0..100 {
        let (w, h) = (r.gen_range(1..=40), r.gen_range(1..=40));
        let img = if n % 2 == 0 {
            common::scene_image(&mut r, w, h)
        } else {
            let lo = r.gen_range(0..=255u8);
            let hi = r.gen_range(lo..=255);
            common::uniform_image(&mut r, w, h, lo, hi)
        };
        let hsv = HsvImage::<f64>::from_rgb(&img);
        let eq = hsv.equalize_value();
        ensure!(
            eq.hue.iter().zip(&hsv.hue).all(|(a, b)| a.to_bits() == b.to_bits()),
            "hue plane changed on image {n}"
        );
        ensure!(
            eq.saturation
                .iter()
                .zip(&hsv.saturation)
                .all(|(a, b)| a.to_bits() == b.to_bits()),
            "saturation plane changed on image {n}"
        );
        let once = enhance_he(&img);
        ensure!(
            once == eq.to_rgb(),
            "enhance_he differs from the HSV plane pipeline on image {n}"
        );
        ensure!(
            once.pixels().zip(&eq.value).all(|(p, &v)| rgb_to_hsv::<f64>(p).v == v),
            "output value channel differs from the equalized plane on image {n}"
        );
        let twice = enhance_he(&once);
        for (a, b) in once.pixels().zip(twice.pixels()) {
            let d = (rgb_to_hsv::<f64>(a).v as i32 - rgb_to_hsv::<f64>(b).v as i32).abs();
            max_double = max_double.max(d);
        }
        ensure!(
            max_double <= 1,
            "double HE moved a V level by {max_double} on image {n}"
        );
    }

    for level in [0u8, 1, 77, 128, 255] {
        let c = ImageU8::filled(9, 7, [level, level, level]).unwrap();
        ensure!(enhance_he(&c) == c, "constant image {level} not a fixed point");
    }
    Ok(format!(
        "500 LUTs monotone, 100 images chroma-invariant, max double-HE V shift {max_double}"
    ))
}

// ---------------------------------------------------------------------------

fn ssr_suite() -> Check {
    let cfg = SsrConfig::default();
    let mut r = common::rng(0x55);

    for rgb in [[0, 0, 0], [255, 255, 255], [30, 140, 250]] {
        let c = ImageU8::filled(64, 64, rgb).unwrap();
        ensure!(
            enhance_ssr(&c, &cfg).data().iter().all(|&v| v == 127),
            "constant {rgb:?} not 127"
        );
    }

    for n in 0..5 {
        let img = common::scene_image(&mut r, 64, 64);
        let out = enhance_ssr(&img, &cfg);
        for c in 0..3 {
            let ch = out.channel(c);
            ensure!(
                ch.contains(&0) && ch.contains(&255),
                "image {n} channel {c} does not span 0..255"
            );
        }
    }

    let mut worst_sum = 0.0f64;
    for sigma in [0.5, 1.0, 3.3, 10.0, 100.0] {
        let k = gaussian_kernel(sigma).unwrap();
        let dev = (k.iter().sum::<f64>() - 1.0).abs();
        worst_sum = worst_sum.max(dev);
        ensure!(dev <= 1e-12, "kernel sum off by {dev:e} at sigma {sigma}");
    }

    for (w, h) in [(64, 64), (5, 90), (1, 1)] {
        let p = Plane::new(w, h, vec![211.0; w * h]).unwrap();
        ensure!(
            gaussian_blur(&p, 100.0).unwrap() == p,
            "constant {w}x{h} plane changed by blur"
        );
    }

    let mut worst_fraction = 1.0f64;
    for n in 0..10 {
        // levels stay <= 127 so doubling is a pure illumination change
        let img = if n % 2 == 0 {
            common::uniform_image(&mut r, 64, 64, 8, 127)
        } else {
            let s = common::scene_image(&mut r, 64, 64);
            s.map_subpixels(|v| 8 + (v as u16 * 119 / 255) as u8)
        };
        ensure!(img.data().iter().all(|&v| v >= 8), "generator produced a level below 8");
        let doubled = img.map_subpixels(|v| (v as u16 * 2).min(255) as u8);
        let (a, b) = (enhance_ssr(&img, &cfg), enhance_ssr(&doubled, &cfg));
        let agree = a
            .data()
            .iter()
            .zip(b.data())
            .filter(|(x, y)| (**x as i32 - **y as i32).abs() <= 6)
            .count();
        let fraction = agree as f64 / a.data().len() as f64;
        worst_fraction = worst_fraction.min(fraction);
        ensure!(
            fraction >= 0.95,
            "image {n}: only {:.3} of subpixels within 6 levels",
            fraction
        );
    }
    Ok(format!(
        "kernel sum error <= {worst_sum:.1e}, worst illumination agreement {:.3}",
        worst_fraction
    ))
}

// ---------------------------------------------------------------------------
// Brute-force mAP: every prefix of the confidence ranking is matched from
// scratch, and interpolated precision is taken directly from its definition.

type Q = Ratio<i128>;

fn q_iou(a: &BoxXywh<Q>, b: &BoxXywh<Q>) -> Q {
    let zero = Q::from_integer(0);
    let ix = std::cmp::max(zero, std::cmp::min(a.x + a.w, b.x + b.w) - std::cmp::max(a.x, b.x));
    let iy = std::cmp::max(zero, std::cmp::min(a.y + a.h, b.y + b.h) - std::cmp::max(a.y, b.y));
    let inter = ix * iy;
    inter / (a.w * a.h + b.w * b.h - inter)
}

fn oracle_ap(preds: &[&Detection<Q>], gts: &[&GroundTruth<Q>], thr: Q) -> Q {
    let mut ranked: Vec<&Detection<Q>> = preds.to_vec();
    ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    let n_gt = gts.len() as i128;
    let mut points = Vec::new();
    for m in 1..=ranked.len() {
        let mut used = vec![false; gts.len()];
        let mut tp = 0i128;
        for p in &ranked[..m] {
            let mut best: Option<(usize, Q)> = None;
            for (gi, g) in gts.iter().enumerate() {
                if used[gi] || g.image != p.image {
                    continue;
                }
                let v = q_iou(&p.bbox, &g.bbox);
                if v >= thr && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((gi, v));
                }
            }
            if let Some((gi, _)) = best {
                used[gi] = true;
                tp += 1;
            }
        }
        points.push((Q::new(tp, n_gt), Q::new(tp, m as i128)));
    }
    let mut sum = Q::from_integer(0);
    for j in 0..=100 {
        let r = Q::new(j, 100);
        let best = points
            .iter()
            .filter(|(rec, _)| *rec >= r)
            .map(|&(_, prec)| prec)
            .max()
            .unwrap_or(Q::from_integer(0));
        sum += best;
    }
    sum / Q::from_integer(101)
}

fn oracle_map(preds: &[Detection<Q>], gts: &[GroundTruth<Q>]) -> Q {
    let mut classes: Vec<usize> = gts.iter().map(|g| g.class).collect();
    classes.sort();
    classes.dedup();
    if classes.is_empty() {
        return Q::from_integer(0);
    }
    let mut total = Q::from_integer(0);
    for t in 0..10 {
        let thr = Q::new(50 + 5 * t, 100);
        let mut class_sum = Q::from_integer(0);
        for &c in &classes {
            let p: Vec<&Detection<Q>> = preds.iter().filter(|d| d.class == c).collect();
            let g: Vec<&GroundTruth<Q>> = gts.iter().filter(|d| d.class == c).collect();
            class_sum += oracle_ap(&p, &g, thr);
        }
        total += class_sum / Q::from_integer(classes.len() as i128);
    }
    total / Q::from_integer(10)
}

fn qbox(x: i128, y: i128, w: i128, h: i128) -> BoxXywh<Q> {
    BoxXywh::new(
        Q::from_integer(x),
        Q::from_integer(y),
        Q::from_integer(w),
        Q::from_integer(h),
    )
}

fn to_f64_box(b: &BoxXywh<Q>) -> BoxXywh<f64> {
    let f = |q: Q| *q.numer() as f64 / *q.denom() as f64;
    BoxXywh::new(f(b.x), f(b.y), f(b.w), f(b.h))
}

fn map_oracle() -> Check {
    let mut r = common::rng(0x3A9);
    let mut nonzero = 0;
    for n in 0..200 {
        let images = r.gen_range(1..=5);
        let classes = r.gen_range(1..=3);
        let mut gts = Vec::new();
        for image in 0..images {
            for _ in 0..r.gen_range(0..=4) {
                gts.push(GroundTruth {
                    image,
                    class: r.gen_range(0..classes),
                    bbox: qbox(
                        r.gen_range(0..20),
                        r.gen_range(0..20),
                        r.gen_range(1..10),
                        r.gen_range(1..10),
                    ),
                });
            }
        }
        let mut preds = Vec::new();
        for _ in 0..r.gen_range(0..=8) {
            let (image, class, bbox) = if !gts.is_empty() && r.gen_bool(0.7) {
                let g: &GroundTruth<Q> = &gts[r.gen_range(0..gts.len())];
                let x = *g.bbox.x.numer() + r.gen_range(-1..=1);
                let y = *g.bbox.y.numer() + r.gen_range(-1..=1);
                let w = (*g.bbox.w.numer() + r.gen_range(-1..=2)).max(1);
                let h = (*g.bbox.h.numer() + r.gen_range(-1..=2)).max(1);
                let class = if r.gen_bool(0.85) {
                    g.class
                } else {
                    r.gen_range(0..classes)
                };
                (g.image, class, qbox(x, y, w, h))
            } else {
                let b = qbox(
                    r.gen_range(0..20),
                    r.gen_range(0..20),
                    r.gen_range(1..10),
                    r.gen_range(1..10),
                );
                (r.gen_range(0..images), r.gen_range(0..classes), b)
            };
            preds.push(Detection {
                image,
                class,
                bbox,
                // coarse scores force ties through the stable ordering
                score: r.gen_range(0..4) as f64 / 4.0,
            });
        }

        let exact = map_50_95(&preds, &gts);
        let want = oracle_map(&preds, &gts);
        ensure!(
            exact.map_50_95 == want,
            "instance {n}: {} vs oracle {}",
            exact.map_50_95,
            want
        );
        for w in exact.per_threshold.windows(2) {
            ensure!(w[0] >= w[1], "instance {n}: AP increases with IoU threshold");
        }

        let fp: Vec<Detection> = preds
            .iter()
            .map(|d| Detection {
                image: d.image,
                class: d.class,
                bbox: to_f64_box(&d.bbox),
                score: d.score,
            })
            .collect();
        let fg: Vec<GroundTruth> = gts
            .iter()
            .map(|g| GroundTruth {
                image: g.image,
                class: g.class,
                bbox: to_f64_box(&g.bbox),
            })
            .collect();
        let float = map_50_95(&fp, &fg).map_50_95;
        let want_f = *want.numer() as f64 / *want.denom() as f64;
        ensure!(
            (float - want_f).abs() < 1e-12,
            "instance {n}: f64 {float} vs oracle {want_f}"
        );
        if want > Q::from_integer(0) {
            nonzero += 1;
        }
    }

    let g = [GroundTruth {
        image: 0,
        class: 0,
        bbox: qbox(0, 0, 100, 100),
    }];
    let p = [Detection {
        image: 0,
        class: 0,
        bbox: qbox(0, 0, 62, 100),
        score: 0.9,
    }];
    let hand = map_50_95(&p, &g).map_50_95;
    ensure!(hand == Q::new(3, 10), "IoU 0.62 case gave {hand}");
    let gf = [GroundTruth {
        image: 0,
        class: 0,
        bbox: BoxXywh::new(0.0, 0.0, 100.0, 100.0),
    }];
    let pf = [Detection {
        image: 0,
        class: 0,
        bbox: BoxXywh::new(0.0, 0.0, 62.0, 100.0),
        score: 0.9,
    }];
    let hand_f = map_50_95(&pf, &gf).map_50_95;
    ensure!(hand_f == 0.3, "IoU 0.62 case in f64 gave {hand_f}");
    Ok(format!(
        "200 instances exact ({nonzero} with non-zero mAP), IoU 0.62 case = 3/10"
    ))
}

// ---------------------------------------------------------------------------

fn pixel_stats_qualitative() -> Check {
    let mut r = common::rng(0xF15);
    let sample: Vec<ImageU8> = (0..50)
        .map(|_| {
            let (w, h) = (r.gen_range(32..64), r.gen_range(32..64));
            common::scene_image(&mut r, w, h)
        })
        .collect();
    let stats = |imgs: &[ImageU8]| -> PixelStats { dataset_pixel_stats(imgs.iter()).unwrap() };
    let map = |f: fn(&ImageU8) -> ImageU8, imgs: &[ImageU8]| -> Vec<ImageU8> { imgs.iter().map(f).collect() };

    let orig = stats(&sample);
    let dark_imgs = map(augment_dark, &sample);
    let dark = stats(&dark_imgs);
    let lo = orig.mean / 8.0 - 0.5;
    let hi = orig.mean / 8.0;
    ensure!(
        dark.mean >= lo && dark.mean <= hi,
        "dark mean {:.4} outside [{lo:.4}, {hi:.4}]",
        dark.mean
    );
    let fog = stats(&map(augment_fog, &sample));
    ensure!(
        fog.mean > orig.mean,
        "fog mean {:.3} not above {:.3}",
        fog.mean,
        orig.mean
    );
    ensure!(fog.std < orig.std, "fog std {:.3} not below {:.3}", fog.std, orig.std);
    let he = stats(&map(enhance_he, &dark_imgs));
    ensure!(
        he.mean > dark.mean,
        "HE mean {:.3} not above dark {:.3}",
        he.mean,
        dark.mean
    );
    ensure!(he.std > dark.std, "HE std {:.3} not above dark {:.3}", he.std, dark.std);

    let naive = {
        let all: Vec<f64> = sample.iter().flat_map(|i| i.data().iter().map(|&v| v as f64)).collect();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let v = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / all.len() as f64;
        (m, v.sqrt())
    };
    ensure!(
        ((orig.mean - naive.0) / naive.0).abs() < 1e-9 && ((orig.std - naive.1) / naive.1).abs() < 1e-9,
        "single-pass stats disagree with two-pass"
    );
    Ok(format!(
        "orig {:.2}/{:.2}, dark {:.2}/{:.2}, fog {:.2}/{:.2}, dark+HE {:.2}/{:.2} (mean/std)",
        orig.mean, orig.std, dark.mean, dark.std, fog.mean, fog.std, he.mean, he.std
    ))
}

// ---------------------------------------------------------------------------

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/matrix_stub.json")
}

fn run_matrix_cli(index: &Path, workers: usize, format: &str, out: &Path) -> Result<(), String> {
    let status = Command::new(common::cli_exe())
        .args(["matrix", "--dataset"])
        .arg(index)
        .args([
            "--backend",
            common::stub_exe(),
            "--workers",
            &workers.to_string(),
            "--format",
            format,
            "--out",
        ])
        .arg(out)
        .env_remove("ADVLENS_BACKEND")
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "matrix exited with {status}");
    Ok(())
}

fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let index = common::classification_fixture(dir.path(), 20, 2024);

    let mut outputs = Vec::new();
    for (i, workers) in [1usize, 4, 1, 3].into_iter().enumerate() {
        let out = dir.path().join(format!("report_{i}.json"));
        run_matrix_cli(&index, workers, "json", &out)?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure!(
        outputs.windows(2).all(|w| w[0] == w[1]),
        "JSON report differs across runs or worker counts"
    );

    let mut csvs = Vec::new();
    for workers in [1usize, 4] {
        let out = dir.path().join(format!("report_{workers}.csv"));
        run_matrix_cli(&index, workers, "csv", &out)?;
        csvs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure!(csvs[0] == csvs[1], "CSV report differs across worker counts");

    let report: MatrixReport = serde_json::from_slice(&outputs[0]).map_err(|e| e.to_string())?;
    ensure!(report.cells.len() == 15, "{} cells", report.cells.len());
    ensure!(report.deltas.len() == 10, "{} delta rows", report.deltas.len());
    ensure!(report.failed_cells().count() == 0, "failed cells present");

    let golden = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() || !golden.exists() {
        std::fs::write(&golden, &outputs[0]).map_err(|e| e.to_string())?;
        return Ok(format!("golden recorded at {}", golden.display()));
    }
    let expected = std::fs::read(&golden).map_err(|e| e.to_string())?;
    ensure!(
        outputs[0] == expected,
        "report differs from golden {}",
        golden.display()
    );
    Ok("15 cells, 10 deltas; JSON and CSV bit-identical across runs and --workers 1/3/4; matches golden".into())
}

// ---------------------------------------------------------------------------

fn delta_semantics() -> Check {
    ensure!(delta_pp(0.70, 0.85) == 15.0, "got {}", delta_pp(0.70, 0.85));
    let cell = |enhancement, value| MatrixCell {
        augment: AugmentKind::Dark,
        enhancement,
        metric: "combined_accuracy".into(),
        value: Some(value),
        classification: None,
        detection: None,
        error: None,
    };
    let report = MatrixReport {
        model: "m".into(),
        task: Task::Classification,
        samples: 1,
        cells: vec![cell(EnhanceKind::None, 0.70), cell(EnhanceKind::He, 0.85)],
        deltas: vec![],
        checksums: vec![],
    };
    let rows = delta_report(&report).map_err(|e| e.to_string())?;
    ensure!(rows.len() == 1 && rows[0].delta_pp == 15.0, "delta table {rows:?}");
    ensure!(delta_pp(0.5, 0.4) == -10.0, "degradation sign");
    Ok("0.70 -> 0.85 reports +15.0 percentage points".into())
}
