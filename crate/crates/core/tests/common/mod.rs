#![allow(dead_code)]

use std::path::{Path, PathBuf};

use advlens::image::save_png;
use advlens::ImageU8;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_image(rng: &mut impl Rng, w: usize, h: usize, lo: u8, hi: u8) -> ImageU8 {
    ImageU8::from_fn(w, h, |_, _| {
        [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)]
    })
    .unwrap()
}

/// Smooth shading, a couple of blobs and sensor noise at a random exposure;
/// closer to photographs than i.i.d. noise.
pub fn scene_image(rng: &mut impl Rng, w: usize, h: usize) -> ImageU8 {
    let exposure: f64 = rng.gen_range(60.0..200.0);
    let tint: [f64; 3] = [
        rng.gen_range(0.7..1.2),
        rng.gen_range(0.7..1.2),
        rng.gen_range(0.7..1.2),
    ];
    let (gx, gy): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let blobs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(2.0..(w.max(h) as f64 / 3.0).max(3.0)),
                rng.gen_range(-80.0..80.0),
            )
        })
        .collect();
    let noise: Vec<f64> = (0..w * h * 3).map(|_| rng.gen_range(-12.0..12.0)).collect();
    ImageU8::from_fn(w, h, |x, y| {
        let (xf, yf) = (x as f64 / w as f64 - 0.5, y as f64 / h as f64 - 0.5);
        let mut base = exposure * (1.0 + 0.6 * (gx * xf + gy * yf));
        for &(bx, by, r, amp) in &blobs {
            let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
            base += amp * (-d2 / (2.0 * r * r)).exp();
        }
        let i = (y * w + x) * 3;
        std::array::from_fn(|c| (base * tint[c] + noise[i + c]).round().clamp(0.0, 255.0) as u8)
    })
    .unwrap()
}

/// `n` scene images plus an index file whose integer labels are the floor of
/// each image's mean level.
pub fn classification_fixture(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut r = rng(seed);
    let mut index = String::new();
    for i in 0..n {
        let (w, h) = (r.gen_range(24..48), r.gen_range(20..40));
        let img = scene_image(&mut r, w, h);
        let rel = format!("images/img_{i:02}.png");
        save_png(&img, &dir.join(&rel)).unwrap();
        index.push_str(&format!("{rel}\t{}\n", img.mean_level().floor() as usize));
    }
    let path = dir.join("index.tsv");
    std::fs::write(&path, index).unwrap();
    path
}

/// Detection fixture: each image has one bright square on a darker field; the
/// square is the ground truth box. Returns the annotation file path; images
/// live in `dir/images`.
pub fn detection_fixture(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut r = rng(seed);
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for i in 0..n {
        let (w, h) = (r.gen_range(24..40), r.gen_range(24..40));
        let (bx, by) = (r.gen_range(0..w - 8), r.gen_range(0..h - 8));
        let size = r.gen_range(2..8);
        let field: u8 = r.gen_range(20..90);
        let img = ImageU8::from_fn(w, h, |x, y| {
            if x >= bx && x < bx + size && y >= by && y < by + size {
                [250, 245, 240]
            } else {
                [field, field, field.saturating_add(10)]
            }
        })
        .unwrap();
        let name = format!("d_{i:02}.png");
        save_png(&img, &dir.join("images").join(&name)).unwrap();
        images.push(serde_json::json!({"id": 100 + i, "file_name": name, "width": w, "height": h}));
        annotations.push(serde_json::json!({
            "id": i, "image_id": 100 + i, "category_id": 1 + (i % 2) * 6,
            "bbox": [bx, by, size, size]
        }));
    }
    let coco = serde_json::json!({
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "light"}, {"id": 7, "name": "lamp"}],
    });
    let path = dir.join("annotations.json");
    std::fs::write(&path, serde_json::to_string_pretty(&coco).unwrap()).unwrap();
    path
}

pub fn stub_exe() -> &'static str {
    env!("CARGO_BIN_EXE_advlens-stub")
}

pub fn cli_exe() -> &'static str {
    env!("CARGO_BIN_EXE_advlens")
}
