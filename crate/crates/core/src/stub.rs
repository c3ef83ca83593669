//! Deterministic stand-in backend. It needs no model: classification ranks
//! classes by the image's mean level and detection reports the brightest
//! 2×2 window. Every response echoes a checksum of the image it received.

use std::io::{BufRead, Write};

use crate::dataset::Task;
use crate::image::ImageU8;
use crate::protocol::{image_checksum, BackendHandshake, BackendMessage, ImagePayload, RankedClass, Request, WireBox};

#[derive(Clone, Debug)]
pub struct StubBackend {
    handshake: BackendHandshake,
}

impl Default for StubBackend {
    fn default() -> Self {
        Self::new(Task::Classification, 224, 224, 1000)
    }
}

impl StubBackend {
    pub fn new(task: Task, input_w: usize, input_h: usize, classes: usize) -> Self {
        Self {
            handshake: BackendHandshake {
                name: format!("stub-{task}"),
                task,
                input_w,
                input_h,
                classes,
            },
        }
    }

    pub fn handshake(&self) -> &BackendHandshake {
        &self.handshake
    }

    /// Rank 1 is `floor(mean) mod classes`; ranks 2-5 follow consecutively.
    pub fn classify(&self, img: &ImageU8) -> Vec<RankedClass> {
        let top = img.mean_level().floor() as usize % self.handshake.classes;
        (0..5)
            .map(|k| RankedClass {
                class: (top + k) % self.handshake.classes,
                score: 1.0 / (k + 1) as f64,
            })
            .collect()
    }

    /// One box over the brightest 2×2 window (first in raster order), mapped
    /// back to original coordinates; confidence is `mean / 255`.
    pub fn detect(&self, img: &ImageU8, orig: (usize, usize)) -> Vec<WireBox> {
        let (w, h) = (img.width(), img.height());
        let (ww, wh) = (w.min(2), h.min(2));
        let mut best = (0usize, 0usize, 0u32);
        let mut first = true;
        for y in 0..=h - wh {
            for x in 0..=w - ww {
                let mut sum = 0u32;
                for dy in 0..wh {
                    for dx in 0..ww {
                        sum += img.pixel(x + dx, y + dy).iter().map(|&v| v as u32).sum::<u32>();
                    }
                }
                if first || sum > best.2 {
                    best = (x, y, sum);
                    first = false;
                }
            }
        }
        let mean = img.mean_level();
        let sx = orig.0 as f64 / w as f64;
        let sy = orig.1 as f64 / h as f64;
        vec![WireBox {
            class: mean.floor() as usize % self.handshake.classes,
            x: best.0 as f64 * sx,
            y: best.1 as f64 * sy,
            w: ww as f64 * sx,
            h: wh as f64 * sy,
            score: mean / 255.0,
        }]
    }

    /// Answer one request line.
    pub fn respond(&self, line: &str) -> BackendMessage {
        let request: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                return BackendMessage::Error {
                    id: None,
                    message: format!("malformed request: {e}"),
                }
            }
        };
        let id = request.id();
        let (task, payload): (Task, &ImagePayload) = match &request {
            Request::Classify(p) => (Task::Classification, p),
            Request::Detect(p) => (Task::Detection, p),
        };
        if task != self.handshake.task {
            return BackendMessage::Error {
                id: Some(id),
                message: format!("{task} request sent to a {} backend", self.handshake.task),
            };
        }
        let img = match payload.decode() {
            Ok(img) => img,
            Err(e) => {
                return BackendMessage::Error {
                    id: Some(id),
                    message: e.to_string(),
                }
            }
        };
        let checksum = Some(image_checksum(&img));
        match task {
            Task::Classification => BackendMessage::Classification {
                id,
                ranking: self.classify(&img),
                checksum,
            },
            Task::Detection => BackendMessage::Detections {
                id,
                boxes: self.detect(&img, (payload.orig_width, payload.orig_height)),
                checksum,
            },
        }
    }

    /// Run the protocol until input closes. With `fail_after = Some(n)` the
    /// session stops answering after `n` requests, simulating a crash.
    pub fn serve<R: BufRead, W: Write>(
        &self,
        input: R,
        mut output: W,
        fail_after: Option<usize>,
    ) -> std::io::Result<()> {
        writeln!(
            output,
            "{}",
            serde_json::to_string(&BackendMessage::Handshake(self.handshake.clone()))?
        )?;
        output.flush()?;
        let mut served = 0usize;
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if fail_after.is_some_and(|n| served >= n) {
                return Ok(());
            }
            let reply = self.respond(&line);
            writeln!(output, "{}", serde_json::to_string(&reply)?)?;
            output.flush()?;
            served += 1;
        }
        Ok(())
    }
}
