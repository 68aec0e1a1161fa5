//! Deterministic synthetic mini-dataset generator: 30 frames across the
//! three supported source formats, used by the end-to-end tests so no real
//! dataset download is ever needed.
//!
//! Layout under the output root:
//!   kitti/images/*.png + kitti/labels/*.txt     (10 frames)
//!   bdd/images/*.png   + bdd/bdd_labels.json    (10 frames, one boxless
//!                                                lane label)
//!   flir/images/*.png  + flir/annotations.json  (10 frames, one with no
//!                                                objects)

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use vru_core::augment::ImageBuffer;

use crate::error::{write_text, Result};
use crate::imageio::save_png;

pub const IMG_W: u32 = 96;
pub const IMG_H: u32 = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureSummary {
    pub seed: u64,
    pub frames: u64,
    pub kitti_annotations: u64,
    pub bdd_annotations: u64,
    pub bdd_boxless: u64,
    pub flir_annotations: u64,
}

impl FixtureSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

struct Object {
    class_idx: usize,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

fn sample_objects(rng: &mut ChaCha8Rng, n_classes: usize, count: usize) -> Vec<Object> {
    (0..count)
        .map(|_| {
            let w = rng.random_range(8..=18) as f64;
            let h = rng.random_range(8..=14) as f64;
            let x = rng.random_range(1..=(IMG_W as i64 - 20)) as f64;
            let y = rng.random_range(1..=(IMG_H as i64 - 16)) as f64;
            Object {
                class_idx: rng.random_range(0..n_classes),
                x,
                y,
                w,
                h,
            }
        })
        .collect()
}

/// Renders a frame: smooth background gradient plus one filled rectangle
/// per object, colored by class.
fn render_frame(rng: &mut ChaCha8Rng, objects: &[Object], grayscale: bool) -> ImageBuffer {
    let mut img = ImageBuffer::new(IMG_W, IMG_H).expect("nonzero dimensions");
    let base: [u8; 3] = [
        rng.random_range(40..120),
        rng.random_range(40..120),
        rng.random_range(40..120),
    ];
    for y in 0..IMG_H {
        for x in 0..IMG_W {
            let shade = ((x + 2 * y) % 64) as u8;
            let mut px = [
                base[0].saturating_add(shade),
                base[1].saturating_add(shade / 2),
                base[2].saturating_add(shade / 3),
            ];
            if grayscale {
                let g = ((px[0] as u16 + px[1] as u16 + px[2] as u16) / 3) as u8;
                px = [g, g, g];
            }
            img.set_pixel(x, y, px);
        }
    }
    for obj in objects {
        let tone = (50 + 23 * obj.class_idx as u16 % 200) as u8;
        let px = if grayscale {
            [tone.saturating_add(60); 3]
        } else {
            [tone, 255 - tone, 128u8.wrapping_add(tone)]
        };
        let x1 = (obj.x + obj.w).min(IMG_W as f64) as u32;
        let y1 = (obj.y + obj.h).min(IMG_H as f64) as u32;
        for y in obj.y as u32..y1 {
            for x in obj.x as u32..x1 {
                img.set_pixel(x, y, px);
            }
        }
    }
    img
}

fn make_kitti(root: &Path, rng: &mut ChaCha8Rng) -> Result<u64> {
    const CLASSES: [&str; 7] = [
        "Car",
        "Van",
        "Pedestrian",
        "Person_sitting",
        "Cyclist",
        "Truck",
        "DontCare",
    ];
    let mut total = 0u64;
    for i in 0..10 {
        let frame = format!("kitti_{i:04}");
        let count = rng.random_range(1..=4);
        let objects = sample_objects(rng, CLASSES.len(), count);
        let img = render_frame(rng, &objects, false);
        save_png(&root.join("images").join(format!("{frame}.png")), &img)?;
        let mut text = String::new();
        for o in &objects {
            text.push_str(&format!(
                "{} 0.00 0 0.0 {:.2} {:.2} {:.2} {:.2} 0.0 0.0 0.0 0.0 0.0 0.0 0.0\n",
                CLASSES[o.class_idx],
                o.x,
                o.y,
                o.x + o.w,
                o.y + o.h
            ));
            total += 1;
        }
        write_text(&root.join("labels").join(format!("{frame}.txt")), &text)?;
    }
    Ok(total)
}

fn make_bdd(root: &Path, rng: &mut ChaCha8Rng) -> Result<(u64, u64)> {
    const CLASSES: [&str; 7] = [
        "car",
        "person",
        "rider",
        "bus",
        "truck",
        "motor",
        "traffic sign",
    ];
    let mut frames = Vec::new();
    let mut total = 0u64;
    let mut boxless = 0u64;
    for i in 0..10 {
        let name = format!("bdd_{i:04}.png");
        let count = rng.random_range(1..=4);
        let objects = sample_objects(rng, CLASSES.len(), count);
        let img = render_frame(rng, &objects, false);
        save_png(&root.join("images").join(&name), &img)?;
        let mut labels: Vec<serde_json::Value> = objects
            .iter()
            .map(|o| {
                total += 1;
                json!({
                    "category": CLASSES[o.class_idx],
                    "box2d": {"x1": o.x, "y1": o.y, "x2": o.x + o.w, "y2": o.y + o.h}
                })
            })
            .collect();
        // one frame carries a lane polyline, which has no 2D box
        if i == 3 {
            labels.push(json!({"category": "lane"}));
            boxless += 1;
        }
        frames.push(json!({"name": name, "labels": labels}));
    }
    write_text(
        &root.join("bdd_labels.json"),
        &serde_json::to_string_pretty(&frames).expect("fixture JSON serializes"),
    )?;
    Ok((total, boxless))
}

fn make_flir(root: &Path, rng: &mut ChaCha8Rng) -> Result<u64> {
    const CLASSES: [&str; 6] = ["person", "car", "bike", "dog", "motor", "sign"];
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut next_id = 1u64;
    for i in 0..10u64 {
        let name = format!("flir_{i:04}.png");
        // the last frame is object-free, mirroring frames the source
        // dataset ships without annotations
        let count = if i == 9 { 0 } else { rng.random_range(1..=4) };
        let objects = sample_objects(rng, CLASSES.len(), count);
        let img = render_frame(rng, &objects, true);
        save_png(&root.join("images").join(&name), &img)?;
        images.push(json!({
            "id": i + 1,
            "file_name": name,
            "width": IMG_W,
            "height": IMG_H
        }));
        for o in &objects {
            annotations.push(json!({
                "id": next_id,
                "image_id": i + 1,
                "category_id": o.class_idx as u64 + 1,
                "bbox": [o.x, o.y, o.w, o.h]
            }));
            next_id += 1;
        }
    }
    let categories: Vec<serde_json::Value> = CLASSES
        .iter()
        .enumerate()
        .map(|(idx, name)| json!({"id": idx as u64 + 1, "name": name}))
        .collect();
    let doc = json!({
        "images": images,
        "annotations": annotations,
        "categories": categories
    });
    write_text(
        &root.join("annotations.json"),
        &serde_json::to_string_pretty(&doc).expect("fixture JSON serializes"),
    )?;
    Ok(next_id - 1)
}

/// Generates the full 30-frame fixture set under `out_root`, deterministic
/// in `seed`.
pub fn make_fixtures(out_root: &Path, seed: u64) -> Result<FixtureSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kitti_annotations = make_kitti(&out_root.join("kitti"), &mut rng)?;
    let (bdd_annotations, bdd_boxless) = make_bdd(&out_root.join("bdd"), &mut rng)?;
    let flir_annotations = make_flir(&out_root.join("flir"), &mut rng)?;
    Ok(FixtureSummary {
        seed,
        frames: 30,
        kitti_annotations,
        bdd_annotations,
        bdd_boxless,
        flir_annotations,
    })
}
