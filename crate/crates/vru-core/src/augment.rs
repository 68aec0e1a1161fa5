//! Deterministic photometric augmentation on 8-bit RGB buffers.
//!
//! Every transform is seeded from `hash(master_seed, frame_seed)`, so output
//! is bit-identical for the same inputs regardless of the order frames are
//! processed in. All transforms are photometric or occlusion-style, so
//! annotation boxes pass through unchanged. Pixel arithmetic saturates into
//! `[0, 255]`.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::Annotation;

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("image is zero-sized ({width}x{height})")]
    ZeroSized { width: u32, height: u32 },
    #[error("pixel data length {len} does not match {width}x{height}x3")]
    BadDataLength { width: u32, height: u32, len: usize },
    #[error("invalid pipeline spec: {0}")]
    BadSpec(String),
}

/// Row-major 8-bit RGB pixel buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32) -> Result<Self, AugmentError> {
        if width == 0 || height == 0 {
            return Err(AugmentError::ZeroSized { width, height });
        }
        Ok(Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 3],
        })
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, AugmentError> {
        if width == 0 || height == 0 {
            return Err(AugmentError::ZeroSized { width, height });
        }
        if data.len() != width as usize * height as usize * 3 {
            return Err(AugmentError::BadDataLength {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.idx(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, px: [u8; 3]) {
        let i = self.idx(x, y);
        self.data[i..i + 3].copy_from_slice(&px);
    }
}

fn clamp_u8(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 255.0)) as u8
}

/// A single photometric or occlusion transform with its parameter ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Transform {
    BrightnessContrast {
        brightness: (f64, f64),
        contrast: (f64, f64),
    },
    GaussianBlur {
        sigma: (f64, f64),
    },
    GaussNoise {
        sigma: (f64, f64),
    },
    Rain {
        streaks: (u32, u32),
    },
    Fog {
        alpha: (f64, f64),
    },
    Snow {
        density: (f64, f64),
    },
    CoarseDropout {
        holes: (u32, u32),
        size_frac: (f64, f64),
    },
    GridDropout {
        ratio: f64,
        cell_frac: f64,
    },
    ToGray,
    ChannelDropout,
}

impl Transform {
    pub fn name(&self) -> &'static str {
        match self {
            Transform::BrightnessContrast { .. } => "brightness_contrast",
            Transform::GaussianBlur { .. } => "gaussian_blur",
            Transform::GaussNoise { .. } => "gauss_noise",
            Transform::Rain { .. } => "rain",
            Transform::Fog { .. } => "fog",
            Transform::Snow { .. } => "snow",
            Transform::CoarseDropout { .. } => "coarse_dropout",
            Transform::GridDropout { .. } => "grid_dropout",
            Transform::ToGray => "to_gray",
            Transform::ChannelDropout => "channel_dropout",
        }
    }
}

/// One pipeline step: applied with `probability`; when `choices` holds more
/// than one transform, a single one is picked uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub choices: Vec<Transform>,
    pub probability: f64,
}

impl Stage {
    fn single(t: Transform) -> Self {
        Self {
            choices: vec![t],
            probability: 1.0,
        }
    }

    fn one_of(ts: Vec<Transform>) -> Self {
        Self {
            choices: ts,
            probability: 1.0,
        }
    }
}

/// Named augmentation regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    None,
    Light,
    Heavy,
    Custom,
}

/// Ordered transform pipeline plus the master seed all frame seeds are
/// hashed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub level: Level,
    pub stages: Vec<Stage>,
    pub master_seed: u64,
}

fn default_brightness_contrast() -> Transform {
    Transform::BrightnessContrast {
        brightness: (-0.2, 0.2),
        contrast: (-0.2, 0.2),
    }
}

fn default_blur() -> Transform {
    Transform::GaussianBlur { sigma: (0.5, 2.0) }
}

fn default_noise() -> Transform {
    Transform::GaussNoise { sigma: (5.0, 25.0) }
}

fn default_weather() -> Vec<Transform> {
    vec![
        Transform::Rain { streaks: (20, 60) },
        Transform::Fog { alpha: (0.1, 0.4) },
        Transform::Snow {
            density: (0.002, 0.01),
        },
    ]
}

impl PipelineSpec {
    pub fn none(master_seed: u64) -> Self {
        Self {
            level: Level::None,
            stages: vec![],
            master_seed,
        }
    }

    /// Reduced regime: brightness/contrast, blur, noise, one weather effect.
    pub fn light(master_seed: u64) -> Self {
        Self {
            level: Level::Light,
            stages: vec![
                Stage::single(default_brightness_contrast()),
                Stage::single(default_blur()),
                Stage::single(default_noise()),
                Stage::one_of(default_weather()),
            ],
            master_seed,
        }
    }

    /// Full regime: dropout, color degradation, brightness/contrast,
    /// blur-or-noise, one weather effect.
    pub fn heavy(master_seed: u64) -> Self {
        Self {
            level: Level::Heavy,
            stages: vec![
                Stage::one_of(vec![
                    Transform::CoarseDropout {
                        holes: (4, 8),
                        size_frac: (0.05, 0.15),
                    },
                    Transform::GridDropout {
                        ratio: 0.3,
                        cell_frac: 0.12,
                    },
                ]),
                Stage::one_of(vec![Transform::ToGray, Transform::ChannelDropout]),
                Stage::single(default_brightness_contrast()),
                Stage::one_of(vec![default_blur(), default_noise()]),
                Stage::one_of(default_weather()),
            ],
            master_seed,
        }
    }

    pub fn for_level(level: Level, master_seed: u64) -> Self {
        match level {
            Level::None => Self::none(master_seed),
            Level::Light => Self::light(master_seed),
            Level::Heavy => Self::heavy(master_seed),
            Level::Custom => Self {
                level: Level::Custom,
                stages: vec![],
                master_seed,
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self, AugmentError> {
        let spec: PipelineSpec =
            serde_json::from_str(text).map_err(|e| AugmentError::BadSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline spec serializes")
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        for stage in &self.stages {
            if stage.choices.is_empty() {
                return Err(AugmentError::BadSpec("stage with no choices".to_string()));
            }
            if !(0.0..=1.0).contains(&stage.probability) {
                return Err(AugmentError::BadSpec(
                    "stage probability outside [0, 1]".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Log entry for one applied transform and its sampled parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedTransform {
    pub name: String,
    pub params: Vec<(String, f64)>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn frame_rng(master_seed: u64, frame_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(master_seed) ^ frame_seed))
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn sample_range_u32(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> u32 {
    if lo >= hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Applies the pipeline to one frame. The RNG is seeded from the pair
/// (master seed, frame seed), so per-frame results do not depend on
/// processing order. Boxes are returned unchanged.
pub fn apply_pipeline(
    img: &ImageBuffer,
    annos: &[Annotation],
    spec: &PipelineSpec,
    frame_seed: u64,
) -> Result<(ImageBuffer, Vec<Annotation>, Vec<AppliedTransform>), AugmentError> {
    if img.width == 0 || img.height == 0 {
        return Err(AugmentError::ZeroSized {
            width: img.width,
            height: img.height,
        });
    }
    spec.validate()?;
    let mut rng = frame_rng(spec.master_seed, frame_seed);
    let mut out = img.clone();
    let mut log = Vec::new();
    for stage in &spec.stages {
        let roll: f64 = rng.random();
        if roll >= stage.probability {
            continue;
        }
        let pick = if stage.choices.len() == 1 {
            0
        } else {
            rng.random_range(0..stage.choices.len())
        };
        let applied = apply_transform(&mut out, &stage.choices[pick], &mut rng);
        log.push(applied);
    }
    Ok((out, annos.to_vec(), log))
}

fn apply_transform(
    img: &mut ImageBuffer,
    transform: &Transform,
    rng: &mut ChaCha8Rng,
) -> AppliedTransform {
    let mut params = Vec::new();
    match transform {
        Transform::BrightnessContrast {
            brightness,
            contrast,
        } => {
            let b = sample_range(rng, *brightness);
            let c = sample_range(rng, *contrast);
            params.push(("brightness".to_string(), b));
            params.push(("contrast".to_string(), c));
            let shift = libm::round(b * 255.0);
            for v in img.data.iter_mut() {
                *v = clamp_u8((*v as f64 - 128.0) * (1.0 + c) + 128.0 + shift);
            }
        }
        Transform::GaussianBlur { sigma } => {
            let s = sample_range(rng, *sigma);
            params.push(("sigma".to_string(), s));
            gaussian_blur(img, s);
        }
        Transform::GaussNoise { sigma } => {
            let s = sample_range(rng, *sigma);
            params.push(("sigma".to_string(), s));
            let normal = Normal::new(0.0, s.max(1e-9)).expect("valid noise sigma");
            for v in img.data.iter_mut() {
                *v = clamp_u8(*v as f64 + normal.sample(rng));
            }
        }
        Transform::Rain { streaks } => {
            let n = sample_range_u32(rng, *streaks);
            params.push(("streaks".to_string(), n as f64));
            rain(img, n, rng);
        }
        Transform::Fog { alpha } => {
            let a = sample_range(rng, *alpha);
            params.push(("alpha".to_string(), a));
            fog(img, a, rng);
        }
        Transform::Snow { density } => {
            let d = sample_range(rng, *density);
            params.push(("density".to_string(), d));
            snow(img, d, rng);
        }
        Transform::CoarseDropout { holes, size_frac } => {
            let k = sample_range_u32(rng, *holes);
            params.push(("holes".to_string(), k as f64));
            coarse_dropout(img, k, *size_frac, rng);
        }
        Transform::GridDropout { ratio, cell_frac } => {
            params.push(("ratio".to_string(), *ratio));
            grid_dropout(img, *ratio, *cell_frac);
        }
        Transform::ToGray => {
            for i in (0..img.data.len()).step_by(3) {
                let luma = clamp_u8(
                    0.299 * img.data[i] as f64
                        + 0.587 * img.data[i + 1] as f64
                        + 0.114 * img.data[i + 2] as f64,
                );
                img.data[i] = luma;
                img.data[i + 1] = luma;
                img.data[i + 2] = luma;
            }
        }
        Transform::ChannelDropout => {
            let ch = rng.random_range(0..3usize);
            params.push(("channel".to_string(), ch as f64));
            for i in (0..img.data.len()).step_by(3) {
                img.data[i + ch] = 0;
            }
        }
    }
    AppliedTransform {
        name: transform.name().to_string(),
        params,
    }
}

fn reflect(i: i64, n: i64) -> i64 {
    // reflect-101 border handling
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    i
}

fn gaussian_blur(img: &mut ImageBuffer, sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let radius = libm::ceil(3.0 * sigma) as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let denom = 2.0 * sigma * sigma;
    let mut sum = 0.0;
    for i in -radius..=radius {
        let w = libm::exp(-((i * i) as f64) / denom);
        kernel.push(w);
        sum += w;
    }
    for w in kernel.iter_mut() {
        *w /= sum;
    }

    let (w, h) = (img.width as i64, img.height as i64);
    let mut tmp = vec![0.0f64; img.data.len()];
    // horizontal
    for y in 0..h {
        for x in 0..w {
            for c in 0..3usize {
                let mut acc = 0.0;
                for (ki, kw) in kernel.iter().enumerate() {
                    let sx = reflect(x + ki as i64 - radius, w);
                    acc += kw * img.data[((y * w + sx) * 3) as usize + c] as f64;
                }
                tmp[((y * w + x) * 3) as usize + c] = acc;
            }
        }
    }
    // vertical
    for y in 0..h {
        for x in 0..w {
            for c in 0..3usize {
                let mut acc = 0.0;
                for (ki, kw) in kernel.iter().enumerate() {
                    let sy = reflect(y + ki as i64 - radius, h);
                    acc += kw * tmp[((sy * w + x) * 3) as usize + c];
                }
                img.data[((y * w + x) * 3) as usize + c] = clamp_u8(acc);
            }
        }
    }
}

fn blend(px: [u8; 3], target: [f64; 3], alpha: f64) -> [u8; 3] {
    [
        clamp_u8(px[0] as f64 * (1.0 - alpha) + target[0] * alpha),
        clamp_u8(px[1] as f64 * (1.0 - alpha) + target[1] * alpha),
        clamp_u8(px[2] as f64 * (1.0 - alpha) + target[2] * alpha),
    ]
}

fn rain(img: &mut ImageBuffer, streaks: u32, rng: &mut ChaCha8Rng) {
    let (w, h) = (img.width as i64, img.height as i64);
    for _ in 0..streaks {
        let x0 = rng.random_range(0..w);
        let y0 = rng.random_range(0..h);
        let len = rng.random_range(4..=(h / 3).max(5));
        let slant = rng.random_range(-3i64..=3);
        for t in 0..len {
            let x = x0 + slant * t / len.max(1);
            let y = y0 + t;
            if x >= 0 && x < w && y >= 0 && y < h {
                let px = img.pixel(x as u32, y as u32);
                img.set_pixel(x as u32, y as u32, blend(px, [200.0, 200.0, 210.0], 0.6));
            }
        }
    }
}

fn fog(img: &mut ImageBuffer, alpha: f64, rng: &mut ChaCha8Rng) {
    // low-frequency haze: coarse alpha grid, bilinearly upsampled
    const GRID: usize = 5;
    let mut grid = [[0.0f64; GRID]; GRID];
    for row in grid.iter_mut() {
        for cell in row.iter_mut() {
            *cell = alpha * rng.random_range(0.5..=1.0);
        }
    }
    let (w, h) = (img.width, img.height);
    for y in 0..h {
        for x in 0..w {
            let gx = x as f64 / w.max(1) as f64 * (GRID - 1) as f64;
            let gy = y as f64 / h.max(1) as f64 * (GRID - 1) as f64;
            let (ix, iy) = (gx as usize, gy as usize);
            let (fx, fy) = (gx - ix as f64, gy - iy as f64);
            let (ix1, iy1) = ((ix + 1).min(GRID - 1), (iy + 1).min(GRID - 1));
            let a = grid[iy][ix] * (1.0 - fx) * (1.0 - fy)
                + grid[iy][ix1] * fx * (1.0 - fy)
                + grid[iy1][ix] * (1.0 - fx) * fy
                + grid[iy1][ix1] * fx * fy;
            let px = img.pixel(x, y);
            img.set_pixel(x, y, blend(px, [220.0, 220.0, 220.0], a));
        }
    }
}

fn snow(img: &mut ImageBuffer, density: f64, rng: &mut ChaCha8Rng) {
    let (w, h) = (img.width as i64, img.height as i64);
    let n = libm::round(density * (w * h) as f64).max(1.0) as u64;
    for _ in 0..n {
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        let r = rng.random_range(0..=1i64);
        for dy in -r..=r {
            for dx in -r..=r {
                let (sx, sy) = (x + dx, y + dy);
                if sx >= 0 && sx < w && sy >= 0 && sy < h {
                    let px = img.pixel(sx as u32, sy as u32);
                    img.set_pixel(sx as u32, sy as u32, blend(px, [255.0, 255.0, 255.0], 0.9));
                }
            }
        }
    }
}

fn coarse_dropout(img: &mut ImageBuffer, holes: u32, size_frac: (f64, f64), rng: &mut ChaCha8Rng) {
    let (w, h) = (img.width, img.height);
    for _ in 0..holes {
        let hw = (sample_range(rng, size_frac) * w as f64).max(1.0) as u32;
        let hh = (sample_range(rng, size_frac) * h as f64).max(1.0) as u32;
        let x0 = rng.random_range(0..w);
        let y0 = rng.random_range(0..h);
        for y in y0..(y0 + hh).min(h) {
            for x in x0..(x0 + hw).min(w) {
                img.set_pixel(x, y, [0, 0, 0]);
            }
        }
    }
}

fn grid_dropout(img: &mut ImageBuffer, ratio: f64, cell_frac: f64) {
    let (w, h) = (img.width, img.height);
    let unit = ((cell_frac * w.min(h) as f64) as u32).max(2);
    let drop = ((ratio * unit as f64) as u32).max(1);
    let mut y0 = 0;
    while y0 < h {
        let mut x0 = 0;
        while x0 < w {
            for y in y0..(y0 + drop).min(h) {
                for x in x0..(x0 + drop).min(w) {
                    img.set_pixel(x, y, [0, 0, 0]);
                }
            }
            x0 += unit;
        }
        y0 += unit;
    }
}
