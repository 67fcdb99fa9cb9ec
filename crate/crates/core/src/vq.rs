//! Patch vector quantization.
//!
//! Images are tiled into non-overlapping patches, each flattened row-major
//! with channels innermost, and mapped to the index of the nearest codebook
//! entry under squared Euclidean distance. Codebooks are learned with
//! k-means (k-means++ seeding, fixed Lloyd iteration budget).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{sample_weighted, seeded};
use crate::world::TokenLayout;
use crate::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchShape {
    pub patch_h: usize,
    pub patch_w: usize,
    pub channels: usize,
}

impl PatchShape {
    pub fn new(patch_h: usize, patch_w: usize, channels: usize) -> Result<Self> {
        if patch_h == 0 || patch_w == 0 || channels == 0 {
            return Err(Error::InvalidParameter(format!(
                "patch shape {patch_h}x{patch_w}x{channels} has a zero dimension"
            )));
        }
        Ok(Self { patch_h, patch_w, channels })
    }

    /// Length of a flattened patch vector.
    pub fn dim(&self) -> usize {
        self.patch_h * self.patch_w * self.channels
    }
}

/// `K x D` matrix of patch vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    shape: PatchShape,
    entries: Vec<f64>,
}

impl Codebook {
    pub fn new(shape: PatchShape, entries: Vec<Vec<f64>>) -> Result<Self> {
        let d = shape.dim();
        let mut flat = Vec::with_capacity(entries.len() * d);
        for e in &entries {
            if e.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: e.len() });
            }
            flat.extend_from_slice(e);
        }
        Self::from_flat(shape, flat)
    }

    pub fn from_flat(shape: PatchShape, entries: Vec<f64>) -> Result<Self> {
        let d = shape.dim();
        if entries.is_empty() || !entries.len().is_multiple_of(d) {
            return Err(Error::InvalidParameter(format!(
                "codebook data of length {} is not a positive multiple of {d}",
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("codebook entries must be finite".into()));
        }
        if entries.len() / d > Token::MAX as usize + 1 {
            return Err(Error::InvalidParameter("codebook has more entries than token ids".into()));
        }
        Ok(Self { shape, entries })
    }

    pub fn shape(&self) -> PatchShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.entries.len() / self.shape.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn entry(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.entries[j * d..(j + 1) * d]
    }

    pub fn entries(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.dim())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.entries
    }
}

/// `H x W x C` image with values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        let expected = height * width * channels;
        if pixels.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: pixels.len() });
        }
        if channels == 0 {
            return Err(Error::InvalidParameter("image needs at least one channel".into()));
        }
        Ok(Self { height, width, channels, pixels })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, pixels: vec![0.0; height * width * channels] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    fn check_tiling(&self, shape: PatchShape) -> Result<(usize, usize)> {
        if shape.channels != self.channels {
            return Err(Error::DimensionMismatch { expected: shape.channels, actual: self.channels });
        }
        if !self.height.is_multiple_of(shape.patch_h) {
            return Err(Error::DimensionMismatch { expected: shape.patch_h, actual: self.height });
        }
        if !self.width.is_multiple_of(shape.patch_w) {
            return Err(Error::DimensionMismatch { expected: shape.patch_w, actual: self.width });
        }
        Ok((self.height / shape.patch_h, self.width / shape.patch_w))
    }

    /// Flattened patch at patch row `pr`, patch column `pc`.
    pub fn patch(&self, shape: PatchShape, pr: usize, pc: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(shape.dim());
        let row_len = self.width * self.channels;
        for y in 0..shape.patch_h {
            let start = (pr * shape.patch_h + y) * row_len + pc * shape.patch_w * self.channels;
            out.extend_from_slice(&self.pixels[start..start + shape.patch_w * self.channels]);
        }
        out
    }

    fn write_patch(&mut self, shape: PatchShape, pr: usize, pc: usize, data: &[f64]) {
        let row_len = self.width * self.channels;
        let span = shape.patch_w * self.channels;
        for y in 0..shape.patch_h {
            let start = (pr * shape.patch_h + y) * row_len + pc * span;
            for (dst, &src) in self.pixels[start..start + span].iter_mut().zip(&data[y * span..(y + 1) * span]) {
                *dst = src.clamp(0.0, 1.0);
            }
        }
    }

    /// All patches in row-major patch order.
    pub fn patches(&self, shape: PatchShape) -> Result<Vec<Vec<f64>>> {
        let (rows, cols) = self.check_tiling(shape)?;
        Ok((0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).map(|(r, c)| self.patch(shape, r, c)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenGrid {
    pub rows: usize,
    pub cols: usize,
    pub tokens: Vec<Token>,
}

impl TokenGrid {
    pub fn new(rows: usize, cols: usize, tokens: Vec<Token>) -> Result<Self> {
        if tokens.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: tokens.len() });
        }
        Ok(Self { rows, cols, tokens })
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(z: &[f64], cb: &Codebook) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, e) in cb.entries().enumerate() {
        let d = squared_distance(z, e);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Index of the nearest entry; the lowest index wins ties.
pub fn quantize_patch(z: &[f64], cb: &Codebook) -> Result<usize> {
    if z.len() != cb.dim() {
        return Err(Error::DimensionMismatch { expected: cb.dim(), actual: z.len() });
    }
    Ok(nearest(z, cb).0)
}

pub fn encode(img: &ImageBuffer, cb: &Codebook) -> Result<TokenGrid> {
    let shape = cb.shape();
    let (rows, cols) = img.check_tiling(shape)?;
    let mut tokens = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            tokens.push(nearest(&img.patch(shape, r, c), cb).0 as Token);
        }
    }
    Ok(TokenGrid { rows, cols, tokens })
}

/// Writes each token's entry into its patch slot, clamped to `[0, 1]`.
pub fn decode(grid: &TokenGrid, cb: &Codebook) -> Result<ImageBuffer> {
    let shape = cb.shape();
    if grid.tokens.len() != grid.rows * grid.cols {
        return Err(Error::DimensionMismatch { expected: grid.rows * grid.cols, actual: grid.tokens.len() });
    }
    let mut img = ImageBuffer::zeros(grid.rows * shape.patch_h, grid.cols * shape.patch_w, shape.channels);
    for (i, &t) in grid.tokens.iter().enumerate() {
        if t as usize >= cb.len() {
            return Err(Error::TokenOutOfRange { token: t as u32, size: cb.len() });
        }
        img.write_patch(shape, i / grid.cols, i % grid.cols, cb.entry(t as usize));
    }
    Ok(img)
}

/// Mean squared error per pixel component.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if a.pixels.len() != b.pixels.len() {
        return Err(Error::DimensionMismatch { expected: a.pixels.len(), actual: b.pixels.len() });
    }
    if a.pixels.is_empty() {
        return Ok(0.0);
    }
    Ok(squared_distance(&a.pixels, &b.pixels) / a.pixels.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Mean squared distance of a patch to its assigned center, after
    /// seeding and after every accepted Lloyd iteration.
    pub history: Vec<f64>,
    pub assignments: Vec<usize>,
}

impl KMeansFit {
    pub fn distortion(&self) -> f64 {
        *self.history.last().expect("history is never empty")
    }
}

fn assign(patches: &[Vec<f64>], centers: &Codebook, out: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (a, p) in out.iter_mut().zip(patches) {
        let (j, d) = nearest(p, centers);
        *a = j;
        total += d;
    }
    total / patches.len() as f64
}

fn kmeans_pp<R: Rng + ?Sized>(patches: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<f64> {
    let d = patches[0].len();
    let mut centers = Vec::with_capacity(k * d);
    centers.extend_from_slice(&patches[rng.gen_range(0..patches.len())]);
    let mut dist: Vec<f64> = patches.iter().map(|p| squared_distance(p, &centers[..d])).collect();
    for _ in 1..k {
        let pick = sample_weighted(&dist, rng).unwrap_or_else(|| rng.gen_range(0..patches.len()));
        let c = &patches[pick];
        for (dp, p) in dist.iter_mut().zip(patches) {
            *dp = dp.min(squared_distance(p, c));
        }
        centers.extend_from_slice(c);
    }
    centers
}

/// k-means over patch vectors. Empty clusters keep their previous center
/// and an update that would raise the objective through rounding is
/// discarded, so `history` never increases.
pub fn learn_codebook(patches: &[Vec<f64>], shape: PatchShape, k: usize, iters: usize, rng_seed: u64) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::InvalidParameter("codebook size must be at least 1".into()));
    }
    if patches.len() < k {
        return Err(Error::TooFewPatches { needed: k, got: patches.len() });
    }
    let d = shape.dim();
    if let Some(p) = patches.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: p.len() });
    }
    let mut rng = seeded(rng_seed, 0);
    let mut codebook = Codebook::from_flat(shape, kmeans_pp(patches, k, &mut rng))?;
    let mut assignments = vec![0; patches.len()];
    let mut history = vec![assign(patches, &codebook, &mut assignments)];

    let mut scratch = assignments.clone();
    for _ in 0..iters {
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (p, &a) in patches.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a * d..(a + 1) * d].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut next = codebook.entries.clone();
        for j in 0..k {
            if counts[j] > 0 {
                for (c, s) in next[j * d..(j + 1) * d].iter_mut().zip(&sums[j * d..(j + 1) * d]) {
                    *c = s / counts[j] as f64;
                }
            }
        }
        let candidate = Codebook { shape, entries: next };
        let j = assign(patches, &candidate, &mut scratch);
        let prev = *history.last().expect("seeded");
        if j > prev {
            break;
        }
        codebook = candidate;
        core::mem::swap(&mut assignments, &mut scratch);
        history.push(j);
        if j == prev && assignments == scratch {
            break;
        }
    }
    Ok(KMeansFit { codebook, history, assignments })
}

const PALETTE: [[f64; 3]; 8] = [
    [0.85, 0.15, 0.15],
    [0.15, 0.65, 0.2],
    [0.2, 0.3, 0.85],
    [0.9, 0.8, 0.1],
    [0.7, 0.2, 0.75],
    [0.1, 0.75, 0.8],
    [0.95, 0.55, 0.1],
    [0.55, 0.55, 0.55],
];
const BACKGROUND: f64 = 0.05;

fn shape_mask(shape: usize, y: usize, x: usize, h: usize, w: usize) -> bool {
    // centered coordinates scaled to [-1, 1]
    let fy = (2 * y + 1) as f64 / h as f64 - 1.0;
    let fx = (2 * x + 1) as f64 / w as f64 - 1.0;
    match shape % 4 {
        0 => fy.abs() <= 0.8 && fx.abs() <= 0.8,
        1 => fx * fx + fy * fy <= 0.7,
        2 => fx.abs() + fy.abs() <= 0.9,
        _ => fx.abs() <= 0.3 || fy.abs() <= 0.3,
    }
}

/// Fixed RGB codebook that draws each world token as a colored glyph on a
/// dark background: token 0 is empty, objects use their shape for the glyph
/// and their color for the fill.
pub fn palette_codebook(layout: &TokenLayout, patch_h: usize, patch_w: usize) -> Result<Codebook> {
    let shape = PatchShape::new(patch_h, patch_w, 3)?;
    let mut entries = Vec::with_capacity(layout.vocab() * shape.dim());
    entries.extend(core::iter::repeat_n(BACKGROUND, shape.dim()));
    for t in 1..layout.vocab() {
        let (s, c) = layout.object_of(t as Token).expect("object token");
        // colors beyond the palette get a darker cycle
        let base = PALETTE[c % PALETTE.len()];
        let scale = 1.0 / (1 + c / PALETTE.len()) as f64;
        for y in 0..patch_h {
            for x in 0..patch_w {
                for ch in base {
                    entries.push(if shape_mask(s, y, x, patch_h, patch_w) { ch * scale } else { BACKGROUND });
                }
            }
        }
    }
    Codebook::from_flat(shape, entries)
}

/// Renders a world grid through `cb`, one patch per cell.
pub fn render_tokens(tokens: &[Token], layout: &TokenLayout, cb: &Codebook) -> Result<ImageBuffer> {
    decode(&TokenGrid::new(layout.grid_h, layout.grid_w, tokens.to_vec())?, cb)
}
