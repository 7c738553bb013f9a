//! MNIST IDX parsing, trit quantization of fixed image patches, and a
//! synthetic stand-in dataset.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::dist::{Pmf, StateSpace};
use crate::error::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IMAGE_SIDE: usize = 28;
/// Number of images in the MNIST training set.
pub const MNIST_TRAIN_COUNT: usize = 60_000;

/// Decoded IDX image tensor, `count × rows × cols` bytes in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Images {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl Images {
    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse {
            offset: bytes.len(),
            message: format!("header truncated: need {} bytes, got {}", offset + 4, bytes.len()),
        })
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<Images> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("wrong magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x} (image file)"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Parse {
            offset: 4,
            message: format!("dimensions {count}x{rows}x{cols} overflow"),
        })?;
    let payload = &bytes[16..];
    if payload.len() < len {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("payload truncated: expected {len} bytes, got {}", payload.len()),
        });
    }
    if payload.len() > len {
        return Err(Error::Parse {
            offset: 16 + len,
            message: format!("{} trailing bytes after payload", payload.len() - len),
        });
    }
    Ok(Images {
        count,
        rows,
        cols,
        pixels: payload.to_vec(),
    })
}

pub fn encode_idx(images: &Images) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IDX_IMAGE_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

/// Reads a raw or gzip-compressed IDX image file.
pub fn read_idx_file(path: &Path) -> Result<Images> {
    let raw = std::fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut buf = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut buf)?;
        parse_idx_images(&buf)
    } else {
        parse_idx_images(&raw)
    }
}

/// Finds the MNIST training images in `dir` under its usual file names.
pub fn find_mnist_images(dir: &Path) -> Option<std::path::PathBuf> {
    [
        "train-images-idx3-ubyte",
        "train-images-idx3-ubyte.gz",
        "train-images.idx3-ubyte",
    ]
    .iter()
    .map(|n| dir.join(n))
    .find(|p| p.is_file())
}

/// Pixel-to-level rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantization {
    /// `floor(v · levels / 256)`.
    #[default]
    EqualWidth,
}

impl Quantization {
    pub fn level(self, v: u8, levels: usize) -> usize {
        match self {
            Quantization::EqualWidth => v as usize * levels / 256,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quantization::EqualWidth => "equal-width",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
    pub levels: usize,
}

impl PatchSpec {
    pub fn at(row: usize, col: usize) -> Self {
        PatchSpec {
            row,
            col,
            height: 2,
            width: 2,
            levels: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::domain(format!("need at least 2 levels, got {}", self.levels)));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::domain("empty patch"));
        }
        if self.row + self.height > IMAGE_SIDE || self.col + self.width > IMAGE_SIDE {
            return Err(Error::domain(format!(
                "patch {}x{} at ({}, {}) leaves the {IMAGE_SIDE}x{IMAGE_SIDE} image",
                self.height, self.width, self.row, self.col
            )));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<StateSpace> {
        StateSpace::uniform(self.height * self.width, self.levels)
    }

    fn overlaps(&self, other: &PatchSpec) -> bool {
        self.row < other.row + other.height
            && other.row < self.row + self.height
            && self.col < other.col + other.width
            && other.col < self.col + self.width
    }
}

impl std::fmt::Display for PatchSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}@{},{}", self.height, self.width, self.row, self.col)
    }
}

/// Validates a patch set: every patch in bounds and no two overlapping.
pub fn validate_patch_set(patches: &[PatchSpec]) -> Result<()> {
    for (i, p) in patches.iter().enumerate() {
        p.validate()?;
        if let Some(q) = patches[..i].iter().find(|q| q.overlaps(p)) {
            return Err(Error::domain(format!("patches {q} and {p} overlap")));
        }
    }
    Ok(())
}

/// Eight adjacent 2×2 patches in the centre of the digit field: rows 12 and
/// 14, columns 10, 12, 14 and 16.
pub fn default_patch_locations() -> Vec<PatchSpec> {
    [12, 14]
        .iter()
        .flat_map(|&r| [10, 12, 14, 16].map(|c| PatchSpec::at(r, c)))
        .collect()
}

/// Parses `"r,c;r,c;..."` into 2×2 three-level patches.
pub fn parse_patch_list(s: &str) -> Result<Vec<PatchSpec>> {
    let patches = s
        .split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let mut it = t.split(',').map(|v| v.trim().parse::<usize>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(r)), Some(Ok(c)), None) => Ok(PatchSpec::at(r, c)),
                _ => Err(Error::domain(format!("bad patch location {t:?}, expected row,col"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    validate_patch_set(&patches)?;
    Ok(patches)
}

/// Sample counts over a discrete space with their normalized distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDataset {
    space: StateSpace,
    counts: Vec<u64>,
    total: u64,
    pmf: Pmf,
}

impl EmpiricalDataset {
    pub fn from_counts(space: StateSpace, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != space.total() {
            return Err(Error::domain(format!(
                "{} counts for a space of {} states",
                counts.len(),
                space.total()
            )));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::domain("dataset has no samples"));
        }
        let pmf = Pmf::from_weights(space.clone(), counts.iter().map(|&c| c as f64 / total as f64).collect())?;
        Ok(EmpiricalDataset {
            space,
            counts,
            total,
            pmf,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sample count `T`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    /// Adds another dataset's counts over the same space.
    pub fn merge(&self, other: &EmpiricalDataset) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::domain("cannot merge datasets over different spaces"));
        }
        let counts = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        Self::from_counts(self.space.clone(), counts)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DatasetDoc {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            cards: self.space.cards().to_vec(),
            counts: self.counts.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: DatasetDoc = serde_json::from_str(s)?;
        if doc.format != DATASET_FORMAT || doc.version != DATASET_VERSION {
            return Err(Error::domain(format!(
                "unsupported dataset document {} v{}",
                doc.format, doc.version
            )));
        }
        Self::from_counts(StateSpace::new(doc.cards)?, doc.counts)
    }
}

const DATASET_FORMAT: &str = "lodkit-dataset";
const DATASET_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DatasetDoc {
    format: String,
    version: u32,
    cards: Vec<usize>,
    counts: Vec<u64>,
}

/// Patch state of one image: pixels row-major, each quantized.
pub fn patch_state(image: &[u8], cols: usize, spec: &PatchSpec, quant: Quantization) -> Vec<usize> {
    let mut state = Vec::with_capacity(spec.height * spec.width);
    for r in spec.row..spec.row + spec.height {
        for c in spec.col..spec.col + spec.width {
            state.push(quant.level(image[r * cols + c], spec.levels));
        }
    }
    state
}

pub fn quantize_and_extract(images: &Images, spec: &PatchSpec) -> Result<EmpiricalDataset> {
    quantize_and_extract_with(images, spec, Quantization::EqualWidth)
}

pub fn quantize_and_extract_with(images: &Images, spec: &PatchSpec, quant: Quantization) -> Result<EmpiricalDataset> {
    if spec.levels < 2 || spec.row + spec.height > images.rows || spec.col + spec.width > images.cols {
        return Err(Error::domain(format!(
            "patch {spec} does not fit {}x{} images",
            images.rows, images.cols
        )));
    }
    let space = spec.space()?;
    let mut counts = vec![0u64; space.total()];
    for i in 0..images.count {
        let state = patch_state(images.image(i), images.cols, spec, quant);
        counts[space.index(&state)?] += 1;
    }
    EmpiricalDataset::from_counts(space, counts)
}

/// Reproducible stand-in for an image-patch dataset: `MNIST_TRAIN_COUNT`
/// samples from `(1 − s)·product + s·modes`, where the product has random
/// per-variable marginals skewed towards level 0 and the modes are a few
/// random states with Dirichlet weights.
pub fn synthetic_dataset(seed: u64, space: &StateSpace, strength: f64) -> Result<EmpiricalDataset> {
    synthetic_dataset_sized(seed, space, strength, MNIST_TRAIN_COUNT)
}

pub fn synthetic_dataset_sized(
    seed: u64,
    space: &StateSpace,
    strength: f64,
    samples: usize,
) -> Result<EmpiricalDataset> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::domain(format!("strength {strength} outside [0, 1]")));
    }
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(1.0, 1.0).expect("valid gamma");
    let marginals: Vec<Vec<f64>> = space
        .cards()
        .iter()
        .map(|&c| {
            let mut w: Vec<f64> = (0..c).map(|_| gamma.sample(&mut rng)).collect();
            w[0] += 1.0;
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let n_modes = (space.total() / 8).clamp(2, 8);
    let mode_states: Vec<usize> = (0..n_modes).map(|_| rng.random_range(0..space.total())).collect();
    let mode_w: Vec<f64> = (0..n_modes).map(|_| gamma.sample(&mut rng)).collect();
    let mode_sum: f64 = mode_w.iter().sum();

    let mut weights: Vec<f64> = (0..space.total())
        .map(|x| {
            (1.0 - strength)
                * marginals
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m[space.digit(x, i)])
                    .product::<f64>()
        })
        .collect();
    for (&s, &w) in mode_states.iter().zip(&mode_w) {
        weights[s] += strength * w / mode_sum;
    }
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::domain(e.to_string()))?;
    let mut counts = vec![0u64; space.total()];
    for _ in 0..samples {
        counts[dist.sample(&mut rng)] += 1;
    }
    EmpiricalDataset::from_counts(space.clone(), counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use std::io::Write;

    fn tiny_idx() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2];
        b.extend_from_slice(&[0, 128, 255, 64]);
        b
    }

    #[test]
    fn idx_examples() {
        let im = parse_idx_images(&tiny_idx()).unwrap();
        assert_eq!((im.count, im.rows, im.cols), (1, 2, 2));
        assert_eq!(im.pixels, vec![0, 128, 255, 64]);

        let mut labels = tiny_idx();
        labels[3] = 1;
        match parse_idx_images(&labels) {
            Err(Error::Parse { offset: 0, message }) => assert!(message.contains("0x00000801")),
            other => panic!("{other:?}"),
        }

        let short = &tiny_idx()[..18];
        match parse_idx_images(short) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("expected 4"), "{message}");
                assert!(message.contains("got 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_idx_images(&tiny_idx()[..10]).is_err());
    }

    #[test]
    fn gzip_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train-images-idx3-ubyte.gz");
        let mut enc = flate2::write::GzEncoder::new(std::fs::File::create(&path).unwrap(), flate2::Compression::fast());
        enc.write_all(&tiny_idx()).unwrap();
        enc.finish().unwrap();
        assert_eq!(find_mnist_images(dir.path()).unwrap(), path);
        assert_eq!(read_idx_file(&path).unwrap().pixels, vec![0, 128, 255, 64]);
    }

    #[test]
    fn quantization_examples() {
        let q = Quantization::EqualWidth;
        assert_eq!([0u8, 86, 171, 255].map(|v| q.level(v, 3)), [0, 1, 2, 2]);
        assert_eq!([85u8, 170].map(|v| q.level(v, 3)), [0, 1]);

        let mut img = vec![0u8; IMAGE_SIDE * IMAGE_SIDE];
        let spec = PatchSpec::at(3, 5);
        img[3 * 28 + 5] = 0;
        img[3 * 28 + 6] = 86;
        img[4 * 28 + 5] = 171;
        img[4 * 28 + 6] = 255;
        assert_eq!(patch_state(&img, 28, &spec, q), vec![0, 1, 2, 2]);

        let images = Images {
            count: 2,
            rows: 28,
            cols: 28,
            pixels: [vec![0u8; 784], img].concat(),
        };
        let ds = quantize_and_extract(&images, &spec).unwrap();
        assert_eq!(ds.total(), 2);
        assert_eq!(ds.counts()[0], 1);
        assert_eq!(ds.counts()[ds.space().index(&[0, 1, 2, 2]).unwrap()], 1);
    }

    #[test]
    fn full_size_counts() {
        let images = Images {
            count: MNIST_TRAIN_COUNT,
            rows: 28,
            cols: 28,
            pixels: (0..MNIST_TRAIN_COUNT * 784).map(|i| (i * 31 % 256) as u8).collect(),
        };
        let ds = quantize_and_extract(&images, &default_patch_locations()[0]).unwrap();
        assert_eq!(ds.total(), 60_000);
        assert_eq!(ds.counts().iter().sum::<u64>(), 60_000);
        assert!((ds.pmf().probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_patches() {
        let p = default_patch_locations();
        assert_eq!(p.len(), 8);
        validate_patch_set(&p).unwrap();
        assert!(parse_patch_list("12,10;13,11").is_err());
        assert!(parse_patch_list("27,27").is_err());
        assert_eq!(parse_patch_list("0,0; 2,2").unwrap().len(), 2);
    }

    fn pairwise_mi(p: &Pmf) -> f64 {
        let n = p.space().num_vars();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let pij = p.marginalize(&[i, j]).unwrap();
                let pi = p.marginalize(&[i]).unwrap();
                let pj = p.marginalize(&[j]).unwrap();
                worst = worst.max(crate::dist::kl_divergence(&pij, &pi.product(&pj)).unwrap());
            }
        }
        worst
    }

    #[test]
    fn synthetic_examples() {
        let space = StateSpace::uniform(4, 3).unwrap();
        let a = synthetic_dataset(5, &space, 0.0).unwrap();
        assert!(pairwise_mi(a.pmf()) < 0.05);
        assert_eq!(a, synthetic_dataset(5, &space, 0.0).unwrap());
        assert!((a.pmf().probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let b = synthetic_dataset(5, &space, 0.6).unwrap();
        assert!(pairwise_mi(b.pmf()) > pairwise_mi(a.pmf()));
        assert!(synthetic_dataset(5, &space, 1.5).is_err());
    }

    #[test]
    fn dataset_json_roundtrip() {
        let ds = synthetic_dataset_sized(1, &StateSpace::uniform(2, 3).unwrap(), 0.5, 500).unwrap();
        assert_eq!(EmpiricalDataset::from_json(&ds.to_json().unwrap()).unwrap(), ds);
        let merged = ds.merge(&ds).unwrap();
        assert_eq!(merged.total(), 1000);
    }

    proptest! {
        #[test]
        fn idx_roundtrip_is_byte_identical(count in 0usize..4, rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pixels: Vec<u8> = (0..count * rows * cols).map(|_| rng.random()).collect();
            let bytes = encode_idx(&Images { count, rows, cols, pixels });
            prop_assert_eq!(encode_idx(&parse_idx_images(&bytes).unwrap()), bytes);
        }

        #[test]
        fn quantization_is_monotone(a in any::<u8>(), b in any::<u8>(), levels in 2usize..8) {
            let q = Quantization::EqualWidth;
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(q.level(lo, levels) <= q.level(hi, levels));
            prop_assert!(q.level(hi, levels) < levels);
        }
    }
}
