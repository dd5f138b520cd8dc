//! IDX loading and the synthetic dataset families.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Labelled samples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub feature_dim: usize,
    pub num_categories: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        samples: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_categories: usize,
    ) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::CountMismatch { images: samples.len(), labels: labels.len() });
        }
        let feature_dim = samples.first().map_or(0, Vec::len);
        if let Some(i) = samples.iter().position(|s| s.len() != feature_dim) {
            return Err(Error::invalid(format!(
                "sample {i} has dim {} but dataset dim is {feature_dim}",
                samples[i].len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l >= num_categories) {
            return Err(Error::invalid(format!(
                "label {} at {i} is not below num_categories {num_categories}",
                labels[i]
            )));
        }
        Ok(Self { name: name.into(), samples, labels, feature_dim, num_categories })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample indices grouped by category, ascending.
    pub fn category_indices(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_categories];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_dim: self.feature_dim,
            num_categories: self.num_categories,
        }
    }

    /// Per-category seeded split; keeps category proportions, so balanced
    /// inputs give balanced train and test sets.
    pub fn stratified_split(&self, rng: &mut Rng, train_fraction: f64) -> Result<(Dataset, Dataset)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::invalid(format!("train_fraction {train_fraction} outside [0, 1]")));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for mut group in self.category_indices() {
            rng.shuffle(&mut group);
            let n_train = (group.len() as f64 * train_fraction).round() as usize;
            train.extend_from_slice(&group[..n_train]);
            test.extend_from_slice(&group[n_train..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// Seeded subset of `n` samples (all of them when `n >= len`).
    pub fn random_subset(&self, rng: &mut Rng, n: usize) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        rng.shuffle(&mut idx);
        idx.truncate(n.min(self.len()));
        idx.sort_unstable();
        self.subset(&idx)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.feature_dim).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (s, l) in self.samples.iter().zip(&self.labels) {
            let mut row: Vec<String> = s.iter().map(f64::to_string).collect();
            row.push(l.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path, name: &str) -> Result<Dataset> {
        let mut r = csv::Reader::from_path(path)?;
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::invalid(format!("{}: row {}: bad {what}", path.display(), line + 1));
            let n = rec.len();
            if n < 2 {
                return Err(bad("column count"));
            }
            let feats = (0..n - 1)
                .map(|i| rec[i].trim().parse::<f64>().map_err(|_| bad("feature")))
                .collect::<Result<Vec<_>>>()?;
            labels.push(rec[n - 1].trim().parse::<usize>().map_err(|_| bad("label"))?);
            samples.push(feats);
        }
        let num_categories = labels.iter().max().map_or(0, |m| m + 1);
        Dataset::new(name, samples, labels, num_categories)
    }
}

fn read_u32_be(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn read_idx_file(path: &Path, magic: u32, header_words: usize) -> Result<(Vec<u32>, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header_len = 4 * header_words;
    if bytes.len() < header_len {
        return Err(Error::Truncated { path: path.into(), expected: header_len, found: bytes.len() });
    }
    let found = read_u32_be(&bytes, 0);
    if found != magic {
        return Err(Error::WrongMagic { path: path.into(), expected: magic, found });
    }
    let dims: Vec<u32> = (1..header_words).map(|i| read_u32_be(&bytes, 4 * i)).collect();
    let payload: usize = dims.iter().map(|&d| d as usize).product();
    if bytes.len() < header_len + payload {
        return Err(Error::Truncated { path: path.into(), expected: header_len + payload, found: bytes.len() });
    }
    Ok((dims, bytes[header_len..header_len + payload].to_vec()))
}

/// Reads an IDX image/label pair (MNIST, Fashion-MNIST). Pixels are scaled
/// to [0, 1] by /255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (idims, pixels) = read_idx_file(images_path, IDX_IMAGES_MAGIC, 4)?;
    let (ldims, raw_labels) = read_idx_file(labels_path, IDX_LABELS_MAGIC, 2)?;
    let (n, rows, cols) = (idims[0] as usize, idims[1] as usize, idims[2] as usize);
    if n != ldims[0] as usize {
        return Err(Error::CountMismatch { images: n, labels: ldims[0] as usize });
    }
    let dim = rows * cols;
    let samples =
        pixels.chunks_exact(dim.max(1)).take(n).map(|c| c.iter().map(|&b| f64::from(b) / 255.0).collect()).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&b| b as usize).collect();
    let num_categories = labels.iter().max().map_or(0, |m| m + 1).max(10);
    let name = images_path.file_name().map_or_else(|| "idx".to_string(), |s| s.to_string_lossy().into_owned());
    let mut ds = Dataset::new(name, samples, labels, num_categories)?;
    ds.feature_dim = dim;
    Ok(ds)
}

/// Writes a dataset as an IDX pair with `rows × cols` images. Values are
/// quantized by `round(v · 255)`.
pub fn write_idx(ds: &Dataset, rows: usize, cols: usize, images_path: &Path, labels_path: &Path) -> Result<()> {
    if rows * cols != ds.feature_dim {
        return Err(Error::invalid(format!("{rows}x{cols} images do not match feature dim {}", ds.feature_dim)));
    }
    let mut img = Vec::with_capacity(16 + ds.len() * ds.feature_dim);
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for d in [ds.len(), rows, cols] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for s in &ds.samples {
        img.extend(s.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    let mut lab = Vec::with_capacity(8 + ds.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    for &l in &ds.labels {
        let byte = u8::try_from(l).map_err(|_| Error::invalid(format!("label {l} does not fit a byte")))?;
        lab.push(byte);
    }
    for (path, bytes) in [(images_path, img), (labels_path, lab)] {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Looks for the standard MNIST file names in `dir` and returns (train, test).
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let pick = |stem: &str| -> std::path::PathBuf {
        let plain = dir.join(stem);
        if plain.exists() {
            plain
        } else {
            dir.join(stem.replace("-idx", ".idx"))
        }
    };
    let train = load_idx(&pick("train-images-idx3-ubyte"), &pick("train-labels-idx1-ubyte"))?;
    let test = load_idx(&pick("t10k-images-idx3-ubyte"), &pick("t10k-labels-idx1-ubyte"))?;
    Ok((train, test))
}

/// One category's prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryTemplate {
    pub category: usize,
    pub template: Vec<f64>,
    pub noise_halfwidth: f64,
}

impl CategoryTemplate {
    /// Template plus uniform noise, clipped to [0, 1].
    pub fn exemplar(&self, rng: &mut Rng) -> Vec<f64> {
        let h = self.noise_halfwidth;
        self.template.iter().map(|&t| (t + rng.uniform(-h, h)).clamp(0.0, 1.0)).collect()
    }
}

/// Parameters of the low-overlap category family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LowOverlapParams {
    pub num_categories: usize,
    pub items_per_category: usize,
    pub dim: usize,
    pub noise_halfwidth: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for LowOverlapParams {
    fn default() -> Self {
        Self { num_categories: 4, items_per_category: 300, dim: 16, noise_halfwidth: 0.1, low: 0.2, high: 0.8 }
    }
}

/// Templates with disjoint high-value blocks of `dim / num_categories`
/// elements over a low background.
pub fn low_overlap_templates(p: &LowOverlapParams) -> Result<Vec<CategoryTemplate>> {
    if p.num_categories < 2 {
        return Err(Error::invalid("low-overlap data needs at least 2 categories"));
    }
    if p.dim < p.num_categories {
        return Err(Error::invalid(format!("dim {} is smaller than num_categories {}", p.dim, p.num_categories)));
    }
    if p.noise_halfwidth < 0.0 || !(0.0..=1.0).contains(&p.low) || !(0.0..=1.0).contains(&p.high) {
        return Err(Error::invalid("template values must lie in [0, 1] with nonnegative noise"));
    }
    let block = p.dim / p.num_categories;
    Ok((0..p.num_categories)
        .map(|c| {
            let template = (0..p.dim)
                .map(|i| if i / block == c && i < block * p.num_categories { p.high } else { p.low })
                .collect();
            CategoryTemplate { category: c, template, noise_halfwidth: p.noise_halfwidth }
        })
        .collect())
}

pub fn gen_low_overlap_with(rng: &mut Rng, p: &LowOverlapParams) -> Result<Dataset> {
    let templates = low_overlap_templates(p)?;
    let mut samples = Vec::with_capacity(p.num_categories * p.items_per_category);
    let mut labels = Vec::with_capacity(samples.capacity());
    for t in &templates {
        for _ in 0..p.items_per_category {
            samples.push(t.exemplar(rng));
            labels.push(t.category);
        }
    }
    let mut ds = Dataset::new("low_overlap", samples, labels, p.num_categories)?;
    ds.feature_dim = p.dim;
    Ok(ds)
}

pub fn gen_low_overlap(
    rng: &mut Rng,
    num_categories: usize,
    items_per_category: usize,
    dim: usize,
    noise_halfwidth: f64,
) -> Result<Dataset> {
    gen_low_overlap_with(
        rng,
        &LowOverlapParams { num_categories, items_per_category, dim, noise_halfwidth, ..LowOverlapParams::default() },
    )
}

/// Categories on disjoint index blocks over a zero background. Active
/// elements are drawn from U(0.5, 1.0) per exemplar, so every exemplar's
/// support is exactly its category's block.
///
/// With `antiphase`, two categories share one block and category 1 is the
/// exact negation of a category-0 exemplar (`B = −A`); those values lie in
/// [−1, 0].
pub fn gen_non_overlapping_stream(
    rng: &mut Rng,
    num_categories: usize,
    items_per_category: usize,
    dim: usize,
    antiphase: bool,
) -> Result<Dataset> {
    if antiphase {
        if num_categories != 2 {
            return Err(Error::invalid("antiphase construction needs exactly 2 categories"));
        }
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        let a: Vec<Vec<f64>> =
            (0..items_per_category).map(|_| (0..dim).map(|_| rng.uniform(0.5, 1.0)).collect()).collect();
        for (c, sign) in [(0usize, 1.0), (1, -1.0)] {
            for s in &a {
                samples.push(s.iter().map(|v| sign * v).collect());
                labels.push(c);
            }
        }
        return Dataset::new("antiphase", samples, labels, 2);
    }
    if num_categories == 0 || dim < 2 * num_categories {
        return Err(Error::invalid(format!(
            "non-overlapping stream needs dim >= 2 * num_categories, got dim {dim} for {num_categories}"
        )));
    }
    let block = dim / num_categories;
    let mut samples = Vec::with_capacity(num_categories * items_per_category);
    let mut labels = Vec::with_capacity(samples.capacity());
    for c in 0..num_categories {
        for _ in 0..items_per_category {
            let s = (0..dim)
                .map(|i| if i / block == c && i < block * num_categories { rng.uniform(0.5, 1.0) } else { 0.0 })
                .collect();
            samples.push(s);
            labels.push(c);
        }
    }
    let mut ds = Dataset::new("non_overlapping", samples, labels, num_categories)?;
    ds.feature_dim = dim;
    Ok(ds)
}

/// Indices where `sample` is nonzero.
pub fn support(sample: &[f64]) -> Vec<usize> {
    sample.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i).collect()
}

/// Number of subcomponents in a multi-scale stream; each has two elements.
pub const SUBCOMPONENTS: usize = 3;
pub const ELEMENTS_PER_SUBCOMPONENT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiScaleParams {
    pub periods: [usize; SUBCOMPONENTS],
    pub noise_halfwidth: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for MultiScaleParams {
    fn default() -> Self {
        Self { periods: [1, 3, 5], noise_halfwidth: 0.1, low: 0.2, high: 0.8 }
    }
}

/// A 6-dimensional stream whose three subcomponents follow binary latent
/// states that flip every `periods[k]` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleStream {
    pub samples: Vec<Vec<f64>>,
    /// `latent_states[k][t]`: whether subcomponent `k` is in its high state.
    pub latent_states: [Vec<bool>; SUBCOMPONENTS],
    pub periods: [usize; SUBCOMPONENTS],
}

impl MultiScaleStream {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Element indices of subcomponent `k`.
    pub fn subcomponent_indices(k: usize) -> Vec<usize> {
        (k * ELEMENTS_PER_SUBCOMPONENT..(k + 1) * ELEMENTS_PER_SUBCOMPONENT).collect()
    }

    pub fn subcomponent_map() -> Vec<Vec<usize>> {
        (0..SUBCOMPONENTS).map(Self::subcomponent_indices).collect()
    }

    /// Unlabelled view (every label 0) for reconstruction training.
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            name: "multiscale".into(),
            samples: self.samples.clone(),
            labels: vec![0; self.samples.len()],
            feature_dim: SUBCOMPONENTS * ELEMENTS_PER_SUBCOMPONENT,
            num_categories: 1,
        }
    }

    /// Positions `t > 0` where subcomponent `k`'s latent state changes.
    pub fn switch_positions(&self, k: usize) -> Vec<usize> {
        let tr = &self.latent_states[k];
        (1..tr.len()).filter(|&t| tr[t] != tr[t - 1]).collect()
    }
}

pub fn gen_multiscale(rng: &mut Rng, length: usize, p: &MultiScaleParams) -> Result<MultiScaleStream> {
    if p.periods.contains(&0) {
        return Err(Error::invalid("multiscale periods must be >= 1"));
    }
    if !(p.low < p.high) {
        return Err(Error::invalid(format!("low {} must be below high {}", p.low, p.high)));
    }
    if p.noise_halfwidth < 0.0 || p.low - p.noise_halfwidth < 0.0 || p.high + p.noise_halfwidth > 1.0 {
        return Err(Error::invalid(format!(
            "values [{} ± {}, {} ± {}] escape [0, 1]",
            p.low, p.noise_halfwidth, p.high, p.noise_halfwidth
        )));
    }
    let initial: Vec<bool> = (0..SUBCOMPONENTS).map(|_| rng.next_u64() & 1 == 1).collect();
    let latent_states: [Vec<bool>; SUBCOMPONENTS] =
        std::array::from_fn(|k| (0..length).map(|t| initial[k] ^ ((t / p.periods[k]) % 2 == 1)).collect());
    let h = p.noise_halfwidth;
    let samples = (0..length)
        .map(|t| {
            let mut s = Vec::with_capacity(SUBCOMPONENTS * ELEMENTS_PER_SUBCOMPONENT);
            for trace in &latent_states {
                let base = if trace[t] { p.high } else { p.low };
                for _ in 0..ELEMENTS_PER_SUBCOMPONENT {
                    s.push(base + rng.uniform(-h, h));
                }
            }
            s
        })
        .collect();
    Ok(MultiScaleStream { samples, latent_states, periods: p.periods })
}
