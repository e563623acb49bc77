//! Competitive construction of convolution kernels from an image corpus.
//!
//! Each kernel is backed by a per-synapse *resource* tensor `W`; the actual
//! weight is a saturating function of the resource (see
//! [`resource_to_weight`]). Updates move resource between a kernel's synapses
//! without changing its total, which is what forces the kernels apart: a
//! synapse can only grow at the expense of its siblings.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::GrayImage;

/// Relative nudge applied to the initial resource value.
///
/// At exactly the nominal initial resource the derived weight is 0, every
/// convolution is 0, and the winner loop (which requires a strictly positive
/// maximum) never engages, so no corpus could ever train a bank. Starting the
/// resources one part in 10^12 above that point makes every fresh kernel's
/// weight infinitesimally positive (~5e-15 at the default bounds) and lets
/// competition take over from the first image.
const BOOTSTRAP_KICK: f64 = 1e-12;

/// Hyperparameters of the kernel-construction algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerParams {
    /// Kernel side K in pixels.
    pub kernel_size: usize,
    /// Number of kernels N_C.
    pub kernel_count: usize,
    /// Convolution stride s in pixels.
    pub stride: usize,
    /// Brightness threshold B separating "bright" pixels.
    pub brightness_threshold: u8,
    /// Lower weight limit (non-positive).
    pub w_min: f64,
    /// Upper weight limit (positive).
    pub w_max: f64,
    /// Learning rate l. When `None` it is derived as 100/255/corpus_size.
    pub learning_rate: Option<f64>,
    /// Corpus size N_E, used only to derive the learning rate when unset.
    pub corpus_size: usize,
    /// Seed for winner tie-breaking.
    pub seed: u64,
}

impl Default for LearnerParams {
    /// The configuration used throughout: K=9, N_C=28, s=2, B=26,
    /// w_min=-5/3/255, w_max=5/255.
    fn default() -> Self {
        Self {
            kernel_size: 9,
            kernel_count: 28,
            stride: 2,
            brightness_threshold: 26,
            w_min: -5.0 / 3.0 / 255.0,
            w_max: 5.0 / 255.0,
            learning_rate: None,
            corpus_size: 0,
            seed: 0,
        }
    }
}

impl LearnerParams {
    /// Check every invariant, naming the violated constraint.
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size < 1 {
            return Err(Error::InvalidParams("kernel_size must be >= 1".into()));
        }
        if self.kernel_count < 1 {
            return Err(Error::InvalidParams("kernel_count must be >= 1".into()));
        }
        if self.stride < 1 {
            return Err(Error::InvalidParams("stride must be >= 1".into()));
        }
        if !(self.w_min <= 0.0) {
            return Err(Error::InvalidParams(format!(
                "w_min must be <= 0, got {}",
                self.w_min
            )));
        }
        if !(self.w_max > 0.0) {
            return Err(Error::InvalidParams(format!(
                "w_max must be > 0, got {}",
                self.w_max
            )));
        }
        match self.learning_rate {
            Some(l) if !(l > 0.0) => {
                return Err(Error::InvalidParams(format!(
                    "learning_rate must be > 0, got {l}"
                )))
            }
            None if self.corpus_size == 0 => {
                return Err(Error::InvalidParams(
                    "learning_rate unset and corpus_size is 0, cannot derive l".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// The effective learning rate: explicit value, or 100/255/N_E.
    pub fn effective_learning_rate(&self) -> f64 {
        self.learning_rate
            .unwrap_or(100.0 / 255.0 / self.corpus_size as f64)
    }

    /// Nominal initial resource W0 = -w_min (w_max - w_min) / w_max, the
    /// point where the derived weight crosses zero.
    pub fn initial_resource(&self) -> f64 {
        -self.w_min * (self.w_max - self.w_min) / self.w_max
    }
}

/// Saturating resource-to-weight map.
///
/// w(W) = w_min + (w_max - w_min)·max(W,0) / (w_max - w_min + max(W,0)),
/// computed as w_max - span²/(span + W) so that each floating-point step is
/// monotone; the result is non-decreasing in W, equals w_min exactly for
/// W <= 0, and stays strictly below w_max.
pub fn resource_to_weight(resource: f64, w_min: f64, w_max: f64) -> f64 {
    if resource <= 0.0 {
        return w_min;
    }
    let span = w_max - w_min;
    (w_max - span * span / (span + resource)).max(w_min)
}

/// The paired resource and weight tensors of all kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    params: LearnerParams,
    /// Resources W, kernel-major, K*K per kernel.
    resources: Vec<f64>,
    /// Cached weights, rederived from `resources` after every change.
    weights: Vec<f64>,
}

impl KernelBank {
    /// A fresh bank: every resource at the (nudged) initial value, weights
    /// derived from it.
    pub fn init(params: LearnerParams) -> Result<Self> {
        params.validate()?;
        let w0 = params.initial_resource() * (1.0 + BOOTSTRAP_KICK);
        let n = params.kernel_count * params.kernel_size * params.kernel_size;
        let weights = vec![resource_to_weight(w0, params.w_min, params.w_max); n];
        Ok(Self {
            params,
            resources: vec![w0; n],
            weights,
        })
    }

    pub fn params(&self) -> &LearnerParams {
        &self.params
    }

    pub fn kernel_count(&self) -> usize {
        self.params.kernel_count
    }

    pub fn kernel_size(&self) -> usize {
        self.params.kernel_size
    }

    fn tile_len(&self) -> usize {
        self.params.kernel_size * self.params.kernel_size
    }

    /// Weights of kernel `a`, row-major K×K.
    pub fn kernel_weights(&self, a: usize) -> &[f64] {
        let len = self.tile_len();
        &self.weights[a * len..(a + 1) * len]
    }

    /// Resources of kernel `a`, row-major K×K.
    pub fn kernel_resources(&self, a: usize) -> &[f64] {
        let len = self.tile_len();
        &self.resources[a * len..(a + 1) * len]
    }

    /// Total resource of kernel `a`; conserved by every update.
    pub fn resource_sum(&self, a: usize) -> f64 {
        self.kernel_resources(a).iter().sum()
    }

    /// Largest absolute weight over the whole bank.
    pub fn max_abs_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, &w| m.max(w.abs()))
    }

    #[inline]
    fn weight_at(&self, a: usize, idx: usize) -> f64 {
        self.weights[a * self.tile_len() + idx]
    }

    #[inline]
    fn bump_resource(&mut self, a: usize, idx: usize, delta: f64) {
        let i = a * self.tile_len() + idx;
        self.resources[i] += delta;
        self.weights[i] = resource_to_weight(self.resources[i], self.params.w_min, self.params.w_max);
    }

    /// Override the stride carried by the bank (bank files do not persist it).
    pub fn set_stride(&mut self, stride: usize) {
        self.params.stride = stride;
    }

    /// Serialize in the versioned text format:
    /// `KBANK 1 <N_C> <K> <w_min> <w_max>` followed by N_C blocks of K lines
    /// of K resource values. Weights are rederived on load.
    pub fn to_text(&self) -> String {
        let k = self.params.kernel_size;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "KBANK 1 {} {} {} {}",
            self.params.kernel_count, k, self.params.w_min, self.params.w_max
        );
        for a in 0..self.params.kernel_count {
            let res = self.kernel_resources(a);
            for i in 0..k {
                let row: Vec<String> = (0..k).map(|j| format!("{}", res[i * k + j])).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, path)
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| err(1, "empty bank file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "KBANK" || fields[1] != "1" {
            return Err(err(1, format!("bad header {header:?}")));
        }
        let kernel_count: usize = fields[2]
            .parse()
            .map_err(|e| err(1, format!("kernel count: {e}")))?;
        let kernel_size: usize = fields[3]
            .parse()
            .map_err(|e| err(1, format!("kernel size: {e}")))?;
        let w_min: f64 = fields[4]
            .parse()
            .map_err(|e| err(1, format!("w_min: {e}")))?;
        let w_max: f64 = fields[5]
            .parse()
            .map_err(|e| err(1, format!("w_max: {e}")))?;
        if kernel_size < 1 || kernel_count < 1 || !(w_min <= 0.0) || !(w_max > 0.0) {
            return Err(err(
                1,
                format!("invalid bank header values N_C={kernel_count} K={kernel_size} w_min={w_min} w_max={w_max}"),
            ));
        }
        // Stride, threshold and learning rate are not persisted; callers
        // supply them (see `set_stride`) before reusing a loaded bank.
        let params = LearnerParams {
            kernel_size,
            kernel_count,
            w_min,
            w_max,
            ..LearnerParams::default()
        };
        let mut resources = Vec::with_capacity(kernel_count * kernel_size * kernel_size);
        let expected_lines = kernel_count * kernel_size;
        for _ in 0..expected_lines {
            let (idx, line) = lines.next().ok_or_else(|| {
                err(
                    expected_lines + 1,
                    format!("expected {expected_lines} value lines"),
                )
            })?;
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() != kernel_size {
                return Err(err(
                    idx + 1,
                    format!("expected {kernel_size} values, got {}", values.len()),
                ));
            }
            for v in values {
                let x: f64 = v.parse().map_err(|e| err(idx + 1, format!("{v:?}: {e}")))?;
                resources.push(x);
            }
        }
        if let Some((idx, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(err(idx + 1, format!("trailing content {line:?}")));
        }
        let weights = resources
            .iter()
            .map(|&r| resource_to_weight(r, w_min, w_max))
            .collect();
        Ok(Self {
            params,
            resources,
            weights,
        })
    }
}

/// Convolutions of one image with every kernel: the stimulation each
/// imaginary neuron would receive.
#[derive(Debug, Clone)]
pub struct StimulationTensor {
    kernels: usize,
    out_h: usize,
    out_w: usize,
    values: Vec<f64>,
}

impl StimulationTensor {
    pub fn kernels(&self) -> usize {
        self.kernels
    }

    pub fn out_h(&self) -> usize {
        self.out_h
    }

    pub fn out_w(&self) -> usize {
        self.out_w
    }

    #[inline]
    pub fn get(&self, a: usize, p: usize, q: usize) -> f64 {
        self.values[(a * self.out_h + p) * self.out_w + q]
    }

    fn unflatten(&self, idx: usize) -> (usize, usize, usize) {
        let q = idx % self.out_w;
        let rest = idx / self.out_w;
        (rest / self.out_h, rest % self.out_h, q)
    }
}

/// Convolve raw pixel intensities (0–255, no normalization) with every
/// kernel at the bank's stride.
pub fn convolve(img: &GrayImage, bank: &KernelBank) -> Result<StimulationTensor> {
    let k = bank.params.kernel_size;
    let s = bank.params.stride;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < k || h < k {
        return Err(Error::ShapeMismatch(format!(
            "{w}x{h} image is smaller than the {k}x{k} kernel"
        )));
    }
    let out_h = (h - k) / s + 1;
    let out_w = (w - k) / s + 1;
    let n_k = bank.params.kernel_count;
    let mut values = vec![0.0f64; n_k * out_h * out_w];
    for a in 0..n_k {
        let kw = bank.kernel_weights(a);
        for p in 0..out_h {
            for q in 0..out_w {
                let mut acc = 0.0f64;
                for i in 0..k {
                    for j in 0..k {
                        let g = img.get((q * s + j) as u32, (p * s + i) as u32) as f64;
                        acc += g * kw[i * k + j];
                    }
                }
                values[(a * out_h + p) * out_w + q] = acc;
            }
        }
    }
    Ok(StimulationTensor {
        kernels: n_k,
        out_h,
        out_w,
        values,
    })
}

/// Which update path a winner took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Stimulation below 1: bright pixels strengthened wholesale.
    Low,
    /// Stimulation at least 1: the smallest bright prefix reaching total
    /// stimulation 1 strengthened, the rest weakened.
    High,
    /// Degenerate tile (no usable bright/dark split); no resource moved.
    Skipped,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Low => "low",
            Branch::High => "high",
            Branch::Skipped => "skipped",
        })
    }
}

/// One winner selected during an iteration.
#[derive(Debug, Clone)]
pub struct WinnerRecord {
    pub kernel: usize,
    pub row: usize,
    pub col: usize,
    pub stimulation: f64,
    pub branch: Branch,
}

/// Everything one call to [`learn_iteration`] did.
#[derive(Debug, Clone, Default)]
pub struct IterationReport {
    pub winners: Vec<WinnerRecord>,
    pub updates_applied: usize,
}

/// Run one algorithm iteration (one image) against the bank.
///
/// Winner loop: while the stimulation tensor has a strictly positive maximum
/// and fewer than N_C kernels have been engaged, pick a uniformly random
/// maximal element (a, p, q). A kernel new to the engaged set gets a resource
/// update from its winning tile (low or high branch by stimulation); in
/// either case the (p, q) column is zeroed across all kernels, so the loop
/// performs at most out_h·out_w selections.
pub fn learn_iteration(
    bank: &mut KernelBank,
    img: &GrayImage,
    rng: &mut ChaCha8Rng,
) -> Result<IterationReport> {
    let mut c = convolve(img, bank)?;
    let k = bank.params.kernel_size;
    let s = bank.params.stride;
    let n_k = bank.params.kernel_count;
    let mut engaged = vec![false; n_k];
    let mut engaged_count = 0usize;
    let mut report = IterationReport::default();
    let mut tie_buf: Vec<usize> = Vec::new();

    loop {
        let max = c.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0) || engaged_count >= n_k {
            break;
        }
        tie_buf.clear();
        tie_buf.extend(
            c.values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == max)
                .map(|(i, _)| i),
        );
        let pick = tie_buf[rng.random_range(0..tie_buf.len())];
        let (a, p, q) = c.unflatten(pick);

        if !engaged[a] {
            engaged[a] = true;
            engaged_count += 1;
            let tile = extract_tile(img, p * s, q * s, k);
            let branch = if max < 1.0 {
                apply_low_branch(bank, a, &tile)
            } else {
                apply_high_branch(bank, a, &tile)
            };
            if branch != Branch::Skipped {
                report.updates_applied += 1;
            }
            report.winners.push(WinnerRecord {
                kernel: a,
                row: p,
                col: q,
                stimulation: max,
                branch,
            });
        }
        // The winning position is spent for every kernel.
        for b in 0..n_k {
            let idx = (b * c.out_h + p) * c.out_w + q;
            c.values[idx] = 0.0;
        }
    }
    Ok(report)
}

fn extract_tile(img: &GrayImage, top: usize, left: usize, k: usize) -> Vec<u8> {
    let mut tile = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            tile.push(img.get((left + j) as u32, (top + i) as u32));
        }
    }
    tile
}

/// Low-stimulation branch: +l on pixels brighter than B, the balancing
/// -l·n_b/(K²-n_b) on the rest. Skipped when the tile has no bright or no
/// dark pixels.
fn apply_low_branch(bank: &mut KernelBank, a: usize, tile: &[u8]) -> Branch {
    let b = bank.params.brightness_threshold;
    let l = bank.params.effective_learning_rate();
    let kk = tile.len();
    let n_b = tile.iter().filter(|&&g| g > b).count();
    if n_b == 0 || n_b == kk {
        return Branch::Skipped;
    }
    let decrement = l * n_b as f64 / (kk - n_b) as f64;
    for (idx, &g) in tile.iter().enumerate() {
        if g > b {
            bank.bump_resource(a, idx, l);
        } else {
            bank.bump_resource(a, idx, -decrement);
        }
    }
    Branch::Low
}

/// High-stimulation branch: walk tile values in decreasing order,
/// strengthening whole value ranks until the accumulated stimulation
/// `sum(value · weight)` over the strengthened set reaches 1, then weaken
/// the remaining pixels so the kernel total is exactly conserved.
///
/// The rank walk is planned against the pre-update weights (each pixel is
/// visited once, so in-place application would read the same values) and the
/// branch is skipped if it would strengthen the entire tile, which would
/// leave nothing to weaken.
fn apply_high_branch(bank: &mut KernelBank, a: usize, tile: &[u8]) -> Branch {
    let l = bank.params.effective_learning_rate();
    let kk = tile.len();
    let mut order: Vec<usize> = (0..kk).collect();
    order.sort_by(|&x, &y| tile[y].cmp(&tile[x]).then(x.cmp(&y)));

    let mut strengthened = vec![false; kk];
    let mut count = 0usize;
    let mut acc = 0.0f64;
    let mut pos = 0usize;
    while pos < kk && acc < 1.0 {
        let rank_value = tile[order[pos]];
        // One full value rank per pass, even if the accumulator crosses 1
        // partway through it.
        while pos < kk && tile[order[pos]] == rank_value {
            let idx = order[pos];
            acc += rank_value as f64 * bank.weight_at(a, idx);
            strengthened[idx] = true;
            count += 1;
            pos += 1;
        }
    }
    if count == kk {
        return Branch::Skipped;
    }
    let decrement = l * count as f64 / (kk - count) as f64;
    for idx in 0..kk {
        if strengthened[idx] {
            bank.bump_resource(a, idx, l);
        } else {
            bank.bump_resource(a, idx, -decrement);
        }
    }
    Branch::High
}

/// Initialize a bank and run one iteration per corpus image, in order.
/// Deterministic for a fixed corpus order and seed.
pub fn learn_bank(
    corpus: &[GrayImage],
    params: LearnerParams,
) -> Result<(KernelBank, Vec<IterationReport>)> {
    let k = params.kernel_size;
    for (i, img) in corpus.iter().enumerate() {
        if (img.width() as usize) < k || (img.height() as usize) < k {
            return Err(Error::ShapeMismatch(format!(
                "corpus image {i} is {}x{}, smaller than the {k}x{k} kernel",
                img.width(),
                img.height()
            )));
        }
    }
    let seed = params.seed;
    let mut bank = KernelBank::init(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(corpus.len());
    for img in corpus {
        reports.push(learn_iteration(&mut bank, img, &mut rng)?);
    }
    Ok((bank, reports))
}

/// Cosine similarity of two flattened kernels; 0 when either is null.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
