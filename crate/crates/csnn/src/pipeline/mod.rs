//! Batch orchestration: preprocess a labeled image corpus, learn a kernel
//! bank, calibrate and evaluate the full network with stratified k-fold
//! cross-validation, and render reports.

pub mod config;
pub mod synth;
pub mod viz;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::builder::{
    build_network, calibrate, transform_stream, CalibrationOutcome, PoolLayerPlan,
};
use crate::colanet::{Colanet, ColanetParams};
use crate::error::{Error, Result};
use crate::kernel::{learn_bank, KernelBank};
use crate::preprocess::{
    crop_square, heat_map, shrink_max, to_grayscale, BoundingBox, GrayImage, PATCH_SIDE,
};
pub use config::{subseed, PipelineConfig};

/// Neuron count of the reference network reported in the literature for
/// this task; printed next to ours for comparison.
pub const REFERENCE_NEURON_COUNT: usize = 9412;

const BANK_FILE: &str = "kernels.kbank";
const PATCH_MANIFEST: &str = "patch_manifest.csv";

// ---------------------------------------------------------------------------
// prep
// ---------------------------------------------------------------------------

/// Summary of a preprocessing run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepStats {
    pub written: usize,
    /// Manifest rows skipped because the image or box was unusable.
    pub skipped: usize,
    /// Global per-pixel mean brightness of the written patches — the
    /// natural candidate for the learner's brightness threshold.
    pub mean_brightness: f64,
    pub manifest: PathBuf,
}

/// Run the preprocessing chain over every manifest row: grayscale → heat
/// map → square crop → max-shrink to 31×31. Unreadable rows are skipped and
/// counted; the run continues.
pub fn cmd_prep(cfg: &PipelineConfig) -> Result<PrepStats> {
    let patches_dir = cfg.work_dir.join("patches");
    std::fs::create_dir_all(&patches_dir)?;
    let mut reader = csv::Reader::from_path(&cfg.box_manifest)?;
    let manifest_path = cfg.work_dir.join(PATCH_MANIFEST);
    let mut writer = csv::Writer::from_path(&manifest_path)?;
    writer.write_record(["path", "label"])?;

    let mut written = 0usize;
    let mut skipped = 0usize;
    let mut brightness_sum = 0u64;
    let mut pixel_count = 0u64;
    // Consecutive rows usually reference the same frame; memoize the last
    // heat map.
    let mut memo: Option<(String, GrayImage)> = None;

    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let parsed = parse_box_row(&record);
        let (path, bbox) = match parsed {
            Some(v) => v,
            None => {
                skipped += 1;
                continue;
            }
        };
        let heat = match &memo {
            Some((p, h)) if *p == path => h.clone(),
            _ => {
                let full = cfg.images_dir.join(&path);
                let heat = image::open(&full)
                    .map_err(Error::from)
                    .and_then(|img| to_grayscale(&img))
                    .and_then(|gray| heat_map(&gray));
                match heat {
                    Ok(h) => {
                        memo = Some((path.clone(), h.clone()));
                        h
                    }
                    Err(_) => {
                        skipped += 1;
                        continue;
                    }
                }
            }
        };
        let patch = match crop_square(&heat, &bbox).and_then(|c| shrink_max(&c, PATCH_SIDE)) {
            Ok(p) => p,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let name = format!("patches/{:06}_{}.png", written, sanitize(&bbox.label));
        let buf =
            image::GrayImage::from_raw(patch.width(), patch.height(), patch.pixels().to_vec())
                .expect("patch buffer size");
        buf.save(cfg.work_dir.join(&name))?;
        writer.write_record([name.as_str(), bbox.label.as_str()])?;
        brightness_sum += patch.pixels().iter().map(|&p| p as u64).sum::<u64>();
        pixel_count += patch.pixels().len() as u64;
        written += 1;
    }
    writer.flush()?;
    Ok(PrepStats {
        written,
        skipped,
        mean_brightness: if pixel_count == 0 {
            0.0
        } else {
            brightness_sum as f64 / pixel_count as f64
        },
        manifest: manifest_path,
    })
}

fn parse_box_row(record: &csv::StringRecord) -> Option<(String, BoundingBox)> {
    if record.len() != 6 {
        return None;
    }
    let path = record.get(0)?.to_string();
    let x: i64 = record.get(1)?.trim().parse().ok()?;
    let y: i64 = record.get(2)?.trim().parse().ok()?;
    let w: u32 = record.get(3)?.trim().parse().ok()?;
    let h: u32 = record.get(4)?.trim().parse().ok()?;
    let label = record.get(5)?.trim();
    if label.is_empty() || w == 0 || h == 0 {
        return None;
    }
    Some((path, BoundingBox::new(x, y, w, h, label)))
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

// ---------------------------------------------------------------------------
// corpus loading
// ---------------------------------------------------------------------------

/// Load the patch corpus listed by the work dir's manifest, in file order.
pub fn load_patch_corpus(work_dir: &Path) -> Result<Vec<(GrayImage, String)>> {
    let manifest = work_dir.join(PATCH_MANIFEST);
    let mut reader = csv::Reader::from_path(&manifest)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let path = record
            .get(0)
            .ok_or_else(|| Error::Config("manifest row missing path".into()))?;
        let label = record
            .get(1)
            .ok_or_else(|| Error::Config("manifest row missing label".into()))?;
        let img = image::open(work_dir.join(path))?;
        let gray = to_grayscale(&img)?;
        if !gray.is_patch() {
            return Err(Error::InvalidImage(format!(
                "{path}: expected {PATCH_SIDE}x{PATCH_SIDE} patch, got {}x{}",
                gray.width(),
                gray.height()
            )));
        }
        out.push((gray, label.to_string()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// learn
// ---------------------------------------------------------------------------

/// Outcome of `learn`: where the bank landed plus corpus geometry.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub bank_path: PathBuf,
    pub log_path: PathBuf,
    pub corpus_size: usize,
    pub effective_learning_rate: f64,
}

/// Shuffle the patch corpus with the shuffle sub-seed, learn the bank, and
/// persist it with the learning log.
pub fn cmd_learn(cfg: &PipelineConfig) -> Result<LearnOutcome> {
    let corpus = load_patch_corpus(&cfg.work_dir)?;
    if corpus.is_empty() {
        return Err(Error::Config("patch corpus is empty; run prep first".into()));
    }
    let mut patches: Vec<GrayImage> = corpus.into_iter().map(|(img, _)| img).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "shuffle"));
    patches.shuffle(&mut rng);
    let params = cfg.learner_params(patches.len());
    let effective_learning_rate = params.effective_learning_rate();
    let (bank, reports) = learn_bank(&patches, params)?;
    let bank_path = cfg.work_dir.join(BANK_FILE);
    bank.save(&bank_path)?;

    let log_path = cfg.work_dir.join("learning_log.csv");
    let mut log = String::from("image_index,winner_rank,kernel,p,q,stimulation,branch\n");
    for (i, report) in reports.iter().enumerate() {
        for (rank, w) in report.winners.iter().enumerate() {
            let _ = writeln!(
                log,
                "{i},{rank},{},{},{},{},{}",
                w.kernel, w.row, w.col, w.stimulation, w.branch
            );
        }
    }
    std::fs::write(&log_path, log)?;
    Ok(LearnOutcome {
        bank_path,
        log_path,
        corpus_size: patches.len(),
        effective_learning_rate,
    })
}

fn load_bank(cfg: &PipelineConfig) -> Result<KernelBank> {
    let path = cfg.work_dir.join(BANK_FILE);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run learn first",
            path.display()
        )));
    }
    let mut bank = KernelBank::load(&path)?;
    bank.set_stride(cfg.stride);
    Ok(bank)
}

// ---------------------------------------------------------------------------
// viz
// ---------------------------------------------------------------------------

/// Render the learned bank to a lossless PNG grid.
pub fn cmd_viz(cfg: &PipelineConfig, out: Option<&Path>) -> Result<PathBuf> {
    let bank = load_bank(cfg)?;
    let img = viz::render_bank(&bank);
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.work_dir.join("kernels.png"));
    img.save(&path)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

/// Calibrate the weight scale on a seeded sample of the patch corpus and
/// write the probe report.
pub fn cmd_calibrate(cfg: &PipelineConfig) -> Result<CalibrationOutcome> {
    cfg.validate()?;
    let bank = load_bank(cfg)?;
    let corpus = load_patch_corpus(&cfg.work_dir)?;
    let mut patches: Vec<GrayImage> = corpus.into_iter().map(|(img, _)| img).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "calibration-sample"));
    patches.shuffle(&mut rng);
    patches.truncate(cfg.calibration_sample);
    let outcome = calibrate(
        &bank,
        &PoolLayerPlan::with_mode(cfg.pooling),
        &patches,
        cfg.target_hz,
        cfg.calibration_tolerance,
    )?;
    std::fs::write(
        cfg.work_dir.join("calibration.txt"),
        outcome.report(cfg.target_hz),
    )?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

/// Per-fold result.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    /// Scale and achieved rate from calibration; `None` when it failed.
    pub calibration: Option<(f64, f64)>,
    pub accuracy: Option<f64>,
    pub test_count: usize,
    pub failure: Option<String>,
}

/// Aggregated evaluation report.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub folds: Vec<FoldOutcome>,
    /// confusion[true][predicted], aggregated over all test splits.
    pub confusion: Vec<Vec<usize>>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub network_neurons: usize,
    pub network_synapses: usize,
    pub classifier_neurons: usize,
    pub pool_outputs: usize,
}

impl EvalReport {
    pub fn failed_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.failure.is_some()).count()
    }

    /// Machine-readable per-fold rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,status,scale,pool_hz,test_count,accuracy\n");
        for f in &self.folds {
            let status = if f.failure.is_some() { "failed" } else { "ok" };
            let (scale, hz) = f
                .calibration
                .map(|(s, h)| (format!("{s}"), format!("{h}")))
                .unwrap_or_default();
            let acc = f.accuracy.map(|a| format!("{a}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                f.fold, status, scale, hz, f.test_count, acc
            );
        }
        out
    }

    /// Human-readable summary. Deliberately timestamp-free so identical
    /// runs produce identical bytes.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "evaluation summary");
        let _ = writeln!(out, "==================");
        let _ = writeln!(out, "classes: {}", self.class_names.join(", "));
        let _ = writeln!(
            out,
            "folds: {} ({} failed), stratified by class",
            self.folds.len(),
            self.failed_folds()
        );
        for f in &self.folds {
            match (&f.failure, f.accuracy, f.calibration) {
                (Some(msg), _, _) => {
                    let _ = writeln!(out, "  fold {}: FAILED ({msg})", f.fold);
                }
                (None, Some(acc), Some((scale, hz))) => {
                    let _ = writeln!(
                        out,
                        "  fold {}: accuracy {:.4} on {} samples (scale {:.6}, pool rate {:.2} Hz)",
                        f.fold, acc, f.test_count, scale, hz
                    );
                }
                _ => {}
            }
        }
        let _ = writeln!(
            out,
            "accuracy: mean {:.4}, std {:.4}",
            self.mean_accuracy, self.std_accuracy
        );
        let _ = writeln!(out, "confusion matrix (rows = true class):");
        let _ = write!(out, "{:>12}", "");
        for name in &self.class_names {
            let _ = write!(out, "{name:>12}");
        }
        let _ = writeln!(out);
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(out, "{:>12}", self.class_names[i]);
            for &n in row {
                let _ = write!(out, "{n:>12}");
            }
            let _ = writeln!(out);
        }
        let total_ours =
            self.network_neurons + self.classifier_neurons;
        let _ = writeln!(
            out,
            "feature network: {} neurons ({} pool outputs), {} synapses",
            self.network_neurons, self.pool_outputs, self.network_synapses
        );
        let _ = writeln!(out, "classifier head: {} neurons", self.classifier_neurons);
        let _ = writeln!(
            out,
            "total neurons: {total_ours} (reference architecture: {REFERENCE_NEURON_COUNT})"
        );
        out
    }
}

/// Stratified fold assignment: per class, indices are shuffled with the fold
/// sub-seed and dealt round-robin, so test splits are disjoint, cover
/// everything, and balance classes to ±1.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Vec::new(); folds];
    for class in 0..num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (i, idx) in members.into_iter().enumerate() {
            assignment[i % folds].push(idx);
        }
    }
    for fold in &mut assignment {
        fold.sort_unstable();
    }
    assignment
}

/// Full cross-validated evaluation; see the crate docs for the flow. The
/// kernel bank is learned once (by `learn`); only calibration and the
/// classifier head are per-fold.
pub fn cmd_eval(cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let bank = load_bank(cfg)?;
    let corpus = load_patch_corpus(&cfg.work_dir)?;
    if corpus.is_empty() {
        return Err(Error::Config("patch corpus is empty".into()));
    }
    let mut class_names: Vec<String> = corpus.iter().map(|(_, l)| l.clone()).collect();
    class_names.sort();
    class_names.dedup();
    let label_of = |name: &str| class_names.iter().position(|c| c == name).unwrap();
    let patches: Vec<GrayImage> = corpus.iter().map(|(img, _)| img.clone()).collect();
    let labels: Vec<usize> = corpus.iter().map(|(_, l)| label_of(l)).collect();

    let fold_assignment = stratified_folds(&labels, cfg.folds, subseed(cfg.seed, "folds"));
    let pool_plan = PoolLayerPlan::with_mode(cfg.pooling);

    let mut folds = Vec::with_capacity(cfg.folds);
    let mut confusion = vec![vec![0usize; class_names.len()]; class_names.len()];
    let mut network_neurons = 0usize;
    let mut network_synapses = 0usize;
    let mut classifier_neurons = 0usize;
    let mut pool_outputs = 0usize;

    for (fold_idx, test_indices) in fold_assignment.iter().enumerate() {
        let in_test = {
            let mut mask = vec![false; patches.len()];
            for &i in test_indices {
                mask[i] = true;
            }
            mask
        };
        let mut train_indices: Vec<usize> =
            (0..patches.len()).filter(|&i| !in_test[i]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(
            cfg.seed,
            &format!("train-order-{fold_idx}"),
        ));
        train_indices.shuffle(&mut rng);

        let train_patches: Vec<GrayImage> =
            train_indices.iter().map(|&i| patches[i].clone()).collect();
        let sample: Vec<GrayImage> = train_patches
            .iter()
            .take(cfg.calibration_sample)
            .cloned()
            .collect();
        let outcome = match calibrate(
            &bank,
            &pool_plan,
            &sample,
            cfg.target_hz,
            cfg.calibration_tolerance,
        ) {
            Ok(o) => o,
            Err(e) => {
                folds.push(FoldOutcome {
                    fold: fold_idx,
                    calibration: None,
                    accuracy: None,
                    test_count: test_indices.len(),
                    failure: Some(e.to_string()),
                });
                continue;
            }
        };
        let net = build_network(&bank, outcome.scale, &pool_plan)?;
        network_neurons = net.network.neuron_count();
        network_synapses = net.network.synapse_count();
        pool_outputs = net.output_len();

        let train_streams = transform_stream(&net, &train_patches)?;
        let items: Vec<(crate::snn::SpikeSchedule, usize)> = train_streams
            .into_iter()
            .zip(train_indices.iter().map(|&i| labels[i]))
            .collect();
        let head_params = ColanetParams {
            num_classes: class_names.len(),
            microcolumns_per_column: cfg.microcolumns,
            inputs: net.output_len(),
            learning_rate: cfg.classifier_learning_rate,
            weight_min: cfg.classifier_weight_min,
            weight_max: cfg.classifier_weight_max,
            bias_increment: cfg.bias_increment,
            seed: subseed(cfg.seed, &format!("classifier-init-{fold_idx}")),
        };
        let mut head = Colanet::new(head_params)?;
        let stats = head.train_epoch(&items)?;
        std::fs::write(
            cfg.work_dir.join(format!("train_log_fold{fold_idx}.csv")),
            stats.to_csv(),
        )?;
        classifier_neurons = head.structure().total_neurons();

        let test_patches: Vec<GrayImage> =
            test_indices.iter().map(|&i| patches[i].clone()).collect();
        let test_streams = transform_stream(&net, &test_patches)?;
        let mut correct = 0usize;
        for (stream, &idx) in test_streams.iter().zip(test_indices.iter()) {
            let predicted = head.classify(stream)?.predicted;
            confusion[labels[idx]][predicted] += 1;
            if predicted == labels[idx] {
                correct += 1;
            }
        }
        folds.push(FoldOutcome {
            fold: fold_idx,
            calibration: Some((outcome.scale, outcome.achieved_hz)),
            accuracy: Some(correct as f64 / test_indices.len().max(1) as f64),
            test_count: test_indices.len(),
            failure: None,
        });
    }

    let accuracies: Vec<f64> = folds.iter().filter_map(|f| f.accuracy).collect();
    let mean = if accuracies.is_empty() {
        0.0
    } else {
        accuracies.iter().sum::<f64>() / accuracies.len() as f64
    };
    let std = if accuracies.len() > 1 {
        (accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
            / (accuracies.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    let report = EvalReport {
        class_names,
        folds,
        confusion,
        mean_accuracy: mean,
        std_accuracy: std,
        network_neurons,
        network_synapses,
        classifier_neurons,
        pool_outputs,
    };
    std::fs::write(cfg.work_dir.join("eval_report.csv"), report.to_csv())?;
    std::fs::write(cfg.work_dir.join("eval_summary.txt"), report.summary())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

/// Generate the bundled three-class demo corpus straight into the work dir.
pub fn cmd_synth(cfg: &PipelineConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.work_dir)?;
    synth::write_patch_corpus(&cfg.work_dir, cfg.synth_per_class, subseed(cfg.seed, "synth"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn demo_config(dir: &Path) -> PipelineConfig {
        PipelineConfig {
            work_dir: dir.to_path_buf(),
            seed: 9,
            folds: 3,
            kernels: 4,
            calibration_sample: 6,
            microcolumns: 4,
            synth_per_class: 12,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn stratified_folds_partition_and_balance() {
        let labels: Vec<usize> = (0..90).map(|i| i % 3).collect();
        let folds = stratified_folds(&labels, 5, 7);
        let mut seen = vec![false; labels.len()];
        for fold in &folds {
            for &i in fold {
                assert!(!seen[i], "index {i} in two folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        for fold in &folds {
            assert_eq!(fold.len(), 18);
            for class in 0..3 {
                let n = fold.iter().filter(|&&i| labels[i] == class).count();
                assert_eq!(n, 6, "class {class} imbalanced");
            }
        }
    }

    #[test]
    fn stratified_folds_tolerate_uneven_sizes() {
        let labels: Vec<usize> = (0..31).map(|i| i % 2).collect();
        let folds = stratified_folds(&labels, 4, 1);
        let total: usize = folds.iter().map(Vec::len).sum();
        assert_eq!(total, 31);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 2);
    }

    #[test]
    fn synth_learn_eval_roundtrip_is_deterministic() {
        let dir_a = TempDir::new().unwrap();
        let dir_b = TempDir::new().unwrap();
        let mut reports = Vec::new();
        for dir in [&dir_a, &dir_b] {
            let cfg = demo_config(dir.path());
            cmd_synth(&cfg).unwrap();
            cmd_learn(&cfg).unwrap();
            let report = cmd_eval(&cfg).unwrap();
            reports.push(report);
        }
        let read = |dir: &TempDir, name: &str| std::fs::read(dir.path().join(name)).unwrap();
        for name in [BANK_FILE, "eval_report.csv", "eval_summary.txt", "learning_log.csv"] {
            assert_eq!(read(&dir_a, name), read(&dir_b, name), "{name} differs");
        }
        assert_eq!(reports[0].failed_folds(), 0);
    }

    #[test]
    fn eval_report_arithmetic_recomputable_from_csv() {
        let dir = TempDir::new().unwrap();
        let cfg = demo_config(dir.path());
        cmd_synth(&cfg).unwrap();
        cmd_learn(&cfg).unwrap();
        let report = cmd_eval(&cfg).unwrap();
        let csv_text = std::fs::read_to_string(dir.path().join("eval_report.csv")).unwrap();
        let mut accs = Vec::new();
        for line in csv_text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols[1] == "ok" {
                accs.push(cols[5].parse::<f64>().unwrap());
            }
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - report.mean_accuracy).abs() < 1e-12);
        let std = (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
            / (accs.len() - 1) as f64)
            .sqrt();
        assert!((std - report.std_accuracy).abs() < 1e-12);
        // Confusion rows sum to per-class test counts: every sample is
        // tested exactly once.
        let row_sums: Vec<usize> = report.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(row_sums.iter().sum::<usize>(), 3 * cfg.synth_per_class);
    }

    #[test]
    fn prep_skips_bad_rows_and_continues() {
        let dir = TempDir::new().unwrap();
        let images = dir.path().join("raw");
        std::fs::create_dir_all(&images).unwrap();
        // One good 64x64 image with a bright square.
        let mut img = image::GrayImage::from_pixel(64, 64, image::Luma([8]));
        for y in 20..40 {
            for x in 20..44 {
                img.put_pixel(x, y, image::Luma([200]));
            }
        }
        img.save(images.join("a.png")).unwrap();
        let manifest = dir.path().join("boxes.csv");
        std::fs::write(
            &manifest,
            "path,x,y,w,h,label\n\
             a.png,18,18,28,24,car\n\
             missing.png,0,0,10,10,car\n\
             a.png,200,200,10,10,car\n\
             a.png,10,10,0,4,car\n",
        )
        .unwrap();
        let cfg = PipelineConfig {
            images_dir: images,
            box_manifest: manifest,
            work_dir: dir.path().join("work"),
            ..PipelineConfig::default()
        };
        let stats = cmd_prep(&cfg).unwrap();
        assert_eq!(stats.written, 1);
        assert_eq!(stats.skipped, 3);
        assert!(stats.mean_brightness > 0.0);
        let corpus = load_patch_corpus(&cfg.work_dir).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus[0].1, "car");
    }

    #[test]
    fn prep_empty_manifest_writes_empty_output() {
        let dir = TempDir::new().unwrap();
        let manifest = dir.path().join("boxes.csv");
        std::fs::write(&manifest, "path,x,y,w,h,label\n").unwrap();
        let cfg = PipelineConfig {
            box_manifest: manifest,
            work_dir: dir.path().join("work"),
            ..PipelineConfig::default()
        };
        let stats = cmd_prep(&cfg).unwrap();
        assert_eq!((stats.written, stats.skipped), (0, 0));
        assert!(load_patch_corpus(&cfg.work_dir).unwrap().is_empty());
    }

    #[test]
    fn viz_writes_png_and_calibrate_reports() {
        let dir = TempDir::new().unwrap();
        let cfg = demo_config(dir.path());
        cmd_synth(&cfg).unwrap();
        cmd_learn(&cfg).unwrap();
        let png = cmd_viz(&cfg, None).unwrap();
        assert!(png.exists());
        let outcome = cmd_calibrate(&cfg).unwrap();
        assert!(outcome.evaluations <= 60);
        let report = std::fs::read_to_string(dir.path().join("calibration.txt")).unwrap();
        assert!(report.contains("final scale"));
        assert!(
            (outcome.achieved_hz - cfg.target_hz).abs()
                <= cfg.calibration_tolerance * cfg.target_hz
        );
    }
}
