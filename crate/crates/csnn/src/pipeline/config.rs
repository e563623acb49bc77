//! Flat key-value configuration for the batch pipeline.
//!
//! The file format is one `key = value` per line, `#` comments, no sections.
//! Unknown keys are errors so typos cannot silently fall back to defaults.

use std::path::{Path, PathBuf};

use crate::builder::PoolMode;
use crate::error::{Error, Result};
use crate::kernel::LearnerParams;

/// Everything the CLI commands need. Field defaults follow the reference
/// configuration; paths default to the current directory.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Directory of raw input images (prep).
    pub images_dir: PathBuf,
    /// Bounding-box manifest CSV `path,x,y,w,h,label` (prep).
    pub box_manifest: PathBuf,
    /// Output directory for patches, banks, logs and reports.
    pub work_dir: PathBuf,
    /// Master seed; all stage randomness derives from it via named sub-seeds.
    pub seed: u64,
    /// Cross-validation folds.
    pub folds: usize,
    pub kernels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub brightness_threshold: u8,
    pub weight_min: f64,
    pub weight_max: f64,
    /// Kernel learning rate; unset derives 100/255/corpus_size.
    pub learning_rate: Option<f64>,
    pub target_hz: f64,
    pub calibration_tolerance: f64,
    /// Patches used per calibration probe.
    pub calibration_sample: usize,
    pub pooling: PoolMode,
    pub microcolumns: usize,
    pub classifier_learning_rate: f64,
    pub classifier_weight_min: f64,
    pub classifier_weight_max: f64,
    pub bias_increment: f64,
    /// Images per class for the `synth` command.
    pub synth_per_class: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            images_dir: PathBuf::from("."),
            box_manifest: PathBuf::from("boxes.csv"),
            work_dir: PathBuf::from("work"),
            seed: 0,
            folds: 5,
            kernels: 28,
            kernel_size: 9,
            stride: 2,
            brightness_threshold: 26,
            weight_min: -5.0 / 3.0 / 255.0,
            weight_max: 5.0 / 255.0,
            learning_rate: None,
            target_hz: 50.0,
            calibration_tolerance: 0.1,
            calibration_sample: 32,
            pooling: PoolMode::Average,
            microcolumns: 22,
            classifier_learning_rate: 0.0035,
            classifier_weight_min: -0.0628,
            classifier_weight_max: 0.152,
            bias_increment: 0.02,
            synth_per_class: 100,
        }
    }
}

/// `(key, explanation)` for every accepted config key; rendered into the
/// CLI help text.
pub const KEY_HELP: &[(&str, &str)] = &[
    ("images_dir", "directory of raw input images (prep)"),
    ("box_manifest", "bounding-box CSV `path,x,y,w,h,label` (prep)"),
    ("work_dir", "output directory for patches, bank, logs, reports"),
    ("seed", "master seed; every stage derives its own sub-seed"),
    ("folds", "cross-validation fold count (>= 2)"),
    ("kernels", "number of convolution kernels N_C"),
    ("kernel_size", "kernel side K in pixels"),
    ("stride", "convolution stride s in pixels"),
    ("brightness_threshold", "bright-pixel threshold B in [0,255]"),
    ("weight_min", "kernel weight lower limit (<= 0)"),
    ("weight_max", "kernel weight upper limit (> 0)"),
    ("learning_rate", "kernel learning rate l; `auto` = 100/255/corpus"),
    ("target_hz", "calibration target mean pooling rate in Hz"),
    ("calibration_tolerance", "relative tolerance on the target rate"),
    ("calibration_sample", "patches per calibration probe"),
    ("pooling", "pooling mode: `average` or `max_wta`"),
    ("microcolumns", "microcolumns per classifier column"),
    ("classifier_learning_rate", "classifier plasticity step"),
    ("classifier_weight_min", "classifier weight lower clip"),
    ("classifier_weight_max", "classifier weight upper clip"),
    ("bias_increment", "per-presentation bias growth for silent columns"),
    ("synth_per_class", "images per class for the synth command"),
];

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, path)
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            cfg.apply(key, value).map_err(|e| err(e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Set one key from its text value. Unknown keys are errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Config(format!("{key}: {e}")))
        }
        match key {
            "images_dir" => self.images_dir = PathBuf::from(value),
            "box_manifest" => self.box_manifest = PathBuf::from(value),
            "work_dir" => self.work_dir = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "folds" => self.folds = num(key, value)?,
            "kernels" => self.kernels = num(key, value)?,
            "kernel_size" => self.kernel_size = num(key, value)?,
            "stride" => self.stride = num(key, value)?,
            "brightness_threshold" => self.brightness_threshold = num(key, value)?,
            "weight_min" => self.weight_min = num(key, value)?,
            "weight_max" => self.weight_max = num(key, value)?,
            "learning_rate" => {
                self.learning_rate = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "target_hz" => self.target_hz = num(key, value)?,
            "calibration_tolerance" => self.calibration_tolerance = num(key, value)?,
            "calibration_sample" => self.calibration_sample = num(key, value)?,
            "pooling" => {
                self.pooling = match value {
                    "average" => PoolMode::Average,
                    "max_wta" => PoolMode::MaxWta,
                    other => {
                        return Err(Error::Config(format!(
                            "pooling must be `average` or `max_wta`, got {other:?}"
                        )))
                    }
                }
            }
            "microcolumns" => self.microcolumns = num(key, value)?,
            "classifier_learning_rate" => self.classifier_learning_rate = num(key, value)?,
            "classifier_weight_min" => self.classifier_weight_min = num(key, value)?,
            "classifier_weight_max" => self.classifier_weight_max = num(key, value)?,
            "bias_increment" => self.bias_increment = num(key, value)?,
            "synth_per_class" => self.synth_per_class = num(key, value)?,
            unknown => {
                return Err(Error::Config(format!("unknown key {unknown:?}")));
            }
        }
        Ok(())
    }

    /// Structural sanity checks shared by the commands.
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "folds must be >= 2, got {}",
                self.folds
            )));
        }
        if self.calibration_sample == 0 {
            return Err(Error::Config("calibration_sample must be >= 1".into()));
        }
        Ok(())
    }

    /// Learner parameters for a corpus of `corpus_size` patches.
    pub fn learner_params(&self, corpus_size: usize) -> LearnerParams {
        LearnerParams {
            kernel_size: self.kernel_size,
            kernel_count: self.kernels,
            stride: self.stride,
            brightness_threshold: self.brightness_threshold,
            w_min: self.weight_min,
            w_max: self.weight_max,
            learning_rate: self.learning_rate,
            corpus_size,
            seed: subseed(self.seed, "kernel-learning"),
        }
    }
}

/// Derive an independent, reproducible seed for a named pipeline stage.
pub fn subseed(seed: u64, label: &str) -> u64 {
    // splitmix64 over the label bytes folded into the master seed; stable
    // across platforms and releases, unlike the std hasher.
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &b in label.as_bytes() {
        state = state.wrapping_add(b as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        state ^= state >> 31;
    }
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys_and_comments() {
        let text = "\
# demo
seed = 42
folds = 3
kernels = 8
pooling = max_wta
learning_rate = auto
work_dir = /tmp/x
";
        let cfg = PipelineConfig::from_text(text, Path::new("cfg")).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.folds, 3);
        assert_eq!(cfg.kernels, 8);
        assert_eq!(cfg.pooling, PoolMode::MaxWta);
        assert_eq!(cfg.learning_rate, None);
        assert_eq!(cfg.work_dir, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn unknown_key_is_an_error_with_line() {
        let text = "seed = 1\nkernel_cnt = 9\n";
        match PipelineConfig::from_text(text, Path::new("cfg")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("kernel_cnt"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_malformed_lines_rejected() {
        assert!(PipelineConfig::from_text("seed = 1\nseed = 2\n", Path::new("c")).is_err());
        assert!(PipelineConfig::from_text("just words\n", Path::new("c")).is_err());
        assert!(PipelineConfig::from_text("pooling = median\n", Path::new("c")).is_err());
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let mut cfg = PipelineConfig::default();
        for (key, _) in KEY_HELP {
            let value = match *key {
                "images_dir" | "box_manifest" | "work_dir" => "p",
                "pooling" => "average",
                "learning_rate" => "auto",
                "weight_min" | "classifier_weight_min" => "-0.1",
                _ => "3",
            };
            cfg.apply(key, value)
                .unwrap_or_else(|e| panic!("documented key {key} rejected: {e}"));
        }
    }

    #[test]
    fn subseed_is_stable_and_label_sensitive() {
        assert_eq!(subseed(7, "shuffle"), subseed(7, "shuffle"));
        assert_ne!(subseed(7, "shuffle"), subseed(7, "folds"));
        assert_ne!(subseed(7, "shuffle"), subseed(8, "shuffle"));
    }
}
