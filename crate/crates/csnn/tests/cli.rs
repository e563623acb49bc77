//! End-to-end checks of the `csnn` binary: exit codes, config handling and
//! the files each subcommand leaves behind.

use std::path::Path;
use std::process::Command;

fn csnn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csnn"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("pipeline.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn synth_learn_viz_calibrate_eval_chain() {
    let dir = tempfile::TempDir::new().unwrap();
    let work = dir.path().join("work");
    let config = write_config(
        dir.path(),
        &format!(
            "work_dir = {}\nseed = 5\nfolds = 2\nkernels = 4\nmicrocolumns = 4\n\
             calibration_sample = 6\nsynth_per_class = 8\n",
            work.display()
        ),
    );
    for sub in ["synth", "learn", "viz", "calibrate", "eval"] {
        let out = csnn()
            .args([sub, "--config"])
            .arg(&config)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{sub} failed: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in [
        "patch_manifest.csv",
        "kernels.kbank",
        "learning_log.csv",
        "kernels.png",
        "calibration.txt",
        "eval_report.csv",
        "eval_summary.txt",
    ] {
        assert!(work.join(file).exists(), "{file} missing");
    }
    let summary = std::fs::read_to_string(work.join("eval_summary.txt")).unwrap();
    assert!(summary.contains("confusion matrix"));
    assert!(summary.contains("9412"));
}

#[test]
fn prep_runs_on_raw_images_with_boxes() {
    let dir = tempfile::TempDir::new().unwrap();
    let images = dir.path().join("raw");
    std::fs::create_dir_all(&images).unwrap();
    let mut img = image::RgbImage::from_pixel(48, 48, image::Rgb([10, 10, 10]));
    for y in 8..40 {
        for x in 8..40 {
            if (x + y) % 6 < 2 {
                img.put_pixel(x, y, image::Rgb([230, 230, 230]));
            }
        }
    }
    img.save(images.join("scene.png")).unwrap();
    std::fs::write(
        dir.path().join("boxes.csv"),
        "path,x,y,w,h,label\nscene.png,6,6,36,34,thing\n",
    )
    .unwrap();
    let work = dir.path().join("work");
    let config = write_config(
        dir.path(),
        &format!(
            "images_dir = {}\nbox_manifest = {}\nwork_dir = {}\n",
            images.display(),
            dir.path().join("boxes.csv").display(),
            work.display()
        ),
    );
    let out = csnn().args(["prep", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("wrote 1 patches"), "{stdout}");
    assert!(stdout.contains("mean brightness"), "{stdout}");
    assert!(work.join("patch_manifest.csv").exists());
}

#[test]
fn unknown_config_key_fails_with_nonzero_exit() {
    let dir = tempfile::TempDir::new().unwrap();
    let config = write_config(dir.path(), "not_a_key = 1\n");
    let out = csnn().args(["learn", "--config"]).arg(&config).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not_a_key"), "{stderr}");
}

#[test]
fn eval_without_bank_fails_cleanly() {
    let dir = tempfile::TempDir::new().unwrap();
    let out = csnn()
        .args(["eval", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("learn"), "{stderr}");
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tempfile::TempDir::new().unwrap();
    let work_a = dir.path().join("a");
    let work_b = dir.path().join("b");
    for (work, seed) in [(&work_a, "1"), (&work_b, "2")] {
        for sub in ["synth", "learn"] {
            let out = csnn()
                .args([
                    sub,
                    "--seed",
                    seed,
                    "--kernels",
                    "4",
                    "--out",
                    work.to_str().unwrap(),
                ])
                .output()
                .unwrap();
            assert!(out.status.success());
        }
    }
    let a = std::fs::read(work_a.join("kernels.kbank")).unwrap();
    let b = std::fs::read(work_b.join("kernels.kbank")).unwrap();
    assert_ne!(a, b, "different seeds must give different banks");
}

#[test]
fn help_documents_every_config_key() {
    let out = csnn().args(["--help"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for key in [
        "images_dir",
        "box_manifest",
        "work_dir",
        "seed",
        "folds",
        "kernels",
        "kernel_size",
        "stride",
        "brightness_threshold",
        "weight_min",
        "weight_max",
        "learning_rate",
        "target_hz",
        "calibration_tolerance",
        "calibration_sample",
        "pooling",
        "microcolumns",
        "classifier_learning_rate",
        "classifier_weight_min",
        "classifier_weight_max",
        "bias_increment",
        "synth_per_class",
    ] {
        assert!(text.contains(key), "--help missing config key {key}");
    }
}
