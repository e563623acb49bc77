//! Synthetic three-class demo corpus: horizontal bars, vertical bars and
//! blobs, drawn as bright structure on a dark background so the patches look
//! like the heat maps the real pipeline produces.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::preprocess::{GrayImage, PATCH_SIDE};

pub const CLASS_NAMES: [&str; 3] = ["hbar", "vbar", "blob"];

/// One ready-to-train 31×31 patch.
pub fn make_patch(class: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    let side = PATCH_SIDE;
    let mut img = GrayImage::filled(side, side, 0).unwrap();
    // Dim background speckle.
    for y in 0..side {
        for x in 0..side {
            if rng.random_range(0..100) < 12 {
                img.set(x, y, rng.random_range(5..25));
            }
        }
    }
    match class {
        0 => {
            // Horizontal bars.
            let bars = rng.random_range(2..=3);
            for _ in 0..bars {
                let y0 = rng.random_range(0..side - 3);
                let thickness = rng.random_range(2..=3);
                let value = rng.random_range(170..=255);
                for dy in 0..thickness {
                    for x in 0..side {
                        img.set(x, y0 + dy, value);
                    }
                }
            }
        }
        1 => {
            // Vertical bars.
            let bars = rng.random_range(2..=3);
            for _ in 0..bars {
                let x0 = rng.random_range(0..side - 3);
                let thickness = rng.random_range(2..=3);
                let value = rng.random_range(170..=255);
                for dx in 0..thickness {
                    for y in 0..side {
                        img.set(x0 + dx, y, value);
                    }
                }
            }
        }
        _ => {
            // Rings, the way compact objects come out of a heat map.
            let blobs = rng.random_range(2..=4);
            for _ in 0..blobs {
                let r = rng.random_range(4..=7) as i64;
                let cx = rng.random_range(r as u32..side - r as u32) as i64;
                let cy = rng.random_range(r as u32..side - r as u32) as i64;
                let value = rng.random_range(170..=255);
                let inner = (r - 2) * (r - 2);
                for y in (cy - r).max(0)..(cy + r + 1).min(side as i64) {
                    for x in (cx - r).max(0)..(cx + r + 1).min(side as i64) {
                        let (dx, dy) = (x - cx, y - cy);
                        let d2 = dx * dx + dy * dy;
                        if d2 <= r * r && d2 >= inner {
                            img.set(x as u32, y as u32, value);
                        }
                    }
                }
            }
        }
    }
    img
}

/// A labeled patch corpus, classes interleaved for balance.
pub fn make_corpus(per_class: usize, seed: u64) -> Vec<(GrayImage, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_class * CLASS_NAMES.len());
    for i in 0..per_class {
        for class in 0..CLASS_NAMES.len() {
            let _ = i;
            out.push((make_patch(class, &mut rng), class));
        }
    }
    out
}

/// Write a patch corpus as PNG files plus the `path,label` manifest the
/// `learn` and `eval` commands read.
pub fn write_patch_corpus(
    dir: &std::path::Path,
    per_class: usize,
    seed: u64,
) -> Result<std::path::PathBuf> {
    let patches_dir = dir.join("patches");
    std::fs::create_dir_all(&patches_dir)?;
    let corpus = make_corpus(per_class, seed);
    let manifest_path = dir.join("patch_manifest.csv");
    let mut writer = csv::Writer::from_path(&manifest_path)?;
    writer.write_record(["path", "label"])?;
    for (i, (patch, class)) in corpus.iter().enumerate() {
        let name = format!("patches/{:05}_{}.png", i, CLASS_NAMES[*class]);
        let buf = image::GrayImage::from_raw(
            patch.width(),
            patch.height(),
            patch.pixels().to_vec(),
        )
        .expect("patch buffer size");
        buf.save(dir.join(&name))?;
        writer.write_record([name.as_str(), CLASS_NAMES[*class]])?;
    }
    writer.flush()?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_balanced_and_deterministic() {
        let a = make_corpus(10, 3);
        let b = make_corpus(10, 3);
        assert_eq!(a.len(), 30);
        for class in 0..3 {
            assert_eq!(a.iter().filter(|(_, c)| *c == class).count(), 10);
        }
        for ((ia, ca), (ib, cb)) in a.iter().zip(b.iter()) {
            assert_eq!(ca, cb);
            assert_eq!(ia, ib);
        }
        let c = make_corpus(10, 4);
        assert!(a.iter().zip(c.iter()).any(|((ia, _), (ic, _))| ia != ic));
    }

    #[test]
    fn patches_have_bright_structure_on_dark_ground() {
        let corpus = make_corpus(5, 1);
        for (img, class) in corpus {
            assert!(img.is_patch());
            let bright = img.pixels().iter().filter(|&&p| p > 150).count();
            let dark = img.pixels().iter().filter(|&&p| p < 30).count();
            assert!(bright > 30, "class {class}: only {bright} bright pixels");
            assert!(dark > 300, "class {class}: only {dark} dark pixels");
        }
    }
}
