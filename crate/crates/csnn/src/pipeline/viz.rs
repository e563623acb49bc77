//! Kernel visualization: each kernel rendered as a K×K cell grid on a
//! diverging palette, blue for negative, white for zero, red for positive,
//! normalized per bank to the largest absolute weight.

use crate::kernel::KernelBank;

const CELL_PX: u32 = 12;
const GAP_PX: u32 = 2;

/// Map a normalized weight in [-1, 1] to a diverging RGB color. Saturation
/// is proportional to |t|: +1 is full red, -1 full blue, 0 white.
pub fn diverging_color(t: f64) -> [u8; 3] {
    let t = t.clamp(-1.0, 1.0);
    let fade = (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        [255, fade, fade]
    } else {
        [fade, fade, 255]
    }
}

/// Render the bank as an RGB image: kernels laid out in a near-square grid,
/// one colored cell per weight.
pub fn render_bank(bank: &KernelBank) -> image::RgbImage {
    let k = bank.kernel_size() as u32;
    let n = bank.kernel_count() as u32;
    let cols = (n as f64).sqrt().ceil() as u32;
    let rows = n.div_ceil(cols);
    let tile = k * CELL_PX;
    let width = cols * tile + (cols + 1) * GAP_PX;
    let height = rows * tile + (rows + 1) * GAP_PX;
    let norm = bank.max_abs_weight();
    let mut img = image::RgbImage::from_pixel(width, height, image::Rgb([64, 64, 64]));
    for a in 0..n {
        let weights = bank.kernel_weights(a as usize);
        let (gc, gr) = (a % cols, a / cols);
        let x0 = GAP_PX + gc * (tile + GAP_PX);
        let y0 = GAP_PX + gr * (tile + GAP_PX);
        for i in 0..k {
            for j in 0..k {
                let w = weights[(i * k + j) as usize];
                let t = if norm == 0.0 { 0.0 } else { w / norm };
                let color = image::Rgb(diverging_color(t));
                for dy in 0..CELL_PX {
                    for dx in 0..CELL_PX {
                        img.put_pixel(x0 + j * CELL_PX + dx, y0 + i * CELL_PX + dy, color);
                    }
                }
            }
        }
    }
    img
}
