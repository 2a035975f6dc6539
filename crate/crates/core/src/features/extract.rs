//! Baseline extractors that stand in for trained networks, so the pipeline
//! runs end to end on raw images.

use std::f64::consts::PI;

use super::{l2_normalize, FeatureBlock};
use crate::preprocess::{NormalizedImage, TextMask};
use crate::taxonomy::CharacteristicKind;

pub const COLOR_BINS_PER_CHANNEL: usize = 5;
pub const COLOR_DIM: usize = COLOR_BINS_PER_CHANNEL * COLOR_BINS_PER_CHANNEL * COLOR_BINS_PER_CHANNEL;

pub const ORIENTATION_BINS: usize = 16;
const GRID_ROWS: usize = 2;
const GRID_COLS: usize = 4;
pub const EDGE_DIM: usize = ORIENTATION_BINS * GRID_ROWS * GRID_COLS;

pub const TEXT_DIM: usize = 2;
/// Minimum masked fraction for the text surrogate to report "present".
pub const TEXT_COVERAGE_THRESHOLD: f64 = 0.001;

const THUMB_SIDE: usize = 16;
pub const GENERIC_DIM: usize = THUMB_SIDE * THUMB_SIDE;

fn color_bin(v: f32) -> usize {
    ((v * COLOR_BINS_PER_CHANNEL as f32) as usize).min(COLOR_BINS_PER_CHANNEL - 1)
}

/// Joint RGB histogram with five levels per channel, divided by the pixel
/// count. Bin index is `r * 25 + g * 5 + b`.
pub fn color_histogram_l1(img: &NormalizedImage) -> Vec<f64> {
    let mut hist = vec![0.0; COLOR_DIM];
    let n = (img.width() as usize * img.height() as usize) as f64;
    let mut counts = vec![0u64; COLOR_DIM];
    for p in img.data().chunks_exact(3) {
        let idx = color_bin(p[0]) * 25 + color_bin(p[1]) * 5 + color_bin(p[2]);
        counts[idx] += 1;
    }
    for (h, c) in hist.iter_mut().zip(counts) {
        *h = c as f64 / n;
    }
    hist
}

pub fn color_histogram_extractor(img: &NormalizedImage) -> FeatureBlock {
    l2_normalize(&FeatureBlock::new(
        CharacteristicKind::Color,
        color_histogram_l1(img),
    ))
}

/// Central-difference gradient at interior pixels, yielding
/// `(x, y, magnitude, orientation bin)`. The orientation of `atan2(gy, gx)`
/// over the full circle is split into [`ORIENTATION_BINS`] sectors starting
/// at -pi; image rows grow downwards.
fn gradients(gray: &[f32], w: usize, h: usize) -> impl Iterator<Item = (usize, usize, f64, usize)> + '_ {
    (1..h.saturating_sub(1)).flat_map(move |y| {
        (1..w.saturating_sub(1)).filter_map(move |x| {
            let gx = gray[y * w + x + 1] as f64 - gray[y * w + x - 1] as f64;
            let gy = gray[(y + 1) * w + x] as f64 - gray[(y - 1) * w + x] as f64;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                return None;
            }
            let theta = gy.atan2(gx);
            let bin = (((theta + PI) / (2.0 * PI) * ORIENTATION_BINS as f64) as usize) % ORIENTATION_BINS;
            Some((x, y, mag, bin))
        })
    })
}

/// Magnitude-weighted orientation histogram over the whole image.
pub fn orientation_histogram(img: &NormalizedImage) -> [f64; ORIENTATION_BINS] {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = img.gray();
    let mut hist = [0.0; ORIENTATION_BINS];
    for (_, _, mag, bin) in gradients(&gray, w, h) {
        hist[bin] += mag;
    }
    hist
}

/// Orientation histograms over a 2x4 grid of cells (row-major cells, 16
/// bins each), l2-normalized. A flat image yields the zero block.
pub fn edge_orientation_extractor(img: &NormalizedImage) -> FeatureBlock {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = img.gray();
    let mut hist = vec![0.0; EDGE_DIM];
    for (x, y, mag, bin) in gradients(&gray, w, h) {
        let cell = (y * GRID_ROWS / h) * GRID_COLS + x * GRID_COLS / w;
        hist[cell * ORIENTATION_BINS + bin] += mag;
    }
    l2_normalize(&FeatureBlock::new(CharacteristicKind::Shape, hist))
}

/// One-hot `[absent, present]` from the share of masked pixels.
pub fn text_presence_extractor(mask: Option<&TextMask>) -> FeatureBlock {
    let present = mask.is_some_and(|m| m.coverage() >= TEXT_COVERAGE_THRESHOLD);
    let values = if present { vec![0.0, 1.0] } else { vec![1.0, 0.0] };
    FeatureBlock::new(CharacteristicKind::Text, values)
}

/// 16x16 area-averaged grayscale thumbnail, l2-normalized; a coarse
/// appearance code of the same size as the auto-encoder's.
pub fn generic_thumbnail_extractor(img: &NormalizedImage) -> FeatureBlock {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = img.gray();
    let mut sums = vec![0.0f64; GENERIC_DIM];
    let mut counts = vec![0u32; GENERIC_DIM];
    for y in 0..h {
        let cy = y * THUMB_SIDE / h;
        for x in 0..w {
            let cell = cy * THUMB_SIDE + x * THUMB_SIDE / w;
            sums[cell] += gray[y * w + x] as f64;
            counts[cell] += 1;
        }
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    l2_normalize(&FeatureBlock::new(CharacteristicKind::Generic, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::RasterImage;
    use rand::{Rng, SeedableRng};

    fn norm(img: &RasterImage) -> NormalizedImage {
        NormalizedImage::from_raster(img)
    }

    #[test]
    fn pure_red_fills_one_bin() {
        let block = color_histogram_extractor(&norm(&RasterImage::filled(8, 8, [255, 0, 0])));
        assert_eq!(block.dim(), COLOR_DIM);
        let nonzero: Vec<_> = block.values.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        assert_eq!(nonzero, vec![(100, &1.0)]);
    }

    #[test]
    fn half_red_half_blue_gives_two_equal_bins() {
        let img = RasterImage::from_fn(10, 6, |x, _| if x < 5 { [255, 0, 0] } else { [0, 0, 255] });
        let block = color_histogram_extractor(&norm(&img));
        let nonzero: Vec<f64> = block.values.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nonzero.len(), 2);
        assert_eq!(nonzero[0], nonzero[1]);
        assert_eq!(block.values[100], block.values[4]);
    }

    #[test]
    fn histogram_counts_match_independent_tally() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let img = RasterImage::from_fn(23, 17, |_, _| rng.gen());
        let hist = color_histogram_l1(&norm(&img));
        let mut tally = vec![0usize; COLOR_DIM];
        for y in 0..17 {
            for x in 0..23 {
                let p = img.pixel(x, y);
                let level = |v: u8| ((v as usize * 5) / 255).min(4);
                tally[level(p[0]) * 25 + level(p[1]) * 5 + level(p[2])] += 1;
            }
        }
        for (h, t) in hist.iter().zip(&tally) {
            assert_eq!(*h, *t as f64 / (23.0 * 17.0));
        }
        assert!((hist.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn flat_image_has_no_edges() {
        let block = edge_orientation_extractor(&norm(&RasterImage::filled(12, 12, [40, 90, 10])));
        assert_eq!(block.dim(), EDGE_DIM);
        assert!(block.is_zero());
    }

    #[test]
    fn vertical_step_edge_is_horizontal_gradient() {
        let img = RasterImage::from_fn(8, 8, |x, _| if x < 4 { [0; 3] } else { [255; 3] });
        let block = edge_orientation_extractor(&norm(&img));
        // Gradient (+g, 0) points along +x: angle 0, bin 8. Columns 3 and 4
        // fall in grid columns 1 and 2; rows 1-3 and 4-6 in grid rows 0, 1.
        let mut expected = vec![0.0; EDGE_DIM];
        for cell in [1, 2, 5, 6] {
            expected[cell * ORIENTATION_BINS + 8] = 0.5;
        }
        for (got, want) in block.values.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12, "{:?}", block.values);
        }
    }

    #[test]
    fn quarter_turn_shifts_orientations_by_four_bins() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 16;
        let img = RasterImage::from_fn(n, n, |_, _| rng.gen());
        // rotated(x, y) = img(y, n - 1 - x) maps gradient (gx, gy) to (-gy, gx)
        let rotated = RasterImage::from_fn(n, n, |x, y| img.pixel(y, n - 1 - x));
        let h = orientation_histogram(&norm(&img));
        let r = orientation_histogram(&norm(&rotated));
        for b in 0..ORIENTATION_BINS {
            let want = h[b];
            let got = r[(b + 4) % ORIENTATION_BINS];
            assert!((got - want).abs() <= 1e-9 * want.max(1.0), "bin {b}: {got} vs {want}");
        }
    }

    #[test]
    fn text_surrogate() {
        assert_eq!(text_presence_extractor(None).values, vec![1.0, 0.0]);
        let mask = TextMask::from_fn(10, 10, |x, y| x < 3 && y < 2);
        assert_eq!(text_presence_extractor(Some(&mask)).values, vec![0.0, 1.0]);
        assert_eq!(
            text_presence_extractor(Some(&TextMask::empty(10, 10))).values,
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn generic_block_shape() {
        let img = RasterImage::from_fn(64, 32, |x, y| [(x * 4) as u8, (y * 8) as u8, 0]);
        let block = generic_thumbnail_extractor(&norm(&img));
        assert_eq!(block.dim(), GENERIC_DIM);
        assert!((block.norm() - 1.0).abs() < 1e-12);
    }
}
