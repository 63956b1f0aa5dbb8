//! Reconstruction quality metrics: PSNR, SSIM and per-pixel error maps.
//!
//! All intensities are assumed to live in [0, 1], so the PSNR peak is fixed
//! at 1.0. SSIM uses the standard 11x11 Gaussian window (sigma 1.5) with
//! stabilizers C1 = 0.01^2 and C2 = 0.03^2 and averages the local map over
//! the valid (unpadded) region.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// SSIM window side length.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// PSNR, SSIM and the absolute-difference map for one frame pair.
#[derive(Debug, Clone)]
pub struct QualityReport {
    /// Decibels; `f64::INFINITY` for identical inputs.
    pub psnr: f64,
    pub ssim: f64,
    pub error_map: Array2<f64>,
}

fn check_shapes(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "frame shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio with peak 1.0: `10 * log10(1 / MSE)`.
/// Identical inputs return the infinity sentinel.
pub fn psnr(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    check_shapes(a, b)?;
    let n = a.len() as f64;
    let mse = a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Separable valid convolution with the Gaussian window; the output is
/// `(h - 10) x (w - 10)`.
fn gaussian_filter_valid(img: ArrayView2<f64>) -> Array2<f64> {
    let k = gaussian_kernel();
    let (h, w) = img.dim();
    let wo = w - SSIM_WINDOW + 1;
    let ho = h - SSIM_WINDOW + 1;
    let mut rows = Array2::<f64>::zeros((h, wo));
    for y in 0..h {
        for x in 0..wo {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * img[(y, x + i)];
            }
            rows[(y, x)] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((ho, wo));
    for y in 0..ho {
        for x in 0..wo {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * rows[(y + i, x)];
            }
            out[(y, x)] = acc;
        }
    }
    out
}

/// Mean local structural similarity over an 11x11 Gaussian window.
/// Both dimensions must be at least the window size.
pub fn ssim(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    check_shapes(a, b)?;
    let (h, w) = a.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "image {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let mu_a = gaussian_filter_valid(a);
    let mu_b = gaussian_filter_valid(b);
    let aa = gaussian_filter_valid((&a.to_owned() * &a).view());
    let bb = gaussian_filter_valid((&b.to_owned() * &b).view());
    let ab = gaussian_filter_valid((&a.to_owned() * &b).view());

    let mut sum = 0.0;
    for ((ma, mb), ((saa, sbb), sab)) in mu_a
        .iter()
        .zip(mu_b.iter())
        .zip(aa.iter().zip(bb.iter()).zip(ab.iter()))
    {
        let var_a = saa - ma * ma;
        let var_b = sbb - mb * mb;
        let cov = sab - ma * mb;
        let num = (2.0 * ma * mb + C1) * (2.0 * cov + C2);
        let den = (ma * ma + mb * mb + C1) * (var_a + var_b + C2);
        sum += num / den;
    }
    Ok(sum / mu_a.len() as f64)
}

/// Elementwise absolute difference `|a - b|`.
pub fn error_map(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_shapes(a, b)?;
    let mut out = Array2::<f64>::zeros(a.raw_dim());
    for ((o, &x), &y) in out.iter_mut().zip(a.iter()).zip(b.iter()) {
        *o = (x - y).abs();
    }
    Ok(out)
}

/// Computes all three metrics at once.
pub fn quality_report(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<QualityReport> {
    Ok(QualityReport { psnr: psnr(a, b)?, ssim: ssim(a, b)?, error_map: error_map(a, b)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_frames_hit_the_sentinel_and_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Array2::from_shape_fn((16, 16), |_| rng.gen_range(0.0..1.0));
        assert_eq!(psnr(a.view(), a.view()).unwrap(), f64::INFINITY);
        assert_eq!(ssim(a.view(), a.view()).unwrap(), 1.0);
        assert!(error_map(a.view(), a.view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_scale_difference_is_zero_db() {
        let a = Array2::<f64>::zeros((8, 8));
        let b = Array2::<f64>::ones((8, 8));
        assert_eq!(psnr(a.view(), b.view()).unwrap(), 0.0);
        assert!(error_map(a.view(), b.view()).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn constant_tenth_difference_is_twenty_db() {
        let a = Array2::<f64>::from_elem((12, 12), 0.4);
        let b = Array2::<f64>::from_elem((12, 12), 0.5);
        let v = psnr(a.view(), b.view()).unwrap();
        assert!((v - 20.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn psnr_and_ssim_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Array2::from_shape_fn((20, 15), |_| rng.gen_range(0.0..1.0));
        let b = Array2::from_shape_fn((20, 15), |_| rng.gen_range(0.0..1.0));
        assert_eq!(psnr(a.view(), b.view()).unwrap(), psnr(b.view(), a.view()).unwrap());
        assert_eq!(ssim(a.view(), b.view()).unwrap(), ssim(b.view(), a.view()).unwrap());
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Array2::from_shape_fn((16, 16), |_| rng.gen_range(0.3..0.7));
        let mut last = f64::INFINITY;
        for amp in [0.01, 0.05, 0.1] {
            let noisy = a.map(|&v| v + rng.gen_range(-amp..amp));
            let v = psnr(a.view(), noisy.view()).unwrap();
            assert!(v < last, "psnr did not decrease at amplitude {amp}");
            last = v;
        }
    }

    #[test]
    fn constant_frames_match_the_closed_form_ssim() {
        // mu_a = 0, mu_b = 1, zero variances:
        //   ssim = (C1 * C2) / ((1 + C1) * C2) = C1 / (1 + C1)
        let a = Array2::<f64>::zeros((11, 11));
        let b = Array2::<f64>::ones((11, 11));
        let expected = C1 / (1.0 + C1);
        let v = ssim(a.view(), b.view()).unwrap();
        assert!((v - expected).abs() < 1e-12, "got {v}, expected {expected}");
    }

    #[test]
    fn ssim_rejects_small_frames() {
        let a = Array2::<f64>::zeros((10, 12));
        assert!(matches!(ssim(a.view(), a.view()), Err(Error::Dimension(_))));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = Array2::<f64>::zeros((4, 4));
        let b = Array2::<f64>::zeros((4, 5));
        assert!(psnr(a.view(), b.view()).is_err());
        assert!(error_map(a.view(), b.view()).is_err());
    }

    #[test]
    fn quality_report_bundles_all_three_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Array2::from_shape_fn((16, 16), |_| rng.gen_range(0.0..1.0));
        let b = a.map(|&v| f64::min(v + 0.05, 1.0));
        let report = quality_report(a.view(), b.view()).unwrap();
        assert_eq!(report.psnr, psnr(a.view(), b.view()).unwrap());
        assert_eq!(report.ssim, ssim(a.view(), b.view()).unwrap());
        assert_eq!(report.error_map, error_map(a.view(), b.view()).unwrap());
    }

    #[test]
    fn error_map_localizes_a_single_differing_pixel() {
        let a = Array2::<f64>::from_elem((5, 5), 0.2);
        let mut b = a.clone();
        b[(2, 3)] = 0.9;
        let m = error_map(a.view(), b.view()).unwrap();
        for ((y, x), &v) in m.indexed_iter() {
            if (y, x) == (2, 3) {
                assert!((v - 0.7).abs() < 1e-15);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }
}
