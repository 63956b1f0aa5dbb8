//! Synthetic test scenes.
//!
//! The default scene is a bright square translating over a flat background,
//! plus two optional ingredients that exercise the reconstruction in ways a
//! bare square cannot:
//!
//! * a 1x2 strobe patch that toggles every frame, so conflict-driven
//!   binning opens exactly one frame per transition (the strobe pixel is
//!   always the first row-major repeat);
//! * a global illumination step over a frame range. Its transitions fire an
//!   event at every pixel at once, which leaves spatial TV without a
//!   gradient to act on and makes the temporal TV term do real work.

use ndarray::Array3;

use crate::sensing::HighResTensor;

/// A uniform brightness offset applied to a contiguous frame range.
#[derive(Debug, Clone, Copy)]
pub struct IlluminationStep {
    /// First affected frame (inclusive).
    pub first_frame: usize,
    /// Last affected frame (inclusive).
    pub last_frame: usize,
    /// Added intensity.
    pub amplitude: f64,
}

/// Parameters of a translating-square scene.
#[derive(Debug, Clone, Copy)]
pub struct MovingSquare {
    /// Side length in pixels.
    pub size: usize,
    /// Background intensity.
    pub background: f64,
    /// Square intensity.
    pub foreground: f64,
    /// Top-left corner at frame 0.
    pub x0: usize,
    pub y0: usize,
    /// Per-frame displacement in pixels.
    pub dx: isize,
    pub dy: isize,
    /// Top-left corner of a 1x2 patch toggling between background and
    /// foreground every frame.
    pub strobe: Option<(usize, usize)>,
    /// Global illumination step.
    pub flash: Option<IlluminationStep>,
}

impl Default for MovingSquare {
    fn default() -> Self {
        MovingSquare {
            size: 9,
            background: 0.25,
            foreground: 0.55,
            x0: 8,
            y0: 26,
            dx: 3,
            dy: 0,
            strobe: Some((0, 0)),
            flash: Some(IlluminationStep { first_frame: 4, last_frame: 4, amplitude: 0.18 }),
        }
    }
}

/// Renders the scene as a `d`-frame video. The square is clipped at the
/// image border; intensities are clamped to [0, 1] after the illumination
/// step.
pub fn moving_square_video(
    height: usize,
    width: usize,
    d: usize,
    params: MovingSquare,
    frame_period_us: u64,
) -> HighResTensor {
    let mut data = Array3::from_elem((d, height, width), params.background);
    for k in 0..d {
        let x = params.x0 as isize + k as isize * params.dx;
        let y = params.y0 as isize + k as isize * params.dy;
        for row in y.max(0)..(y + params.size as isize).min(height as isize) {
            for col in x.max(0)..(x + params.size as isize).min(width as isize) {
                data[(k, row as usize, col as usize)] = params.foreground;
            }
        }
        if let Some((sy, sx)) = params.strobe {
            let v = if k % 2 == 0 { params.foreground } else { params.background };
            data[(k, sy, sx)] = v;
            if sx + 1 < width {
                data[(k, sy, sx + 1)] = v;
            }
        }
        if let Some(flash) = params.flash {
            if (flash.first_frame..=flash.last_frame).contains(&k) {
                for row in 0..height {
                    for col in 0..width {
                        data[(k, row, col)] += flash.amplitude;
                    }
                }
            }
        }
    }
    HighResTensor::new(data, frame_period_us).expect("scene parameters are valid")
}
