//! Reconstruction of the latent high-framerate video.
//!
//! The objective is a weighted sum of four l1 terms:
//!
//! ```text
//! L(H) = E_fpix |F - A(H)|            intensity data term
//!      + lambda_e  * E_epix |E - B(H)|  event data term
//!      + lambda_xy * E_hpix |dH/dx + dH/dy|
//!      + lambda_t  * E_hpix |dH/dt|
//! ```
//!
//! `A` is the intensity sensing operator of the problem's case and `B` is
//! the tanh event model. Derivatives use forward differences with a
//! replicate boundary (the last difference is zero). Each expectation is
//! the mean over its own term's elements.
//!
//! Minimization runs bias-corrected Adam on the exact subgradient
//! (`sign(0) = 0`), with a stepped learning-rate schedule and an elementwise
//! projection of the iterate onto [0, 1] after every step. Everything is
//! deterministic: the same problem, config and initialization produce
//! bit-identical traces.
//!
//! The analytic gradient is validated against central finite differences by
//! [`finite_difference_check`], which skips elements that sit within one
//! step of an l1 kink.

use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::event_model::{sign, EventFrameTensor, ThresholdParams};
use crate::metrics;
use crate::sensing::{forward_intensity, make_problem, HighResTensor, Observation, Problem, SensingCase};

/// All solver tunables.
///
/// Defaults follow the recommended recipe: initial learning rate 0.002
/// dropped 5x every 200 epochs, Adam momenta 0.9 / 0.99, 400 epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Slope of the tanh event activation.
    pub alpha: f64,
    /// Weight of the event data term.
    pub lambda_e: f64,
    /// Weight of the spatial TV term.
    pub lambda_xy: f64,
    /// Weight of the temporal TV term.
    pub lambda_t: f64,
    /// Initial learning rate.
    pub lr0: f64,
    /// Multiplicative decay applied every `lr_drop_every` epochs.
    pub lr_drop_factor: f64,
    pub lr_drop_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    /// Adam denominator stabilizer.
    pub adam_epsilon: f64,
    pub epochs: usize,
    /// Event-firing thresholds used when simulating streams.
    pub thresholds: ThresholdParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 10.0,
            lambda_e: 0.45,
            lambda_xy: 0.55,
            lambda_t: 0.3,
            lr0: 0.002,
            lr_drop_factor: 0.2,
            lr_drop_every: 200,
            beta1: 0.9,
            beta2: 0.99,
            adam_epsilon: 1e-8,
            epochs: 400,
            thresholds: ThresholdParams::default(),
        }
    }
}

/// A tunable whose value falls outside its recommended range.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigWarning {
    pub key: &'static str,
    pub value: f64,
    pub range: (f64, f64),
}

impl std::fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} = {} is outside the recommended range ({}, {})",
            self.key, self.value, self.range.0, self.range.1
        )
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("lr0", self.lr0),
            ("adam_epsilon", self.adam_epsilon),
            ("lr_drop_factor", self.lr_drop_factor),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{key} must be > 0, got {v}")));
            }
        }
        let weights = [
            ("lambda_e", self.lambda_e),
            ("lambda_xy", self.lambda_xy),
            ("lambda_t", self.lambda_t),
        ];
        for (key, v) in weights {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{key} must be >= 0, got {v}")));
            }
        }
        for (key, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Parameter(format!("{key} must be in (0, 1), got {v}")));
            }
        }
        if self.lr_drop_factor > 1.0 {
            return Err(Error::Parameter("lr_drop_factor must be <= 1".into()));
        }
        if self.lr_drop_every == 0 {
            return Err(Error::Parameter("lr_drop_every must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be >= 1".into()));
        }
        self.thresholds.validate()
    }

    /// Flags values outside the recommended tuning ranges. The ranges are
    /// recommendations, not hard bounds; out-of-range values still run.
    pub fn table_warnings(&self) -> Vec<ConfigWarning> {
        let checks = [
            ("alpha", self.alpha, (8.0, 20.0)),
            ("lambda_e", self.lambda_e, (0.1, 0.5)),
            ("lambda_xy", self.lambda_xy, (0.3, 0.8)),
            ("lambda_t", self.lambda_t, (0.2, 0.6)),
            ("eps_p", self.thresholds.eps_p, (0.0, 0.05)),
            ("eps_n", self.thresholds.eps_n, (0.0, 0.05)),
        ];
        checks
            .into_iter()
            .filter(|&(_, v, (lo, hi))| v < lo || v > hi)
            .map(|(key, value, range)| ConfigWarning { key, value, range })
            .collect()
    }

    /// Learning rate at a 1-based epoch under the stepped schedule.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let drops = (epoch.saturating_sub(1)) / self.lr_drop_every;
        self.lr0 * self.lr_drop_factor.powi(drops as i32)
    }
}

/// Loss values recorded at the start of one epoch (before that epoch's
/// update step). PSNR/SSIM are present only when ground truth is supplied;
/// SSIM is omitted for frames smaller than its window.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub pixel_loss: f64,
    /// Weighted spatial TV term.
    pub tv_xy: f64,
    /// Weighted temporal TV term.
    pub tv_t: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

/// Per-epoch optimization history; one record per completed epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<EpochRecord>,
}

impl SolveTrace {
    /// CSV with header `epoch,objective,pixel_loss,tv_xy,tv_t,psnr,ssim`;
    /// absent metrics become empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,objective,pixel_loss,tv_xy,tv_t,psnr,ssim\n");
        for r in &self.records {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epoch,
                r.objective,
                r.pixel_loss,
                r.tv_xy,
                r.tv_t,
                opt(r.psnr),
                opt(r.ssim)
            ));
        }
        out
    }
}

struct LossTerms {
    intensity: f64,
    event_raw: f64,
    tv_xy_raw: f64,
    tv_t_raw: f64,
}

impl LossTerms {
    fn pixel_loss(&self, cfg: &SolverConfig) -> f64 {
        self.intensity + cfg.lambda_e * self.event_raw
    }

    fn tv_loss(&self, cfg: &SolverConfig) -> f64 {
        cfg.lambda_xy * self.tv_xy_raw + cfg.lambda_t * self.tv_t_raw
    }

    fn objective(&self, cfg: &SolverConfig) -> f64 {
        self.pixel_loss(cfg) + self.tv_loss(cfg)
    }
}

fn check_tensor_matches(h: &HighResTensor, problem: &Problem) -> Result<()> {
    let (d, hh, ww) = h.dims();
    let (ph, pw) = problem.frame_shape();
    if d != problem.d() || hh != ph || ww != pw {
        return Err(Error::Dimension(format!(
            "tensor is {}x{}x{} but the problem expects {}x{}x{}",
            d,
            hh,
            ww,
            problem.d(),
            ph,
            pw
        )));
    }
    Ok(())
}

/// tanh of every latent transition, shape `(d - 1, h, w)`.
fn transition_tanh(h: &Array3<f64>, alpha: f64) -> Array3<f64> {
    let (d, hh, ww) = (h.shape()[0], h.shape()[1], h.shape()[2]);
    let mut u = Array3::<f64>::zeros((d - 1, hh, ww));
    for t in 0..d - 1 {
        for y in 0..hh {
            for x in 0..ww {
                u[(t, y, x)] = (alpha * (h[(t + 1, y, x)] - h[(t, y, x)])).tanh();
            }
        }
    }
    u
}

/// Group sums of the transition tanh frames: the event model prediction.
fn group_sums(u: &Array3<f64>, groups: &[usize]) -> Array3<f64> {
    let (hh, ww) = (u.shape()[1], u.shape()[2]);
    let mut b = Array3::<f64>::zeros((groups.len(), hh, ww));
    let mut t = 0;
    for (i, &g) in groups.iter().enumerate() {
        for _ in 0..g {
            let frame = u.index_axis(Axis(0), t);
            let mut acc = b.index_axis_mut(Axis(0), i);
            acc += &frame;
            t += 1;
        }
    }
    b
}

fn intensity_residuals(h: &Array3<f64>, obs: &Observation) -> Vec<(usize, Array2<f64>)> {
    let d = h.shape()[0];
    match obs {
        Observation::Interpolation { first, last } => vec![
            (0, first - &h.index_axis(Axis(0), 0)),
            (d - 1, last - &h.index_axis(Axis(0), d - 1)),
        ],
        Observation::Prediction { first } => {
            vec![(0, first - &h.index_axis(Axis(0), 0))]
        }
        Observation::Deblur { mean } => {
            let mut avg = Array2::<f64>::zeros(mean.raw_dim());
            for t in 0..d {
                avg += &h.index_axis(Axis(0), t);
            }
            avg /= d as f64;
            // The frame index is unused for deblur; the residual couples
            // every frame.
            vec![(0, mean - &avg)]
        }
    }
}

fn eval(
    h: &Array3<f64>,
    problem: &Problem,
    cfg: &SolverConfig,
    want_grad: bool,
) -> (LossTerms, Option<Array3<f64>>) {
    let (d, hh, ww) = (h.shape()[0], h.shape()[1], h.shape()[2]);
    let n_h = (d * hh * ww) as f64;
    let obs = problem.observation();
    let groups = problem.groups();
    let events = problem.events().data();
    let n_ev = events.len() as f64;
    let n_int = obs.pixel_count() as f64;

    let u = transition_tanh(h, cfg.alpha);
    let b = group_sums(&u, groups);
    let event_residual = events - &b;
    let residuals = intensity_residuals(h, obs);

    let intensity = residuals.iter().map(|(_, r)| r.iter().map(|v| v.abs()).sum::<f64>()).sum::<f64>()
        / n_int;
    let event_raw = event_residual.iter().map(|v| v.abs()).sum::<f64>() / n_ev;

    let mut tv_xy_sum = 0.0;
    let mut tv_t_sum = 0.0;
    for t in 0..d {
        for y in 0..hh {
            for x in 0..ww {
                let dx = if x + 1 < ww { h[(t, y, x + 1)] - h[(t, y, x)] } else { 0.0 };
                let dy = if y + 1 < hh { h[(t, y + 1, x)] - h[(t, y, x)] } else { 0.0 };
                tv_xy_sum += (dx + dy).abs();
                if t + 1 < d {
                    tv_t_sum += (h[(t + 1, y, x)] - h[(t, y, x)]).abs();
                }
            }
        }
    }
    let terms = LossTerms {
        intensity,
        event_raw,
        tv_xy_raw: tv_xy_sum / n_h,
        tv_t_raw: tv_t_sum / n_h,
    };

    if !want_grad {
        return (terms, None);
    }

    let mut g = Array3::<f64>::zeros((d, hh, ww));

    // Intensity term: sign of the residual routed through the adjoint of A.
    match obs {
        Observation::Deblur { .. } => {
            let (_, r) = &residuals[0];
            let scale = 1.0 / (n_int * d as f64);
            for y in 0..hh {
                for x in 0..ww {
                    let s = sign(r[(y, x)]) * scale;
                    for t in 0..d {
                        g[(t, y, x)] -= s;
                    }
                }
            }
        }
        _ => {
            for (frame_idx, r) in &residuals {
                for y in 0..hh {
                    for x in 0..ww {
                        g[(*frame_idx, y, x)] -= sign(r[(y, x)]) / n_int;
                    }
                }
            }
        }
    }

    // Event term: chain rule through tanh, alpha * (1 - u^2).
    if cfg.lambda_e != 0.0 {
        let scale = cfg.lambda_e / n_ev;
        let mut t = 0;
        for (i, &gsize) in groups.iter().enumerate() {
            for _ in 0..gsize {
                for y in 0..hh {
                    for x in 0..ww {
                        let s = sign(event_residual[(i, y, x)]);
                        if s != 0.0 {
                            let phi = cfg.alpha * (1.0 - u[(t, y, x)] * u[(t, y, x)]);
                            let c = scale * s * phi;
                            g[(t + 1, y, x)] -= c;
                            g[(t, y, x)] += c;
                        }
                    }
                }
                t += 1;
            }
        }
    }

    // TV terms: signed forward-difference adjoints.
    if cfg.lambda_xy != 0.0 {
        let scale = cfg.lambda_xy / n_h;
        for t in 0..d {
            for y in 0..hh {
                for x in 0..ww {
                    let dx = if x + 1 < ww { h[(t, y, x + 1)] - h[(t, y, x)] } else { 0.0 };
                    let dy = if y + 1 < hh { h[(t, y + 1, x)] - h[(t, y, x)] } else { 0.0 };
                    let s = sign(dx + dy) * scale;
                    if s != 0.0 {
                        if x + 1 < ww {
                            g[(t, y, x + 1)] += s;
                            g[(t, y, x)] -= s;
                        }
                        if y + 1 < hh {
                            g[(t, y + 1, x)] += s;
                            g[(t, y, x)] -= s;
                        }
                    }
                }
            }
        }
    }
    if cfg.lambda_t != 0.0 {
        let scale = cfg.lambda_t / n_h;
        for t in 0..d - 1 {
            for y in 0..hh {
                for x in 0..ww {
                    let s = sign(h[(t + 1, y, x)] - h[(t, y, x)]) * scale;
                    if s != 0.0 {
                        g[(t + 1, y, x)] += s;
                        g[(t, y, x)] -= s;
                    }
                }
            }
        }
    }

    (terms, Some(g))
}

fn objective_raw(h: &Array3<f64>, problem: &Problem, cfg: &SolverConfig) -> f64 {
    eval(h, problem, cfg, false).0.objective(cfg)
}

/// Mean absolute intensity residual plus `lambda_e` times the mean absolute
/// event residual.
pub fn pixel_loss(h: &HighResTensor, problem: &Problem, cfg: &SolverConfig) -> Result<f64> {
    check_tensor_matches(h, problem)?;
    Ok(eval(h.data(), problem, cfg, false).0.pixel_loss(cfg))
}

/// Weighted spatial plus temporal total variation of the tensor.
pub fn tv_loss(h: &HighResTensor, cfg: &SolverConfig) -> f64 {
    let data = h.data();
    let (d, hh, ww) = h.dims();
    let n_h = (d * hh * ww) as f64;
    let mut xy = 0.0;
    let mut tt = 0.0;
    for t in 0..d {
        for y in 0..hh {
            for x in 0..ww {
                let dx = if x + 1 < ww { data[(t, y, x + 1)] - data[(t, y, x)] } else { 0.0 };
                let dy = if y + 1 < hh { data[(t, y + 1, x)] - data[(t, y, x)] } else { 0.0 };
                xy += (dx + dy).abs();
                if t + 1 < d {
                    tt += (data[(t + 1, y, x)] - data[(t, y, x)]).abs();
                }
            }
        }
    }
    cfg.lambda_xy * xy / n_h + cfg.lambda_t * tt / n_h
}

/// The full objective: `pixel_loss + tv_loss`.
pub fn objective(h: &HighResTensor, problem: &Problem, cfg: &SolverConfig) -> Result<f64> {
    check_tensor_matches(h, problem)?;
    Ok(objective_raw(h.data(), problem, cfg))
}

/// Exact subgradient of the objective with respect to every element of `h`.
pub fn gradient(h: &HighResTensor, problem: &Problem, cfg: &SolverConfig) -> Result<Array3<f64>> {
    check_tensor_matches(h, problem)?;
    Ok(eval(h.data(), problem, cfg, true).1.expect("gradient requested"))
}

/// Starting tensor for the solver: a linear blend of the two endpoint
/// observations for interpolation, copies of the single observed frame
/// otherwise. Blend weights are exact at the endpoints.
pub fn initialize(problem: &Problem) -> HighResTensor {
    let d = problem.d();
    let (hh, ww) = problem.frame_shape();
    let mut data = Array3::<f64>::zeros((d, hh, ww));
    match problem.observation() {
        Observation::Interpolation { first, last } => {
            for k in 0..d {
                let w_last = k as f64 / (d - 1) as f64;
                let w_first = 1.0 - w_last;
                let mut frame = data.index_axis_mut(Axis(0), k);
                for y in 0..hh {
                    for x in 0..ww {
                        frame[(y, x)] = w_first * first[(y, x)] + w_last * last[(y, x)];
                    }
                }
            }
        }
        Observation::Prediction { first } => {
            for k in 0..d {
                data.index_axis_mut(Axis(0), k).assign(first);
            }
        }
        Observation::Deblur { mean } => {
            for k in 0..d {
                data.index_axis_mut(Axis(0), k).assign(mean);
            }
        }
    }
    HighResTensor::new(data, problem.frame_period_us()).expect("initialization is valid")
}

fn trace_metrics(h: &Array3<f64>, gt: Option<&HighResTensor>) -> (Option<f64>, Option<f64>) {
    let Some(gt) = gt else { return (None, None) };
    let d = h.shape()[0];
    // PSNR over the whole tensor (one MSE across all pixels); SSIM as the
    // mean over frames, omitted when the frames are below the window size.
    let mse = h
        .iter()
        .zip(gt.data().iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / h.len() as f64;
    let psnr = if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() };
    let mut ssim_sum = Some(0.0);
    for t in 0..d {
        ssim_sum = match (ssim_sum, metrics::ssim(h.index_axis(Axis(0), t), gt.frame(t))) {
            (Some(acc), Ok(v)) => Some(acc + v),
            _ => None,
        };
    }
    (Some(psnr), ssim_sum.map(|s| s / d as f64))
}

/// Runs Adam from the standard initialization. See [`solve_from`].
pub fn solve(
    problem: &Problem,
    cfg: &SolverConfig,
    ground_truth: Option<&HighResTensor>,
) -> Result<(HighResTensor, SolveTrace)> {
    solve_from(initialize(problem), problem, cfg, ground_truth)
}

/// Runs bias-corrected Adam for `cfg.epochs` full-gradient steps from a
/// caller-supplied starting tensor, projecting onto [0, 1] after every
/// step.
///
/// Each epoch's record holds the losses at the state entering that epoch,
/// so record 1 describes the initialization. Returns the final tensor and
/// the trace; fails with [`Error::Divergence`] if the objective ever turns
/// non-finite.
pub fn solve_from(
    initial: HighResTensor,
    problem: &Problem,
    cfg: &SolverConfig,
    ground_truth: Option<&HighResTensor>,
) -> Result<(HighResTensor, SolveTrace)> {
    cfg.validate()?;
    check_tensor_matches(&initial, problem)?;
    if let Some(gt) = ground_truth {
        if gt.dims() != initial.dims() {
            return Err(Error::Dimension(format!(
                "ground truth is {:?} but the problem expects {:?}",
                gt.dims(),
                initial.dims()
            )));
        }
    }

    let frame_period = initial.frame_period_us();
    let mut h = initial.data().clone();
    let dims = h.raw_dim();
    let mut m = Array3::<f64>::zeros(dims);
    let mut v = Array3::<f64>::zeros(dims);
    let mut trace = SolveTrace::default();

    for epoch in 1..=cfg.epochs {
        let (terms, grad) = eval(&h, problem, cfg, true);
        let objective = terms.objective(cfg);
        if !objective.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let (psnr, ssim) = trace_metrics(&h, ground_truth);
        trace.records.push(EpochRecord {
            epoch,
            objective,
            pixel_loss: terms.pixel_loss(cfg),
            tv_xy: cfg.lambda_xy * terms.tv_xy_raw,
            tv_t: cfg.lambda_t * terms.tv_t_raw,
            psnr,
            ssim,
        });

        let g = grad.expect("gradient requested");
        let lr = cfg.learning_rate(epoch);
        let bias1 = 1.0 - cfg.beta1.powi(epoch as i32);
        let bias2 = 1.0 - cfg.beta2.powi(epoch as i32);
        for ((hv, (mv, vv)), gv) in
            h.iter_mut().zip(m.iter_mut().zip(v.iter_mut())).zip(g.iter())
        {
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            let m_hat = *mv / bias1;
            let v_hat = *vv / bias2;
            *hv -= lr * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
            *hv = hv.clamp(0.0, 1.0);
        }
    }

    Ok((HighResTensor::new(h, frame_period)?, trace))
}

/// Result of comparing the analytic gradient against central finite
/// differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest scale-guarded relative error over checked elements.
    pub max_rel_error: f64,
    /// Elements compared.
    pub checked: usize,
    /// Elements skipped because an l1 kink sits within one step.
    pub skipped_near_kink: usize,
}

/// Marks every tensor element that can cross an l1 kink when perturbed by
/// `step`, so the finite-difference comparison skips it.
fn kink_mask(h: &Array3<f64>, problem: &Problem, cfg: &SolverConfig, step: f64) -> Array3<bool> {
    let (d, hh, ww) = (h.shape()[0], h.shape()[1], h.shape()[2]);
    let mut mask = Array3::from_elem((d, hh, ww), false);
    let safety = 4.0;

    let obs = problem.observation();
    let residuals = intensity_residuals(h, obs);
    match obs {
        Observation::Deblur { .. } => {
            let margin = safety * step / d as f64;
            let (_, r) = &residuals[0];
            for y in 0..hh {
                for x in 0..ww {
                    if r[(y, x)].abs() <= margin {
                        for t in 0..d {
                            mask[(t, y, x)] = true;
                        }
                    }
                }
            }
        }
        _ => {
            let margin = safety * step;
            for (frame_idx, r) in &residuals {
                for y in 0..hh {
                    for x in 0..ww {
                        if r[(y, x)].abs() <= margin {
                            mask[(*frame_idx, y, x)] = true;
                        }
                    }
                }
            }
        }
    }

    if cfg.lambda_e != 0.0 {
        let u = transition_tanh(h, cfg.alpha);
        let b = group_sums(&u, problem.groups());
        let res = problem.events().data() - &b;
        // An element feeds at most two transitions of a group, each with
        // slope bounded by alpha.
        let margin = safety * step * 2.0 * cfg.alpha;
        let mut t = 0;
        for (i, &gsize) in problem.groups().iter().enumerate() {
            for _ in 0..gsize {
                for y in 0..hh {
                    for x in 0..ww {
                        if res[(i, y, x)].abs() <= margin {
                            mask[(t, y, x)] = true;
                            mask[(t + 1, y, x)] = true;
                        }
                    }
                }
                t += 1;
            }
        }
    }

    if cfg.lambda_xy != 0.0 {
        let margin = safety * step * 2.0;
        for t in 0..d {
            for y in 0..hh {
                for x in 0..ww {
                    let dx = if x + 1 < ww { h[(t, y, x + 1)] - h[(t, y, x)] } else { 0.0 };
                    let dy = if y + 1 < hh { h[(t, y + 1, x)] - h[(t, y, x)] } else { 0.0 };
                    if x + 1 == ww && y + 1 == hh {
                        continue;
                    }
                    if (dx + dy).abs() <= margin {
                        mask[(t, y, x)] = true;
                        if x + 1 < ww {
                            mask[(t, y, x + 1)] = true;
                        }
                        if y + 1 < hh {
                            mask[(t, y + 1, x)] = true;
                        }
                    }
                }
            }
        }
    }

    if cfg.lambda_t != 0.0 {
        let margin = safety * step;
        for t in 0..d - 1 {
            for y in 0..hh {
                for x in 0..ww {
                    if (h[(t + 1, y, x)] - h[(t, y, x)]).abs() <= margin {
                        mask[(t, y, x)] = true;
                        mask[(t + 1, y, x)] = true;
                    }
                }
            }
        }
    }

    mask
}

fn fd_check_impl(
    h: &HighResTensor,
    problem: &Problem,
    cfg: &SolverConfig,
    step: f64,
    corruption: f64,
) -> Result<GradCheckReport> {
    check_tensor_matches(h, problem)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Parameter(format!("step must be > 0, got {step}")));
    }
    let mut analytic = eval(h.data(), problem, cfg, true).1.expect("gradient requested");
    if corruption != 0.0 {
        analytic[(0, 0, 0)] += corruption;
    }
    let mask = kink_mask(h.data(), problem, cfg, step);

    let mut data = h.data().clone();
    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let dims: Vec<usize> = data.shape().to_vec();
    for t in 0..dims[0] {
        for y in 0..dims[1] {
            for x in 0..dims[2] {
                if mask[(t, y, x)] {
                    skipped += 1;
                    continue;
                }
                let orig = data[(t, y, x)];
                data[(t, y, x)] = orig + step;
                let plus = objective_raw(&data, problem, cfg);
                data[(t, y, x)] = orig - step;
                let minus = objective_raw(&data, problem, cfg);
                data[(t, y, x)] = orig;
                let fd = (plus - minus) / (2.0 * step);
                let a = analytic[(t, y, x)];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                max_rel = max_rel.max(rel);
                checked += 1;
            }
        }
    }
    Ok(GradCheckReport { max_rel_error: max_rel, checked, skipped_near_kink: skipped })
}

/// Central finite-difference check of [`gradient`] at `h`.
///
/// Uses the scale-guarded relative error
/// `|a - fd| / max(|a|, |fd|, 1e-6)` and skips elements within one step of
/// an l1 kink.
pub fn finite_difference_check(
    h: &HighResTensor,
    problem: &Problem,
    cfg: &SolverConfig,
    step: f64,
) -> Result<GradCheckReport> {
    fd_check_impl(h, problem, cfg, step, 0.0)
}

/// Self-test hook: perturbs one analytic gradient entry before comparing,
/// so a healthy harness must report a large error.
pub fn finite_difference_check_corrupted(
    h: &HighResTensor,
    problem: &Problem,
    cfg: &SolverConfig,
    step: f64,
) -> Result<GradCheckReport> {
    fd_check_impl(h, problem, cfg, step, 1.0)
}

/// Deterministic random test instance: a random evaluation point, a
/// problem built from a random ground truth, and a config drawn from the
/// recommended tuning ranges. `(h, w, d)` give the tensor shape.
pub fn random_instance(
    seed: u64,
    (h, w, d): (usize, usize, usize),
    case: SensingCase,
) -> (HighResTensor, Problem, SolverConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SolverConfig {
        alpha: rng.gen_range(8.0..20.0),
        lambda_e: rng.gen_range(0.1..0.5),
        lambda_xy: rng.gen_range(0.3..0.8),
        lambda_t: rng.gen_range(0.2..0.6),
        ..SolverConfig::default()
    };
    let truth = Array3::from_shape_fn((d, h, w), |_| rng.gen_range(0.0..1.0));
    let truth = HighResTensor::new(truth, 1000).expect("valid random video");
    let observation = forward_intensity(&truth, case);
    let events = Array3::from_shape_fn((d - 1, h, w), |_| {
        let roll: f64 = rng.gen();
        if roll < 0.1 {
            1.0
        } else if roll < 0.2 {
            -1.0
        } else {
            0.0
        }
    });
    let events = EventFrameTensor::ternary(events).expect("ternary by construction");
    let problem = make_problem(observation, events, d).expect("consistent by construction");
    let point = Array3::from_shape_fn((d, h, w), |_| rng.gen_range(0.0..1.0));
    let point = HighResTensor::new(point, 1000).expect("valid random point");
    (point, problem, cfg)
}
