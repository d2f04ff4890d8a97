//! Central finite-difference verification of [`Sequential::backward`].

use rand::SeedableRng;

use crate::error::{NnError, Result};
use crate::layers::Mode;
use crate::loss::{mse, mse_grad};
use crate::sequential::Sequential;
use crate::tensor::Tensor;
use crate::NnRng;

/// Networks above this size take too long to difference element by element.
pub const MAX_CHECKED_PARAMS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Denominator floor for the relative error, so that gradients which are
    /// zero up to round-off do not report huge relative errors.
    pub abs_floor: f64,
    pub mode: Mode,
    /// Seed for the dropout masks; every evaluation reuses the same masks.
    pub seed: u64,
    pub check_input: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-4,
            tolerance: 1e-4,
            abs_floor: 1e-6,
            mode: Mode::Train,
            seed: 0,
            check_input: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorCheck {
    /// Parameter index, or `None` for the network input.
    pub param: Option<usize>,
    pub checked: usize,
    /// Entries whose perturbation switched a ReLU or max-pool branch.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error <= self.tolerance
    }

    pub fn failures(&self) -> Vec<&TensorCheck> {
        self.tensors.iter().filter(|t| t.max_rel_error > self.tolerance).collect()
    }
}

fn rel_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Compares analytic gradients of `mse(net(input), target)` against central
/// differences for every parameter entry (and optionally every input entry).
///
/// Entries whose `±step` perturbation changes a ReLU mask or max-pool
/// selection sit on a kink of the loss and are excluded from the maximum.
pub fn grad_check(
    net: &Sequential<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if net.param_count() > MAX_CHECKED_PARAMS {
        return Err(NnError::Config(format!(
            "{} parameters exceed the gradient-check limit of {MAX_CHECKED_PARAMS}",
            net.param_count()
        )));
    }
    let run = |n: &Sequential<f64>, x: &Tensor<f64>| -> Result<(f64, Vec<u64>)> {
        let mut rng = NnRng::seed_from_u64(cfg.seed);
        let (out, tape) = n.forward(x, cfg.mode, Some(&mut rng))?;
        Ok((mse(&out, target)?, tape.branch_signature()))
    };

    let mut rng = NnRng::seed_from_u64(cfg.seed);
    let (out, tape) = net.forward(input, cfg.mode, Some(&mut rng))?;
    let base_sig = tape.branch_signature();
    let (grads, input_grad) = net.backward(&tape, &mse_grad(&out, target)?)?;

    let mut tensors = Vec::new();
    let mut work = net.clone();
    for (pi, grad) in grads.iter().enumerate() {
        let mut tc = TensorCheck { param: Some(pi), checked: 0, skipped: 0, max_rel_error: 0.0, max_abs_error: 0.0 };
        for i in 0..grad.len() {
            let orig = work.params()[pi].data()[i];
            work.params_mut()[pi].data_mut()[i] = orig + cfg.step;
            let (lp, sp) = run(&work, input)?;
            work.params_mut()[pi].data_mut()[i] = orig - cfg.step;
            let (lm, sm) = run(&work, input)?;
            work.params_mut()[pi].data_mut()[i] = orig;
            record(&mut tc, grad.data()[i], lp, lm, sp == base_sig && sm == base_sig, cfg);
        }
        tensors.push(tc);
    }

    if cfg.check_input {
        let mut tc = TensorCheck { param: None, checked: 0, skipped: 0, max_rel_error: 0.0, max_abs_error: 0.0 };
        let mut x = input.clone();
        for i in 0..x.len() {
            let orig = x.data()[i];
            x.data_mut()[i] = orig + cfg.step;
            let (lp, sp) = run(net, &x)?;
            x.data_mut()[i] = orig - cfg.step;
            let (lm, sm) = run(net, &x)?;
            x.data_mut()[i] = orig;
            record(&mut tc, input_grad.data()[i], lp, lm, sp == base_sig && sm == base_sig, cfg);
        }
        tensors.push(tc);
    }

    Ok(GradCheckReport {
        max_rel_error: tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max),
        checked: tensors.iter().map(|t| t.checked).sum(),
        skipped: tensors.iter().map(|t| t.skipped).sum(),
        tolerance: cfg.tolerance,
        tensors,
    })
}

fn record(tc: &mut TensorCheck, analytic: f64, lp: f64, lm: f64, smooth: bool, cfg: &GradCheckConfig) {
    if !smooth {
        tc.skipped += 1;
        return;
    }
    let numeric = (lp - lm) / (2.0 * cfg.step);
    tc.checked += 1;
    tc.max_abs_error = tc.max_abs_error.max((analytic - numeric).abs());
    tc.max_rel_error = tc.max_rel_error.max(rel_error(analytic, numeric, cfg.abs_floor));
}
