//! Central finite-difference verification of analytic gradients.

use super::{Gradients, Mlp};

/// Objective value at some parameter setting, plus the sign pattern of every
/// ReLU pre-activation that influences it.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub value: f64,
    pub relu_pattern: Vec<bool>,
}

impl Probe {
    pub fn smooth(value: f64) -> Self {
        Probe {
            value,
            relu_pattern: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Finite-difference step h.
    pub step: f64,
    /// Upper bound on checked parameters; larger nets are sampled at an even stride.
    pub max_params: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            max_params: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose ±h perturbation flipped a ReLU; their difference
    /// quotient straddles a kink and says nothing about the derivative.
    pub skipped_kinks: usize,
}

pub fn flatten(grads: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for d in grads {
        out.extend(d.weights.iter().copied());
        out.extend(d.bias.iter().copied());
    }
    out
}

/// Compares `analytic` against central differences of `objective`.
///
/// The relative error per parameter is `|a - n| / max(|a|, |n|, 1e-8)`; the
/// report carries the maximum over all checked parameters.
pub fn gradient_check<F>(
    net: &Mlp,
    analytic: &Gradients,
    objective: F,
    opts: GradCheckOptions,
) -> GradCheckReport
where
    F: Fn(&Mlp) -> Probe,
{
    let flat = flatten(analytic);
    let n = net.param_count();
    assert_eq!(flat.len(), n, "gradient layout does not match network");
    let stride = n.div_ceil(opts.max_params.max(1)).max(1);
    let base = objective(net);
    let mut probe_net = net.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for idx in (0..n).step_by(stride) {
        let orig = net.param(idx);
        probe_net.set_param(idx, orig + opts.step);
        let plus = objective(&probe_net);
        probe_net.set_param(idx, orig - opts.step);
        let minus = objective(&probe_net);
        probe_net.set_param(idx, orig);
        if plus.relu_pattern != base.relu_pattern || minus.relu_pattern != base.relu_pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * opts.step);
        let a = flat[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    report
}
