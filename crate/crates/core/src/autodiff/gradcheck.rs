//! Central finite-difference checks of reverse-mode gradients.

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Worst disagreement found by [`check_gradients`].
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Largest `|analytic − numeric| / (|analytic| + 1e-8)`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// `(input, element)` where the largest relative error occurred.
    pub worst: (usize, usize),
}

/// Compares the gradient of the scalar built by `build` with fourth-order
/// central differences of step `h`, for every element of every input.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], h: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |vals: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|t| g.param(t)).collect();
        let out = build(&mut g, &vars)?;
        Ok(g.scalar(out))
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t)).collect();
    let out = build(&mut g, &vars)?;
    let grads = g.backward(out)?;
    let mut report = GradCheck { max_rel_err: 0.0, max_abs_err: 0.0, worst: (0, 0) };
    let mut probe = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(*v, inputs[i].numel());
        for k in 0..inputs[i].numel() {
            let x0 = inputs[i].data()[k];
            let mut at = |dx: f64| -> Result<f64> {
                probe[i].data_mut()[k] = x0 + dx;
                eval(&probe)
            };
            let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
            probe[i].data_mut()[k] = x0;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let abs = (analytic[k] - numeric).abs();
            let rel = abs / (analytic[k].abs() + 1e-8);
            report.max_abs_err = report.max_abs_err.max(abs);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = (i, k);
            }
        }
    }
    Ok(report)
}
