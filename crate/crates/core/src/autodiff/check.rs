use super::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

/// Outcome of [`finite_diff_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    /// `max |analytic − central| / max(|analytic|, |central|, 1e-8)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(parameter index, flat entry)` of the worst relative error.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub entries: usize,
}

/// Compares reverse-mode gradients of a scalar computation against central
/// differences, one parameter entry at a time.
///
/// `f` receives fresh vars for `params` on every call and must be
/// deterministic (reseed any randomness inside it).
pub fn finite_diff_check<T: Float>(
    mut f: impl FnMut(&Graph<T>, &[Var]) -> Result<Var>,
    params: &[Tensor<T>],
    eps: f64,
) -> Result<CheckReport> {
    let graph = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| graph.leaf(p.clone())).collect();
    let out = f(&graph, &vars)?;
    let base = graph.item(out);
    if !base.is_finite() {
        return Err(Error::NonFinite("finite_diff_check objective".into()));
    }
    let grads = graph.backward(out)?;
    let analytic: Vec<Tensor<T>> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    drop(graph);

    let mut eval = |inputs: &[Tensor<T>]| -> Result<f64> {
        let g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|p| g.constant(p.clone())).collect();
        let out = f(&g, &vars)?;
        let v = g.item(out).f64();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("finite_diff_check objective".into()))
        }
    };

    let mut report = CheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        entries: 0,
    };
    let mut work: Vec<Tensor<T>> = params.to_vec();
    for pi in 0..params.len() {
        for ei in 0..params[pi].numel() {
            let orig = params[pi].data()[ei];
            work[pi].data_mut()[ei] = T::lit(orig.f64() + eps);
            let plus = eval(&work)?;
            work[pi].data_mut()[ei] = T::lit(orig.f64() - eps);
            let minus = eval(&work)?;
            work[pi].data_mut()[ei] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi].data()[ei].f64();
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(1e-8);
            report.entries += 1;
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (pi, ei);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
