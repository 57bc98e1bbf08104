//! Central finite-difference gradient checking.

use super::{Binding, Graph, KernelError, NodeId, ParamStore, Tensor};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Outcome of comparing taped gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `(parameter name, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

/// `|a − n| / max(1, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1.0)
}

/// Evaluates `f` without differentiating it.
pub fn evaluate<F>(params: &ParamStore, f: &F) -> Result<f64, KernelError>
where
    F: Fn(&mut Graph, &Binding) -> Result<NodeId, KernelError>,
{
    let mut g = Graph::new();
    let binding = g.bind(params)?;
    let out = f(&mut g, &binding)?;
    let value = g.value(out);
    if value.len() != 1 {
        return Err(KernelError::NonScalarLoss(value.shape().to_vec()));
    }
    Ok(value.data()[0])
}

/// Analytic gradient of `f` in store order.
pub fn analytic_gradient<F>(params: &ParamStore, f: &F) -> Result<Vec<Tensor>, KernelError>
where
    F: Fn(&mut Graph, &Binding) -> Result<NodeId, KernelError>,
{
    let mut g = Graph::new();
    let binding = g.bind(params)?;
    let out = f(&mut g, &binding)?;
    Ok(g.backward(out)?.for_store(params))
}

/// Central-difference gradient of `f` over every trainable coordinate. Frozen entries get zeros.
pub fn numeric_gradient<F>(params: &ParamStore, eps: f64, f: &F) -> Result<Vec<Tensor>, KernelError>
where
    F: Fn(&mut Graph, &Binding) -> Result<NodeId, KernelError>,
{
    let mut work = params.clone();
    let mut out = Vec::with_capacity(params.len());
    for (pi, p) in params.iter().enumerate() {
        let mut grad = Tensor::zeros(p.value.shape());
        if p.trainable {
            let id = super::ParamId(pi);
            for k in 0..p.value.len() {
                let orig = p.value.data()[k];
                work.values_mut(id)[k] = orig + eps;
                let plus = evaluate(&work, f)?;
                work.values_mut(id)[k] = orig - eps;
                let minus = evaluate(&work, f)?;
                work.values_mut(id)[k] = orig;
                grad.data_mut()[k] = (plus - minus) / (2.0 * eps);
            }
        }
        out.push(grad);
    }
    Ok(out)
}

/// Maximum relative error between taped and central-difference gradients of `f`.
pub fn finite_diff_check<F>(params: &ParamStore, eps: f64, f: F) -> Result<GradCheck, KernelError>
where
    F: Fn(&mut Graph, &Binding) -> Result<NodeId, KernelError>,
{
    let analytic = analytic_gradient(params, &f)?;
    let numeric = numeric_gradient(params, eps, &f)?;
    let mut check = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for ((p, a), n) in params.iter().zip(&analytic).zip(&numeric) {
        if !p.trainable {
            continue;
        }
        for (k, (&av, &nv)) in a.data().iter().zip(n.data()).enumerate() {
            check.coordinates += 1;
            let err = relative_error(av, nv);
            if err > check.max_rel_error || check.worst.is_none() {
                check.max_rel_error = check.max_rel_error.max(err);
                check.worst = Some((p.name.clone(), k));
            }
        }
    }
    Ok(check)
}
