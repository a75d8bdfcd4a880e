use super::Tensor;

/// Central-difference gradient of a scalar function of several tensors.
///
/// This is the independent oracle used to check the tape's analytic
/// gradients: it only re-evaluates `f`, never the reverse pass. Cost is two
/// forward evaluations per parameter entry, so keep inputs small.
pub fn central_difference_gradient<F>(f: F, params: &[Tensor], h: f64) -> Vec<Tensor>
where
    F: Fn(&[Tensor]) -> f64,
{
    let mut out = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut grad = Tensor::zeros(params[pi].rows(), params[pi].cols());
        for idx in 0..params[pi].len() {
            let mut shifted = params.to_vec();
            shifted[pi].data_mut()[idx] += h;
            let plus = f(&shifted);
            shifted[pi].data_mut()[idx] -= 2.0 * h;
            let minus = f(&shifted);
            grad.data_mut()[idx] = (plus - minus) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

/// Largest entrywise `|analytic - numeric| / max(1, |analytic|)` over a set
/// of gradient tensors.
pub fn max_relative_error(analytic: &[Tensor], numeric: &[Tensor]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.data().iter().zip(n.data()))
        .map(|(a, n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}
