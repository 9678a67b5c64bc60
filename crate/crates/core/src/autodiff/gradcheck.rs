use super::{GradientMap, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Central-difference estimate `(f(p+h) - f(p-h)) / 2h` of the gradient of
/// `f` at `params`, one coordinate at a time.
pub fn finite_difference_gradient<F>(mut f: F, params: &ParamStore, step: f64) -> Result<GradientMap>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let mut probe = params.clone();
    let mut out = GradientMap::new();
    for (name, value) in params.iter() {
        let mut grad = Tensor::zeros(value.shape());
        for i in 0..value.numel() {
            let original = value.data()[i];
            set(&mut probe, name, i, original + step);
            let plus = f(&probe)?;
            set(&mut probe, name, i, original - step);
            let minus = f(&probe)?;
            set(&mut probe, name, i, original);
            grad.data_mut()[i] = (plus - minus) / (2.0 * step);
        }
        out.insert(name.clone(), grad);
    }
    Ok(out)
}

fn set(store: &mut ParamStore, name: &str, index: usize, value: f64) {
    if let Some(t) = store.get_mut(name) {
        t.data_mut()[index] = value;
    }
}

/// Largest per-tensor relative error `|a - b|_2 / max(|a|_2, |b|_2)` over the
/// entries of `expected`. Pairs whose norms are both below `floor` compare
/// their absolute difference against `floor` instead.
pub fn relative_error(actual: &GradientMap, expected: &GradientMap, floor: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (name, e) in expected.iter() {
        let a = actual.get(name).ok_or_else(|| Error::MissingGradient(name.clone()))?;
        if a.shape() != e.shape() {
            return Err(Error::ShapeMismatch {
                op: "relative_error",
                lhs: a.shape().to_vec(),
                rhs: e.shape().to_vec(),
            });
        }
        let diff = a
            .data()
            .iter()
            .zip(e.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let scale = a.l2_norm().max(e.l2_norm()).max(floor);
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}
