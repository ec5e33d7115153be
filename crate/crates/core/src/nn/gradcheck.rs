//! Central finite-difference checks of the reverse pass.

use crate::error::Result;
use crate::nn::{Graph, ParamStore, Var};

pub const DEFAULT_DELTA: f64 = 1e-6;

/// Denominator floor for the relative error; below it the comparison is
/// effectively absolute.
pub const DENOM_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(DENOM_FLOOR);
    (analytic - numeric).abs() / denom
}

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Parameter and element index of the worst entry.
    pub worst: Option<(String, usize)>,
    /// `(analytic, numeric)` at the worst entry.
    pub worst_values: (f64, f64),
    pub checked: usize,
}

/// Compares the analytic gradient of every trainable element in `store`
/// against `(f(w+δ) − f(w−δ)) / 2δ`.
///
/// `build` must be deterministic: it is re-run for every perturbation.
pub fn check_gradients<F>(store: &mut ParamStore, build: F, delta: f64) -> Result<GradCheck>
where
    F: Fn(&ParamStore) -> Result<(Graph, Var)>,
{
    store.zero_grad();
    let (g, loss) = build(store)?;
    g.backward(loss, store)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();
    store.zero_grad();

    let eval = |store: &ParamStore| -> Result<f64> {
        let (g, loss) = build(store)?;
        Ok(g.value(loss).data()[0])
    };

    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst: None,
        worst_values: (0.0, 0.0),
        checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        if !store.get(id).trainable {
            continue;
        }
        for i in 0..store.get(id).value.len() {
            let orig = store.get(id).value.data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + delta;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig - delta;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * delta);
            let err = relative_error(analytic[pi][i], numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                report.worst = Some((store.get(id).name.clone(), i));
                report.worst_values = (analytic[pi][i], numeric);
            }
        }
    }
    Ok(report)
}
