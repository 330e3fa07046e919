//! Central finite-difference gradient checking at 64-bit precision.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use crate::error::{Error, Result};

/// Tensors above this many elements are checked on a sample of coordinates.
pub const FULL_CHECK_LIMIT: usize = 4096;
/// Coordinates sampled per oversized tensor.
pub const SAMPLED_COORDS: usize = 256;
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare analytic gradients against central differences.
///
/// `model_fn` must evaluate a deterministic scalar loss of the parameters and
/// accumulate its analytic gradient into the store's gradient slots (the
/// checker zeroes them before each call).
pub fn grad_check<F>(model_fn: F, params: &ParamStore<f64>, epsilon: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore<f64>) -> Result<f64>,
{
    grad_check_seeded(model_fn, params, epsilon, 0)
}

pub fn grad_check_seeded<F>(
    mut model_fn: F,
    params: &ParamStore<f64>,
    epsilon: f64,
    sample_seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore<f64>) -> Result<f64>,
{
    let mut store = params.clone();
    store.zero_grads();
    model_fn(&mut store)?;
    let analytic = store.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        coords_checked: 0,
    };

    for name in names {
        let n = params.get(&name)?.len();
        let coords: Vec<usize> = if n > FULL_CHECK_LIMIT {
            let mut c = sample(&mut rng, n, SAMPLED_COORDS).into_vec();
            c.sort_unstable();
            c
        } else {
            (0..n).collect()
        };
        for idx in coords {
            let a = analytic.grad(&name)?.data()[idx];
            let original = params.get(&name)?.data()[idx];

            store.get_mut(&name)?.data_mut()[idx] = original + epsilon;
            store.zero_grads();
            let plus = model_fn(&mut store)?;
            store.get_mut(&name)?.data_mut()[idx] = original - epsilon;
            store.zero_grads();
            let minus = model_fn(&mut store)?;
            store.get_mut(&name)?.data_mut()[idx] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            if !a.is_finite() || !numeric.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("gradient of `{name}`[{idx}] (analytic {a}, numeric {numeric})"),
                });
            }
            let err = relative_error(a, numeric);
            report.coords_checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err;
                report.worst = Some((name.clone(), idx));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffmath::Tensor;

    fn quadratic(store: &mut ParamStore<f64>) -> Result<f64> {
        let w = store.get("w")?.clone();
        let loss = w.data().iter().map(|v| v * v * v).sum();
        let g = Tensor::from_vec(w.shape(), w.data().iter().map(|v| 3.0 * v * v).collect())?;
        store.accumulate_grad("w", &g)?;
        Ok(loss)
    }

    #[test]
    fn exact_gradient_passes() {
        let mut ps = ParamStore::new();
        ps.insert("w", Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap())
            .unwrap();
        let r = grad_check(quadratic, &ps, DEFAULT_EPSILON).unwrap();
        assert!(r.max_relative_error < 1e-8, "{r:?}");
        assert_eq!(r.coords_checked, 3);
    }

    #[test]
    fn corrupted_gradient_detected_with_location() {
        let mut ps = ParamStore::new();
        ps.insert("w", Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap())
            .unwrap();
        let corrupt = |s: &mut ParamStore<f64>| {
            let loss = quadratic(s)?;
            s.grad_mut("w")?.data_mut()[1] += 0.1;
            Ok(loss)
        };
        let r = grad_check(corrupt, &ps, DEFAULT_EPSILON).unwrap();
        assert!(r.max_relative_error > 1e-2);
        assert_eq!(r.worst, Some(("w".to_string(), 1)));
    }

    #[test]
    fn non_finite_gradient_reported() {
        let mut ps = ParamStore::new();
        ps.insert("w", Tensor::from_vec(&[1], vec![1.0]).unwrap()).unwrap();
        let bad = |s: &mut ParamStore<f64>| {
            s.grad_mut("w")?.data_mut()[0] = f64::NAN;
            Ok(0.0)
        };
        let err = grad_check(bad, &ps, DEFAULT_EPSILON).unwrap_err();
        assert!(err.to_string().contains("`w`[0]"));
    }

    #[test]
    fn large_tensors_are_sampled() {
        let mut ps = ParamStore::new();
        ps.insert("w", Tensor::full(&[5000], 0.3)).unwrap();
        let r = grad_check(quadratic, &ps, DEFAULT_EPSILON).unwrap();
        assert_eq!(r.coords_checked, SAMPLED_COORDS);
    }
}
