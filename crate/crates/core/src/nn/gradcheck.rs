use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use crate::{Error, Result};

/// Fewest coordinates probed per tensor (all of them if the tensor is smaller).
pub const MIN_COORDS_PER_TENSOR: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// Compares the analytic gradients already stored in `params` against
/// central differences of `loss`.
///
/// For each tensor, `coords_per_tensor` coordinates (at least
/// [`MIN_COORDS_PER_TENSOR`], or every coordinate of smaller tensors) are
/// probed; the error for one coordinate is `|a − n| / max(1, |a|, |n|)`.
pub fn grad_check<F>(
    mut loss: F,
    params: &ParamStore,
    eps: f64,
    coords_per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> f64,
{
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {eps} outside [1e-6, 1e-3]"
        )));
    }
    let per_tensor = coords_per_tensor.max(MIN_COORDS_PER_TENSOR);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport::default();

    for id in params.ids() {
        let size = params.value(id).len();
        let coords: Vec<usize> = if size <= per_tensor {
            (0..size).collect()
        } else {
            let mut c = rand::seq::index::sample(&mut rng, size, per_tensor).into_vec();
            c.sort_unstable();
            c
        };
        let mut worst: f64 = 0.0;
        for &i in &coords {
            let original = params.value(id).as_slice()[i];
            probe.value_mut(id).as_mut_slice()[i] = original + eps;
            let plus = loss(&probe);
            probe.value_mut(id).as_mut_slice()[i] = original - eps;
            let minus = loss(&probe);
            probe.value_mut(id).as_mut_slice()[i] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss while probing `{}`[{i}]",
                    params.name(id)
                )));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = params.grad(id).as_slice()[i];
            let err = (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs());
            worst = worst.max(err);
        }
        report.tensors.push(TensorCheck {
            name: params.name(id).to_owned(),
            checked: coords.len(),
            max_rel_error: worst,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    #[test]
    fn quadratic_loss_matches() {
        let mut s = ParamStore::new(1);
        let a = s
            .insert("a", Matrix::from_vec(2, 3, vec![0.5, -1.0, 2.0, 0.1, 0.0, -3.0]), true)
            .unwrap();
        let big = s
            .insert("big", Matrix::from_vec(10, 10, (0..100).map(|i| i as f64 * 0.01).collect()), true)
            .unwrap();
        // ½‖θ‖² has gradient θ.
        for id in [a, big] {
            let v = s.value(id).clone();
            *s.grad_mut(id) = v;
        }
        let report = grad_check(|p| 0.5 * p.l2_norm_squared(), &s, 1e-5, 32, 0).unwrap();
        assert_eq!(report.tensors.len(), 2);
        assert_eq!(report.tensors[0].checked, 6);
        assert_eq!(report.tensors[1].checked, 32);
        assert!(report.max_rel_error() < 1e-7, "{report:?}");
    }

    #[test]
    fn empty_store_gives_empty_report() {
        let s = ParamStore::new(0);
        let report = grad_check(|_| 0.0, &s, 1e-5, 32, 0).unwrap();
        assert!(report.tensors.is_empty());
        assert_eq!(report.max_rel_error(), 0.0);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut s = ParamStore::new(0);
        s.insert("a", Matrix::from_vec(1, 2, vec![1.0, 2.0]), true).unwrap();
        let report = grad_check(|p| 0.5 * p.l2_norm_squared(), &s, 1e-5, 32, 0).unwrap();
        assert!(report.max_rel_error() > 0.4);
    }

    #[test]
    fn rejects_bad_step_and_non_finite_loss() {
        let mut s = ParamStore::new(0);
        s.insert("a", Matrix::zeros(1, 1), true).unwrap();
        assert!(matches!(
            grad_check(|_| 0.0, &s, 1e-2, 32, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            grad_check(|_| f64::NAN, &s, 1e-5, 32, 0),
            Err(Error::NonFinite(_))
        ));
    }
}
