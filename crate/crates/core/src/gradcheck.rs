//! Finite-difference verification of analytic gradients.
//!
//! The harness samples parameter coordinates, nudges each by a central
//! difference, and compares the numeric slope against the gradient from one
//! backward pass. Loss builders must be deterministic functions of the
//! parameter store (fixed inputs, fixed sampling seeds, dropout off).

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, LabeledInstance};
use crate::model::SqktModel;
use crate::nn::ParamStore;
use crate::tape::Gradients;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub passed: usize,
    pub worst_rel_err: f64,
    pub failures: Vec<(String, usize, usize, f64)>,
}

impl GradCheckReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.passed as f64 / self.checked as f64
        }
    }
}

/// Checks sampled coordinates of every parameter tensor. `loss` is called
/// with `want_grads` once for the analytic pass and twice per sampled
/// coordinate for the numeric slope.
pub fn check_fn_gradients<F>(
    store: &mut ParamStore,
    mut loss: F,
    samples_per_tensor: usize,
    rel_tol: f64,
    seed: u64,
) -> GradCheckReport
where
    F: FnMut(&mut ParamStore) -> (f64, Option<Gradients>),
{
    let (_, grads) = loss(store);
    let grads = grads.expect("analytic pass must return gradients");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        checked: 0,
        passed: 0,
        worst_rel_err: 0.0,
        failures: Vec::new(),
    };

    let names: Vec<String> = grads.by_param.keys().cloned().collect();
    for name in names {
        let analytic = &grads.by_param[&name];
        let (rows, cols) = analytic.dim();
        let total = rows * cols;
        let n_samples = samples_per_tensor.min(total);
        for _ in 0..n_samples {
            let i = rng.random_range(0..rows);
            let j = rng.random_range(0..cols);
            let theta = store.get(&name).expect("param exists")[(i, j)];
            let eps = 1e-5 * (1.0 + theta.abs());

            store.perturb(&name, i, j, eps);
            let (f_plus, _) = loss(store);
            store.perturb(&name, i, j, -2.0 * eps);
            let (f_minus, _) = loss(store);
            store.perturb(&name, i, j, eps);

            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let a = analytic[(i, j)];
            // Central differences on an O(1) loss carry ~1e-10 rounding
            // noise; when both slopes sit below that floor the coordinate
            // carries no signal either way.
            let denom = a.abs() + numeric.abs();
            let rel = if denom < 1e-7 {
                0.0
            } else {
                (a - numeric).abs() / denom
            };
            report.checked += 1;
            if rel <= rel_tol {
                report.passed += 1;
            } else {
                report.failures.push((name.clone(), i, j, rel));
            }
            if rel > report.worst_rel_err {
                report.worst_rel_err = rel;
            }
        }
    }
    report
}

/// Gradient check of the full composite objective through the model's own
/// training path (dropout off; sampling seeds fixed per call).
pub fn check_model_gradients(
    model: &mut SqktModel,
    corpus: &Corpus,
    batch: &[LabeledInstance],
    samples_per_tensor: usize,
    rel_tol: f64,
    seed: u64,
) -> GradCheckReport {
    // Materialize every parameter first so the analytic pass covers them.
    model
        .materialize_params(corpus, batch)
        .expect("forward pass succeeds");
    let mut store = model.store.clone();
    let cfg = model.cfg.clone();
    let variant = model.variant.clone();
    let backend = model.backend.clone();

    let mut loss = move |store: &mut ParamStore| -> (f64, Option<Gradients>) {
        let mut probe = SqktModel::new(cfg.clone(), variant.clone(), backend.clone(), 0)
            .expect("config already validated");
        probe.store = store.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let (bundle, grads) = probe
            .batch_losses(corpus, batch, 0.0, &mut rng, true)
            .expect("loss construction succeeds");
        (bundle.l_total, grads)
    };
    let report = check_fn_gradients(&mut store, &mut loss, samples_per_tensor, rel_tol, seed);
    model.store = store;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ForwardPass, Init};
    use ndarray::Array2;

    #[test]
    fn quadratic_gradient_passes() {
        let mut store = ParamStore::new(3);
        store.set("x", Array2::from_elem((2, 2), 1.5));
        let loss = |store: &mut ParamStore| {
            let mut fp = ForwardPass::eval(store);
            let x = fp.param("x", 2, 2, Init::Zeros);
            let sq = fp.tape.mul_elem(x, x);
            let l = fp.tape.sum_all(sq);
            let v = fp.tape.scalar(l);
            let g = fp.tape.backward(l);
            (v, Some(g))
        };
        let report = check_fn_gradients(&mut store, loss, 4, 1e-6, 1);
        assert_eq!(report.checked, 4);
        assert_eq!(report.passed, 4);
        assert!(report.worst_rel_err < 1e-6);
    }

    #[test]
    fn a_wrong_gradient_is_caught() {
        let mut store = ParamStore::new(3);
        store.set("x", Array2::from_elem((1, 2), 0.7));
        let loss = |store: &mut ParamStore| {
            let mut fp = ForwardPass::eval(store);
            let x = fp.param("x", 1, 2, Init::Zeros);
            let sq = fp.tape.mul_elem(x, x);
            let l = fp.tape.sum_all(sq);
            let v = fp.tape.scalar(l);
            let mut g = fp.tape.backward(l);
            // sabotage the gradient
            for (_, arr) in g.by_param.iter_mut() {
                *arr *= 0.5;
            }
            (v, Some(g))
        };
        let report = check_fn_gradients(&mut store, loss, 2, 1e-3, 1);
        assert_eq!(report.passed, 0);
    }
}
