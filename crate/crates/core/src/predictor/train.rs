use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lstm::LstmModel;
use super::{Dataset, Hyperparams};
use crate::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Adam with bias-corrected moment estimates over a flat parameter vector.
struct Adam {
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(lr: f64, n: usize) -> Self {
        Self {
            lr,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn update(&mut self, model: &mut LstmModel, grads: &LstmModel) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let g = grads.param_slices().into_iter().flatten();
        let p = model.param_slices_mut().into_iter().flatten();
        for (((p, g), m), v) in p.zip(g).zip(&mut self.m).zip(&mut self.v) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: LstmModel,
    /// RMSE over the training samples after each epoch.
    pub train_loss: Vec<f64>,
    /// RMSE over the held-out samples after each epoch; empty without a
    /// validation split.
    pub val_loss: Vec<f64>,
}

fn rmse_over(model: &LstmModel, inputs: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
    let mut sq = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        sq += (model.forward(x)? - t).powi(2);
    }
    Ok((sq / targets.len() as f64).sqrt())
}

/// Mini-batch training on the RMSE loss with Adam.
///
/// The last `val_split` fraction of samples (chronological) is held out.
/// Batches are drawn from a seeded shuffle each epoch, so a fixed seed
/// reproduces the run bit for bit.
pub fn train(dataset: &Dataset, hp: &Hyperparams) -> Result<TrainReport> {
    hp.validate()?;
    if dataset.is_empty() {
        return Err(Error::Validation("empty training set".into()));
    }
    if dataset.window_k() != hp.window_k {
        return Err(Error::Dimension {
            expected: hp.window_k,
            actual: dataset.window_k(),
        });
    }
    let n_val = ((dataset.len() as f64 * hp.val_split).floor() as usize).min(dataset.len() - 1);
    let n_train = dataset.len() - n_val;
    let (train_x, val_x) = dataset.inputs.split_at(n_train);
    let (train_y, val_y) = dataset.targets.split_at(n_train);

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut model = LstmModel::init(hp, dataset.norm, &mut rng);
    let mut grads = model.zeros_like();
    let mut adam = Adam::new(hp.learning_rate, model.num_params());
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut errors = Vec::with_capacity(hp.batch_size);
    let mut report = TrainReport {
        model: model.clone(),
        train_loss: Vec::with_capacity(hp.epochs),
        val_loss: Vec::with_capacity(hp.epochs),
    };

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hp.batch_size) {
            for s in grads.param_slices_mut() {
                s.fill(0.0);
            }
            errors.clear();
            for &i in batch {
                let trace = model
                    .forward_trace(&train_x[i])
                    .map_err(|_| Error::Diverged { epoch })?;
                let err = trace.output - train_y[i];
                model.backward(&trace, err, &mut grads);
                errors.push(err);
            }
            // d RMSE / d y_i = e_i / (n * RMSE); the backward pass used e_i.
            let batch_rmse = (errors.iter().map(|e| e * e).sum::<f64>() / batch.len() as f64).sqrt();
            if batch_rmse == 0.0 {
                continue;
            }
            let scale = 1.0 / (batch.len() as f64 * batch_rmse);
            for s in grads.param_slices_mut() {
                s.iter_mut().for_each(|g| *g *= scale);
            }
            adam.update(&mut model, &grads);
        }

        let diverged = |_| Error::Diverged { epoch };
        let loss = rmse_over(&model, train_x, train_y).map_err(diverged)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.train_loss.push(loss);
        if n_val > 0 {
            report.val_loss.push(rmse_over(&model, val_x, val_y).map_err(diverged)?);
        }
    }
    report.model = model;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::BandPlan;
    use crate::predictor::make_windows;

    fn small_hp(epochs: usize) -> Hyperparams {
        Hyperparams {
            learning_rate: 5e-3,
            epochs,
            hidden_size: 6,
            num_layers: 2,
            batch_size: 4,
            window_k: 3,
            seed: 42,
            val_split: 0.25,
        }
    }

    fn data() -> Dataset {
        let counts = (0..24).map(|i| [1, 2, 3, 2][i % 4]).collect();
        make_windows(&BandPlan::new(1, counts), 3, 4).unwrap()
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let hp = small_hp(0);
        let r = train(&data(), &hp).unwrap();
        assert!(r.train_loss.is_empty() && r.val_loss.is_empty());
        assert_eq!(r.model, LstmModel::seeded(&hp, data().norm));
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = train(&data(), &small_hp(5)).unwrap();
        let b = train(&data(), &small_hp(5)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.train_loss, b.train_loss);
        let c = train(
            &data(),
            &Hyperparams {
                seed: 43,
                ..small_hp(5)
            },
        )
        .unwrap();
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn loss_decreases() {
        let r = train(&data(), &small_hp(60)).unwrap();
        assert_eq!(r.train_loss.len(), 60);
        assert_eq!(r.val_loss.len(), 60);
        assert!(r.train_loss[59] < 0.5 * r.train_loss[0], "{:?}", r.train_loss);
    }

    #[test]
    fn huge_learning_rate_diverges_or_survives() {
        let hp = Hyperparams {
            learning_rate: 1e300,
            ..small_hp(3)
        };
        match train(&data(), &hp) {
            Ok(r) => assert!(r.train_loss.iter().all(|l| l.is_finite())),
            Err(e) => assert!(matches!(e, Error::Diverged { .. })),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = data();
        assert!(train(
            &d,
            &Hyperparams {
                window_k: 5,
                ..small_hp(1)
            }
        )
        .is_err());
        assert!(train(
            &d,
            &Hyperparams {
                batch_size: 0,
                ..small_hp(1)
            }
        )
        .is_err());
        let empty = Dataset {
            inputs: vec![],
            targets: vec![],
            norm: d.norm,
        };
        assert!(train(&empty, &small_hp(1)).is_err());
    }
}
