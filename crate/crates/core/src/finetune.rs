//! Adaptation of sketched parameters with the mapping frozen.
//!
//! The task is teacher-student regression on a single linear map:
//! `L = ½‖Ŵ·X − Y‖²_F` with `Y = W′·X`. Only the sketched parameters move.

use crate::numerics::{matmul, matmul_nt, Matrix};
use crate::runtime::SketchedMatrix;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct TrainTask {
    teacher: Matrix,
    inputs: Matrix,
    targets: Matrix,
}

impl TrainTask {
    /// `targets = teacher · inputs`.
    pub fn new(teacher: Matrix, inputs: Matrix) -> Result<Self> {
        let targets = matmul(&teacher, &inputs)?;
        Ok(Self {
            teacher,
            inputs,
            targets,
        })
    }

    pub fn teacher(&self) -> &Matrix {
        &self.teacher
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    /// `½‖Ŵ·X − Y‖²_F` for the given sketch.
    pub fn loss(&self, sm: &SketchedMatrix) -> Result<f64> {
        Ok(0.5 * sm.forward(&self.inputs)?.sub(&self.targets)?.frobenius_norm_sq())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state; moment buffers have one slot per sketched parameter.
#[derive(Clone, Debug)]
pub struct OptimState {
    pub lr: f64,
    pub optimizer: Optimizer,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimState {
    pub fn new(lr: f64, optimizer: Optimizer, sm: &SketchedMatrix) -> Result<Self> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::invalid(format!(
                "learning rate must be finite and > 0, got {lr}"
            )));
        }
        let n = match optimizer {
            Optimizer::Sgd => 0,
            Optimizer::Adam { .. } => sm.trainable_params(),
        };
        Ok(Self {
            lr,
            optimizer,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        })
    }

    fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        match self.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                assert_eq!(self.m.len(), params.len(), "optimizer state sized for another sketch");
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= self.lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: SketchedMatrix,
    /// Loss before each step.
    pub losses: Vec<f64>,
    /// Loss after the last step.
    pub final_loss: f64,
}

/// Run `steps` optimizer steps on the sketched parameters of a copy of `sm`.
pub fn train(sm: &SketchedMatrix, task: &TrainTask, opt: &mut OptimState, steps: usize) -> Result<TrainOutcome> {
    if task.inputs.rows() != sm.cols() || task.targets.rows() != sm.rows() {
        return Err(Error::dims("train", sm.shape(), task.teacher.shape()));
    }
    let mut model = sm.clone();
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let resid = model.forward(&task.inputs)?.sub(&task.targets)?;
        let loss = 0.5 * resid.frobenius_norm_sq();
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        losses.push(loss);
        let upstream = matmul_nt(&resid, &task.inputs)?;
        let grad = model.grad_sketched(&upstream)?;
        opt.apply(model.sketched_mut(), &grad.grad);
        if model.sketched().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { step });
        }
    }
    let final_loss = task.loss(&model)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: steps });
    }
    assert_eq!(model.indices(), sm.indices(), "training must not touch the mapping");
    Ok(TrainOutcome {
        model,
        losses,
        final_loss,
    })
}

/// `reconstruct(after) − reconstruct(before)`.
pub fn delta_realized(before: &SketchedMatrix, after: &SketchedMatrix) -> Result<Matrix> {
    if before.shape() != after.shape() || before.gpr() != after.gpr() || before.bits() != after.bits() {
        return Err(Error::dims("delta_realized", before.shape(), after.shape()));
    }
    if before.indices() != after.indices() {
        return Err(Error::IndicesDiffer);
    }
    after.reconstruct().sub(&before.reconstruct())
}
