//! SGD and Adam over named parameter slices.

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimKind {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimKind {
    pub fn adam(lr: f64, beta1: f64, beta2: f64) -> Self {
        OptimKind::Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
        }
    }
}

/// One parameter tensor with its gradient.
pub struct ParamSlot<'a> {
    pub name: &'a str,
    pub value: &'a mut [f64],
    pub grad: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct OptimState {
    kind: OptimKind,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimState {
    pub fn new(kind: OptimKind) -> Result<Self, NnError> {
        let lr = match kind {
            OptimKind::Sgd { lr } => lr,
            OptimKind::Adam { lr, beta1, beta2, eps } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                    return Err(NnError::InvalidOptimizer(format!("betas ({beta1}, {beta2}) outside [0, 1)")));
                }
                if !(eps > 0.0) {
                    return Err(NnError::InvalidOptimizer("eps must be positive".into()));
                }
                lr
            }
        };
        // lr = 0 is allowed so a run can be frozen; negative rates are not.
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(NnError::InvalidOptimizer(format!("learning rate {lr} must be non-negative")));
        }
        Ok(Self {
            kind,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn kind(&self) -> OptimKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn lr(&self) -> f64 {
        match self.kind {
            OptimKind::Sgd { lr } | OptimKind::Adam { lr, .. } => lr,
        }
    }

    pub fn set_lr(&mut self, new_lr: f64) {
        match &mut self.kind {
            OptimKind::Sgd { lr } | OptimKind::Adam { lr, .. } => *lr = new_lr,
        }
    }

    /// Applies one update to every slot. Slot order and sizes must not change
    /// between calls.
    pub fn step(&mut self, slots: &mut [ParamSlot<'_>]) -> Result<(), NnError> {
        for s in slots.iter() {
            if s.value.len() != s.grad.len() {
                return Err(NnError::ShapeMismatch(format!(
                    "{}: {} values, {} gradients",
                    s.name,
                    s.value.len(),
                    s.grad.len()
                )));
            }
            if s.grad.iter().any(|g| !g.is_finite()) {
                return Err(NnError::NonFiniteGradient { name: s.name.to_string() });
            }
        }
        if self.first.is_empty() {
            self.first = slots.iter().map(|s| vec![0.0; s.value.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != slots.len() || self.first.iter().zip(slots.iter()).any(|(m, s)| m.len() != s.value.len()) {
            return Err(NnError::ShapeMismatch("parameter layout changed between steps".into()));
        }
        self.step += 1;
        match self.kind {
            OptimKind::Sgd { lr } => {
                for s in slots.iter_mut() {
                    for (v, g) in s.value.iter_mut().zip(s.grad) {
                        *v -= lr * g;
                    }
                }
            }
            OptimKind::Adam { lr, beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for ((s, m), v2) in slots.iter_mut().zip(&mut self.first).zip(&mut self.second) {
                    for (((p, g), mi), vi) in s.value.iter_mut().zip(s.grad).zip(m.iter_mut()).zip(v2.iter_mut()) {
                        *mi = beta1 * *mi + (1.0 - beta1) * g;
                        *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *p -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Single-tensor convenience wrapper around [`OptimState::step`].
pub fn adam_step(opt: &mut OptimState, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
    opt.step(&mut [ParamSlot {
        name: "params",
        value: params,
        grad: grads,
    }])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut opt = OptimState::new(OptimKind::adam(0.1, 0.9, 0.99)).unwrap();
        let mut p = vec![1.0, -2.0];
        for _ in 0..5 {
            adam_step(&mut opt, &mut p, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_adam_step_by_hand() {
        let eps = 1e-8;
        let mut opt = OptimState::new(OptimKind::Adam {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.99,
            eps,
        })
        .unwrap();
        let mut p = vec![0.0];
        adam_step(&mut opt, &mut p, &[1.0]).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction.
        assert!((p[0] - (-0.1 / (1.0 + eps))).abs() < 1e-15);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn nan_gradient_names_tensor() {
        let mut opt = OptimState::new(OptimKind::adam(0.1, 0.9, 0.99)).unwrap();
        let mut p = vec![0.0];
        let err = opt
            .step(&mut [ParamSlot {
                name: "enc1.weight",
                value: &mut p,
                grad: &[f64::NAN],
            }])
            .unwrap_err();
        assert!(err.to_string().contains("enc1.weight"));
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(OptimState::new(OptimKind::adam(0.1, 1.0, 0.9)).is_err());
        assert!(OptimState::new(OptimKind::Sgd { lr: -1.0 }).is_err());
    }

    #[test]
    fn deterministic_runs() {
        let run = || {
            let mut opt = OptimState::new(OptimKind::adam(0.01, 0.9, 0.99)).unwrap();
            let mut p = vec![0.5, -0.25, 2.0];
            for i in 0..100 {
                let g: Vec<f64> = p.iter().map(|v| 2.0 * v + (i as f64).sin()).collect();
                adam_step(&mut opt, &mut p, &g).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
