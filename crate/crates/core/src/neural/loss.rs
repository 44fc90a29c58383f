use serde::{Deserialize, Serialize};

use super::{sigmoid, Activation};
use crate::error::{invalid, Result};
use crate::ndmath::Matrix;

/// Per-column loss used inside [`LossKind::Composite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnLoss {
    Mse,
    /// Targets in {0, 1}; requires a sigmoid output.
    BinaryCrossEntropy,
    /// Targets in {-1, +1}; margin 1.
    Hinge,
    /// Targets in {0, 1}; the output pre-activation is read as a logit,
    /// whatever the output activation.
    LogitCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossKind {
    Mse,
    BinaryCrossEntropy,
    Hinge,
    /// One loss per output column, averaged with equal weight.
    Composite(Vec<ColumnLoss>),
}

impl LossKind {
    fn column(&self, c: usize) -> ColumnLoss {
        match self {
            LossKind::Mse => ColumnLoss::Mse,
            LossKind::BinaryCrossEntropy => ColumnLoss::BinaryCrossEntropy,
            LossKind::Hinge => ColumnLoss::Hinge,
            LossKind::Composite(cols) => cols[c],
        }
    }
}

/// Mean loss over all `(sample, column)` entries and its gradient w.r.t. the
/// output pre-activations.
///
/// `weights`, when given, scales each sample's contribution (normalized by their sum).
pub fn loss_and_grad(
    kind: &LossKind,
    output_activation: Activation,
    pre: &Matrix,
    post: &Matrix,
    targets: &Matrix,
    weights: Option<&[f32]>,
) -> Result<(f32, Matrix)> {
    if pre.shape() != targets.shape() || post.shape() != targets.shape() {
        return Err(invalid(format!(
            "loss: output {:?} vs targets {:?}",
            post.shape(),
            targets.shape()
        )));
    }
    if let LossKind::Composite(cols) = kind {
        if cols.len() != targets.cols() {
            return Err(invalid("composite loss needs one entry per output column"));
        }
    }
    if let Some(w) = weights {
        if w.len() != targets.rows() {
            return Err(invalid("loss: one weight per sample required"));
        }
    }
    let (n, k) = targets.shape();
    let total_w: f64 = weights.map_or(n as f64, |w| w.iter().map(|&x| x as f64).sum());
    if total_w <= 0.0 {
        return Err(invalid("loss: weights must have positive sum"));
    }
    let norm = 1.0 / (total_w * k as f64);
    let mut grad = Matrix::zeros(n, k);
    let mut loss = 0.0f64;
    for r in 0..n {
        let w = weights.map_or(1.0, |w| w[r]) as f64;
        for c in 0..k {
            let z = pre.get(r, c);
            let o = post.get(r, c);
            let y = targets.get(r, c);
            let (l, g_pre) = match kind.column(c) {
                ColumnLoss::Mse => {
                    let d = o - y;
                    ((d * d) as f64, 2.0 * d * output_activation.derivative(z))
                }
                ColumnLoss::BinaryCrossEntropy => {
                    if output_activation != Activation::Sigmoid {
                        return Err(invalid("binary cross-entropy requires a sigmoid output"));
                    }
                    logit_cross_entropy(z, y)
                }
                ColumnLoss::LogitCrossEntropy => logit_cross_entropy(z, y),
                ColumnLoss::Hinge => {
                    let m = 1.0 - y * o;
                    if m > 0.0 {
                        (m as f64, -y * output_activation.derivative(z))
                    } else {
                        (0.0, 0.0)
                    }
                }
            };
            loss += w * l;
            grad.set(r, c, (w * g_pre as f64 * norm) as f32);
        }
    }
    Ok(((loss * norm) as f32, grad))
}

/// `-[y·log σ(z) + (1-y)·log(1-σ(z))] = softplus(z) - y·z` and its z-derivative.
fn logit_cross_entropy(z: f32, y: f32) -> (f64, f32) {
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    ((softplus - y * z) as f64, sigmoid(z) - y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f32>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn mse_value_and_gradient() {
        let pre = m(&[vec![1.0, 2.0]]);
        let t = m(&[vec![0.0, 4.0]]);
        let (l, g) = loss_and_grad(&LossKind::Mse, Activation::Identity, &pre, &pre, &t, None).unwrap();
        assert!((l - 2.5).abs() < 1e-6);
        assert_eq!(g.row(0), &[1.0, -2.0]);
    }

    #[test]
    fn bce_matches_definition() {
        let z = 0.3f32;
        let pre = m(&[vec![z]]);
        let post = m(&[vec![sigmoid(z)]]);
        let t = m(&[vec![1.0]]);
        let (l, g) = loss_and_grad(
            &LossKind::BinaryCrossEntropy,
            Activation::Sigmoid,
            &pre,
            &post,
            &t,
            None,
        )
        .unwrap();
        assert!((l + sigmoid(z).ln()).abs() < 1e-6);
        assert!((g.get(0, 0) - (sigmoid(z) - 1.0)).abs() < 1e-6);
        assert!(loss_and_grad(
            &LossKind::BinaryCrossEntropy,
            Activation::Identity,
            &pre,
            &post,
            &t,
            None
        )
        .is_err());
    }

    #[test]
    fn logit_cross_entropy_ignores_output_activation() {
        let pre = m(&[vec![0.3, -2.0]]);
        let t = m(&[vec![1.0, 0.5]]);
        let kind = LossKind::Composite(vec![ColumnLoss::LogitCrossEntropy, ColumnLoss::Mse]);
        let (l, g) = loss_and_grad(&kind, Activation::Identity, &pre, &pre, &t, None).unwrap();
        let expect = 0.5 * (-(sigmoid(0.3).ln()) + 6.25);
        assert!((l - expect).abs() < 1e-5, "{l} {expect}");
        assert!((g.get(0, 0) - 0.5 * (sigmoid(0.3) - 1.0)).abs() < 1e-6);
        assert!((g.get(0, 1) + 2.5).abs() < 1e-6);
    }

    #[test]
    fn hinge_is_zero_past_margin() {
        let pre = m(&[vec![2.0], vec![0.5]]);
        let t = m(&[vec![1.0], vec![1.0]]);
        let (l, g) = loss_and_grad(&LossKind::Hinge, Activation::Identity, &pre, &pre, &t, None).unwrap();
        assert!((l - 0.25).abs() < 1e-6);
        assert_eq!(g.get(0, 0), 0.0);
        assert!((g.get(1, 0) + 0.5).abs() < 1e-6);
    }

    #[test]
    fn weights_rescale_samples() {
        let pre = m(&[vec![1.0], vec![0.0]]);
        let t = m(&[vec![0.0], vec![0.0]]);
        let (l, _) = loss_and_grad(&LossKind::Mse, Activation::Identity, &pre, &pre, &t, Some(&[3.0, 1.0])).unwrap();
        assert!((l - 0.75).abs() < 1e-6);
    }
}
