//! Central finite differences of an independent double-precision forward
//! pass, for checking backward passes.

#![allow(dead_code)]

use tunalab::ndmath::{Matrix, RngState};
use tunalab::neural::{backward, forward, Activation, MlpParams, MlpSpec};

pub const H: f64 = 1e-3;
const REL_TOL: f64 = 1e-4;

/// Plain f64 forward pass; also reports every pre-activation so kink crossings
/// (leaky-relu) inside the difference stencil can be detected.
pub fn oracle_forward(spec: &MlpSpec, weights: &[Vec<f64>], biases: &[Vec<f64>], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut h: Vec<f64> = x.to_vec();
    if spec.input_norm {
        let ms = h.iter().map(|v| v * v).sum::<f64>() / h.len() as f64;
        let s = (ms + spec.norm_epsilon as f64).sqrt();
        h.iter_mut().for_each(|v| *v /= s);
    }
    let mut pres = Vec::new();
    for (l, act) in spec.activations.iter().enumerate() {
        let fan_in = spec.widths[l];
        let fan_out = spec.widths[l + 1];
        let mut next = vec![0.0; fan_out];
        for o in 0..fan_out {
            let z: f64 = biases[l][o] + (0..fan_in).map(|i| weights[l][o * fan_in + i] * h[i]).sum::<f64>();
            pres.push(z);
            next[o] = match act {
                Activation::LeakyRelu => {
                    if z >= 0.0 {
                        z
                    } else {
                        0.2 * z
                    }
                }
                Activation::Tanh => z.tanh(),
                Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                Activation::Identity => z,
            };
        }
        h = next;
    }
    (h, pres)
}

fn scalar_loss(out: &[f64], coef: &[f64]) -> f64 {
    out.iter().zip(coef).map(|(a, b)| a * b).sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-6 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Checks every parameter and input gradient of a randomly initialized
/// network; returns the number of entries compared or the first mismatch.
pub fn check(spec: &MlpSpec, seed: u64) -> Result<usize, String> {
    let mut rng = RngState::new(seed);
    let params = MlpParams::init(spec, &mut rng).unwrap();
    // nonzero biases so every code path is exercised
    let mut params = params;
    for l in &mut params.layers {
        l.bias.iter_mut().for_each(|b| *b = rng.normal() * 0.3);
    }
    let x = rng.normal_vec(spec.input_dim());
    let coef: Vec<f64> = rng.normal_vec(spec.output_dim()).into_iter().map(f64::from).collect();

    let acts = forward(spec, &params, &Matrix::from_vec(1, x.len(), x.clone()).unwrap()).unwrap();
    let go = Matrix::from_vec(1, coef.len(), coef.iter().map(|&c| c as f32).collect()).unwrap();
    let grads = backward(spec, &params, &acts, &go).unwrap();

    let weights: Vec<Vec<f64>> = params
        .layers
        .iter()
        .map(|l| l.weight.as_slice().iter().map(|&v| v as f64).collect())
        .collect();
    let biases: Vec<Vec<f64>> = params
        .layers
        .iter()
        .map(|l| l.bias.iter().map(|&v| v as f64).collect())
        .collect();
    let x64: Vec<f64> = x.iter().map(|&v| v as f64).collect();

    let mut compared = 0;
    let mut failure: Option<String> = None;
    let mut probe = |w: &[Vec<f64>],
                     b: &[Vec<f64>],
                     xp: &[f64],
                     wm: &[Vec<f64>],
                     bm: &[Vec<f64>],
                     xm: &[f64],
                     analytic: f32,
                     what: &str| {
        let (op, pp) = oracle_forward(spec, w, b, xp);
        let (om, pm) = oracle_forward(spec, wm, bm, xm);
        let crosses_kink = spec.activations.contains(&Activation::LeakyRelu)
            && pp.iter().zip(&pm).any(|(a, b)| (a >= &0.0) != (b >= &0.0));
        if crosses_kink {
            return;
        }
        let numeric = (scalar_loss(&op, &coef) - scalar_loss(&om, &coef)) / (2.0 * H);
        let e = rel_err(analytic as f64, numeric);
        if !(e <= REL_TOL || (analytic as f64 - numeric).abs() < 1e-6) && failure.is_none() {
            failure = Some(format!("{what}: analytic {analytic} numeric {numeric} rel {e}"));
        }
        compared += 1;
    };

    for l in 0..weights.len() {
        for k in 0..weights[l].len() {
            let mut wp = weights.clone();
            let mut wm = weights.clone();
            wp[l][k] += H;
            wm[l][k] -= H;
            let a = grads.params.layers[l].weight.as_slice()[k];
            probe(&wp, &biases, &x64, &wm, &biases, &x64, a, &format!("w[{l}][{k}]"));
        }
        for k in 0..biases[l].len() {
            let mut bp = biases.clone();
            let mut bm = biases.clone();
            bp[l][k] += H;
            bm[l][k] -= H;
            let a = grads.params.layers[l].bias[k];
            probe(&weights, &bp, &x64, &weights, &bm, &x64, a, &format!("b[{l}][{k}]"));
        }
    }
    for k in 0..x64.len() {
        let mut xp = x64.clone();
        let mut xm = x64.clone();
        xp[k] += H;
        xm[k] -= H;
        probe(
            &weights,
            &biases,
            &xp,
            &weights,
            &biases,
            &xm,
            grads.input.get(0, k),
            &format!("x[{k}]"),
        );
    }
    match failure {
        Some(f) => Err(f),
        None => Ok(compared),
    }
}
