use super::linalg::{psd_sqrt, SquareF64};
use crate::error::{invalid, Result};

/// Mean and covariance of a feature cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: Vec<f64>,
    pub covariance: SquareF64,
}

impl GaussianFit {
    pub fn new(mean: Vec<f64>, covariance: SquareF64) -> Result<Self> {
        if covariance.dim != mean.len() {
            return Err(invalid("GaussianFit: covariance and mean dimensions differ"));
        }
        let n = mean.len();
        for i in 0..n {
            if covariance.at(i, i) < 0.0 {
                return Err(invalid("GaussianFit: negative variance"));
            }
            for j in 0..i {
                if (covariance.at(i, j) - covariance.at(j, i)).abs() > 1e-6 {
                    return Err(invalid("GaussianFit: covariance is not symmetric"));
                }
            }
        }
        Ok(Self { mean, covariance })
    }

    /// Sample mean and unbiased covariance of `rows`.
    pub fn fit(rows: &[Vec<f32>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(invalid("GaussianFit::fit needs at least two samples"));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(invalid("GaussianFit::fit: ragged samples"));
        }
        let mut mean = vec![0.0f64; d];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, &v)| *m += v as f64);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = SquareF64::zeros(d);
        for r in rows {
            for i in 0..d {
                let di = r[i] as f64 - mean[i];
                for j in 0..=i {
                    cov.data[i * d + j] += di * (r[j] as f64 - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..=i {
                let v = cov.data[i * d + j] / (n - 1) as f64;
                cov.data[i * d + j] = v;
                cov.data[j * d + i] = v;
            }
        }
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fréchet (2-Wasserstein) distance between two Gaussians:
/// `‖μa−μb‖² + tr(Σa + Σb − 2(Σa^½ Σb Σa^½)^½)`.
pub fn frechet_distance(a: &GaussianFit, b: &GaussianFit) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(invalid(format!(
            "frechet_distance: dimensions {} and {} differ",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y).powi(2)).sum();
    let tol = 1e-6 * (1.0 + a.covariance.trace().abs() + b.covariance.trace().abs());
    let sa = psd_sqrt(&a.covariance, tol)?;
    // PSD check on b as well; its root is otherwise unused
    psd_sqrt(&b.covariance, tol)?;
    let mut inner = sa.mul(&b.covariance).mul(&sa);
    symmetrize(&mut inner);
    let cross = psd_sqrt(&inner, tol)?;
    let d = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * cross.trace();
    Ok(d.max(0.0))
}

fn symmetrize(m: &mut SquareF64) {
    let n = m.dim;
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m.at(i, j) + m.at(j, i));
            *m.at_mut(i, j) = v;
            *m.at_mut(j, i) = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndmath::RngState;

    fn diag(vals: &[f64]) -> SquareF64 {
        let mut m = SquareF64::zeros(vals.len());
        for (i, v) in vals.iter().enumerate() {
            *m.at_mut(i, i) = *v;
        }
        m
    }

    fn random_fit(seed: u64, d: usize) -> GaussianFit {
        let mut rng = RngState::new(seed);
        let rows: Vec<Vec<f32>> = (0..50).map(|_| rng.normal_vec(d)).collect();
        GaussianFit::fit(&rows).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let a = random_fit(1, 6);
        assert!(frechet_distance(&a, &a).unwrap() < 1e-6);
    }

    #[test]
    fn scalar_closed_form() {
        let a = GaussianFit::new(vec![0.0], diag(&[1.0])).unwrap();
        let b = GaussianFit::new(vec![1.0], diag(&[4.0])).unwrap();
        assert!((frechet_distance(&a, &b).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_decomposes_per_coordinate() {
        let ma = [0.5, -1.0, 2.0];
        let va = [1.0, 0.25, 3.0];
        let mb = [0.0, 1.0, 2.5];
        let vb = [2.0, 0.5, 0.1];
        let a = GaussianFit::new(ma.to_vec(), diag(&va)).unwrap();
        let b = GaussianFit::new(mb.to_vec(), diag(&vb)).unwrap();
        let oracle: f64 = (0..3)
            .map(|i| (ma[i] - mb[i]).powi(2) + (va[i].sqrt() - vb[i].sqrt()).powi(2))
            .sum();
        assert!((frechet_distance(&a, &b).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn symmetric() {
        let a = random_fit(2, 8);
        let b = random_fit(3, 8);
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-6, "{ab} vs {ba}");
        assert!(ab > 0.0);
    }

    #[test]
    fn errors() {
        let a = random_fit(2, 3);
        let b = random_fit(3, 4);
        assert!(matches!(
            frechet_distance(&a, &b),
            Err(crate::Error::InvalidArgument(_))
        ));
        let bad = GaussianFit::new(vec![0.0, 0.0], {
            let mut m = diag(&[1.0, 1.0]);
            *m.at_mut(0, 1) = 3.0;
            *m.at_mut(1, 0) = 3.0;
            m
        })
        .unwrap();
        let ok = GaussianFit::new(vec![0.0, 0.0], diag(&[1.0, 1.0])).unwrap();
        assert!(matches!(
            frechet_distance(&bad, &ok),
            Err(crate::Error::NumericDomain(_))
        ));
        assert!(GaussianFit::new(vec![0.0], diag(&[-1.0])).is_err());
    }
}
