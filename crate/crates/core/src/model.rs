//! Noise families, their exponential tilts, and planted-submatrix instances.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::stats::{DataMatrix, SubmatrixSupport};

/// Standardised base measure (mean 0, variance 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    /// N(0, 1); tilt N(theta, 1).
    Gaussian,
    /// Pois(1) - 1; tilt Pois(e^theta) - 1.
    #[serde(alias = "poisson")]
    CenteredPoisson,
    /// Uniform on {-1, +1}.
    Rademacher,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 3] = [
        NoiseFamily::Gaussian,
        NoiseFamily::CenteredPoisson,
        NoiseFamily::Rademacher,
    ];

    /// Supremum of tilts with a finite moment generating function.
    pub fn theta_star(self) -> f64 {
        f64::INFINITY
    }

    /// Log moment generating function of the base measure.
    pub fn log_mgf(self, theta: f64) -> Result<f64> {
        if !theta.is_finite() {
            return Err(Error::invalid(format!("theta must be finite, got {theta}")));
        }
        Ok(match self {
            NoiseFamily::Gaussian => 0.5 * theta * theta,
            NoiseFamily::CenteredPoisson => theta.exp_m1() - theta,
            NoiseFamily::Rademacher => {
                let a = theta.abs();
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            }
        })
    }

    /// Mean of the tilted law, i.e. the derivative of [`Self::log_mgf`].
    pub fn tilted_mean(self, theta: f64) -> f64 {
        match self {
            NoiseFamily::Gaussian => theta,
            NoiseFamily::CenteredPoisson => theta.exp_m1(),
            NoiseFamily::Rademacher => theta.tanh(),
        }
    }

    /// Variance of the tilted law (second derivative of the log mgf).
    pub fn tilted_variance(self, theta: f64) -> f64 {
        match self {
            NoiseFamily::Gaussian => 1.0,
            NoiseFamily::CenteredPoisson => theta.exp(),
            NoiseFamily::Rademacher => 1.0 - theta.tanh().powi(2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::CenteredPoisson => "centered_poisson",
            NoiseFamily::Rademacher => "rademacher",
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseFamily::Gaussian),
            "centered_poisson" | "poisson" => Ok(NoiseFamily::CenteredPoisson),
            "rademacher" => Ok(NoiseFamily::Rademacher),
            other => Err(Error::invalid(format!("unknown noise family {other:?}"))),
        }
    }
}

/// The tilt `f_theta` of a noise family, with `0 <= theta < theta_star`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedDistribution {
    family: NoiseFamily,
    theta: f64,
}

impl TiltedDistribution {
    pub fn new(family: NoiseFamily, theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta < 0.0 || theta >= family.theta_star() {
            return Err(Error::invalid(format!(
                "tilt must satisfy 0 <= theta < theta_star, got {theta}"
            )));
        }
        Ok(Self { family, theta })
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn sampler(&self) -> Sampler {
        match self.family {
            NoiseFamily::Gaussian => Sampler::Gaussian { shift: self.theta },
            NoiseFamily::CenteredPoisson => Sampler::Poisson(
                Poisson::new(self.theta.exp()).expect("exp(theta) is positive and finite"),
            ),
            NoiseFamily::Rademacher => Sampler::Sign {
                p_plus: 1.0 / (1.0 + (-2.0 * self.theta).exp()),
            },
        }
    }
}

enum Sampler {
    Gaussian { shift: f64 },
    Poisson(Poisson<f64>),
    Sign { p_plus: f64 },
}

impl Sampler {
    #[inline]
    fn draw(&self, rng: &mut StreamRng) -> f64 {
        match self {
            Sampler::Gaussian { shift } => shift + rng.sample::<f64, _>(StandardNormal),
            Sampler::Poisson(p) => p.sample(rng) - 1.0,
            Sampler::Sign { p_plus } => {
                if rng.random::<f64>() < *p_plus {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// `count` IID draws from `dist`, all from the stream rooted at `seed`.
pub fn sample_tilted(dist: &TiltedDistribution, count: usize, seed: u64) -> Vec<f64> {
    let sampler = dist.sampler();
    let mut rng = rng::stream(seed, &[]);
    (0..count).map(|_| sampler.draw(&mut rng)).collect()
}

/// A data matrix together with the block that was planted in it.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedInstance {
    pub data: DataMatrix,
    /// `None` under the null.
    pub support: Option<SubmatrixSupport>,
    pub theta: f64,
    pub family: NoiseFamily,
    pub seed: u64,
}

/// Draws an `rows x cols` matrix from the base measure, with the top-left
/// `m x n` block drawn from the tilt at `theta` instead.
///
/// Entry `(i, j)` uses its own stream `(seed, i, j)`, so the output does not
/// depend on generation order or thread count. `theta == 0` or an empty
/// block produce pure noise with no recorded support.
pub fn generate_instance(
    rows: usize,
    cols: usize,
    m: usize,
    n: usize,
    theta: f64,
    family: NoiseFamily,
    seed: u64,
) -> Result<PlantedInstance> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("matrix dimensions must be positive"));
    }
    if m > rows || n > cols {
        return Err(Error::Dimension { m, n, rows, cols });
    }
    let tilt = TiltedDistribution::new(family, theta)?;
    let planted = theta > 0.0 && m > 0 && n > 0;
    let noise = TiltedDistribution::new(family, 0.0)?.sampler();
    let signal = tilt.sampler();

    let mut values = vec![0.0; rows * cols];
    values
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                let mut r = rng::stream(seed, &[i as u64, j as u64]);
                let s = if planted && i < m && j < n { &signal } else { &noise };
                *v = s.draw(&mut r);
            }
        });

    Ok(PlantedInstance {
        data: DataMatrix::new(rows, cols, values)?,
        support: if planted {
            Some(SubmatrixSupport::leading(m, n)?)
        } else {
            None
        },
        theta,
        family,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    /// Trapezoidal integration of e^{theta x} against the standard normal density.
    fn gaussian_mgf_quadrature(theta: f64) -> f64 {
        let (lo, hi, steps) = (-12.0, 14.0, 200_000);
        let h = (hi - lo) / steps as f64;
        let f = |x: f64| (theta * x - 0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let inner: f64 = (1..steps).map(|k| f(lo + k as f64 * h)).sum();
        h * (inner + 0.5 * (f(lo) + f(hi)))
    }

    #[test]
    fn log_mgf_values() {
        for fam in NoiseFamily::ALL {
            assert_eq!(fam.log_mgf(0.0).unwrap(), 0.0);
        }
        assert_eq!(NoiseFamily::Gaussian.log_mgf(1.0).unwrap(), 0.5);
        let e = std::f64::consts::E;
        assert!((NoiseFamily::CenteredPoisson.log_mgf(1.0).unwrap() - (e - 2.0)).abs() < 1e-15);
        assert!((NoiseFamily::Rademacher.log_mgf(0.7).unwrap() - 0.7f64.cosh().ln()).abs() < 1e-15);
        assert!((NoiseFamily::Rademacher.log_mgf(-40.0).unwrap() - (40.0 - 2f64.ln())).abs() < 1e-12);
        assert!(NoiseFamily::Gaussian.log_mgf(f64::NAN).is_err());
        assert!(NoiseFamily::Gaussian.log_mgf(f64::INFINITY).is_err());
    }

    #[test]
    fn gaussian_log_mgf_matches_quadrature() {
        for theta in [-1.0, 0.5, 1.0, 2.0] {
            let q = gaussian_mgf_quadrature(theta).ln();
            let closed = NoiseFamily::Gaussian.log_mgf(theta).unwrap();
            assert!((q - closed).abs() < 1e-8, "theta {theta}: {q} vs {closed}");
        }
    }

    #[test]
    fn poisson_log_mgf_matches_monte_carlo() {
        let base = TiltedDistribution::new(NoiseFamily::CenteredPoisson, 0.0).unwrap();
        let draws = sample_tilted(&base, 1_000_000, 11);
        let terms: Vec<f64> = draws.iter().map(|x| x.exp()).collect();
        let (mean, var) = mean_var(&terms);
        let se = (var / terms.len() as f64).sqrt();
        let expected = (std::f64::consts::E - 2.0).exp();
        assert!((mean - expected).abs() < 4.0 * se, "{mean} vs {expected}");
    }

    #[test]
    fn log_mgf_is_convex_on_grid() {
        let h = 1e-3;
        for fam in NoiseFamily::ALL {
            for k in -200..=200 {
                let t = k as f64 * 0.01;
                let d2 = fam.log_mgf(t + h).unwrap() - 2.0 * fam.log_mgf(t).unwrap()
                    + fam.log_mgf(t - h).unwrap();
                assert!(d2 >= -1e-9, "{fam} at {t}: {d2}");
            }
        }
    }

    #[test]
    fn tilt_validation() {
        assert!(TiltedDistribution::new(NoiseFamily::Gaussian, -0.1).is_err());
        assert!(TiltedDistribution::new(NoiseFamily::Gaussian, f64::NAN).is_err());
        assert!(TiltedDistribution::new(NoiseFamily::Gaussian, f64::INFINITY).is_err());
        assert!(sample_tilted(&TiltedDistribution::new(NoiseFamily::Gaussian, 0.0).unwrap(), 0, 1).is_empty());
    }

    #[test]
    fn standard_gaussian_moments() {
        let d = TiltedDistribution::new(NoiseFamily::Gaussian, 0.0).unwrap();
        let (mean, var) = mean_var(&sample_tilted(&d, 1_000_000, 3));
        assert!(mean.abs() < 0.004);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn base_measures_are_standardised() {
        let n = 400_000;
        for fam in NoiseFamily::ALL {
            let d = TiltedDistribution::new(fam, 0.0).unwrap();
            let xs = sample_tilted(&d, n, 17);
            let (mean, var) = mean_var(&xs);
            // se of the mean is 1/sqrt(n); se of the variance needs the fourth moment.
            let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "{fam} mean {mean}");
            // Rademacher has a degenerate fourth-moment term, hence the 20/n slack.
            let var_se = ((m4 - var * var).max(0.0) / n as f64).sqrt();
            assert!((var - 1.0).abs() < 3.0 * var_se + 20.0 / n as f64, "{fam} var {var}");
        }
    }

    #[test]
    fn tilted_means_follow_log_mgf_derivative() {
        let n = 1_000_000;
        for fam in NoiseFamily::ALL {
            for (k, theta) in [0.0, 0.25, 0.5, 1.0].into_iter().enumerate() {
                let d = TiltedDistribution::new(fam, theta).unwrap();
                let xs = sample_tilted(&d, n, 100 + k as u64);
                let (mean, var) = mean_var(&xs);
                let se = (var / n as f64).sqrt().max(1e-12);
                let want = fam.tilted_mean(theta);
                assert!((mean - want).abs() < 4.0 * se, "{fam} theta {theta}: {mean} vs {want}");
                // and the closed-form mean is the derivative of log_mgf
                let h = 1e-6;
                let fd = (fam.log_mgf(theta + h).unwrap() - fam.log_mgf(theta - h).unwrap()) / (2.0 * h);
                assert!((fd - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn centered_poisson_half() {
        let d = TiltedDistribution::new(NoiseFamily::CenteredPoisson, 0.5).unwrap();
        let xs = sample_tilted(&d, 1_000_000, 8);
        let (mean, var) = mean_var(&xs);
        let se = (var / xs.len() as f64).sqrt();
        assert!((mean - 0.6487212707).abs() < 3.0 * se);
    }

    #[test]
    fn rademacher_symmetric_at_zero() {
        let d = TiltedDistribution::new(NoiseFamily::Rademacher, 0.0).unwrap();
        let xs = sample_tilted(&d, 200_000, 4);
        assert!(xs.iter().all(|&x| x == 1.0 || x == -1.0));
        let p = xs.iter().filter(|&&x| x > 0.0).count() as f64 / xs.len() as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / xs.len() as f64).sqrt());
    }

    #[test]
    fn instance_shape_and_support() {
        let inst = generate_instance(200, 100, 10, 15, 0.9, NoiseFamily::Gaussian, 1).unwrap();
        assert_eq!(inst.data.shape(), (200, 100));
        let s = inst.support.unwrap();
        assert_eq!(s.size(), (10, 15));
        assert_eq!(s.rows(), (0..10).collect::<Vec<_>>().as_slice());

        let null = generate_instance(20, 10, 3, 3, 0.0, NoiseFamily::Gaussian, 1).unwrap();
        assert!(null.support.is_none());
        let empty = generate_instance(20, 10, 0, 3, 1.0, NoiseFamily::Gaussian, 1).unwrap();
        assert!(empty.support.is_none());

        assert!(matches!(
            generate_instance(5, 5, 6, 1, 1.0, NoiseFamily::Gaussian, 0),
            Err(Error::Dimension { .. })
        ));
        assert!(generate_instance(5, 5, 1, 1, -1.0, NoiseFamily::Gaussian, 0).is_err());
    }

    #[test]
    fn instance_block_means() {
        let inst = generate_instance(200, 100, 40, 50, 1.0, NoiseFamily::Gaussian, 9).unwrap();
        let x = &inst.data;
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for i in 0..200 {
            for j in 0..100 {
                if i < 40 && j < 50 {
                    inside.push(x.get(i, j));
                } else {
                    outside.push(x.get(i, j));
                }
            }
        }
        let (mi, vi) = mean_var(&inside);
        let (mo, vo) = mean_var(&outside);
        assert!((mi - 1.0).abs() < 3.0 * (vi / inside.len() as f64).sqrt());
        assert!(mo.abs() < 3.0 * (vo / outside.len() as f64).sqrt());
    }

    #[test]
    fn instance_is_reproducible_and_entrywise_seeded() {
        let a = generate_instance(30, 20, 5, 5, 0.7, NoiseFamily::CenteredPoisson, 42).unwrap();
        let b = generate_instance(30, 20, 5, 5, 0.7, NoiseFamily::CenteredPoisson, 42).unwrap();
        assert_eq!(a.data.values(), b.data.values());
        // the noise entries do not depend on the matrix shape
        let c = generate_instance(31, 25, 5, 5, 0.7, NoiseFamily::CenteredPoisson, 42).unwrap();
        assert_eq!(a.data.get(17, 13), c.data.get(17, 13));
        let d = generate_instance(30, 20, 5, 5, 0.7, NoiseFamily::CenteredPoisson, 43).unwrap();
        assert_ne!(a.data.values(), d.data.values());
    }

    #[test]
    fn family_parsing() {
        assert_eq!("poisson".parse::<NoiseFamily>().unwrap(), NoiseFamily::CenteredPoisson);
        assert_eq!("Gaussian".parse::<NoiseFamily>().unwrap(), NoiseFamily::Gaussian);
        assert!("cauchy".parse::<NoiseFamily>().is_err());
        let json = serde_json::to_string(&NoiseFamily::CenteredPoisson).unwrap();
        assert_eq!(json, "\"centered_poisson\"");
    }
}
