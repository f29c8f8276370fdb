//! Seeded samplers for the null and alternative families.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};
use crate::rng::{rng_from_seed, GofRng};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionFamily {
    /// `N(theta * 1_d / sqrt(d), I_d)`: the shift has Euclidean norm `theta`.
    GaussianMean,
    /// `N(0, theta^2 I_d)`.
    GaussianVar,
    /// Coordinates i.i.d. `U[0, theta]`.
    UniformScale,
    /// von Mises-Fisher on the unit sphere with mean direction
    /// `1_d / sqrt(d)` and concentration `theta`.
    Vmf,
    /// Coordinates i.i.d. with density `1 + m_c(x)` on `[0, 1]`.
    SobolevDensity,
}

impl DistributionFamily {
    pub const ALL: [DistributionFamily; 5] = [
        DistributionFamily::GaussianMean,
        DistributionFamily::GaussianVar,
        DistributionFamily::UniformScale,
        DistributionFamily::Vmf,
        DistributionFamily::SobolevDensity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DistributionFamily::GaussianMean => "gaussian_mean",
            DistributionFamily::GaussianVar => "gaussian_var",
            DistributionFamily::UniformScale => "uniform_scale",
            DistributionFamily::Vmf => "vmf",
            DistributionFamily::SobolevDensity => "sobolev_density",
        }
    }

    /// Parameter value under the null hypothesis.
    pub fn null_parameter(&self) -> f64 {
        match self {
            DistributionFamily::GaussianMean => 0.0,
            DistributionFamily::GaussianVar => 1.0,
            DistributionFamily::UniformScale => 1.0,
            DistributionFamily::Vmf => 0.0,
            DistributionFamily::SobolevDensity => 0.0,
        }
    }
}

impl std::fmt::Display for DistributionFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DistributionFamily {
    type Err = GofError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| GofError::Configuration(format!("unknown distribution family '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: DistributionFamily,
    pub dim: usize,
    pub theta: f64,
}

impl DistributionSpec {
    pub fn new(family: DistributionFamily, dim: usize, theta: f64) -> Result<Self> {
        let spec = Self { family, dim, theta };
        spec.validate()?;
        Ok(spec)
    }

    /// The null distribution of the same family and dimension.
    pub fn null(family: DistributionFamily, dim: usize) -> Result<Self> {
        Self::new(family, dim, family.null_parameter())
    }

    pub fn null_parameter(&self) -> f64 {
        self.family.null_parameter()
    }

    pub fn is_null(&self) -> bool {
        self.theta == self.null_parameter()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GofError::Parameter(msg));
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        if !self.theta.is_finite() {
            return bad(format!("parameter must be finite, got {}", self.theta));
        }
        match self.family {
            DistributionFamily::GaussianMean => Ok(()),
            DistributionFamily::GaussianVar | DistributionFamily::UniformScale => {
                if self.theta > 0.0 {
                    Ok(())
                } else {
                    bad(format!(
                        "{} needs theta > 0, got {}",
                        self.family, self.theta
                    ))
                }
            }
            DistributionFamily::Vmf => {
                if self.dim < 2 {
                    bad("vmf needs dimension at least 2".into())
                } else if self.theta < 0.0 {
                    bad(format!(
                        "vmf concentration must be >= 0, got {}",
                        self.theta
                    ))
                } else {
                    Ok(())
                }
            }
            DistributionFamily::SobolevDensity => check_c(self.theta),
        }
    }

    /// Draws `count` points from `rng`.
    pub fn sample(&self, count: usize, rng: &mut GofRng) -> Result<Sample> {
        self.validate()?;
        let d = self.dim;
        let mut data = Vec::with_capacity(count * d);
        match self.family {
            DistributionFamily::GaussianMean => {
                let shift = self.theta / (d as f64).sqrt();
                for _ in 0..count * d {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push(z + shift);
                }
            }
            DistributionFamily::GaussianVar => {
                for _ in 0..count * d {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push(self.theta * z);
                }
            }
            DistributionFamily::UniformScale => {
                for _ in 0..count * d {
                    data.push(self.theta * rng.random::<f64>());
                }
            }
            DistributionFamily::Vmf => {
                let sampler = VmfSampler::new(d, self.theta)?;
                for _ in 0..count {
                    data.extend(sampler.draw(rng));
                }
            }
            DistributionFamily::SobolevDensity => {
                for _ in 0..count * d {
                    data.push(inverse_cdf_sobolev(self.theta, rng.random::<f64>())?);
                }
            }
        }
        Sample::new(data, d)
    }

    pub fn sample_seeded(&self, count: usize, seed: u64) -> Result<Sample> {
        self.sample(count, &mut rng_from_seed(seed))
    }
}

fn check_c(c: f64) -> Result<()> {
    if c.abs() <= 1.0 {
        Ok(())
    } else {
        Err(GofError::Parameter(format!(
            "sobolev density needs |c| <= 1, got {c}"
        )))
    }
}

/// Perturbation `m_c(x) = 2cx` on `[0, 0.5)` and `2c(x - 1)` on `[0.5, 1]`.
pub fn sobolev_perturbation(c: f64, x: f64) -> f64 {
    if x < 0.5 {
        2.0 * c * x
    } else {
        2.0 * c * (x - 1.0)
    }
}

/// Product density `prod_j (1 + m_c(x_j))` on `[0, 1]^d`.
pub fn sobolev_density_pdf(c: f64, x: &[f64]) -> Result<f64> {
    check_c(c)?;
    x.iter()
        .map(|&v| {
            if (0.0..=1.0).contains(&v) {
                Ok(1.0 + sobolev_perturbation(c, v))
            } else {
                Err(GofError::Input(format!("point {v} lies outside [0, 1]")))
            }
        })
        .product()
}

/// One-dimensional CDF: `x + c x^2` on `[0, 0.5)` and `x + c (x - 1)^2`
/// on `[0.5, 1]`.
pub fn sobolev_cdf(c: f64, x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x < 0.5 {
        x + c * x * x
    } else {
        x + c * (x - 1.0) * (x - 1.0)
    }
}

/// Inverse of [`sobolev_cdf`] in closed form.
pub fn inverse_cdf_sobolev(c: f64, u: f64) -> Result<f64> {
    check_c(c)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(GofError::Parameter(format!(
            "u must lie in [0, 1], got {u}"
        )));
    }
    if c == 0.0 {
        return Ok(u);
    }
    // roots written as 2a / (1 + sqrt(disc)) so neither branch cancels
    if u < 0.5 + 0.25 * c {
        let disc = 1.0 + 4.0 * c * u;
        if disc < 0.0 {
            return Err(GofError::Internal(format!("no root for c = {c}, u = {u}")));
        }
        Ok(2.0 * u / (1.0 + disc.sqrt()))
    } else {
        let v = 1.0 - u;
        let disc = 1.0 - 4.0 * c * v;
        if disc < 0.0 {
            return Err(GofError::Internal(format!("no root for c = {c}, u = {u}")));
        }
        Ok(1.0 - 2.0 * v / (1.0 + disc.sqrt()))
    }
}

/// Wood's rejection sampler for the von Mises-Fisher distribution with mean
/// direction `1_d / sqrt(d)`.
#[derive(Debug, Clone)]
pub struct VmfSampler {
    dim: usize,
    kappa: f64,
    b: f64,
    x0: f64,
    c: f64,
    beta: Option<Beta<f64>>,
}

impl VmfSampler {
    pub fn new(dim: usize, kappa: f64) -> Result<Self> {
        if dim < 2 || !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(GofError::Parameter(format!(
                "vmf needs d >= 2 and kappa >= 0, got d = {dim}, kappa = {kappa}"
            )));
        }
        let dm1 = (dim - 1) as f64;
        let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
        let beta = if kappa > 0.0 {
            Some(
                Beta::new(dm1 / 2.0, dm1 / 2.0)
                    .map_err(|e| GofError::Internal(format!("beta: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            dim,
            kappa,
            b,
            x0,
            c,
            beta,
        })
    }

    pub fn mean_direction(&self) -> Vec<f64> {
        vec![1.0 / (self.dim as f64).sqrt(); self.dim]
    }

    pub fn draw(&self, rng: &mut GofRng) -> Vec<f64> {
        let d = self.dim;
        let mut g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let Some(beta) = &self.beta else {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            g.iter_mut().for_each(|v| *v /= norm);
            return g;
        };
        let dm1 = (d - 1) as f64;
        let w = loop {
            let z = beta.sample(rng);
            let w = (1.0 - (1.0 + self.b) * z) / (1.0 - (1.0 - self.b) * z);
            let u: f64 = rng.random();
            if self.kappa * w + dm1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                break w;
            }
        };
        let mu = self.mean_direction();
        let proj: f64 = g.iter().zip(&mu).map(|(a, b)| a * b).sum();
        g.iter_mut().zip(&mu).for_each(|(v, m)| *v -= proj * m);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s = (1.0 - w * w).max(0.0).sqrt();
        mu.iter()
            .zip(&g)
            .map(|(m, v)| w * m + s * v / norm)
            .collect()
    }
}
