use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_positive, Kernel};
use crate::error::{Error, Result};

/// One Gaussian component of the spectral density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    /// Frequency in cycles per input unit.
    pub mean: f64,
    pub variance: f64,
}

impl MixtureComponent {
    pub fn new(weight: f64, mean: f64, variance: f64) -> Self {
        Self {
            weight,
            mean,
            variance,
        }
    }
}

/// Spectral mixture kernel
/// `k(r) = Σ_q w_q exp(-2π² r² v_q) cos(2π r μ_q)`.
///
/// Weights and variances are optimized in log-space; means are optimized
/// directly and enter through `|μ|`, since the density is symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMixture {
    components: Vec<MixtureComponent>,
}

#[derive(Serialize, Deserialize)]
struct SmParams {
    components: Vec<MixtureComponent>,
}

impl SpectralMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "spectral mixture needs at least one component".into(),
            ));
        }
        for c in &components {
            check_positive("mixture weight", c.weight)?;
            check_positive("mixture variance", c.variance)?;
            if !c.mean.is_finite() {
                return Err(Error::InvalidParameter("non-finite mixture mean".into()));
            }
        }
        let components = components
            .into_iter()
            .map(|c| MixtureComponent {
                mean: c.mean.abs(),
                ..c
            })
            .collect();
        Ok(Self { components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub(crate) fn from_json(value: &serde_json::Value) -> Result<Box<dyn Kernel>> {
        let p: SmParams = serde_json::from_value(value.clone())?;
        Ok(Box::new(SpectralMixture::new(p.components)?))
    }
}

impl Kernel for SpectralMixture {
    fn name(&self) -> &'static str {
        "spectral_mixture"
    }

    fn eval(&self, r: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                c.weight
                    * (-2.0 * PI * PI * r * r * c.variance).exp()
                    * (2.0 * PI * r * c.mean).cos()
            })
            .sum()
    }

    fn unconstrained(&self) -> Vec<f64> {
        self.components
            .iter()
            .flat_map(|c| [c.weight.ln(), c.mean, c.variance.ln()])
            .collect()
    }

    fn set_unconstrained(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != 3 * self.components.len() {
            return Err(Error::InvalidParameter(format!(
                "spectral mixture expects {} parameters",
                3 * self.components.len()
            )));
        }
        let comps = theta
            .chunks(3)
            .map(|t| MixtureComponent::new(t[0].exp(), t[1], t[2].exp()))
            .collect();
        *self = SpectralMixture::new(comps)?;
        Ok(())
    }

    fn params_json(&self) -> serde_json::Value {
        serde_json::to_value(SmParams {
            components: self.components.clone(),
        })
        .expect("plain struct serializes")
    }

    fn clone_box(&self) -> Box<dyn Kernel> {
        Box::new(self.clone())
    }
}
