use serde::{Deserialize, Serialize};

use super::{check_positive, Kernel};
use crate::error::{Error, Result};

/// Squared-exponential kernel `s² exp(-r² / 2ℓ²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rbf {
    pub outputscale: f64,
    pub lengthscale: f64,
}

impl Rbf {
    pub fn new(outputscale: f64, lengthscale: f64) -> Result<Self> {
        check_positive("outputscale", outputscale)?;
        check_positive("lengthscale", lengthscale)?;
        Ok(Self {
            outputscale,
            lengthscale,
        })
    }

    pub(crate) fn from_json(value: &serde_json::Value) -> Result<Box<dyn Kernel>> {
        let p: Rbf = serde_json::from_value(value.clone())?;
        Ok(Box::new(Rbf::new(p.outputscale, p.lengthscale)?))
    }
}

impl Kernel for Rbf {
    fn name(&self) -> &'static str {
        "rbf"
    }

    fn eval(&self, r: f64) -> f64 {
        let z = r / self.lengthscale;
        self.outputscale * (-0.5 * z * z).exp()
    }

    fn unconstrained(&self) -> Vec<f64> {
        vec![self.outputscale.ln(), self.lengthscale.ln()]
    }

    fn set_unconstrained(&mut self, theta: &[f64]) -> Result<()> {
        let [s, l] = theta else {
            return Err(Error::InvalidParameter("rbf expects 2 parameters".into()));
        };
        *self = Rbf::new(s.exp(), l.exp())?;
        Ok(())
    }

    fn params_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct serializes")
    }

    fn clone_box(&self) -> Box<dyn Kernel> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kernel_eval;

    #[test]
    fn closed_form_values() {
        let k = Rbf::new(1.0, 1.0).unwrap();
        assert_eq!(kernel_eval(&k, 0.0).unwrap(), 1.0);
        assert!((kernel_eval(&k, 1.0).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!(kernel_eval(&k, f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(Rbf::new(0.0, 1.0).is_err());
        assert!(Rbf::new(1.0, f64::INFINITY).is_err());
        let mut k = Rbf::new(1.0, 1.0).unwrap();
        assert!(k.set_unconstrained(&[0.0]).is_err());
        assert!(k.set_unconstrained(&[f64::NAN, 0.0]).is_err());
    }
}
