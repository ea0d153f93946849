use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Kernel, Rbf, SpectralMixture};
use crate::error::{Error, Result};

/// Serialized kernel: a registry name plus its parameter object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

pub type KernelFactory = fn(&serde_json::Value) -> Result<Box<dyn Kernel>>;

/// Kernel constructors keyed by name.
#[derive(Clone)]
pub struct KernelRegistry {
    factories: BTreeMap<String, KernelFactory>,
}

impl KernelRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("rbf", Rbf::from_json);
        reg.register("spectral_mixture", SpectralMixture::from_json);
        reg
    }

    pub fn register(&mut self, name: &str, factory: KernelFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, spec: &KernelSpec) -> Result<Box<dyn Kernel>> {
        let factory = self
            .factories
            .get(&spec.kind)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "kernel",
                name: spec.kind.clone(),
                available: self.names().join(", "),
            })?;
        factory(&spec.params)
    }
}

impl Default for KernelRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
