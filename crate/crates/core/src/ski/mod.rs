//! Structured kernel interpolation and the LOVE caches built on it.

mod baseline;
mod interp;
mod love;
mod model;
mod serialize;

pub use baseline::{DenseSki, PriorTerm, DENSE_SKI_LIMIT};
pub use interp::{build_w, interp_weights};
pub use love::{
    build_mean_cache, build_sample_cache, love_precompute, InterpRow, LoveCache, LoveOptions,
    VarianceFactors, CLAMP_RELATIVE_LIMIT, CLAMP_SILENT, DEFAULT_K, SAMPLE_JITTER,
};
pub use model::{ski_mvm, BlockToeplitz, SkiKernel, SkiModel, SkiOperator, Standardization};
pub use serialize::CACHE_FORMAT_VERSION;
