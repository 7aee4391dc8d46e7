//! Bayesian finite mixtures of Gaussians under repulsive priors.

pub mod calibration;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod postprocess;
pub mod repulsion;
pub mod sampler;
pub mod synthdata;

pub use data::Dataset;
pub use error::{Error, Result};
pub use model::{BasePrior, Component, MixtureConfig, MixtureState, SliceState};
pub use repulsion::{Case, Combiner, RepulsionSpec};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/mixtures.md")]
    mod mixtures {}
    #[doc = include_str!("../../../book/src/repulsion.md")]
    mod repulsion {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/postprocessing.md")]
    mod postprocessing {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
