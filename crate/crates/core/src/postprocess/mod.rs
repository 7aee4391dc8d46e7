//! Label-switching correction, accuracy metrics and posterior summaries.

mod assignment;
pub mod metrics;
pub mod relabel;
pub mod summary;

pub use assignment::min_cost_assignment;
pub use metrics::{
    kl_of_mean_density, kl_to_truth, similarity_misclassification, sum_extra_weights, DensityOracle, KlQuadrature,
    MixtureOracle,
};
pub use relabel::{permute_draw, relabel_stephens, RelabeledDraws};
pub use summary::{summarize, ComponentSummary, SummaryReport, Truth};
