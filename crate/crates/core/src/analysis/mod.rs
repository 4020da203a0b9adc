//! Envelope extraction, `T2*` fits, the three-term fit error and the noise
//! PSD grid search.

mod envelope;
mod fitting;
mod grid;
pub mod lsq;
mod metric;
mod spectrum;

pub use envelope::{default_smooth_window, extract_envelope, Envelope};
pub use fitting::{
    fit_canonical_t2, fit_envelope_t2, fit_envelope_t2_with_floor, FitResult, DEFAULT_NOISE_FLOOR, MAX_SPAN_RATIO,
};
pub use grid::{
    cell_seed, grid_noise_length, grid_search, log_space, BestCell, GridSearchConfig, GridSearchResult, InvalidCell,
    SeedAveraging, SeedMode, SurfaceCell, Uncertainty,
};
pub use metric::{fit_error, fit_error_terms, FitErrorTerms, MetricReference, MetricSummary};
pub use spectrum::{curve_ffts, magnitude_spectrum, uniform_spacing, CurveSpectra};
