//! Debiased nonparametric regression.
//!
//! A first-stage regressor `f̂` is fit on one half of the data. The other half
//! is used to estimate the conditional expected residual `E[Y - f̂(X) | X = x0]`
//! with a local polynomial smoother, and the two are summed:
//!
//! ```text
//! f̃(x0) = b̂(x0) + f̂(x0)
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`]: observation storage, CSV ingestion, seeded splitting.
//! * [`local_poly`]: basis, boxcar kernel, design matrix, closed-form weights,
//!   and a brute-force weighted least squares oracle.
//! * [`first_stage`]: pluggable first-stage regressors.
//! * [`debias`]: bandwidth rules and the three-stage estimator.
//! * [`inference`]: plug-in variance and normal confidence intervals.
//! * [`simulation`]: seeded Monte Carlo harness for rate, coverage,
//!   normality, sup-norm, covariate shift and double robustness studies.
//! * [`report`]: the JSON report format shared with the CLI.
//!
//! Replications in [`simulation`] run on rayon when the `parallel` feature is
//! enabled (the default) and fall back to a sequential loop otherwise. Results
//! are bit-identical either way.

pub mod dataset;
pub mod debias;
pub mod error;
pub mod first_stage;
pub mod inference;
pub mod local_poly;
pub mod par;
pub mod report;
pub mod rng;
pub mod simulation;
pub mod stats;

pub use dataset::{load_csv, split_even, Dataset, Rescale, Split};
pub use debias::{
    bandwidth, BandwidthRule, CrossFit, DebiasedEstimator, DebiasedFit, EstimatorConfig,
    PointEstimate, SmoothnessSpec,
};
pub use error::{Error, Result, SingularDesign};
pub use first_stage::{fit, FittedRegressor, OracleFn, RegressorSpec, Offset};
pub use inference::{confidence_interval, variance_estimate, InferenceResult};
pub use local_poly::{
    design_matrix, kernel_eval, lp_weights, poly_basis, residual_fit, wls_oracle, DesignMatrix,
    Kernel, LocalPolyConfig, LocalPolySmoother, WeightVector,
};
pub use report::{read_report, write_report, Report};
