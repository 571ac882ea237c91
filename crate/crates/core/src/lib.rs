//! Edge-of-stability analysis for gradient descent and sharpness-aware
//! minimization (SAM).
//!
//! * [`objectives`]: quadratic models and small MLPs with exact gradients and
//!   Hessian-vector products.
//! * [`optim`]: GD/SAM steppers and the closed-form stability edges.
//! * [`quadlab`]: exact one-step analysis on quadratics and randomized
//!   verification of the sign laws.
//! * [`spectral`]: Lanczos estimates of the top Hessian eigenpairs and
//!   gradient alignment metrics.
//! * [`harness`]: datasets, instrumented training runs, grids and CSV logs.
//!
//! The numerical core is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what the harness uses.

pub mod dual;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod objectives;
pub mod optim;
pub mod params;
pub mod quadlab;
pub mod scalar;
pub mod spectral;

pub use dual::Dual;
pub use error::{Error, Result};
pub use objectives::Objective;
pub use params::Params;
pub use scalar::Scalar;

pub type ParamVector = Params<f64>;
pub type QuadraticModel = objectives::Quadratic<f64>;
pub type MlpModel = objectives::Mlp<f64>;
pub type Dataset = objectives::Dataset<f64>;
pub type GradientInfo = objectives::GradientInfo<f64>;
pub type OptimConfig = optim::OptimConfig<f64>;
pub type EdgeReport = optim::EdgeReport<f64>;
pub type EigenDecomposition = quadlab::EigenDecomposition<f64>;
pub type SpectralEstimate = spectral::Spectrum<f64>;
pub type AlignmentRecord = spectral::AlignmentRecord<f64>;

pub type ParamVectorF32 = Params<f32>;
pub type QuadraticModelF32 = objectives::Quadratic<f32>;
pub type MlpModelF32 = objectives::Mlp<f32>;
