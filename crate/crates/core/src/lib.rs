//! Multigenerational status transmission: closed-form moments, pedigree
//! simulation, regression estimators and panel IO.
//!
//! The analytic layer ([`model`], [`moments`]) is generic over the float type;
//! the aliases below fix it to `f64` (or `f32`). Simulation, estimation and IO
//! work in `f64`.

pub mod econometrics;
pub mod error;
pub mod model;
pub mod moments;
pub mod panel;
pub mod pedigree;
pub mod scalar;

pub use econometrics::{build_spec, fit, fwl_partial, FitResult, RegressionSpec, SpecTemplate};
pub use error::{Error, Result};
pub use model::Variant;
pub use panel::{read_panel, write_panel, Panel, PanelSchema, ReadMode};
pub use pedigree::{Member, PedigreeCovariance, PedigreeRecord};
pub use scalar::Scalar;

pub type ModelParams = model::ModelParams<f64>;
pub type ParamConfig = model::ParamConfig<f64>;
pub type SteadyState = model::SteadyState<f64>;
pub type MomentSet = moments::MomentSet<f64>;

pub type ModelParamsF32 = model::ModelParams<f32>;
pub type MomentSetF32 = moments::MomentSet<f32>;
