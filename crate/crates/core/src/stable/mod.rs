//! The one-sided stable law: density and derivatives, the closed form at
//! `α = 1/2`, the Laplace transform check and exact sampling.

pub mod alpha;
pub mod closed_form;
pub mod integral;
pub mod laplace;
pub mod sampling;
pub mod inflection;
pub mod series;

pub use alpha::Alpha;
pub use inflection::log_density_inflection_probe;
pub use closed_form::{closed_form_half, closed_form_half_sample};
pub use laplace::{laplace_transform_detailed, laplace_transform_numeric};
pub use sampling::{sample_gamma, sample_stable};
pub use series::{density, density_derivative, DensityEval, Method, Precision, SeriesConfig, StableDensity, Summation};
