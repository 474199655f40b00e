//! The matrix Θ, the criterion `Θ ⪰ λa` and gauge optimization.

pub mod criterion;
pub mod gauge;
pub mod optimize;
pub mod structure;
pub mod theta;

pub use criterion::{inf_lambda_on_grid, nibec_lambda, pencil_min_eigenvalue, ThetaField};
pub use gauge::{rotation_gauge, theta_rotation_closed_form, ConstantPhase, GaugeFamily, GaugedModel, Phase, ProductPhase};
pub use optimize::{optimize_gauge_rate, GaugeOptimum, SweepOptions};
pub use structure::{gamma12_direct, gamma_from_sigma, gamma_matrix, lambda_delta_matrix, GammaPair};
pub use theta::{assemble_theta, assemble_theta_sigma_form, mixed_criterion_theta_alpha};
