//! Brownian reference layer: survival constants, Karlin-McGregor formulas,
//! the Dyson SDE, GUE sampling and the limit law `mu`.

pub mod constants;
pub mod gue;
pub mod km;
pub mod mu;
pub mod quadrature;
pub mod sde;

pub use constants::{
    closed_integral, constant_k, constant_kappa, gaussian_integral_vandermonde, mu_normalizer,
    IntegralMethod,
};
pub use gue::{gue_gap_cdf_k2, sample_gue, sample_gue_eigenvalues};
pub use km::{
    bm_survival_asymptotic, bm_survival_closed_k2, bm_survival_km, bm_transition_density_asymptotic,
    bm_transition_density_b, chapman_kolmogorov_k2, KmBudget,
};
pub use mu::{
    mu_acceptance_rate, mu_density, mu_gap_cdf_k2, mu_gap_density_k2, sample_mu, LimitDensityMu,
};
pub use sde::{dyson_endpoints, simulate_dyson, DysonBatch, DysonConfig, DysonPath, DysonStart};
