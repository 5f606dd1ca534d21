//! Tail-exponent regression and goodness-of-fit tests.

pub mod gof;
pub mod tail;

pub use gof::{
    chi2_homogeneity, effective_sample_size, gof_against_law, gof_against_mu, ks_test,
    GofOptions, GofReport, GofTest, ReferenceLaw,
};
pub use tail::{conjectured_exponent, fit_tail_exponent, replicate_slope_stderr, TailFit};
