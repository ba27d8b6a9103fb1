//! Rational approximation of the discovery-rate series.

mod linear;
pub mod poly;
mod qd;
mod rational;

use thiserror::Error;

pub use linear::{hankel_det, pade_linear_solve};
pub use poly::{poly_roots, ROOT_TOLERANCE};
pub use qd::{
    convergent, phi_coefficients, qd_continued_fraction, ContinuedFraction, PowerSeries,
    QD_ZERO_TOLERANCE,
};
pub use rational::{
    eval_partial_fractions, partial_fractions, remove_defects, Defect, RationalApproximant,
    DEFECT_THRESHOLD, REPEATED_ROOT_TOLERANCE,
};

pub type ComplexNumber = num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PadeError {
    #[error("need {needed} series terms but only {available} are available")]
    InsufficientTerms { needed: usize, available: usize },
    #[error("leading series coefficient is zero or not finite")]
    ZeroLeadingTerm,
    #[error("convergent order {0} is not a positive even number")]
    OddOrder(usize),
    #[error("linear system is singular")]
    Singular,
    #[error("polynomial is constant")]
    ConstantPolynomial,
    #[error("leading polynomial coefficient is zero or not finite")]
    ZeroLeadingCoefficient,
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("numerator degree {numer} is not below denominator degree {denom}")]
    DegreeMismatch { numer: usize, denom: usize },
    #[error("denominator vanishes at t = 1")]
    PoleAtOrigin,
    #[error("denominator loses its leading degree")]
    DegenerateDenominator,
    #[error("numerator is identically zero")]
    ZeroNumerator,
    #[error("defect removal cancelled every pole")]
    DefectDegenerate,
    #[error("poles closer than {distance:e} cannot be separated into simple fractions")]
    NearRepeatedRoots { distance: f64 },
}
