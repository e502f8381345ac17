//! Exact tilts of sums of integer dice, the one-term lattice Edgeworth
//! approximation with fully explicit error bounds, and certified proofs of
//! the index after which the tilt keeps its asymptotic sign.
//!
//! Exact layers (dice, moments, convolution) use big rationals. The analytic
//! layers are generic over [`Real`]; `f64` aliases are provided below.

pub mod bounds;
pub mod cf;
pub mod die;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod moments;
pub mod proof;
pub mod scalar;

pub use bounds::{
    bound_terms, class_constants, error_bound_cdf, error_bound_cdf_with, error_bound_tilt, error_bound_tilt_with,
    global_constants, n1, n2, n2_with_cap, s_max, BoundTerms, ClassConstants, GlobalConstants, TailMode, TailSource,
};
pub use cf::{
    build_envelope, cf_eval, peak_profile, prob_below_mean_quadrature, profile_of, r_optimal, tail_integral_bound,
    CfProfile, EnvelopePiece, NormalizedCf, Peak, TailEnvelope,
};
pub use die::{parse_die, CanonicalDie, Die};
pub use error::{Error, Result};
pub use exact::{prob_below_mean, sum_pmf, sum_pmf_with, tilt, tilt_series, tilt_series_with, Budget, Convolver, SumPmf, TiltValue};
pub use lattice::{certificate, cf_quadratic_coefficient, span_shift, CertificateTerm, CfQuadratic, LatticeStructure};
pub use moments::MomentSet;
pub use proof::{
    dominance, dominance_with, prove_all, prove_class, BoundRow, ClassReport, DieAnalysis, Dominance, ExactTilt,
    N2Values, ProofOptions, Status, Winner,
};
pub use scalar::Real;

pub type GlobalConstantsF64 = GlobalConstants<f64>;
pub type ClassConstantsF64 = ClassConstants<f64>;
pub type CfProfileF64 = CfProfile<f64>;
pub type TailEnvelopeF64 = TailEnvelope<f64>;
pub type NormalizedCfF64 = NormalizedCf<f64>;
pub type CfQuadraticF64 = CfQuadratic<f64>;
