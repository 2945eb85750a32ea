//! Conjunction analysis: collision probability in the encounter plane,
//! probability dilution, threshold detection rates, k-sigma ellipsoid
//! screening, and a validity harness for belief assignments.
//!
//! `no_std` with `alloc`. Enable `std` for `std::error::Error`, `parallel`
//! for multi-threaded Monte Carlo, and `serde` for result serialization.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod detection;
pub mod ellipsoid;
pub mod error;
pub mod geometry;
pub mod probability;
pub mod screening;
pub mod sim;
pub mod special;
pub mod validity;

pub use detection::{
    critical_displacement, detection_curve, detection_rate, dilution_boundary, false_confidence_demo, ncx2_cdf,
    DetectionCurve, DetectionMethod, DetectionPoint, FalseConfidenceReport, ThresholdPolicy,
};
pub use ellipsoid::{closest_points, min_distance, ClosestPoints, Ellipsoid};
pub use error::{Error, Result};
pub use geometry::{
    encounter_projection, relative_covariance, standardize, standardized_encounter, EncounterPlane, JointState,
    PlaneAxis, RelativeState, StandardizedEncounter, StateCovariance, StateVector,
};
pub use probability::{dilution_curve, max_pc_head_on, pc_circular, pc_contour, DilutionCurve, PcResult, Quadrature};
pub use screening::{
    build_ellipsoid, joint_confidence, ksigma_confidence, missed_maneuver_rate, screen_conjunction, CoverageReport,
    CoverageScenario, JointConfidence, ScreeningDecision,
};
pub use validity::{
    region_belief, validity_check, BeliefRule, ConfidenceRegionRule, GaussianModel, GaussianPosteriorRule,
    Proposition, RegionLevel, SamplingModel, ValidityReport, Verdict,
};
