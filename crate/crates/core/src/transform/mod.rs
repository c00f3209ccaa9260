//! Smooth sets under linear maps and smooth bilipschitz maps.

pub mod dilation;
pub mod invariance;
pub mod lemma3;
pub mod linear;
pub mod maps;
pub mod quadrature;
pub mod rotation;
mod window;

pub use dilation::{verify_dilation_bound, DilationRow, SlabDecomposition};
pub use invariance::{pullback_set, theorem3_checks, ImageReport, ImageRow, Pullback};
pub use lemma3::{lemma3a_check, lemma3b_check, AnnulusDecomposition, ConcentricRow, OverlapRow};
pub use linear::{svd2, LinearMap2, Mat2};
pub use maps::{verify_map, AffineMap, MapCheck, MapSpec, SmoothMap};
pub use quadrature::{region_quadrature, ClipPolicy, QuadratureOptions, QuadratureResult, Weighting};
pub use rotation::{reduce_rotation, rot_decompose, verify_rotation_bound, RotDecomposition, RotationReport};
