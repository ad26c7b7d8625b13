//! Rank-one (cutting-and-stacking) transformations.
//!
//! * [`construction`]: parameters, heights, windows, classification.
//! * [`tower`]: labeled deep towers and correlation counts.
//! * [`limits`]: weak limits of powers, p/q-similarity, disjointness evidence.
//! * [`mobius`]: Möbius sieve and residue sums.
//! * [`sarnak`]: Möbius-weighted orbit sums and the prime-extension identity.
//!
//! Float code is generic over [`Real`], exact orbit sums over [`Weight`];
//! the aliases below fix the common instantiations.

pub mod construction;
pub mod error;
pub mod limits;
pub mod mobius;
pub mod sarnak;
pub mod scalar;
pub mod tower;

pub use construction::{ClassLabel, ConstructionParams, Preset, StageParams, Window, WindowSet};
pub use error::{Error, Result};
pub use mobius::{mobius_direct, sieve_mobius, MobiusTable};
pub use scalar::{Real, Weight};
pub use tower::{build_labels, LevelLabel, TowerModel};

use num_rational::BigRational;

pub type CorrelationMatrixF64 = tower::CorrelationMatrix<f64>;
pub type CorrelationMatrixF32 = tower::CorrelationMatrix<f32>;
pub type LimitPolynomialF64 = limits::LimitPolynomial<f64>;
pub type LimitPolynomialF32 = limits::LimitPolynomial<f32>;
pub type WeakLimitF64 = limits::WeakLimit<f64>;
pub type IntObservable = sarnak::Observable<i64>;
pub type RationalObservable = sarnak::Observable<BigRational>;
pub type FloatObservable = sarnak::Observable<f64>;
