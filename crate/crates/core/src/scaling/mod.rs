//! Diagonal scalings for symmetric sparse matrices.
//!
//! * [`curtis_reid`]: least-squares scaling of the logarithms of the entries,
//!   solved by conjugate gradients, in a symmetric and an unsymmetric-averaged
//!   form.
//! * [`equilibrate`]: Ruiz-style symmetric equilibration in the infinity or
//!   one norm, and the [`combined_equilibrate`] schedule.
//! * [`max_product_matching`]: maximum product matching with dual-derived row
//!   and column factors, symmetrized by [`symmetrize_matching_scaling`].
//!
//! All factors are computed in the log domain and are strictly positive and
//! finite for entries anywhere in the normal floating point range.

mod curtis_reid;
mod equilibrate;
mod matching;

pub use curtis_reid::{
    curtis_reid, curtis_reid_objective, curtis_reid_scale, CurtisReidOptions, CurtisReidReport, CurtisReidVariant,
};
pub use equilibrate::{
    combined_equilibrate, equilibrate, equilibrate_with_report, row_norms, EquilibrationReport, NormChoice,
    EQUILIBRATION_TOL,
};
pub use matching::{max_product_matching, symmetrize_matching_scaling, Matching};
