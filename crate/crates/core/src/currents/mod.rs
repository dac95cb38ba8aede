//! Currents, test forms and their smoothing operators.

pub mod current;
pub mod forms;
pub mod smoothing;

pub use current::{Current, CurrentSpec, Piece, PieceSpec};
pub use forms::{standard_form_bank, CoefficientSpec, FormSpec, TestForm};
pub use smoothing::{
    chart_z_tilde, equivariant_z, invariance_residual, localize, smooth_z, smooth_z_tilde,
    EquivariantSmoother,
};
