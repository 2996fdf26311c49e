//! Wavefunctions driven by `Ĥ(t) = Ĥ₀(λ(t)) + λ̇ ξ̂(λ(t))`, on a
//! finite-difference grid (power laws) or in the instantaneous eigenbasis
//! (the box).

mod basis;
mod operator;
mod propagate;
mod spectrum;
mod stretch;

pub use basis::{
    box_connection, box_energy, box_overlap, exact_box_phase, exact_box_state, propagate_basis, BasisPropagation,
    BasisTrajectory,
};
pub use operator::{
    discretize_h0, h0_tridiagonal, xi_dilation, xi_dilation_tridiagonal, GridSpec, HermitianOperator, QuantumState,
    Tridiagonal, C,
};
pub use propagate::{natural_period, propagate_grid, propagate_power_law, GridPropagation, GridTrajectory};
pub use spectrum::{
    berry_connection, eigensystem, fidelity, lowest_levels, xi_spectral, BerryConnection, EigenSystem, SpectralXi,
};
pub use stretch::{stretch_cayley, stretch_exp, stretch_first_order, transport_stretch};
