//! LWR conservation law with the Greenshields flux.
//!
//! `rho_t + Q(rho)_x = 0`, `Q(rho) = rho v_f (1 - rho/rho_m)`, solved two ways:
//! exactly through the Lax-Hopf formula on the Moskowitz function, and
//! approximately with a Godunov finite-volume scheme that serves as an
//! independent oracle.

mod balance;
mod dataset;
mod fundamental;
mod godunov;
mod lax_hopf;
mod types;

pub use balance::mass_balance;
pub use dataset::{
    read_dataset, read_dataset_file, write_csv, write_dataset, write_dataset_file, DATASET_MAGIC, DATASET_VERSION,
};
pub use fundamental::{
    density_for_speed, flux, flux_derivative, flux_derivative_unchecked, flux_unchecked, godunov_flux, legendre_dual,
    velocity,
};
pub use godunov::{godunov_solve, substeps_per_output, CFL_TARGET};
pub use lax_hopf::{initial_moskowitz, lax_hopf_point, lax_hopf_solve, InitialMoskowitz, LaxHopfPoint};
pub use types::{DensityField, Environment, Grid, MoskowitzField, PiecewiseConstantProfile};
