//! Finite, computable pieces of the bosonization approach to the correlation
//! energy of a mean-field Fermi gas on the lattice ℤ³: Fermi-ball geometry,
//! patch decompositions of the Fermi sphere, Bogoliubov kernels of the
//! effective quadratic Hamiltonians and the RPA energy.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bogokernel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod linalg;
pub mod numeric;
pub mod patches;
pub mod rpa;

pub use bogokernel::{
    build_mode_system, check_frak_k_minus_d_bound, check_frak_k_vs_e, check_kernel_bound, check_l_blocks, diagonalize,
    BogoliubovSolution, ModeSystem,
};
pub use error::{Error, Result};
pub use lattice::{
    annulus_count_vs_area, excitation_energy, hartree_fock_energy, solve_kfermi_for_n, FermiBall, InteractionPotential,
    Momentum,
};
pub use patches::{ModeIndexSet, PatchDecomposition};
pub use rpa::{rpa_energy_analytic, rpa_energy_trace, rpa_mode_integral, small_v_quadratic_coefficient, RpaReport};
