//! Numerical laboratory for a two-species competition model with
//! density-suppressed motility of the first species: the second species'
//! concentration acts as a chemorepellent, advecting the first species
//! down its gradient.
//!
//! The crate covers:
//!
//! * the model kinetics and equilibria ([`model`]);
//! * linear stability of the coexistence state and the bifurcation values
//!   of the advection strength ([`stability`]);
//! * a finite-difference time integrator with invariant monitors ([`sim`]);
//! * steady-state continuation in the advection strength, with
//!   weakly-nonlinear branch-direction coefficients ([`continuation`]);
//! * the large-advection shadow system, its bifurcation structure, and
//!   singular-perturbation transition layers ([`shadow`]);
//! * the acceptance checks tying the numerics to the analytical
//!   predictions ([`acceptance`]).

pub mod acceptance;
pub mod continuation;
pub mod linalg;
pub mod model;
pub mod shadow;
pub mod sim;
pub mod stability;
