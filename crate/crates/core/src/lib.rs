//! Thin-film Landau–de Gennes order-parameter minimization with half-degree
//! defects, and the diagnostics that compare minimizers with their
//! asymptotic description.
//!
//! Fields live on a masked uniform lattice in the reduced `(p1, p2, r)`
//! coordinates. [`solver`] minimizes the discrete energy with Newton steps
//! under ε-continuation, [`defects`] locates cores, [`renorm`] evaluates the
//! limiting interaction energy of defect positions, and [`diagnostics`] turns
//! solved fields into checked observables.

pub mod defects;
pub mod diagnostics;
pub mod domain;
pub mod energy;
pub mod field;
pub mod io;
pub mod qtensor;
pub mod renorm;
pub mod solver;
pub mod sparse;
