//! Local branching improvement and feasibility heuristics for nonconvex
//! mixed-integer nonlinear programs.
//!
//! The heuristics combine three solver layers built here: a linear
//! convexification of the problem ([`relax`]), a branch-and-bound MILP solver
//! on top of a bounded simplex ([`milp`], [`lp`]), and an augmented
//! Lagrangian local NLP solver ([`nlp`]). [`heur`] composes them.

pub mod cli;
pub mod expr;
pub mod heur;
pub mod lp;
pub mod milp;
pub mod model;
pub mod nlp;
pub mod relax;
