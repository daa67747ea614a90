//! Finite element solver for a two-species chemotaxis-Navier-Stokes system
//! with Lotka-Volterra competitive kinetics.

pub mod assembly;
pub mod config;
pub mod fespace;
pub mod fields;
pub mod linsolve;
pub mod mesh;
pub mod mms;
pub mod output;
pub mod par;
pub mod quadrature;
pub mod scheme;
pub mod sparse;
pub mod study;
