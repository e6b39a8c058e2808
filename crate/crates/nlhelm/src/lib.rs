//! Standing waves of the nonlinear Helmholtz equation `−Δu − u = Q|u|^{p−2}u`
//! found through a dual variational formulation, with numerical checks of
//! far-field behaviour, radiation, decay and kernel estimates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dual;
pub mod farfield;
pub mod fft;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod resolvent;
pub mod run;
pub mod scenario;
pub mod solver;
pub mod special;
