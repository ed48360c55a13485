//! Small numerical kernels shared by the domain modules.

pub mod interp;
pub mod ode;
pub mod pchip;
pub mod quad;
