//! Shared numerical machinery: FFT plans, quadrature, interpolation, finite
//! differences, Bessel functions and a small adaptive ODE integrator.

pub mod bessel;
pub mod fd;
pub mod fft;
pub mod interp;
pub mod ode;
pub mod quad;
