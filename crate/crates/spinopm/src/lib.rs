//! Mean-field modeling of spin noise, coherent response, and magnetic
//! sensitivity in optically pumped alkali-metal magnetometers.
//!
//! The library propagates atomic multipole moments through a linearized
//! drift equation in the spherical-tensor basis, evaluates noise spectra
//! with the quantum regression theorem, maps them onto a polarimetry
//! signal, and folds in photon shot noise to produce SNR and sensitivity
//! estimates. A brute-force density-matrix integrator (`oracle`) provides
//! an independent check of the linearized machinery.

pub mod angular;
pub mod drift;
pub mod equilibrium;
pub mod operators;
pub mod optics;
pub mod oracle;
pub mod sensing;
pub mod species;
pub mod spectra;

pub use angular::HalfInt;
