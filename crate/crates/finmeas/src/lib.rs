//! finmeas — finite-resource projective measurements.
//!
//! A library and CLI for the thermodynamics of measurement with finite
//! pointers: a d_S-level system is measured by coupling it unitarily to a
//! d_P-level pointer prepared in a thermal (Gibbs) state, and the outcome is
//! read from a projector partition of the pointer. The crate
//!
//! * models the three defining properties of an ideal measurement —
//!   unbiased, faithful, non-invasive — and checks them for arbitrary
//!   channels ([`measure`]);
//! * evaluates the correlation ceiling C_max reachable by unbiased unitary
//!   couplings and constructs the energy-minimal coupling that saturates it
//!   ([`optimal`]);
//! * accounts the energy costs: ΔE_I for cooling the pointer with fridge
//!   qubits and ΔE_II for the correlating unitary, including full cost
//!   curves over fridge gaps ([`optimal`]);
//! * certifies the construction against exhaustive brute-force search on
//!   small instances ([`oracle`]).
//!
//! Dense complex linear algebra lives in [`qmat`]; spectra, Gibbs states and
//! density matrices in [`states`]; the error taxonomy (and CLI exit-code
//! mapping) in [`error`].

pub mod cli;
pub mod error;
pub mod measure;
pub mod optimal;
pub mod oracle;
pub mod qmat;
pub mod states;
