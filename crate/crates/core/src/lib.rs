//! Cell-free massive MIMO with joint unicast and multicast service:
//! closed-form spectral efficiency for MR and ZF precoding, Monte Carlo
//! certification, and joint AP selection and power control by accelerated
//! projected gradient with an SCA benchmark.

pub mod apg;
pub mod channel;
pub mod closed_form;
pub mod error;
pub mod experiments;
pub mod monte_carlo;
pub mod network;
pub mod rng;
pub mod sca;
pub mod system;

pub use error::{Error, Result};
pub use system::{Dims, Precoder, UserKind};
