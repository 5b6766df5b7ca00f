//! Kernel k-means with Nyström acceleration, and a small numerical lab for
//! clustering Rademacher complexity and excess clustering risk.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernel`] | kernels, Gram matrices, spectra, effective dimension |
//! | [`clustering`] | exact kernel k-means cost, Lloyd, brute-force ERM |
//! | [`seeding`] | kernel k-means++ and local search |
//! | [`nystrom`] | landmark sampling, embedding, landmark-count rules |
//! | [`rademacher`] | Rademacher-complexity estimators and bound checks |
//! | [`risk`] | finite-support distributions and excess-risk experiments |

pub mod clustering;
pub mod error;
pub mod fmt;
pub mod kernel;
pub mod nystrom;
pub mod rademacher;
pub mod risk;
pub mod rng;
pub mod seeding;

pub use error::{Error, Result};
