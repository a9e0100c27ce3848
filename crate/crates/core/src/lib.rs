//! Classical simulation of no-signaling correlations through Deutsch
//! closed time-like curves, and measurement-dependent local models.
//!
//! * [`prob`]: finite distributions, channels, entropy and mutual information.
//! * [`boxworld`]: bipartite behaviors, the PR box, no-signaling and
//!   Bell-locality tests, CHSH scores.
//! * [`ctc_engine`]: Deutsch consistency and maximum-entropy fixed points.
//! * [`ctc_circuits`]: local parties exchanging a common-future box through a CTC.
//! * [`zigzag`]: measurement-dependent models and singlet-simulation protocols.

pub mod boxworld;
pub mod ctc_circuits;
pub mod ctc_engine;
pub mod error;
pub mod lp;
pub mod prob;
pub mod sampling;
pub mod zigzag;

pub use error::{Error, Result};
