//! Online kernel adaptive filtering.
//!
//! * [`krls::RegKrls`]: regularized kernel RLS with an ALD-sparsified
//!   dictionary, O(K²) per step.
//! * [`klms::Klms`]: kernel LMS, a growing RBF network, O(n) per step.
//! * [`linear::LinearFilter`]: LMS and RLS baselines.
//!
//! [`oracle`] holds dense batch solvers the recursions are checked against,
//! [`experiments`] the benchmark streams and trial harness, and [`cli`] the
//! commands behind the `kaf` binary.

pub mod cli;
pub mod dictionary;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod kernels;
pub mod klms;
pub mod krls;
pub mod linear;
pub mod matrix;
pub mod oracle;
pub mod par;
pub mod snapshot;
pub mod verify;

pub use dictionary::{AldResult, Dictionary};
pub use error::{ErrorKind, KafError, Result};
pub use filter::{FilterConfig, OnlineFilter, StepOutput};
pub use kernels::{KernelFamily, KernelSpec};
pub use klms::{Klms, KlmsConfig};
pub use krls::{KrlsConfig, RegKrls};
pub use linear::{LinearConfig, LinearFilter};
pub use par::ExecMode;
pub use snapshot::ModelSnapshot;
