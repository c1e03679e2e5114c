//! Deterministic simulator for distributed multichannel active noise control.
//!
//! A set of ANC nodes, each a loudspeaker, an error microphone and a
//! controller sharing one reference microphone, cancel noise over a
//! synthetic (or user-supplied) acoustic plant. The main algorithm runs
//! single-channel FxLMS on every node, watches each node's frame-averaged
//! residual noise level, and only communicates when that level rises: the
//! node freezes its filter, asks its peers for their cumulative gradients
//! and merges them through compensation filters before resuming adaptation.
//!
//! Centralized multiple-error FxLMS, decentralized FxLMS and a per-sample
//! gradient-exchange baseline run against the same plant for comparison.
//!
//! ```no_run
//! use proactive_anc::harness::{run_scenario, Scenario};
//!
//! let scenario = Scenario::desk();
//! let result = run_scenario(&scenario, None).unwrap();
//! for trace in &result.traces {
//!     println!("{}: {:.1} dB", trace.label, result.steady_state_anse(&trace.label).unwrap());
//! }
//! ```

pub mod baselines;
pub mod combiner;
pub mod dsp;
mod error;
pub mod harness;
pub mod metrics;
pub mod netsim;
pub mod node;
pub mod plant;
pub mod sim;

pub use error::{AncError, Result};
