//! Listwise reward-enhanced policy optimization on tabular bigram policies.
//!
//! A [`policy::Policy`] generates token responses; [`rewards::RewardModel`]
//! scores them; [`objectives`] holds the listwise loss and its PG, DPO and SFT
//! baselines with analytic gradients; [`training`] runs the Evolve/Iterate
//! loop; [`eval`] computes win rates, negative flips and KL. [`experiment`]
//! wires these to files for the `lire` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod decode;
pub mod enumerate;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod io;
pub mod kl;
pub mod math;
pub mod objectives;
pub mod optim;
pub mod policy;
pub mod pool;
pub mod rewards;
pub mod training;

pub use error::{LireError, Result};
