//! Koopman tensor dynamics models and Koopman-assisted reinforcement
//! learning.
//!
//! The library estimates a Koopman tensor from interaction data — a
//! third-order array mapping Kronecker products of control features and
//! state features to next-step state features — and uses the resulting
//! action-conditioned operators `K^u` inside two entropy-regularized control
//! algorithms:
//!
//! - **Soft Koopman value iteration** ([`skvi`]): Bellman backups over a
//!   discrete action grid with a value function linear in the state
//!   dictionary.
//! - **Soft actor Koopman-critic** ([`actor_critic`]): soft actor-critic
//!   whose value function is linear in the dictionary and whose critic
//!   target advances through `K^u`.
//!
//! Classical LQR ([`lqr`]) and neural soft actor-critic baselines, four
//! benchmark environments ([`environments`]), and an experiment harness
//! ([`harness`]) round out the crate. Start with the runnable programs in
//! `examples/`.

pub mod actor_critic;
pub mod dictionaries;
pub mod koopman;
pub mod lqr;
pub mod neural;
pub mod environments;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod skvi;

pub use error::{Error, Result};
