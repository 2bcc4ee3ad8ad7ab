//! Backward responsibility attribution for states of a transition system that
//! violated a safety property.
//!
//! Given an explicit-state transition system and a counterexample run, each
//! state is treated as a player in a cooperative game: a coalition wins if
//! handing its states to player Safe suffices to avoid the bad states in the
//! game where the counterexample is engraved. Responsibility is then a power
//! index (Shapley, Banzhaf, or a custom semivalue) of that game, in an
//! optimistic or pessimistic variant.
//!
//! Modules:
//! - [`ts`]: transition systems, counterexamples, groupings, validation
//! - [`tsr`]: the TSR text format and its JSON mirror
//! - [`game`]: engraved safety games and the attractor solver
//! - [`coop`]: coalition values, win tables, minimal winning coalitions
//! - [`index`]: exact-rational weight vectors for power indices
//! - [`resp`]: the exact, characterisation-based, and sampling engines
//! - [`zoo`]: parametric model generators for tests and demos
//! - [`oracle`]: brute-force reference implementations used by tests

pub mod coop;
pub mod game;
pub mod index;
pub mod oracle;
pub mod resp;
pub mod ts;
pub mod tsr;
pub mod zoo;
