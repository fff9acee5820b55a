//! A self-tallying yes/no voting protocol over a simulated append-only
//! bulletin board.
//!
//! Voters register aggregated ElGamal-style keys, commit to their votes,
//! cast encrypted ballots carrying OR-composed validity proofs, and anyone
//! can tally the posted ballots without a trusted authority. If a voter
//! aborts after committing, the remaining voters publish recovery shares
//! that open the aborter's committed vote, so the final count still includes
//! it.
//!
//! Module map:
//! * [`group`] - prime-order group arithmetic, canonical encoding, challenge
//!   hashing.
//! * [`sigma`] - Schnorr, equality-of-dlog, and the two OR-composed proof
//!   families, plus the transcript extractor/simulator used by tests.
//! * [`protocol`] - the five-phase voter state machine and tally/recovery
//!   algebra.
//! * [`board`] - the simulated blockchain bulletin board with block-height
//!   phase windows and an independent transcript auditor.
//! * [`engine`] - scenario-driven election orchestration with misbehavior
//!   injection.

pub mod board;
pub mod engine;
pub mod group;
pub mod protocol;
pub mod sigma;
