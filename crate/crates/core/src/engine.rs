//! Election orchestration: drives `n` voters through the phase plan on a
//! bulletin board, injects scripted misbehavior, and emits a report.
//!
//! Runs are deterministic: every voter draws from a ChaCha stream keyed by
//! `SHA-256(root seed || voter index)`, so behavior is independent of
//! scheduling order and identical scenarios produce byte-identical board
//! transcripts.
//!
//! Misbehavior injections:
//! * `InvalidProof { phase, voter }` - the voter posts its message with a
//!   corrupted challenge scalar; the board rejects it.
//! * `MismatchedVote { voter }` - the voter flips its intent after
//!   committing. The honest prover refuses to build the ballot proof
//!   (`StatementMismatch`), so the voter posts a simulator-forged proof,
//!   which fails non-interactive verification. The voter lands in the
//!   abort set and its committed vote is recovered.
//! * `ReplayEntry { voter, phase }` - the voter posts its admitted message
//!   a second time; the duplicate is rejected.
//! * `SkipCommit { voter }` - the voter registers but never commits,
//!   forcing a commit-round restart over the reduced roster.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::board::{conclude_tally, Board, BoardError, Payload, PhasePlan, PhaseTag, Record};
use crate::group::{Group, GroupElement};
use crate::protocol::{
    cast_vote, commit, keygen, recovery_share, ProtocolError, VoteMsg, VoterState,
};
use crate::sigma::{simulate_transcript, Statement, Transcript, VoteStatement};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error("fewer than two voters remain after commit restarts")]
    TooFewVoters,
    #[error("abort set exceeds the recoverable bound")]
    TooManyAborts,
    #[error("admitted entry failed re-verification: voter {0}, phase {1}")]
    IntegrityFailure(u32, PhaseTag),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Board(#[from] BoardError),
}

/// A scripted deviation from the honest protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Misbehavior {
    InvalidProof { phase: PhaseTag, voter: u32 },
    MismatchedVote { voter: u32 },
    ReplayEntry { voter: u32, phase: PhaseTag },
    SkipCommit { voter: u32 },
}

/// One election to run: voter count, intents, schedule, and deviations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: u32,
    pub votes: Vec<u8>,
    #[serde(default)]
    pub abort_set: BTreeSet<u32>,
    #[serde(default)]
    pub misbehaviors: Vec<Misbehavior>,
    #[serde(default)]
    pub plan: Option<PhasePlan>,
    #[serde(default)]
    pub seed: u64,
    /// Seal a block automatically after this many admitted entries.
    #[serde(default)]
    pub auto_seal: Option<u32>,
}

impl Scenario {
    pub fn honest(n: u32, votes: Vec<u8>, seed: u64) -> Scenario {
        Scenario {
            n,
            votes,
            abort_set: BTreeSet::new(),
            misbehaviors: Vec::new(),
            plan: None,
            seed,
            auto_seal: None,
        }
    }

    pub fn validate(&self, group: &Group) -> Result<(), EngineError> {
        let fail = |m: String| Err(EngineError::ScenarioInvalid(m));
        if self.n < 2 {
            return fail("need at least two voters".into());
        }
        if self.votes.len() != self.n as usize {
            return fail(format!("{} votes for {} voters", self.votes.len(), self.n));
        }
        if let Some(v) = self.votes.iter().find(|v| **v > 1) {
            return fail(format!("vote {v} is not 0 or 1"));
        }
        // the open tally searches [0, n]; it is decodable only if n < q
        if BigUint::from(self.n) >= *group.order() {
            return fail(format!(
                "{} voters cannot be tallied in a group of order {} (sum wraps)",
                self.n,
                group.order()
            ));
        }
        if self.abort_set.iter().any(|i| *i == 0 || *i > self.n) {
            return fail("abort set references unknown voters".into());
        }
        if self.abort_set.len() + 2 > self.n as usize {
            return fail(format!(
                "abort set of {} leaves fewer than two of {} voters",
                self.abort_set.len(),
                self.n
            ));
        }
        for m in &self.misbehaviors {
            let voter = match m {
                Misbehavior::InvalidProof { voter, .. }
                | Misbehavior::MismatchedVote { voter }
                | Misbehavior::ReplayEntry { voter, .. }
                | Misbehavior::SkipCommit { voter } => *voter,
            };
            if voter == 0 || voter > self.n {
                return fail(format!("misbehavior references unknown voter {voter}"));
            }
        }
        if let Some(plan) = &self.plan {
            plan.validate()?;
        }
        if self.auto_seal == Some(0) {
            return fail("auto_seal must be positive".into());
        }
        Ok(())
    }

    fn effective_plan(&self) -> PhasePlan {
        if let Some(p) = self.plan {
            return p;
        }
        // with auto-sealing, each phase needs room for its forced seals
        let per_phase = match self.auto_seal {
            Some(k) => (self.n as u64).div_ceil(k as u64) + 1,
            None => 1,
        };
        PhasePlan {
            register_end: per_phase,
            commit_end: 2 * per_phase,
            vote_end: 3 * per_phase,
            recover_end: 4 * per_phase,
        }
    }

    fn wants(&self, m: &Misbehavior) -> bool {
        self.misbehaviors.contains(m)
    }

    pub fn election_id(&self) -> Vec<u8> {
        let mut h = Sha256::new();
        h.update(b"ST/v1/election-id");
        h.update(self.seed.to_be_bytes());
        h.update(self.n.to_be_bytes());
        h.finalize()[..16].to_vec()
    }
}

/// Ground-truth tally: the plaintext sum. Test oracle only.
pub fn oracle_tally(votes: &[u8]) -> u64 {
    votes.iter().map(|v| *v as u64).sum()
}

/// Plaintext sum restricted to the given voter indices (1-based).
pub fn oracle_tally_over(votes: &[u8], counted: &BTreeSet<u32>) -> u64 {
    counted
        .iter()
        .filter_map(|i| votes.get(*i as usize - 1))
        .map(|v| *v as u64)
        .sum()
}

/// One record's verdict, as reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntrySummary {
    pub height: u64,
    pub round: u32,
    pub voter: u32,
    pub phase: PhaseTag,
    pub verdict: String,
}

/// The audited outcome of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionReport {
    /// Yes votes over all counted voters, recovered aborters included.
    pub count: u64,
    pub n_counted: u32,
    pub recovered_votes: BTreeMap<u32, u8>,
    /// Voters that committed but cast no admitted ballot.
    pub aborted: Vec<u32>,
    /// Aborters whose committed vote could not be opened; excluded from
    /// `count` and reported here instead.
    pub unrecoverable: Vec<u32>,
    pub restarted_commit_rounds: u32,
    pub entries: Vec<EntrySummary>,
}

impl ElectionReport {
    pub fn rejected(&self) -> impl Iterator<Item = &EntrySummary> {
        self.entries.iter().filter(|e| e.verdict != "admitted")
    }
}

pub struct RunOutput {
    pub report: ElectionReport,
    pub board: Board,
}

fn voter_rng(seed: u64, voter: u32) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"ST/v1/voter-rng");
    h.update(seed.to_be_bytes());
    h.update(voter.to_be_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Runs a scenario to completion and reports the outcome. Deterministic in
/// the scenario (including its seed).
pub fn run(group: &Group, scenario: &Scenario) -> Result<RunOutput, EngineError> {
    scenario.validate(group)?;
    let eid = scenario.election_id();
    let plan = scenario.effective_plan();
    let mut board = Board::new(group.clone(), &eid, scenario.n, plan, scenario.auto_seal)?;
    let mut rngs: BTreeMap<u32, ChaCha20Rng> = (1..=scenario.n)
        .map(|i| (i, voter_rng(scenario.seed, i)))
        .collect();
    let mut voters: BTreeMap<u32, VoterState> = BTreeMap::new();

    // ---- register ----
    for i in 1..=scenario.n {
        let rng = rngs.get_mut(&i).expect("rng per voter");
        let vote = scenario.votes[i as usize - 1];
        let (state, mut msg) = keygen(group, i, vote, &eid, rng)?;
        if scenario.wants(&Misbehavior::InvalidProof {
            phase: PhaseTag::Register,
            voter: i,
        }) {
            msg.proof.e = group.scalar_add(&msg.proof.e, &group.scalar_one());
        }
        let payload = Payload::Register(msg);
        let verdict = board.post(i, payload.clone());
        if scenario.wants(&Misbehavior::ReplayEntry {
            voter: i,
            phase: PhaseTag::Register,
        }) {
            board.post(i, payload);
        }
        if verdict.is_admitted() {
            voters.insert(i, state);
        }
    }
    board.advance_to(board.plan().register_end);

    // ---- commit, restarting the round while registered voters miss it ----
    let mut restarted = 0u32;
    loop {
        let roster = board.active_roster();
        let round = board.current_round();
        for i in roster.indices().collect::<Vec<_>>() {
            if round == 0 && scenario.wants(&Misbehavior::SkipCommit { voter: i }) {
                continue;
            }
            let state = voters.get_mut(&i).expect("active voters registered");
            let rng = rngs.get_mut(&i).expect("rng per voter");
            let big_y = roster.aggregate_y(group, i)?;
            let mut msg = commit(state, group, &big_y, &eid, rng)?;
            if round == 0
                && scenario.wants(&Misbehavior::InvalidProof {
                    phase: PhaseTag::Commit,
                    voter: i,
                })
            {
                msg.proof.e1 = group.scalar_add(&msg.proof.e1, &group.scalar_one());
            }
            let payload = Payload::Commit(msg);
            board.post(i, payload.clone());
            if round == 0
                && scenario.wants(&Misbehavior::ReplayEntry {
                    voter: i,
                    phase: PhaseTag::Commit,
                })
            {
                board.post(i, payload);
            }
        }
        board.advance_to(board.plan().commit_end);
        let committed: BTreeSet<u32> = board.current_commits().keys().copied().collect();
        let missing = board
            .active_roster()
            .indices()
            .any(|i| !committed.contains(&i));
        if !missing {
            break;
        }
        if committed.len() < 2 {
            return Err(EngineError::TooFewVoters);
        }
        let replan = board.restart_commit()?;
        restarted += 1;
        for i in &replan.removed {
            if let Some(v) = voters.get_mut(i) {
                v.mark_done();
            }
        }
        for i in board.active_roster().indices().collect::<Vec<_>>() {
            voters
                .get_mut(&i)
                .expect("active voters registered")
                .reset_for_new_commit_round();
        }
    }

    // ---- vote ----
    let roster = board.active_roster();
    for i in board.current_commits().keys().copied().collect::<Vec<_>>() {
        if scenario.abort_set.contains(&i) {
            continue; // abort after committing: cast nothing
        }
        let state = voters.get_mut(&i).expect("committed voters tracked");
        let rng = rngs.get_mut(&i).expect("rng per voter");
        let big_y = roster.aggregate_y(group, i)?;
        let h = roster.mask_h(group, i)?;
        let payload = if scenario.wants(&Misbehavior::MismatchedVote { voter: i }) {
            let flipped = state.vote() ^ 1;
            state.override_vote(flipped);
            // the honest prover refuses a ballot that contradicts the
            // commitment; forge one with the zero-knowledge simulator and
            // let the board reject it
            let err = cast_vote(state, group, &big_y, &h, &eid, rng)
                .expect_err("mismatched intent cannot be proven");
            debug_assert!(err.is_statement_mismatch(), "unexpected: {err}");
            Payload::Vote(forge_mismatched_ballot(group, state, &roster, i, rng)?)
        } else {
            let mut msg = cast_vote(state, group, &big_y, &h, &eid, rng)?;
            if scenario.wants(&Misbehavior::InvalidProof {
                phase: PhaseTag::Vote,
                voter: i,
            }) {
                msg.proof.e1 = group.scalar_add(&msg.proof.e1, &group.scalar_one());
            }
            Payload::Vote(msg)
        };
        board.post(i, payload.clone());
        if scenario.wants(&Misbehavior::ReplayEntry {
            voter: i,
            phase: PhaseTag::Vote,
        }) {
            board.post(i, payload);
        }
    }
    board.advance_to(board.plan().vote_end);

    // ---- recover, if anyone committed without casting ----
    let aborted = board.abort_set();
    if !aborted.is_empty() {
        let active = board.active_roster();
        if aborted.len() + 2 > active.len() {
            return Err(EngineError::TooManyAborts);
        }
        let betas: BTreeMap<u32, GroupElement> = board
            .current_commits()
            .iter()
            .map(|(i, m)| (*i, m.beta.clone()))
            .collect();
        for j in board.admitted_votes().keys().copied().collect::<Vec<_>>() {
            let state = voters.get(&j).expect("voted voters tracked");
            let rng = rngs.get_mut(&j).expect("rng per voter");
            let mut msg = recovery_share(state, group, &aborted, &active, &betas, &eid, rng)?;
            if scenario.wants(&Misbehavior::InvalidProof {
                phase: PhaseTag::Recover,
                voter: j,
            }) {
                msg.correction_proof.e =
                    group.scalar_add(&msg.correction_proof.e, &group.scalar_one());
            }
            let payload = Payload::Recover(msg);
            board.post(j, payload.clone());
            if scenario.wants(&Misbehavior::ReplayEntry {
                voter: j,
                phase: PhaseTag::Recover,
            }) {
                board.post(j, payload);
            }
        }
    }
    board.advance_to(board.plan().recover_end);

    // ---- re-verify every admitted proof, then the open tally ----
    if let Some((voter, phase)) = board.reverify_admitted().into_iter().next() {
        return Err(EngineError::IntegrityFailure(voter, phase));
    }
    let outcome = conclude_tally(&board)?;

    let entries = board
        .records()
        .filter_map(|r| match r {
            Record::Entry(e) => Some(EntrySummary {
                height: e.height,
                round: e.round,
                voter: e.voter,
                phase: e.phase,
                verdict: e.verdict.label(),
            }),
            Record::Replan(_) => None,
        })
        .collect();
    let report = ElectionReport {
        count: outcome.result.count,
        n_counted: outcome.result.n_counted,
        recovered_votes: outcome.result.recovered_votes,
        aborted: outcome.aborted,
        unrecoverable: outcome.unrecoverable,
        restarted_commit_rounds: restarted,
        entries,
    };
    Ok(RunOutput { report, board })
}

/// Builds the ballot a vote-flipping voter wishes it could prove, with a
/// simulated proof attached. Non-interactive verification rejects it.
fn forge_mismatched_ballot(
    group: &Group,
    state: &VoterState,
    roster: &crate::protocol::Roster,
    voter: u32,
    rng: &mut ChaCha20Rng,
) -> Result<VoteMsg, EngineError> {
    let big_y = roster.aggregate_y(group, voter)?;
    let h = roster.mask_h(group, voter)?;
    let (beta, c) = state.committed_pair().expect("committed");
    let masked = group.exp(&h, state.secret_key());
    let ballot = if state.vote() == 0 {
        masked
    } else {
        group.mul(&group.generator(), &masked)
    };
    let stmt = VoteStatement {
        big_y,
        h,
        beta,
        y: group.g_pow(state.secret_key()),
        c,
        v: ballot.clone(),
    };
    let e = group.random_scalar(rng);
    let Transcript::VoteOr(proof) = simulate_transcript(group, &Statement::VoteOr(stmt), &e, rng)
    else {
        unreachable!("vote statement simulates to a vote transcript");
    };
    Ok(VoteMsg { ballot, proof })
}
