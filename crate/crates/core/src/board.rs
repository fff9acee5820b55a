//! Simulated blockchain bulletin board.
//!
//! The board is an append-only chain of blocks, each sealing the records
//! posted since the previous seal. Block height is the protocol's clock:
//! the phase plan maps each protocol phase to a half-open height window
//! `[start, end)`, and a message is admitted only while its phase window is
//! open. Admission also enforces one admitted entry per (voter, phase,
//! commit round) and verifies the payload's zero-knowledge proof against
//! the roster accumulated so far. Rejected entries are recorded with their
//! reason, so misbehavior stays auditable.
//!
//! Chain digests are `SHA-256(prev_digest || canonical record bytes)` over
//! fixed big-endian framing; replaying the same record stream always
//! reproduces the same digests. The genesis digest binds the election id,
//! group parameters, voter count, and phase plan.
//!
//! [`audit`] replays a serialized transcript from scratch: it re-verifies
//! every digest, window, duplicate rule, and proof (trusting none of the
//! recorded verdicts) and recomputes the tally independently.
//!
//! If registered voters miss the commit deadline the election cannot
//! proceed against the stale roster, because every `Y_i` and `h_i` spans
//! the full roster. [`Board::restart_commit`] drops the no-shows, shifts
//! the remaining windows, and opens a fresh commit round; the restart is
//! itself a chained record.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::group::{Group, GroupDescriptor, GroupElement, GroupError};
use crate::protocol::{
    recover_tally, recover_vote, tally, CommitMsg, ProtocolError, RecoveryMsg, RegistrationMsg,
    Roster, TallyResult, VoteMsg, PHASE_COMMIT, PHASE_RECOVER, PHASE_REGISTER, PHASE_VOTE,
};
use crate::sigma::{
    commit_or_verify, eqdlog_verify, schnorr_verify, vote_or_verify, CommitStatement,
    EqDlogStatement, ProofContext, VoteStatement,
};

#[derive(Debug, Error)]
pub enum BoardError {
    #[error("invalid phase plan: {0}")]
    InvalidPlan(String),
    #[error("chain broken: {0}")]
    ChainBroken(String),
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("commit restart not allowed: {0}")]
    RestartNotAllowed(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Phase windows in block heights, strictly increasing. Registration spans
/// `[0, register_end)`, each later phase `[previous_end, its_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub register_end: u64,
    pub commit_end: u64,
    pub vote_end: u64,
    pub recover_end: u64,
}

impl PhasePlan {
    /// One block per phase; the default for engine runs.
    pub fn compact() -> PhasePlan {
        PhasePlan {
            register_end: 1,
            commit_end: 2,
            vote_end: 3,
            recover_end: 4,
        }
    }

    pub fn validate(&self) -> Result<(), BoardError> {
        if self.register_end == 0
            || self.commit_end <= self.register_end
            || self.vote_end <= self.commit_end
            || self.recover_end <= self.vote_end
        {
            return Err(BoardError::InvalidPlan(
                "phase ends must be strictly increasing with a nonempty recover window".into(),
            ));
        }
        Ok(())
    }

    fn canonical_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out[0..8].copy_from_slice(&self.register_end.to_be_bytes());
        out[8..16].copy_from_slice(&self.commit_end.to_be_bytes());
        out[16..24].copy_from_slice(&self.vote_end.to_be_bytes());
        out[24..32].copy_from_slice(&self.recover_end.to_be_bytes());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseTag {
    Register,
    Commit,
    Vote,
    Recover,
}

impl PhaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseTag::Register => PHASE_REGISTER,
            PhaseTag::Commit => PHASE_COMMIT,
            PhaseTag::Vote => PHASE_VOTE,
            PhaseTag::Recover => PHASE_RECOVER,
        }
    }

    fn code(&self) -> u8 {
        match self {
            PhaseTag::Register => 1,
            PhaseTag::Commit => 2,
            PhaseTag::Vote => 3,
            PhaseTag::Recover => 4,
        }
    }
}

impl fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A protocol message as posted to the board.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Payload {
    Register(RegistrationMsg),
    Commit(CommitMsg),
    Vote(VoteMsg),
    Recover(RecoveryMsg),
}

impl Payload {
    pub fn phase(&self) -> PhaseTag {
        match self {
            Payload::Register(_) => PhaseTag::Register,
            Payload::Commit(_) => PhaseTag::Commit,
            Payload::Vote(_) => PhaseTag::Vote,
            Payload::Recover(_) => PhaseTag::Recover,
        }
    }

    /// Canonical bytes: one discriminant byte, then the message encoding.
    pub fn to_bytes(&self, group: &Group) -> Vec<u8> {
        let (code, body) = match self {
            Payload::Register(m) => (1u8, m.to_bytes(group)),
            Payload::Commit(m) => (2, m.to_bytes(group)),
            Payload::Vote(m) => (3, m.to_bytes(group)),
            Payload::Recover(m) => (4, m.to_bytes(group)),
        };
        let mut out = vec![code];
        out.extend(body);
        out
    }

    pub fn from_bytes(group: &Group, bytes: &[u8]) -> Result<Self, GroupError> {
        let (code, body) = bytes
            .split_first()
            .ok_or_else(|| GroupError::MalformedEncoding("empty payload".into()))?;
        match code {
            1 => Ok(Payload::Register(RegistrationMsg::from_bytes(group, body)?)),
            2 => Ok(Payload::Commit(CommitMsg::from_bytes(group, body)?)),
            3 => Ok(Payload::Vote(VoteMsg::from_bytes(group, body)?)),
            4 => Ok(Payload::Recover(RecoveryMsg::from_bytes(group, body)?)),
            other => Err(GroupError::MalformedEncoding(format!(
                "unknown payload discriminant {other}"
            ))),
        }
    }

    fn check(&self, group: &Group) -> Result<(), GroupError> {
        match self {
            Payload::Register(m) => m.check(group),
            Payload::Commit(m) => m.check(group),
            Payload::Vote(m) => m.check(group),
            Payload::Recover(m) => m.check(group),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    PhaseClosed,
    Duplicate,
    NotRegistered,
    NoCommit,
    NotVoted,
    AbortSetInvalid,
    ProofInvalid,
    Malformed,
}

impl RejectReason {
    fn code(&self) -> u8 {
        match self {
            RejectReason::PhaseClosed => 1,
            RejectReason::Duplicate => 2,
            RejectReason::NotRegistered => 3,
            RejectReason::NoCommit => 4,
            RejectReason::NotVoted => 5,
            RejectReason::AbortSetInvalid => 6,
            RejectReason::ProofInvalid => 7,
            RejectReason::Malformed => 8,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::PhaseClosed => "PhaseClosed",
            RejectReason::Duplicate => "Duplicate",
            RejectReason::NotRegistered => "NotRegistered",
            RejectReason::NoCommit => "NoCommit",
            RejectReason::NotVoted => "NotVoted",
            RejectReason::AbortSetInvalid => "AbortSetInvalid",
            RejectReason::ProofInvalid => "ProofInvalid",
            RejectReason::Malformed => "Malformed",
        }
    }

    fn from_label(s: &str) -> Option<RejectReason> {
        Some(match s {
            "PhaseClosed" => RejectReason::PhaseClosed,
            "Duplicate" => RejectReason::Duplicate,
            "NotRegistered" => RejectReason::NotRegistered,
            "NoCommit" => RejectReason::NoCommit,
            "NotVoted" => RejectReason::NotVoted,
            "AbortSetInvalid" => RejectReason::AbortSetInvalid,
            "ProofInvalid" => RejectReason::ProofInvalid,
            "Malformed" => RejectReason::Malformed,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Admitted,
    Rejected(RejectReason),
}

impl Verdict {
    pub fn is_admitted(&self) -> bool {
        matches!(self, Verdict::Admitted)
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::Admitted => "admitted".to_string(),
            Verdict::Rejected(r) => format!("rejected:{}", r.as_str()),
        }
    }

    pub fn from_label(s: &str) -> Option<Verdict> {
        if s == "admitted" {
            return Some(Verdict::Admitted);
        }
        let reason = s.strip_prefix("rejected:")?;
        RejectReason::from_label(reason).map(Verdict::Rejected)
    }

    fn code_bytes(&self) -> [u8; 2] {
        match self {
            Verdict::Admitted => [0, 0],
            Verdict::Rejected(r) => [1, r.code()],
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Verdict::from_label(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("bad verdict {s:?}")))
    }
}

/// One posted message, admitted or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub height: u64,
    pub round: u32,
    pub voter: u32,
    pub phase: PhaseTag,
    pub payload: Payload,
    pub verdict: Verdict,
}

impl Entry {
    pub fn canonical_bytes(&self, group: &Group) -> Vec<u8> {
        let payload = self.payload.to_bytes(group);
        let mut out = vec![1u8];
        out.extend(self.height.to_be_bytes());
        out.extend(self.round.to_be_bytes());
        out.extend(self.voter.to_be_bytes());
        out.push(self.phase.code());
        out.extend((payload.len() as u32).to_be_bytes());
        out.extend(payload);
        out.extend(self.verdict.code_bytes());
        out
    }
}

/// A commit-round restart marker, chained like an entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replan {
    pub height: u64,
    /// The newly opened commit round.
    pub round: u32,
    pub removed: Vec<u32>,
    pub plan: PhasePlan,
}

impl Replan {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = vec![2u8];
        out.extend(self.height.to_be_bytes());
        out.extend(self.round.to_be_bytes());
        out.extend((self.removed.len() as u32).to_be_bytes());
        for v in &self.removed {
            out.extend(v.to_be_bytes());
        }
        out.extend(self.plan.canonical_bytes());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)] // entries dominate; boxing buys nothing at desk scale
pub enum Record {
    Entry(Entry),
    Replan(Replan),
}

impl Record {
    fn canonical_bytes(&self, group: &Group) -> Vec<u8> {
        match self {
            Record::Entry(e) => e.canonical_bytes(group),
            Record::Replan(r) => r.canonical_bytes(),
        }
    }
}

/// A sealed block: everything posted since the previous seal.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub height: u64,
    pub records: Vec<Record>,
    pub prev_digest: [u8; 32],
    pub digest: [u8; 32],
}

fn seal_digest(group: &Group, prev: &[u8; 32], records: &[Record]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(prev);
    for r in records {
        h.update(r.canonical_bytes(group));
    }
    h.finalize().into()
}

/// The bulletin board proper.
pub struct Board {
    group: Group,
    election_id: Vec<u8>,
    n: u32,
    first_plan: PhasePlan,
    plan: PhasePlan,
    commit_start: u64,
    round: u32,
    auto_seal: Option<u32>,
    height: u64,
    genesis: [u8; 32],
    blocks: Vec<Block>,
    pending: Vec<Record>,
    pending_admitted: u32,
    registered: BTreeMap<u32, RegistrationMsg>,
    removed: BTreeSet<u32>,
    commits: BTreeMap<u32, BTreeMap<u32, CommitMsg>>,
    votes: BTreeMap<u32, VoteMsg>,
    recoveries: BTreeMap<u32, RecoveryMsg>,
}

impl Board {
    /// `auto_seal`: seal a block automatically after this many admitted
    /// entries; `None` leaves sealing entirely to `advance_block`.
    pub fn new(
        group: Group,
        election_id: &[u8],
        n: u32,
        plan: PhasePlan,
        auto_seal: Option<u32>,
    ) -> Result<Board, BoardError> {
        plan.validate()?;
        let genesis = {
            let mut h = Sha256::new();
            let fields: Vec<Vec<u8>> = vec![
                b"ST/v1/board".to_vec(),
                election_id.to_vec(),
                group.descriptor().name.into_bytes(),
                group.modulus().to_bytes_be(),
                group.order().to_bytes_be(),
                group.encode_element(&group.generator()),
                n.to_be_bytes().to_vec(),
                plan.canonical_bytes().to_vec(),
            ];
            for field in fields {
                h.update((field.len() as u32).to_be_bytes());
                h.update(&field);
            }
            h.finalize().into()
        };
        Ok(Board {
            commit_start: plan.register_end,
            group,
            election_id: election_id.to_vec(),
            n,
            first_plan: plan,
            plan,
            round: 0,
            auto_seal,
            height: 0,
            genesis,
            blocks: Vec::new(),
            pending: Vec::new(),
            pending_admitted: 0,
            registered: BTreeMap::new(),
            removed: BTreeSet::new(),
            commits: BTreeMap::new(),
            votes: BTreeMap::new(),
            recoveries: BTreeMap::new(),
        })
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn election_id(&self) -> &[u8] {
        &self.election_id
    }

    pub fn current_height(&self) -> u64 {
        self.height
    }

    pub fn current_round(&self) -> u32 {
        self.round
    }

    pub fn plan(&self) -> &PhasePlan {
        &self.plan
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn genesis_digest(&self) -> [u8; 32] {
        self.genesis
    }

    /// Voters registered and not dropped by a commit-round restart.
    pub fn active_roster(&self) -> Roster {
        Roster::new(
            self.registered
                .iter()
                .filter(|(i, _)| !self.removed.contains(i))
                .map(|(i, m)| (*i, m.y.clone()))
                .collect(),
        )
    }

    /// Admitted commits of the current round.
    pub fn current_commits(&self) -> &BTreeMap<u32, CommitMsg> {
        static EMPTY: std::sync::OnceLock<BTreeMap<u32, CommitMsg>> = std::sync::OnceLock::new();
        self.commits
            .get(&self.round)
            .unwrap_or_else(|| EMPTY.get_or_init(BTreeMap::new))
    }

    pub fn admitted_votes(&self) -> &BTreeMap<u32, VoteMsg> {
        &self.votes
    }

    pub fn admitted_recoveries(&self) -> &BTreeMap<u32, RecoveryMsg> {
        &self.recoveries
    }

    /// Committed-but-unvoted voters of the current round: the abort set.
    pub fn abort_set(&self) -> BTreeSet<u32> {
        self.current_commits()
            .keys()
            .filter(|i| !self.votes.contains_key(i))
            .copied()
            .collect()
    }

    fn window(&self, phase: PhaseTag) -> (u64, u64) {
        match phase {
            PhaseTag::Register => (0, self.plan.register_end),
            PhaseTag::Commit => (self.commit_start, self.plan.commit_end),
            PhaseTag::Vote => (self.plan.commit_end, self.plan.vote_end),
            PhaseTag::Recover => (self.plan.vote_end, self.plan.recover_end),
        }
    }

    fn ctx(&self, voter: u32, phase: PhaseTag) -> ProofContext {
        ProofContext::new(&self.election_id, voter, phase.as_str())
    }

    /// Admission decision for a payload as of the current board state.
    /// Pure with respect to the chain: records nothing.
    pub fn evaluate(&self, voter: u32, payload: &Payload) -> Verdict {
        use RejectReason::*;
        let phase = payload.phase();
        let (start, end) = self.window(phase);
        if self.height < start || self.height >= end {
            return Verdict::Rejected(PhaseClosed);
        }
        if voter == 0 || voter > self.n {
            return Verdict::Rejected(NotRegistered);
        }
        if payload.check(&self.group).is_err() {
            return Verdict::Rejected(Malformed);
        }
        match payload {
            Payload::Register(msg) => {
                if self.registered.contains_key(&voter) {
                    return Verdict::Rejected(Duplicate);
                }
                if !schnorr_verify(&self.group, &msg.y, &msg.proof, &self.ctx(voter, phase)) {
                    return Verdict::Rejected(ProofInvalid);
                }
                Verdict::Admitted
            }
            Payload::Commit(msg) => {
                let roster = self.active_roster();
                if !roster.contains(voter) {
                    return Verdict::Rejected(NotRegistered);
                }
                if self.current_commits().contains_key(&voter) {
                    return Verdict::Rejected(Duplicate);
                }
                let Ok(big_y) = roster.aggregate_y(&self.group, voter) else {
                    return Verdict::Rejected(NotRegistered);
                };
                let stmt = CommitStatement {
                    big_y,
                    beta: msg.beta.clone(),
                    c: msg.c.clone(),
                };
                if !commit_or_verify(&self.group, &stmt, &msg.proof, &self.ctx(voter, phase)) {
                    return Verdict::Rejected(ProofInvalid);
                }
                Verdict::Admitted
            }
            Payload::Vote(msg) => {
                let roster = self.active_roster();
                if !roster.contains(voter) {
                    return Verdict::Rejected(NotRegistered);
                }
                let Some(commit) = self.current_commits().get(&voter) else {
                    return Verdict::Rejected(NoCommit);
                };
                if self.votes.contains_key(&voter) {
                    return Verdict::Rejected(Duplicate);
                }
                let (Ok(big_y), Ok(h)) = (
                    roster.aggregate_y(&self.group, voter),
                    roster.mask_h(&self.group, voter),
                ) else {
                    return Verdict::Rejected(NotRegistered);
                };
                let stmt = VoteStatement {
                    big_y,
                    h,
                    beta: commit.beta.clone(),
                    y: roster.key(voter).expect("roster member").clone(),
                    c: commit.c.clone(),
                    v: msg.ballot.clone(),
                };
                if !vote_or_verify(&self.group, &stmt, &msg.proof, &self.ctx(voter, phase)) {
                    return Verdict::Rejected(ProofInvalid);
                }
                Verdict::Admitted
            }
            Payload::Recover(msg) => {
                let roster = self.active_roster();
                if !self.votes.contains_key(&voter) {
                    return Verdict::Rejected(NotVoted);
                }
                if self.recoveries.contains_key(&voter) {
                    return Verdict::Rejected(Duplicate);
                }
                let aborted = self.abort_set();
                let claimed: BTreeSet<u32> = msg.aborted.iter().copied().collect();
                let consistent = claimed == aborted
                    && msg.aborted.len() == claimed.len()
                    && msg.shares.len() == msg.aborted.len()
                    && msg
                        .shares
                        .iter()
                        .zip(&msg.aborted)
                        .all(|(s, i)| s.aborter == *i);
                if !consistent || aborted.is_empty() || aborted.len() + 2 > roster.len() {
                    return Verdict::Rejected(AbortSetInvalid);
                }
                let y_j = roster.key(voter).expect("voted implies registered").clone();
                let ctx = self.ctx(voter, phase);
                for share in &msg.shares {
                    let Some(cm) = self.current_commits().get(&share.aborter) else {
                        return Verdict::Rejected(AbortSetInvalid);
                    };
                    let stmt = EqDlogStatement {
                        g1: self.group.generator(),
                        y1: y_j.clone(),
                        g2: cm.beta.clone(),
                        y2: share.factor.clone(),
                    };
                    if !eqdlog_verify(&self.group, &stmt, &share.proof, &ctx) {
                        return Verdict::Rejected(ProofInvalid);
                    }
                }
                let Ok(base) = roster.correction_base(&self.group, &aborted, voter) else {
                    return Verdict::Rejected(AbortSetInvalid);
                };
                let stmt = EqDlogStatement {
                    g1: self.group.generator(),
                    y1: y_j,
                    g2: base,
                    y2: msg.correction.clone(),
                };
                if !eqdlog_verify(&self.group, &stmt, &msg.correction_proof, &ctx) {
                    return Verdict::Rejected(ProofInvalid);
                }
                Verdict::Admitted
            }
        }
    }

    fn apply_admitted(&mut self, voter: u32, payload: &Payload) {
        match payload {
            Payload::Register(m) => {
                self.registered.insert(voter, m.clone());
            }
            Payload::Commit(m) => {
                self.commits
                    .entry(self.round)
                    .or_default()
                    .insert(voter, m.clone());
            }
            Payload::Vote(m) => {
                self.votes.insert(voter, m.clone());
            }
            Payload::Recover(m) => {
                self.recoveries.insert(voter, m.clone());
            }
        }
    }

    /// Posts a message. The entry is recorded with its verdict either way;
    /// only admitted entries change protocol state.
    pub fn post(&mut self, voter: u32, payload: Payload) -> Verdict {
        let verdict = self.evaluate(voter, &payload);
        if verdict.is_admitted() {
            self.apply_admitted(voter, &payload);
            self.pending_admitted += 1;
        }
        self.pending.push(Record::Entry(Entry {
            height: self.height,
            round: self.round,
            voter,
            phase: payload.phase(),
            payload,
            verdict,
        }));
        if let Some(k) = self.auto_seal {
            if self.pending_admitted >= k {
                self.advance_block();
            }
        }
        verdict
    }

    /// Seals pending records into a block and advances the height clock.
    pub fn advance_block(&mut self) -> u64 {
        let prev = self.blocks.last().map(|b| b.digest).unwrap_or(self.genesis);
        let records = std::mem::take(&mut self.pending);
        let digest = seal_digest(&self.group, &prev, &records);
        self.height += 1;
        self.blocks.push(Block {
            height: self.height,
            records,
            prev_digest: prev,
            digest,
        });
        self.pending_admitted = 0;
        self.height
    }

    pub fn advance_to(&mut self, height: u64) {
        while self.height < height {
            self.advance_block();
        }
    }

    /// Opens a new commit round without the voters that missed the current
    /// one, shifting the commit/vote/recover deadlines by one commit-window
    /// length. Only legal exactly at the commit deadline with at least one
    /// missing commit.
    pub fn restart_commit(&mut self) -> Result<Replan, BoardError> {
        let replan = self.restart_commit_inner()?;
        self.pending.push(Record::Replan(replan.clone()));
        Ok(replan)
    }

    fn restart_commit_inner(&mut self) -> Result<Replan, BoardError> {
        if self.height != self.plan.commit_end {
            return Err(BoardError::RestartNotAllowed(format!(
                "height {} is not the commit deadline {}",
                self.height, self.plan.commit_end
            )));
        }
        let committed: BTreeSet<u32> = self.current_commits().keys().copied().collect();
        let missing: Vec<u32> = self
            .active_roster()
            .indices()
            .filter(|i| !committed.contains(i))
            .collect();
        if missing.is_empty() {
            return Err(BoardError::RestartNotAllowed(
                "no registered voter is missing a commit".into(),
            ));
        }
        let commit_len = self.plan.commit_end - self.commit_start;
        self.commit_start = self.height;
        self.plan.commit_end += commit_len;
        self.plan.vote_end += commit_len;
        self.plan.recover_end += commit_len;
        self.round += 1;
        self.removed.extend(missing.iter().copied());
        Ok(Replan {
            height: self.height,
            round: self.round,
            removed: missing,
            plan: self.plan,
        })
    }

    /// Re-verifies every admitted entry's proof against the final board
    /// state, trusting nothing from admission time. Returns the (voter,
    /// phase) pairs whose stored payloads no longer verify.
    pub fn reverify_admitted(&self) -> Vec<(u32, PhaseTag)> {
        let mut bad = Vec::new();
        for (i, m) in &self.registered {
            if !schnorr_verify(
                &self.group,
                &m.y,
                &m.proof,
                &self.ctx(*i, PhaseTag::Register),
            ) {
                bad.push((*i, PhaseTag::Register));
            }
        }
        let roster = self.active_roster();
        let commits = self.current_commits();
        for (i, m) in commits {
            let ok = roster
                .aggregate_y(&self.group, *i)
                .map(|big_y| {
                    let stmt = CommitStatement {
                        big_y,
                        beta: m.beta.clone(),
                        c: m.c.clone(),
                    };
                    commit_or_verify(
                        &self.group,
                        &stmt,
                        &m.proof,
                        &self.ctx(*i, PhaseTag::Commit),
                    )
                })
                .unwrap_or(false);
            if !ok {
                bad.push((*i, PhaseTag::Commit));
            }
        }
        for (i, m) in &self.votes {
            let ok = (|| {
                let commit = commits.get(i)?;
                let big_y = roster.aggregate_y(&self.group, *i).ok()?;
                let h = roster.mask_h(&self.group, *i).ok()?;
                let stmt = VoteStatement {
                    big_y,
                    h,
                    beta: commit.beta.clone(),
                    y: roster.key(*i)?.clone(),
                    c: commit.c.clone(),
                    v: m.ballot.clone(),
                };
                Some(vote_or_verify(
                    &self.group,
                    &stmt,
                    &m.proof,
                    &self.ctx(*i, PhaseTag::Vote),
                ))
            })()
            .unwrap_or(false);
            if !ok {
                bad.push((*i, PhaseTag::Vote));
            }
        }
        let aborted = self.abort_set();
        for (j, m) in &self.recoveries {
            let ok = (|| {
                let y_j = roster.key(*j)?.clone();
                let ctx = self.ctx(*j, PhaseTag::Recover);
                for share in &m.shares {
                    let cm = commits.get(&share.aborter)?;
                    let stmt = EqDlogStatement {
                        g1: self.group.generator(),
                        y1: y_j.clone(),
                        g2: cm.beta.clone(),
                        y2: share.factor.clone(),
                    };
                    if !eqdlog_verify(&self.group, &stmt, &share.proof, &ctx) {
                        return Some(false);
                    }
                }
                let base = roster.correction_base(&self.group, &aborted, *j).ok()?;
                let stmt = EqDlogStatement {
                    g1: self.group.generator(),
                    y1: y_j,
                    g2: base,
                    y2: m.correction.clone(),
                };
                Some(eqdlog_verify(&self.group, &stmt, &m.correction_proof, &ctx))
            })()
            .unwrap_or(false);
            if !ok {
                bad.push((*j, PhaseTag::Recover));
            }
        }
        bad
    }

    /// Admitted entries of one phase, in chain order.
    pub fn read(&self, phase: PhaseTag) -> Vec<&Entry> {
        self.records()
            .filter_map(|r| match r {
                Record::Entry(e) if e.phase == phase && e.verdict.is_admitted() => Some(e),
                _ => None,
            })
            .collect()
    }

    /// All records in chain order, sealed then pending.
    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.blocks
            .iter()
            .flat_map(|b| &b.records)
            .chain(self.pending.iter())
    }
}

// ---------------------------------------------------------------------------
// Final tally derivation from board state
// ---------------------------------------------------------------------------

/// Outcome of reading the sealed board: the tally plus recovery bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyOutcome {
    pub result: TallyResult,
    /// Voters that committed but never cast an admitted ballot.
    pub aborted: Vec<u32>,
    /// Aborters whose committed vote could not be opened (multi-abort cross
    /// terms); their votes are excluded from `result.count`.
    pub unrecoverable: Vec<u32>,
}

/// Computes the election outcome from admitted entries only. With an empty
/// abort set this is the plain open tally; otherwise the recovery math runs
/// over the posted shares and corrections.
pub fn conclude_tally(board: &Board) -> Result<TallyOutcome, ProtocolError> {
    let group = board.group();
    let commits = board.current_commits().clone();
    let active = board.active_roster();
    let committed_roster = Roster::new(
        commits
            .keys()
            .filter_map(|i| active.key(*i).map(|y| (*i, y.clone())))
            .collect(),
    );
    let ballots: BTreeMap<u32, GroupElement> = board
        .admitted_votes()
        .iter()
        .map(|(i, m)| (*i, m.ballot.clone()))
        .collect();
    let aborted: Vec<u32> = board.abort_set().into_iter().collect();

    if aborted.is_empty() {
        let result = tally(group, &committed_roster, &ballots)?;
        return Ok(TallyOutcome {
            result,
            aborted,
            unrecoverable: Vec::new(),
        });
    }

    let mut corrections = BTreeMap::new();
    let mut factors: BTreeMap<u32, BTreeMap<u32, GroupElement>> = BTreeMap::new();
    for (j, msg) in board.admitted_recoveries() {
        corrections.insert(*j, msg.correction.clone());
        for share in &msg.shares {
            factors
                .entry(share.aborter)
                .or_default()
                .insert(*j, share.factor.clone());
        }
    }
    let expected: BTreeSet<u32> = active.indices().collect();
    let empty = BTreeMap::new();
    let mut recovered = BTreeMap::new();
    let mut unrecoverable = Vec::new();
    for &i in &aborted {
        let c_i = commits.get(&i).expect("aborted voters committed").c.clone();
        match recover_vote(group, i, &c_i, factors.get(&i).unwrap_or(&empty), &expected) {
            Ok(v) => {
                recovered.insert(i, v);
            }
            Err(ProtocolError::MissingShare { .. }) if aborted.len() > 1 => {
                // cross terms between two aborters are computable by nobody
                unrecoverable.push(i);
            }
            Err(e) => return Err(e),
        }
    }
    let result = recover_tally(group, &ballots, &corrections, &recovered)?;
    Ok(TallyOutcome {
        result,
        aborted,
        unrecoverable,
    })
}

// ---------------------------------------------------------------------------
// Transcript serialization (JSON Lines) and the independent auditor
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum TranscriptLine {
    Header {
        format: String,
        election_id: String,
        n: u32,
        group: GroupDescriptor,
        plan: PhasePlan,
        genesis: String,
    },
    Entry {
        height: u64,
        round: u32,
        voter: u32,
        phase: PhaseTag,
        payload: Payload,
        verdict: Verdict,
    },
    Replan {
        height: u64,
        round: u32,
        removed: Vec<u32>,
        plan: PhasePlan,
    },
    Seal {
        height: u64,
        prev: String,
        digest: String,
    },
}

impl Board {
    /// Serializes the sealed chain as JSON Lines: a header, then entries,
    /// restart markers, and block seals in chain order. Payload fields are
    /// hex; field order is fixed, so digests reproduce bit-exactly from the
    /// transcript alone.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = TranscriptLine::Header {
            format: "ST/v1".to_string(),
            election_id: hex::encode(&self.election_id),
            n: self.n,
            group: self.group.descriptor(),
            plan: self.first_plan,
            genesis: hex::encode(self.genesis),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for block in &self.blocks {
            for record in &block.records {
                let line = match record {
                    Record::Entry(e) => TranscriptLine::Entry {
                        height: e.height,
                        round: e.round,
                        voter: e.voter,
                        phase: e.phase,
                        payload: e.payload.clone(),
                        verdict: e.verdict,
                    },
                    Record::Replan(r) => TranscriptLine::Replan {
                        height: r.height,
                        round: r.round,
                        removed: r.removed.clone(),
                        plan: r.plan,
                    },
                };
                out.push_str(&serde_json::to_string(&line).expect("record serializes"));
                out.push('\n');
            }
            let seal = TranscriptLine::Seal {
                height: block.height,
                prev: hex::encode(block.prev_digest),
                digest: hex::encode(block.digest),
            };
            out.push_str(&serde_json::to_string(&seal).expect("seal serializes"));
            out.push('\n');
        }
        out
    }
}

/// Per-entry audit mismatch.
#[derive(Debug, Clone, Serialize)]
pub struct EntryAudit {
    pub height: u64,
    pub voter: u32,
    pub phase: PhaseTag,
    pub recorded: String,
    pub recomputed: String,
}

/// Result of an independent transcript audit.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    /// True iff the chain verifies and every recorded verdict matches the
    /// recomputed one.
    pub ok: bool,
    pub chain_ok: bool,
    pub n_entries: usize,
    pub n_blocks: usize,
    pub flagged: Vec<EntryAudit>,
    pub problems: Vec<String>,
    /// Independently recomputed outcome, when the admitted entries reach a
    /// tallyable state.
    pub outcome: Option<TallyOutcome>,
}

/// Replays a JSON Lines transcript from scratch: rebuilds the chain,
/// recomputes every digest, re-runs every admission decision (windows,
/// duplicates, proofs), compares against the recorded verdicts, and
/// recomputes the tally. An empty transcript audits clean with zero
/// entries. Unparseable input is an error; a parseable transcript that
/// fails its checks comes back with `ok == false` and the findings listed.
pub fn audit(jsonl: &str) -> Result<AuditReport, BoardError> {
    let mut report = AuditReport {
        ok: true,
        chain_ok: true,
        n_entries: 0,
        n_blocks: 0,
        flagged: Vec::new(),
        problems: Vec::new(),
        outcome: None,
    };
    let mut lines = jsonl
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .peekable();
    if lines.peek().is_none() {
        return Ok(report);
    }
    let header: TranscriptLine = serde_json::from_str(lines.next().unwrap())
        .map_err(|e| BoardError::MalformedTranscript(format!("header: {e}")))?;
    let TranscriptLine::Header {
        format,
        election_id,
        n,
        group,
        plan,
        genesis,
    } = header
    else {
        return Err(BoardError::MalformedTranscript(
            "first line is not a header".into(),
        ));
    };
    if format != "ST/v1" {
        return Err(BoardError::MalformedTranscript(format!(
            "unsupported format {format:?}"
        )));
    }
    let group = Group::from_descriptor(&group)
        .map_err(|e| BoardError::MalformedTranscript(format!("group: {e}")))?;
    let election_id = hex::decode(&election_id)
        .map_err(|e| BoardError::MalformedTranscript(format!("election id: {e}")))?;
    let mut shadow = Board::new(group, &election_id, n, plan, None)?;
    if hex::encode(shadow.genesis) != genesis {
        report.chain_ok = false;
        report.ok = false;
        report
            .problems
            .push("genesis digest does not match the election parameters".into());
    }

    for line in lines {
        let parsed: TranscriptLine = serde_json::from_str(line)
            .map_err(|e| BoardError::MalformedTranscript(format!("line: {e}")))?;
        match parsed {
            TranscriptLine::Header { .. } => {
                return Err(BoardError::MalformedTranscript("duplicate header".into()));
            }
            TranscriptLine::Entry {
                height,
                round,
                voter,
                phase,
                payload,
                verdict,
            } => {
                report.n_entries += 1;
                if height != shadow.current_height() || round != shadow.current_round() {
                    report.chain_ok = false;
                    report.ok = false;
                    report.problems.push(format!(
                        "entry for voter {voter} recorded at height {height} round {round}, \
                         chain is at {} round {}",
                        shadow.current_height(),
                        shadow.current_round()
                    ));
                }
                if payload.phase() != phase {
                    report.ok = false;
                    report
                        .problems
                        .push(format!("entry for voter {voter} mislabels its phase"));
                }
                let recomputed = shadow.evaluate(voter, &payload);
                if recomputed.is_admitted() {
                    shadow.apply_admitted(voter, &payload);
                }
                if recomputed != verdict {
                    report.ok = false;
                    report.flagged.push(EntryAudit {
                        height,
                        voter,
                        phase,
                        recorded: verdict.label(),
                        recomputed: recomputed.label(),
                    });
                }
                // chain the entry exactly as recorded, so the digest check
                // sees the transcript as written
                shadow.pending.push(Record::Entry(Entry {
                    height,
                    round,
                    voter,
                    phase,
                    payload,
                    verdict,
                }));
            }
            TranscriptLine::Replan {
                height,
                round,
                removed,
                plan,
            } => {
                match shadow.restart_commit_inner() {
                    Ok(replan) => {
                        if replan.height != height
                            || replan.round != round
                            || replan.removed != removed
                            || replan.plan != plan
                        {
                            report.ok = false;
                            report.problems.push(format!(
                                "restart record at height {height} does not match the replay"
                            ));
                        }
                    }
                    Err(e) => {
                        report.ok = false;
                        report
                            .problems
                            .push(format!("restart record at height {height} is illegal: {e}"));
                    }
                }
                shadow.pending.push(Record::Replan(Replan {
                    height,
                    round,
                    removed,
                    plan,
                }));
            }
            TranscriptLine::Seal {
                height,
                prev,
                digest,
            } => {
                let expected_prev = shadow
                    .blocks
                    .last()
                    .map(|b| b.digest)
                    .unwrap_or(shadow.genesis);
                let new_height = shadow.advance_block();
                let block = shadow.blocks.last().expect("just sealed");
                if new_height != height
                    || hex::encode(expected_prev) != prev
                    || hex::encode(block.digest) != digest
                {
                    report.chain_ok = false;
                    report.ok = false;
                    report
                        .problems
                        .push(format!("block {height}: digest chain mismatch"));
                }
                report.n_blocks += 1;
            }
        }
    }
    if !shadow.pending.is_empty() {
        report.chain_ok = false;
        report.ok = false;
        report
            .problems
            .push("transcript ends with unsealed records".into());
    }

    match conclude_tally(&shadow) {
        Ok(outcome) => report.outcome = Some(outcome),
        Err(e) => {
            if report.n_entries > 0 {
                report.ok = false;
                report.problems.push(format!("tally not recomputable: {e}"));
            }
        }
    }
    Ok(report)
}
