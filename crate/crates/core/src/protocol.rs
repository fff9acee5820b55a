//! The five-phase voter protocol: key setup, vote commitment, ballot
//! casting, open tallying, and abort recovery.
//!
//! Per voter `i` with secret key `x_i` and nonce `rho_i`:
//!
//! * register  - publish `y_i = g^x_i` with a knowledge proof;
//! * commit    - publish `beta_i = g^rho_i` and `C_i = g^v_i * Y_i^rho_i`
//!   where `Y_i = prod_{j != i} y_j`, with an OR proof that `v_i` is a bit;
//! * vote      - publish `V_i = h_i^x_i * g^v_i` where
//!   `h_i = prod_{j<i} y_j / prod_{j>i} y_j`, with an OR proof binding the
//!   ballot bit to the committed bit;
//! * tally     - `prod_i V_i = g^(sum v_i)` because the masks telescope to
//!   the identity, and the exponent is found by baby-step giant-step;
//! * recover   - if a committed voter never casts a ballot, each remaining
//!   voter `j` publishes `R_ij = beta_i^x_j` (opening the aborter's
//!   commitment) and a correction `K_j = prod_{i in A} y_i^(s_ij * x_j)`
//!   with `s_ij = +1` if `j > i` else `-1`, so that
//!   `prod_{j not in A} V_j / prod K_j = g^(sum_{j not in A} v_j)`.
//!
//! Every published factor carries an equality-of-dlog proof tying it to the
//! sender's registered key, so recovery is publicly checkable.
//!
//! With several simultaneous aborters the cross terms `y_j^rho_i` for two
//! aborted voters `i != j` are computable by nobody, so those commitments
//! are reported unrecoverable and only the remaining voters' subtotal is
//! counted. The single-aborter case always recovers fully.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{Group, GroupElement, GroupError, Scalar};
use crate::sigma::{
    commit_for, commit_or_prove, eqdlog_prove, schnorr_prove, vote_or_prove, CommitOrProof,
    CommitStatement, EqDlogProof, EqDlogStatement, ProofContext, SchnorrProof, SigmaError,
    VoteOrProof, VoteStatement,
};

pub const PHASE_REGISTER: &str = "register";
pub const PHASE_COMMIT: &str = "commit";
pub const PHASE_VOTE: &str = "vote";
pub const PHASE_RECOVER: &str = "recover";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("operation requires phase {expected:?}, voter is in {actual:?}")]
    WrongPhase {
        expected: VoterPhase,
        actual: VoterPhase,
    },
    #[error("index {0} is not in the roster")]
    IndexOutOfRoster(u32),
    #[error("missing ballots from voters {0:?}")]
    MissingBallot(Vec<u32>),
    #[error("no exponent in range produces the tally residue")]
    DlogNotFound,
    #[error("abort set of {aborted} leaves fewer than two voters out of {n}")]
    AbortSetTooLarge { aborted: usize, n: usize },
    #[error("missing recovery share for aborter {aborter} from voter {from}")]
    MissingShare { aborter: u32, from: u32 },
    #[error("commitment residue is neither identity nor g")]
    NotBinaryResidue,
    #[error("missing tally correction from voter {0}")]
    MissingCorrection(u32),
    #[error("vote must be 0 or 1, got {0}")]
    VoteOutOfRange(u8),
    #[error(transparent)]
    Proof(#[from] SigmaError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

impl ProtocolError {
    pub fn is_statement_mismatch(&self) -> bool {
        matches!(self, ProtocolError::Proof(SigmaError::StatementMismatch))
    }
}

// ---------------------------------------------------------------------------
// Board messages
// ---------------------------------------------------------------------------

/// Registration payload: public key plus knowledge proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationMsg {
    pub y: GroupElement,
    pub proof: SchnorrProof,
}

/// Commit payload: nonce commitment, vote commitment, OR validity proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitMsg {
    pub beta: GroupElement,
    pub c: GroupElement,
    pub proof: CommitOrProof,
}

/// Vote payload: encrypted ballot plus the commit-consistency OR proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteMsg {
    pub ballot: GroupElement,
    pub proof: VoteOrProof,
}

/// One recovery factor `R_ij = beta_i^x_j` with its equality proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryShare {
    pub aborter: u32,
    pub factor: GroupElement,
    pub proof: EqDlogProof,
}

/// Recovery payload from remaining voter `j`: one share per aborter plus the
/// tally correction `K_j` with its equality proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryMsg {
    pub aborted: Vec<u32>,
    pub shares: Vec<RecoveryShare>,
    pub correction: GroupElement,
    pub correction_proof: EqDlogProof,
}

impl RegistrationMsg {
    pub fn to_bytes(&self, group: &Group) -> Vec<u8> {
        let mut out = group.encode_element(&self.y);
        out.extend(self.proof.to_bytes(group));
        out
    }

    pub fn from_bytes(group: &Group, bytes: &[u8]) -> Result<Self, GroupError> {
        let ew = group.element_width();
        if bytes.len() < ew {
            return Err(GroupError::MalformedEncoding(
                "registration too short".into(),
            ));
        }
        Ok(RegistrationMsg {
            y: group.decode_element(&bytes[..ew])?,
            proof: SchnorrProof::from_bytes(group, &bytes[ew..])?,
        })
    }

    pub fn check(&self, group: &Group) -> Result<(), GroupError> {
        group.check_element(&self.y)?;
        self.proof.check(group)
    }
}

impl CommitMsg {
    pub fn to_bytes(&self, group: &Group) -> Vec<u8> {
        let mut out = group.encode_element(&self.beta);
        out.extend(group.encode_element(&self.c));
        out.extend(self.proof.to_bytes(group));
        out
    }

    pub fn from_bytes(group: &Group, bytes: &[u8]) -> Result<Self, GroupError> {
        let ew = group.element_width();
        if bytes.len() < 2 * ew {
            return Err(GroupError::MalformedEncoding("commit too short".into()));
        }
        Ok(CommitMsg {
            beta: group.decode_element(&bytes[..ew])?,
            c: group.decode_element(&bytes[ew..2 * ew])?,
            proof: CommitOrProof::from_bytes(group, &bytes[2 * ew..])?,
        })
    }

    pub fn check(&self, group: &Group) -> Result<(), GroupError> {
        group.check_element(&self.beta)?;
        group.check_element(&self.c)?;
        self.proof.check(group)
    }
}

impl VoteMsg {
    pub fn to_bytes(&self, group: &Group) -> Vec<u8> {
        let mut out = group.encode_element(&self.ballot);
        out.extend(self.proof.to_bytes(group));
        out
    }

    pub fn from_bytes(group: &Group, bytes: &[u8]) -> Result<Self, GroupError> {
        let ew = group.element_width();
        if bytes.len() < ew {
            return Err(GroupError::MalformedEncoding("vote too short".into()));
        }
        Ok(VoteMsg {
            ballot: group.decode_element(&bytes[..ew])?,
            proof: VoteOrProof::from_bytes(group, &bytes[ew..])?,
        })
    }

    pub fn check(&self, group: &Group) -> Result<(), GroupError> {
        group.check_element(&self.ballot)?;
        self.proof.check(group)
    }
}

impl RecoveryMsg {
    pub fn to_bytes(&self, group: &Group) -> Vec<u8> {
        let mut out = (self.aborted.len() as u32).to_be_bytes().to_vec();
        for i in &self.aborted {
            out.extend(i.to_be_bytes());
        }
        for s in &self.shares {
            out.extend(s.aborter.to_be_bytes());
            out.extend(group.encode_element(&s.factor));
            out.extend(s.proof.to_bytes(group));
        }
        out.extend(group.encode_element(&self.correction));
        out.extend(self.correction_proof.to_bytes(group));
        out
    }

    pub fn from_bytes(group: &Group, bytes: &[u8]) -> Result<Self, GroupError> {
        let (ew, sw) = (group.element_width(), group.scalar_width());
        let eq_len = 2 * ew + 2 * sw;
        let short = || GroupError::MalformedEncoding("recovery message too short".into());
        let mut at = 0usize;
        let mut take = |n: usize| -> Result<&[u8], GroupError> {
            if at + n > bytes.len() {
                return Err(short());
            }
            let s = &bytes[at..at + n];
            at += n;
            Ok(s)
        };
        let count = u32::from_be_bytes(take(4)?.try_into().unwrap()) as usize;
        if count > 4096 {
            return Err(GroupError::MalformedEncoding("absurd abort count".into()));
        }
        let mut aborted = Vec::with_capacity(count);
        for _ in 0..count {
            aborted.push(u32::from_be_bytes(take(4)?.try_into().unwrap()));
        }
        let mut shares = Vec::with_capacity(count);
        for _ in 0..count {
            let aborter = u32::from_be_bytes(take(4)?.try_into().unwrap());
            let factor = group.decode_element(take(ew)?)?;
            let proof = EqDlogProof::from_bytes(group, take(eq_len)?)?;
            shares.push(RecoveryShare {
                aborter,
                factor,
                proof,
            });
        }
        let correction = group.decode_element(take(ew)?)?;
        let correction_proof = EqDlogProof::from_bytes(group, take(eq_len)?)?;
        if at != bytes.len() {
            return Err(GroupError::MalformedEncoding("trailing bytes".into()));
        }
        Ok(RecoveryMsg {
            aborted,
            shares,
            correction,
            correction_proof,
        })
    }

    pub fn check(&self, group: &Group) -> Result<(), GroupError> {
        for s in &self.shares {
            group.check_element(&s.factor)?;
            s.proof.check(group)?;
        }
        group.check_element(&self.correction)?;
        self.correction_proof.check(group)
    }
}

// ---------------------------------------------------------------------------
// Roster and aggregate keys
// ---------------------------------------------------------------------------

/// Ordered list of registered public keys. Indices are strictly increasing;
/// in an undisturbed election they are contiguous `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster {
    entries: Vec<(u32, GroupElement)>,
}

impl Roster {
    pub fn new(mut entries: Vec<(u32, GroupElement)>) -> Self {
        entries.sort_by_key(|(i, _)| *i);
        entries.dedup_by_key(|(i, _)| *i);
        Roster { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|(i, _)| *i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(u32, GroupElement)> {
        self.entries.iter()
    }

    pub fn key(&self, index: u32) -> Option<&GroupElement> {
        self.entries
            .iter()
            .find(|(i, _)| *i == index)
            .map(|(_, y)| y)
    }

    pub fn contains(&self, index: u32) -> bool {
        self.key(index).is_some()
    }

    /// Removes voters, e.g. when a commit round restarts without them.
    pub fn without(&self, removed: &BTreeSet<u32>) -> Roster {
        Roster {
            entries: self
                .entries
                .iter()
                .filter(|(i, _)| !removed.contains(i))
                .cloned()
                .collect(),
        }
    }

    /// `Y_i = prod_{j != i} y_j`, the aggregate key voter `i` commits under.
    pub fn aggregate_y(&self, group: &Group, index: u32) -> Result<GroupElement, ProtocolError> {
        if !self.contains(index) {
            return Err(ProtocolError::IndexOutOfRoster(index));
        }
        let mut acc = group.identity();
        for (j, y) in &self.entries {
            if *j != index {
                acc = group.mul(&acc, y);
            }
        }
        Ok(acc)
    }

    /// `h_i = prod_{j < i} y_j / prod_{j > i} y_j`, the ballot mask. The
    /// masks telescope: `prod_i h_i^x_i = 1`.
    pub fn mask_h(&self, group: &Group, index: u32) -> Result<GroupElement, ProtocolError> {
        if !self.contains(index) {
            return Err(ProtocolError::IndexOutOfRoster(index));
        }
        let mut num = group.identity();
        let mut den = group.identity();
        for (j, y) in &self.entries {
            if *j < index {
                num = group.mul(&num, y);
            } else if *j > index {
                den = group.mul(&den, y);
            }
        }
        Ok(group.div(&num, &den))
    }

    /// `B_j = prod_{i in A} y_i^(s_ij)` with `s_ij = +1` if `j > i` else
    /// `-1`: the public base of voter `j`'s tally correction `K_j = B_j^x_j`.
    pub fn correction_base(
        &self,
        group: &Group,
        aborted: &BTreeSet<u32>,
        j: u32,
    ) -> Result<GroupElement, ProtocolError> {
        let mut num = group.identity();
        let mut den = group.identity();
        for i in aborted {
            let y = self.key(*i).ok_or(ProtocolError::IndexOutOfRoster(*i))?;
            if j > *i {
                num = group.mul(&num, y);
            } else {
                den = group.mul(&den, y);
            }
        }
        Ok(group.div(&num, &den))
    }
}

// ---------------------------------------------------------------------------
// Voter state machine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoterPhase {
    Fresh,
    Registered,
    Committed,
    Voted,
    Done,
}

/// One voter's secrets and protocol position. Secrets never leave this
/// struct except inside zero-knowledge proofs; it is deliberately not
/// serializable.
#[derive(Debug, Clone)]
pub struct VoterState {
    index: u32,
    vote: u8,
    x: Scalar,
    rho: Option<Scalar>,
    // the published commitment pair; cast_vote proves against these, not a
    // recomputation, so a changed intent surfaces as StatementMismatch
    committed: Option<(GroupElement, GroupElement)>,
    phase: VoterPhase,
}

impl VoterState {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn vote(&self) -> u8 {
        self.vote
    }

    pub fn phase(&self) -> VoterPhase {
        self.phase
    }

    /// The secret key, for test oracles and misbehavior simulation only.
    pub fn secret_key(&self) -> &Scalar {
        &self.x
    }

    /// The commitment nonce, once committed. Same caveat as `secret_key`.
    pub fn commit_nonce(&self) -> Option<&Scalar> {
        self.rho.as_ref()
    }

    /// The published `(beta, C)` pair, once committed.
    pub fn committed_pair(&self) -> Option<(GroupElement, GroupElement)> {
        self.committed.clone()
    }

    /// Misbehavior injection for scenario simulation: changes the intent
    /// after the fact. The honest prover will refuse to prove a ballot
    /// that contradicts an existing commitment.
    pub fn override_vote(&mut self, vote: u8) {
        self.vote = vote;
    }

    pub fn mark_done(&mut self) {
        self.phase = VoterPhase::Done;
    }

    /// Commit-round restart: the voter keeps its key but discards the
    /// commitment nonce and returns to `Registered`.
    pub fn reset_for_new_commit_round(&mut self) {
        self.rho = None;
        self.committed = None;
        if matches!(self.phase, VoterPhase::Committed | VoterPhase::Voted) {
            self.phase = VoterPhase::Registered;
        }
    }

    fn expect_phase(&self, expected: VoterPhase) -> Result<(), ProtocolError> {
        if self.phase != expected {
            return Err(ProtocolError::WrongPhase {
                expected,
                actual: self.phase,
            });
        }
        Ok(())
    }
}

/// Key setup: draws `x_i` from `Z_q^*`, publishes `y_i = g^x_i` with a
/// knowledge proof bound to this election, voter, and phase.
pub fn keygen(
    group: &Group,
    index: u32,
    vote: u8,
    election_id: &[u8],
    rng: &mut dyn RngCore,
) -> Result<(VoterState, RegistrationMsg), ProtocolError> {
    if vote > 1 {
        return Err(ProtocolError::VoteOutOfRange(vote));
    }
    let x = group.random_nonzero_scalar(rng);
    let y = group.g_pow(&x);
    let ctx = ProofContext::new(election_id, index, PHASE_REGISTER);
    let proof = schnorr_prove(group, &x, &y, &ctx, rng)?;
    Ok((
        VoterState {
            index,
            vote,
            x,
            rho: None,
            committed: None,
            phase: VoterPhase::Registered,
        },
        RegistrationMsg { y, proof },
    ))
}

/// Commit phase: `beta_i = g^rho_i`, `C_i = g^v_i * Y_i^rho_i`, with the OR
/// proof that the committed bit is 0 or 1. Transitions Registered ->
/// Committed.
pub fn commit(
    state: &mut VoterState,
    group: &Group,
    big_y: &GroupElement,
    election_id: &[u8],
    rng: &mut dyn RngCore,
) -> Result<CommitMsg, ProtocolError> {
    state.expect_phase(VoterPhase::Registered)?;
    let rho = group.random_scalar(rng);
    let beta = group.g_pow(&rho);
    let c = commit_for(group, big_y, &rho, state.vote);
    let stmt = CommitStatement {
        big_y: big_y.clone(),
        beta: beta.clone(),
        c: c.clone(),
    };
    let ctx = ProofContext::new(election_id, state.index, PHASE_COMMIT);
    let proof = commit_or_prove(group, &rho, state.vote, &stmt, &ctx, rng)?;
    state.rho = Some(rho);
    state.committed = Some((beta.clone(), c.clone()));
    state.phase = VoterPhase::Committed;
    Ok(CommitMsg { beta, c, proof })
}

/// Vote phase: `V_i = h_i^x_i * g^v_i` with the OR proof binding the ballot
/// bit to the committed bit. Transitions Committed -> Voted.
pub fn cast_vote(
    state: &mut VoterState,
    group: &Group,
    big_y: &GroupElement,
    h: &GroupElement,
    election_id: &[u8],
    rng: &mut dyn RngCore,
) -> Result<VoteMsg, ProtocolError> {
    state.expect_phase(VoterPhase::Committed)?;
    let rho = state.rho.clone().expect("committed state holds rho");
    let (beta, c) = state.committed.clone().expect("committed state holds C");
    let masked = group.exp(h, &state.x);
    let ballot = if state.vote == 0 {
        masked
    } else {
        group.mul(&group.generator(), &masked)
    };
    let stmt = VoteStatement {
        big_y: big_y.clone(),
        h: h.clone(),
        beta,
        y: group.g_pow(&state.x),
        c,
        v: ballot.clone(),
    };
    let ctx = ProofContext::new(election_id, state.index, PHASE_VOTE);
    let proof = vote_or_prove(group, &state.x, &rho, state.vote, &stmt, &ctx, rng)?;
    state.phase = VoterPhase::Voted;
    Ok(VoteMsg { ballot, proof })
}

/// Recovery phase, run by a remaining voter `j`: for every aborter `i`,
/// `R_ij = beta_i^x_j` with a proof that `log_g y_j = log_{beta_i} R_ij`,
/// plus the tally correction `K_j = B_j^x_j` with the analogous proof.
pub fn recovery_share(
    state: &VoterState,
    group: &Group,
    aborted: &BTreeSet<u32>,
    roster: &Roster,
    betas: &BTreeMap<u32, GroupElement>,
    election_id: &[u8],
    rng: &mut dyn RngCore,
) -> Result<RecoveryMsg, ProtocolError> {
    state.expect_phase(VoterPhase::Voted)?;
    if aborted.contains(&state.index) {
        return Err(ProtocolError::WrongPhase {
            expected: VoterPhase::Voted,
            actual: state.phase,
        });
    }
    if aborted.len() + 2 > roster.len() {
        return Err(ProtocolError::AbortSetTooLarge {
            aborted: aborted.len(),
            n: roster.len(),
        });
    }
    let y_j = group.g_pow(&state.x);
    let ctx = ProofContext::new(election_id, state.index, PHASE_RECOVER);
    let mut shares = Vec::new();
    for &i in aborted {
        let beta = betas
            .get(&i)
            .ok_or(ProtocolError::MissingShare {
                aborter: i,
                from: state.index,
            })?
            .clone();
        let factor = group.exp(&beta, &state.x);
        let stmt = EqDlogStatement {
            g1: group.generator(),
            y1: y_j.clone(),
            g2: beta,
            y2: factor.clone(),
        };
        let proof = eqdlog_prove(group, &state.x, &stmt, &ctx, rng)?;
        shares.push(RecoveryShare {
            aborter: i,
            factor,
            proof,
        });
    }
    let base = roster.correction_base(group, aborted, state.index)?;
    let correction = group.exp(&base, &state.x);
    let stmt = EqDlogStatement {
        g1: group.generator(),
        y1: y_j,
        g2: base,
        y2: correction.clone(),
    };
    let correction_proof = eqdlog_prove(group, &state.x, &stmt, &ctx, rng)?;
    Ok(RecoveryMsg {
        aborted: aborted.iter().copied().collect(),
        shares,
        correction,
        correction_proof,
    })
}

// ---------------------------------------------------------------------------
// Tallying
// ---------------------------------------------------------------------------

/// An audited election outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    /// Total yes votes over the counted voters.
    pub count: u64,
    /// Number of voters whose votes entered the count.
    pub n_counted: u32,
    /// Votes opened from aborters' commitments, by voter index.
    pub recovered_votes: BTreeMap<u32, u8>,
}

/// Open tally over a complete ballot set: `prod_i V_i = g^(sum v_i)`.
/// Ballots must already be proof-verified; absentees are reported so the
/// caller can start recovery.
pub fn tally(
    group: &Group,
    roster: &Roster,
    ballots: &BTreeMap<u32, GroupElement>,
) -> Result<TallyResult, ProtocolError> {
    let absent: Vec<u32> = roster
        .indices()
        .filter(|i| !ballots.contains_key(i))
        .collect();
    if !absent.is_empty() {
        return Err(ProtocolError::MissingBallot(absent));
    }
    if let Some(stranger) = ballots.keys().find(|i| !roster.contains(**i)) {
        return Err(ProtocolError::IndexOutOfRoster(*stranger));
    }
    let mut product = group.identity();
    for v in ballots.values() {
        product = group.mul(&product, v);
    }
    let count = dlog_small(group, &product, ballots.len() as u64)?;
    Ok(TallyResult {
        count,
        n_counted: ballots.len() as u32,
        recovered_votes: BTreeMap::new(),
    })
}

/// Opens one aborter's commitment: `g^v_i = C_i / prod_j R_ij`, requiring a
/// factor from every other roster member. Returns the recovered bit.
pub fn recover_vote(
    group: &Group,
    aborter: u32,
    commitment: &GroupElement,
    factors: &BTreeMap<u32, GroupElement>,
    expected_from: &BTreeSet<u32>,
) -> Result<u8, ProtocolError> {
    for j in expected_from {
        if *j != aborter && !factors.contains_key(j) {
            return Err(ProtocolError::MissingShare { aborter, from: *j });
        }
    }
    let mut masks = group.identity();
    for (j, r) in factors {
        if *j != aborter {
            masks = group.mul(&masks, r);
        }
    }
    let residue = group.div(commitment, &masks);
    if residue.is_identity() {
        Ok(0)
    } else if residue == group.generator() {
        Ok(1)
    } else {
        Err(ProtocolError::NotBinaryResidue)
    }
}

/// Tally after recovery: the remaining voters' subtotal comes from
/// `prod_{j not in A} V_j / prod_{j not in A} K_j`, and each recovered vote
/// is added on top. Correct because `prod_{j not in A} h_j^x_j =
/// prod_{j not in A} K_j` once the full-roster telescoping is split over A.
pub fn recover_tally(
    group: &Group,
    ballots: &BTreeMap<u32, GroupElement>,
    corrections: &BTreeMap<u32, GroupElement>,
    recovered: &BTreeMap<u32, u8>,
) -> Result<TallyResult, ProtocolError> {
    for j in ballots.keys() {
        if !corrections.contains_key(j) {
            return Err(ProtocolError::MissingCorrection(*j));
        }
    }
    let mut product = group.identity();
    for v in ballots.values() {
        product = group.mul(&product, v);
    }
    for (j, k) in corrections {
        if ballots.contains_key(j) {
            product = group.div(&product, k);
        }
    }
    let subtotal = dlog_small(group, &product, ballots.len() as u64)?;
    let count = subtotal + recovered.values().map(|v| *v as u64).sum::<u64>();
    Ok(TallyResult {
        count,
        n_counted: (ballots.len() + recovered.len()) as u32,
        recovered_votes: recovered.clone(),
    })
}

/// Baby-step giant-step search for `m in [0, max]` with `g^m = target`.
/// O(sqrt(max)) time and memory.
pub fn dlog_small(group: &Group, target: &GroupElement, max: u64) -> Result<u64, ProtocolError> {
    let m = (max as f64).sqrt().ceil() as u64 + 1;
    let mut table: HashMap<Vec<u8>, u64> = HashMap::new();
    let mut baby = group.identity();
    let g = group.generator();
    for j in 0..m {
        table.entry(group.encode_element(&baby)).or_insert(j);
        baby = group.mul(&baby, &g);
    }
    // giant step factor g^-m by repeated multiplication of the cached
    // generator inverse: m is O(sqrt(max)), and plain multiplications skip
    // the fixed Montgomery setup cost a modpow would pay
    let g_inv = group.generator_inv();
    let mut giant = group.identity();
    for _ in 0..m {
        giant = group.mul(&giant, &g_inv);
    }
    let mut gamma = target.clone();
    let mut i = 0u64;
    while i * m <= max {
        if let Some(j) = table.get(&group.encode_element(&gamma)) {
            let candidate = i * m + j;
            if candidate <= max {
                return Ok(candidate);
            }
        }
        gamma = group.mul(&gamma, &giant);
        i += 1;
    }
    Err(ProtocolError::DlogNotFound)
}
