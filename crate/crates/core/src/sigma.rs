//! Σ-protocol toolkit: Schnorr knowledge-of-exponent, equality of discrete
//! logs, and the two OR-composed proof families used by the commit and vote
//! phases, all made non-interactive with the Fiat-Shamir transform.
//!
//! Challenge derivation is domain-separated and binds the full statement:
//! `e = H(tag, election_id, voter, phase, statement..., first messages...)`
//! with the per-family field orders listed below. Responses follow the
//! `r = w - x*e` convention, verified as `a = base^r * y^e`.
//!
//! Transcript field order per family (after the three context fields):
//! * `ST/v1/zkp1`   - `y, a`
//! * `ST/v1/eqdlog` - `g1, y1, g2, y2, a1, a2`
//! * `ST/v1/zkp2`   - `Y, beta, C, a1, b1, a2, b2`
//! * `ST/v1/zkp3`   - `Y, h, beta, y, C, V, a1, b1, c1, d1, a2, b2, c2, d2`
//!
//! In the OR families, serialized branch 1 carries the vote-0 relation
//! (`C = Y^rho`) and branch 2 the vote-1 relation (`C/g = Y^rho`); the real
//! branch is computed with a fresh nonce and the other branch is simulated
//! with random challenge and response, splitting `e = e1 + e2`.
//!
//! An interactive mode (externally supplied challenge) exists for the
//! special-soundness extractor and HVZK simulator harnesses; production
//! verification is always the non-interactive form.

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{Group, GroupElement, Scalar};

pub const TAG_SCHNORR: &str = "ST/v1/zkp1";
pub const TAG_COMMIT_OR: &str = "ST/v1/zkp2";
pub const TAG_VOTE_OR: &str = "ST/v1/zkp3";
pub const TAG_EQDLOG: &str = "ST/v1/eqdlog";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SigmaError {
    #[error("witness does not satisfy the claimed statement")]
    StatementMismatch,
    #[error("transcript pair does not admit extraction")]
    NotExtractable,
}

/// Binds every challenge to one election, voter, and protocol phase so a
/// proof cannot be replayed under another identity or phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofContext {
    pub election_id: Vec<u8>,
    pub voter: u32,
    pub phase_tag: String,
}

impl ProofContext {
    pub fn new(election_id: &[u8], voter: u32, phase_tag: &str) -> Self {
        ProofContext {
            election_id: election_id.to_vec(),
            voter,
            phase_tag: phase_tag.to_string(),
        }
    }

    fn fields(&self) -> Vec<Vec<u8>> {
        vec![
            self.election_id.clone(),
            self.voter.to_be_bytes().to_vec(),
            self.phase_tag.as_bytes().to_vec(),
        ]
    }
}

fn challenge(group: &Group, tag: &str, ctx: &ProofContext, parts: &[&GroupElement]) -> Scalar {
    let mut fields = ctx.fields();
    for p in parts {
        fields.push(group.encode_element(p));
    }
    let refs: Vec<&[u8]> = fields.iter().map(|f| f.as_slice()).collect();
    group.hash_to_challenge(tag, &refs)
}

// ---------------------------------------------------------------------------
// Schnorr proof of knowledge of x with y = g^x
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchnorrProof {
    pub a: GroupElement,
    pub e: Scalar,
    pub r: Scalar,
}

pub fn schnorr_prove(
    group: &Group,
    x: &Scalar,
    y: &GroupElement,
    ctx: &ProofContext,
    rng: &mut dyn RngCore,
) -> Result<SchnorrProof, SigmaError> {
    if group.g_pow(x) != *y {
        return Err(SigmaError::StatementMismatch);
    }
    let w = group.random_scalar(rng);
    let a = group.g_pow(&w);
    let e = challenge(group, TAG_SCHNORR, ctx, &[y, &a]);
    let r = group.scalar_sub(&w, &group.scalar_mul(x, &e));
    Ok(SchnorrProof { a, e, r })
}

pub fn schnorr_verify(
    group: &Group,
    y: &GroupElement,
    proof: &SchnorrProof,
    ctx: &ProofContext,
) -> bool {
    let e = challenge(group, TAG_SCHNORR, ctx, &[y, &proof.a]);
    e == proof.e && proof.a == group.mul(&group.g_pow(&proof.r), &group.exp(y, &proof.e))
}

impl SchnorrProof {
    pub fn to_bytes(&self, group: &Group) -> Vec<u8> {
        let mut out = group.encode_element(&self.a);
        out.extend(group.encode_scalar(&self.e));
        out.extend(group.encode_scalar(&self.r));
        out
    }

    pub fn from_bytes(group: &Group, bytes: &[u8]) -> Result<Self, crate::group::GroupError> {
        let (ew, sw) = (group.element_width(), group.scalar_width());
        if bytes.len() != ew + 2 * sw {
            return Err(crate::group::GroupError::MalformedEncoding(format!(
                "schnorr proof must be {} bytes",
                ew + 2 * sw
            )));
        }
        Ok(SchnorrProof {
            a: group.decode_element(&bytes[..ew])?,
            e: group.decode_scalar(&bytes[ew..ew + sw])?,
            r: group.decode_scalar(&bytes[ew + sw..])?,
        })
    }

    /// Revalidates subgroup membership / scalar range after a JSON decode.
    pub fn check(&self, group: &Group) -> Result<(), crate::group::GroupError> {
        group.check_element(&self.a)?;
        group.check_scalar(&self.e)?;
        group.check_scalar(&self.r)
    }
}

// ---------------------------------------------------------------------------
// Equality of discrete logs: y1 = g1^x and y2 = g2^x
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqDlogProof {
    pub a1: GroupElement,
    pub a2: GroupElement,
    pub e: Scalar,
    pub r: Scalar,
}

/// Statement for an equality-of-dlog proof; bundled because it recurs in
/// recovery-share verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqDlogStatement {
    pub g1: GroupElement,
    pub y1: GroupElement,
    pub g2: GroupElement,
    pub y2: GroupElement,
}

pub fn eqdlog_prove(
    group: &Group,
    x: &Scalar,
    stmt: &EqDlogStatement,
    ctx: &ProofContext,
    rng: &mut dyn RngCore,
) -> Result<EqDlogProof, SigmaError> {
    if group.exp(&stmt.g1, x) != stmt.y1 || group.exp(&stmt.g2, x) != stmt.y2 {
        return Err(SigmaError::StatementMismatch);
    }
    let w = group.random_scalar(rng);
    let a1 = group.exp(&stmt.g1, &w);
    let a2 = group.exp(&stmt.g2, &w);
    let e = challenge(
        group,
        TAG_EQDLOG,
        ctx,
        &[&stmt.g1, &stmt.y1, &stmt.g2, &stmt.y2, &a1, &a2],
    );
    let r = group.scalar_sub(&w, &group.scalar_mul(x, &e));
    Ok(EqDlogProof { a1, a2, e, r })
}

pub fn eqdlog_verify(
    group: &Group,
    stmt: &EqDlogStatement,
    proof: &EqDlogProof,
    ctx: &ProofContext,
) -> bool {
    let e = challenge(
        group,
        TAG_EQDLOG,
        ctx,
        &[&stmt.g1, &stmt.y1, &stmt.g2, &stmt.y2, &proof.a1, &proof.a2],
    );
    e == proof.e
        && proof.a1
            == group.mul(
                &group.exp(&stmt.g1, &proof.r),
                &group.exp(&stmt.y1, &proof.e),
            )
        && proof.a2
            == group.mul(
                &group.exp(&stmt.g2, &proof.r),
                &group.exp(&stmt.y2, &proof.e),
            )
}

impl EqDlogProof {
    pub fn to_bytes(&self, group: &Group) -> Vec<u8> {
        let mut out = group.encode_element(&self.a1);
        out.extend(group.encode_element(&self.a2));
        out.extend(group.encode_scalar(&self.e));
        out.extend(group.encode_scalar(&self.r));
        out
    }

    pub fn from_bytes(group: &Group, bytes: &[u8]) -> Result<Self, crate::group::GroupError> {
        let (ew, sw) = (group.element_width(), group.scalar_width());
        if bytes.len() != 2 * ew + 2 * sw {
            return Err(crate::group::GroupError::MalformedEncoding(format!(
                "eqdlog proof must be {} bytes",
                2 * ew + 2 * sw
            )));
        }
        Ok(EqDlogProof {
            a1: group.decode_element(&bytes[..ew])?,
            a2: group.decode_element(&bytes[ew..2 * ew])?,
            e: group.decode_scalar(&bytes[2 * ew..2 * ew + sw])?,
            r: group.decode_scalar(&bytes[2 * ew + sw..])?,
        })
    }

    pub fn check(&self, group: &Group) -> Result<(), crate::group::GroupError> {
        group.check_element(&self.a1)?;
        group.check_element(&self.a2)?;
        group.check_scalar(&self.e)?;
        group.check_scalar(&self.r)
    }
}

// ---------------------------------------------------------------------------
// Commit-phase OR proof: (C = Y^rho  OR  C/g = Y^rho)  AND  beta = g^rho
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitOrProof {
    pub a1: GroupElement,
    pub b1: GroupElement,
    pub a2: GroupElement,
    pub b2: GroupElement,
    pub e1: Scalar,
    pub e2: Scalar,
    pub r1: Scalar,
    pub r2: Scalar,
}

/// Statement for the commit-phase proof: aggregate key `Y`, nonce commitment
/// `beta = g^rho`, and vote commitment `C = g^v * Y^rho`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitStatement {
    pub big_y: GroupElement,
    pub beta: GroupElement,
    pub c: GroupElement,
}

fn commit_or_challenge(
    group: &Group,
    ctx: &ProofContext,
    stmt: &CommitStatement,
    a1: &GroupElement,
    b1: &GroupElement,
    a2: &GroupElement,
    b2: &GroupElement,
) -> Scalar {
    challenge(
        group,
        TAG_COMMIT_OR,
        ctx,
        &[&stmt.big_y, &stmt.beta, &stmt.c, a1, b1, a2, b2],
    )
}

/// CDS composition with `branch` treated as the real branch, skipping the
/// statement check. Exposed for soundness harnesses: when the branch's
/// relations do not actually hold, the verifier rejects the result.
pub fn commit_or_prove_forced(
    group: &Group,
    rho: &Scalar,
    branch: u8,
    stmt: &CommitStatement,
    ctx: &ProofContext,
    rng: &mut dyn RngCore,
) -> CommitOrProof {
    let w = group.random_scalar(rng);
    let a_real = group.exp(&stmt.big_y, &w);
    let b_real = group.g_pow(&w);

    let e_sim = group.random_scalar(rng);
    let r_sim = group.random_scalar(rng);
    let sim_bit = 1 - branch;
    // target of the simulated branch's commitment relation: C / g^bit
    let sim_target = if sim_bit == 0 {
        stmt.c.clone()
    } else {
        group.div_by_g(&stmt.c)
    };
    let a_sim = group.mul(
        &group.exp(&stmt.big_y, &r_sim),
        &group.exp(&sim_target, &e_sim),
    );
    let b_sim = group.mul(&group.g_pow(&r_sim), &group.exp(&stmt.beta, &e_sim));

    let (a1, b1, a2, b2) = if branch == 0 {
        (a_real, b_real, a_sim, b_sim)
    } else {
        (a_sim, b_sim, a_real, b_real)
    };
    let e = commit_or_challenge(group, ctx, stmt, &a1, &b1, &a2, &b2);
    let e_real = group.scalar_sub(&e, &e_sim);
    let r_real = group.scalar_sub(&w, &group.scalar_mul(rho, &e_real));

    if branch == 0 {
        CommitOrProof {
            a1,
            b1,
            a2,
            b2,
            e1: e_real,
            e2: e_sim,
            r1: r_real,
            r2: r_sim,
        }
    } else {
        CommitOrProof {
            a1,
            b1,
            a2,
            b2,
            e1: e_sim,
            e2: e_real,
            r1: r_sim,
            r2: r_real,
        }
    }
}

pub fn commit_or_prove(
    group: &Group,
    rho: &Scalar,
    vote: u8,
    stmt: &CommitStatement,
    ctx: &ProofContext,
    rng: &mut dyn RngCore,
) -> Result<CommitOrProof, SigmaError> {
    if vote > 1
        || group.g_pow(rho) != stmt.beta
        || commit_for(group, &stmt.big_y, rho, vote) != stmt.c
    {
        return Err(SigmaError::StatementMismatch);
    }
    Ok(commit_or_prove_forced(group, rho, vote, stmt, ctx, rng))
}

/// `g^v * Y^rho`, the commitment form shared by prover and tests.
pub fn commit_for(group: &Group, big_y: &GroupElement, rho: &Scalar, vote: u8) -> GroupElement {
    let masked = group.exp(big_y, rho);
    if vote == 0 {
        masked
    } else {
        group.mul(&group.generator(), &masked)
    }
}

pub fn commit_or_verify(
    group: &Group,
    stmt: &CommitStatement,
    proof: &CommitOrProof,
    ctx: &ProofContext,
) -> bool {
    let e = commit_or_challenge(group, ctx, stmt, &proof.a1, &proof.b1, &proof.a2, &proof.b2);
    if group.scalar_add(&proof.e1, &proof.e2) != e {
        return false;
    }
    commit_or_equations_hold(group, stmt, proof)
}

fn commit_or_equations_hold(group: &Group, stmt: &CommitStatement, p: &CommitOrProof) -> bool {
    let c_over_g = group.div_by_g(&stmt.c);
    p.a1 == group.mul(&group.exp(&stmt.big_y, &p.r1), &group.exp(&stmt.c, &p.e1))
        && p.b1 == group.mul(&group.g_pow(&p.r1), &group.exp(&stmt.beta, &p.e1))
        && p.a2 == group.mul(&group.exp(&stmt.big_y, &p.r2), &group.exp(&c_over_g, &p.e2))
        && p.b2 == group.mul(&group.g_pow(&p.r2), &group.exp(&stmt.beta, &p.e2))
}

impl CommitOrProof {
    pub fn to_bytes(&self, group: &Group) -> Vec<u8> {
        let mut out = Vec::new();
        for e in [&self.a1, &self.b1, &self.a2, &self.b2] {
            out.extend(group.encode_element(e));
        }
        for s in [&self.e1, &self.e2, &self.r1, &self.r2] {
            out.extend(group.encode_scalar(s));
        }
        out
    }

    pub fn from_bytes(group: &Group, bytes: &[u8]) -> Result<Self, crate::group::GroupError> {
        let (ew, sw) = (group.element_width(), group.scalar_width());
        if bytes.len() != 4 * ew + 4 * sw {
            return Err(crate::group::GroupError::MalformedEncoding(format!(
                "commit proof must be {} bytes",
                4 * ew + 4 * sw
            )));
        }
        let el = |i: usize| group.decode_element(&bytes[i * ew..(i + 1) * ew]);
        let sc = |i: usize| group.decode_scalar(&bytes[4 * ew + i * sw..4 * ew + (i + 1) * sw]);
        Ok(CommitOrProof {
            a1: el(0)?,
            b1: el(1)?,
            a2: el(2)?,
            b2: el(3)?,
            e1: sc(0)?,
            e2: sc(1)?,
            r1: sc(2)?,
            r2: sc(3)?,
        })
    }

    pub fn check(&self, group: &Group) -> Result<(), crate::group::GroupError> {
        for e in [&self.a1, &self.b1, &self.a2, &self.b2] {
            group.check_element(e)?;
        }
        for s in [&self.e1, &self.e2, &self.r1, &self.r2] {
            group.check_scalar(s)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Vote-phase OR proof: the ballot V encodes the same bit as the commitment C
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOrProof {
    pub a1: GroupElement,
    pub b1: GroupElement,
    pub c1: GroupElement,
    pub d1: GroupElement,
    pub a2: GroupElement,
    pub b2: GroupElement,
    pub c2: GroupElement,
    pub d2: GroupElement,
    pub e1: Scalar,
    pub e2: Scalar,
    /// x-relation response, vote-0 branch.
    pub r1: Scalar,
    /// rho-relation response, vote-0 branch.
    pub r2: Scalar,
    /// x-relation response, vote-1 branch.
    pub r3: Scalar,
    /// rho-relation response, vote-1 branch.
    pub r4: Scalar,
}

/// Statement for the vote-phase proof. Per branch bit `b`:
/// `C/g^b = Y^rho`, `V/g^b = h^x`, `y = g^x`, `beta = g^rho`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteStatement {
    pub big_y: GroupElement,
    pub h: GroupElement,
    pub beta: GroupElement,
    pub y: GroupElement,
    pub c: GroupElement,
    pub v: GroupElement,
}

fn vote_or_challenge(
    group: &Group,
    ctx: &ProofContext,
    stmt: &VoteStatement,
    firsts: &[&GroupElement; 8],
) -> Scalar {
    challenge(
        group,
        TAG_VOTE_OR,
        ctx,
        &[
            &stmt.big_y,
            &stmt.h,
            &stmt.beta,
            &stmt.y,
            &stmt.c,
            &stmt.v,
            firsts[0],
            firsts[1],
            firsts[2],
            firsts[3],
            firsts[4],
            firsts[5],
            firsts[6],
            firsts[7],
        ],
    )
}

/// CDS composition with `branch` forced as real; see
/// [`commit_or_prove_forced`] for intent.
pub fn vote_or_prove_forced(
    group: &Group,
    x: &Scalar,
    rho: &Scalar,
    branch: u8,
    stmt: &VoteStatement,
    ctx: &ProofContext,
    rng: &mut dyn RngCore,
) -> VoteOrProof {
    // real branch nonces: w drives the x-relations (b, c), gamma the
    // rho-relations (a, d)
    let w = group.random_scalar(rng);
    let gamma = group.random_scalar(rng);
    let a_real = group.exp(&stmt.big_y, &gamma);
    let b_real = group.exp(&stmt.h, &w);
    let c_real = group.g_pow(&w);
    let d_real = group.g_pow(&gamma);

    let e_sim = group.random_scalar(rng);
    let rx_sim = group.random_scalar(rng);
    let rr_sim = group.random_scalar(rng);
    let sim_bit = 1 - branch;
    let shift = |elem: &GroupElement| {
        if sim_bit == 0 {
            elem.clone()
        } else {
            group.div_by_g(elem)
        }
    };
    let a_sim = group.mul(
        &group.exp(&stmt.big_y, &rr_sim),
        &group.exp(&shift(&stmt.c), &e_sim),
    );
    let b_sim = group.mul(
        &group.exp(&stmt.h, &rx_sim),
        &group.exp(&shift(&stmt.v), &e_sim),
    );
    let c_sim = group.mul(&group.g_pow(&rx_sim), &group.exp(&stmt.y, &e_sim));
    let d_sim = group.mul(&group.g_pow(&rr_sim), &group.exp(&stmt.beta, &e_sim));

    let firsts: [&GroupElement; 8] = if branch == 0 {
        [
            &a_real, &b_real, &c_real, &d_real, &a_sim, &b_sim, &c_sim, &d_sim,
        ]
    } else {
        [
            &a_sim, &b_sim, &c_sim, &d_sim, &a_real, &b_real, &c_real, &d_real,
        ]
    };
    let e = vote_or_challenge(group, ctx, stmt, &firsts);
    let e_real = group.scalar_sub(&e, &e_sim);
    let rx_real = group.scalar_sub(&w, &group.scalar_mul(x, &e_real));
    let rr_real = group.scalar_sub(&gamma, &group.scalar_mul(rho, &e_real));

    if branch == 0 {
        VoteOrProof {
            a1: a_real,
            b1: b_real,
            c1: c_real,
            d1: d_real,
            a2: a_sim,
            b2: b_sim,
            c2: c_sim,
            d2: d_sim,
            e1: e_real,
            e2: e_sim,
            r1: rx_real,
            r2: rr_real,
            r3: rx_sim,
            r4: rr_sim,
        }
    } else {
        VoteOrProof {
            a1: a_sim,
            b1: b_sim,
            c1: c_sim,
            d1: d_sim,
            a2: a_real,
            b2: b_real,
            c2: c_real,
            d2: d_real,
            e1: e_sim,
            e2: e_real,
            r1: rx_sim,
            r2: rr_sim,
            r3: rx_real,
            r4: rr_real,
        }
    }
}

pub fn vote_or_prove(
    group: &Group,
    x: &Scalar,
    rho: &Scalar,
    vote: u8,
    stmt: &VoteStatement,
    ctx: &ProofContext,
    rng: &mut dyn RngCore,
) -> Result<VoteOrProof, SigmaError> {
    let ballot_ok = {
        let masked = group.exp(&stmt.h, x);
        let expect = if vote == 0 {
            masked
        } else {
            group.mul(&group.generator(), &masked)
        };
        expect == stmt.v
    };
    if vote > 1
        || group.g_pow(x) != stmt.y
        || group.g_pow(rho) != stmt.beta
        || commit_for(group, &stmt.big_y, rho, vote) != stmt.c
        || !ballot_ok
    {
        return Err(SigmaError::StatementMismatch);
    }
    Ok(vote_or_prove_forced(group, x, rho, vote, stmt, ctx, rng))
}

pub fn vote_or_verify(
    group: &Group,
    stmt: &VoteStatement,
    proof: &VoteOrProof,
    ctx: &ProofContext,
) -> bool {
    let firsts: [&GroupElement; 8] = [
        &proof.a1, &proof.b1, &proof.c1, &proof.d1, &proof.a2, &proof.b2, &proof.c2, &proof.d2,
    ];
    let e = vote_or_challenge(group, ctx, stmt, &firsts);
    if group.scalar_add(&proof.e1, &proof.e2) != e {
        return false;
    }
    vote_or_equations_hold(group, stmt, proof)
}

fn vote_or_equations_hold(group: &Group, stmt: &VoteStatement, p: &VoteOrProof) -> bool {
    let c_over_g = group.div_by_g(&stmt.c);
    let v_over_g = group.div_by_g(&stmt.v);
    p.a1 == group.mul(&group.exp(&stmt.big_y, &p.r2), &group.exp(&stmt.c, &p.e1))
        && p.b1 == group.mul(&group.exp(&stmt.h, &p.r1), &group.exp(&stmt.v, &p.e1))
        && p.c1 == group.mul(&group.g_pow(&p.r1), &group.exp(&stmt.y, &p.e1))
        && p.d1 == group.mul(&group.g_pow(&p.r2), &group.exp(&stmt.beta, &p.e1))
        && p.a2 == group.mul(&group.exp(&stmt.big_y, &p.r4), &group.exp(&c_over_g, &p.e2))
        && p.b2 == group.mul(&group.exp(&stmt.h, &p.r3), &group.exp(&v_over_g, &p.e2))
        && p.c2 == group.mul(&group.g_pow(&p.r3), &group.exp(&stmt.y, &p.e2))
        && p.d2 == group.mul(&group.g_pow(&p.r4), &group.exp(&stmt.beta, &p.e2))
}

impl VoteOrProof {
    pub fn to_bytes(&self, group: &Group) -> Vec<u8> {
        let mut out = Vec::new();
        for e in [
            &self.a1, &self.b1, &self.c1, &self.d1, &self.a2, &self.b2, &self.c2, &self.d2,
        ] {
            out.extend(group.encode_element(e));
        }
        for s in [&self.e1, &self.e2, &self.r1, &self.r2, &self.r3, &self.r4] {
            out.extend(group.encode_scalar(s));
        }
        out
    }

    pub fn from_bytes(group: &Group, bytes: &[u8]) -> Result<Self, crate::group::GroupError> {
        let (ew, sw) = (group.element_width(), group.scalar_width());
        if bytes.len() != 8 * ew + 6 * sw {
            return Err(crate::group::GroupError::MalformedEncoding(format!(
                "vote proof must be {} bytes",
                8 * ew + 6 * sw
            )));
        }
        let el = |i: usize| group.decode_element(&bytes[i * ew..(i + 1) * ew]);
        let sc = |i: usize| group.decode_scalar(&bytes[8 * ew + i * sw..8 * ew + (i + 1) * sw]);
        Ok(VoteOrProof {
            a1: el(0)?,
            b1: el(1)?,
            c1: el(2)?,
            d1: el(3)?,
            a2: el(4)?,
            b2: el(5)?,
            c2: el(6)?,
            d2: el(7)?,
            e1: sc(0)?,
            e2: sc(1)?,
            r1: sc(2)?,
            r2: sc(3)?,
            r3: sc(4)?,
            r4: sc(5)?,
        })
    }

    pub fn check(&self, group: &Group) -> Result<(), crate::group::GroupError> {
        for e in [
            &self.a1, &self.b1, &self.c1, &self.d1, &self.a2, &self.b2, &self.c2, &self.d2,
        ] {
            group.check_element(e)?;
        }
        for s in [&self.e1, &self.e2, &self.r1, &self.r2, &self.r3, &self.r4] {
            group.check_scalar(s)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Interactive mode: statements, transcripts, prover replay, simulator,
// special-soundness extractor. Test machinery; production flows never
// accept an externally supplied challenge.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Schnorr { y: GroupElement },
    EqDlog(EqDlogStatement),
    CommitOr(CommitStatement),
    VoteOr(VoteStatement),
}

#[derive(Debug, Clone)]
pub enum Witness {
    Schnorr { x: Scalar },
    EqDlog { x: Scalar },
    CommitOr { rho: Scalar, vote: u8 },
    VoteOr { x: Scalar, rho: Scalar, vote: u8 },
}

/// One conversation in a Σ-protocol: first messages, challenge split, and
/// responses, shaped per family. OR-family transcripts carry both branch
/// challenges; the total challenge is their sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transcript {
    Schnorr {
        a: GroupElement,
        e: Scalar,
        r: Scalar,
    },
    EqDlog {
        a1: GroupElement,
        a2: GroupElement,
        e: Scalar,
        r: Scalar,
    },
    CommitOr(CommitOrProof),
    VoteOr(VoteOrProof),
}

/// Witness(es) recovered by the special-soundness extractor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractedWitness {
    Schnorr { x: Scalar },
    EqDlog { x: Scalar },
    CommitOr { rho: Scalar },
    VoteOr { x: Scalar, rho: Scalar },
}

/// Honest interactive prover frozen after its first move, so tests can
/// replay the same first messages against different challenges.
pub struct InteractiveProver {
    group: Group,
    statement: Statement,
    witness: Witness,
    // real-branch nonces; w drives x-relations, gamma rho-relations
    w: Scalar,
    gamma: Scalar,
    // simulated-branch data for OR families
    e_sim: Scalar,
    rx_sim: Scalar,
    rr_sim: Scalar,
    firsts: Vec<GroupElement>,
}

impl InteractiveProver {
    pub fn start(
        group: &Group,
        statement: &Statement,
        witness: &Witness,
        rng: &mut dyn RngCore,
    ) -> Result<InteractiveProver, SigmaError> {
        let w = group.random_scalar(rng);
        let gamma = group.random_scalar(rng);
        let e_sim = group.random_scalar(rng);
        let rx_sim = group.random_scalar(rng);
        let rr_sim = group.random_scalar(rng);
        let g = group.generator();

        let firsts = match (statement, witness) {
            (Statement::Schnorr { y }, Witness::Schnorr { x }) => {
                if group.g_pow(x) != *y {
                    return Err(SigmaError::StatementMismatch);
                }
                vec![group.g_pow(&w)]
            }
            (Statement::EqDlog(s), Witness::EqDlog { x }) => {
                if group.exp(&s.g1, x) != s.y1 || group.exp(&s.g2, x) != s.y2 {
                    return Err(SigmaError::StatementMismatch);
                }
                vec![group.exp(&s.g1, &w), group.exp(&s.g2, &w)]
            }
            (Statement::CommitOr(s), Witness::CommitOr { rho, vote }) => {
                if *vote > 1
                    || group.g_pow(rho) != s.beta
                    || commit_for(group, &s.big_y, rho, *vote) != s.c
                {
                    return Err(SigmaError::StatementMismatch);
                }
                let a_real = group.exp(&s.big_y, &w);
                let b_real = group.g_pow(&w);
                let sim_bit = 1 - vote;
                let target = if sim_bit == 0 {
                    s.c.clone()
                } else {
                    group.div_by_g(&s.c)
                };
                let a_sim = group.mul(&group.exp(&s.big_y, &rr_sim), &group.exp(&target, &e_sim));
                let b_sim = group.mul(&group.g_pow(&rr_sim), &group.exp(&s.beta, &e_sim));
                if *vote == 0 {
                    vec![a_real, b_real, a_sim, b_sim]
                } else {
                    vec![a_sim, b_sim, a_real, b_real]
                }
            }
            (Statement::VoteOr(s), Witness::VoteOr { x, rho, vote }) => {
                let ballot = {
                    let masked = group.exp(&s.h, x);
                    if *vote == 0 {
                        masked
                    } else {
                        group.mul(&g, &masked)
                    }
                };
                if *vote > 1
                    || group.g_pow(x) != s.y
                    || group.g_pow(rho) != s.beta
                    || commit_for(group, &s.big_y, rho, *vote) != s.c
                    || ballot != s.v
                {
                    return Err(SigmaError::StatementMismatch);
                }
                let a_real = group.exp(&s.big_y, &gamma);
                let b_real = group.exp(&s.h, &w);
                let c_real = group.g_pow(&w);
                let d_real = group.g_pow(&gamma);
                let sim_bit = 1 - vote;
                let shift = |elem: &GroupElement| {
                    if sim_bit == 0 {
                        elem.clone()
                    } else {
                        group.div_by_g(elem)
                    }
                };
                let a_sim = group.mul(
                    &group.exp(&s.big_y, &rr_sim),
                    &group.exp(&shift(&s.c), &e_sim),
                );
                let b_sim = group.mul(&group.exp(&s.h, &rx_sim), &group.exp(&shift(&s.v), &e_sim));
                let c_sim = group.mul(&group.g_pow(&rx_sim), &group.exp(&s.y, &e_sim));
                let d_sim = group.mul(&group.g_pow(&rr_sim), &group.exp(&s.beta, &e_sim));
                if *vote == 0 {
                    vec![a_real, b_real, c_real, d_real, a_sim, b_sim, c_sim, d_sim]
                } else {
                    vec![a_sim, b_sim, c_sim, d_sim, a_real, b_real, c_real, d_real]
                }
            }
            _ => return Err(SigmaError::StatementMismatch),
        };
        Ok(InteractiveProver {
            group: group.clone(),
            statement: statement.clone(),
            witness: witness.clone(),
            w,
            gamma,
            e_sim,
            rx_sim,
            rr_sim,
            firsts,
        })
    }

    pub fn first_messages(&self) -> &[GroupElement] {
        &self.firsts
    }

    /// Completes the conversation for challenge `e`. May be called any
    /// number of times with different challenges over the same first move.
    pub fn respond(&self, e: &Scalar) -> Transcript {
        let group = &self.group;
        match (&self.statement, &self.witness) {
            (Statement::Schnorr { .. }, Witness::Schnorr { x }) => Transcript::Schnorr {
                a: self.firsts[0].clone(),
                e: e.clone(),
                r: group.scalar_sub(&self.w, &group.scalar_mul(x, e)),
            },
            (Statement::EqDlog(_), Witness::EqDlog { x }) => Transcript::EqDlog {
                a1: self.firsts[0].clone(),
                a2: self.firsts[1].clone(),
                e: e.clone(),
                r: group.scalar_sub(&self.w, &group.scalar_mul(x, e)),
            },
            (Statement::CommitOr(_), Witness::CommitOr { rho, vote }) => {
                let e_real = group.scalar_sub(e, &self.e_sim);
                let r_real = group.scalar_sub(&self.w, &group.scalar_mul(rho, &e_real));
                let f = &self.firsts;
                let proof = if *vote == 0 {
                    CommitOrProof {
                        a1: f[0].clone(),
                        b1: f[1].clone(),
                        a2: f[2].clone(),
                        b2: f[3].clone(),
                        e1: e_real,
                        e2: self.e_sim.clone(),
                        r1: r_real,
                        r2: self.rr_sim.clone(),
                    }
                } else {
                    CommitOrProof {
                        a1: f[0].clone(),
                        b1: f[1].clone(),
                        a2: f[2].clone(),
                        b2: f[3].clone(),
                        e1: self.e_sim.clone(),
                        e2: e_real,
                        r1: self.rr_sim.clone(),
                        r2: r_real,
                    }
                };
                Transcript::CommitOr(proof)
            }
            (Statement::VoteOr(_), Witness::VoteOr { x, rho, vote }) => {
                let e_real = group.scalar_sub(e, &self.e_sim);
                let rx_real = group.scalar_sub(&self.w, &group.scalar_mul(x, &e_real));
                let rr_real = group.scalar_sub(&self.gamma, &group.scalar_mul(rho, &e_real));
                let f = &self.firsts;
                let proof = if *vote == 0 {
                    VoteOrProof {
                        a1: f[0].clone(),
                        b1: f[1].clone(),
                        c1: f[2].clone(),
                        d1: f[3].clone(),
                        a2: f[4].clone(),
                        b2: f[5].clone(),
                        c2: f[6].clone(),
                        d2: f[7].clone(),
                        e1: e_real,
                        e2: self.e_sim.clone(),
                        r1: rx_real,
                        r2: rr_real,
                        r3: self.rx_sim.clone(),
                        r4: self.rr_sim.clone(),
                    }
                } else {
                    VoteOrProof {
                        a1: f[0].clone(),
                        b1: f[1].clone(),
                        c1: f[2].clone(),
                        d1: f[3].clone(),
                        a2: f[4].clone(),
                        b2: f[5].clone(),
                        c2: f[6].clone(),
                        d2: f[7].clone(),
                        e1: self.e_sim.clone(),
                        e2: e_real,
                        r1: self.rx_sim.clone(),
                        r2: self.rr_sim.clone(),
                        r3: rx_real,
                        r4: rr_real,
                    }
                };
                Transcript::VoteOr(proof)
            }
            _ => unreachable!("start() checked the statement/witness pairing"),
        }
    }
}

/// Checks only the algebraic equations and the challenge split against an
/// externally supplied challenge. No hash recomputation: this is the
/// interactive verifier.
pub fn verify_interactive(
    group: &Group,
    statement: &Statement,
    transcript: &Transcript,
    e: &Scalar,
) -> bool {
    match (statement, transcript) {
        (Statement::Schnorr { y }, Transcript::Schnorr { a, e: te, r }) => {
            te == e && *a == group.mul(&group.g_pow(r), &group.exp(y, e))
        }
        (Statement::EqDlog(s), Transcript::EqDlog { a1, a2, e: te, r }) => {
            te == e
                && *a1 == group.mul(&group.exp(&s.g1, r), &group.exp(&s.y1, e))
                && *a2 == group.mul(&group.exp(&s.g2, r), &group.exp(&s.y2, e))
        }
        (Statement::CommitOr(s), Transcript::CommitOr(p)) => {
            group.scalar_add(&p.e1, &p.e2) == *e && commit_or_equations_hold(group, s, p)
        }
        (Statement::VoteOr(s), Transcript::VoteOr(p)) => {
            group.scalar_add(&p.e1, &p.e2) == *e && vote_or_equations_hold(group, s, p)
        }
        _ => false,
    }
}

/// HVZK simulator: produces an accepting conversation for the given
/// challenge without any witness.
pub fn simulate_transcript(
    group: &Group,
    statement: &Statement,
    e: &Scalar,
    rng: &mut dyn RngCore,
) -> Transcript {
    match statement {
        Statement::Schnorr { y } => {
            let r = group.random_scalar(rng);
            let a = group.mul(&group.g_pow(&r), &group.exp(y, e));
            Transcript::Schnorr { a, e: e.clone(), r }
        }
        Statement::EqDlog(s) => {
            let r = group.random_scalar(rng);
            let a1 = group.mul(&group.exp(&s.g1, &r), &group.exp(&s.y1, e));
            let a2 = group.mul(&group.exp(&s.g2, &r), &group.exp(&s.y2, e));
            Transcript::EqDlog {
                a1,
                a2,
                e: e.clone(),
                r,
            }
        }
        Statement::CommitOr(s) => {
            let e1 = group.random_scalar(rng);
            let e2 = group.scalar_sub(e, &e1);
            let r1 = group.random_scalar(rng);
            let r2 = group.random_scalar(rng);
            let c_over_g = group.div_by_g(&s.c);
            Transcript::CommitOr(CommitOrProof {
                a1: group.mul(&group.exp(&s.big_y, &r1), &group.exp(&s.c, &e1)),
                b1: group.mul(&group.g_pow(&r1), &group.exp(&s.beta, &e1)),
                a2: group.mul(&group.exp(&s.big_y, &r2), &group.exp(&c_over_g, &e2)),
                b2: group.mul(&group.g_pow(&r2), &group.exp(&s.beta, &e2)),
                e1,
                e2,
                r1,
                r2,
            })
        }
        Statement::VoteOr(s) => {
            let e1 = group.random_scalar(rng);
            let e2 = group.scalar_sub(e, &e1);
            let r1 = group.random_scalar(rng);
            let r2 = group.random_scalar(rng);
            let r3 = group.random_scalar(rng);
            let r4 = group.random_scalar(rng);
            let c_over_g = group.div_by_g(&s.c);
            let v_over_g = group.div_by_g(&s.v);
            Transcript::VoteOr(VoteOrProof {
                a1: group.mul(&group.exp(&s.big_y, &r2), &group.exp(&s.c, &e1)),
                b1: group.mul(&group.exp(&s.h, &r1), &group.exp(&s.v, &e1)),
                c1: group.mul(&group.g_pow(&r1), &group.exp(&s.y, &e1)),
                d1: group.mul(&group.g_pow(&r2), &group.exp(&s.beta, &e1)),
                a2: group.mul(&group.exp(&s.big_y, &r4), &group.exp(&c_over_g, &e2)),
                b2: group.mul(&group.exp(&s.h, &r3), &group.exp(&v_over_g, &e2)),
                c2: group.mul(&group.g_pow(&r3), &group.exp(&s.y, &e2)),
                d2: group.mul(&group.g_pow(&r4), &group.exp(&s.beta, &e2)),
                e1,
                e2,
                r1,
                r2,
                r3,
                r4,
            })
        }
    }
}

fn extract_pair(
    group: &Group,
    r: &Scalar,
    r_p: &Scalar,
    e: &Scalar,
    e_p: &Scalar,
) -> Option<Scalar> {
    // r = w - x*e and r' = w - x*e'  =>  x = (r - r') / (e' - e)
    let de = group.scalar_sub(e_p, e);
    let inv = group.scalar_inv(&de)?;
    Some(group.scalar_mul(&group.scalar_sub(r, r_p), &inv))
}

/// Special-soundness extractor: two accepting conversations with identical
/// first messages and differing challenges yield the witness. For the OR
/// families, the witness comes from whichever branch's challenges differ.
pub fn extract_witness(
    group: &Group,
    t1: &Transcript,
    t2: &Transcript,
) -> Result<ExtractedWitness, SigmaError> {
    match (t1, t2) {
        (
            Transcript::Schnorr { a, e, r },
            Transcript::Schnorr {
                a: a2,
                e: e2,
                r: r2,
            },
        ) => {
            if a != a2 {
                return Err(SigmaError::NotExtractable);
            }
            let x = extract_pair(group, r, r2, e, e2).ok_or(SigmaError::NotExtractable)?;
            Ok(ExtractedWitness::Schnorr { x })
        }
        (
            Transcript::EqDlog { a1, a2, e, r },
            Transcript::EqDlog {
                a1: b1,
                a2: b2,
                e: e2,
                r: r2,
            },
        ) => {
            if a1 != b1 || a2 != b2 {
                return Err(SigmaError::NotExtractable);
            }
            let x = extract_pair(group, r, r2, e, e2).ok_or(SigmaError::NotExtractable)?;
            Ok(ExtractedWitness::EqDlog { x })
        }
        (Transcript::CommitOr(p), Transcript::CommitOr(p2)) => {
            if p.a1 != p2.a1 || p.b1 != p2.b1 || p.a2 != p2.a2 || p.b2 != p2.b2 {
                return Err(SigmaError::NotExtractable);
            }
            if let Some(rho) = extract_pair(group, &p.r1, &p2.r1, &p.e1, &p2.e1) {
                return Ok(ExtractedWitness::CommitOr { rho });
            }
            if let Some(rho) = extract_pair(group, &p.r2, &p2.r2, &p.e2, &p2.e2) {
                return Ok(ExtractedWitness::CommitOr { rho });
            }
            Err(SigmaError::NotExtractable)
        }
        (Transcript::VoteOr(p), Transcript::VoteOr(p2)) => {
            let firsts_match = p.a1 == p2.a1
                && p.b1 == p2.b1
                && p.c1 == p2.c1
                && p.d1 == p2.d1
                && p.a2 == p2.a2
                && p.b2 == p2.b2
                && p.c2 == p2.c2
                && p.d2 == p2.d2;
            if !firsts_match {
                return Err(SigmaError::NotExtractable);
            }
            if let (Some(x), Some(rho)) = (
                extract_pair(group, &p.r1, &p2.r1, &p.e1, &p2.e1),
                extract_pair(group, &p.r2, &p2.r2, &p.e1, &p2.e1),
            ) {
                return Ok(ExtractedWitness::VoteOr { x, rho });
            }
            if let (Some(x), Some(rho)) = (
                extract_pair(group, &p.r3, &p2.r3, &p.e2, &p2.e2),
                extract_pair(group, &p.r4, &p2.r4, &p.e2, &p2.e2),
            ) {
                return Ok(ExtractedWitness::VoteOr { x, rho });
            }
            Err(SigmaError::NotExtractable)
        }
        _ => Err(SigmaError::NotExtractable),
    }
}
