//! Acceptance suite: every release criterion as one test, each printing a
//! PASS line (visible with `--nocapture`). Criteria with statistical
//! content use fixed seeds, so the suite is deterministic.
//!
//! Heavy criteria parallelize across scenarios with rayon; run times are
//! printed for reference.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use selftally::engine::{oracle_tally, run, Scenario};
use selftally::group::{Group, GroupElement, Scalar};
use selftally::protocol::Roster;
use selftally::sigma::commit_for;
use selftally::sigma::{
    commit_or_prove, commit_or_verify, eqdlog_prove, eqdlog_verify, extract_witness, schnorr_prove,
    schnorr_verify, simulate_transcript, verify_interactive, vote_or_prove, vote_or_prove_forced,
    vote_or_verify, CommitOrProof, CommitStatement, EqDlogProof, EqDlogStatement, ExtractedWitness,
    InteractiveProver, ProofContext, SchnorrProof, SigmaError, Statement, Transcript, VoteOrProof,
    VoteStatement, Witness,
};

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

// Criteria run one at a time: the heavy ones parallelize internally with
// rayon, and the benchmark criterion needs a quiet machine for its medians
// to mean anything.
static EXCLUSIVE: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn exclusive() -> std::sync::MutexGuard<'static, ()> {
    EXCLUSIVE
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn pass(number: u32, name: &str, started: Instant) {
    println!(
        "ACCEPTANCE {number:02} {name}: PASS ({:.1}s)",
        started.elapsed().as_secs_f64()
    );
}

/// Random honest scenario. In `test-tiny` the voter count stays below the
/// group order (q = 11), because an open tally of n voters is decodable
/// only for n < q; the engine rejects larger rosters for that group.
fn random_scenario(r: &mut ChaCha20Rng, n_max: u32, seed: u64) -> Scenario {
    let n = 2 + (r.next_u32() % (n_max - 1));
    let votes: Vec<u8> = (0..n).map(|_| (r.next_u32() & 1) as u8).collect();
    Scenario::honest(n, votes, seed)
}

// -------------------------------------------------------------------------
// 1. Self-tallying correctness: 10^3 random honest elections per group,
//    reported count == plaintext-sum oracle, 100%.
// -------------------------------------------------------------------------
#[test]
fn a01_self_tallying_correctness() {
    let _guard = exclusive();
    let t0 = Instant::now();
    for (group, n_max, label) in [
        (Group::test_tiny(), 10u32, "test-tiny"),
        (Group::standard(), 16, "standard"),
    ] {
        let scenarios: Vec<Scenario> = {
            let mut r = rng(0xA01);
            (0..1000)
                .map(|k| random_scenario(&mut r, n_max, 0xA01_000 + k))
                .collect()
        };
        let started = Instant::now();
        scenarios.par_iter().for_each(|s| {
            let out = run(&group, s).expect("honest run succeeds");
            assert_eq!(
                out.report.count,
                oracle_tally(&s.votes),
                "{label}: n={} votes={:?}",
                s.n,
                s.votes
            );
            assert_eq!(out.report.n_counted, s.n);
        });
        println!(
            "  [1] {label}: 1000/1000 elections match the oracle ({:.1}s)",
            started.elapsed().as_secs_f64()
        );
    }
    pass(1, "self-tallying correctness", t0);
}

// -------------------------------------------------------------------------
// 2. Mask cancellation: prod h_i^x_i == 1 for n in [2,16] x 100 key sets.
// -------------------------------------------------------------------------
#[test]
fn a02_mask_cancellation() {
    let _guard = exclusive();
    let t0 = Instant::now();
    for group in [Group::test_tiny(), Group::standard()] {
        (2u32..=16).into_par_iter().for_each(|n| {
            let mut r = rng(0xA02_0000 + u64::from(n));
            for _ in 0..100 {
                let secrets: Vec<Scalar> = (0..n)
                    .map(|_| group.random_nonzero_scalar(&mut r))
                    .collect();
                let roster = Roster::new(
                    secrets
                        .iter()
                        .enumerate()
                        .map(|(k, x)| (k as u32 + 1, group.g_pow(x)))
                        .collect(),
                );
                let mut acc = group.identity();
                for (k, x) in secrets.iter().enumerate() {
                    let h = roster.mask_h(&group, k as u32 + 1).unwrap();
                    acc = group.mul(&acc, &group.exp(&h, x));
                }
                assert!(acc.is_identity(), "n={n} in {}", group.name());
            }
        });
    }
    pass(2, "mask cancellation", t0);
}

// -------------------------------------------------------------------------
// Instance builders shared by the proof criteria.
// -------------------------------------------------------------------------

struct CommitInstance {
    rho: Scalar,
    vote: u8,
    stmt: CommitStatement,
    ctx: ProofContext,
}

fn commit_instance(group: &Group, vote: u8, r: &mut ChaCha20Rng) -> CommitInstance {
    let big_y = group.g_pow(&group.random_nonzero_scalar(r));
    let rho = group.random_scalar(r);
    let stmt = CommitStatement {
        beta: group.g_pow(&rho),
        c: commit_for(group, &big_y, &rho, vote),
        big_y,
    };
    CommitInstance {
        rho,
        vote,
        stmt,
        ctx: ProofContext::new(b"acceptance", 3, "commit"),
    }
}

struct VoteInstance {
    x: Scalar,
    rho: Scalar,
    vote: u8,
    stmt: VoteStatement,
    ctx: ProofContext,
}

fn vote_instance(group: &Group, vote: u8, r: &mut ChaCha20Rng) -> VoteInstance {
    let x = group.random_nonzero_scalar(r);
    let rho = group.random_scalar(r);
    let big_y = group.g_pow(&group.random_nonzero_scalar(r));
    let h = group.g_pow(&group.random_nonzero_scalar(r));
    let masked = group.exp(&h, &x);
    let ballot = if vote == 0 {
        masked
    } else {
        group.mul(&group.generator(), &masked)
    };
    let stmt = VoteStatement {
        beta: group.g_pow(&rho),
        y: group.g_pow(&x),
        c: commit_for(group, &big_y, &rho, vote),
        v: ballot,
        big_y,
        h,
    };
    VoteInstance {
        x,
        rho,
        vote,
        stmt,
        ctx: ProofContext::new(b"acceptance", 5, "vote"),
    }
}

fn eqdlog_instance(group: &Group, r: &mut ChaCha20Rng) -> (Scalar, EqDlogStatement, ProofContext) {
    let x = group.random_nonzero_scalar(r);
    let base2 = group.g_pow(&group.random_nonzero_scalar(r));
    let stmt = EqDlogStatement {
        g1: group.generator(),
        y1: group.g_pow(&x),
        g2: base2.clone(),
        y2: group.exp(&base2, &x),
    };
    (x, stmt, ProofContext::new(b"acceptance", 7, "recover"))
}

// -------------------------------------------------------------------------
// 3. ZK completeness: 10^3 honest instances per family, 100% accept.
// -------------------------------------------------------------------------
#[test]
fn a03_zk_completeness() {
    let _guard = exclusive();
    let t0 = Instant::now();
    for group in [Group::test_tiny(), Group::standard()] {
        let started = Instant::now();
        (0..1000u64).into_par_iter().for_each(|k| {
            let mut r = rng(0xA03_0000 + k);
            let ctx = ProofContext::new(b"acceptance", 1, "register");
            // Schnorr
            let x = group.random_nonzero_scalar(&mut r);
            let y = group.g_pow(&x);
            let p = schnorr_prove(&group, &x, &y, &ctx, &mut r).unwrap();
            assert!(schnorr_verify(&group, &y, &p, &ctx));
            // equality of discrete logs
            let (x, stmt, ctx2) = eqdlog_instance(&group, &mut r);
            let p = eqdlog_prove(&group, &x, &stmt, &ctx2, &mut r).unwrap();
            assert!(eqdlog_verify(&group, &stmt, &p, &ctx2));
            // commit OR
            let ci = commit_instance(&group, (k & 1) as u8, &mut r);
            let p = commit_or_prove(&group, &ci.rho, ci.vote, &ci.stmt, &ci.ctx, &mut r).unwrap();
            assert!(commit_or_verify(&group, &ci.stmt, &p, &ci.ctx));
            // vote OR
            let vi = vote_instance(&group, ((k >> 1) & 1) as u8, &mut r);
            let p =
                vote_or_prove(&group, &vi.x, &vi.rho, vi.vote, &vi.stmt, &vi.ctx, &mut r).unwrap();
            assert!(vote_or_verify(&group, &vi.stmt, &p, &vi.ctx));
        });
        println!(
            "  [3] {}: 1000 honest instances per family accepted ({:.1}s)",
            group.name(),
            started.elapsed().as_secs_f64()
        );
    }
    pass(3, "zk completeness", t0);
}

// -------------------------------------------------------------------------
// 4. Soundness by mutation: >= 10^3 single-byte mutations across encoded
//    proofs and statements, 100% rejection. Run in the standard group,
//    where hash collisions cannot mask a mutation.
// -------------------------------------------------------------------------

/// Applies `count` seeded single-byte mutations to `bytes`; each mutant
/// must make `accepts` return false.
fn mutate_all_rejected<F: Fn(&[u8]) -> bool>(
    bytes: &[u8],
    count: usize,
    r: &mut ChaCha20Rng,
    accepts: F,
) -> usize {
    let mut tested = 0;
    while tested < count {
        let pos = (r.next_u64() % bytes.len() as u64) as usize;
        let flip = (r.next_u32() % 255 + 1) as u8; // never the identity mutation
        let mut m = bytes.to_vec();
        m[pos] ^= flip;
        assert!(!accepts(&m), "mutation at byte {pos} accepted");
        tested += 1;
    }
    tested
}

#[test]
fn a04_soundness_by_mutation() {
    let _guard = exclusive();
    let t0 = Instant::now();
    let group = Group::standard();
    let total: usize = (0..8u64)
        .into_par_iter()
        .map(|lane| {
            let mut r = rng(0xA04_0000 + lane);
            let mut tested = 0usize;
            match lane % 4 {
                0 => {
                    // Schnorr proof bytes and statement bytes
                    let x = group.random_nonzero_scalar(&mut r);
                    let y = group.g_pow(&x);
                    let ctx = ProofContext::new(b"acceptance", 1, "register");
                    let proof = schnorr_prove(&group, &x, &y, &ctx, &mut r).unwrap();
                    tested += mutate_all_rejected(&proof.to_bytes(&group), 100, &mut r, |m| {
                        SchnorrProof::from_bytes(&group, m)
                            .map(|p| schnorr_verify(&group, &y, &p, &ctx))
                            .unwrap_or(false)
                    });
                    tested += mutate_all_rejected(&group.encode_element(&y), 30, &mut r, |m| {
                        group
                            .decode_element(m)
                            .map(|y2| schnorr_verify(&group, &y2, &proof, &ctx))
                            .unwrap_or(false)
                    });
                }
                1 => {
                    let (x, stmt, ctx) = eqdlog_instance(&group, &mut r);
                    let proof = eqdlog_prove(&group, &x, &stmt, &ctx, &mut r).unwrap();
                    tested += mutate_all_rejected(&proof.to_bytes(&group), 100, &mut r, |m| {
                        EqDlogProof::from_bytes(&group, m)
                            .map(|p| eqdlog_verify(&group, &stmt, &p, &ctx))
                            .unwrap_or(false)
                    });
                    tested +=
                        mutate_all_rejected(&group.encode_element(&stmt.y2), 30, &mut r, |m| {
                            group
                                .decode_element(m)
                                .map(|y2| {
                                    let mut s = stmt.clone();
                                    s.y2 = y2;
                                    eqdlog_verify(&group, &s, &proof, &ctx)
                                })
                                .unwrap_or(false)
                        });
                }
                2 => {
                    let ci = commit_instance(&group, (lane & 1) as u8, &mut r);
                    let proof =
                        commit_or_prove(&group, &ci.rho, ci.vote, &ci.stmt, &ci.ctx, &mut r)
                            .unwrap();
                    tested += mutate_all_rejected(&proof.to_bytes(&group), 100, &mut r, |m| {
                        CommitOrProof::from_bytes(&group, m)
                            .map(|p| commit_or_verify(&group, &ci.stmt, &p, &ci.ctx))
                            .unwrap_or(false)
                    });
                    tested +=
                        mutate_all_rejected(&group.encode_element(&ci.stmt.c), 30, &mut r, |m| {
                            group
                                .decode_element(m)
                                .map(|c| {
                                    let mut s = ci.stmt.clone();
                                    s.c = c;
                                    commit_or_verify(&group, &s, &proof, &ci.ctx)
                                })
                                .unwrap_or(false)
                        });
                }
                _ => {
                    let vi = vote_instance(&group, (lane & 1) as u8, &mut r);
                    let proof =
                        vote_or_prove(&group, &vi.x, &vi.rho, vi.vote, &vi.stmt, &vi.ctx, &mut r)
                            .unwrap();
                    tested += mutate_all_rejected(&proof.to_bytes(&group), 100, &mut r, |m| {
                        VoteOrProof::from_bytes(&group, m)
                            .map(|p| vote_or_verify(&group, &vi.stmt, &p, &vi.ctx))
                            .unwrap_or(false)
                    });
                    tested +=
                        mutate_all_rejected(&group.encode_element(&vi.stmt.v), 30, &mut r, |m| {
                            group
                                .decode_element(m)
                                .map(|v| {
                                    let mut s = vi.stmt.clone();
                                    s.v = v;
                                    vote_or_verify(&group, &s, &proof, &vi.ctx)
                                })
                                .unwrap_or(false)
                        });
                }
            }
            tested
        })
        .sum();
    assert!(total >= 1000, "only {total} mutations exercised");
    println!("  [4] {total} single-byte mutations, all rejected");
    pass(4, "soundness by mutation", t0);
}

// -------------------------------------------------------------------------
// 5. Special soundness: extractor succeeds on 100 interactive transcript
//    pairs per family; extracted witnesses satisfy their statements.
// -------------------------------------------------------------------------
#[test]
fn a05_special_soundness() {
    let _guard = exclusive();
    let t0 = Instant::now();
    let group = Group::standard();
    (0..100u64).into_par_iter().for_each(|k| {
        let mut r = rng(0xA05_0000 + k);
        let e1 = group.random_scalar(&mut r);
        let e2 = group.scalar_add(&e1, &group.scalar_one());

        // Schnorr
        let x = group.random_nonzero_scalar(&mut r);
        let y = group.g_pow(&x);
        let stmt = Statement::Schnorr { y: y.clone() };
        let prover =
            InteractiveProver::start(&group, &stmt, &Witness::Schnorr { x: x.clone() }, &mut r)
                .unwrap();
        let (t1, t2) = (prover.respond(&e1), prover.respond(&e2));
        assert!(verify_interactive(&group, &stmt, &t1, &e1));
        assert!(verify_interactive(&group, &stmt, &t2, &e2));
        match extract_witness(&group, &t1, &t2).unwrap() {
            ExtractedWitness::Schnorr { x: got } => assert_eq!(group.g_pow(&got), y),
            other => panic!("wrong family: {other:?}"),
        }

        // equality of discrete logs
        let (x, estmt, _) = eqdlog_instance(&group, &mut r);
        let stmt = Statement::EqDlog(estmt.clone());
        let prover =
            InteractiveProver::start(&group, &stmt, &Witness::EqDlog { x }, &mut r).unwrap();
        let (t1, t2) = (prover.respond(&e1), prover.respond(&e2));
        match extract_witness(&group, &t1, &t2).unwrap() {
            ExtractedWitness::EqDlog { x: got } => {
                assert_eq!(group.exp(&estmt.g1, &got), estmt.y1);
                assert_eq!(group.exp(&estmt.g2, &got), estmt.y2);
            }
            other => panic!("wrong family: {other:?}"),
        }

        // commit OR
        let ci = commit_instance(&group, (k & 1) as u8, &mut r);
        let stmt = Statement::CommitOr(ci.stmt.clone());
        let prover = InteractiveProver::start(
            &group,
            &stmt,
            &Witness::CommitOr {
                rho: ci.rho.clone(),
                vote: ci.vote,
            },
            &mut r,
        )
        .unwrap();
        let (t1, t2) = (prover.respond(&e1), prover.respond(&e2));
        match extract_witness(&group, &t1, &t2).unwrap() {
            ExtractedWitness::CommitOr { rho } => {
                assert_eq!(group.g_pow(&rho), ci.stmt.beta);
                let opens =
                    (0..=1u8).any(|v| commit_for(&group, &ci.stmt.big_y, &rho, v) == ci.stmt.c);
                assert!(opens, "extracted rho does not open the commitment");
            }
            other => panic!("wrong family: {other:?}"),
        }

        // vote OR
        let vi = vote_instance(&group, ((k >> 1) & 1) as u8, &mut r);
        let stmt = Statement::VoteOr(vi.stmt.clone());
        let prover = InteractiveProver::start(
            &group,
            &stmt,
            &Witness::VoteOr {
                x: vi.x.clone(),
                rho: vi.rho.clone(),
                vote: vi.vote,
            },
            &mut r,
        )
        .unwrap();
        let (t1, t2) = (prover.respond(&e1), prover.respond(&e2));
        match extract_witness(&group, &t1, &t2).unwrap() {
            ExtractedWitness::VoteOr { x, rho } => {
                assert_eq!(group.g_pow(&x), vi.stmt.y);
                assert_eq!(group.g_pow(&rho), vi.stmt.beta);
                let consistent = (0..=1u8).any(|b| {
                    commit_for(&group, &vi.stmt.big_y, &rho, b) == vi.stmt.c && {
                        let masked = group.exp(&vi.stmt.h, &x);
                        let expect = if b == 0 {
                            masked
                        } else {
                            group.mul(&group.generator(), &masked)
                        };
                        expect == vi.stmt.v
                    }
                });
                assert!(consistent, "extracted pair does not explain the ballot");
            }
            other => panic!("wrong family: {other:?}"),
        }

        // equal challenges on all branches are not extractable
        assert_eq!(
            extract_witness(&group, &t1, &t1),
            Err(SigmaError::NotExtractable)
        );
    });
    pass(5, "special soundness extractor", t0);
}

// -------------------------------------------------------------------------
// 6. HVZK: simulated transcripts verify interactively, 100%; in test-tiny
//    the component marginals of simulated vs honest Schnorr conversations
//    pass a two-sample chi-square test at alpha = 0.01.
// -------------------------------------------------------------------------

/// Two-sample chi-square statistic over fixed categories.
fn chi_square_two_sample(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let mut stat = 0.0;
    for i in 0..a.len() {
        let col = (a[i] + b[i]) as f64;
        if col == 0.0 {
            continue;
        }
        let ea = na * col / (na + nb);
        let eb = nb * col / (na + nb);
        stat += (a[i] as f64 - ea).powi(2) / ea + (b[i] as f64 - eb).powi(2) / eb;
    }
    stat
}

/// chi-square critical value, alpha = 0.01, df = 10.
const CHI2_CRIT_DF10: f64 = 23.2093;

#[test]
fn a06_hvzk_simulation() {
    let _guard = exclusive();
    let t0 = Instant::now();
    // simulated transcripts accept in interactive mode, all families
    let group = Group::standard();
    let mut r = rng(0xA06);
    for k in 0..100u64 {
        let x = group.random_nonzero_scalar(&mut r);
        let (_, estmt, _) = eqdlog_instance(&group, &mut r);
        let ci = commit_instance(&group, (k & 1) as u8, &mut r);
        let vi = vote_instance(&group, (k & 1) as u8, &mut r);
        for stmt in [
            Statement::Schnorr { y: group.g_pow(&x) },
            Statement::EqDlog(estmt),
            Statement::CommitOr(ci.stmt),
            Statement::VoteOr(vi.stmt),
        ] {
            let e = group.random_scalar(&mut r);
            let t = simulate_transcript(&group, &stmt, &e, &mut r);
            assert!(verify_interactive(&group, &stmt, &t, &e));
        }
    }

    // marginal indistinguishability in the tiny group
    let tiny = Group::test_tiny();
    let x = tiny.scalar_from_u64(3);
    let y = tiny.g_pow(&x);
    let stmt = Statement::Schnorr { y: y.clone() };
    let samples = 10_000;
    let idx = |v: &Scalar| -> usize {
        let b: u64 = v.to_biguint().try_into().unwrap();
        b as usize
    };
    let eidx = |g: &GroupElement| -> usize {
        let b: u64 = g.to_biguint().try_into().unwrap();
        b as usize
    };
    // honest interactive conversations
    let mut honest_a = [0u64; 23 + 1];
    let mut honest_e = [0u64; 11];
    let mut honest_r = [0u64; 11];
    let mut rh = rng(0xA06_1111);
    for _ in 0..samples {
        let prover =
            InteractiveProver::start(&tiny, &stmt, &Witness::Schnorr { x: x.clone() }, &mut rh)
                .unwrap();
        let e = tiny.random_scalar(&mut rh);
        let Transcript::Schnorr { a, e, r } = prover.respond(&e) else {
            unreachable!()
        };
        honest_a[eidx(&a)] += 1;
        honest_e[idx(&e)] += 1;
        honest_r[idx(&r)] += 1;
    }
    // simulated conversations
    let mut sim_a = [0u64; 23 + 1];
    let mut sim_e = [0u64; 11];
    let mut sim_r = [0u64; 11];
    let mut rs = rng(0xA06_2222);
    for _ in 0..samples {
        let e = tiny.random_scalar(&mut rs);
        let Transcript::Schnorr { a, e, r } = simulate_transcript(&tiny, &stmt, &e, &mut rs) else {
            unreachable!()
        };
        sim_a[eidx(&a)] += 1;
        sim_e[idx(&e)] += 1;
        sim_r[idx(&r)] += 1;
    }
    // 'a' ranges over the 11 subgroup members; compress to occupied cells
    let occupied: Vec<usize> = (0..24).filter(|i| honest_a[*i] + sim_a[*i] > 0).collect();
    assert_eq!(occupied.len(), 11, "a spans the whole subgroup");
    let ha: Vec<u64> = occupied.iter().map(|i| honest_a[*i]).collect();
    let sa: Vec<u64> = occupied.iter().map(|i| sim_a[*i]).collect();
    for (name, stat) in [
        ("a", chi_square_two_sample(&ha, &sa)),
        ("e", chi_square_two_sample(&honest_e, &sim_e)),
        ("r", chi_square_two_sample(&honest_r, &sim_r)),
    ] {
        assert!(
            stat < CHI2_CRIT_DF10,
            "{name}-marginal chi-square {stat:.2} exceeds {CHI2_CRIT_DF10}"
        );
        println!("  [6] {name}-marginal chi-square {stat:.2} < {CHI2_CRIT_DF10}");
    }

    // OR-proof challenge split: with the total challenge held fixed, the
    // honest e1 marginal is uniform
    let ci = {
        let mut rr = rng(0xA06_3333);
        let big_y = tiny.g_pow(&tiny.random_nonzero_scalar(&mut rr));
        let rho = tiny.random_scalar(&mut rr);
        CommitInstance {
            stmt: CommitStatement {
                beta: tiny.g_pow(&rho),
                c: commit_for(&tiny, &big_y, &rho, 1),
                big_y,
            },
            rho,
            vote: 1,
            ctx: ProofContext::new(b"acceptance", 9, "commit"),
        }
    };
    let fixed_e = tiny.scalar_from_u64(7);
    let mut e1_counts = [0u64; 11];
    let mut rr = rng(0xA06_4444);
    for _ in 0..samples {
        let prover = InteractiveProver::start(
            &tiny,
            &Statement::CommitOr(ci.stmt.clone()),
            &Witness::CommitOr {
                rho: ci.rho.clone(),
                vote: ci.vote,
            },
            &mut rr,
        )
        .unwrap();
        let Transcript::CommitOr(p) = prover.respond(&fixed_e) else {
            unreachable!()
        };
        assert_eq!(tiny.scalar_add(&p.e1, &p.e2), fixed_e);
        e1_counts[idx(&p.e1)] += 1;
    }
    let expect = [samples as u64 / 11; 11];
    let stat = chi_square_two_sample(&e1_counts, &expect);
    assert!(stat < CHI2_CRIT_DF10, "e1 split not uniform: {stat:.2}");
    println!("  [6] e1-split chi-square {stat:.2} < {CHI2_CRIT_DF10}");
    pass(6, "hvzk simulation", t0);
}

// -------------------------------------------------------------------------
// 7. Recovery: exponent-arithmetic oracle first, then the exhaustive
//    single-abort grid in test-tiny: n in [3,8] x abort position x every
//    vote vector; the final count includes the aborter's committed vote.
// -------------------------------------------------------------------------
#[test]
fn a07_recovery_exhaustive() {
    let _guard = exclusive();
    let t0 = Instant::now();

    // independent exponent-space oracle for the combination formula,
    // n = 3, all 8 vote vectors
    let q = 11i128;
    let modq = |v: i128| ((v % q) + q) % q;
    let mut r = rng(0xA07);
    for bits in 0..8u32 {
        let votes: Vec<i128> = (0..3).map(|k| ((bits >> k) & 1) as i128).collect();
        for _ in 0..50 {
            let x: Vec<i128> = (0..3).map(|_| (r.next_u64() % 10 + 1) as i128).collect();
            let h_exp = |j: usize| -> i128 {
                let mut acc = 0;
                for (k, xk) in x.iter().enumerate() {
                    if k < j {
                        acc += xk;
                    } else if k > j {
                        acc -= xk;
                    }
                }
                modq(acc)
            };
            for aborter in 0..3usize {
                let remaining: Vec<usize> = (0..3).filter(|j| *j != aborter).collect();
                // correction K_j's exponent and the ballot exponent combine
                // to exactly the remaining subtotal
                let combined: i128 = remaining
                    .iter()
                    .map(|&j| {
                        let k_exp = {
                            let s = if j > aborter { 1 } else { -1 };
                            s * x[aborter] * x[j]
                        };
                        h_exp(j) * x[j] + votes[j] - k_exp
                    })
                    .sum();
                let subtotal: i128 = remaining.iter().map(|&j| votes[j]).sum();
                assert_eq!(modq(combined), modq(subtotal), "oracle: votes={votes:?}");
            }
        }
    }
    println!("  [7] exponent-arithmetic oracle validates the combination formula");

    // exhaustive grid
    let group = Group::test_tiny();
    let cases: Vec<(u32, u32, u32)> = (3u32..=8)
        .flat_map(|n| {
            (1..=n).flat_map(move |abort| (0..(1u32 << n)).map(move |mask| (n, abort, mask)))
        })
        .collect();
    let total = cases.len();
    cases.par_iter().for_each(|&(n, abort, mask)| {
        let votes: Vec<u8> = (0..n).map(|k| ((mask >> k) & 1) as u8).collect();
        let mut s = Scenario::honest(n, votes.clone(), u64::from(mask) << 8 | u64::from(abort));
        s.abort_set = [abort].into();
        let out = run(&group, &s).expect("recovery run succeeds");
        assert_eq!(
            out.report.count,
            oracle_tally(&votes),
            "n={n} abort={abort} votes={votes:?}"
        );
        assert_eq!(
            out.report.recovered_votes.get(&abort),
            Some(&votes[abort as usize - 1]),
            "recovered vote mismatch at n={n} abort={abort}"
        );
        assert!(out.report.unrecoverable.is_empty());
    });
    println!("  [7] {total} single-abort elections all match the oracle");
    pass(7, "abort recovery", t0);
}

// -------------------------------------------------------------------------
// 8. Commit/vote binding: across 100 mismatched commitment/ballot pairs the
//    prover refuses (StatementMismatch) for both claimed bits, and forced
//    CDS transcripts never verify.
// -------------------------------------------------------------------------
#[test]
fn a08_commit_vote_binding() {
    let _guard = exclusive();
    let t0 = Instant::now();
    let group = Group::standard();
    (0..100u64).into_par_iter().for_each(|k| {
        let mut r = rng(0xA08_0000 + k);
        let committed_bit = (k & 1) as u8;
        let ballot_bit = 1 - committed_bit;
        let x = group.random_nonzero_scalar(&mut r);
        let rho = group.random_scalar(&mut r);
        let big_y = group.g_pow(&group.random_nonzero_scalar(&mut r));
        let h = group.g_pow(&group.random_nonzero_scalar(&mut r));
        let masked = group.exp(&h, &x);
        let ballot = if ballot_bit == 0 {
            masked
        } else {
            group.mul(&group.generator(), &masked)
        };
        let stmt = VoteStatement {
            beta: group.g_pow(&rho),
            y: group.g_pow(&x),
            c: commit_for(&group, &big_y, &rho, committed_bit),
            v: ballot,
            big_y,
            h,
        };
        let ctx = ProofContext::new(b"acceptance", 8, "vote");
        for claimed in [0u8, 1] {
            assert_eq!(
                vote_or_prove(&group, &x, &rho, claimed, &stmt, &ctx, &mut r),
                Err(SigmaError::StatementMismatch),
                "prover accepted a mismatched statement"
            );
            let forced = vote_or_prove_forced(&group, &x, &rho, claimed, &stmt, &ctx, &mut r);
            assert!(
                !vote_or_verify(&group, &stmt, &forced, &ctx),
                "forced branch {claimed} produced an accepting proof"
            );
        }
    });
    pass(8, "commit/vote binding", t0);
}

// -------------------------------------------------------------------------
// 9. Audit round trip through the binary: run -> audit agree on 100 random
//    scenarios; 100 injected transcript tamperings are all detected.
// -------------------------------------------------------------------------

fn run_binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_selftally"))
        .args(args)
        .env_remove("ST_GROUP")
        .output()
        .expect("binary runs")
}

/// Applies one seeded tamper operation; returns None if the op does not
/// apply to this transcript (caller picks another).
fn tamper(transcript: &str, op: u32, r: &mut ChaCha20Rng) -> Option<String> {
    let lines: Vec<&str> = transcript.lines().collect();
    match op {
        // flip a hex character inside a payload element
        0 => {
            let entries: Vec<usize> = (0..lines.len())
                .filter(|&i| lines[i].contains("\"kind\":\"entry\""))
                .collect();
            let &target = entries.get((r.next_u64() % entries.len() as u64) as usize)?;
            let line = lines[target];
            let marker = ["\"y\":\"", "\"ballot\":\"", "\"c\":\"", "\"a1\":\""]
                .iter()
                .find_map(|m| line.find(m).map(|at| at + m.len()))?;
            let old = line.as_bytes()[marker] as char;
            let new = if old == 'f' { 'e' } else { 'f' };
            let mut s = line.to_string();
            s.replace_range(marker..marker + 1, &new.to_string());
            let mut out: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
            out[target] = s;
            Some(out.join("\n"))
        }
        // swap a verdict label
        1 => {
            if transcript.contains("\"verdict\":\"admitted\"") {
                Some(transcript.replacen(
                    "\"verdict\":\"admitted\"",
                    "\"verdict\":\"rejected:ProofInvalid\"",
                    1,
                ))
            } else {
                None
            }
        }
        // corrupt a block digest
        2 => {
            let seals: Vec<usize> = (0..lines.len())
                .filter(|&i| lines[i].contains("\"kind\":\"seal\""))
                .collect();
            let &target = seals.get((r.next_u64() % seals.len() as u64) as usize)?;
            let line = lines[target];
            let at = line.find("\"digest\":\"")? + "\"digest\":\"".len();
            let old = line.as_bytes()[at] as char;
            let new = if old == '0' { '1' } else { '0' };
            let mut s = line.to_string();
            s.replace_range(at..at + 1, &new.to_string());
            let mut out: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
            out[target] = s;
            Some(out.join("\n"))
        }
        // drop an entry line entirely
        _ => {
            let entries: Vec<usize> = (0..lines.len())
                .filter(|&i| lines[i].contains("\"kind\":\"entry\""))
                .collect();
            let &target = entries.get((r.next_u64() % entries.len() as u64) as usize)?;
            let out: Vec<String> = lines
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != target)
                .map(|(_, l)| l.to_string())
                .collect();
            Some(out.join("\n"))
        }
    }
}

#[test]
fn a09_audit_round_trip() {
    let _guard = exclusive();
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(0xA09);
    let mut transcripts = Vec::new();
    for k in 0..100u32 {
        let n = 2 + (r.next_u32() % 5);
        let votes: Vec<String> = (0..n).map(|_| (r.next_u32() & 1).to_string()).collect();
        let abort_allowed = n >= 3 && r.next_u32().is_multiple_of(3);
        let transcript = dir.path().join(format!("t{k}.jsonl"));
        let mut args = vec![
            "run".to_string(),
            "--voters".to_string(),
            n.to_string(),
            "--votes".to_string(),
            votes.join(","),
            "--seed".to_string(),
            k.to_string(),
            "--group".to_string(),
            "test-tiny".to_string(),
            "--out".to_string(),
            transcript.to_str().unwrap().to_string(),
        ];
        if abort_allowed {
            args.push("--abort".to_string());
            args.push((1 + r.next_u32() % n).to_string());
        }
        let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = run_binary(&arg_refs);
        assert!(
            out.status.success(),
            "run failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let audit_out = run_binary(&["audit", transcript.to_str().unwrap(), "--json"]);
        assert!(audit_out.status.success(), "audit failed on honest run {k}");
        let audit: serde_json::Value = serde_json::from_slice(&audit_out.stdout).unwrap();
        assert_eq!(audit["ok"], true);
        assert_eq!(
            audit["outcome"]["result"]["count"], report["count"],
            "count mismatch on run {k}"
        );
        transcripts.push(std::fs::read_to_string(&transcript).unwrap());
    }
    println!("  [9] 100 run/audit pairs agree");

    let mut detected = 0;
    let mut attempts = 0u32;
    while detected < 100 {
        attempts += 1;
        assert!(attempts < 1000, "tamper generation stalled");
        let base = &transcripts[(r.next_u64() % transcripts.len() as u64) as usize];
        let op = r.next_u32() % 4;
        let Some(tampered) = tamper(base, op, &mut r) else {
            continue;
        };
        let path = dir.path().join("tampered.jsonl");
        std::fs::write(&path, &tampered).unwrap();
        let out = run_binary(&["audit", path.to_str().unwrap(), "--json"]);
        let code = out.status.code();
        assert_ne!(
            code,
            Some(0),
            "tamper op {op} went undetected:\n{}",
            String::from_utf8_lossy(&out.stdout)
        );
        detected += 1;
    }
    println!("  [9] {detected} injected tamperings all detected");
    pass(9, "audit round trip", t0);
}

// -------------------------------------------------------------------------
// 10. Benchmark trends in the standard group: per-phase medians are
//     nondecreasing in n over {3,6,9,12}; Vote's time(12)/time(3) lies in
//     [2.5, 6.0]; Tally is the cheapest phase at every n.
// -------------------------------------------------------------------------
#[test]
fn a10_benchmark_trends() {
    let _guard = exclusive();
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let out = run_binary(&[
        "bench",
        "--min",
        "3",
        "--max",
        "12",
        "--step",
        "3",
        "--reps",
        "10",
        "--group",
        "standard",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "bench failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut medians: BTreeMap<(String, u32), f64> = BTreeMap::new();
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        medians.insert(
            (cells[0].to_string(), cells[1].parse().unwrap()),
            cells[3].parse().unwrap(),
        );
    }
    let sizes = [3u32, 6, 9, 12];
    for phase in ["setup", "commit", "vote", "tally", "recover"] {
        for w in sizes.windows(2) {
            let a = medians[&(phase.to_string(), w[0])];
            let b = medians[&(phase.to_string(), w[1])];
            assert!(
                b >= a,
                "{phase} median regressed: {a:.4}ms at n={} vs {b:.4}ms at n={}",
                w[0],
                w[1]
            );
        }
    }
    let ratio = medians[&("vote".to_string(), 12)] / medians[&("vote".to_string(), 3)];
    assert!(
        (2.5..=6.0).contains(&ratio),
        "vote time(12)/time(3) = {ratio:.2} outside [2.5, 6.0]"
    );
    for n in sizes {
        let tally = medians[&("tally".to_string(), n)];
        for phase in ["setup", "commit", "vote", "recover"] {
            assert!(
                tally < medians[&(phase.to_string(), n)],
                "tally not cheapest at n={n}: {tally:.4}ms vs {phase}"
            );
        }
    }
    println!("  [10] vote ratio {:.2}, tally cheapest at every n", ratio);
    pass(10, "benchmark trends", t0);
}
