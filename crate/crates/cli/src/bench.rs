//! Per-phase wall-time measurement across voter counts.
//!
//! Each repetition executes one phase's full workload for all `n` voters,
//! so phase cost scales with the whole roster rather than a single
//! participant. Sub-millisecond phases are timed over an adaptive inner
//! loop so the reported per-execution time is stable.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use selftally::group::{Group, GroupElement};
use selftally::protocol::{
    cast_vote, commit, keygen, recover_tally, recover_vote, recovery_share, tally, Roster,
    VoterState,
};

pub const PHASES: [&str; 5] = ["setup", "commit", "vote", "tally", "recover"];

#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub phase: &'static str,
    pub n: u32,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub reps: u32,
}

/// Milliseconds per execution of `f`, looped until the measurement window
/// is wide enough to trust.
fn measure<F: FnMut()>(mut f: F) -> f64 {
    let t0 = Instant::now();
    f();
    let first = t0.elapsed();
    if first >= Duration::from_millis(2) {
        return first.as_secs_f64() * 1e3;
    }
    let iters = (4_000_000u128 / first.as_nanos().max(1)).clamp(1, 2000) as u32;
    let t1 = Instant::now();
    for _ in 0..iters {
        f();
    }
    t1.elapsed().as_secs_f64() * 1e3 / f64::from(iters)
}

fn stats(mut samples: Vec<f64>) -> (f64, f64) {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(|a, b| a.partial_cmp(b).expect("no NaN timings"));
    let mid = samples.len() / 2;
    let median = if samples.len().is_multiple_of(2) {
        (samples[mid - 1] + samples[mid]) / 2.0
    } else {
        samples[mid]
    };
    (mean, median)
}

struct Fixture {
    group: Group,
    eid: Vec<u8>,
    votes: Vec<u8>,
    registered: Vec<VoterState>,
    roster: Roster,
    committed: Vec<VoterState>,
    betas: BTreeMap<u32, GroupElement>,
    commitments: BTreeMap<u32, GroupElement>,
    voted: Vec<VoterState>,
    ballots: BTreeMap<u32, GroupElement>,
}

impl Fixture {
    fn build(group: &Group, n: u32, seed: u64) -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let eid = b"bench".to_vec();
        let votes: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let mut registered = Vec::new();
        let mut keys = Vec::new();
        for i in 1..=n {
            let (st, msg) =
                keygen(group, i, votes[i as usize - 1], &eid, &mut rng).expect("bench keygen");
            keys.push((i, msg.y));
            registered.push(st);
        }
        let roster = Roster::new(keys);
        let mut committed = registered.clone();
        let mut betas = BTreeMap::new();
        let mut commitments = BTreeMap::new();
        for st in committed.iter_mut() {
            let i = st.index();
            let big_y = roster.aggregate_y(group, i).expect("bench Y");
            let msg = commit(st, group, &big_y, &eid, &mut rng).expect("bench commit");
            betas.insert(i, msg.beta);
            commitments.insert(i, msg.c);
        }
        let mut voted = committed.clone();
        let mut ballots = BTreeMap::new();
        for st in voted.iter_mut() {
            let i = st.index();
            let big_y = roster.aggregate_y(group, i).expect("bench Y");
            let h = roster.mask_h(group, i).expect("bench h");
            let msg = cast_vote(st, group, &big_y, &h, &eid, &mut rng).expect("bench vote");
            ballots.insert(i, msg.ballot);
        }
        Fixture {
            group: group.clone(),
            eid,
            votes,
            registered,
            roster,
            committed,
            betas,
            commitments,
            voted,
            ballots,
        }
    }

    fn run_phase(&self, phase: &str, rng: &mut ChaCha20Rng) {
        let g = &self.group;
        let n = self.votes.len() as u32;
        match phase {
            "setup" => {
                for i in 1..=n {
                    keygen(g, i, self.votes[i as usize - 1], &self.eid, rng).expect("bench keygen");
                }
            }
            "commit" => {
                let mut states = self.registered.clone();
                for st in states.iter_mut() {
                    let big_y = self.roster.aggregate_y(g, st.index()).expect("bench Y");
                    commit(st, g, &big_y, &self.eid, rng).expect("bench commit");
                }
            }
            "vote" => {
                let mut states = self.committed.clone();
                for st in states.iter_mut() {
                    let i = st.index();
                    let big_y = self.roster.aggregate_y(g, i).expect("bench Y");
                    let h = self.roster.mask_h(g, i).expect("bench h");
                    cast_vote(st, g, &big_y, &h, &self.eid, rng).expect("bench vote");
                }
            }
            "tally" => {
                tally(g, &self.roster, &self.ballots).expect("bench tally");
            }
            "recover" => {
                // the last voter aborted after committing
                let aborter = n;
                let aborted: BTreeSet<u32> = [aborter].into();
                let mut ballots = self.ballots.clone();
                ballots.remove(&aborter);
                let mut corrections = BTreeMap::new();
                let mut factors = BTreeMap::new();
                for st in self.voted.iter().filter(|s| s.index() != aborter) {
                    let msg =
                        recovery_share(st, g, &aborted, &self.roster, &self.betas, &self.eid, rng)
                            .expect("bench share");
                    corrections.insert(st.index(), msg.correction);
                    factors.insert(st.index(), msg.shares[0].factor.clone());
                }
                let expected: BTreeSet<u32> = self.roster.indices().collect();
                let v = recover_vote(g, aborter, &self.commitments[&aborter], &factors, &expected)
                    .expect("bench recover_vote");
                let recovered: BTreeMap<u32, u8> = [(aborter, v)].into();
                recover_tally(g, &ballots, &corrections, &recovered).expect("bench recover_tally");
            }
            other => unreachable!("unknown phase {other}"),
        }
    }
}

/// Times all five phases for each `n` in `min..=max` stepping by `step`.
pub fn run_bench(group: &Group, min: u32, max: u32, step: u32, reps: u32) -> Vec<BenchRecord> {
    // warmup: one untimed pass so the first timed size does not absorb
    // cold caches and frequency ramp-up
    {
        let fixture = Fixture::build(group, min, 0xFEED);
        let mut rng = ChaCha20Rng::seed_from_u64(0xFEED);
        for phase in PHASES {
            fixture.run_phase(phase, &mut rng);
        }
    }
    let mut records = Vec::new();
    let mut n = min;
    while n <= max {
        let fixture = Fixture::build(group, n, 0xB0A7 + u64::from(n));
        for phase in PHASES {
            let mut samples = Vec::with_capacity(reps as usize);
            for rep in 0..reps {
                let mut rng = ChaCha20Rng::seed_from_u64(u64::from(n) << 16 | u64::from(rep));
                samples.push(measure(|| fixture.run_phase(phase, &mut rng)));
            }
            let (mean_ms, median_ms) = stats(samples);
            records.push(BenchRecord {
                phase,
                n,
                mean_ms,
                median_ms,
                reps,
            });
        }
        n += step;
    }
    records
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("phase,n,mean_ms,median_ms\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            r.phase, r.n, r.mean_ms, r.median_ms
        ));
    }
    out
}
