//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mppsi_core::audit::{run_check, AuditOptions, CheckKind, CheckReport, Instance, Mutation};
use mppsi_core::orchestrator::{
    demo, demo_config, run_in_memory, run_session, PartyConfig, Prepared, SessionConfig, Transport,
};
use mppsi_core::{brute_force_intersection, elect_leader, PartyId, PartyProfile};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(detail: impl Into<String>) -> Outcome {
    Outcome { pass: true, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { pass: false, detail: detail.into() }
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Independent download-cost oracle: `Σ ⌈R·N_i/(N_i−1)⌉` over the others.
fn oracle_cost(leader: &PartyConfig, parties: &[PartyConfig]) -> Option<u64> {
    let r = leader.set.len() as u64;
    parties
        .iter()
        .filter(|p| p.id != leader.id)
        .map(|p| {
            let n = p.databases as u64;
            (n >= 2).then(|| ceil_div(r * n, n - 1))
        })
        .sum()
}

fn golden(name: &str, intersection: &[u32], cost: usize, table: Option<(u32, u64)>) -> Outcome {
    let (report, t) = match demo(name) {
        Ok(r) => r,
        Err(e) => return fail(format!("{name}: {e}")),
    };
    let want: BTreeSet<u32> = intersection.iter().copied().collect();
    let mut problems = Vec::new();
    if t.result.intersection != want {
        problems.push(format!("intersection {:?}", t.result.intersection));
    }
    if t.result.download_cost_actual != cost {
        problems.push(format!("cost {}", t.result.download_cost_actual));
    }
    if let Some((party, c)) = table {
        if t.cost_table.cost_of(PartyId(party)) != Some(c) {
            problems.push(format!("D_{party} = {:?}", t.cost_table.cost_of(PartyId(party))));
        }
    }
    if !report.passed() {
        problems.push("demo self-check failed".into());
    }
    let mut detail = format!("{name}: decoded {:?}, cost {}", t.result.intersection, t.result.download_cost_actual);
    if let Some((party, _)) = table {
        detail += &format!(", cost table D_{party} = {:?}", t.cost_table.cost_of(PartyId(party)).unwrap_or(0));
    }
    if problems.is_empty() {
        ok(detail)
    } else {
        fail(format!("{detail}; wrong: {}", problems.join(", ")))
    }
}

fn random_config(rng: &mut ChaCha20Rng, max_parties: u32, max_k: u32, max_n: u32) -> SessionConfig {
    let m = rng.random_range(2..=max_parties);
    let k = rng.random_range(1..=max_k);
    SessionConfig {
        universe_size: k,
        parties: (1..=m)
            .map(|id| PartyConfig {
                id,
                databases: rng.random_range(1..=max_n),
                set: (1..=k).filter(|_| rng.random_bool(0.5)).collect(),
            })
            .collect(),
        leader: None,
        seed: rng.random(),
        transport: Transport::Memory,
        listen: None,
    }
}

fn cost_consistency() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (mut feasible, mut tried) = (0, 0);
    while feasible < 1000 {
        tried += 1;
        let cfg = random_config(&mut rng, 5, 8, 6);
        let costs: Vec<Option<u64>> = cfg.parties.iter().map(|p| oracle_cost(p, &cfg.parties)).collect();
        let best = costs.iter().flatten().min().copied();
        let Some(best) = best else {
            if run_session(&cfg).is_ok() {
                return fail(format!("infeasible config ran: {cfg:?}"));
            }
            continue;
        };
        feasible += 1;
        let want_leader = cfg.parties[costs.iter().position(|c| *c == Some(best)).unwrap()].id;
        let (leader, table) = match elect_leader(&cfg.profiles()) {
            Ok(x) => x,
            Err(e) => return fail(format!("election failed on a feasible config: {e}")),
        };
        if leader != PartyId(want_leader) {
            return fail(format!("elected {leader}, expected P{want_leader} for {cfg:?}"));
        }
        for p in &cfg.parties {
            if table.cost_of(PartyId(p.id)) != oracle_cost(p, &cfg.parties) {
                return fail(format!("cost table disagrees for P{} in {cfg:?}", p.id));
            }
        }
        let t = match run_session(&cfg) {
            Ok(t) => t,
            Err(e) => return fail(format!("session failed: {e}")),
        };
        if t.result.download_cost_actual as u64 != best {
            return fail(format!("actual cost {} != {best} for {cfg:?}", t.result.download_cost_actual));
        }
        if t.result.intersection != brute_force_intersection(&cfg.profiles()) {
            return fail(format!("wrong intersection for {cfg:?}"));
        }
    }
    ok(format!("{feasible} feasible of {tried} random instances: actual cost equals the formula, leader is the argmin"))
}

fn subsets(k: u32) -> Vec<Vec<u32>> {
    (0u32..1 << k).map(|m| (1..=k).filter(|e| m >> (e - 1) & 1 == 1).collect()).collect()
}

/// Enumerates every instance of the reliability grid under a per-instance
/// bound; spaces above it are swept by seeded sampling.
fn reliability_grid() -> Outcome {
    let opts = AuditOptions { bound: 16_384, ..AuditOptions::default() };
    let (mut instances, mut exhaustive, mut evaluations) = (0u64, 0u64, 0u128);
    for m in 2..=3u32 {
        for k in 1..=4u32 {
            let sets = subsets(k);
            let mut choice = vec![0usize; m as usize];
            loop {
                for ns in 0..1u32 << m {
                    let profiles: Vec<PartyProfile> = (0..m)
                        .map(|i| PartyProfile::new(i + 1, 2 + (ns >> i & 1), sets[choice[i as usize]].iter().copied()))
                        .collect();
                    let (leader, _) = elect_leader(&profiles).expect("N_i >= 2 is always feasible");
                    let (l, clients): (Vec<_>, Vec<_>) = profiles.into_iter().partition(|p| p.id == leader);
                    let inst = Instance::new(k, l.into_iter().next().unwrap(), clients).unwrap();
                    let r = match run_check(CheckKind::Reliability, &inst, &opts) {
                        Ok(r) => r,
                        Err(e) => return fail(format!("instance {inst:?}: {e}")),
                    };
                    if !r.pass {
                        return fail(format!("decoding wrong on {inst:?}: {}", r.detail));
                    }
                    instances += 1;
                    exhaustive += r.coverage.is_exhaustive() as u64;
                    evaluations += r.evaluations;
                }
                // Odometer over the per-party subset choices.
                let mut i = 0;
                while i < choice.len() {
                    choice[i] += 1;
                    if choice[i] < sets.len() {
                        break;
                    }
                    choice[i] = 0;
                    i += 1;
                }
                if i == choice.len() {
                    break;
                }
            }
        }
    }
    ok(format!(
        "{instances} instances, {evaluations} decodings, all correct; {exhaustive} enumerated completely, the rest sampled under the per-instance bound"
    ))
}

fn all_equal(report: &CheckReport, p: Ratio<u128>, support: u64) -> bool {
    report.distributions.iter().all(|(_, t)| {
        let probs = t.probabilities();
        probs.len() as u64 == support && probs.values().all(|&q| q == p)
    })
}

fn lemmas() -> Outcome {
    let inst = Instance::from_config(&demo_config("sec4").unwrap()).unwrap();
    let l = inst.field.modulus() as u128;
    let plain = AuditOptions::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for (kind, control) in [
        (CheckKind::Lemma1, Mutation::ZeroLocal),
        (CheckKind::Lemma2, Mutation::ZeroIndividual),
        (CheckKind::Lemma3, Mutation::DisableGlobal),
    ] {
        let r = match run_check(kind, &inst, &plain) {
            Ok(r) => r,
            Err(e) => return fail(format!("{kind}: {e}")),
        };
        let exact = match kind {
            CheckKind::Lemma3 => r
                .distributions
                .iter()
                .filter(|(_, t)| !t.probabilities().contains_key(&vec![0]))
                .all(|(_, t)| {
                    let p = t.probabilities();
                    p.len() as u128 == l - 1 && p.values().all(|&q| q == Ratio::new(1, l - 1))
                }),
            _ => all_equal(&r, Ratio::new(1, l), l as u64),
        };
        let neg = run_check(kind, &inst, &AuditOptions { mutation: control, ..AuditOptions::default() })
            .map(|r| !r.pass)
            .unwrap_or(false);
        let this = r.pass && r.coverage.is_exhaustive() && exact && neg;
        pass &= this;
        lines.push(format!(
            "{kind} {} ({} tables, control {control:?} {})",
            if this { "exact" } else { "NOT exact" },
            r.distributions.len(),
            if neg { "detected" } else { "missed" }
        ));
    }
    let detail = lines.join("; ");
    if pass {
        ok(detail)
    } else {
        fail(detail)
    }
}

/// Every leader-set and replica-count choice of a three-party instance
/// over `K ≤ 3` elements, with party 3 leading.
fn mi_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for k in 1..=3u32 {
        for leader_set in subsets(k).into_iter().filter(|s| !s.is_empty()) {
            for ns in 0..4u32 {
                let clients = vec![
                    PartyProfile::new(1, 2 + (ns & 1), 1..k),
                    PartyProfile::new(2, 2 + (ns >> 1 & 1), 2..=k),
                ];
                out.push(Instance::new(k, PartyProfile::new(3, 3, leader_set.clone()), clients).unwrap());
            }
        }
    }
    out
}

fn describe(inst: &Instance) -> String {
    format!(
        "K={} leader set {:?} N=({},{})",
        inst.universe.size(),
        inst.leader.data_set,
        inst.clients[0].num_databases,
        inst.clients[1].num_databases
    )
}

fn privacy_mi() -> Outcome {
    let opts = AuditOptions::default();
    let mut notes = Vec::new();
    let mut pass = true;

    let (mut leader_ok, mut leader_runs, mut leader_skipped) = (0, 0, 0);
    let (mut client_ok, mut client_runs, mut client_skipped) = (0, 0, 0);
    let mut leaks = Vec::new();
    for inst in mi_instances() {
        assert_eq!(inst.field.modulus(), 3);
        match run_check(CheckKind::LeaderMi, &inst, &opts) {
            Ok(r) => {
                leader_runs += 1;
                leader_ok += r.pass as u32;
                if !r.pass {
                    pass = false;
                    notes.push(format!("database view leaks the leader set on {}", describe(&inst)));
                }
            }
            Err(_) => leader_skipped += 1,
        }
        match run_check(CheckKind::ClientMi, &inst, &opts) {
            Ok(r) => {
                client_runs += 1;
                client_ok += r.pass as u32;
                if !r.pass {
                    pass = false;
                    leaks.push(format!("{} ({:.4} bits)", describe(&inst), r.information[0].bits));
                }
            }
            Err(_) => client_skipped += 1,
        }
    }
    notes.insert(0, format!("leader-side I = 0 on {leader_ok}/{leader_runs} instances ({leader_skipped} over bound)"));
    notes.insert(1, format!("client-side I = 0 on {client_ok}/{client_runs} instances ({client_skipped} over bound)"));
    if !leaks.is_empty() {
        notes.push(format!("client-side I > 0 on {}", leaks.join(", ")));
    }

    // Controls on an instance the unmutated scheme passes.
    let control = Instance::new(
        2,
        PartyProfile::new(3, 3, [1]),
        vec![PartyProfile::new(1, 3, [1]), PartyProfile::new(2, 3, [2])],
    )
    .unwrap();
    let base = run_check(CheckKind::ClientMi, &control, &opts).map(|r| r.pass).unwrap_or(false);
    let no_c = run_check(CheckKind::ClientMi, &control, &AuditOptions { mutation: Mutation::DisableGlobal, ..opts.clone() });
    let no_c_bits = no_c.as_ref().map(|r| r.information[0].bits).unwrap_or(0.0);
    let broken = run_check(CheckKind::Reliability, &control, &AuditOptions { mutation: Mutation::BreakCorrelation, ..opts.clone() })
        .map(|r| !r.pass)
        .unwrap_or(false);
    let controls = base && no_c.map(|r| !r.pass).unwrap_or(false) && no_c_bits > 0.0 && broken;
    pass &= controls;
    notes.push(format!(
        "controls: c disabled gives I = {no_c_bits:.4} bits, broken correlation {} reliability",
        if broken { "fails" } else { "passes" }
    ));
    let detail = notes.join("; ");
    if pass {
        ok(detail)
    } else {
        fail(detail)
    }
}

fn transport_equivalence() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut done = 0;
    while done < 100 {
        let mut cfg = random_config(&mut rng, 4, 6, 4);
        if cfg.parties.iter().all(|p| oracle_cost(p, &cfg.parties).is_none()) {
            continue;
        }
        let mem = match run_session(&cfg) {
            Ok(t) => t,
            Err(e) => return fail(format!("memory run failed: {e}")),
        };
        cfg.transport = Transport::Network;
        let net = match run_session(&cfg) {
            Ok(t) => t,
            Err(e) => return fail(format!("networked run failed: {e}")),
        };
        if mem.message_multiset() != net.message_multiset() {
            return fail(format!("message multisets differ for {cfg:?}"));
        }
        if mem.result != net.result {
            return fail(format!("results differ for {cfg:?}"));
        }
        done += 1;
    }
    ok(format!("{done} random configs: identical message multisets and results over loopback"))
}

fn determinism() -> Outcome {
    let mut cfg = demo_config("sec7_2").unwrap();
    cfg.seed = 99;
    let prep = Prepared::new(&cfg).unwrap();
    let dir = std::env::temp_dir().join(format!("mppsi-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut files = Vec::new();
    for i in 0..10 {
        // A fresh preparation each time, so nothing is reused between runs.
        let prep = if i == 0 { prep.clone() } else { Prepared::new(&cfg).unwrap() };
        let path = dir.join(format!("t{i}.json"));
        std::fs::write(&path, run_in_memory(&prep).unwrap().to_json()).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    std::fs::remove_dir_all(&dir).ok();
    if files.windows(2).all(|w| w[0] == w[1]) {
        ok(format!("10 transcript files byte-identical ({} bytes)", files[0].len()))
    } else {
        fail("transcripts differ between repeats")
    }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("golden example sec4", Duration::from_secs(1), || golden("sec4", &[1], 6, None)),
        ("golden example sec7_1", Duration::from_secs(1), || golden("sec7_1", &[1], 8, None)),
        ("golden example sec7_2", Duration::from_secs(1), || golden("sec7_2", &[1, 4], 15, Some((2, 14)))),
        ("download cost formula", Duration::from_secs(10), cost_consistency),
        ("reliability grid", Duration::from_secs(60), reliability_grid),
        ("uniformity lemmas", Duration::from_secs(30), lemmas),
        ("mutual information", Duration::from_secs(300), privacy_mi),
        ("transport equivalence", Duration::from_secs(60), transport_equivalence),
        ("determinism", Duration::from_secs(10), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_time = took <= limit;
        let pass = out.pass && in_time;
        failed += !pass as u32;
        println!(
            "criterion {}: {} {name}: {} [{:.2?} of {:?}{}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took,
            limit,
            if in_time { "" } else { ", too slow" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
