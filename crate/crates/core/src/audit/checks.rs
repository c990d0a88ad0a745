use std::collections::BTreeMap;

use crate::error::Result;
use crate::model::brute_force_intersection;

use super::eval::Layout;
use super::mi::DistributionTable;
use super::space::{for_each_inner, sweep, Coverage};
use super::{AuditOptions, CheckKind, CheckReport, Instance};

/// Keeps the weakest coverage seen across sub-sweeps.
fn weakest(acc: Option<Coverage>, next: Coverage) -> Option<Coverage> {
    match (acc, next) {
        (None, c) => Some(c),
        (Some(a), _) if !a.is_exhaustive() => Some(a),
        (Some(_), c) if !c.is_exhaustive() => Some(c),
        (Some(a), _) => Some(a),
    }
}

/// Caches inner products across visits with the same base vectors.
struct IpCache {
    h: Option<Vec<u64>>,
    ip: Vec<u64>,
}

impl IpCache {
    fn new() -> Self {
        Self { h: None, ip: Vec::new() }
    }

    fn get(&mut self, layout: &Layout, h: &[u64], opts: &AuditOptions) -> &[u64] {
        if self.h.as_deref() != Some(h) {
            layout.inner_products(h, opts.mutation, &mut self.ip);
            self.h = Some(h.to_vec());
        }
        &self.ip
    }
}

/// Decoding returns the true intersection on every visited realization.
pub fn check_reliability(instance: &Instance, opts: &AuditOptions) -> Result<CheckReport> {
    let layout = Layout::new(instance)?;
    let truth = brute_force_intersection(&instance.profiles());
    let expect_zero: Vec<bool> = layout.plan.leader_set.iter().map(|e| truth.contains(e)).collect();
    let r = expect_zero.len();
    let mut cache = IpCache::new();
    let (mut t, mut ans, mut e) = (Vec::new(), Vec::new(), vec![0; r]);
    let (mut evaluations, mut failures) = (0u128, 0u128);
    let mut first_failure = None;
    let coverage = sweep(&layout.rand, layout.h_len(), &[], opts, |h, d| {
        let ip = cache.get(&layout, h, opts);
        layout.answers(ip, d, opts.mutation, &mut t, &mut ans);
        layout.decoder.indicators_into(&ans, &mut e);
        evaluations += 1;
        if e.iter().zip(&expect_zero).any(|(&v, &z)| (v == 0) != z) {
            failures += 1;
            if first_failure.is_none() {
                first_failure = Some(layout.decoder.intersection_of(&e));
            }
        }
        true
    })?;
    let detail = match &first_failure {
        None => format!("decoded {truth:?} on all {evaluations} realizations"),
        Some(got) => format!("{failures} of {evaluations} realizations decoded wrongly, first {got:?} instead of {truth:?}"),
    };
    Ok(CheckReport::new(CheckKind::Reliability, opts, failures == 0, coverage, evaluations, detail))
}

fn all_outcomes(l: u64, len: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..l).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn index_of(values: impl Iterator<Item = u64>, l: u64) -> usize {
    values.fold((0usize, 1usize), |(acc, m), v| (acc + v as usize * m, m * l as usize)).0
}

/// Database-1 answers of each client are jointly uniform as its local
/// randomness varies, for every fixed remainder.
pub fn check_db1_uniformity(instance: &Instance, opts: &AuditOptions) -> Result<CheckReport> {
    let layout = Layout::new(instance)?;
    let l = layout.field.modulus();
    if layout.slots.is_empty() {
        return Ok(CheckReport::vacuous(CheckKind::Lemma1, opts, "empty leader set"));
    }
    let (mut t, mut ans) = (Vec::new(), Vec::new());
    let mut cache = IpCache::new();
    let mut pass = true;
    let mut evaluations = 0u128;
    let mut coverage = None;
    let mut tables = Vec::new();
    for (i, party) in instance.clients.iter().enumerate() {
        let inner: Vec<usize> = layout.rand.local_positions(i).collect();
        let db1: Vec<usize> = (0..layout.slots.len())
            .filter(|&s| layout.slots[s].client == i && layout.slots[s].dest.database == 1)
            .collect();
        let mut marginal = DistributionTable::new();
        let mut counts = vec![0u32; (l as usize).pow(db1.len() as u32)];
        let cov = sweep(&layout.rand, layout.h_len(), &inner, opts, |h, d| {
            let ip = cache.get(&layout, h, opts).to_vec();
            counts.iter_mut().for_each(|c| *c = 0);
            for_each_inner(d, &layout.rand.radices, &inner, |d| {
                layout.answers(&ip, d, opts.mutation, &mut t, &mut ans);
                counts[index_of(db1.iter().map(|&s| ans[s]), l)] += 1;
                marginal.add(vec![ans[db1[0]]], 1);
                evaluations += 1;
            });
            if counts.iter().any(|&c| c != 1) {
                pass = false;
            }
            true
        })?;
        pass &= marginal.is_uniform_over(&all_outcomes(l, 1));
        coverage = weakest(coverage, cov);
        tables.push((format!("A({party_id},1) partition 1", party_id = party.id), marginal));
    }
    let detail = if pass {
        "database-1 answers uniform over every local-randomness orbit".to_string()
    } else {
        "database-1 answers not uniform".to_string()
    };
    let mut report = CheckReport::new(CheckKind::Lemma1, opts, pass, coverage.unwrap_or(Coverage::Vacuous), evaluations, detail);
    report.distributions = tables;
    Ok(report)
}

/// Differences `Z_{i,k}` of the clients with free individual randomness are
/// jointly uniform as that randomness varies, for every fixed remainder.
pub fn check_z_uniformity(instance: &Instance, opts: &AuditOptions) -> Result<CheckReport> {
    let layout = Layout::new(instance)?;
    let l = layout.field.modulus();
    let r = layout.rand.ranks;
    let free_clients = layout.rand.correlating;
    if free_clients == 0 || r == 0 {
        return Ok(CheckReport::vacuous(CheckKind::Lemma2, opts, "no client with free individual randomness"));
    }
    let (mut t, mut ans, mut z) = (Vec::new(), Vec::new(), vec![0; layout.shape.num_clients() * r]);
    let mut cache = IpCache::new();
    let mut pass = true;
    let mut evaluations = 0u128;
    let mut coverage = None;
    let mut tables = Vec::new();
    for i in 0..free_clients {
        let inner: Vec<usize> = layout.rand.free_positions(i).collect();
        let mut marginals = vec![DistributionTable::new(); r];
        let mut counts = vec![0u32; (l as usize).pow(r as u32)];
        let cov = sweep(&layout.rand, layout.h_len(), &inner, opts, |h, d| {
            let ip = cache.get(&layout, h, opts).to_vec();
            counts.iter_mut().for_each(|c| *c = 0);
            for_each_inner(d, &layout.rand.radices, &inner, |d| {
                layout.answers(&ip, d, opts.mutation, &mut t, &mut ans);
                layout.decoder.differences_into(&ans, &mut z);
                let row = &z[i * r..(i + 1) * r];
                counts[index_of(row.iter().copied(), l)] += 1;
                for (m, &v) in marginals.iter_mut().zip(row) {
                    m.add(vec![v], 1);
                }
                evaluations += 1;
            });
            if counts.iter().any(|&c| c != 1) {
                pass = false;
            }
            true
        })?;
        coverage = weakest(coverage, cov);
        for (k, m) in marginals.into_iter().enumerate() {
            pass &= m.is_uniform_over(&all_outcomes(l, 1));
            tables.push((format!("Z({},{})", instance.clients[i].id, layout.plan.leader_set[k]), m));
        }
    }
    let detail = if pass {
        "differences uniform over every individual-randomness orbit".to_string()
    } else {
        "differences not uniform".to_string()
    };
    let mut report = CheckReport::new(CheckKind::Lemma2, opts, pass, coverage.unwrap_or(Coverage::Vacuous), evaluations, detail);
    report.distributions = tables;
    Ok(report)
}

/// For every leader element and every column pattern of the clients,
/// `E_k` over `c` is zero when the column is full and uniform over the
/// nonzero residues otherwise, identically for every deficient sum.
pub fn check_indicator_privacy(instance: &Instance, opts: &AuditOptions) -> Result<CheckReport> {
    let base = Layout::new(instance)?;
    let l = base.field.modulus();
    let r = base.rand.ranks;
    let m1 = instance.clients.len();
    if r == 0 {
        return Ok(CheckReport::vacuous(CheckKind::Lemma3, opts, "empty leader set"));
    }
    let inner = [base.rand.c_pos];
    let nonzero: Vec<Vec<u64>> = (1..l).map(|v| vec![v]).collect();
    let (mut t, mut ans, mut e) = (Vec::new(), Vec::new(), vec![0; r]);
    let mut pass = true;
    let mut evaluations = 0u128;
    let mut coverage = None;
    let mut tables = Vec::new();
    let mut failures = Vec::new();
    for k in 0..r {
        let element = base.plan.leader_set[k];
        let mut by_sum: BTreeMap<usize, DistributionTable> = BTreeMap::new();
        for pattern in 0u64..1 << m1 {
            let mut layout = base.clone();
            for (i, x) in layout.incidence.iter_mut().enumerate() {
                x[element as usize - 1] = (pattern >> i) & 1;
            }
            let sum = pattern.count_ones() as usize;
            let full = sum == m1;
            let table = by_sum.entry(sum).or_default();
            let mut cache = IpCache::new();
            let mut counts = vec![0u32; l as usize];
            let mut ok = true;
            let cov = sweep(&layout.rand, layout.h_len(), &inner, opts, |h, d| {
                let ip = cache.get(&layout, h, opts).to_vec();
                counts.iter_mut().for_each(|c| *c = 0);
                for_each_inner(d, &layout.rand.radices, &inner, |d| {
                    layout.answers(&ip, d, opts.mutation, &mut t, &mut ans);
                    layout.decoder.indicators_into(&ans, &mut e);
                    counts[e[k] as usize] += 1;
                    table.add(vec![e[k]], 1);
                    evaluations += 1;
                });
                let orbit_ok = if full {
                    counts[0] == l as u32 - 1
                } else {
                    counts[0] == 0 && counts[1..].iter().all(|&c| c == 1)
                };
                ok &= orbit_ok;
                true
            })?;
            coverage = weakest(coverage, cov);
            if !ok {
                pass = false;
                failures.push(format!("element {element}, column pattern {pattern:0m1$b}"));
            }
        }
        let deficient: Vec<&DistributionTable> = by_sum.iter().filter(|(&s, _)| s < m1).map(|(_, t)| t).collect();
        for tbl in &deficient {
            pass &= tbl.is_uniform_over(&nonzero);
        }
        if deficient.windows(2).any(|w| !w[0].same_distribution(w[1])) {
            pass = false;
            failures.push(format!("element {element}: distributions differ across deficient sums"));
        }
        for (sum, tbl) in by_sum {
            tables.push((format!("E({element}) column sum {sum}"), tbl));
        }
    }
    let detail = if pass {
        "indicators zero on full columns, uniform over nonzero residues otherwise".to_string()
    } else {
        format!("indicator masking fails: {}", failures.join("; "))
    };
    let mut report = CheckReport::new(CheckKind::Lemma3, opts, pass, coverage.unwrap_or(Coverage::Vacuous), evaluations, detail);
    report.distributions = tables;
    Ok(report)
}
