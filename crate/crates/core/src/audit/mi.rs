//! Exact distributions, views and mutual information by enumeration.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_rational::Ratio;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Endpoint, PartyProfile};
use crate::orchestrator::{Message, SessionTranscript};
use crate::randomness::RandomnessShareMsg;

use super::eval::Layout;
use super::space::{advance, product};
use super::{AuditOptions, Instance};

/// Outcome counts of an enumeration; probabilities are exact ratios.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DistributionTable {
    counts: BTreeMap<Vec<u64>, u128>,
    total: u128,
}

impl DistributionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, outcome: Vec<u64>, weight: u128) {
        *self.counts.entry(outcome).or_default() += weight;
        self.total += weight;
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn count(&self, outcome: &[u64]) -> u128 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }

    pub fn probability(&self, outcome: &[u64]) -> Ratio<u128> {
        Ratio::new(self.count(outcome), self.total.max(1))
    }

    pub fn probabilities(&self) -> BTreeMap<Vec<u64>, Ratio<u128>> {
        self.counts
            .iter()
            .map(|(o, &n)| (o.clone(), Ratio::new(n, self.total)))
            .collect()
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &Vec<u64>> {
        self.counts.keys()
    }

    /// Whether the probabilities add up to exactly one.
    pub fn sums_to_one(&self) -> bool {
        self.total > 0 && self.probabilities().values().fold(Ratio::from_integer(0), |a, &p| a + p) == Ratio::from_integer(1)
    }

    /// Exactly uniform over `support` and zero elsewhere.
    pub fn is_uniform_over(&self, support: &[Vec<u64>]) -> bool {
        let want = Ratio::new(1, support.len() as u128);
        self.counts.len() == support.len() && support.iter().all(|o| self.probability(o) == want)
    }

    /// Same probabilities, possibly from different totals.
    pub fn same_distribution(&self, other: &Self) -> bool {
        self.probabilities() == other.probabilities()
    }
}

impl Serialize for DistributionTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.counts.len()))?;
        for (o, p) in self.probabilities() {
            let key = o.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
            map.serialize_entry(&key, &format!("{}/{}", p.numer(), p.denom()))?;
        }
        map.end()
    }
}

/// Whose view is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewSpec {
    /// Queries issued, answers received and the leader's own set; the secret
    /// is the clients' incidence columns outside the intersection.
    Leader,
    /// Queries received, answers sent, the party's own set and the
    /// randomness resident at the database; the secret is the leader set.
    Database(Endpoint),
}

impl fmt::Display for ViewSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewSpec::Leader => write!(f, "leader"),
            ViewSpec::Database(e) => write!(f, "database {e}"),
        }
    }
}

/// A view as a participant holds it, read off a transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub queries: Vec<(Endpoint, u32, Vec<u64>)>,
    pub answers: Vec<(Endpoint, u32, u64)>,
    pub randomness: Vec<RandomnessShareMsg>,
    pub own_set: BTreeSet<u32>,
}

impl ViewSpec {
    /// Collects the view from transcript messages by phase tag and address.
    pub fn extract(&self, t: &SessionTranscript, own: &PartyProfile) -> View {
        let mut v = View {
            queries: Vec::new(),
            answers: Vec::new(),
            randomness: Vec::new(),
            own_set: own.data_set.clone(),
        };
        let sees = |e: Endpoint| match self {
            ViewSpec::Leader => e == Endpoint::party_itself(t.leader),
            ViewSpec::Database(me) => e == *me,
        };
        for env in &t.messages {
            match &env.message {
                Message::Randomness(r) if sees(r.origin) || sees(r.dest) => v.randomness.push(r.clone()),
                Message::Query(q) if sees(q.origin) || sees(q.dest) => {
                    v.queries.push((q.dest, q.partition, q.vector.iter().map(|x| x.value()).collect()))
                }
                Message::Answer(a) if sees(a.origin) || sees(a.dest) => {
                    v.answers.push((a.origin, a.partition, a.value.value()))
                }
                _ => {}
            }
        }
        v.queries.sort();
        v.answers.sort();
        v
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MiReport {
    pub view: ViewSpec,
    /// Mutual information in bits, computed from the exact counts.
    pub bits: f64,
    /// Exact conditional independence of secret and view.
    pub zero: bool,
    pub outcomes: u128,
    pub secrets: usize,
    pub views: usize,
}

/// Counts over `(condition, secret, view)`.
#[derive(Default)]
pub(crate) struct Joint {
    views: HashMap<Vec<u64>, u32>,
    cells: HashMap<(u64, u64, u32), u128>,
}

impl Joint {
    pub fn add(&mut self, cond: u64, secret: u64, view: &[u64]) {
        let next = self.views.len() as u32;
        let id = match self.views.get(view) {
            Some(&id) => id,
            None => {
                self.views.insert(view.to_vec(), next);
                next
            }
        };
        *self.cells.entry((cond, secret, id)).or_default() += 1;
    }

    /// `I(secret; view | cond)`, with an exact zero test.
    pub fn finish(&self, view: ViewSpec) -> MiReport {
        let mut n_c: HashMap<u64, u128> = HashMap::new();
        let mut n_cs: HashMap<(u64, u64), u128> = HashMap::new();
        let mut n_cv: HashMap<(u64, u32), u128> = HashMap::new();
        let mut total = 0u128;
        for (&(c, s, v), &n) in &self.cells {
            *n_c.entry(c).or_default() += n;
            *n_cs.entry((c, s)).or_default() += n;
            *n_cv.entry((c, v)).or_default() += n;
            total += n;
        }
        let mut zero = true;
        let mut bits = 0.0;
        for (&(c, s, v), &n) in &self.cells {
            let (nc, ns, nv) = (n_c[&c], n_cs[&(c, s)], n_cv[&(c, v)]);
            if n * nc != ns * nv {
                zero = false;
            }
            bits += n as f64 / total as f64 * ((n as f64 * nc as f64) / (ns as f64 * nv as f64)).log2();
        }
        // Every (secret, view) pair allowed by the condition must occur.
        for &c in n_c.keys() {
            let secrets = n_cs.keys().filter(|k| k.0 == c).count();
            let views = n_cv.keys().filter(|k| k.0 == c).count();
            let cells = self.cells.keys().filter(|k| k.0 == c).count();
            if cells != secrets * views {
                zero = false;
            }
        }
        MiReport {
            view,
            bits: if zero { 0.0 } else { bits.max(0.0) },
            zero,
            outcomes: total,
            secrets: n_cs.keys().map(|k| k.1).collect::<BTreeSet<_>>().len(),
            views: self.views.len(),
        }
    }
}

fn check_space(parts: &[Option<u128>], opts: &AuditOptions) -> Result<()> {
    let space = parts
        .iter()
        .try_fold(1u128, |a, p| p.and_then(|p| a.checked_mul(p)))
        .unwrap_or(u128::MAX);
    if space > opts.bound {
        return Err(Error::BoundExceeded { space, bound: opts.bound });
    }
    Ok(())
}

/// Loops over every base-vector and randomness realization of `layout`.
fn for_each_realization(layout: &Layout, mut f: impl FnMut(&[u64], &[u64])) {
    let l = layout.field.modulus();
    let h_radices = vec![l; layout.h_len()];
    let mut h = vec![0; layout.h_len()];
    let mut d = vec![0; layout.rand.radices.len()];
    loop {
        loop {
            f(&h, &d);
            if !advance(&mut d, &layout.rand.radices, 0..layout.rand.radices.len()) {
                break;
            }
        }
        if !advance(&mut h, &h_radices, 0..h_radices.len()) {
            break;
        }
    }
}

/// `I(X_P̄; Q, A, P_M | P)`: client sets range over all subsets of the
/// universe, the leader set is fixed, and the condition is the intersection.
pub(crate) fn client_mi(instance: &Instance, opts: &AuditOptions) -> Result<MiReport> {
    let mut layout = Layout::new(instance)?;
    let k = layout.universe_size;
    let m1 = instance.clients.len();
    let secret_bits = k * m1;
    if secret_bits >= 64 {
        return Err(Error::BoundExceeded { space: u128::MAX, bound: opts.bound });
    }
    let h_space = product(&vec![layout.field.modulus(); layout.h_len()]);
    check_space(&[Some(1u128 << secret_bits), h_space, layout.rand.size()], opts)?;
    let leader_mask: u64 = instance.leader.data_set.iter().fold(0, |m, &e| m | 1 << (e - 1));
    let mut joint = Joint::default();
    let (mut ip, mut t, mut ans, mut key) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for secret in 0..1u64 << secret_bits {
        let mut cond = leader_mask;
        for i in 0..m1 {
            let bits = (secret >> (i * k)) & ((1 << k) - 1);
            cond &= bits;
            layout.incidence[i] = (0..k).map(|x| (bits >> x) & 1).collect();
        }
        let l = &layout;
        let mut last_h: Option<Vec<u64>> = None;
        for_each_realization(l, |h, d| {
            if last_h.as_deref() != Some(h) {
                l.inner_products(h, opts.mutation, &mut ip);
                last_h = Some(h.to_vec());
            }
            l.answers(&ip, d, opts.mutation, &mut t, &mut ans);
            key.clear();
            for slot in 0..l.slots.len() {
                key.extend(l.query_vector(slot, h, opts.mutation));
            }
            key.extend_from_slice(&ans);
            joint.add(cond, secret, &key);
        });
    }
    Ok(joint.finish(ViewSpec::Leader))
}

/// All size-`r` subsets of `1..=k`, ascending.
pub(crate) fn subsets_of_size(k: u32, r: usize) -> Vec<BTreeSet<u32>> {
    (0u64..1 << k)
        .filter(|m| m.count_ones() as usize == r)
        .map(|m| (1..=k).filter(|e| m >> (e - 1) & 1 == 1).collect())
        .collect()
}

/// `I(P_M; Q_{i,j}, A_{i,j}, P_i, R_{i,j})` for one database, the leader
/// set ranging uniformly over `candidates`.
pub(crate) fn database_mi(
    instance: &Instance,
    endpoint: Endpoint,
    candidates: &[BTreeSet<u32>],
    opts: &AuditOptions,
) -> Result<MiReport> {
    let layouts = candidates
        .iter()
        .map(|set| {
            let mut inst = instance.clone();
            inst.leader.data_set = set.clone();
            Layout::new(&inst)
        })
        .collect::<Result<Vec<_>>>()?;
    let first = layouts
        .first()
        .ok_or_else(|| Error::Config("no candidate leader sets".into()))?;
    if layouts.iter().any(|l| l.plan.leader_set.len() != first.plan.leader_set.len()) {
        return Err(Error::Config("candidate leader sets differ in size".into()));
    }
    let client = first
        .shape
        .client_index(endpoint.party)
        .ok_or_else(|| Error::Config(format!("{} is not a client", endpoint.party)))?;
    let h_space = product(&vec![first.field.modulus(); first.h_len()]);
    check_space(&[Some(candidates.len() as u128), h_space, first.rand.size()], opts)?;
    let mut joint = Joint::default();
    let (mut ip, mut t, mut ans, mut key) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (secret, layout) in layouts.iter().enumerate() {
        let mine: Vec<usize> = (0..layout.slots.len()).filter(|&s| layout.slots[s].dest == endpoint).collect();
        let mut last_h: Option<Vec<u64>> = None;
        for_each_realization(layout, |h, d| {
            if last_h.as_deref() != Some(h) {
                layout.inner_products(h, opts.mutation, &mut ip);
                last_h = Some(h.to_vec());
            }
            layout.answers(&ip, d, opts.mutation, &mut t, &mut ans);
            key.clear();
            for &s in &mine {
                key.push(layout.slots[s].partition as u64);
                key.extend(layout.query_vector(s, h, opts.mutation));
                key.push(ans[s]);
                key.push(layout.slot_individual(s, &t));
            }
            for p in 0..layout.shape.eta(client) {
                key.push(layout.local(d, client, p, opts.mutation));
            }
            key.push(layout.global(d, opts.mutation));
            joint.add(0, secret as u64, &key);
        });
    }
    Ok(joint.finish(ViewSpec::Database(endpoint)))
}

/// Mutual information between `view` and its secret on `instance`.
pub fn mutual_information(view: ViewSpec, instance: &Instance, opts: &AuditOptions) -> Result<MiReport> {
    match view {
        ViewSpec::Leader => client_mi(instance, opts),
        ViewSpec::Database(e) => {
            let candidates = opts
                .leader_candidates
                .clone()
                .unwrap_or_else(|| subsets_of_size(instance.universe.size(), instance.leader.cardinality()));
            database_mi(instance, e, &candidates, opts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::Mutation;
    use crate::leader::draw_base_vectors;
    use crate::model::PartyId;
    use crate::orchestrator::{demo_config, run_in_memory, Prepared};
    use crate::randomness::RandomDraws;

    #[test]
    fn distribution_table_is_exact() {
        let mut t = DistributionTable::new();
        for v in [1, 2, 2, 3, 3, 3] {
            t.add(vec![v], 1);
        }
        assert_eq!(t.probability(&[3]), Ratio::new(1, 2));
        assert!(t.sums_to_one());
        assert!(!t.is_uniform_over(&[vec![1], vec![2], vec![3]]));
        let mut u = DistributionTable::new();
        u.add(vec![1], 2);
        u.add(vec![2], 4);
        u.add(vec![3], 6);
        assert!(t.same_distribution(&u));
        assert_eq!(serde_json::to_string(&u).unwrap(), r#"{"1":"1/6","2":"1/3","3":"1/2"}"#);
    }

    #[test]
    fn joint_counts_detect_dependence() {
        let mut j = Joint::default();
        for s in 0..2 {
            for v in 0..3u64 {
                j.add(0, s, &[v]);
            }
        }
        assert!(j.finish(ViewSpec::Leader).zero);
        let mut j = Joint::default();
        for s in 0..2u64 {
            j.add(0, s, &[s]);
        }
        let r = j.finish(ViewSpec::Leader);
        assert!(!r.zero);
        assert!((r.bits - 1.0).abs() < 1e-12);
        // Missing cell with otherwise proportional counts.
        let mut j = Joint::default();
        j.add(0, 0, &[0]);
        j.add(0, 1, &[1]);
        j.add(0, 0, &[1]);
        assert!(!j.finish(ViewSpec::Leader).zero);
    }

    #[test]
    fn subsets() {
        assert_eq!(subsets_of_size(3, 1).len(), 3);
        assert_eq!(subsets_of_size(4, 2).len(), 6);
        assert_eq!(subsets_of_size(4, 2)[0], BTreeSet::from([1, 2]));
    }

    #[test]
    fn transcript_views_match_evaluator() {
        let cfg = demo_config("sec7_2").unwrap();
        let prep = Prepared::new(&cfg).unwrap();
        let t = run_in_memory(&prep).unwrap();
        let inst = Instance::from_config(&cfg).unwrap();
        let layout = Layout::new(&inst).unwrap();
        let leader = inst.leader.clone();

        let view = ViewSpec::Leader.extract(&t, &leader);
        assert!(view.randomness.is_empty());
        assert_eq!(view.own_set, leader.data_set);

        let draws = RandomDraws::seeded(&layout.shape, cfg.seed);
        let mut d: Vec<u64> = draws.local.concat();
        d.extend(draws.free.concat());
        d.push(draws.global - 1);
        let h: Vec<u64> = draw_base_vectors(&layout.shape, cfg.seed).concat().iter().map(|v| v.value()).collect();
        let (mut ip, mut tv, mut ans) = (Vec::new(), Vec::new(), Vec::new());
        layout.inner_products(&h, Mutation::None, &mut ip);
        layout.answers(&ip, &d, Mutation::None, &mut tv, &mut ans);
        let mut queries: Vec<_> = (0..layout.slots.len())
            .map(|s| (layout.slots[s].dest, layout.slots[s].partition as u32 + 1, layout.query_vector(s, &h, Mutation::None)))
            .collect();
        let mut answers: Vec<_> = (0..layout.slots.len())
            .map(|s| (layout.slots[s].dest, layout.slots[s].partition as u32 + 1, ans[s]))
            .collect();
        queries.sort();
        answers.sort();
        assert_eq!(view.queries, queries);
        assert_eq!(view.answers, answers);

        let me = Endpoint::new(PartyId(3), 2);
        let db = ViewSpec::Database(me).extract(&t, &inst.clients[2]);
        assert!(db.queries.iter().all(|q| q.0 == me));
        assert!(db.randomness.iter().all(|r| r.origin == me || r.dest == me));
        assert!(db.randomness.iter().any(|r| r.dest == me));
        assert_eq!(db.answers.len(), db.queries.len());
    }
}
