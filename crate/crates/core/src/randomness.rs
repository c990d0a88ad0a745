//! Common randomness among client databases.
//!
//! Three tiers feed every answer `c (⟨X_i, Q⟩ + s_i(ℓ) + t_{i,j}(ℓ))`:
//!
//! * local `s_i`, one entry per partition, shared by the databases of client `i`;
//! * individual `t_{i,j}`, zero at database 1, free and uniform at clients
//!   `1..M-2`, and correlated at the last client so that for every element
//!   rank `k` the sum `Σ_i t̃_{i,k}` equals `L - (M - 1)`;
//! * global `c`, uniform over `F_L \ {0}` and shared by every client database.
//!
//! The exchange happens before any query is sent and never involves the
//! leader. Shares are aligned by element rank, which clients can compute
//! from public data without learning the leader's elements.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};
use crate::model::{Endpoint, SessionShape};
use crate::rng::{labeled_rng, DrawLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomnessKind {
    /// `s_i` from database 1 to the other databases of the same client.
    Local,
    /// A free individual value forwarded to the correlating client.
    Share,
    /// `c` broadcast to every client database.
    Global,
}

/// One message of the pre-protocol randomness exchange.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RandomnessShareMsg {
    pub kind: RandomnessKind,
    pub origin: Endpoint,
    pub dest: Endpoint,
    /// 1-based element rank for shares.
    pub rank: Option<u32>,
    pub values: Vec<FieldElement>,
}

/// `η` i.i.d. uniform local values.
pub fn gen_local<R: Rng + ?Sized>(eta: usize, field: PrimeField, rng: &mut R) -> Vec<FieldElement> {
    (0..eta).map(|_| field.random(rng)).collect()
}

/// Uniform nonzero global multiplier.
pub fn gen_global<R: Rng + ?Sized>(field: PrimeField, rng: &mut R) -> FieldElement {
    field.random_nonzero(rng)
}

/// Local randomness of `client` as drawn from the session seed.
pub fn draw_local(shape: &SessionShape, client: usize, seed: u64) -> Vec<FieldElement> {
    let mut rng = labeled_rng(seed, DrawLabel::Local(shape.clients[client].party));
    gen_local(shape.eta(client), shape.field, &mut rng)
}

/// Free individual value of `client` for 1-based `rank`.
pub fn draw_individual(shape: &SessionShape, client: usize, rank: usize, seed: u64) -> FieldElement {
    let mut rng = labeled_rng(seed, DrawLabel::Individual(shape.clients[client].party, rank));
    shape.field.random(&mut rng)
}

pub fn draw_global(shape: &SessionShape, seed: u64) -> FieldElement {
    gen_global(shape.field, &mut labeled_rng(seed, DrawLabel::Global))
}

fn share_msg(shape: &SessionShape, client: usize, rank: usize, value: FieldElement) -> RandomnessShareMsg {
    let last = shape.correlating_client();
    let (from_db, _) = shape.locate_rank(client, rank);
    let (to_db, _) = shape.locate_rank(last, rank);
    RandomnessShareMsg {
        kind: RandomnessKind::Share,
        origin: Endpoint::new(shape.clients[client].party, from_db),
        dest: Endpoint::new(shape.clients[last].party, to_db),
        rank: Some(rank as u32),
        values: vec![value],
    }
}

/// Free individual randomness of clients `1..M-2` (rank-aligned) and the
/// share messages that carry it to the correlating client.
pub fn gen_individual_free(
    shape: &SessionShape,
    seed: u64,
) -> (Vec<Vec<FieldElement>>, Vec<RandomnessShareMsg>) {
    let r = shape.leader_set_size;
    let mut free = Vec::new();
    let mut msgs = Vec::new();
    for client in 0..shape.correlating_client() {
        let row: Vec<_> = (1..=r).map(|k| draw_individual(shape, client, k, seed)).collect();
        msgs.extend(row.iter().enumerate().map(|(k, &v)| share_msg(shape, client, k + 1, v)));
        free.push(row);
    }
    (free, msgs)
}

fn correlate_to(
    free: &[Vec<FieldElement>],
    shape: &SessionShape,
    target: u64,
) -> Result<Vec<FieldElement>> {
    let field = shape.field;
    if free.len() != shape.correlating_client() {
        return Err(Error::ProtocolViolation(format!(
            "expected free randomness from {} client(s), got {}",
            shape.correlating_client(),
            free.len()
        )));
    }
    (0..shape.leader_set_size)
        .map(|k| {
            let mut acc = field.element(target);
            for (i, row) in free.iter().enumerate() {
                let v = row.get(k).ok_or_else(|| {
                    Error::ProtocolViolation(format!(
                        "missing share for rank {} from {}",
                        k + 1,
                        shape.clients[i].party
                    ))
                })?;
                acc = acc.checked_sub(*v)?;
            }
            Ok(acc)
        })
        .collect()
}

/// `t̃_{M-1,k} = L - (M-1) - Σ_{i<M-1} t̃_{i,k}` for every rank `k`.
pub fn correlate(free: &[Vec<FieldElement>], shape: &SessionShape) -> Result<Vec<FieldElement>> {
    correlate_to(free, shape, shape.correlation_target())
}

/// Randomness resident at one database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabaseSlots {
    /// `s_i`, one value per partition.
    pub local: Vec<FieldElement>,
    /// `t_{i,j}(ℓ)` keyed by 1-based partition; zero at database 1.
    pub individual: BTreeMap<u32, FieldElement>,
    pub global: FieldElement,
}

/// Per-client view of a realized bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientRandomness {
    pub local: Vec<FieldElement>,
    /// `t̃_{i,k}` for ranks `1..=R` (index `k - 1`).
    pub individual: Vec<FieldElement>,
}

/// A full realization of the common randomness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomnessBundle {
    pub field: PrimeField,
    pub clients: Vec<ClientRandomness>,
    pub global: FieldElement,
}

/// Raw draws before correlation: `local[i][ℓ]`, `free[i][k]` for the
/// non-correlating clients, and `global` in `1..L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomDraws {
    pub local: Vec<Vec<u64>>,
    pub free: Vec<Vec<u64>>,
    pub global: u64,
}

impl RandomDraws {
    /// The draws every participant makes from `seed`.
    pub fn seeded(shape: &SessionShape, seed: u64) -> Self {
        let local = (0..shape.num_clients())
            .map(|i| draw_local(shape, i, seed).iter().map(|v| v.value()).collect())
            .collect();
        let (free, _) = gen_individual_free(shape, seed);
        Self {
            local,
            free: free
                .iter()
                .map(|row| row.iter().map(|v| v.value()).collect())
                .collect(),
            global: draw_global(shape, seed).value(),
        }
    }

    /// All-zero draws with the layout of `shape` (`global = 1`).
    pub fn zeroed(shape: &SessionShape) -> Self {
        Self {
            local: (0..shape.num_clients()).map(|i| vec![0; shape.eta(i)]).collect(),
            free: vec![vec![0; shape.leader_set_size]; shape.correlating_client()],
            global: 1,
        }
    }
}

impl RandomnessBundle {
    pub fn from_draws(shape: &SessionShape, draws: &RandomDraws) -> Result<Self> {
        Self::from_draws_with_target(shape, draws, shape.correlation_target())
    }

    /// As [`from_draws`](Self::from_draws) but with an arbitrary correlation
    /// sum. Only the audit's negative controls use a wrong target.
    pub(crate) fn from_draws_with_target(
        shape: &SessionShape,
        draws: &RandomDraws,
        target: u64,
    ) -> Result<Self> {
        let field = shape.field;
        if draws.local.len() != shape.num_clients() {
            return Err(Error::LengthMismatch {
                left: draws.local.len(),
                right: shape.num_clients(),
            });
        }
        if draws.global == 0 || draws.global >= field.modulus() {
            return Err(Error::ProtocolViolation("global multiplier must be nonzero".into()));
        }
        let free: Vec<Vec<FieldElement>> = draws
            .free
            .iter()
            .map(|row| row.iter().map(|&v| field.element(v)).collect())
            .collect();
        let correlated = correlate_to(&free, shape, target)?;
        let mut clients = Vec::with_capacity(shape.num_clients());
        for (i, local) in draws.local.iter().enumerate() {
            if local.len() != shape.eta(i) {
                return Err(Error::LengthMismatch {
                    left: local.len(),
                    right: shape.eta(i),
                });
            }
            let individual = if i == shape.correlating_client() {
                correlated.clone()
            } else {
                free[i].clone()
            };
            clients.push(ClientRandomness {
                local: local.iter().map(|&v| field.element(v)).collect(),
                individual,
            });
        }
        Ok(Self {
            field,
            clients,
            global: field.element(draws.global),
        })
    }

    /// `Σ_i t̃_{i,k}` for every rank.
    pub fn correlation_sums(&self) -> Vec<u64> {
        let r = self.clients.first().map_or(0, |c| c.individual.len());
        (0..r)
            .map(|k| {
                self.clients
                    .iter()
                    .fold(self.field.zero(), |acc, c| acc.checked_add(c.individual[k]).unwrap_or(acc))
                    .value()
            })
            .collect()
    }

    /// The slots installed at `endpoint`.
    pub fn database_slots(&self, shape: &SessionShape, endpoint: Endpoint) -> Result<DatabaseSlots> {
        let client = shape.client_index(endpoint.party).ok_or_else(|| {
            Error::ProtocolViolation(format!("{} is not a client party", endpoint.party))
        })?;
        if endpoint.database == 0 || endpoint.database > shape.used_databases(client) {
            return Err(Error::ProtocolViolation(format!("{endpoint} takes no part")));
        }
        let cr = &self.clients[client];
        let individual = shape
            .partitions_at(client, endpoint.database)
            .into_iter()
            .map(|p| {
                let t = match shape.rank_of(client, endpoint.database, p) {
                    Some(k) => cr.individual[k - 1],
                    None => self.field.zero(),
                };
                (p as u32, t)
            })
            .collect();
        Ok(DatabaseSlots {
            local: cr.local.clone(),
            individual,
            global: self.global,
        })
    }
}

/// The randomness-phase state machine of one client database. It draws its
/// own values from the labeled streams, emits the messages it originates,
/// and installs what it receives.
#[derive(Debug, Clone)]
pub struct RandomnessNode {
    shape: SessionShape,
    endpoint: Endpoint,
    client: usize,
    seed: u64,
    local: Option<Vec<FieldElement>>,
    global: Option<FieldElement>,
    /// rank -> free values received, keyed by originating client index.
    shares: BTreeMap<usize, BTreeMap<usize, FieldElement>>,
}

impl RandomnessNode {
    pub fn new(shape: SessionShape, endpoint: Endpoint, seed: u64) -> Result<Self> {
        let client = shape.client_index(endpoint.party).ok_or_else(|| {
            Error::ProtocolViolation(format!("{} is not a client party", endpoint.party))
        })?;
        if endpoint.database == 0 || endpoint.database > shape.used_databases(client) {
            return Err(Error::ProtocolViolation(format!("{endpoint} takes no part")));
        }
        let mut node = Self {
            shape,
            endpoint,
            client,
            seed,
            local: None,
            global: None,
            shares: BTreeMap::new(),
        };
        if endpoint.database == 1 {
            node.local = Some(draw_local(&node.shape, client, seed));
            if client == 0 {
                node.global = Some(draw_global(&node.shape, seed));
            }
        }
        Ok(node)
    }

    pub fn endpoint(&self) -> Endpoint {
        self.endpoint
    }

    fn is_correlating(&self) -> bool {
        self.client == self.shape.correlating_client()
    }

    /// Ranks served by this database, ascending.
    fn ranks(&self) -> Vec<usize> {
        self.shape
            .partitions_at(self.client, self.endpoint.database)
            .into_iter()
            .filter_map(|p| self.shape.rank_of(self.client, self.endpoint.database, p))
            .collect()
    }

    /// Messages this database originates.
    pub fn outgoing(&self) -> Vec<RandomnessShareMsg> {
        let shape = &self.shape;
        let party = shape.clients[self.client].party;
        let mut out = Vec::new();
        if let Some(local) = &self.local {
            for db in 2..=shape.used_databases(self.client) {
                out.push(RandomnessShareMsg {
                    kind: RandomnessKind::Local,
                    origin: self.endpoint,
                    dest: Endpoint::new(party, db),
                    rank: None,
                    values: local.clone(),
                });
            }
        }
        if let (Some(c), 0, 1) = (self.global, self.client, self.endpoint.database) {
            for (i, cs) in shape.clients.iter().enumerate() {
                for db in 1..=shape.used_databases(i) {
                    let dest = Endpoint::new(cs.party, db);
                    if dest != self.endpoint {
                        out.push(RandomnessShareMsg {
                            kind: RandomnessKind::Global,
                            origin: self.endpoint,
                            dest,
                            rank: None,
                            values: vec![c],
                        });
                    }
                }
            }
        }
        if !self.is_correlating() && self.endpoint.database >= 2 {
            for k in self.ranks() {
                out.push(share_msg(shape, self.client, k, draw_individual(shape, self.client, k, self.seed)));
            }
        }
        out
    }

    /// How many messages this database must receive before answering.
    pub fn expected_incoming(&self) -> usize {
        let mut n = 0;
        if self.endpoint.database >= 2 {
            n += 1;
        }
        if !(self.client == 0 && self.endpoint.database == 1) {
            n += 1;
        }
        if self.is_correlating() && self.endpoint.database >= 2 {
            n += self.ranks().len() * self.shape.correlating_client();
        }
        n
    }

    fn received(&self) -> usize {
        let local = usize::from(self.endpoint.database >= 2 && self.local.is_some());
        let global = usize::from(!(self.client == 0 && self.endpoint.database == 1) && self.global.is_some());
        local + global + self.shares.values().map(BTreeMap::len).sum::<usize>()
    }

    pub fn is_complete(&self) -> bool {
        self.received() == self.expected_incoming()
    }

    pub fn receive(&mut self, msg: &RandomnessShareMsg) -> Result<()> {
        let violation = |what: &str| {
            Err(Error::ProtocolViolation(format!(
                "{what}: {:?} message {} -> {}",
                msg.kind, msg.origin, msg.dest
            )))
        };
        if msg.dest != self.endpoint {
            return violation("misrouted");
        }
        self.shape.field.check_all(&msg.values)?;
        let own_party = self.shape.clients[self.client].party;
        match msg.kind {
            RandomnessKind::Local => {
                if msg.origin != Endpoint::new(own_party, 1) || self.endpoint.database < 2 {
                    return violation("unexpected local randomness");
                }
                if msg.values.len() != self.shape.eta(self.client) {
                    return violation("wrong local randomness length");
                }
                if self.local.replace(msg.values.clone()).is_some() {
                    return violation("duplicate");
                }
            }
            RandomnessKind::Global => {
                if msg.origin != Endpoint::new(self.shape.clients[0].party, 1)
                    || (self.client == 0 && self.endpoint.database == 1)
                {
                    return violation("unexpected global randomness");
                }
                if msg.values.len() != 1 || msg.values[0].is_zero() {
                    return violation("malformed global multiplier");
                }
                if self.global.replace(msg.values[0]).is_some() {
                    return violation("duplicate");
                }
            }
            RandomnessKind::Share => {
                let from = self.shape.client_index(msg.origin.party);
                let rank = msg.rank.map(|r| r as usize);
                let (Some(from), Some(rank)) = (from, rank) else {
                    return violation("share from a non-client or without rank");
                };
                if !self.is_correlating() || from >= self.shape.correlating_client() || msg.values.len() != 1 {
                    return violation("unexpected share");
                }
                if !self.ranks().contains(&rank) || self.shape.locate_rank(from, rank).0 != msg.origin.database {
                    return violation("share for a rank this database does not serve");
                }
                if self.shares.entry(rank).or_default().insert(from, msg.values[0]).is_some() {
                    return violation("duplicate");
                }
            }
        }
        Ok(())
    }

    /// The installed slots; fails until every expected message has arrived.
    pub fn slots(&self) -> Result<DatabaseSlots> {
        if !self.is_complete() {
            return Err(Error::ProtocolViolation(format!(
                "{} answered before its randomness was complete",
                self.endpoint
            )));
        }
        let field = self.shape.field;
        let local = self.local.clone().unwrap_or_default();
        let global = self.global.expect("complete implies global");
        let mut individual = BTreeMap::new();
        for p in self.shape.partitions_at(self.client, self.endpoint.database) {
            let t = match self.shape.rank_of(self.client, self.endpoint.database, p) {
                None => field.zero(),
                Some(k) if self.is_correlating() => {
                    let free: Vec<Vec<FieldElement>> = (0..self.shape.correlating_client())
                        .map(|i| vec![self.shares[&k][&i]])
                        .collect();
                    let single = SessionShape {
                        leader_set_size: 1,
                        ..self.shape.clone()
                    };
                    correlate(&free, &single)?[0]
                }
                Some(k) => draw_individual(&self.shape, self.client, k, self.seed),
            };
            individual.insert(p as u32, t);
        }
        Ok(DatabaseSlots {
            local,
            individual,
            global,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClientShape, PartyId, Universe};

    fn shape(l: u64, k: u32, r: usize, dbs: &[u32]) -> SessionShape {
        SessionShape::new(
            PrimeField::new(l).unwrap(),
            Universe::new(k).unwrap(),
            PartyId(dbs.len() as u32 + 1),
            r,
            dbs.iter()
                .enumerate()
                .map(|(i, &n)| ClientShape {
                    party: PartyId(i as u32 + 1),
                    num_databases: n,
                })
                .collect(),
        )
        .unwrap()
    }

    fn sec4() -> SessionShape {
        shape(3, 4, 2, &[3, 3])
    }

    fn sec7_2() -> SessionShape {
        shape(5, 5, 3, &[2, 3, 5])
    }

    #[test]
    fn local_draws() {
        let s = sec4();
        assert_eq!(draw_local(&s, 0, 9).len(), 1);
        assert_eq!(draw_local(&s, 0, 9), draw_local(&s, 0, 9));
        assert_eq!(draw_local(&sec7_2(), 0, 1).len(), 3);
        // Empirical check that s is spread over the whole field.
        let mut counts = [0usize; 3];
        for seed in 0..3000 {
            counts[draw_local(&s, 0, seed)[0].value() as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (800..1200).contains(&c)), "{counts:?}");
    }

    #[test]
    fn global_draws() {
        let mut seen = BTreeMap::new();
        for seed in 0..2000 {
            *seen.entry(draw_global(&sec4(), seed).value()).or_insert(0) += 1;
        }
        assert_eq!(seen.keys().copied().collect::<Vec<_>>(), vec![1, 2]);
        let two = shape(2, 2, 1, &[2]);
        assert!((0..50).all(|seed| draw_global(&two, seed).value() == 1));
        let five: std::collections::BTreeSet<u64> =
            (0..500).map(|seed| draw_global(&sec7_2(), seed).value()).collect();
        assert_eq!(five, (1..5).collect());
    }

    #[test]
    fn free_individual_draws() {
        let (free, msgs) = gen_individual_free(&sec4(), 3);
        assert_eq!(free.len(), 1);
        assert_eq!(free[0].len(), 2);
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].origin, Endpoint::new(PartyId(1), 2));
        assert_eq!(msgs[0].dest, Endpoint::new(PartyId(2), 2));
        assert_eq!(msgs[1].origin, Endpoint::new(PartyId(1), 3));
        assert_eq!(msgs[1].dest, Endpoint::new(PartyId(2), 3));

        let (free, msgs) = gen_individual_free(&shape(2, 3, 2, &[3]), 3);
        assert!(free.is_empty() && msgs.is_empty());

        // Heterogeneous layout: t_{1,2}(1..3), t_{2,2}(1..2) and t_{2,3} all go to P_3.
        let (free, msgs) = gen_individual_free(&sec7_2(), 3);
        assert_eq!(free.len(), 2);
        assert!(msgs.iter().all(|m| m.dest.party == PartyId(3)));
        let route = |from: (u32, u32), rank: u32| {
            msgs.iter()
                .find(|m| m.origin == Endpoint::new(PartyId(from.0), from.1) && m.rank == Some(rank))
                .map(|m| m.dest.database)
        };
        assert_eq!(route((1, 2), 1), Some(2));
        assert_eq!(route((1, 2), 2), Some(3));
        assert_eq!(route((1, 2), 3), Some(4));
        assert_eq!(route((2, 2), 1), Some(2));
        assert_eq!(route((2, 3), 2), Some(3));
        assert_eq!(route((2, 2), 3), Some(4));
    }

    #[test]
    fn correlation_examples() {
        let s = sec4();
        let f = s.field;
        for a in 0..3 {
            for b in 0..3 {
                let t = correlate(&[vec![f.element(a), f.element(b)]], &s).unwrap();
                assert_eq!((a + t[0].value()) % 3, 1);
                assert_eq!((b + t[1].value()) % 3, 1);
            }
        }
        let s = sec7_2();
        let f = s.field;
        let free = vec![
            vec![f.element(4), f.element(0), f.element(3)],
            vec![f.element(1), f.element(2), f.element(2)],
        ];
        let t = correlate(&free, &s).unwrap();
        for k in 0..3 {
            assert_eq!((free[0][k].value() + free[1][k].value() + t[k].value()) % 5, 2);
        }
        // Two parties: t̃ = L - 1 = 1 with an empty sum; E_k = c (X + 1) mod 2
        // vanishes exactly when the client holds the element.
        let s2 = shape(2, 2, 2, &[3]);
        let t = correlate(&[], &s2).unwrap();
        assert!(t.iter().all(|v| v.value() == 1));
        for x in 0..2u64 {
            assert_eq!((x + t[0].value()).is_multiple_of(2), x == 1);
        }
        let short = vec![vec![f.element(1)], vec![f.element(1), f.element(1), f.element(1)]];
        assert!(matches!(correlate(&short, &s), Err(Error::ProtocolViolation(_))));
        assert!(matches!(correlate(&free[..1], &s), Err(Error::ProtocolViolation(_))));
    }

    #[test]
    fn correlation_sum_invariant_over_seeds() {
        for s in [sec4(), sec7_2(), shape(5, 4, 4, &[2, 3, 4, 5]), shape(2, 3, 3, &[2])] {
            let target = s.correlation_target();
            for seed in 0..200 {
                let bundle = RandomnessBundle::from_draws(&s, &RandomDraws::seeded(&s, seed)).unwrap();
                assert!(bundle.correlation_sums().iter().all(|&v| v == target));
                assert!(!bundle.global.is_zero());
            }
        }
    }

    fn run_nodes(s: &SessionShape, seed: u64) -> (Vec<RandomnessNode>, Vec<RandomnessShareMsg>) {
        let mut nodes: Vec<RandomnessNode> = (0..s.num_clients())
            .flat_map(|i| (1..=s.used_databases(i)).map(move |db| (i, db)))
            .map(|(i, db)| RandomnessNode::new(s.clone(), Endpoint::new(s.clients[i].party, db), seed).unwrap())
            .collect();
        let msgs: Vec<_> = nodes.iter().flat_map(RandomnessNode::outgoing).collect();
        for m in &msgs {
            let node = nodes.iter_mut().find(|n| n.endpoint() == m.dest).unwrap();
            node.receive(m).unwrap();
        }
        (nodes, msgs)
    }

    #[test]
    fn nodes_install_the_central_bundle() {
        for s in [sec4(), sec7_2(), shape(5, 5, 4, &[2, 3, 4, 6]), shape(2, 3, 2, &[4])] {
            for seed in 0..20 {
                let bundle = RandomnessBundle::from_draws(&s, &RandomDraws::seeded(&s, seed)).unwrap();
                let (nodes, msgs) = run_nodes(&s, seed);
                for n in &nodes {
                    assert!(n.is_complete());
                    assert_eq!(n.slots().unwrap(), bundle.database_slots(&s, n.endpoint()).unwrap());
                }
                let (_, central) = gen_individual_free(&s, seed);
                let shares: Vec<_> = msgs.iter().filter(|m| m.kind == RandomnessKind::Share).cloned().collect();
                let mut a = shares.clone();
                let mut b = central;
                a.sort_by_key(|m| (m.origin, m.rank));
                b.sort_by_key(|m| (m.origin, m.rank));
                assert_eq!(a, b);
                let leader = s.leader;
                assert!(msgs.iter().all(|m| m.origin.party != leader && m.dest.party != leader));
            }
        }
    }

    #[test]
    fn rank_alignment_matches_slots() {
        let s = sec7_2();
        let bundle = RandomnessBundle::from_draws(&s, &RandomDraws::seeded(&s, 4)).unwrap();
        for (i, cr) in bundle.clients.iter().enumerate() {
            for k in 1..=3 {
                let (db, p) = s.locate_rank(i, k);
                let slots = bundle.database_slots(&s, Endpoint::new(s.clients[i].party, db)).unwrap();
                assert_eq!(slots.individual[&(p as u32)], cr.individual[k - 1]);
            }
            let db1 = bundle.database_slots(&s, Endpoint::new(s.clients[i].party, 1)).unwrap();
            assert!(db1.individual.values().all(FieldElement::is_zero));
        }
    }

    #[test]
    fn node_rejects_bad_messages() {
        let s = sec4();
        let (mut nodes, msgs) = run_nodes(&s, 1);
        let dup = msgs[0].clone();
        let target = nodes.iter_mut().find(|n| n.endpoint() == dup.dest).unwrap();
        assert!(matches!(target.receive(&dup), Err(Error::ProtocolViolation(_))));
        let mut misrouted = msgs[0].clone();
        misrouted.dest = Endpoint::new(PartyId(9), 9);
        assert!(nodes[0].receive(&misrouted).is_err());

        let fresh = RandomnessNode::new(s.clone(), Endpoint::new(PartyId(2), 2), 1).unwrap();
        assert!(!fresh.is_complete());
        assert!(fresh.slots().is_err());
        assert!(RandomnessNode::new(s, Endpoint::new(PartyId(3), 1), 1).is_err());
    }
}
