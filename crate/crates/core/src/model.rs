//! Universe, data sets, incidence vectors and the public session layout.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};

/// 1-based party identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// A message endpoint: database `database` (1-based) of `party`. Database `0`
/// denotes the party itself, which is how the leader is addressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Endpoint {
    pub party: PartyId,
    pub database: u32,
}

impl Endpoint {
    pub fn new(party: PartyId, database: u32) -> Self {
        Self { party, database }
    }

    pub fn party_itself(party: PartyId) -> Self {
        Self { party, database: 0 }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.party.0, self.database)
    }
}

/// The alphabet `{1, ..., K}` all data sets are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Universe {
    size: u32,
}

impl Universe {
    pub fn new(size: u32) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("universe size must be at least 1".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn contains(&self, element: u32) -> bool {
        (1..=self.size).contains(&element)
    }
}

/// One party: its id, how many replicated databases hold its set, and the set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyProfile {
    pub id: PartyId,
    pub num_databases: u32,
    pub data_set: BTreeSet<u32>,
}

impl PartyProfile {
    pub fn new(id: u32, num_databases: u32, data_set: impl IntoIterator<Item = u32>) -> Self {
        Self {
            id: PartyId(id),
            num_databases,
            data_set: data_set.into_iter().collect(),
        }
    }

    /// `|P_i|`, which is public.
    pub fn cardinality(&self) -> usize {
        self.data_set.len()
    }

    pub fn validate(&self, universe: &Universe) -> Result<()> {
        if self.num_databases == 0 {
            return Err(Error::Config(format!(
                "party {} must have at least one database",
                self.id.0
            )));
        }
        for &e in &self.data_set {
            if !universe.contains(e) {
                return Err(Error::ElementOutOfUniverse {
                    element: e,
                    universe: universe.size(),
                });
            }
        }
        Ok(())
    }
}

/// Binary incidence vector of a data set over the universe.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IncidenceVector {
    bits: Vec<u8>,
}

impl IncidenceVector {
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Whether 1-based `element` is marked.
    pub fn contains(&self, element: u32) -> bool {
        element >= 1 && self.bits.get(element as usize - 1) == Some(&1)
    }

    /// The entries embedded in `field`.
    pub fn to_field(&self, field: &PrimeField) -> Vec<FieldElement> {
        self.bits.iter().map(|&b| field.element(b as u64)).collect()
    }

    pub fn to_set(&self) -> BTreeSet<u32> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i as u32 + 1)
            .collect()
    }
}

/// Builds the incidence vector of `data_set` over `universe`.
pub fn incidence_of(data_set: &BTreeSet<u32>, universe: &Universe) -> Result<IncidenceVector> {
    let mut bits = vec![0u8; universe.size() as usize];
    for &e in data_set {
        if !universe.contains(e) {
            return Err(Error::ElementOutOfUniverse {
                element: e,
                universe: universe.size(),
            });
        }
        bits[e as usize - 1] = 1;
    }
    Ok(IncidenceVector { bits })
}

pub fn to_incidence(profile: &PartyProfile, universe: &Universe) -> Result<IncidenceVector> {
    incidence_of(&profile.data_set, universe)
}

/// Direct set intersection of every profile's data set.
pub fn brute_force_intersection(profiles: &[PartyProfile]) -> BTreeSet<u32> {
    let mut iter = profiles.iter();
    let Some(first) = iter.next() else {
        return BTreeSet::new();
    };
    let mut acc = first.data_set.clone();
    for p in iter {
        acc.retain(|e| p.data_set.contains(e));
    }
    acc
}

/// Public shape of a client party inside a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientShape {
    pub party: PartyId,
    pub num_databases: u32,
}

/// Everything about a session that every participant may know: field,
/// universe, who leads, `|P_M|` and each client's database count. Clients
/// are ordered by party id; the last one is the correlating client.
///
/// Partitions are 1-based and element ranks `k` run over `1..=R` in the
/// ascending order of the leader set. Rank `k` of client `i` is served by
/// database `2 + (k-1) mod (N_i-1)` for partition `ceil(k / (N_i-1))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionShape {
    pub field: PrimeField,
    pub universe: Universe,
    pub leader: PartyId,
    pub leader_set_size: usize,
    pub clients: Vec<ClientShape>,
}

impl SessionShape {
    pub fn new(
        field: PrimeField,
        universe: Universe,
        leader: PartyId,
        leader_set_size: usize,
        clients: Vec<ClientShape>,
    ) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::InvalidPartyCount(clients.len() + 1));
        }
        if leader_set_size > universe.size() as usize {
            return Err(Error::Config(format!(
                "leader set of size {leader_set_size} does not fit a universe of {}",
                universe.size()
            )));
        }
        if let Some(c) = clients.iter().find(|c| c.num_databases < 2) {
            return Err(Error::Infeasible(format!(
                "client {} has {} database(s); at least 2 are required",
                c.party, c.num_databases
            )));
        }
        if clients.windows(2).any(|w| w[0].party >= w[1].party) {
            return Err(Error::Config("client parties must be sorted and unique".into()));
        }
        Ok(Self {
            field,
            universe,
            leader,
            leader_set_size,
            clients,
        })
    }

    /// M.
    pub fn num_parties(&self) -> usize {
        self.clients.len() + 1
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn client_index(&self, party: PartyId) -> Option<usize> {
        self.clients.iter().position(|c| c.party == party)
    }

    /// Index of the client that computes the correlated individual randomness.
    pub fn correlating_client(&self) -> usize {
        self.clients.len() - 1
    }

    fn chunk(&self, client: usize) -> usize {
        self.clients[client].num_databases as usize - 1
    }

    /// η_i = ceil(R / (N_i - 1)).
    pub fn eta(&self, client: usize) -> usize {
        self.leader_set_size.div_ceil(self.chunk(client))
    }

    /// κ = max_i η_i.
    pub fn kappa(&self) -> usize {
        (0..self.clients.len()).map(|i| self.eta(i)).max().unwrap_or(0)
    }

    /// Number of databases of the client that take part (at most R + 1).
    pub fn used_databases(&self, client: usize) -> u32 {
        if self.leader_set_size == 0 {
            return 0;
        }
        self.clients[client]
            .num_databases
            .min(self.leader_set_size as u32 + 1)
    }

    /// Size of 1-based partition `partition` of `client`.
    pub fn partition_len(&self, client: usize, partition: usize) -> usize {
        let chunk = self.chunk(client);
        let start = (partition - 1) * chunk;
        chunk.min(self.leader_set_size.saturating_sub(start))
    }

    /// Element rank served by `database` (>= 2) for `partition`, if any.
    pub fn rank_of(&self, client: usize, database: u32, partition: usize) -> Option<usize> {
        if database < 2 || partition == 0 || partition > self.eta(client) {
            return None;
        }
        let offset = database as usize - 2;
        (offset < self.partition_len(client, partition))
            .then(|| (partition - 1) * self.chunk(client) + offset + 1)
    }

    /// `(database, partition)` that serves 1-based `rank` at `client`.
    pub fn locate_rank(&self, client: usize, rank: usize) -> (u32, usize) {
        let chunk = self.chunk(client);
        (((rank - 1) % chunk) as u32 + 2, (rank - 1) / chunk + 1)
    }

    /// Partitions for which `database` of `client` receives a query.
    pub fn partitions_at(&self, client: usize, database: u32) -> Vec<usize> {
        (1..=self.eta(client))
            .filter(|&p| database == 1 || self.rank_of(client, database, p).is_some())
            .collect()
    }

    /// L - (M - 1) mod L, the per-element sum of the individual randomness.
    pub fn correlation_target(&self) -> u64 {
        let l = self.field.modulus() as i64;
        (l - (self.num_parties() as i64 - 1)).rem_euclid(l) as u64
    }
}
