//! The leader party: election by download cost, partitioning of its set,
//! query generation and decoding of the answers into the intersection.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::client::AnswerMsg;
use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};
use crate::model::{ClientShape, Endpoint, PartyId, PartyProfile, SessionShape, Universe};
use crate::rng::{labeled_rng, DrawLabel};

/// `ceil(R * N / (N - 1))`: what one client costs a leader holding `R` elements.
fn pairwise_cost(leader_size: usize, num_databases: u32) -> Option<u64> {
    if num_databases < 2 {
        return None;
    }
    let n = num_databases as u64;
    Some((leader_size as u64 * n).div_ceil(n - 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEntry {
    pub party: PartyId,
    /// `None` when some counterpart has a single database.
    pub cost: Option<u64>,
}

/// Download cost `D_t` of every leader candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    pub entries: Vec<CostEntry>,
}

impl CostTable {
    pub fn compute(profiles: &[PartyProfile]) -> Self {
        let entries = profiles
            .iter()
            .map(|t| {
                let cost = profiles
                    .iter()
                    .filter(|p| p.id != t.id)
                    .map(|p| pairwise_cost(t.cardinality(), p.num_databases))
                    .sum::<Option<u64>>();
                CostEntry { party: t.id, cost }
            })
            .collect();
        Self { entries }
    }

    pub fn cost_of(&self, party: PartyId) -> Option<u64> {
        self.entries.iter().find(|e| e.party == party).and_then(|e| e.cost)
    }

    /// Feasible candidate with the least cost, lowest id on ties.
    pub fn argmin(&self) -> Option<PartyId> {
        self.entries
            .iter()
            .filter_map(|e| e.cost.map(|c| (c, e.party)))
            .min()
            .map(|(_, p)| p)
    }
}

/// Picks the leader minimizing the total download cost.
pub fn elect_leader(profiles: &[PartyProfile]) -> Result<(PartyId, CostTable)> {
    if profiles.len() < 2 {
        return Err(Error::InvalidPartyCount(profiles.len()));
    }
    let table = CostTable::compute(profiles);
    let leader = table.argmin().ok_or_else(|| {
        Error::Infeasible("no leader candidate has all counterparts with N_i >= 2".into())
    })?;
    Ok((leader, table))
}

/// `Σ_i ceil(|P_M| N_i / (N_i - 1))` over the clients.
pub fn download_cost(leader: &PartyProfile, clients: &[PartyProfile]) -> Result<u64> {
    clients
        .iter()
        .map(|c| {
            pairwise_cost(leader.cardinality(), c.num_databases).ok_or_else(|| {
                Error::Infeasible(format!("client {} has a single database", c.id))
            })
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientPartitions {
    pub party: PartyId,
    pub num_databases: u32,
    /// Consecutive chunks of the ascending leader set, each of `N_i - 1`
    /// elements except possibly the last.
    pub partitions: Vec<Vec<u32>>,
}

/// The leader's private partition of its set, per client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub leader: PartyId,
    /// `Y_1 < ... < Y_R`.
    pub leader_set: Vec<u32>,
    /// Clients in ascending party id.
    pub clients: Vec<ClientPartitions>,
}

impl PartitionPlan {
    pub fn leader_set_size(&self) -> usize {
        self.leader_set.len()
    }

    /// 1-based rank of `element` in the leader set.
    pub fn rank_of_element(&self, element: u32) -> Option<usize> {
        self.leader_set.binary_search(&element).ok().map(|i| i + 1)
    }

    /// Public part of the plan.
    pub fn shape(&self, field: PrimeField, universe: Universe) -> Result<SessionShape> {
        SessionShape::new(
            field,
            universe,
            self.leader,
            self.leader_set.len(),
            self.clients
                .iter()
                .map(|c| ClientShape {
                    party: c.party,
                    num_databases: c.num_databases,
                })
                .collect(),
        )
    }
}

pub fn make_partition_plan(leader: &PartyProfile, clients: &[PartyProfile]) -> Result<PartitionPlan> {
    let leader_set: Vec<u32> = leader.data_set.iter().copied().collect();
    let mut sorted: Vec<&PartyProfile> = clients.iter().collect();
    sorted.sort_by_key(|c| c.id);
    let clients = sorted
        .into_iter()
        .map(|c| {
            if c.num_databases < 2 {
                return Err(Error::Infeasible(format!(
                    "client {} has a single database",
                    c.id
                )));
            }
            let chunk = c.num_databases as usize - 1;
            Ok(ClientPartitions {
                party: c.id,
                num_databases: c.num_databases,
                partitions: leader_set.chunks(chunk).map(<[u32]>::to_vec).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionPlan {
        leader: leader.id,
        leader_set,
        clients,
    })
}

/// A query as it travels to a database: the partition index and the vector.
/// The targeted element is deliberately absent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryMsg {
    pub origin: Endpoint,
    pub dest: Endpoint,
    pub partition: u32,
    pub vector: Vec<FieldElement>,
}

/// A query together with the leader's private bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuedQuery {
    pub dest: Endpoint,
    pub partition: u32,
    /// Element this query retrieves; `None` for database 1.
    pub target: Option<u32>,
    /// 0-based index of the base vector in [`QueryPlan::base_vectors`].
    pub base: usize,
    pub vector: Vec<FieldElement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub field: PrimeField,
    pub base_vectors: Vec<Vec<FieldElement>>,
    /// Ordered by client, then database, then partition.
    pub queries: Vec<IssuedQuery>,
}

impl QueryPlan {
    pub fn messages(&self, leader: PartyId) -> Vec<QueryMsg> {
        self.queries
            .iter()
            .map(|q| QueryMsg {
                origin: Endpoint::party_itself(leader),
                dest: q.dest,
                partition: q.partition,
                vector: q.vector.clone(),
            })
            .collect()
    }

    /// Number of answers the leader will download.
    pub fn answer_count(&self) -> usize {
        self.queries.len()
    }
}

/// Draws the κ base vectors `h_1..h_κ` uniformly from F_L^K.
pub fn draw_base_vectors(
    shape: &SessionShape,
    seed: u64,
) -> Vec<Vec<FieldElement>> {
    (1..=shape.kappa())
        .map(|l| {
            let mut rng = labeled_rng(seed, DrawLabel::QueryVector(l));
            (0..shape.universe.size())
                .map(|_| shape.field.element(rng.random_range(0..shape.field.modulus())))
                .collect()
        })
        .collect()
}

pub fn generate_queries(
    plan: &PartitionPlan,
    field: PrimeField,
    universe: Universe,
    seed: u64,
) -> Result<QueryPlan> {
    let shape = plan.shape(field, universe)?;
    build_queries(plan, field, universe, draw_base_vectors(&shape, seed))
}

/// Lays out the queries for given base vectors. Client `i` uses
/// `h_1..h_{η_i}`; database 1 receives each raw `h_ℓ` and database `m + 1`
/// receives `h_ℓ` with `+1` at the `m`-th element of partition `ℓ`.
pub fn build_queries(
    plan: &PartitionPlan,
    field: PrimeField,
    universe: Universe,
    base_vectors: Vec<Vec<FieldElement>>,
) -> Result<QueryPlan> {
    let kappa = plan.clients.iter().map(|c| c.partitions.len()).max().unwrap_or(0);
    if base_vectors.len() != kappa {
        return Err(Error::LengthMismatch {
            left: base_vectors.len(),
            right: kappa,
        });
    }
    for h in &base_vectors {
        if h.len() != universe.size() as usize {
            return Err(Error::LengthMismatch {
                left: h.len(),
                right: universe.size() as usize,
            });
        }
        field.check_all(h)?;
    }
    let mut queries = Vec::new();
    for client in &plan.clients {
        let used = (plan.leader_set.len() as u32 + 1).min(client.num_databases);
        let used = if plan.leader_set.is_empty() { 0 } else { used };
        for db in 1..=used {
            for (idx, part) in client.partitions.iter().enumerate() {
                let base = &base_vectors[idx];
                let target = if db == 1 {
                    None
                } else {
                    match part.get(db as usize - 2) {
                        Some(&e) => Some(e),
                        None => continue,
                    }
                };
                let mut vector = base.clone();
                if let Some(e) = target {
                    let pos = e as usize - 1;
                    vector[pos] = vector[pos].checked_add(field.one())?;
                }
                queries.push(IssuedQuery {
                    dest: Endpoint::new(client.party, db),
                    partition: idx as u32 + 1,
                    target,
                    base: idx,
                    vector,
                });
            }
        }
    }
    Ok(QueryPlan {
        field,
        base_vectors,
        queries,
    })
}

/// Result of decoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionResult {
    pub intersection: BTreeSet<u32>,
    /// `(Y_k, E_{Y_k})` for every leader-set element, ascending.
    pub indicators: Vec<(u32, u64)>,
    pub download_cost_actual: usize,
}

/// Precomputed subtraction layout: for every client and rank, which answer
/// slot holds the database-1 answer and which holds the targeted one.
#[derive(Debug, Clone)]
pub struct Decoder {
    field: PrimeField,
    leader_set: Vec<u32>,
    num_clients: usize,
    /// `pairs[client * R + rank0] = (base slot, target slot)`.
    pairs: Vec<(usize, usize)>,
    slots: HashMap<(Endpoint, u32), usize>,
}

impl Decoder {
    pub fn new(plan: &PartitionPlan, queries: &QueryPlan) -> Result<Self> {
        let r = plan.leader_set.len();
        let mut slots = HashMap::new();
        for (i, q) in queries.queries.iter().enumerate() {
            if slots.insert((q.dest, q.partition), i).is_some() {
                return Err(Error::ProtocolViolation(format!(
                    "two queries for partition {} at {}",
                    q.partition, q.dest
                )));
            }
        }
        let mut pairs = Vec::with_capacity(plan.clients.len() * r);
        for client in &plan.clients {
            let mut row = vec![None; r];
            for q in &queries.queries {
                if q.dest.party != client.party {
                    continue;
                }
                if let Some(e) = q.target {
                    let rank = plan.rank_of_element(e).ok_or_else(|| {
                        Error::ProtocolViolation(format!("query targets {e} outside the leader set"))
                    })?;
                    let base = slots[&(Endpoint::new(client.party, 1), q.partition)];
                    row[rank - 1] = Some((base, slots[&(q.dest, q.partition)]));
                }
            }
            for (k, cell) in row.into_iter().enumerate() {
                pairs.push(cell.ok_or_else(|| {
                    Error::ProtocolViolation(format!(
                        "element {} is never retrieved from {}",
                        plan.leader_set[k], client.party
                    ))
                })?);
            }
        }
        Ok(Self {
            field: queries.field,
            leader_set: plan.leader_set.clone(),
            num_clients: plan.clients.len(),
            pairs,
            slots,
        })
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Slot of the answer from `origin` for `partition`.
    pub fn slot(&self, origin: Endpoint, partition: u32) -> Option<usize> {
        self.slots.get(&(origin, partition)).copied()
    }

    /// `Z_{i,k} = A(target) - A(database 1)`, laid out `client * R + rank0`.
    pub(crate) fn differences_into(&self, answers: &[u64], out: &mut [u64]) {
        for (o, &(base, target)) in out.iter_mut().zip(&self.pairs) {
            *o = self.field.sub_raw(answers[target], answers[base]);
        }
    }

    /// `E_k = Σ_i Z_{i,k}`, per rank.
    pub(crate) fn indicators_into(&self, answers: &[u64], out: &mut [u64]) {
        let r = self.leader_set.len();
        out.iter_mut().for_each(|e| *e = 0);
        for client in 0..self.num_clients {
            for (e, &(base, target)) in out.iter_mut().zip(&self.pairs[client * r..(client + 1) * r]) {
                *e = self.field.add_raw(*e, self.field.sub_raw(answers[target], answers[base]));
            }
        }
    }

    /// Elements whose indicator vanishes.
    pub(crate) fn intersection_of(&self, indicators: &[u64]) -> BTreeSet<u32> {
        self.leader_set
            .iter()
            .zip(indicators)
            .filter(|(_, &e)| e == 0)
            .map(|(&y, _)| y)
            .collect()
    }

    pub fn leader_set(&self) -> &[u32] {
        &self.leader_set
    }

    /// Decodes slot-ordered answer values.
    pub fn decode_values(&self, answers: &[u64]) -> IntersectionResult {
        let mut e = vec![0; self.leader_set.len()];
        self.indicators_into(answers, &mut e);
        IntersectionResult {
            intersection: self.intersection_of(&e),
            indicators: self.leader_set.iter().copied().zip(e).collect(),
            download_cost_actual: answers.len(),
        }
    }
}

/// Decodes the intersection from keyed answers; arrival order is irrelevant.
pub fn decode(
    plan: &PartitionPlan,
    queries: &QueryPlan,
    answers: &[AnswerMsg],
    field: PrimeField,
) -> Result<IntersectionResult> {
    if queries.field != field {
        return Err(Error::FieldMismatch {
            left: field.modulus(),
            right: queries.field.modulus(),
        });
    }
    let decoder = Decoder::new(plan, queries)?;
    let leader = Endpoint::party_itself(plan.leader);
    let mut values: Vec<Option<u64>> = vec![None; decoder.slot_count()];
    for a in answers {
        if a.dest != leader {
            return Err(Error::ProtocolViolation(format!(
                "answer from {} addressed to {} instead of the leader",
                a.origin, a.dest
            )));
        }
        let slot = decoder.slot(a.origin, a.partition).ok_or_else(|| {
            Error::ProtocolViolation(format!(
                "unexpected answer from {} for partition {}",
                a.origin, a.partition
            ))
        })?;
        if a.value.field() != field {
            return Err(Error::FieldMismatch {
                left: field.modulus(),
                right: a.value.field().modulus(),
            });
        }
        if values[slot].replace(a.value.value()).is_some() {
            return Err(Error::ProtocolViolation(format!(
                "duplicate answer from {} for partition {}",
                a.origin, a.partition
            )));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                let q = &queries.queries[i];
                Error::ProtocolViolation(format!(
                    "missing answer from {} for partition {}",
                    q.dest, q.partition
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(decoder.decode_values(&values))
}
