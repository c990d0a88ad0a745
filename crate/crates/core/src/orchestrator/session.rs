use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::client::{AnswerMsg, DatabaseNode};
use crate::error::{Error, Result};
use crate::field::{select_field_size, PrimeField};
use crate::leader::{
    decode, download_cost, elect_leader, generate_queries, make_partition_plan, CostTable,
    IntersectionResult, PartitionPlan, QueryMsg, QueryPlan,
};
use crate::model::{to_incidence, Endpoint, IncidenceVector, PartyId, PartyProfile, SessionShape, Universe};
use crate::rng::{labeled_rng, DrawLabel};

use super::config::{SessionConfig, Transport};
use super::net;
use super::wire::{Envelope, Frame, Message, Phase};

/// Everything fixed before the first message: leader, plan, queries and the
/// database endpoints taking part.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub seed: u64,
    pub session_id: u64,
    pub field: PrimeField,
    pub universe: Universe,
    pub profiles: Vec<PartyProfile>,
    pub cost_table: CostTable,
    pub leader: PartyId,
    pub plan: PartitionPlan,
    pub shape: SessionShape,
    pub queries: QueryPlan,
    pub expected_download_cost: u64,
    incidences: BTreeMap<PartyId, IncidenceVector>,
}

impl Prepared {
    pub fn new(cfg: &SessionConfig) -> Result<Self> {
        cfg.validate()?;
        let universe = cfg.universe()?;
        let profiles = cfg.profiles();
        let field = select_field_size(profiles.len())?;
        let cost_table = CostTable::compute(&profiles);
        let leader = match cfg.leader_override() {
            Some(l) => l,
            None => elect_leader(&profiles)?.0,
        };
        let leader_profile = profiles.iter().find(|p| p.id == leader).expect("validated leader");
        let clients: Vec<PartyProfile> = profiles.iter().filter(|p| p.id != leader).cloned().collect();
        let plan = make_partition_plan(leader_profile, &clients)?;
        let shape = plan.shape(field, universe)?;
        let queries = generate_queries(&plan, field, universe, cfg.seed)?;
        let expected_download_cost = download_cost(leader_profile, &clients)?;
        let incidences = clients
            .iter()
            .map(|c| Ok((c.id, to_incidence(c, &universe)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            seed: cfg.seed,
            session_id: labeled_rng(cfg.seed, DrawLabel::Session).random(),
            field,
            universe,
            profiles,
            cost_table,
            leader,
            plan,
            shape,
            queries,
            expected_download_cost,
            incidences,
        })
    }

    /// Database endpoints taking part, by client then database.
    pub fn endpoints(&self) -> Vec<Endpoint> {
        let s = &self.shape;
        (0..s.num_clients())
            .flat_map(|i| (1..=s.used_databases(i)).map(move |db| Endpoint::new(s.clients[i].party, db)))
            .collect()
    }

    pub fn database_nodes(&self) -> Result<Vec<DatabaseNode>> {
        self.endpoints()
            .into_iter()
            .map(|e| DatabaseNode::new(self.shape.clone(), e, self.incidences[&e.party].clone(), self.seed))
            .collect()
    }

    pub fn query_messages(&self) -> Vec<QueryMsg> {
        self.queries.messages(self.leader)
    }

    pub fn envelope(&self, message: Message) -> Envelope {
        Envelope {
            session_id: self.session_id,
            message,
        }
    }

    pub fn decode(&self, answers: &[AnswerMsg]) -> Result<IntersectionResult> {
        decode(&self.plan, &self.queries, answers, self.field)
    }

    pub fn transcript(&self, messages: Vec<Envelope>, result: IntersectionResult) -> SessionTranscript {
        SessionTranscript {
            session_id: self.session_id,
            seed: self.seed,
            field: self.field,
            universe_size: self.universe.size(),
            leader: self.leader,
            cost_table: self.cost_table.clone(),
            messages,
            result,
            expected_download_cost: self.expected_download_cost,
        }
    }
}

/// Ordered message log of a session together with its outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTranscript {
    pub session_id: u64,
    pub seed: u64,
    pub field: PrimeField,
    pub universe_size: u32,
    pub leader: PartyId,
    pub cost_table: CostTable,
    pub messages: Vec<Envelope>,
    pub result: IntersectionResult,
    pub expected_download_cost: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultBlock {
    intersection: BTreeSet<u32>,
    indicators: Vec<(u32, u64)>,
    download_cost_actual: usize,
    download_cost_expected: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranscriptFile {
    session_id: u64,
    seed: u64,
    field: PrimeField,
    universe_size: u32,
    leader: PartyId,
    cost_table: CostTable,
    messages: Vec<Frame>,
    result: ResultBlock,
}

impl SessionTranscript {
    pub fn count(&self, phase: Phase) -> usize {
        self.messages.iter().filter(|m| m.message.phase() == phase).count()
    }

    pub fn to_json(&self) -> String {
        let file = TranscriptFile {
            session_id: self.session_id,
            seed: self.seed,
            field: self.field,
            universe_size: self.universe_size,
            leader: self.leader,
            cost_table: self.cost_table.clone(),
            messages: self.messages.iter().map(Frame::from_envelope).collect(),
            result: ResultBlock {
                intersection: self.result.intersection.clone(),
                indicators: self.result.indicators.clone(),
                download_cost_actual: self.result.download_cost_actual,
                download_cost_expected: self.expected_download_cost,
            },
        };
        let mut s = serde_json::to_string_pretty(&file).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: TranscriptFile = serde_json::from_slice(bytes).map_err(|e| Error::Decode(e.to_string()))?;
        let messages = file
            .messages
            .into_iter()
            .map(|f| f.into_envelope(file.field))
            .collect::<Result<_>>()?;
        Ok(Self {
            session_id: file.session_id,
            seed: file.seed,
            field: file.field,
            universe_size: file.universe_size,
            leader: file.leader,
            cost_table: file.cost_table,
            messages,
            result: IntersectionResult {
                intersection: file.result.intersection,
                indicators: file.result.indicators,
                download_cost_actual: file.result.download_cost_actual,
            },
            expected_download_cost: file.result.download_cost_expected,
        })
    }

    /// Canonically sorted encoded frames, for comparing message multisets.
    pub fn message_multiset(&self) -> Vec<Vec<u8>> {
        let mut out: Vec<_> = self.messages.iter().map(super::wire::encode_msg).collect();
        out.sort();
        out
    }

    /// Structural checks every transcript must pass: phase order, one
    /// query round per database, leader isolation during the randomness
    /// phase, no client-to-client traffic afterwards, and the answer count.
    pub fn check_structure(&self) -> Result<()> {
        let violation = |s: String| Err(Error::ProtocolViolation(s));
        let leader = Endpoint::party_itself(self.leader);
        let mut last = Phase::Randomness;
        let mut queries: BTreeMap<Endpoint, usize> = BTreeMap::new();
        let mut answers: BTreeMap<Endpoint, usize> = BTreeMap::new();
        for env in &self.messages {
            let m = &env.message;
            if env.session_id != self.session_id {
                return violation(format!("foreign session id {}", env.session_id));
            }
            if m.phase() < last {
                return violation(format!("{:?} message after {:?} phase", m.phase(), last));
            }
            last = m.phase();
            match m {
                Message::Randomness(r) => {
                    if r.origin.party == self.leader || r.dest.party == self.leader {
                        return violation(format!("leader involved in randomness message {} -> {}", r.origin, r.dest));
                    }
                }
                Message::Query(q) => {
                    if q.origin != leader || q.dest.party == self.leader {
                        return violation(format!("query {} -> {} is not leader to database", q.origin, q.dest));
                    }
                    if answers.contains_key(&q.dest) {
                        return violation(format!("{} received a query after answering", q.dest));
                    }
                    *queries.entry(q.dest).or_default() += 1;
                }
                Message::Answer(a) => {
                    if a.dest != leader {
                        return violation(format!("answer {} -> {} is not database to leader", a.origin, a.dest));
                    }
                    *answers.entry(a.origin).or_default() += 1;
                }
            }
        }
        if queries != answers {
            return violation("some database did not answer each query exactly once".into());
        }
        if self.result.download_cost_actual != self.count(Phase::Answer) {
            return violation("download cost differs from the number of answers".into());
        }
        Ok(())
    }
}

/// Runs a whole session on the deterministic in-memory transport.
pub fn run_in_memory(prep: &Prepared) -> Result<SessionTranscript> {
    let mut nodes = prep.database_nodes()?;
    let index: BTreeMap<Endpoint, usize> = nodes.iter().enumerate().map(|(i, n)| (n.endpoint(), i)).collect();
    let route = |e: Endpoint| {
        index
            .get(&e)
            .copied()
            .ok_or_else(|| Error::ProtocolViolation(format!("no endpoint {e}")))
    };
    let mut log = Vec::new();

    let outgoing: Vec<_> = nodes.iter().flat_map(DatabaseNode::outgoing_randomness).collect();
    for m in outgoing {
        let i = route(m.dest)?;
        nodes[i].receive_randomness(&m)?;
        log.push(prep.envelope(Message::Randomness(m)));
    }

    let mut inbox: Vec<Vec<QueryMsg>> = vec![Vec::new(); nodes.len()];
    for q in prep.query_messages() {
        inbox[route(q.dest)?].push(q.clone());
        log.push(prep.envelope(Message::Query(q)));
    }

    let mut answers = Vec::new();
    for (node, queries) in nodes.iter().zip(&inbox) {
        for a in node.answer(queries)? {
            log.push(prep.envelope(Message::Answer(a.clone())));
            answers.push(a);
        }
    }
    let result = prep.decode(&answers)?;
    Ok(prep.transcript(log, result))
}

/// Runs `cfg` on its configured transport.
pub fn run_session(cfg: &SessionConfig) -> Result<SessionTranscript> {
    let prep = Prepared::new(cfg)?;
    match cfg.transport {
        Transport::Memory => run_in_memory(&prep),
        Transport::Network => net::run_networked(&prep, cfg.listen.unwrap_or(net::LOOPBACK), net::DEFAULT_TIMEOUT),
    }
}
