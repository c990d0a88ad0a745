//! Answer generation at client databases.
//!
//! Every database of a client stores the same incidence vector `X_i`. On a
//! query `q` for partition `ℓ` it returns
//! `A = c (⟨X_i, q⟩ + s_i(ℓ) + t_{i,j}(ℓ))`.

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};
use crate::leader::QueryMsg;
use crate::model::{Endpoint, IncidenceVector, SessionShape};
use crate::randomness::{DatabaseSlots, RandomnessNode, RandomnessShareMsg};

/// One answer on its way back to the leader.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnswerMsg {
    pub origin: Endpoint,
    pub dest: Endpoint,
    pub partition: u32,
    pub value: FieldElement,
}

/// `c (⟨x, q⟩ + s + t)`.
pub fn answer(
    x: &[FieldElement],
    q: &[FieldElement],
    s: FieldElement,
    t: FieldElement,
    c: FieldElement,
    field: PrimeField,
) -> Result<FieldElement> {
    field.check_all(&[s, t, c])?;
    let ip = field.inner_product(x, q)?;
    Ok(field.element(mask_raw(field, ip.value(), s.value(), t.value(), c.value())))
}

/// Raw form of [`answer`] on reduced representatives.
#[inline]
pub(crate) fn mask_raw(field: PrimeField, ip: u64, s: u64, t: u64, c: u64) -> u64 {
    field.mul_raw(c, field.add_raw(field.add_raw(ip, s), t))
}

/// Answers every query addressed to one database.
pub fn answer_all(
    incidence: &IncidenceVector,
    queries: &[QueryMsg],
    slots: &DatabaseSlots,
    field: PrimeField,
) -> Result<Vec<AnswerMsg>> {
    let x = incidence.to_field(&field);
    queries
        .iter()
        .map(|q| {
            let p = q.partition as usize;
            let s = *p
                .checked_sub(1)
                .and_then(|i| slots.local.get(i))
                .ok_or_else(|| Error::ProtocolViolation(format!("query for unknown partition {p}")))?;
            let t = *slots.individual.get(&q.partition).ok_or_else(|| {
                Error::ProtocolViolation(format!("no individual randomness for partition {p} at {}", q.dest))
            })?;
            Ok(AnswerMsg {
                origin: q.dest,
                dest: q.origin,
                partition: q.partition,
                value: answer(&x, &q.vector, s, t, slots.global, field)?,
            })
        })
        .collect()
}

/// A client database: randomness exchange first, then one answer per query.
#[derive(Debug, Clone)]
pub struct DatabaseNode {
    randomness: RandomnessNode,
    incidence: IncidenceVector,
    field: PrimeField,
}

impl DatabaseNode {
    pub fn new(shape: SessionShape, endpoint: Endpoint, incidence: IncidenceVector, seed: u64) -> Result<Self> {
        if incidence.len() != shape.universe.size() as usize {
            return Err(Error::LengthMismatch {
                left: incidence.len(),
                right: shape.universe.size() as usize,
            });
        }
        let field = shape.field;
        Ok(Self {
            randomness: RandomnessNode::new(shape, endpoint, seed)?,
            incidence,
            field,
        })
    }

    pub fn endpoint(&self) -> Endpoint {
        self.randomness.endpoint()
    }

    pub fn outgoing_randomness(&self) -> Vec<RandomnessShareMsg> {
        self.randomness.outgoing()
    }

    pub fn expected_randomness(&self) -> usize {
        self.randomness.expected_incoming()
    }

    pub fn receive_randomness(&mut self, msg: &RandomnessShareMsg) -> Result<()> {
        self.randomness.receive(msg)
    }

    pub fn randomness_complete(&self) -> bool {
        self.randomness.is_complete()
    }

    pub fn answer(&self, queries: &[QueryMsg]) -> Result<Vec<AnswerMsg>> {
        if let Some(q) = queries.iter().find(|q| q.dest != self.endpoint()) {
            return Err(Error::ProtocolViolation(format!(
                "query for {} delivered to {}",
                q.dest,
                self.endpoint()
            )));
        }
        let slots = self.randomness.slots()?;
        answer_all(&self.incidence, queries, &slots, self.field)
    }
}
