//! Multi-party private set intersection where every party's data set is
//! replicated over several non-colluding databases.
//!
//! One party, the leader, learns the intersection of all data sets by
//! downloading masked inner products from the other parties' databases.
//! The leader learns nothing beyond the intersection, and no database
//! learns anything about the leader's set or any other party's set.

pub mod audit;
pub mod client;
pub mod error;
pub mod field;
pub mod leader;
pub mod model;
pub mod orchestrator;
pub mod randomness;
pub mod rng;

pub use client::{answer, answer_all, AnswerMsg, DatabaseNode};
pub use error::{Error, Result};
pub use field::{select_field_size, FieldElement, PrimeField};
pub use leader::{
    decode, download_cost, elect_leader, generate_queries, make_partition_plan, CostTable,
    IntersectionResult, PartitionPlan, QueryMsg, QueryPlan,
};
pub use model::{
    brute_force_intersection, to_incidence, Endpoint, IncidenceVector, PartyId, PartyProfile,
    SessionShape, Universe,
};
pub use randomness::{RandomnessBundle, RandomnessKind, RandomnessShareMsg};
