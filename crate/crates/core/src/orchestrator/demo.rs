use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::leader::CostTable;
use crate::model::PartyId;

use super::config::{PartyConfig, SessionConfig, Transport};
use super::session::{run_session, SessionTranscript};
use super::wire::Phase;

pub const DEMO_NAMES: [&str; 3] = ["sec4", "sec7_1", "sec7_2"];

/// Seed used by every demo fixture.
pub const DEMO_SEED: u64 = 2024;

struct Expected {
    intersection: &'static [u32],
    cost: u64,
    /// A cost-table entry the report must show alongside.
    table_entry: Option<(u32, u64)>,
}

fn fixture(name: &str) -> Option<(SessionConfig, Expected)> {
    let (k, parties, leader, expected): (u32, Vec<(u32, Vec<u32>)>, u32, Expected) = match name {
        "sec4" => (
            4,
            vec![(3, vec![1, 2]), (3, vec![1, 3]), (3, vec![1, 4])],
            3,
            Expected { intersection: &[1], cost: 6, table_entry: None },
        ),
        "sec7_1" => (
            4,
            vec![(2, vec![1, 2]), (2, vec![1, 3]), (2, vec![1, 4])],
            3,
            Expected { intersection: &[1], cost: 8, table_entry: None },
        ),
        "sec7_2" => (
            5,
            vec![(2, vec![1, 2, 3, 4]), (3, vec![1, 2, 4]), (5, vec![1, 3, 4]), (4, vec![1, 4, 5])],
            4,
            Expected { intersection: &[1, 4], cost: 15, table_entry: Some((2, 14)) },
        ),
        _ => return None,
    };
    let cfg = SessionConfig {
        universe_size: k,
        parties: parties
            .into_iter()
            .enumerate()
            .map(|(i, (databases, set))| PartyConfig { id: i as u32 + 1, databases, set })
            .collect(),
        leader: Some(leader),
        seed: DEMO_SEED,
        transport: Transport::Memory,
        listen: None,
    };
    Some((cfg, expected))
}

/// Config of a named demo.
pub fn demo_config(name: &str) -> Result<SessionConfig> {
    fixture(name)
        .map(|(c, _)| c)
        .ok_or_else(|| Error::Config(format!("unknown demo {name:?}; expected one of {DEMO_NAMES:?}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoCheck {
    pub what: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub name: String,
    pub leader: PartyId,
    pub elected: Option<PartyId>,
    pub cost_table: CostTable,
    pub randomness_messages: usize,
    pub query_messages: usize,
    pub answer_messages: usize,
    pub intersection: BTreeSet<u32>,
    pub download_cost_actual: usize,
    pub checks: Vec<DemoCheck>,
}

impl DemoReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check(what: &str, expected: impl fmt::Debug, actual: impl fmt::Debug) -> DemoCheck {
    let (expected, actual) = (format!("{expected:?}"), format!("{actual:?}"));
    DemoCheck { what: what.into(), pass: expected == actual, expected, actual }
}

/// Runs a named fixture and compares it with its known outcome.
pub fn demo(name: &str) -> Result<(DemoReport, SessionTranscript)> {
    let (cfg, exp) = fixture(name)
        .ok_or_else(|| Error::Config(format!("unknown demo {name:?}; expected one of {DEMO_NAMES:?}")))?;
    let t = run_session(&cfg)?;
    let mut checks = vec![
        check("intersection", exp.intersection.iter().copied().collect::<BTreeSet<u32>>(), &t.result.intersection),
        check("download cost", exp.cost, t.result.download_cost_actual as u64),
        check("cost table entry for leader", Some(exp.cost), t.cost_table.cost_of(t.leader)),
    ];
    if let Some((party, cost)) = exp.table_entry {
        checks.push(check(&format!("cost table entry for P{party}"), Some(cost), t.cost_table.cost_of(PartyId(party))));
    }
    let report = DemoReport {
        name: name.into(),
        leader: t.leader,
        elected: t.cost_table.argmin(),
        cost_table: t.cost_table.clone(),
        randomness_messages: t.count(Phase::Randomness),
        query_messages: t.count(Phase::Query),
        answer_messages: t.count(Phase::Answer),
        intersection: t.result.intersection.clone(),
        download_cost_actual: t.result.download_cost_actual,
        checks,
    };
    Ok((report, t))
}

impl fmt::Display for DemoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "demo {}", self.name)?;
        writeln!(f, "cost table:")?;
        for e in &self.cost_table.entries {
            match e.cost {
                Some(c) => writeln!(f, "  {}: {c}", e.party)?,
                None => writeln!(f, "  {}: infeasible", e.party)?,
            }
        }
        match self.elected {
            Some(p) if p != self.leader => writeln!(f, "leader: {} (override; argmin is {p})", self.leader)?,
            _ => writeln!(f, "leader: {}", self.leader)?,
        }
        writeln!(
            f,
            "messages: {} randomness, {} query, {} answer",
            self.randomness_messages, self.query_messages, self.answer_messages
        )?;
        writeln!(f, "intersection: {:?}", self.intersection)?;
        writeln!(f, "download cost: {}", self.download_cost_actual)?;
        for c in &self.checks {
            let mark = if c.pass { "ok" } else { "MISMATCH" };
            writeln!(f, "check {}: expected {}, got {} [{mark}]", c.what, c.expected, c.actual)?;
        }
        Ok(())
    }
}
