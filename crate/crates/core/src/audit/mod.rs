//! Exact verification of reliability and privacy on small instances.
//!
//! Every check enumerates the randomness (and, when small enough, the base
//! vectors) of a fixed instance and compares exact counts. Nothing is
//! estimated: a distribution is uniform only if every count matches.
//! Each check accepts a [`Mutation`] of the scheme so that its power can be
//! demonstrated on a deliberately broken variant.

mod checks;
mod eval;
mod mi;
mod space;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{select_field_size, PrimeField};
use crate::leader::{elect_leader, make_partition_plan};
use crate::model::{brute_force_intersection, PartyProfile, Universe};
use crate::orchestrator::SessionConfig;
use crate::randomness::{RandomDraws, RandomnessBundle};

pub use checks::{check_db1_uniformity, check_indicator_privacy, check_reliability, check_z_uniformity};
pub use mi::{mutual_information, DistributionTable, MiReport, View, ViewSpec};
pub use space::Coverage;

pub const DEFAULT_BOUND: u128 = 10_000_000;

/// A fixed protocol instance: leader, clients and their sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub field: PrimeField,
    pub universe: Universe,
    pub leader: PartyProfile,
    /// Ascending party id.
    pub clients: Vec<PartyProfile>,
}

impl Instance {
    pub fn new(universe_size: u32, leader: PartyProfile, mut clients: Vec<PartyProfile>) -> Result<Self> {
        let universe = Universe::new(universe_size)?;
        clients.sort_by_key(|c| c.id);
        for p in clients.iter().chain([&leader]) {
            p.validate(&universe)?;
        }
        let field = select_field_size(clients.len() + 1)?;
        make_partition_plan(&leader, &clients)?;
        Ok(Self {
            field,
            universe,
            leader,
            clients,
        })
    }

    /// The instance a config describes, with its override or elected leader.
    pub fn from_config(cfg: &SessionConfig) -> Result<Self> {
        cfg.validate()?;
        let profiles = cfg.profiles();
        let leader = match cfg.leader_override() {
            Some(l) => l,
            None => elect_leader(&profiles)?.0,
        };
        let (leader, clients): (Vec<_>, Vec<_>) = profiles.into_iter().partition(|p| p.id == leader);
        Self::new(cfg.universe_size, leader.into_iter().next().expect("validated leader"), clients)
    }

    /// All parties, ascending id.
    pub fn profiles(&self) -> Vec<PartyProfile> {
        let mut all = self.clients.clone();
        all.push(self.leader.clone());
        all.sort_by_key(|p| p.id);
        all
    }

    pub fn intersection(&self) -> BTreeSet<u32> {
        brute_force_intersection(&self.profiles())
    }
}

/// Deliberate breakages of the scheme used as negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    #[default]
    None,
    /// `s_i ≡ 0`.
    ZeroLocal,
    /// Every individual value zero.
    ZeroIndividual,
    /// `c ≡ 1`.
    DisableGlobal,
    /// Individual values sum to `L - M + 2` instead of `L - M + 1`.
    BreakCorrelation,
    /// Base vectors `h ≡ 0`.
    ZeroQueryMask,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditOptions {
    /// Largest number of realizations enumerated per check.
    pub bound: u128,
    /// Seed of the sampling streams when a space exceeds `bound`.
    pub seed: u64,
    pub mutation: Mutation,
    /// Most base vectors sampled when only the randomness fits the bound.
    pub h_samples: usize,
    /// Leader sets a database is uncertain about; all sets of the leader's
    /// size when unset.
    pub leader_candidates: Option<Vec<BTreeSet<u32>>>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            bound: DEFAULT_BOUND,
            seed: 0,
            mutation: Mutation::None,
            h_samples: 16,
            leader_candidates: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Reliability,
    Lemma1,
    Lemma2,
    Lemma3,
    LeaderMi,
    ClientMi,
}

impl CheckKind {
    pub const ALL: [CheckKind; 6] = [
        CheckKind::Reliability,
        CheckKind::Lemma1,
        CheckKind::Lemma2,
        CheckKind::Lemma3,
        CheckKind::LeaderMi,
        CheckKind::ClientMi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Reliability => "reliability",
            CheckKind::Lemma1 => "lemma1",
            CheckKind::Lemma2 => "lemma2",
            CheckKind::Lemma3 => "lemma3",
            CheckKind::LeaderMi => "leader-mi",
            CheckKind::ClientMi => "client-mi",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown check {s:?}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: CheckKind,
    pub mutation: Mutation,
    pub pass: bool,
    pub coverage: Coverage,
    pub evaluations: u128,
    pub detail: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub distributions: Vec<(String, DistributionTable)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub information: Vec<MiReport>,
}

impl CheckReport {
    fn new(check: CheckKind, opts: &AuditOptions, pass: bool, coverage: Coverage, evaluations: u128, detail: String) -> Self {
        Self {
            check,
            mutation: opts.mutation,
            pass,
            coverage,
            evaluations,
            detail,
            distributions: Vec::new(),
            information: Vec::new(),
        }
    }

    fn vacuous(check: CheckKind, opts: &AuditOptions, why: &str) -> Self {
        Self::new(check, opts, true, Coverage::Vacuous, 0, format!("vacuous: {why}"))
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}", self.check)?;
        if self.mutation != Mutation::None {
            write!(f, " [mutation {:?}]", self.mutation)?;
        }
        write!(f, ": {} ({} evaluations, {})", self.detail, self.evaluations, self.coverage)?;
        for (label, table) in &self.distributions {
            let probs: Vec<String> = table
                .probabilities()
                .into_iter()
                .map(|(o, p)| format!("{o:?}={p}"))
                .collect();
            write!(f, "\n  {label}: {}", probs.join(" "))?;
        }
        for mi in &self.information {
            write!(f, "\n  {}: I = {:.6} bits over {} outcomes", mi.view, mi.bits, mi.outcomes)?;
        }
        Ok(())
    }
}

/// The randomness space of an instance.
#[derive(Debug, Clone)]
pub struct RandomnessSpace {
    shape: crate::model::SessionShape,
    layout: space::RandLayout,
    size: u128,
}

impl RandomnessSpace {
    pub fn size(&self) -> u128 {
        self.size
    }

    /// Every realization once, each with weight `1 / size`.
    pub fn iter(&self) -> impl Iterator<Item = (RandomnessBundle, Ratio<u128>)> + '_ {
        let weight = Ratio::new(1, self.size);
        let rl = &self.layout;
        let mut digits = Some(vec![0u64; rl.radices.len()]);
        std::iter::from_fn(move || {
            let d = digits.take()?;
            let draws = RandomDraws {
                local: (0..self.shape.num_clients())
                    .map(|i| rl.local_positions(i).map(|p| d[p]).collect())
                    .collect(),
                free: (0..rl.correlating).map(|i| rl.free_positions(i).map(|p| d[p]).collect()).collect(),
                global: d[rl.c_pos] + 1,
            };
            let mut next = d;
            if space::advance(&mut next, &rl.radices, 0..rl.radices.len()) {
                digits = Some(next);
            }
            Some((RandomnessBundle::from_draws(&self.shape, &draws).expect("layout matches shape"), weight))
        })
    }
}

/// All joint randomness realizations of `instance`, if at most `bound`.
pub fn enumerate_randomness(instance: &Instance, bound: u128) -> Result<RandomnessSpace> {
    let plan = make_partition_plan(&instance.leader, &instance.clients)?;
    let shape = plan.shape(instance.field, instance.universe)?;
    let layout = space::RandLayout::new(&shape);
    let size = layout.size().unwrap_or(u128::MAX);
    if size > bound {
        return Err(Error::BoundExceeded { space: size, bound });
    }
    Ok(RandomnessSpace { shape, layout, size })
}

/// Zero mutual information between every used database's view and the
/// leader set.
pub fn check_leader_mi(instance: &Instance, opts: &AuditOptions) -> Result<CheckReport> {
    let layout = eval::Layout::new(instance)?;
    let candidates = opts
        .leader_candidates
        .clone()
        .unwrap_or_else(|| mi::subsets_of_size(instance.universe.size(), instance.leader.cardinality()));
    let endpoints: BTreeSet<_> = layout.slots.iter().map(|s| s.dest).collect();
    if endpoints.is_empty() {
        return Ok(CheckReport::vacuous(CheckKind::LeaderMi, opts, "empty leader set"));
    }
    let reports = endpoints
        .iter()
        .map(|&e| mi::database_mi(instance, e, &candidates, opts))
        .collect::<Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.zero);
    let evaluations = reports.iter().map(|r| r.outcomes).sum();
    let worst = reports.iter().map(|r| r.bits).fold(0.0, f64::max);
    let detail = format!(
        "{} database views, {} candidate leader sets, largest I = {worst:.6} bits",
        reports.len(),
        candidates.len()
    );
    let coverage = Coverage::Exhaustive {
        h_vectors: space::product(&vec![layout.field.modulus(); layout.h_len()]).unwrap_or(u128::MAX),
        randomness: layout.rand.size().unwrap_or(u128::MAX),
    };
    let mut report = CheckReport::new(CheckKind::LeaderMi, opts, pass, coverage, evaluations, detail);
    report.information = reports;
    Ok(report)
}

/// Zero mutual information between the leader's view and the clients'
/// columns outside the intersection, given the intersection.
pub fn check_client_mi(instance: &Instance, opts: &AuditOptions) -> Result<CheckReport> {
    let layout = eval::Layout::new(instance)?;
    let report = mi::client_mi(instance, opts)?;
    let coverage = Coverage::Exhaustive {
        h_vectors: space::product(&vec![layout.field.modulus(); layout.h_len()]).unwrap_or(u128::MAX),
        randomness: layout.rand.size().unwrap_or(u128::MAX),
    };
    let detail = format!(
        "{} client data patterns, {} leader views, I = {:.6} bits",
        report.secrets, report.views, report.bits
    );
    let mut out = CheckReport::new(CheckKind::ClientMi, opts, report.zero, coverage, report.outcomes, detail);
    out.information = vec![report];
    Ok(out)
}

pub fn run_check(kind: CheckKind, instance: &Instance, opts: &AuditOptions) -> Result<CheckReport> {
    match kind {
        CheckKind::Reliability => check_reliability(instance, opts),
        CheckKind::Lemma1 => check_db1_uniformity(instance, opts),
        CheckKind::Lemma2 => check_z_uniformity(instance, opts),
        CheckKind::Lemma3 => check_indicator_privacy(instance, opts),
        CheckKind::LeaderMi => check_leader_mi(instance, opts),
        CheckKind::ClientMi => check_client_mi(instance, opts),
    }
}
