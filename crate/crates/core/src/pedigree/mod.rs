//! Synthetic three-generation pedigrees.
//!
//! Two independent strategies: an exact joint-Gaussian sampler driven by
//! [`PedigreeCovariance`], and forward simulators (single-parent dynasties and
//! a two-sex marriage market) that never touch the closed-form moments.

mod covariance;
mod dynasty;
mod exact;
mod market;
mod scenario;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use covariance::{
    am_lineage_betas, build_pedigree_covariance, chain_autocovariance, ChainAutocovariance, PedigreeCovariance,
    PedigreeShape, PSD_TOLERANCE,
};
pub use dynasty::{simulate_dynasties, simulate_lineages, LineagePath, DEFAULT_BURN_IN};
pub use exact::sample_pedigrees;
pub use market::{simulate_marriage_market, Matching, MATCHING_TOLERANCE};
pub use scenario::{plant_scenario, CrisisDidParams, FamilyChoiceParams, Scenario};

/// A member of the seven-person pedigree, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    PatGf,
    PatGm,
    MatGf,
    MatGm,
    Father,
    Mother,
    Child,
}

impl Member {
    pub const ALL: [Member; 7] =
        [Member::PatGf, Member::PatGm, Member::MatGf, Member::MatGm, Member::Father, Member::Mother, Member::Child];

    /// Members used by chain (one-parent) pedigrees: grandparent, parent, child.
    pub const CHAIN: [Member; 3] = [Member::PatGf, Member::Father, Member::Child];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Member::PatGf => "pat_gf",
            Member::PatGm => "pat_gm",
            Member::MatGf => "mat_gf",
            Member::MatGm => "mat_gm",
            Member::Father => "father",
            Member::Mother => "mother",
            Member::Child => "child",
        }
    }

    pub fn is_grandparent(self) -> bool {
        self.index() < 4
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

/// One family: a child, both parents and all four grandparents.
///
/// Outcomes of members that do not exist in the generating process (the
/// absent lineage of a chain pedigree) are `None`, never duplicated.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PedigreeRecord {
    pub family_id: String,
    pub child_id: String,
    /// Outcomes indexed by [`Member::index`].
    pub y: [Option<f64>; 7],
    /// Endowments, retained by simulators for diagnostics.
    pub e: [Option<f64>; 7],
    pub gender_child: Option<Gender>,
    pub cohort: Option<i32>,
    pub region_id: Option<String>,
    pub cluster_id: Option<String>,
    pub family_choice: Option<bool>,
    pub post: Option<bool>,
    pub crisis: Option<f64>,
    /// Household education-expenditure share, for the expenditure interaction.
    pub exp_share: Option<f64>,
}

impl PedigreeRecord {
    pub fn y(&self, m: Member) -> Option<f64> {
        self.y[m.index()]
    }

    pub fn e(&self, m: Member) -> Option<f64> {
        self.e[m.index()]
    }

    pub fn set(&mut self, m: Member, e: f64, y: f64) {
        self.e[m.index()] = Some(e);
        self.y[m.index()] = Some(y);
    }
}

/// Deterministic RNG for work unit `unit` under `seed`.
pub(crate) fn unit_rng(seed: u64, unit: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit);
    rng
}

pub(crate) fn ids(prefix: &str, i: usize) -> String {
    format!("{prefix}{i}")
}
