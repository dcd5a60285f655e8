use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::build_pedigree_covariance;
use super::exact::JointSampler;
use super::{unit_rng, Member, PedigreeRecord};
use crate::error::{Error, Result};
use crate::model::ModelParams;

// Substream offsets keeping region and cluster draws apart from per-record draws.
const REGION_STREAM: u64 = 1 << 40;
const CLUSTER_STREAM: u64 = 1 << 41;

/// Records split between family-based and direct matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyChoiceParams {
    pub lambda_tilde: f64,
    pub m_family: f64,
    pub m_direct: f64,
    pub rho: f64,
    /// Probability that a record comes from a family-choice marriage.
    pub share_family: f64,
}

impl Default for FamilyChoiceParams {
    fn default() -> Self {
        FamilyChoiceParams { lambda_tilde: 0.8, m_family: 0.5, m_direct: 0.5, rho: 0.9, share_family: 0.5 }
    }
}

/// Cohort × regional-shock design with planted slope interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrisisDidParams {
    /// β₁..β₉ in order: P, GP, P·post, GP·post, P·crisis, GP·crisis,
    /// P·post·crisis, GP·post·crisis, post·crisis.
    pub betas: [f64; 9],
    pub post_effect: f64,
    pub first_cohort: i32,
    pub last_cohort: i32,
    /// First cohort exposed to the shock while in school.
    pub first_treated: i32,
    pub n_regions: usize,
    pub regions_per_cluster: usize,
    pub region_fe_sd: f64,
    /// SD of a cluster-level shock hitting treated cohorts only.
    pub cluster_post_sd: f64,
    pub noise_sd: f64,
}

impl Default for CrisisDidParams {
    fn default() -> Self {
        CrisisDidParams {
            betas: [0.4, 0.1, -0.05, 0.02, 0.03, 0.01, -0.02, -0.05, -0.1],
            post_effect: 0.2,
            first_cohort: 1975,
            last_cohort: 1988,
            first_treated: 1979,
            n_regions: 300,
            regions_per_cluster: 3,
            region_fe_sd: 0.5,
            cluster_post_sd: 0.2,
            noise_sd: 1.0,
        }
    }
}

impl CrisisDidParams {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadScenarioParams(msg));
        if self.betas.iter().chain([&self.post_effect]).any(|b| !b.is_finite()) {
            return bad("betas must be finite".into());
        }
        if !(self.first_cohort < self.first_treated && self.first_treated <= self.last_cohort) {
            return bad(format!(
                "cohorts need untreated and treated years: {}..={} with first treated {}",
                self.first_cohort, self.last_cohort, self.first_treated
            ));
        }
        if self.regions_per_cluster == 0 || self.n_regions < 2 * self.regions_per_cluster {
            return bad(format!(
                "{} regions in clusters of {} leave fewer than two clusters",
                self.n_regions, self.regions_per_cluster
            ));
        }
        for (name, v) in [
            ("region_fe_sd", self.region_fe_sd),
            ("cluster_post_sd", self.cluster_post_sd),
            ("noise_sd", self.noise_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FamilyChoiceSplit(FamilyChoiceParams),
    CrisisDid(CrisisDidParams),
}

/// Plants synthetic covariates (and, where the scenario requires, outcomes)
/// onto `records`. Ids and untouched covariates are kept.
pub fn plant_scenario(records: Vec<PedigreeRecord>, scenario: &Scenario, seed: u64) -> Result<Vec<PedigreeRecord>> {
    if records.is_empty() {
        return Err(Error::BadScenarioParams("no records to plant on".into()));
    }
    match scenario {
        Scenario::FamilyChoiceSplit(fc) => family_choice_split(records, fc, seed),
        Scenario::CrisisDid(cd) => crisis_did(records, cd, seed),
    }
}

fn family_choice_split(
    records: Vec<PedigreeRecord>,
    fc: &FamilyChoiceParams,
    seed: u64,
) -> Result<Vec<PedigreeRecord>> {
    if !(0.0..=1.0).contains(&fc.share_family) {
        return Err(Error::BadScenarioParams(format!("share_family must lie in [0, 1], got {}", fc.share_family)));
    }
    let wrap = |e: Error| Error::BadScenarioParams(e.to_string());
    let fam = ModelParams::family_am(fc.lambda_tilde, fc.m_family, fc.rho).map_err(wrap)?;
    let dir = ModelParams::direct_am(fc.lambda_tilde, fc.m_direct, fc.rho).map_err(wrap)?;
    let fam_s = JointSampler::new(&build_pedigree_covariance(&fam)?, &fam.to_string())?;
    let dir_s = JointSampler::new(&build_pedigree_covariance(&dir)?, &dir.to_string())?;
    Ok(records
        .into_par_iter()
        .enumerate()
        .map(|(i, mut rec)| {
            let mut rng = unit_rng(seed, i as u64);
            let chosen = rng.random_bool(fc.share_family);
            if chosen {
                fam_s.fill(&mut rng, &mut rec);
            } else {
                dir_s.fill(&mut rng, &mut rec);
            }
            rec.family_choice = Some(chosen);
            rec
        })
        .collect())
}

fn mean_of(rec: &PedigreeRecord, members: &[Member]) -> Option<f64> {
    let mut s = 0.0;
    for &m in members {
        s += rec.y(m)?;
    }
    Some(s / members.len() as f64)
}

fn crisis_did(mut records: Vec<PedigreeRecord>, cd: &CrisisDidParams, seed: u64) -> Result<Vec<PedigreeRecord>> {
    cd.validate()?;
    let n_clusters = cd.n_regions.div_ceil(cd.regions_per_cluster);
    let region_draw = |r: usize| {
        let mut rng = unit_rng(seed, REGION_STREAM + r as u64);
        let raw: f64 = rng.sample(StandardNormal);
        let fe: f64 = rng.sample(StandardNormal);
        (raw, fe * cd.region_fe_sd)
    };
    let regions: Vec<(f64, f64)> = (0..cd.n_regions).map(region_draw).collect();
    let cluster_shock: Vec<f64> = (0..n_clusters)
        .map(|g| cd.cluster_post_sd * unit_rng(seed, CLUSTER_STREAM + g as u64).sample::<f64, _>(StandardNormal))
        .collect();

    let parents = [Member::Father, Member::Mother];
    let grandparents = [Member::PatGf, Member::PatGm, Member::MatGf, Member::MatGm];
    let mut assigned = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let mut rng = unit_rng(seed, i as u64);
        let region = rng.random_range(0..cd.n_regions);
        let cohort = rng.random_range(cd.first_cohort..=cd.last_cohort);
        let eps: f64 = rng.sample(StandardNormal);
        let (Some(p), Some(gp)) = (mean_of(rec, &parents), mean_of(rec, &grandparents)) else {
            return Err(Error::BadScenarioParams(format!(
                "record {} lacks a full pedigree; the shock design needs both parents and all grandparents",
                rec.child_id
            )));
        };
        assigned.push((region, cohort, eps, p, gp));
    }

    let n = assigned.len() as f64;
    let raw: Vec<f64> = assigned.iter().map(|a| regions[a.0].0).collect();
    let mean = raw.iter().sum::<f64>() / n;
    let sd = (raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::BadScenarioParams("crisis exposure has no variation across records".into()));
    }

    let b = &cd.betas;
    for (rec, (&(region, cohort, eps, p, gp), raw)) in records.iter_mut().zip(assigned.iter().zip(raw)) {
        let cluster = region / cd.regions_per_cluster;
        let crisis = (raw - mean) / sd;
        let post = cohort >= cd.first_treated;
        let d = if post { 1.0 } else { 0.0 };
        let y = b[0] * p
            + b[1] * gp
            + b[2] * p * d
            + b[3] * gp * d
            + b[4] * p * crisis
            + b[5] * gp * crisis
            + b[6] * p * d * crisis
            + b[7] * gp * d * crisis
            + b[8] * d * crisis
            + cd.post_effect * d
            + regions[region].1
            + cluster_shock[cluster] * d
            + cd.noise_sd * eps;
        rec.y[Member::Child.index()] = Some(y);
        rec.cohort = Some(cohort);
        rec.post = Some(post);
        rec.crisis = Some(crisis);
        rec.region_id = Some(format!("r{region}"));
        rec.cluster_id = Some(format!("k{cluster}"));
    }
    Ok(records)
}
