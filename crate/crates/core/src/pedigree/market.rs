use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ids, unit_rng, Gender, Member, PedigreeRecord};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Variant};

/// Largest accepted gap between the targeted and realized matching correlation.
pub const MATCHING_TOLERANCE: f64 = 0.02;

const CALIBRATION_STEPS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Spouses sort on their own endowments.
    Direct,
    /// The wife's mother chooses the husband on her own endowment.
    FamilyBased,
}

impl Matching {
    pub fn for_variant(v: Variant) -> Option<Matching> {
        match v {
            Variant::LatentFactorDirectAm => Some(Matching::Direct),
            Variant::LatentFactorFamilyAm => Some(Matching::FamilyBased),
            _ => None,
        }
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Matching::Direct => "direct",
            Matching::FamilyBased => "family_based",
        })
    }
}

impl FromStr for Matching {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(Matching::Direct),
            "family_based" | "family" => Ok(Matching::FamilyBased),
            other => Err(format!("unknown matching {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Person {
    e: f64,
    y: f64,
    /// Endowment of this person's mother.
    mother_e: f64,
    /// Index of the parental couple in the previous generation.
    parents: usize,
}

#[derive(Debug, Clone)]
struct Generation {
    men: Vec<Person>,
    women: Vec<Person>,
    /// (man, woman) index pairs, filled once the generation has matched.
    couples: Vec<(usize, usize)>,
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

/// Pairs the k-th ranked man with the woman holding the k-th ranked index
/// `w·key + √(1−w²)·noise`, with `w` bisected so that the correlation between
/// the men's endowments and the women's keys hits `target`.
fn rank_match(men_e: &[f64], key: &[f64], noise: &[f64], target: f64) -> Result<(Vec<(usize, usize)>, f64)> {
    let men_order = argsort(men_e);
    let sorted_men: Vec<f64> = men_order.iter().map(|&i| men_e[i]).collect();
    let pair_at = |w: f64| -> (Vec<usize>, f64) {
        let s = (1.0 - w * w).max(0.0).sqrt();
        let index: Vec<f64> = key.iter().zip(noise).map(|(k, z)| w * k + s * z).collect();
        let women_order = argsort(&index);
        let keys: Vec<f64> = women_order.iter().map(|&j| key[j]).collect();
        let c = correlation(&sorted_men, &keys);
        (women_order, c)
    };

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut best = pair_at(if target <= 0.0 { 0.0 } else { 1.0 });
    if target > 0.0 && best.1 > target {
        for _ in 0..CALIBRATION_STEPS {
            let mid = 0.5 * (lo + hi);
            let cand = pair_at(mid);
            if (cand.1 - target).abs() < (best.1 - target).abs() {
                best = cand.clone();
            }
            if cand.1 < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let (women_order, realized) = best;
    if (realized - target).abs() > MATCHING_TOLERANCE {
        return Err(Error::MatchingTolerance { target, realized, tolerance: MATCHING_TOLERANCE });
    }
    let couples = men_order.into_iter().zip(women_order).collect();
    Ok((couples, realized))
}

/// Population simulator for two-parent transmission with assortative matching.
///
/// Each generation holds `n_couples` men and women. Couples form by rank
/// matching on a noisy index; every couple has one son and one daughter, who
/// make up the next generation. The final three generations are emitted as
/// full pedigrees, two children per family.
pub fn simulate_marriage_market(
    p: &ModelParams<f64>,
    n_couples: usize,
    generations: usize,
    matching: Matching,
    seed: u64,
) -> Result<Vec<PedigreeRecord>> {
    match Matching::for_variant(p.variant()) {
        Some(expected) if expected == matching => {}
        Some(expected) => {
            return Err(Error::InvalidParams(format!("{} implies {expected} matching, got {matching}", p.variant())))
        }
        None => return Err(Error::InvalidParams(format!("{} has no marriage market", p.variant()))),
    }
    if n_couples < 2 {
        return Err(Error::InvalidParams("need at least two couples per generation".into()));
    }
    if generations < 3 {
        return Err(Error::InvalidParams(format!("need at least 3 generations, got {generations}")));
    }
    let (lt, m, rho) = (p.lambda(), p.m(), p.rho());
    let sd_u = p.sigma2_u().sqrt();

    let founders = {
        let mut rng = unit_rng(seed, 0);
        let person = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mother_e: f64 = rng.sample(StandardNormal);
            let a = lt / 2.0;
            let e = a * mother_e + (1.0 - a * a).sqrt() * rng.sample::<f64, _>(StandardNormal);
            let y = rho * e + sd_u * rng.sample::<f64, _>(StandardNormal);
            Person { e, y, mother_e, parents: 0 }
        };
        let men = (0..n_couples).map(|_| person(&mut rng)).collect();
        let women = (0..n_couples).map(|_| person(&mut rng)).collect();
        Generation { men, women, couples: Vec::new() }
    };

    // Rolling window: grandparents, parents, children.
    let mut history: Vec<Generation> = vec![founders];
    for t in 1..generations {
        let mut rng = unit_rng(seed, t as u64);
        let cur = history.last_mut().expect("history is never empty");
        let men_e: Vec<f64> = cur.men.iter().map(|x| x.e).collect();
        let key: Vec<f64> = match matching {
            Matching::Direct => cur.women.iter().map(|x| x.e).collect(),
            Matching::FamilyBased => cur.women.iter().map(|x| x.mother_e).collect(),
        };
        let noise: Vec<f64> = (0..n_couples).map(|_| rng.sample(StandardNormal)).collect();
        let (couples, _) = rank_match(&men_e, &key, &noise, m)?;

        let hus: Vec<f64> = couples.iter().map(|&(a, _)| cur.men[a].e).collect();
        let wif: Vec<f64> = couples.iter().map(|&(_, b)| cur.women[b].e).collect();
        let spousal = correlation(&hus, &wif);
        let sd_v = (1.0 - lt * lt * (1.0 + spousal) / 2.0).max(0.0).sqrt();

        let child = |rng: &mut rand_chacha::ChaCha8Rng, k: usize| {
            let e = lt * (hus[k] + wif[k]) / 2.0 + sd_v * rng.sample::<f64, _>(StandardNormal);
            let y = rho * e + sd_u * rng.sample::<f64, _>(StandardNormal);
            Person { e, y, mother_e: wif[k], parents: k }
        };
        let men = (0..n_couples).map(|k| child(&mut rng, k)).collect();
        let women = (0..n_couples).map(|k| child(&mut rng, k)).collect();
        cur.couples = couples;
        history.push(Generation { men, women, couples: Vec::new() });
        if history.len() > 3 {
            history.remove(0);
        }
    }

    let [gp, par, kids] = &history[..] else { unreachable!("at least three generations simulated") };
    let mut out = Vec::with_capacity(2 * n_couples);
    for (k, &(f, mo)) in par.couples.iter().enumerate() {
        let father = par.men[f];
        let mother = par.women[mo];
        let (pgf, pgm) = gp.couples[father.parents];
        let (mgf, mgm) = gp.couples[mother.parents];
        let family = ids("f", k);
        for (j, (kid, gender)) in [(kids.men[k], Gender::Male), (kids.women[k], Gender::Female)].into_iter().enumerate()
        {
            let mut rec = PedigreeRecord {
                family_id: family.clone(),
                child_id: ids("c", 2 * k + j),
                gender_child: Some(gender),
                ..Default::default()
            };
            let members = [
                (Member::PatGf, gp.men[pgf]),
                (Member::PatGm, gp.women[pgm]),
                (Member::MatGf, gp.men[mgf]),
                (Member::MatGm, gp.women[mgm]),
                (Member::Father, father),
                (Member::Mother, mother),
                (Member::Child, kid),
            ];
            for (mem, person) in members {
                rec.set(mem, person.e, person.y);
            }
            out.push(rec);
        }
    }
    Ok(out)
}
