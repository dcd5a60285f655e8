use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{ids, unit_rng, Member, PedigreeRecord};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Generations discarded before output; initialization bias decays like λ^burn_in.
pub const DEFAULT_BURN_IN: usize = 100;

/// The last generations of one dynasty, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LineagePath {
    pub e: Vec<f64>,
    pub y: Vec<f64>,
}

/// Evolves `n` independent one-parent dynasties for `burn_in + generations`
/// steps from e₀ ~ N(0, 1) and keeps the last `generations`.
pub fn simulate_lineages(
    p: &ModelParams<f64>,
    n: usize,
    burn_in: usize,
    generations: usize,
    seed: u64,
) -> Result<Vec<LineagePath>> {
    if !p.variant().is_one_parent() {
        return Err(Error::InvalidParams(format!("{} needs the marriage-market simulator", p.variant())));
    }
    if n == 0 || generations == 0 {
        return Err(Error::InvalidParams("need at least one dynasty and one generation".into()));
    }
    let (g, l, r) = (p.gamma(), p.lambda(), p.rho());
    let sd_v = (1.0 - l * l).max(0.0).sqrt();
    let sd_u = p.sigma2_u().sqrt();
    let total = burn_in + generations;
    let out = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = unit_rng(seed, i as u64);
            let mut draw = || rng.sample::<f64, _>(StandardNormal);
            let mut e = draw();
            let mut y = r * e + sd_u * draw();
            let mut path = LineagePath { e: Vec::with_capacity(generations), y: Vec::with_capacity(generations) };
            for t in 1..=total {
                e = l * e + sd_v * draw();
                y = g * y + r * e + sd_u * draw();
                if t > burn_in {
                    path.e.push(e);
                    path.y.push(y);
                }
            }
            path
        })
        .collect();
    Ok(out)
}

/// Chain pedigrees (grandparent, parent, child) from forward dynasties.
///
/// The grandparent is stored as `pat_gf` and the parent as `father`; the
/// other lineage does not exist and stays absent.
pub fn simulate_dynasties(
    p: &ModelParams<f64>,
    n_dynasties: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<PedigreeRecord>> {
    let paths = simulate_lineages(p, n_dynasties, burn_in, 3, seed)?;
    Ok(paths
        .into_iter()
        .enumerate()
        .map(|(i, path)| {
            let mut rec = PedigreeRecord { family_id: ids("f", i), child_id: ids("c", i), ..Default::default() };
            for (k, m) in Member::CHAIN.into_iter().enumerate() {
                rec.set(m, path.e[k], path.y[k]);
            }
            rec
        })
        .collect())
}
