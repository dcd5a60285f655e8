use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::covariance::{PedigreeCovariance, PSD_TOLERANCE};
use super::{ids, unit_rng, Gender, Member, PedigreeRecord};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Draws (e, y) for every member of a pedigree from a fixed joint covariance.
#[derive(Debug, Clone)]
pub(crate) struct JointSampler {
    labels: Vec<Member>,
    factor: DMatrix<f64>,
}

impl JointSampler {
    pub(crate) fn new(cov: &PedigreeCovariance, context: &str) -> Result<Self> {
        let eig = SymmetricEigen::new(cov.joint());
        let min = eig.eigenvalues.min();
        if min < PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue: min, params: context.to_string() });
        }
        let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt);
        Ok(JointSampler { labels: cov.member_labels.clone(), factor })
    }

    pub(crate) fn fill<R: Rng>(&self, rng: &mut R, rec: &mut PedigreeRecord) {
        let d = self.factor.ncols();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.factor * z;
        let n = self.labels.len();
        rec.e = [None; 7];
        rec.y = [None; 7];
        for (i, &m) in self.labels.iter().enumerate() {
            rec.set(m, x[i], x[n + i]);
        }
    }
}

/// `n` independent pedigrees drawn from the exact joint Gaussian law.
///
/// Record `i` uses its own RNG substream, so output is identical for any
/// number of worker threads.
pub fn sample_pedigrees(
    cov: &PedigreeCovariance,
    p: &ModelParams<f64>,
    n: usize,
    seed: u64,
) -> Result<Vec<PedigreeRecord>> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    let sampler = JointSampler::new(cov, &p.to_string())?;
    let out = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = unit_rng(seed, i as u64);
            let mut rec = PedigreeRecord { family_id: ids("f", i), child_id: ids("c", i), ..Default::default() };
            sampler.fill(&mut rng, &mut rec);
            rec.gender_child = Some(if rng.random_bool(0.5) { Gender::Male } else { Gender::Female });
            rec
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pedigree::build_pedigree_covariance;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn deterministic_and_chain_shaped() {
        let p = ModelParams::latent_factor(0.66, 0.84).unwrap();
        let cov = build_pedigree_covariance(&p).unwrap();
        let a = sample_pedigrees(&cov, &p, 500, 9).unwrap();
        let b = sample_pedigrees(&cov, &p, 500, 9).unwrap();
        assert_eq!(a, b);
        assert!(a[0].y(Member::Mother).is_none());
        assert!(a[0].y(Member::MatGm).is_none());
        assert!(a[0].y(Member::PatGf).is_some());
        let c = sample_pedigrees(&cov, &p, 500, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_thread_pool_gives_same_draws() {
        let p = ModelParams::direct_am(0.8, 0.5, 0.9).unwrap();
        let cov = build_pedigree_covariance(&p).unwrap();
        let many = sample_pedigrees(&cov, &p, 300, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| sample_pedigrees(&cov, &p, 300, 3).unwrap());
        assert_eq!(many, one);
    }

    #[test]
    fn sample_correlations_converge() {
        let p = ModelParams::latent_factor(0.66, 0.84).unwrap();
        let cov = build_pedigree_covariance(&p).unwrap();
        let recs = sample_pedigrees(&cov, &p, 100_000, 1).unwrap();
        let yc: Vec<f64> = recs.iter().map(|r| r.y(Member::Child).unwrap()).collect();
        let yf: Vec<f64> = recs.iter().map(|r| r.y(Member::Father).unwrap()).collect();
        assert!((corr(&yc, &yf) - 0.4657).abs() < 0.01);

        let p = ModelParams::family_am(0.8, 0.5, 0.9).unwrap();
        let cov = build_pedigree_covariance(&p).unwrap();
        let recs = sample_pedigrees(&cov, &p, 100_000, 2).unwrap();
        let ef: Vec<f64> = recs.iter().map(|r| r.e(Member::Father).unwrap()).collect();
        let em: Vec<f64> = recs.iter().map(|r| r.e(Member::Mother).unwrap()).collect();
        assert!((corr(&ef, &em) - 0.25).abs() < 0.01);
    }

    #[test]
    fn rejects_empty_request() {
        let p = ModelParams::latent_factor(0.5, 0.5).unwrap();
        let cov = build_pedigree_covariance(&p).unwrap();
        assert!(sample_pedigrees(&cov, &p, 0, 1).is_err());
    }
}
