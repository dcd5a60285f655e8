use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::Member;
use crate::error::{Error, Result};
use crate::model::{bt_var_y, ModelParams, Variant};

/// Negative eigenvalues above this are rounding noise.
pub const PSD_TOLERANCE: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PedigreeShape {
    /// Grandparent, parent, child of a single lineage.
    Chain,
    /// All seven members.
    Full,
}

/// Exact second moments of endowments and outcomes over one pedigree.
#[derive(Debug, Clone, PartialEq)]
pub struct PedigreeCovariance {
    pub shape: PedigreeShape,
    pub member_labels: Vec<Member>,
    pub cov_e: DMatrix<f64>,
    pub cov_y: DMatrix<f64>,
    /// Entry (i, j) is Cov(e_i, y_j).
    pub cov_ey: DMatrix<f64>,
}

impl PedigreeCovariance {
    pub fn position(&self, m: Member) -> Option<usize> {
        self.member_labels.iter().position(|&x| x == m)
    }

    pub fn e(&self, a: Member, b: Member) -> Option<f64> {
        Some(self.cov_e[(self.position(a)?, self.position(b)?)])
    }

    pub fn y(&self, a: Member, b: Member) -> Option<f64> {
        Some(self.cov_y[(self.position(a)?, self.position(b)?)])
    }

    /// Covariance of the stacked vector (e_1..e_n, y_1..y_n).
    pub fn joint(&self) -> DMatrix<f64> {
        let n = self.member_labels.len();
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        j.view_mut((0, 0), (n, n)).copy_from(&self.cov_e);
        j.view_mut((0, n), (n, n)).copy_from(&self.cov_ey);
        j.view_mut((n, 0), (n, n)).copy_from(&self.cov_ey.transpose());
        j.view_mut((n, n), (n, n)).copy_from(&self.cov_y);
        j
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.joint()).eigenvalues.min()
    }
}

/// Stationary autocovariances of a one-parent process, lag 0..=k_max.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainAutocovariance {
    /// Cov(e_t, e_{t−k}).
    pub ee: Vec<f64>,
    /// Cov(e_t, y_{t−k}).
    pub ey: Vec<f64>,
    /// Cov(y_t, e_{t−k}).
    pub ye: Vec<f64>,
    /// Cov(y_t, y_{t−k}).
    pub yy: Vec<f64>,
}

/// Autocovariances of `y_t = γ y_{t−1} + ρ e_t + u_t`, `e_t = λ e_{t−1} + v_t`.
pub fn chain_autocovariance(p: &ModelParams<f64>, k_max: usize) -> Result<ChainAutocovariance> {
    if !p.variant().is_one_parent() {
        return Err(Error::InvalidParams(format!("{} is not a one-parent process", p.variant())));
    }
    let (g, l, r) = (p.gamma(), p.lambda(), p.rho());
    let var_y = bt_var_y(g, l, r, p.sigma2_u())?;
    let c0 = r / (1.0 - g * l);
    let mut out = ChainAutocovariance { ee: vec![1.0], ey: vec![c0], ye: vec![c0], yy: vec![var_y] };
    for k in 1..=k_max {
        let lk = l.powi(k as i32);
        out.ee.push(lk);
        out.ey.push(lk * c0);
        out.ye.push(g * out.ye[k - 1] + r * lk);
        out.yy.push(g * out.yy[k - 1] + r * lk * c0);
    }
    Ok(out)
}

fn chain_covariance(p: &ModelParams<f64>) -> Result<PedigreeCovariance> {
    let ac = chain_autocovariance(p, 2)?;
    // generation of each chain member: grandparent 0, parent 1, child 2
    let n = 3;
    let mut cov_e = DMatrix::zeros(n, n);
    let mut cov_y = DMatrix::zeros(n, n);
    let mut cov_ey = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let lag = i.abs_diff(j);
            cov_e[(i, j)] = ac.ee[lag];
            cov_y[(i, j)] = ac.yy[lag];
            // i later than j: Cov(e_t, y_{t-k}); i earlier: Cov(y_t, e_{t-k})
            cov_ey[(i, j)] = if i >= j { ac.ey[lag] } else { ac.ye[lag] };
        }
    }
    Ok(PedigreeCovariance { shape: PedigreeShape::Chain, member_labels: Member::CHAIN.to_vec(), cov_e, cov_y, cov_ey })
}

/// Recursive linear system with unit-variance nodes: each node is a linear
/// combination of earlier nodes plus independent noise.
struct UnitSem {
    cov: Vec<Vec<f64>>,
}

impl UnitSem {
    fn new() -> Self {
        UnitSem { cov: Vec::new() }
    }

    fn add(&mut self, parents: &[(usize, f64)]) -> Result<usize> {
        let n = self.cov.len();
        let row: Vec<f64> = (0..n).map(|k| parents.iter().map(|&(i, a)| a * self.cov[i][k]).sum()).collect();
        let explained: f64 = parents.iter().map(|&(i, a)| a * row[i]).sum();
        if explained > 1.0 - PSD_TOLERANCE {
            return Err(Error::NotPsd {
                min_eigenvalue: 1.0 - explained,
                params: format!("node {n} needs negative innovation variance"),
            });
        }
        for (k, v) in row.iter().enumerate() {
            self.cov[k].push(*v);
        }
        let mut own = row;
        own.push(1.0);
        self.cov.push(own);
        Ok(n)
    }

    fn get(&self, a: usize, b: usize) -> f64 {
        self.cov[a][b]
    }
}

/// Steady-state spousal endowment correlation.
fn spousal_fixed_point(p: &ModelParams<f64>) -> f64 {
    match p.variant() {
        Variant::LatentFactorFamilyAm => {
            let k = p.m() * p.lambda() / 2.0;
            let mut c = 0.0_f64;
            for _ in 0..10_000 {
                let next = k * (1.0 + c);
                if (next - c).abs() < 1e-16 {
                    return next;
                }
                c = next;
            }
            c
        }
        _ => p.m(),
    }
}

fn am_covariance(p: &ModelParams<f64>) -> Result<PedigreeCovariance> {
    let family = p.variant() == Variant::LatentFactorFamilyAm;
    let (lt, m) = (p.lambda(), p.m());
    let c = spousal_fixed_point(p);
    let half = lt / 2.0;

    let mut sem = UnitSem::new();
    let mat_gm = sem.add(&[])?;
    let mat_gf = sem.add(&[(mat_gm, c)])?;
    let mother = sem.add(&[(mat_gm, half), (mat_gf, half)])?;
    let father = if family { sem.add(&[(mat_gm, m)])? } else { sem.add(&[(mother, m)])? };
    // Paternal grandparents relate to the maternal side only through the father.
    let lam = sem.get(mother, mat_gm);
    let a = if lam < 1.0 { (c - lam * lam) / (1.0 - lam * lam) } else { 1.0 };
    let pat_gf = sem.add(&[(father, lam)])?;
    let pat_gm = sem.add(&[(pat_gf, a), (father, lam * (1.0 - a))])?;
    let child = sem.add(&[(father, half), (mother, half)])?;

    let order = [pat_gf, pat_gm, mat_gf, mat_gm, father, mother, child];
    let cov_e = DMatrix::from_fn(7, 7, |i, j| sem.get(order[i], order[j]));
    let (rho, s2) = (p.rho(), p.sigma2_u());
    let cov_ey = &cov_e * rho;
    let cov_y = &cov_e * (rho * rho) + DMatrix::identity(7, 7) * s2;
    Ok(PedigreeCovariance { shape: PedigreeShape::Full, member_labels: Member::ALL.to_vec(), cov_e, cov_y, cov_ey })
}

/// Exact pedigree second moments implied by `p`.
pub fn build_pedigree_covariance(p: &ModelParams<f64>) -> Result<PedigreeCovariance> {
    let cov = if p.variant().is_one_parent() { chain_covariance(p)? } else { am_covariance(p)? };
    let min = cov.min_eigenvalue();
    if min < PSD_TOLERANCE {
        return Err(Error::NotPsd { min_eigenvalue: min, params: p.to_string() });
    }
    Ok(cov)
}

/// β₋ₖ along the maternal line (mother, maternal grandmother, ...) of an
/// assortative-mating process, from a pedigree extended k_max generations back.
pub fn am_lineage_betas(p: &ModelParams<f64>, k_max: u32) -> Result<BTreeMap<u32, f64>> {
    if !p.variant().is_assortative() {
        return Err(Error::InvalidParams(format!("{} has no spouses", p.variant())));
    }
    let family = p.variant() == Variant::LatentFactorFamilyAm;
    let (lt, m) = (p.lambda(), p.m());
    let c = spousal_fixed_point(p);
    let k_max = k_max.max(1) as usize;

    let mut sem = UnitSem::new();
    // line[j] is the j-th maternal ancestor (line[0] the child).
    let mut line = vec![0usize; k_max + 1];
    line[k_max] = sem.add(&[])?;
    let mut spouse = sem.add(&[(line[k_max], c)])?;
    for j in (0..k_max).rev() {
        line[j] = sem.add(&[(line[j + 1], lt / 2.0), (spouse, lt / 2.0)])?;
        if j > 0 {
            spouse = if family { sem.add(&[(line[j + 1], m)])? } else { sem.add(&[(line[j], m)])? };
        }
    }
    let r2 = p.rho() * p.rho();
    let var_y = r2 + p.sigma2_u();
    Ok((1..=k_max as u32).map(|k| (k, r2 * sem.get(line[0], line[k as usize]) / var_y)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{direct_am_moments, family_am_moments, lf_moments};
    use approx::assert_abs_diff_eq;

    #[test]
    fn lf_chain_matches_moments() {
        let p = ModelParams::latent_factor(0.66, 0.84).unwrap();
        let cov = build_pedigree_covariance(&p).unwrap();
        assert_eq!(cov.shape, PedigreeShape::Chain);
        assert_abs_diff_eq!(cov.y(Member::Child, Member::PatGf).unwrap(), 0.3074, epsilon = 1e-4);
        let ms = lf_moments(0.84, 0.66, 2).unwrap();
        assert_abs_diff_eq!(cov.y(Member::Child, Member::PatGf).unwrap(), ms.beta(2).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(cov.y(Member::Child, Member::Child).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn direct_am_entries() {
        let p = ModelParams::direct_am(0.8, 0.5, 0.9).unwrap();
        let cov = build_pedigree_covariance(&p).unwrap();
        assert_abs_diff_eq!(cov.e(Member::Father, Member::Mother).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(cov.e(Member::PatGf, Member::PatGm).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(cov.e(Member::Child, Member::Father).unwrap(), 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(cov.e(Member::Child, Member::Mother).unwrap(), 0.6, epsilon = 1e-14);
        let ms = direct_am_moments(0.8, 0.5, 0.9).unwrap();
        for gp in [Member::PatGf, Member::PatGm, Member::MatGf, Member::MatGm] {
            assert_abs_diff_eq!(cov.y(Member::Child, gp).unwrap(), ms.beta(2).unwrap(), epsilon = 1e-14);
        }
        for i in 0..7 {
            assert_abs_diff_eq!(cov.cov_e[(i, i)], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(cov.cov_y[(i, i)], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn family_am_entries() {
        let p = ModelParams::family_am(0.8, 0.5, 0.9).unwrap();
        let cov = build_pedigree_covariance(&p).unwrap();
        assert_abs_diff_eq!(cov.e(Member::Father, Member::Mother).unwrap(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(cov.e(Member::Father, Member::MatGm).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(cov.e(Member::Child, Member::Mother).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(cov.e(Member::Child, Member::Father).unwrap(), 0.5, epsilon = 1e-14);
        let ms = family_am_moments(0.8, 0.5, 0.9).unwrap();
        assert_abs_diff_eq!(cov.y(Member::Child, Member::MatGm).unwrap(), ms.beta(2).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn chain_is_psd_for_simplified_bt() {
        let p = ModelParams::simplified_bt(0.2, 0.5, 1.0).unwrap();
        let cov = build_pedigree_covariance(&p).unwrap();
        assert!(cov.min_eigenvalue() > PSD_TOLERANCE);
    }

    #[test]
    fn lineage_betas_extend_closed_forms() {
        let p = ModelParams::direct_am(0.8, 0.5, 0.9).unwrap();
        let b = am_lineage_betas(&p, 4).unwrap();
        for k in 1..=4u32 {
            assert_abs_diff_eq!(b[&k], 0.81 * 0.6f64.powi(k as i32), epsilon = 1e-14);
        }
        let p = ModelParams::family_am(0.8, 0.5, 0.9).unwrap();
        let b = am_lineage_betas(&p, 3).unwrap();
        let ms = family_am_moments(0.8, 0.5, 0.9).unwrap();
        assert_abs_diff_eq!(b[&1], ms.beta(1).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(b[&2], ms.beta(2).unwrap(), epsilon = 1e-14);
        assert!(b[&3] < b[&2]);
    }
}
