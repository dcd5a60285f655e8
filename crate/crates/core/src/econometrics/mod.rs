//! Regression fitting for the multigenerational specifications: listwise
//! deletion, absorbed fixed effects, QR least squares and sandwich covariances.

mod ols;
mod spec;

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::panel::Panel;

pub use ols::{classical_cov, cluster_cov, hc0_cov, ols, OlsCore, COLLINEARITY_TOLERANCE};
pub use spec::{build_spec, CrisisBinning, GpSelector, ParentSelector, SpecTemplate};

pub const INTERCEPT: &str = "(intercept)";

/// Declarative description of one linear regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub outcome: String,
    pub regressors: Vec<String>,
    /// Products of two or three columns, entered after the regressors.
    pub interactions: Vec<Vec<String>>,
    /// Absorbed by within-group demeaning.
    pub fixed_effects: Option<String>,
    pub cluster: Option<String>,
    pub include_intercept: bool,
    /// Replace the outcome by 1{outcome ≥ lpm_threshold}.
    pub binary_outcome_lpm: bool,
    pub lpm_threshold: f64,
    /// Homoskedastic covariance instead of HC0 when no cluster is set.
    pub classical: bool,
}

impl RegressionSpec {
    pub fn new(outcome: &str, regressors: &[&str]) -> Self {
        RegressionSpec {
            outcome: outcome.to_string(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            interactions: Vec::new(),
            fixed_effects: None,
            cluster: None,
            include_intercept: true,
            binary_outcome_lpm: false,
            lpm_threshold: 0.0,
            classical: false,
        }
    }

    pub fn interact(mut self, columns: &[&str]) -> Self {
        self.interactions.push(columns.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn cluster_by(mut self, column: &str) -> Self {
        self.cluster = Some(column.to_string());
        self
    }

    pub fn absorb(mut self, column: &str) -> Self {
        self.fixed_effects = Some(column.to_string());
        self
    }

    pub fn lpm(mut self, threshold: f64) -> Self {
        self.binary_outcome_lpm = true;
        self.lpm_threshold = threshold;
        self
    }

    fn intercept_estimated(&self) -> bool {
        self.include_intercept && self.fixed_effects.is_none()
    }

    /// Coefficient names in design order.
    pub fn terms(&self) -> Vec<String> {
        let mut t = Vec::new();
        if self.intercept_estimated() {
            t.push(INTERCEPT.to_string());
        }
        t.extend(self.regressors.iter().cloned());
        t.extend(self.interactions.iter().map(|c| c.join(":")));
        t
    }

    /// Every numeric column the spec reads.
    pub fn numeric_columns(&self) -> Vec<&str> {
        let mut cols = vec![self.outcome.as_str()];
        cols.extend(self.regressors.iter().map(String::as_str));
        cols.extend(self.interactions.iter().flatten().map(String::as_str));
        cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Classical,
    Hc0,
    Cluster,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub terms: Vec<String>,
    pub estimates: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub covariance_kind: CovarianceKind,
    pub n_obs: usize,
    /// Rows removed by listwise deletion.
    pub n_dropped: usize,
    pub n_clusters: Option<usize>,
    /// Within R² when fixed effects are absorbed; uncentered without an intercept.
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    /// Panel row of each residual.
    pub rows: Vec<usize>,
}

impl FitResult {
    fn pos(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn coef(&self, term: &str) -> Option<f64> {
        self.pos(term).map(|i| self.estimates[i])
    }

    pub fn se(&self, term: &str) -> Option<f64> {
        self.pos(term).map(|i| self.covariance[(i, i)].max(0.0).sqrt())
    }

    pub fn t_stat(&self, term: &str) -> Option<f64> {
        Some(self.coef(term)? / self.se(term)?)
    }

    pub fn coefficients(&self) -> BTreeMap<String, f64> {
        self.terms.iter().cloned().zip(self.estimates.iter().copied()).collect()
    }

    /// Degrees of freedom for inference: G−1 when clustered, else N−K.
    pub fn inference_df(&self) -> usize {
        match self.n_clusters {
            Some(g) => g - 1,
            None => self.n_obs - self.terms.len(),
        }
    }

    /// Two-sided confidence interval at `level` from the t distribution.
    pub fn conf_int(&self, term: &str, level: f64) -> Option<(f64, f64)> {
        let (b, se) = (self.coef(term)?, self.se(term)?);
        let t = StudentsT::new(0.0, 1.0, self.inference_df() as f64).ok()?;
        let q = t.inverse_cdf(0.5 + level / 2.0);
        Some((b - q * se, b + q * se))
    }
}

fn group_index(labels: &[&str]) -> (Vec<usize>, usize) {
    let mut map: HashMap<&str, usize> = HashMap::new();
    let idx = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (idx, map.len())
}

fn demean(v: &mut [f64], groups: &[usize], n_groups: usize) {
    let mut sum = vec![0.0; n_groups];
    let mut cnt = vec![0usize; n_groups];
    for (x, &g) in v.iter().zip(groups) {
        sum[g] += x;
        cnt[g] += 1;
    }
    for (x, &g) in v.iter_mut().zip(groups) {
        *x -= sum[g] / cnt[g] as f64;
    }
}

/// The estimation sample of a spec after deletion, transformation and
/// within-demeaning.
#[derive(Debug, Clone)]
pub struct Design {
    pub terms: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub rows: Vec<usize>,
    pub n_dropped: usize,
    pub clusters: Option<(Vec<usize>, usize)>,
    pub demeaned: bool,
}

pub fn design(spec: &RegressionSpec, panel: &Panel) -> Result<Design> {
    for it in &spec.interactions {
        if !(2..=3).contains(&it.len()) {
            return Err(Error::InvalidParams(format!("interaction {it:?} must have two or three columns")));
        }
    }
    let schema = panel.schema();
    for c in spec.numeric_columns() {
        schema.require(c)?;
    }
    let fetch = |c: &str| panel.numeric(c);
    let outcome = fetch(&spec.outcome)?;
    let mut cols: Vec<Vec<Option<f64>>> = Vec::new();
    for r in &spec.regressors {
        cols.push(fetch(r)?);
    }
    for it in &spec.interactions {
        let parts: Vec<Vec<Option<f64>>> = it.iter().map(|c| fetch(c)).collect::<Result<_>>()?;
        cols.push((0..panel.len()).map(|i| parts.iter().try_fold(1.0, |acc, p| p[i].map(|v| acc * v))).collect());
    }
    let labels_of = |name: &Option<String>| -> Result<Option<Vec<Option<String>>>> {
        match name {
            Some(c) => {
                schema.require(c)?;
                Ok(Some(panel.categorical(c)?))
            }
            None => Ok(None),
        }
    };
    let fe = labels_of(&spec.fixed_effects)?;
    let cl = labels_of(&spec.cluster)?;

    let keep: Vec<usize> = (0..panel.len())
        .filter(|&i| {
            outcome[i].is_some()
                && cols.iter().all(|c| c[i].is_some())
                && fe.as_ref().is_none_or(|f| f[i].is_some())
                && cl.as_ref().is_none_or(|f| f[i].is_some())
        })
        .collect();
    let n_dropped = panel.len() - keep.len();
    if keep.is_empty() {
        return Err(Error::EmptyAfterListwiseDeletion { dropped: n_dropped });
    }

    let transform = |v: f64| {
        if spec.binary_outcome_lpm {
            if v >= spec.lpm_threshold {
                1.0
            } else {
                0.0
            }
        } else {
            v
        }
    };
    let mut y: Vec<f64> = keep.iter().map(|&i| transform(outcome[i].expect("kept rows are complete"))).collect();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    if spec.intercept_estimated() {
        xs.push(vec![1.0; keep.len()]);
    }
    for c in &cols {
        xs.push(keep.iter().map(|&i| c[i].expect("kept rows are complete")).collect());
    }
    if let Some(f) = &fe {
        let labels: Vec<&str> = keep.iter().map(|&i| f[i].as_deref().expect("kept rows are complete")).collect();
        let (g, ng) = group_index(&labels);
        demean(&mut y, &g, ng);
        for x in xs.iter_mut() {
            demean(x, &g, ng);
        }
    }
    let clusters = cl.map(|c| {
        let labels: Vec<&str> = keep.iter().map(|&i| c[i].as_deref().expect("kept rows are complete")).collect();
        group_index(&labels)
    });
    let n = keep.len();
    let terms = spec.terms();
    if terms.is_empty() {
        return Err(Error::InvalidParams("spec has no regressors".into()));
    }
    let x = DMatrix::from_fn(n, xs.len(), |i, j| xs[j][i]);
    Ok(Design { terms, x, y: DVector::from_vec(y), rows: keep, n_dropped, clusters, demeaned: fe.is_some() })
}

/// Fits `spec` on `panel`.
pub fn fit(spec: &RegressionSpec, panel: &Panel) -> Result<FitResult> {
    let d = design(spec, panel)?;
    let core = ols(d.x, d.y, &d.terms)?;
    let (covariance, kind, n_clusters) = match &d.clusters {
        Some((groups, g)) => (cluster_cov(&core, groups)?, CovarianceKind::Cluster, Some(*g)),
        None if spec.classical => (classical_cov(&core)?, CovarianceKind::Classical, None),
        None => {
            ols::residual_df(&core)?;
            (hc0_cov(&core), CovarianceKind::Hc0, None)
        }
    };
    let centered = spec.include_intercept || d.demeaned;
    let tss = if centered {
        let mean = core.y.mean();
        core.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    } else {
        core.y.norm_squared()
    };
    let r_squared = if tss > 0.0 { 1.0 - core.ssr() / tss } else { 0.0 };
    Ok(FitResult {
        terms: d.terms,
        estimates: core.beta.iter().copied().collect(),
        covariance,
        covariance_kind: kind,
        n_obs: core.x.nrows(),
        n_dropped: d.n_dropped,
        n_clusters,
        r_squared,
        residuals: core.resid.iter().copied().collect(),
        rows: d.rows,
    })
}

/// Frisch–Waugh–Lovell: the coefficient on `target` from regressing the
/// outcome on `target` residualized against the other regressors.
pub fn fwl_partial(spec: &RegressionSpec, panel: &Panel, target: &str) -> Result<f64> {
    let d = design(spec, panel)?;
    let j = d
        .terms
        .iter()
        .position(|t| t == target)
        .ok_or_else(|| Error::SchemaMismatch(format!("{target} is not a regressor of the spec")))?;
    let xt = d.x.column(j).into_owned();
    let others: Vec<usize> = (0..d.x.ncols()).filter(|&c| c != j).collect();
    let resid = if others.is_empty() {
        xt
    } else {
        let names: Vec<String> = others.iter().map(|&c| d.terms[c].clone()).collect();
        ols(d.x.select_columns(&others), xt, &names)?.resid
    };
    let denom = resid.norm_squared();
    if denom <= 0.0 {
        return Err(Error::RankDeficient { columns: vec![target.to_string()] });
    }
    Ok(resid.dot(&d.y) / denom)
}

/// Sample inputs to the non-stationary grandparent-coefficient formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleDuality {
    /// Slope of the child on the grandparent.
    pub beta2: f64,
    /// Slope of the parent on the grandparent.
    pub beta1_gp_p: f64,
    /// Slope of the child on the parent.
    pub beta1_p_c: f64,
    /// Var(gp) / Var(gp residualized on parent).
    pub var_ratio: f64,
    pub n_obs: usize,
}

/// Centered sample moments of (child, parent, grandparent) on complete rows.
pub fn sample_duality(panel: &Panel, child: &str, parent: &str, gp: &str) -> Result<SampleDuality> {
    let schema = panel.schema();
    for c in [child, parent, gp] {
        schema.require(c)?;
    }
    let (c, p, g) = (panel.numeric(child)?, panel.numeric(parent)?, panel.numeric(gp)?);
    let rows: Vec<(f64, f64, f64)> = (0..panel.len()).filter_map(|i| Some((c[i]?, p[i]?, g[i]?))).collect();
    if rows.len() < 3 {
        return Err(Error::EmptyAfterListwiseDeletion { dropped: panel.len() - rows.len() });
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let (mc, mp, mg) = (mean(|r| r.0), mean(|r| r.1), mean(|r| r.2));
    let cov = |a: fn(&(f64, f64, f64)) -> f64, ma: f64, b: fn(&(f64, f64, f64)) -> f64, mb: f64| {
        rows.iter().map(|r| (a(r) - ma) * (b(r) - mb)).sum::<f64>() / n
    };
    let vp = cov(|r| r.1, mp, |r| r.1, mp);
    let vg = cov(|r| r.2, mg, |r| r.2, mg);
    let cpg = cov(|r| r.1, mp, |r| r.2, mg);
    let ccg = cov(|r| r.0, mc, |r| r.2, mg);
    let ccp = cov(|r| r.0, mc, |r| r.1, mp);
    let resid_var = vg - cpg * cpg / vp;
    if !(vp > 0.0 && vg > 0.0 && resid_var > 0.0) {
        return Err(Error::Degenerate("grandparent outcome has no variation beyond the parent".into()));
    }
    Ok(SampleDuality {
        beta2: ccg / vg,
        beta1_gp_p: cpg / vg,
        beta1_p_c: ccp / vp,
        var_ratio: vg / resid_var,
        n_obs: rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::moments::duality_gp_nonstationary;
    use crate::pedigree::{build_pedigree_covariance, sample_pedigrees, PedigreeRecord};
    use approx::assert_abs_diff_eq;

    fn sim(p: ModelParams<f64>, n: usize, seed: u64) -> Panel {
        let cov = build_pedigree_covariance(&p).unwrap();
        Panel::from_records(sample_pedigrees(&cov, &p, n, seed).unwrap()).unwrap()
    }

    fn toy(xs: &[(f64, f64)]) -> Panel {
        let recs = xs
            .iter()
            .enumerate()
            .map(|(i, &(y, x))| {
                let mut r =
                    PedigreeRecord { family_id: format!("f{i}"), child_id: format!("c{i}"), ..Default::default() };
                r.y[crate::pedigree::Member::Child.index()] = Some(y);
                r.y[crate::pedigree::Member::Father.index()] = Some(x);
                r
            })
            .collect();
        Panel::from_records(recs).unwrap()
    }

    #[test]
    fn noiseless_line() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (2.0 * i as f64, i as f64)).collect();
        let f = fit(&RegressionSpec::new("y_child", &["y_father"]), &toy(&pts)).unwrap();
        assert_abs_diff_eq!(f.coef("y_father").unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.coef(INTERCEPT).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(f.covariance_kind, CovarianceKind::Hc0);
    }

    #[test]
    fn fwl_and_duality_identities() {
        let panel = sim(ModelParams::latent_factor(0.66, 0.84).unwrap(), 5_000, 3);
        let spec = RegressionSpec::new("y_child", &["y_father", "y_pat_gf"]);
        let f = fit(&spec, &panel).unwrap();
        let b = f.coef("y_pat_gf").unwrap();
        assert!((fwl_partial(&spec, &panel, "y_pat_gf").unwrap() - b).abs() < 1e-10);
        let sd = sample_duality(&panel, "y_child", "y_father", "y_pat_gf").unwrap();
        let via = duality_gp_nonstationary(sd.beta2, sd.beta1_gp_p, sd.beta1_p_c, sd.var_ratio).unwrap();
        assert!((via - b).abs() < 1e-10);
    }

    #[test]
    fn chain_panel_refuses_two_lineage_spec() {
        let panel = sim(ModelParams::latent_factor(0.66, 0.84).unwrap(), 100, 3);
        let spec = RegressionSpec::new("y_child", &["y_parents_avg", "y_gp_avg"]);
        assert!(matches!(fit(&spec, &panel), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn listwise_deletion_counts() {
        let mut pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, (i * i) as f64)).collect();
        pts.push((1.0, 1.0));
        let mut panel = toy(&pts).into_records();
        panel[3].y[crate::pedigree::Member::Father.index()] = None;
        let panel = Panel::from_records(panel).unwrap();
        let f = fit(&RegressionSpec::new("y_child", &["y_father"]), &panel).unwrap();
        assert_eq!(f.n_dropped, 1);
        assert_eq!(f.n_obs, 10);
        assert!(!f.rows.contains(&3));

        let mut all_missing = panel.into_records();
        for r in &mut all_missing {
            r.y[crate::pedigree::Member::Father.index()] = None;
        }
        all_missing[0].y[crate::pedigree::Member::Father.index()] = Some(1.0);
        let panel = Panel::from_records(all_missing).unwrap();
        let mut recs = panel.into_records();
        recs[0].y[crate::pedigree::Member::Child.index()] = None;
        let panel = Panel::from_records(recs).unwrap();
        assert!(matches!(
            fit(&RegressionSpec::new("y_child", &["y_father"]), &panel),
            Err(Error::EmptyAfterListwiseDeletion { dropped: 11 })
        ));
    }

    #[test]
    fn lpm_obeys_fwl() {
        let panel = sim(ModelParams::direct_am(0.8, 0.5, 0.9).unwrap(), 3_000, 5);
        let spec = RegressionSpec::new("y_child", &["y_mother", "y_mat_gm"]).lpm(0.0);
        let f = fit(&spec, &panel).unwrap();
        assert!((fwl_partial(&spec, &panel, "y_mat_gm").unwrap() - f.coef("y_mat_gm").unwrap()).abs() < 1e-10);
        assert!(f.coef("y_mother").unwrap() > 0.0);
    }

    #[test]
    fn fe_drops_intercept() {
        let panel = sim(ModelParams::direct_am(0.8, 0.5, 0.9).unwrap(), 500, 5);
        let panel = crate::pedigree::plant_scenario(
            panel.into_records(),
            &crate::pedigree::Scenario::CrisisDid(Default::default()),
            1,
        )
        .map(|r| Panel::from_records(r).unwrap())
        .unwrap();
        let spec = RegressionSpec::new("y_child", &["y_parents_avg"]).absorb("region_id").cluster_by("cluster_id");
        let f = fit(&spec, &panel).unwrap();
        assert_eq!(f.terms, vec!["y_parents_avg".to_string()]);
        assert!(f.n_clusters.unwrap() >= 2);
    }

    #[test]
    fn orthogonal_regressor_gives_bivariate_slope() {
        let xs = [-1.0, 1.0, -1.0, 1.0];
        let zs = [-1.0, -1.0, 1.0, 1.0];
        let ys = [0.5, 2.0, -0.3, 1.7];
        let recs = (0..4)
            .map(|i| {
                let mut r =
                    PedigreeRecord { family_id: format!("f{i}"), child_id: format!("c{i}"), ..Default::default() };
                r.y[crate::pedigree::Member::Child.index()] = Some(ys[i]);
                r.y[crate::pedigree::Member::Father.index()] = Some(xs[i]);
                r.y[crate::pedigree::Member::PatGf.index()] = Some(zs[i]);
                r
            })
            .collect();
        let panel = Panel::from_records(recs).unwrap();
        let spec = RegressionSpec::new("y_child", &["y_father", "y_pat_gf"]);
        let biv = fit(&RegressionSpec::new("y_child", &["y_father"]), &panel).unwrap();
        assert_abs_diff_eq!(
            fwl_partial(&spec, &panel, "y_father").unwrap(),
            biv.coef("y_father").unwrap(),
            epsilon = 1e-12
        );
    }
}
