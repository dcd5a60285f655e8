use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RegressionSpec;
use crate::error::{Error, Result};
use crate::panel::{PanelSchema, STAGE_BINS};
use crate::pedigree::PedigreeShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentSelector {
    Father,
    Mother,
    /// Mean of both parents.
    Average,
}

impl ParentSelector {
    pub fn column(self) -> &'static str {
        match self {
            ParentSelector::Father => "y_father",
            ParentSelector::Mother => "y_mother",
            ParentSelector::Average => "y_parents_avg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpSelector {
    /// Mean of all four grandparents.
    All,
    Paternal,
    Maternal,
    PatGf,
    PatGm,
    MatGf,
    MatGm,
}

impl GpSelector {
    pub fn column(self) -> &'static str {
        match self {
            GpSelector::All => "y_gp_avg",
            GpSelector::Paternal => "y_gp_pat_avg",
            GpSelector::Maternal => "y_gp_mat_avg",
            GpSelector::PatGf => "y_pat_gf",
            GpSelector::PatGm => "y_pat_gm",
            GpSelector::MatGf => "y_mat_gf",
            GpSelector::MatGm => "y_mat_gm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrisisBinning {
    /// One treated group: every cohort from the first treated year on.
    Pooled,
    /// Three treated groups by school stage when the shock hit.
    BySchoolStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecTemplate {
    /// Child on the ancestor k generations back.
    Pairwise(u32),
    /// Child on parent and grandparent status.
    Multigen,
    MultigenLineage {
        parent: ParentSelector,
        gp: GpSelector,
    },
    /// Parent and grandparent slopes interacted with the family-choice flag.
    InteractionFamilyChoice {
        parent: ParentSelector,
        gp: GpSelector,
    },
    /// Parent and grandparent slopes interacted with the expenditure share.
    InteractionExpenditure {
        parent: ParentSelector,
        gp: GpSelector,
    },
    CrisisDid(CrisisBinning),
}

impl SpecTemplate {
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SpecTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sel = |p: &ParentSelector, g: &GpSelector| format!("{}+{}", p.column(), g.column());
        match self {
            SpecTemplate::Pairwise(k) => write!(f, "pairwise:{k}"),
            SpecTemplate::Multigen => f.write_str("multigen"),
            SpecTemplate::MultigenLineage { parent, gp } => write!(f, "lineage:{}", sel(parent, gp)),
            SpecTemplate::InteractionFamilyChoice { parent, gp } => write!(f, "family_choice:{}", sel(parent, gp)),
            SpecTemplate::InteractionExpenditure { parent, gp } => write!(f, "expenditure:{}", sel(parent, gp)),
            SpecTemplate::CrisisDid(CrisisBinning::Pooled) => f.write_str("crisis_did:pooled"),
            SpecTemplate::CrisisDid(CrisisBinning::BySchoolStage) => f.write_str("crisis_did:by_school_stage"),
        }
    }
}

fn parse_parent(s: &str) -> Result<ParentSelector, String> {
    Ok(match s {
        "father" | "y_father" => ParentSelector::Father,
        "mother" | "y_mother" => ParentSelector::Mother,
        "average" | "avg" | "y_parents_avg" => ParentSelector::Average,
        other => return Err(format!("unknown parent selector {other:?}")),
    })
}

fn parse_gp(s: &str) -> Result<GpSelector, String> {
    Ok(match s {
        "all" | "y_gp_avg" => GpSelector::All,
        "paternal" | "y_gp_pat_avg" => GpSelector::Paternal,
        "maternal" | "y_gp_mat_avg" => GpSelector::Maternal,
        "pat_gf" | "y_pat_gf" => GpSelector::PatGf,
        "pat_gm" | "y_pat_gm" => GpSelector::PatGm,
        "mat_gf" | "y_mat_gf" => GpSelector::MatGf,
        "mat_gm" | "y_mat_gm" => GpSelector::MatGm,
        other => return Err(format!("unknown grandparent selector {other:?}")),
    })
}

/// Parses the textual template names produced by `Display`, with the short
/// selector aliases `father|mother|average` and
/// `all|paternal|maternal|pat_gf|pat_gm|mat_gf|mat_gm`.
impl FromStr for SpecTemplate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (head, arg) = s.split_once(':').unwrap_or((s, ""));
        let pair = || -> Result<(ParentSelector, GpSelector), String> {
            let (p, g) = arg.split_once('+').ok_or_else(|| format!("{head} needs <parent>+<gp>, got {arg:?}"))?;
            Ok((parse_parent(p)?, parse_gp(g)?))
        };
        Ok(match head {
            "pairwise" => {
                SpecTemplate::Pairwise(arg.parse().map_err(|_| format!("pairwise needs a lag, got {arg:?}"))?)
            }
            "multigen" => SpecTemplate::Multigen,
            "lineage" => {
                let (parent, gp) = pair()?;
                SpecTemplate::MultigenLineage { parent, gp }
            }
            "family_choice" => {
                let (parent, gp) = pair()?;
                SpecTemplate::InteractionFamilyChoice { parent, gp }
            }
            "expenditure" => {
                let (parent, gp) = pair()?;
                SpecTemplate::InteractionExpenditure { parent, gp }
            }
            "crisis_did" => match arg {
                "" | "pooled" => SpecTemplate::CrisisDid(CrisisBinning::Pooled),
                "by_school_stage" | "stage" => SpecTemplate::CrisisDid(CrisisBinning::BySchoolStage),
                other => return Err(format!("unknown crisis binning {other:?}")),
            },
            other => return Err(format!("unknown spec template {other:?}")),
        })
    }
}

fn interacted(parent: &str, gp: &str, with: &str) -> RegressionSpec {
    RegressionSpec::new("y_child", &[parent, gp, with]).interact(&[parent, with]).interact(&[gp, with])
}

fn crisis_did(binning: CrisisBinning) -> RegressionSpec {
    let (p, gp) = ("y_parents_avg", "y_gp_avg");
    let treated: Vec<&str> = match binning {
        CrisisBinning::Pooled => vec!["post"],
        CrisisBinning::BySchoolStage => STAGE_BINS.iter().map(|b| b.2).collect(),
    };
    let mut regressors = vec![p, gp];
    regressors.extend(&treated);
    let mut spec = RegressionSpec::new("y_child", &regressors);
    for &t in &treated {
        spec = spec.interact(&[p, t]).interact(&[gp, t]);
    }
    spec = spec.interact(&[p, "crisis"]).interact(&[gp, "crisis"]);
    for &t in &treated {
        spec = spec.interact(&[p, t, "crisis"]).interact(&[gp, t, "crisis"]);
    }
    for &t in &treated {
        spec = spec.interact(&[t, "crisis"]);
    }
    spec.absorb("region_id").cluster_by("cluster_id")
}

/// The regression behind `template`, checked against the panel's columns.
pub fn build_spec(template: &SpecTemplate, schema: &PanelSchema) -> Result<RegressionSpec> {
    let chain = schema.shape == PedigreeShape::Chain;
    let spec = match *template {
        SpecTemplate::Pairwise(k) => {
            let col = match (k, chain) {
                (1, true) => "y_father",
                (2, true) => "y_pat_gf",
                (1, false) => "y_parents_avg",
                (2, false) => "y_gp_avg",
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "the panel spans three generations; lag {k} is not observed"
                    )))
                }
            };
            RegressionSpec::new("y_child", &[col]).cluster_by("family_id")
        }
        SpecTemplate::Multigen => {
            let cols: [&str; 2] = if chain { ["y_father", "y_pat_gf"] } else { ["y_parents_avg", "y_gp_avg"] };
            RegressionSpec::new("y_child", &cols).cluster_by("family_id")
        }
        SpecTemplate::MultigenLineage { parent, gp } => {
            RegressionSpec::new("y_child", &[parent.column(), gp.column()]).cluster_by("family_id")
        }
        SpecTemplate::InteractionFamilyChoice { parent, gp } => {
            interacted(parent.column(), gp.column(), "family_choice").cluster_by("family_id")
        }
        SpecTemplate::InteractionExpenditure { parent, gp } => {
            interacted(parent.column(), gp.column(), "exp_share").cluster_by("family_id")
        }
        SpecTemplate::CrisisDid(b) => {
            if b == CrisisBinning::BySchoolStage {
                schema.require("cohort")?;
            }
            crisis_did(b)
        }
    };
    for c in spec.numeric_columns() {
        schema.require(c)?;
    }
    for c in spec.fixed_effects.iter().chain(&spec.cluster) {
        schema.require(c)?;
    }
    Ok(spec)
}
