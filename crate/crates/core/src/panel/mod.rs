//! The three-generation panel: typed column access, CSV IO and validation.

mod io;

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::pedigree::{Member, PedigreeRecord, PedigreeShape};

pub use io::{
    read_panel, sidecar_path, write_panel, write_sidecar, PanelMeta, ReadMode, ValidationReport, Violation,
    SCHEMA_VERSION, YEARS_RANGE,
};

pub const REQUIRED_COLUMNS: [&str; 9] =
    ["family_id", "child_id", "y_child", "y_father", "y_mother", "y_pat_gf", "y_pat_gm", "y_mat_gf", "y_mat_gm"];

pub const OPTIONAL_COLUMNS: [&str; 15] = [
    "gender_child",
    "cohort",
    "region_id",
    "cluster_id",
    "family_choice",
    "post",
    "crisis",
    "exp_share",
    "e_child",
    "e_father",
    "e_mother",
    "e_pat_gf",
    "e_pat_gm",
    "e_mat_gf",
    "e_mat_gm",
];

pub const DERIVED_COLUMNS: [&str; 7] =
    ["y_parents_avg", "y_gp_avg", "y_gp_pat_avg", "y_gp_mat_avg", "born_79_82", "born_83_85", "born_86_88"];

/// School-stage cohort bins: (first, last, column).
pub const STAGE_BINS: [(i32, i32, &str); 3] =
    [(1979, 1982, "born_79_82"), (1983, 1985, "born_83_85"), (1986, 1988, "born_86_88")];

/// Output order of the member outcome columns.
pub const MEMBER_COLUMN_ORDER: [Member; 7] =
    [Member::Child, Member::Father, Member::Mother, Member::PatGf, Member::PatGm, Member::MatGf, Member::MatGm];

/// Which columns a panel actually carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelSchema {
    pub shape: PedigreeShape,
    /// Every numeric or id column with at least one non-missing value,
    /// including derived ones.
    pub columns: BTreeSet<String>,
}

impl PanelSchema {
    pub fn has(&self, column: &str) -> bool {
        self.columns.contains(column)
    }

    pub fn require(&self, column: &str) -> Result<()> {
        if self.has(column) {
            Ok(())
        } else if self.shape == PedigreeShape::Chain && touches_second_lineage(column) {
            Err(Error::SchemaMismatch(format!(
                "{column} needs both lineages but the panel holds single-lineage chains"
            )))
        } else {
            Err(Error::SchemaMismatch(format!("column {column} is absent from the panel")))
        }
    }
}

fn touches_second_lineage(column: &str) -> bool {
    ["mother", "mat_g", "parents_avg", "gp_avg", "gp_pat_avg", "pat_gm"].iter().any(|k| column.contains(k))
}

fn member_of(label: &str) -> Option<Member> {
    Member::ALL.into_iter().find(|m| m.label() == label)
}

fn mean_of(rec: &PedigreeRecord, members: &[Member]) -> Option<f64> {
    let mut s = 0.0;
    for &m in members {
        s += rec.y(m)?;
    }
    Some(s / members.len() as f64)
}

fn flag(b: Option<bool>) -> Option<f64> {
    b.map(|v| if v { 1.0 } else { 0.0 })
}

/// An in-memory panel of pedigree records.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    records: Vec<PedigreeRecord>,
    shape: PedigreeShape,
}

impl Panel {
    /// Fails on an empty record list or duplicate `child_id`s.
    pub fn from_records(records: Vec<PedigreeRecord>) -> Result<Panel> {
        if records.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.child_id.as_str()) {
                return Err(Error::SchemaMismatch(format!("duplicate child_id {:?}", r.child_id)));
            }
        }
        let second = [Member::Mother, Member::PatGm, Member::MatGf, Member::MatGm];
        let full = records.iter().any(|r| second.iter().any(|&m| r.y(m).is_some()));
        let shape = if full { PedigreeShape::Full } else { PedigreeShape::Chain };
        Ok(Panel { records, shape })
    }

    pub fn records(&self) -> &[PedigreeRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<PedigreeRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn shape(&self) -> PedigreeShape {
        self.shape
    }

    fn is_known(name: &str) -> bool {
        REQUIRED_COLUMNS.contains(&name) || OPTIONAL_COLUMNS.contains(&name) || DERIVED_COLUMNS.contains(&name)
    }

    pub fn schema(&self) -> PanelSchema {
        let mut columns = BTreeSet::new();
        for name in REQUIRED_COLUMNS.iter().chain(&OPTIONAL_COLUMNS).chain(&DERIVED_COLUMNS) {
            let present = match self.numeric(name) {
                Ok(v) => v.iter().any(Option::is_some),
                Err(_) => self.categorical(name).map(|v| v.iter().any(Option::is_some)).unwrap_or(false),
            };
            if present {
                columns.insert(name.to_string());
            }
        }
        PanelSchema { shape: self.shape, columns }
    }

    /// Numeric view of a column; booleans map to 0/1, ids are not numeric.
    pub fn numeric(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let rs = &self.records;
        let col: Vec<Option<f64>> = if let Some(m) = name.strip_prefix("y_").and_then(member_of) {
            rs.iter().map(|r| r.y(m)).collect()
        } else if let Some(m) = name.strip_prefix("e_").and_then(member_of) {
            rs.iter().map(|r| r.e(m)).collect()
        } else {
            match name {
                "y_parents_avg" => rs.iter().map(|r| mean_of(r, &[Member::Father, Member::Mother])).collect(),
                "y_gp_avg" => rs
                    .iter()
                    .map(|r| mean_of(r, &[Member::PatGf, Member::PatGm, Member::MatGf, Member::MatGm]))
                    .collect(),
                "y_gp_pat_avg" => rs.iter().map(|r| mean_of(r, &[Member::PatGf, Member::PatGm])).collect(),
                "y_gp_mat_avg" => rs.iter().map(|r| mean_of(r, &[Member::MatGf, Member::MatGm])).collect(),
                "cohort" => rs.iter().map(|r| r.cohort.map(f64::from)).collect(),
                "family_choice" => rs.iter().map(|r| flag(r.family_choice)).collect(),
                "post" => rs.iter().map(|r| flag(r.post)).collect(),
                "crisis" => rs.iter().map(|r| r.crisis).collect(),
                "exp_share" => rs.iter().map(|r| r.exp_share).collect(),
                _ => {
                    let Some(&(lo, hi, _)) = STAGE_BINS.iter().find(|b| b.2 == name) else {
                        return Err(if Self::is_known(name) {
                            Error::SchemaMismatch(format!("column {name} is not numeric"))
                        } else {
                            Error::SchemaMismatch(format!("unknown column {name}"))
                        });
                    };
                    rs.iter().map(|r| r.cohort.map(|c| if (lo..=hi).contains(&c) { 1.0 } else { 0.0 })).collect()
                }
            }
        };
        Ok(col)
    }

    /// Group labels for fixed effects and clustering.
    pub fn categorical(&self, name: &str) -> Result<Vec<Option<String>>> {
        let rs = &self.records;
        Ok(match name {
            "family_id" => rs.iter().map(|r| Some(r.family_id.clone())).collect(),
            "child_id" => rs.iter().map(|r| Some(r.child_id.clone())).collect(),
            "region_id" => rs.iter().map(|r| r.region_id.clone()).collect(),
            "cluster_id" => rs.iter().map(|r| r.cluster_id.clone()).collect(),
            "gender_child" => rs.iter().map(|r| r.gender_child.map(|g| g.as_str().to_string())).collect(),
            "cohort" => rs.iter().map(|r| r.cohort.map(|c| c.to_string())).collect(),
            _ => return Err(Error::SchemaMismatch(format!("column {name} cannot group observations"))),
        })
    }

    /// Records satisfying `keep`, as a new panel.
    pub fn filter(&self, keep: impl Fn(&PedigreeRecord) -> bool) -> Result<Panel> {
        Panel::from_records(self.records.iter().filter(|r| keep(r)).cloned().collect())
    }
}
