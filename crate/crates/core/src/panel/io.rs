use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Panel, MEMBER_COLUMN_ORDER, OPTIONAL_COLUMNS, REQUIRED_COLUMNS};
use crate::error::{Error, Result};
use crate::pedigree::{Gender, Member, PedigreeRecord};

pub const SCHEMA_VERSION: &str = "mg-panel/1";

/// Admissible years of schooling.
pub const YEARS_RANGE: (f64, f64) = (0.0, 22.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadMode {
    /// Outcomes are standardized scores; any finite value is accepted.
    Standardized,
    /// Outcomes are years of education within [`YEARS_RANGE`].
    YearsOfEducation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub column: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rows_read: usize,
    pub rows_excluded: usize,
    pub violations: Vec<Violation>,
}

/// Provenance written next to a panel CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelMeta {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_moments: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Default for PanelMeta {
    fn default() -> Self {
        PanelMeta { schema: SCHEMA_VERSION.to_string(), generator: None, sample_moments: None, notes: Vec::new() }
    }
}

/// `dir/name.csv` → `dir/name.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_sidecar(csv_path: &Path, meta: &PanelMeta) -> Result<()> {
    let mut f = BufWriter::new(File::create(sidecar_path(csv_path))?);
    serde_json::to_writer_pretty(&mut f, meta)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn fmt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn fmt_flag(v: Option<bool>) -> String {
    v.map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default()
}

fn optional_cell(r: &PedigreeRecord, column: &str) -> String {
    match column {
        "gender_child" => r.gender_child.map(|g| g.as_str().to_string()).unwrap_or_default(),
        "cohort" => r.cohort.map(|c| c.to_string()).unwrap_or_default(),
        "region_id" => r.region_id.clone().unwrap_or_default(),
        "cluster_id" => r.cluster_id.clone().unwrap_or_default(),
        "family_choice" => fmt_flag(r.family_choice),
        "post" => fmt_flag(r.post),
        "crisis" => fmt_f64(r.crisis),
        "exp_share" => fmt_f64(r.exp_share),
        e => {
            let label = e.strip_prefix("e_").expect("optional columns are covariates or endowments");
            let m = Member::ALL.into_iter().find(|m| m.label() == label).expect("known member");
            fmt_f64(r.e(m))
        }
    }
}

/// Writes the panel as CSV. Optional columns with no values are left out;
/// floats carry 17 significant digits so a re-read is bit-exact.
pub fn write_panel(panel: &Panel, path: &Path) -> Result<()> {
    let recs = panel.records();
    let optional: Vec<&str> =
        OPTIONAL_COLUMNS.iter().copied().filter(|c| recs.iter().any(|r| !optional_cell(r, c).is_empty())).collect();
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(REQUIRED_COLUMNS.iter().chain(&optional))?;
    let mut row: Vec<String> = Vec::with_capacity(REQUIRED_COLUMNS.len() + optional.len());
    for r in recs {
        row.clear();
        row.push(r.family_id.clone());
        row.push(r.child_id.clone());
        row.extend(MEMBER_COLUMN_ORDER.iter().map(|&m| fmt_f64(r.y(m))));
        row.extend(optional.iter().map(|c| optional_cell(r, c)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

struct RowParser<'a> {
    row: usize,
    violations: &'a mut Vec<Violation>,
    ok: bool,
}

impl RowParser<'_> {
    fn fail(&mut self, column: &str, message: String) {
        self.ok = false;
        self.violations.push(Violation { row: self.row, column: column.to_string(), message });
    }

    fn float(&mut self, column: &str, cell: &str) -> Option<f64> {
        if cell.is_empty() {
            return None;
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            Ok(v) => {
                self.fail(column, format!("non-finite value {v}"));
                None
            }
            Err(_) => {
                self.fail(column, format!("not a number: {cell:?}"));
                None
            }
        }
    }

    fn flag(&mut self, column: &str, cell: &str) -> Option<bool> {
        match cell {
            "" => None,
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            other => {
                self.fail(column, format!("not a 0/1 flag: {other:?}"));
                None
            }
        }
    }
}

fn non_empty(cell: &str) -> Option<String> {
    (!cell.is_empty()).then(|| cell.to_string())
}

/// Reads and validates a panel CSV. Rows with violations are excluded and
/// listed in the report; derived columns are always recomputed.
pub fn read_panel(path: &Path, mode: ReadMode) -> Result<(Panel, ValidationReport)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::HeaderMismatch(format!("duplicate column {h}")));
        }
        if !REQUIRED_COLUMNS.contains(&h.as_str()) && !OPTIONAL_COLUMNS.contains(&h.as_str()) {
            return Err(Error::HeaderMismatch(format!("unexpected column {h}")));
        }
    }
    let missing: Vec<&str> = REQUIRED_COLUMNS.iter().copied().filter(|c| !seen.contains(c)).collect();
    if !missing.is_empty() {
        return Err(Error::HeaderMismatch(format!("missing required columns: {}", missing.join(", "))));
    }
    let pos = |name: &str| header.iter().position(|h| h == name);

    let mut report = ValidationReport::default();
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        report.rows_read += 1;
        let mut p = RowParser { row: i + 1, violations: &mut report.violations, ok: true };
        let cell = |name: &str| pos(name).and_then(|j| row.get(j)).unwrap_or("");
        let mut rec = PedigreeRecord {
            family_id: cell("family_id").to_string(),
            child_id: cell("child_id").to_string(),
            ..Default::default()
        };
        if rec.family_id.is_empty() {
            p.fail("family_id", "empty id".into());
        }
        if rec.child_id.is_empty() {
            p.fail("child_id", "empty id".into());
        } else if !ids.insert(rec.child_id.clone()) {
            p.fail("child_id", format!("duplicate child_id {:?}", rec.child_id));
        }
        for m in Member::ALL {
            let yc = format!("y_{}", m.label());
            let y = p.float(&yc, cell(&yc));
            if let (Some(v), ReadMode::YearsOfEducation) = (y, mode) {
                if !(YEARS_RANGE.0..=YEARS_RANGE.1).contains(&v) {
                    p.fail(&yc, format!("{v} years outside [{}, {}]", YEARS_RANGE.0, YEARS_RANGE.1));
                }
            }
            rec.y[m.index()] = y;
            let ec = format!("e_{}", m.label());
            rec.e[m.index()] = p.float(&ec, cell(&ec));
        }
        rec.gender_child = match cell("gender_child") {
            "" => None,
            g => match g.parse::<Gender>() {
                Ok(g) => Some(g),
                Err(e) => {
                    p.fail("gender_child", e);
                    None
                }
            },
        };
        rec.cohort = match cell("cohort") {
            "" => None,
            c => match c.parse::<i32>() {
                Ok(c) => Some(c),
                Err(_) => {
                    p.fail("cohort", format!("not a year: {c:?}"));
                    None
                }
            },
        };
        rec.region_id = non_empty(cell("region_id"));
        rec.cluster_id = non_empty(cell("cluster_id"));
        rec.family_choice = p.flag("family_choice", cell("family_choice"));
        rec.post = p.flag("post", cell("post"));
        rec.crisis = p.float("crisis", cell("crisis"));
        rec.exp_share = p.float("exp_share", cell("exp_share"));
        if p.ok {
            records.push(rec);
        } else {
            report.rows_excluded += 1;
        }
    }
    let panel = Panel::from_records(records)?;
    Ok((panel, report))
}
