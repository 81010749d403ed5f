//! Unit-level records, delimited-file ingest, and intervention policies.
//!
//! Input files carry one row per unit with an id, a group label, a binary
//! treatment and a binary outcome. Optional `mu0`, `mu1` and `tau` columns
//! hold externally estimated nuisance scores. Every other column is parsed as
//! a numeric feature unless it is listed in [`Schema::exclude`].

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Tolerance for `tau_hat == mu1_hat - mu0_hat` when all three are supplied.
pub const TAU_CONSISTENCY_TOL: f64 = 1e-9;

/// One observed unit `(X, A, T, Y)` plus optional nuisance scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub group: String,
    pub treatment: bool,
    pub outcome: bool,
    pub mu0_hat: Option<f64>,
    pub mu1_hat: Option<f64>,
    pub tau_hat: Option<f64>,
}

impl UnitRecord {
    pub fn new(id: impl Into<String>, group: impl Into<String>, treatment: bool, outcome: bool) -> Self {
        UnitRecord {
            id: id.into(),
            features: Vec::new(),
            group: group.into(),
            treatment,
            outcome,
            mu0_hat: None,
            mu1_hat: None,
            tau_hat: None,
        }
    }

    pub fn with_features(mut self, features: Vec<f64>) -> Self {
        self.features = features;
        self
    }

    pub fn with_scores(mut self, mu0: f64, mu1: f64) -> Self {
        self.mu0_hat = Some(mu0);
        self.mu1_hat = Some(mu1);
        self.tau_hat = Some(mu1 - mu0);
        self
    }

    /// The effect score: the explicit `tau_hat` if present, else `mu1 - mu0`.
    pub fn effect(&self) -> Option<f64> {
        match (self.tau_hat, self.mu0_hat, self.mu1_hat) {
            (Some(t), _, _) => Some(t),
            (None, Some(m0), Some(m1)) => Some(m1 - m0),
            _ => None,
        }
    }

    /// `(mu0_hat, mu1_hat, tau)` if the record is fully scored.
    pub fn scores(&self) -> Option<(f64, f64, f64)> {
        Some((self.mu0_hat?, self.mu1_hat?, self.effect()?))
    }

    fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [("mu0_hat", self.mu0_hat), ("mu1_hat", self.mu1_hat)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("unit `{}`: {name} = {v} score out of range", self.id));
                }
            }
        }
        if let (Some(m0), Some(m1), Some(t)) = (self.mu0_hat, self.mu1_hat, self.tau_hat) {
            if (t - (m1 - m0)).abs() > TAU_CONSISTENCY_TOL {
                return Err(format!("unit `{}`: tau_hat {t} != mu1_hat - mu0_hat {}", self.id, m1 - m0));
            }
        }
        if self.tau_hat.is_some_and(|t| !t.is_finite()) {
            return Err(format!("unit `{}`: tau_hat is not finite", self.id));
        }
        if self.features.iter().any(|x| !x.is_finite()) {
            return Err(format!("unit `{}`: non-finite feature", self.id));
        }
        Ok(())
    }
}

/// An immutable, validated collection of units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<UnitRecord>,
    groups: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(records: Vec<UnitRecord>, feature_names: Vec<String>) -> Result<Self> {
        let mut groups = Vec::new();
        let mut seen = HashSet::new();
        for r in &records {
            if r.features.len() != feature_names.len() {
                return Err(AuditError::InvalidRecord(format!(
                    "unit `{}` has {} features, expected {}",
                    r.id,
                    r.features.len(),
                    feature_names.len()
                )));
            }
            r.validate().map_err(AuditError::InvalidRecord)?;
            if seen.insert(r.group.as_str()) {
                groups.push(r.group.clone());
            }
        }
        Ok(Dataset {
            records,
            groups,
            feature_names,
        })
    }

    pub fn records(&self) -> &[UnitRecord] {
        &self.records
    }

    /// Distinct group labels in order of first appearance.
    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_group(&self, group: &str) -> bool {
        self.groups.iter().any(|g| g == group)
    }

    pub fn require_group(&self, group: &str) -> Result<()> {
        if self.has_group(group) {
            Ok(())
        } else {
            Err(AuditError::GroupNotFound(group.to_string()))
        }
    }

    /// Every group must contain at least one treated and one control unit.
    pub fn check_arms(&self) -> Result<()> {
        for g in &self.groups {
            let (mut treated, mut control) = (false, false);
            for r in self.records.iter().filter(|r| &r.group == g) {
                treated |= r.treatment;
                control |= !r.treatment;
            }
            if !(treated && control) {
                return Err(AuditError::InvalidRecord(format!(
                    "group `{g}` needs at least one treated and one control unit"
                )));
            }
        }
        Ok(())
    }

    pub fn is_scored(&self) -> bool {
        self.records.iter().all(|r| r.scores().is_some())
    }

    /// Replaces the nuisance scores of every record, in order.
    pub fn with_scores(&self, scores: &[(f64, f64)]) -> Result<Dataset> {
        if scores.len() != self.records.len() {
            return Err(AuditError::InvalidRecord(format!(
                "{} score pairs for {} records",
                scores.len(),
                self.records.len()
            )));
        }
        let records = self
            .records
            .iter()
            .zip(scores)
            .map(|(r, &(m0, m1))| r.clone().with_scores(m0, m1))
            .collect();
        Dataset::new(records, self.feature_names.clone())
    }

    /// Writes the dataset in the same delimited format [`ingest`] reads,
    /// using the column names of `schema`.
    pub fn write_delimited<W: Write>(&self, writer: W, schema: &Schema) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(schema.delimiter)
            .from_writer(writer);
        let has_mu0 = self.records.iter().any(|r| r.mu0_hat.is_some());
        let has_mu1 = self.records.iter().any(|r| r.mu1_hat.is_some());
        let has_tau = self.records.iter().any(|r| r.tau_hat.is_some());

        let mut header = vec![
            schema.id.clone(),
            schema.group.clone(),
            schema.treatment.clone(),
            schema.outcome.clone(),
        ];
        header.extend(self.feature_names.iter().cloned());
        if has_mu0 {
            header.push(schema.mu0.clone());
        }
        if has_mu1 {
            header.push(schema.mu1.clone());
        }
        if has_tau {
            header.push(schema.tau.clone());
        }
        w.write_record(&header)?;

        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.id.clone(),
                r.group.clone(),
                u8::from(r.treatment).to_string(),
                u8::from(r.outcome).to_string(),
            ];
            row.extend(r.features.iter().map(|x| x.to_string()));
            if has_mu0 {
                row.push(opt(r.mu0_hat));
            }
            if has_mu1 {
                row.push(opt(r.mu1_hat));
            }
            if has_tau {
                row.push(opt(r.tau_hat));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>, schema: &Schema) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_delimited(std::io::BufWriter::new(f), schema)
    }
}

/// Column-name mapping for delimited input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    pub group: String,
    pub treatment: String,
    pub outcome: String,
    pub mu0: String,
    pub mu1: String,
    pub tau: String,
    /// Columns ignored entirely (neither required nor features).
    pub exclude: Vec<String>,
    pub delimiter: u8,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            id: "id".into(),
            group: "group".into(),
            treatment: "treatment".into(),
            outcome: "outcome".into(),
            mu0: "mu0".into(),
            mu1: "mu1".into(),
            tau: "tau".into(),
            exclude: Vec::new(),
            delimiter: b',',
        }
    }
}

pub fn ingest(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let f = std::fs::File::open(path)?;
    ingest_reader(f, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| find(name).ok_or_else(|| AuditError::MissingColumn(name.to_string()));

    let id_col = require(&schema.id)?;
    let group_col = require(&schema.group)?;
    let t_col = require(&schema.treatment)?;
    let y_col = require(&schema.outcome)?;
    let mu0_col = find(&schema.mu0);
    let mu1_col = find(&schema.mu1);
    let tau_col = find(&schema.tau);

    let reserved: Vec<usize> = [Some(id_col), Some(group_col), Some(t_col), Some(y_col), mu0_col, mu1_col, tau_col]
        .into_iter()
        .flatten()
        .collect();
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|i| !reserved.contains(i) && !schema.exclude.iter().any(|e| e == &headers[*i]))
        .collect();
    let feature_names = feature_cols.iter().map(|&i| headers[i].to_string()).collect();

    let mut records = Vec::new();
    for (row_idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = row_idx as u64 + 1;
        let line = rec.position().map(|p| p.line()).unwrap_or(row + 1);
        let invalid = |col: usize, message: String| AuditError::InvalidValue {
            row,
            line,
            column: headers[col].to_string(),
            message,
        };

        let binary = |col: usize| -> Result<bool> {
            match &rec[col] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(invalid(col, format!("non-binary value `{other}`"))),
            }
        };
        let number = |col: usize| -> Result<f64> {
            let raw = &rec[col];
            if raw.is_empty() {
                return Err(invalid(col, "missing value".into()));
            }
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(col, format!("not a finite number: `{raw}`")))
        };
        let optional = |col: Option<usize>| -> Result<Option<f64>> {
            match col {
                Some(c) if !rec[c].is_empty() => number(c).map(Some),
                _ => Ok(None),
            }
        };
        let score = |col: Option<usize>| -> Result<Option<f64>> {
            let v = optional(col)?;
            if let (Some(v), Some(c)) = (v, col) {
                if !(0.0..=1.0).contains(&v) {
                    return Err(AuditError::ScoreOutOfRange {
                        row,
                        line,
                        column: headers[c].to_string(),
                        value: v,
                    });
                }
            }
            Ok(v)
        };

        if rec[id_col].is_empty() {
            return Err(invalid(id_col, "missing value".into()));
        }
        if rec[group_col].is_empty() {
            return Err(invalid(group_col, "missing value".into()));
        }
        let mu0_hat = score(mu0_col)?;
        let mu1_hat = score(mu1_col)?;
        let tau_hat = optional(tau_col)?;
        if let (Some(m0), Some(m1), Some(t), Some(c)) = (mu0_hat, mu1_hat, tau_hat, tau_col) {
            if (t - (m1 - m0)).abs() > TAU_CONSISTENCY_TOL {
                return Err(invalid(c, format!("tau {t} inconsistent with mu1 - mu0 = {}", m1 - m0)));
            }
        }
        records.push(UnitRecord {
            id: rec[id_col].to_string(),
            features: feature_cols.iter().map(|&c| number(c)).collect::<Result<_>>()?,
            group: rec[group_col].to_string(),
            treatment: binary(t_col)?,
            outcome: binary(y_col)?,
            mu0_hat,
            mu1_hat,
            tau_hat,
        });
    }
    Dataset::new(records, feature_names)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Treat iff `tau_hat >= theta`.
    Threshold(f64),
    Explicit(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    pub description: String,
}

impl Policy {
    pub fn threshold(theta: f64) -> Self {
        Policy {
            kind: PolicyKind::Threshold(theta),
            description: format!("tau_hat >= {theta}"),
        }
    }

    pub fn explicit(assignment: Vec<bool>) -> Self {
        Policy {
            kind: PolicyKind::Explicit(assignment),
            description: "explicit assignment".into(),
        }
    }
}

/// Evaluates the assignment `Z` of `policy` on every record. Ties at the
/// threshold are treated.
pub fn apply_policy(ds: &Dataset, policy: &Policy) -> Result<Vec<bool>> {
    match &policy.kind {
        PolicyKind::Threshold(theta) => ds
            .records()
            .iter()
            .map(|r| {
                r.effect()
                    .map(|t| t >= *theta)
                    .ok_or_else(|| AuditError::MissingTau(r.id.clone()))
            })
            .collect(),
        PolicyKind::Explicit(z) => {
            if z.len() != ds.len() {
                return Err(AuditError::PolicyLength {
                    expected: ds.len(),
                    got: z.len(),
                });
            }
            Ok(z.clone())
        }
    }
}
