use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::estimates::VerifyReport;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    /// one row per (lemma, parameters), keyed by the parameter hash
    pub rows: BTreeMap<String, VerifyReport>,
    /// lemma id → every row of that lemma passed
    pub lemmas: BTreeMap<String, bool>,
    pub instances: usize,
    pub worst_slack: Option<Enclosure>,
    pub worst_row: Option<String>,
    pub pass: bool,
}

/// First 16 hex digits of SHA-256 over the lemma id and its sorted parameters.
pub fn param_hash(r: &VerifyReport) -> String {
    let canon = serde_json::to_string(&(&r.lemma, &r.params)).expect("strings serialize");
    let digest = Sha256::digest(canon.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl MergedReport {
    pub fn add(&mut self, r: VerifyReport) {
        let key = param_hash(&r);
        match self.rows.get_mut(&key) {
            Some(row) => row.absorb(r),
            None => {
                self.rows.insert(key, r);
            }
        }
        self.refresh();
    }

    fn refresh(&mut self) {
        self.lemmas.clear();
        self.instances = 0;
        self.worst_slack = None;
        self.worst_row = None;
        for (key, row) in &self.rows {
            let e = self.lemmas.entry(row.lemma.clone()).or_insert(true);
            *e &= row.pass;
            self.instances += row.instances;
            if let Some(s) = &row.worst_slack {
                if self.worst_slack.as_ref().map_or(true, |w| s.lo() < w.lo()) {
                    self.worst_slack = Some(s.clone());
                    self.worst_row = Some(key.clone());
                }
            }
        }
        self.pass = self.rows.values().all(|r| r.pass);
    }
}

/// Accepts a single report, an array of reports, or an already merged report.
pub fn reports_from_json(v: Value) -> Result<Vec<VerifyReport>> {
    let schema = |e: serde_json::Error| Error::SchemaMismatch(e.to_string());
    match v {
        Value::Array(items) => items
            .into_iter()
            .map(|x| serde_json::from_value(x).map_err(schema))
            .collect(),
        Value::Object(ref m) if m.contains_key("rows") => {
            let merged: MergedReport = serde_json::from_value(v).map_err(schema)?;
            Ok(merged.rows.into_values().collect())
        }
        Value::Object(_) => Ok(vec![serde_json::from_value(v).map_err(schema)?]),
        other => Err(Error::SchemaMismatch(format!("expected a report object or array, got {other}"))),
    }
}

pub fn merge_reports<I: IntoIterator<Item = VerifyReport>>(reports: I) -> MergedReport {
    let mut m = MergedReport::default();
    for r in reports {
        m.add(r);
    }
    m.refresh();
    m
}
