use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;

/// One evaluated row; `(seed, trial)` regenerates the instance bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub d_in: usize,
    pub d_out: usize,
    pub label: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub values: BTreeMap<String, f64>,
    pub margin: f64,
}

impl TrialReport {
    pub fn new(trial: usize, seed: u64, label: &str, margin: f64) -> Self {
        Self {
            trial,
            seed,
            d_in: 0,
            d_out: 0,
            label: label.into(),
            alpha: None,
            beta: None,
            values: BTreeMap::new(),
            margin,
        }
    }

    pub fn dims(mut self, d_in: usize, d_out: usize) -> Self {
        self.d_in = d_in;
        self.d_out = d_out;
        self
    }

    pub fn orders(mut self, alpha: Option<f64>, beta: Option<f64>) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub trials: usize,
    pub rows: usize,
    pub min_margin: f64,
    pub mean_margin: f64,
    /// Rows with margin below `threshold`.
    pub violations: usize,
    /// Rows with margin in `[threshold, 0)`.
    pub near_violations: usize,
    pub threshold: f64,
    /// Largest value per key across rows.
    pub max_values: BTreeMap<String, f64>,
    /// Worst rows per label.
    pub min_margin_by_label: BTreeMap<String, f64>,
}

impl Aggregate {
    pub fn from_rows(trials: usize, rows: &[TrialReport], threshold: f64) -> Self {
        let n = rows.len();
        let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        let mean_margin = if n == 0 {
            0.0
        } else {
            rows.iter().map(|r| r.margin).sum::<f64>() / n as f64
        };
        // NaN margins count as violations
        let violations = rows.iter().filter(|r| !(r.margin >= threshold)).count();
        let near_violations = rows.iter().filter(|r| r.margin >= threshold && r.margin < 0.0).count();
        let mut max_values: BTreeMap<String, f64> = BTreeMap::new();
        let mut by_label: BTreeMap<String, f64> = BTreeMap::new();
        for r in rows {
            for (k, v) in &r.values {
                let e = max_values.entry(k.clone()).or_insert(f64::NEG_INFINITY);
                *e = e.max(*v);
            }
            let e = by_label.entry(r.label.clone()).or_insert(f64::INFINITY);
            *e = e.min(r.margin);
        }
        Self {
            trials,
            rows: n,
            min_margin,
            mean_margin,
            violations,
            near_violations,
            threshold,
            max_values,
            min_margin_by_label: by_label,
        }
    }
}

/// Run-dependent facts kept apart from the deterministic body.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub wall_time_s: f64,
    pub threads: usize,
    pub version: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct CampaignReport {
    pub campaign: String,
    pub params: serde_json::Value,
    /// Violations fail the run only for gated campaigns (proven statements).
    pub gated: bool,
    pub aggregate: Aggregate,
    pub rows: Vec<TrialReport>,
    pub metadata: Metadata,
}

#[derive(Serialize)]
struct Body<'a> {
    campaign: &'a str,
    params: &'a serde_json::Value,
    gated: bool,
    aggregate: &'a Aggregate,
    rows: &'a [TrialReport],
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        !self.gated || self.aggregate.violations == 0
    }

    fn body(&self) -> Body<'_> {
        Body {
            campaign: &self.campaign,
            params: &self.params,
            gated: self.gated,
            aggregate: &self.aggregate,
            rows: &self.rows,
        }
    }

    /// JSON without the metadata block; identical across runs with the same inputs.
    pub fn body_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.body())?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per row; value columns are the union of keys in sorted order.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<&String> = self.rows.iter().flat_map(|r| r.values.keys()).collect();
        keys.sort();
        keys.dedup();
        let mut out = String::from("trial,seed,d_in,d_out,label,alpha,beta,margin");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{:e}",
                r.trial,
                r.seed,
                r.d_in,
                r.d_out,
                r.label,
                opt(r.alpha),
                opt(r.beta),
                r.margin
            );
            for k in &keys {
                out.push(',');
                if let Some(v) = r.values.get(*k) {
                    let _ = write!(out, "{v:e}");
                }
            }
            out.push('\n');
        }
        out
    }
}
