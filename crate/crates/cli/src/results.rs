//! Results document and plot-data emission.
//!
//! Every experiment writes one `results.json` (deterministic field order
//! and float formatting; the optional `generated_at` stamp is the only
//! non-reproducible field and is disabled by default) plus tidy CSV files
//! for the curves it produced. `plotdata` re-derives the CSVs from a
//! results document.

use cpsim_core::stats::TestReport;
use cpsim_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub contamination_rate: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultsDoc {
    pub experiment: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    /// Normalized text of the config that produced this document.
    pub config: String,
    pub estimates: serde_json::Value,
    pub tests: Vec<TestReport>,
    pub diagnostics: Diagnostics,
}

impl ResultsDoc {
    pub fn all_tests_passed(&self) -> bool {
        self.tests.iter().all(|t| t.passed)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("results.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<ResultsDoc> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("experiment: {}\n", self.experiment));
        for t in &self.tests {
            out.push_str(&t.line());
            out.push('\n');
        }
        out.push_str(&format!(
            "contamination rate: {:.6}\n",
            self.diagnostics.contamination_rate
        ));
        out
    }
}

pub fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(&path, text)?;
    Ok(path)
}

/// Header-free line writer (JSONL dumps).
pub fn write_lines(dir: &Path, name: &str, rows: &[String]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = String::with_capacity(rows.len() * 48);
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(&path, text)?;
    Ok(path)
}

fn value_path<'v>(doc: &'v serde_json::Value, path: &[&str]) -> Option<&'v serde_json::Value> {
    let mut cur = doc;
    for p in path {
        cur = cur.get(p)?;
    }
    Some(cur)
}

/// Survival curve CSV rows from an estimates value holding a `curve`.
fn survival_rows(curve: &serde_json::Value) -> Option<Vec<String>> {
    let times = curve.get("times")?.as_array()?;
    let survival = curve.get("survival")?.as_array()?;
    let lo = curve.get("ci_lo")?.as_array()?;
    let hi = curve.get("ci_hi")?.as_array()?;
    let surviving = curve.get("surviving")?.as_array()?;
    let mut rows = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        rows.push(format!(
            "{},{},{},{},{}",
            times[i], survival[i], lo[i], hi[i], surviving[i]
        ));
    }
    Some(rows)
}

/// Emit plot CSVs from a results document. Kinds: `survival`, `tv`,
/// `voids`, `scatter`.
pub fn emit_plotdata(doc: &ResultsDoc, kind: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    match kind {
        "survival" => {
            let curve = value_path(&doc.estimates, &["curve"])
                .or_else(|| value_path(&doc.estimates, &["alpha_phase", "curve"]))
                .ok_or_else(|| Error::Usage("no survival curve in results".into()))?;
            let rows = survival_rows(curve)
                .ok_or_else(|| Error::Usage("malformed survival curve".into()))?;
            written.push(write_csv(
                dir,
                "survival.csv",
                "t,p_hat,ci_lo,ci_hi,n_surviving",
                &rows,
            )?);
        }
        "tv" => {
            let pairs = value_path(&doc.estimates, &["tv_vs_t"])
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Usage("no tv_vs_t data in results".into()))?;
            let rows: Vec<String> = pairs
                .iter()
                .filter_map(|p| {
                    Some(format!("{},{}", p.get("t")?, p.get("tv")?))
                })
                .collect();
            written.push(write_csv(dir, "tv_vs_t.csv", "t,tv", &rows)?);
        }
        "voids" => {
            let voids = value_path(&doc.estimates, &["void_comparison"])
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Usage("no void comparison in results".into()))?;
            let rows: Vec<String> = voids
                .iter()
                .filter_map(|p| {
                    Some(format!(
                        "{},{},{},{}",
                        p.get("rect")?,
                        p.get("empirical")?,
                        p.get("theory")?,
                        p.get("z")?
                    ))
                })
                .collect();
            written.push(write_csv(
                dir,
                "voids.csv",
                "rect,empirical,theory,z",
                &rows,
            )?);
        }
        "scatter" => {
            let points = value_path(&doc.estimates, &["scatter"])
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Usage("no scatter data in results".into()))?;
            let dim = points
                .first()
                .and_then(|p| p.get("location"))
                .and_then(|l| l.as_array())
                .map(|l| l.len())
                .unwrap_or(1);
            let mut header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
            header.push("mark_size".into());
            let rows: Vec<String> = points
                .iter()
                .filter_map(|p| {
                    let loc = p.get("location")?.as_array()?;
                    let coords: Vec<String> = loc.iter().map(|c| c.to_string()).collect();
                    Some(format!("{},{}", coords.join(","), p.get("mark_size")?))
                })
                .collect();
            written.push(write_csv(dir, "scatter.csv", &header.join(","), &rows)?);
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown plot kind '{other}' (survival | tv | voids | scatter)"
            )))
        }
    }
    Ok(written)
}
