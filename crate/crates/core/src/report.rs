//! Run report: wall time, token usage, and dollar cost per section and in
//! total. JSON schema (`schema_version` 1):
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "tool_version": "0.1.0",
//!   "model_id": "gpt-5",
//!   "started_at": "2026-01-01T00:00:00Z",
//!   "finished_at": "2026-01-01T00:03:00Z",
//!   "wall_time_ms": 180900,
//!   "repository": {"file_count": 24, "included_count": 20, "char_count": 51234, "excluded": {"too-large": 1}},
//!   "per_section": [{"section_id": "system-overview", "index": 1, "duration_ms": 41000,
//!                    "input_tokens": 12000, "output_tokens": 2100, "usd": "0.0360",
//!                    "calls": 1, "attempts": 1, "warnings": []}],
//!   "totals": {"input_tokens": 12000, "output_tokens": 2100, "usd": "0.0360"},
//!   "diagrams": [{"section_index": 3, "ordinal": 0, "status": "rendered", "image": "images/section-3-diagram-0.png"}]
//! }
//! ```
//!
//! Money is a decimal string with four fraction digits.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use rust_decimal::Decimal;
use serde::{Serialize, Serializer};

use crate::diagram::{RenderOutcome, RenderStatus};
use crate::flatten::Flattening;
use crate::llm::{call_cost, format_usd, CostError, PriceTable};
use crate::orchestrate::{GeneratedSection, SectionWarning, TOOL_VERSION};

pub const SCHEMA_VERSION: u32 = 1;

fn usd_string<S: Serializer>(value: &Decimal, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_usd(*value))
}

fn rfc3339<S: Serializer>(value: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&value.to_rfc3339_opts(SecondsFormat::Secs, true))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RepositoryStats {
    pub file_count: usize,
    pub included_count: usize,
    pub char_count: usize,
    /// Exclusion reason tag to number of files.
    pub excluded: BTreeMap<String, usize>,
}

impl RepositoryStats {
    pub fn from_flattening(f: &Flattening) -> Self {
        let mut excluded = BTreeMap::new();
        for e in &f.entries {
            if let Some(reason) = e.excluded {
                *excluded.entry(reason.tag().to_owned()).or_insert(0) += 1;
            }
        }
        Self {
            file_count: f.entries.len(),
            included_count: f.included_count(),
            char_count: f.flat.char_count,
            excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SectionReport {
    pub section_id: String,
    pub index: u32,
    pub duration_ms: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(serialize_with = "usd_string")]
    pub usd: Decimal,
    pub calls: u32,
    pub attempts: u32,
    pub warnings: Vec<SectionWarning>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(serialize_with = "usd_string")]
    pub usd: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiagramReport {
    pub section_index: u32,
    pub ordinal: u32,
    #[serde(flatten)]
    pub status: RenderStatus,
}

impl From<&RenderOutcome> for DiagramReport {
    fn from(o: &RenderOutcome) -> Self {
        Self {
            section_index: o.block.section_index,
            ordinal: o.block.ordinal,
            status: o.status.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub model_id: String,
    #[serde(serialize_with = "rfc3339")]
    pub started_at: DateTime<Utc>,
    #[serde(serialize_with = "rfc3339")]
    pub finished_at: DateTime<Utc>,
    pub wall_time_ms: u64,
    pub repository: RepositoryStats,
    pub per_section: Vec<SectionReport>,
    pub totals: Totals,
    pub diagrams: Vec<DiagramReport>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write report: totals are inconsistent ({0})")]
    Inconsistent(String),
    #[error("cannot write report to {path}: {message}")]
    Io { path: String, message: String },
}

/// Prices each section and sums the totals.
pub fn section_reports(
    sections: &[GeneratedSection],
    model_id: &str,
    prices: &PriceTable,
) -> Result<(Vec<SectionReport>, Totals), CostError> {
    let price = prices
        .get(model_id)
        .ok_or_else(|| CostError::UnknownModelPrice(model_id.to_owned()))?;
    let mut totals = Totals::default();
    let mut out = Vec::new();
    for gs in sections {
        let usd = call_cost(gs.usage.input_tokens, gs.usage.output_tokens, price);
        totals.input_tokens += gs.usage.input_tokens;
        totals.output_tokens += gs.usage.output_tokens;
        totals.usd += usd;
        out.push(SectionReport {
            section_id: gs.section_id.clone(),
            index: gs.index,
            duration_ms: gs.duration_ms,
            input_tokens: gs.usage.input_tokens,
            output_tokens: gs.usage.output_tokens,
            usd,
            calls: gs.calls,
            attempts: gs.attempts,
            warnings: gs.warnings.clone(),
        });
    }
    Ok((out, totals))
}

impl RunReport {
    /// Checks the totals against the per-section sums and the wall time
    /// against the slowest section.
    pub fn check(&self) -> Result<(), ReportError> {
        let input: u64 = self.per_section.iter().map(|s| s.input_tokens).sum();
        let output: u64 = self.per_section.iter().map(|s| s.output_tokens).sum();
        let usd: Decimal = self.per_section.iter().map(|s| s.usd).sum();
        if input != self.totals.input_tokens {
            return Err(ReportError::Inconsistent(format!(
                "input tokens {} != sum {input}",
                self.totals.input_tokens
            )));
        }
        if output != self.totals.output_tokens {
            return Err(ReportError::Inconsistent(format!(
                "output tokens {} != sum {output}",
                self.totals.output_tokens
            )));
        }
        if usd != self.totals.usd {
            return Err(ReportError::Inconsistent(format!(
                "usd {} != sum {usd}",
                self.totals.usd
            )));
        }
        let slowest = self.per_section.iter().map(|s| s.duration_ms).max().unwrap_or(0);
        if self.wall_time_ms < slowest {
            return Err(ReportError::Inconsistent(format!(
                "wall time {} ms < section time {slowest} ms",
                self.wall_time_ms
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// `total: 3m 0.90s | 1.1900 USD`
    pub fn summary_line(&self) -> String {
        format!(
            "total: {} | {} USD",
            format_duration_ms(self.wall_time_ms),
            format_usd(self.totals.usd)
        )
    }
}

pub fn new_report(
    model_id: &str,
    started_at: DateTime<Utc>,
    finished_at: DateTime<Utc>,
    wall_time_ms: u64,
) -> RunReport {
    RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_owned(),
        model_id: model_id.to_owned(),
        started_at,
        finished_at,
        wall_time_ms,
        repository: RepositoryStats::default(),
        per_section: Vec::new(),
        totals: Totals::default(),
        diagrams: Vec::new(),
    }
}

/// Minutes and seconds with two decimals: `110000` becomes `1m 50.00s`.
pub fn format_duration_ms(ms: u64) -> String {
    let centis = (ms + 5) / 10;
    let minutes = centis / 6000;
    let rest = centis % 6000;
    format!("{minutes}m {}.{:02}s", rest / 100, rest % 100)
}

/// Validates, then writes the JSON file. Returns the summary line.
pub fn write_report(report: &RunReport, path: &Path) -> Result<String, ReportError> {
    report.check()?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| ReportError::Io {
            path: parent.display().to_string(),
            message: e.to_string(),
        })?;
    }
    std::fs::write(path, report.to_json()).map_err(|e| ReportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(report.summary_line())
}

#[cfg(test)]
mod tests {
    use std::str::FromStr;

    use super::*;
    use crate::orchestrate::SectionUsage;

    fn at(secs: i64) -> DateTime<Utc> {
        DateTime::from_timestamp(secs, 0).unwrap()
    }

    fn section(i: u32, usd: &str, ms: u64) -> SectionReport {
        SectionReport {
            section_id: format!("s{i}"),
            index: i,
            duration_ms: ms,
            input_tokens: 100,
            output_tokens: 10,
            usd: Decimal::from_str(usd).unwrap(),
            calls: 1,
            attempts: 1,
            warnings: vec![],
        }
    }

    #[test]
    fn durations() {
        assert_eq!(format_duration_ms(110_000), "1m 50.00s");
        assert_eq!(format_duration_ms(265_850), "4m 25.85s");
        assert_eq!(format_duration_ms(180_900), "3m 0.90s");
        assert_eq!(format_duration_ms(0), "0m 0.00s");
        assert_eq!(format_duration_ms(59_996), "1m 0.00s");
    }

    #[test]
    fn summary_for_mean_cost() {
        let mut r = new_report("gpt-5", at(0), at(181), 180_900);
        r.per_section = vec![section(1, "0.59", 1000), section(2, "0.60", 2000)];
        r.totals = Totals {
            input_tokens: 200,
            output_tokens: 20,
            usd: Decimal::from_str("1.19").unwrap(),
        };
        let dir = tempfile::tempdir().unwrap();
        let line = write_report(&r, &dir.path().join("report.json")).unwrap();
        assert_eq!(line, "total: 3m 0.90s | 1.1900 USD");
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(json["totals"]["usd"], "1.1900");
        assert_eq!(json["per_section"][0]["usd"], "0.5900");
        assert_eq!(json["started_at"], "1970-01-01T00:00:00Z");
    }

    #[test]
    fn empty_report_is_zero() {
        let (per, totals) = section_reports(&[], "m", &{
            let mut t = PriceTable::default();
            t.insert("m", Decimal::ONE, Decimal::ONE).unwrap();
            t
        })
        .unwrap();
        assert!(per.is_empty());
        assert_eq!(totals, Totals::default());
        let r = new_report("m", at(0), at(0), 0);
        assert!(r.check().is_ok());
        assert_eq!(r.summary_line(), "total: 0m 0.00s | 0.0000 USD");
    }

    #[test]
    fn inconsistent_totals_are_not_written() {
        let mut r = new_report("m", at(0), at(1), 5000);
        r.per_section = vec![section(1, "0.5", 1000)];
        r.totals = Totals {
            input_tokens: 100,
            output_tokens: 10,
            usd: Decimal::ONE,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        assert!(matches!(write_report(&r, &path), Err(ReportError::Inconsistent(_))));
        assert!(!path.exists());
    }

    #[test]
    fn wall_time_covers_slowest_section() {
        let mut r = new_report("m", at(0), at(1), 500);
        r.per_section = vec![section(1, "0", 1000)];
        r.totals = Totals {
            input_tokens: 100,
            output_tokens: 10,
            usd: Decimal::ZERO,
        };
        assert!(matches!(r.check(), Err(ReportError::Inconsistent(_))));
    }

    #[test]
    fn sections_priced_and_summed() {
        let mut t = PriceTable::default();
        t.insert("m", Decimal::from_str("1.25").unwrap(), Decimal::from(10))
            .unwrap();
        let gs = |i: u32, inp: u64, out: u64| GeneratedSection {
            section_id: format!("s{i}"),
            index: i,
            markdown: "x".into(),
            usage: SectionUsage {
                input_tokens: inp,
                output_tokens: out,
            },
            duration_ms: 0,
            warnings: vec![],
            calls: 1,
            attempts: 1,
        };
        let (per, totals) = section_reports(&[gs(1, 1_000_000, 0), gs(2, 0, 100_000)], "m", &t).unwrap();
        assert_eq!(per[0].usd, Decimal::from_str("1.25").unwrap());
        assert_eq!(per[1].usd, Decimal::ONE);
        assert_eq!(format_usd(totals.usd), "2.2500");
    }
}
