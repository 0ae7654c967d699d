//! Per-app reports, cohort aggregation and rendering.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprints::{FingerprintCoverage, SdkCategory, SdkHit};
use crate::manifest::ManifestFacts;
use crate::risk::{IndicatorVector, RiskAssessment, RiskLevel};

pub const ANALYZER_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const UNLABELED: &str = "unlabeled";

/// Stable per-app output record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppReport {
    pub app_id: String,
    pub package: String,
    /// Input file name.
    pub source: String,
    pub facts: ManifestFacts,
    pub sdk_hits: Vec<SdkHit>,
    pub fingerprint_coverage: FingerprintCoverage,
    pub indicator_vector: IndicatorVector,
    pub risk: RiskAssessment,
    pub caveats: Vec<String>,
    pub warnings: Vec<String>,
    pub analyzer_version: String,
    pub signature_db_version: String,
}

/// Written in place of an [`AppReport`] when an input cannot be analyzed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppError {
    pub source: String,
    pub error: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("duplicate app id {0:?}")]
    DuplicateAppId(String),
    #[error("input lists are not index-aligned: {0}")]
    MisalignedInputs(String),
    #[error("labeling: {0}")]
    Labeling(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            _ => Err(format!(
                "unknown format {s:?} (expected json, csv or markdown)"
            )),
        }
    }
}

/// `app_id` to cohort label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CohortLabeling {
    pub assignments: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct LabelRow {
    app_id: String,
    cohort: String,
}

impl CohortLabeling {
    /// Parses CSV with header `app_id,cohort`.
    pub fn parse_csv(text: &str) -> Result<Self, ReportError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| ReportError::Labeling(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["app_id", "cohort"] {
            return Err(ReportError::Labeling(
                "header must be `app_id,cohort`".into(),
            ));
        }
        let mut assignments = BTreeMap::new();
        for row in reader.deserialize::<LabelRow>() {
            let row = row.map_err(|e| ReportError::Labeling(e.to_string()))?;
            if assignments.insert(row.app_id.clone(), row.cohort).is_some() {
                return Err(ReportError::DuplicateAppId(row.app_id));
            }
        }
        Ok(CohortLabeling { assignments })
    }

    pub fn cohort_of(&self, app_id: &str) -> &str {
        self.assignments
            .get(app_id)
            .map_or(UNLABELED, String::as_str)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskCounts {
    pub high: u32,
    pub medium: u32,
    pub low: u32,
}

impl RiskCounts {
    pub fn total(&self) -> u32 {
        self.high + self.medium + self.low
    }

    fn add(&mut self, level: RiskLevel) {
        match level {
            RiskLevel::High => self.high += 1,
            RiskLevel::Medium => self.medium += 1,
            RiskLevel::Low => self.low += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortStats {
    pub app_count: u32,
    pub counts: RiskCounts,
    pub permission_prevalence: BTreeMap<String, u32>,
    pub indicator_prevalence: BTreeMap<String, u32>,
    pub sdk_category_prevalence: BTreeMap<String, u32>,
}

impl CohortStats {
    fn add(
        &mut self,
        level: RiskLevel,
        facts: &ManifestFacts,
        hits: &[SdkHit],
        vector: &IndicatorVector,
    ) {
        self.app_count += 1;
        self.counts.add(level);
        let permissions: BTreeSet<&str> =
            facts.permissions.iter().map(|p| p.name.as_str()).collect();
        for p in permissions {
            *self.permission_prevalence.entry(p.to_string()).or_default() += 1;
        }
        for (name, on) in vector.flags() {
            *self
                .indicator_prevalence
                .entry(name.to_string())
                .or_default() += u32::from(on);
        }
        for cat in [
            SdkCategory::Analytics,
            SdkCategory::Advertising,
            SdkCategory::Attribution,
        ] {
            let present = hits.iter().any(|h| h.signature.category == cat);
            *self
                .sdk_category_prevalence
                .entry(cat.to_string())
                .or_default() += u32::from(present);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortReport {
    pub cohorts: BTreeMap<String, CohortStats>,
    pub totals: CohortStats,
    pub analyzer_version: String,
    pub signature_db_version: String,
}

/// One app's aggregation inputs, borrowed from wherever they live.
#[derive(Debug, Clone, Copy)]
pub struct AppInput<'a> {
    pub app_id: &'a str,
    pub assessment: &'a RiskAssessment,
    pub vector: &'a IndicatorVector,
    pub facts: &'a ManifestFacts,
    pub hits: &'a [SdkHit],
}

/// Aggregates index-aligned per-app inputs into cohort statistics. Returns
/// the report and warnings about labeling entries that matched no app.
pub fn aggregate(
    apps: &[AppInput<'_>],
    labeling: &CohortLabeling,
    signature_db_version: &str,
) -> Result<(CohortReport, Vec<String>), ReportError> {
    let mut seen = HashSet::new();
    let mut cohorts: BTreeMap<String, CohortStats> = BTreeMap::new();
    let mut totals = CohortStats::default();
    for app in apps {
        if !seen.insert(app.app_id) {
            return Err(ReportError::DuplicateAppId(app.app_id.to_string()));
        }
        let level = app.assessment.level;
        cohorts
            .entry(labeling.cohort_of(app.app_id).to_string())
            .or_default()
            .add(level, app.facts, app.hits, app.vector);
        totals.add(level, app.facts, app.hits, app.vector);
    }
    let mut warnings: Vec<String> = labeling
        .assignments
        .keys()
        .filter(|id| !seen.contains(id.as_str()))
        .map(|id| format!("labeling entry {id:?} matches no analyzed app; ignored"))
        .collect();
    if let Some(stats) = cohorts.get(UNLABELED) {
        if !labeling.assignments.is_empty() {
            warnings.push(format!("{} app(s) have no cohort label", stats.app_count));
        }
    }
    Ok((
        CohortReport {
            cohorts,
            totals,
            analyzer_version: ANALYZER_VERSION.to_string(),
            signature_db_version: signature_db_version.to_string(),
        },
        warnings,
    ))
}

/// Aggregates from separate index-aligned lists.
pub fn aggregate_lists(
    app_ids: &[String],
    assessments: &[RiskAssessment],
    vectors: &[IndicatorVector],
    facts: &[ManifestFacts],
    hits: &[Vec<SdkHit>],
    labeling: &CohortLabeling,
    signature_db_version: &str,
) -> Result<(CohortReport, Vec<String>), ReportError> {
    let n = app_ids.len();
    let lens = [assessments.len(), vectors.len(), facts.len(), hits.len()];
    if lens.iter().any(|&l| l != n) {
        return Err(ReportError::MisalignedInputs(format!(
            "{n} app ids, {} assessments, {} vectors, {} facts, {} hit lists",
            lens[0], lens[1], lens[2], lens[3]
        )));
    }
    let inputs: Vec<AppInput<'_>> = (0..n)
        .map(|i| AppInput {
            app_id: &app_ids[i],
            assessment: &assessments[i],
            vector: &vectors[i],
            facts: &facts[i],
            hits: &hits[i],
        })
        .collect();
    aggregate(&inputs, labeling, signature_db_version)
}

/// Aggregates previously written per-app reports.
pub fn aggregate_reports(
    reports: &[AppReport],
    labeling: &CohortLabeling,
) -> Result<(CohortReport, Vec<String>), ReportError> {
    let versions: BTreeSet<&str> = reports
        .iter()
        .map(|r| r.signature_db_version.as_str())
        .collect();
    let version = versions.into_iter().collect::<Vec<_>>().join(",");
    let inputs: Vec<AppInput<'_>> = reports
        .iter()
        .map(|r| AppInput {
            app_id: &r.app_id,
            assessment: &r.risk,
            vector: &r.indicator_vector,
            facts: &r.facts,
            hits: &r.sdk_hits,
        })
        .collect();
    aggregate(&inputs, labeling, &version)
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report types serialize");
    out.push(b'\n');
    out
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn stats_rows(label: &str, s: &CohortStats, rows: &mut Vec<Vec<String>>) {
    let mut push = |metric: &str, key: &str, value: u32| {
        rows.push(vec![
            label.into(),
            metric.into(),
            key.into(),
            value.to_string(),
        ]);
    };
    push("app_count", "", s.app_count);
    push("risk", "high", s.counts.high);
    push("risk", "medium", s.counts.medium);
    push("risk", "low", s.counts.low);
    for (k, v) in &s.permission_prevalence {
        push("permission", k, *v);
    }
    for (k, v) in &s.indicator_prevalence {
        push("indicator", k, *v);
    }
    for (k, v) in &s.sdk_category_prevalence {
        push("sdk_category", k, *v);
    }
}

fn prevalence_table(
    out: &mut String,
    title: &str,
    report: &CohortReport,
    pick: fn(&CohortStats) -> &BTreeMap<String, u32>,
) {
    let keys: BTreeSet<&String> = pick(&report.totals).keys().collect();
    if keys.is_empty() {
        return;
    }
    let _ = write!(out, "\n| {title} |");
    for label in report.cohorts.keys() {
        let _ = write!(out, " {} |", capitalize(label));
    }
    out.push_str(" Total |\n|---|");
    for _ in report.cohorts.keys() {
        out.push_str("---|");
    }
    out.push_str("---|\n");
    for key in keys {
        let _ = write!(out, "| {key} |");
        for stats in report.cohorts.values() {
            let n = pick(stats).get(key).copied().unwrap_or(0);
            let _ = write!(out, " {n}/{} |", stats.app_count);
        }
        let n = pick(&report.totals).get(key).copied().unwrap_or(0);
        let _ = writeln!(out, " {n}/{} |", report.totals.app_count);
    }
}

/// Serializes a cohort report.
pub fn render(report: &CohortReport, format: OutputFormat) -> Vec<u8> {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => {
            let mut rows = Vec::new();
            for (label, stats) in &report.cohorts {
                stats_rows(label, stats, &mut rows);
            }
            stats_rows("total", &report.totals, &mut rows);
            csv_bytes(&["cohort", "metric", "key", "value"], rows)
        }
        OutputFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| Risk Assessment | High risk | Medium risk | Low risk | Total |\n");
            out.push_str("|---|---|---|---|---|\n");
            let mut row = |name: &str, c: &RiskCounts| {
                let _ = writeln!(
                    out,
                    "| {name} | {} | {} | {} | {} |",
                    c.high,
                    c.medium,
                    c.low,
                    c.total()
                );
            };
            for (label, stats) in &report.cohorts {
                row(&capitalize(label), &stats.counts);
            }
            row("Total", &report.totals.counts);
            prevalence_table(&mut out, "Indicator", report, |s| &s.indicator_prevalence);
            prevalence_table(&mut out, "SDK category", report, |s| {
                &s.sdk_category_prevalence
            });
            prevalence_table(&mut out, "Permission", report, |s| &s.permission_prevalence);
            let _ = write!(
                out,
                "\nanalyzer {}, signature database {}\n",
                report.analyzer_version, report.signature_db_version
            );
            out.into_bytes()
        }
    }
}

/// Serializes a batch of per-app reports. JSON is one compact object per line.
pub fn render_apps(reports: &[AppReport], format: OutputFormat) -> Vec<u8> {
    match format {
        OutputFormat::Json => {
            let mut out = Vec::new();
            for r in reports {
                serde_json::to_writer(&mut out, r).expect("report types serialize");
                out.push(b'\n');
            }
            out
        }
        OutputFormat::Csv => {
            let rows = reports
                .iter()
                .map(|r| {
                    vec![
                        r.app_id.clone(),
                        r.package.clone(),
                        r.risk.level.to_string(),
                        r.risk
                            .fired_rules
                            .iter()
                            .map(|f| f.id.as_str())
                            .collect::<Vec<_>>()
                            .join(";"),
                        r.sdk_hits
                            .iter()
                            .map(|h| h.signature.vendor.as_str())
                            .collect::<Vec<_>>()
                            .join(";"),
                    ]
                })
                .collect();
            csv_bytes(
                &["app_id", "package", "level", "fired_rules", "sdk_vendors"],
                rows,
            )
        }
        OutputFormat::Markdown => {
            let mut out =
                String::from("| App | Package | Risk | Rules | SDKs |\n|---|---|---|---|---|\n");
            for r in reports {
                let rules: Vec<&str> = r.risk.fired_rules.iter().map(|f| f.id.as_str()).collect();
                let sdks: Vec<&str> = r
                    .sdk_hits
                    .iter()
                    .map(|h| h.signature.vendor.as_str())
                    .collect();
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} |",
                    r.app_id,
                    r.package,
                    r.risk.level,
                    rules.join(", "),
                    sdks.join(", ")
                );
            }
            out.into_bytes()
        }
    }
}

pub fn app_report_json(report: &AppReport) -> Vec<u8> {
    to_json(report)
}

pub fn app_error_json(error: &AppError) -> Vec<u8> {
    to_json(error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{AllowBackup, CleartextTraffic, PermissionClass, PermissionRecord};
    use crate::risk::FiredRule;
    use proptest::prelude::*;

    fn facts(perms: &[&str]) -> ManifestFacts {
        ManifestFacts {
            package_id: "p".into(),
            min_sdk: None,
            target_sdk: None,
            permissions: perms
                .iter()
                .map(|p| PermissionRecord {
                    name: p.to_string(),
                    classification: PermissionClass::Normal,
                })
                .collect(),
            allow_backup: AllowBackup::False,
            backup_agent_declared: false,
            restore_any_version: false,
            full_backup_content_declared: false,
            data_extraction_rules_declared: false,
            cleartext_traffic: CleartextTraffic::Default,
            nsc_reference: false,
            nsc_permits_cleartext: None,
            components: vec![],
            metadata_keys: vec![],
            warnings: vec![],
        }
    }

    fn assessment(level: RiskLevel) -> RiskAssessment {
        RiskAssessment {
            level,
            fired_rules: vec![FiredRule {
                id: "X".into(),
                justification: String::new(),
            }],
        }
    }

    struct Owned {
        ids: Vec<String>,
        assessments: Vec<RiskAssessment>,
        vectors: Vec<IndicatorVector>,
        facts: Vec<ManifestFacts>,
        hits: Vec<Vec<SdkHit>>,
    }

    impl Owned {
        fn new(levels: &[(&str, RiskLevel)]) -> Self {
            Owned {
                ids: levels.iter().map(|(id, _)| id.to_string()).collect(),
                assessments: levels.iter().map(|(_, l)| assessment(*l)).collect(),
                vectors: vec![IndicatorVector::default(); levels.len()],
                facts: levels
                    .iter()
                    .map(|_| facts(&["android.permission.INTERNET"]))
                    .collect(),
                hits: vec![vec![]; levels.len()],
            }
        }

        fn run(
            &self,
            labeling: &CohortLabeling,
        ) -> Result<(CohortReport, Vec<String>), ReportError> {
            aggregate_lists(
                &self.ids,
                &self.assessments,
                &self.vectors,
                &self.facts,
                &self.hits,
                labeling,
                "test",
            )
        }
    }

    fn reference_cohorts() -> (Owned, CohortLabeling) {
        let mut levels = Vec::new();
        let mut labels = String::from("app_id,cohort\n");
        let spec = [
            ("children-oriented", 5, 7, 0),
            ("general-audience", 4, 4, 1),
        ];
        let mut n = 0;
        for (cohort, h, m, l) in spec {
            for (level, count) in [
                (RiskLevel::High, h),
                (RiskLevel::Medium, m),
                (RiskLevel::Low, l),
            ] {
                for _ in 0..count {
                    n += 1;
                    levels.push((format!("App{n}"), level));
                    let _ = writeln!(labels, "App{n},{cohort}");
                }
            }
        }
        let refs: Vec<(&str, RiskLevel)> = levels.iter().map(|(id, l)| (id.as_str(), *l)).collect();
        (
            Owned::new(&refs),
            CohortLabeling::parse_csv(&labels).unwrap(),
        )
    }

    #[test]
    fn reference_cohort_totals() {
        let (owned, labeling) = reference_cohorts();
        let (report, warnings) = owned.run(&labeling).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(
            report.totals.counts,
            RiskCounts {
                high: 9,
                medium: 11,
                low: 1
            }
        );
        assert_eq!(
            report.cohorts["children-oriented"].counts,
            RiskCounts {
                high: 5,
                medium: 7,
                low: 0
            }
        );
        assert_eq!(
            report.cohorts["general-audience"].counts,
            RiskCounts {
                high: 4,
                medium: 4,
                low: 1
            }
        );
        let md = String::from_utf8(render(&report, OutputFormat::Markdown)).unwrap();
        assert!(md.contains("| Children-oriented | 5 | 7 | 0 | 12 |"));
        assert!(md.contains("| General-audience | 4 | 4 | 1 | 9 |"));
        assert!(md.contains("| Total | 9 | 11 | 1 | 21 |"));
    }

    #[test]
    fn empty_and_singleton() {
        let (report, _) = Owned::new(&[]).run(&CohortLabeling::default()).unwrap();
        assert!(report.cohorts.is_empty());
        assert_eq!(report.totals.app_count, 0);
        for f in [
            OutputFormat::Json,
            OutputFormat::Csv,
            OutputFormat::Markdown,
        ] {
            assert!(!render(&report, f).is_empty());
        }
        let (report, _) = Owned::new(&[("a", RiskLevel::Medium)])
            .run(&CohortLabeling::default())
            .unwrap();
        assert_eq!(report.cohorts.len(), 1);
        assert_eq!(report.cohorts[UNLABELED], report.totals);
        assert_eq!(report.totals.counts.medium, 1);
    }

    #[test]
    fn errors() {
        let owned = Owned::new(&[("a", RiskLevel::Low), ("a", RiskLevel::High)]);
        assert_eq!(
            owned.run(&CohortLabeling::default()).unwrap_err(),
            ReportError::DuplicateAppId("a".into())
        );
        let mut owned = Owned::new(&[("a", RiskLevel::Low)]);
        owned.hits.clear();
        assert!(matches!(
            owned.run(&CohortLabeling::default()),
            Err(ReportError::MisalignedInputs(_))
        ));
        assert!(CohortLabeling::parse_csv("id,group\n").is_err());
        assert_eq!(
            CohortLabeling::parse_csv("app_id,cohort\na,x\na,y\n").unwrap_err(),
            ReportError::DuplicateAppId("a".into())
        );
    }

    #[test]
    fn unknown_label_ids_warn() {
        let labeling = CohortLabeling::parse_csv("app_id,cohort\nghost,kids\na,kids\n").unwrap();
        let (report, warnings) = Owned::new(&[("a", RiskLevel::Low), ("b", RiskLevel::Low)])
            .run(&labeling)
            .unwrap();
        assert!(warnings.iter().any(|w| w.contains("ghost")));
        assert_eq!(report.cohorts["kids"].app_count, 1);
        assert_eq!(report.cohorts[UNLABELED].app_count, 1);
    }

    #[test]
    fn csv_long_form() {
        let (owned, labeling) = reference_cohorts();
        let (report, _) = owned.run(&labeling).unwrap();
        let text = String::from_utf8(render(&report, OutputFormat::Csv)).unwrap();
        assert!(text.starts_with("cohort,metric,key,value\n"));
        assert!(text.contains("total,risk,medium,11\n"));
        assert!(text.contains("children-oriented,app_count,,12\n"));
    }

    fn level_strategy() -> impl Strategy<Value = RiskLevel> {
        prop_oneof![
            Just(RiskLevel::Low),
            Just(RiskLevel::Medium),
            Just(RiskLevel::High)
        ]
    }

    proptest! {
        #[test]
        fn aggregation_properties(
            apps in prop::collection::vec((level_strategy(), 0usize..3, prop::bool::ANY), 0..30),
            seed in any::<u64>(),
        ) {
            let ids: Vec<String> = (0..apps.len()).map(|i| format!("app{i}")).collect();
            let mut labels = String::from("app_id,cohort\n");
            for (i, (_, cohort, _)) in apps.iter().enumerate() {
                if *cohort > 0 {
                    let _ = writeln!(labels, "app{i},c{cohort}");
                }
            }
            let labeling = CohortLabeling::parse_csv(&labels).unwrap();
            let mut owned = Owned::new(&ids.iter().zip(&apps).map(|(id, (l, _, _))| (id.as_str(), *l)).collect::<Vec<_>>());
            for (i, (_, _, extra)) in apps.iter().enumerate() {
                if *extra {
                    owned.facts[i] = facts(&["android.permission.CAMERA"]);
                    owned.vectors[i].tracking_present = true;
                }
            }
            let (report, _) = owned.run(&labeling).unwrap();

            let mut sum = RiskCounts::default();
            let mut apps_sum = 0;
            for stats in report.cohorts.values() {
                prop_assert_eq!(stats.counts.total(), stats.app_count);
                sum.high += stats.counts.high;
                sum.medium += stats.counts.medium;
                sum.low += stats.counts.low;
                apps_sum += stats.app_count;
            }
            prop_assert_eq!(sum, report.totals.counts);
            prop_assert_eq!(apps_sum, report.totals.app_count);

            let json = render(&report, OutputFormat::Json);
            let back: CohortReport = serde_json::from_slice(&json).unwrap();
            prop_assert_eq!(&back, &report);

            // Reverse-rotate by seed as a cheap permutation.
            let n = owned.ids.len();
            if n > 0 {
                let k = (seed as usize) % n;
                let perm: Vec<usize> = (0..n).rev().map(|i| (i + k) % n).collect();
                let shuffled = Owned {
                    ids: perm.iter().map(|&i| owned.ids[i].clone()).collect(),
                    assessments: perm.iter().map(|&i| owned.assessments[i].clone()).collect(),
                    vectors: perm.iter().map(|&i| owned.vectors[i]).collect(),
                    facts: perm.iter().map(|&i| owned.facts[i].clone()).collect(),
                    hits: perm.iter().map(|&i| owned.hits[i].clone()).collect(),
                };
                let (again, _) = shuffled.run(&labeling).unwrap();
                for f in [OutputFormat::Json, OutputFormat::Csv, OutputFormat::Markdown] {
                    prop_assert_eq!(render(&again, f), render(&report, f));
                }
            }
        }
    }
}
