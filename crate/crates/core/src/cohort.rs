//! Case/control cohorts from longitudinal patient records.
//!
//! A case has at least `min_code_count` diagnoses of the outcome code and is
//! indexed at the first one; a control-eligible patient has none. Features
//! are computed from events strictly before `cutoff = index - horizon_days`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, FeatureMeta, RawDataset};
use crate::error::{Error, Result};
use crate::{par, seed, stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EventPayload {
    Lab { code: String, value: f64 },
    Diagnosis { icd9: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub date: NaiveDate,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl Event {
    pub fn lab(date: NaiveDate, code: impl Into<String>, value: f64) -> Self {
        Self { date, payload: EventPayload::Lab { code: code.into(), value } }
    }

    pub fn diagnosis(date: NaiveDate, icd9: impl Into<String>) -> Self {
        Self { date, payload: EventPayload::Diagnosis { icd9: icd9.into() } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub sex: Sex,
    pub birth_date: NaiveDate,
    pub race: String,
    pub ethnicity: String,
    /// Sorted by date, nondecreasing.
    pub events: Vec<Event>,
}

impl PatientRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::validation("patient id must be nonempty"));
        }
        if self.events.windows(2).any(|w| w[1].date < w[0].date) {
            return Err(Error::validation(format!("events of patient {} are not date-sorted", self.id)));
        }
        for e in &self.events {
            if let EventPayload::Lab { value, code } = &e.payload {
                if !value.is_finite() {
                    return Err(Error::validation(format!("patient {}: lab {code} has a non-finite value", self.id)));
                }
            }
        }
        Ok(())
    }

    fn outcome_dates<'a>(&'a self, code: &'a str) -> impl Iterator<Item = NaiveDate> + 'a {
        self.events.iter().filter_map(move |e| match &e.payload {
            EventPayload::Diagnosis { icd9 } if icd9 == code => Some(e.date),
            _ => None,
        })
    }
}

/// Reads JSON-lines records; blank lines are skipped.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<PatientRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PatientRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(path: impl AsRef<Path>, records: &[PatientRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub outcome_code: String,
    #[serde(default = "default_min_code_count")]
    pub min_code_count: usize,
    #[serde(default = "default_horizon")]
    pub horizon_days: u32,
    #[serde(default = "default_missing_threshold")]
    pub common_missing_threshold: f64,
}

fn default_min_code_count() -> usize {
    3
}
fn default_horizon() -> u32 {
    1
}
fn default_missing_threshold() -> f64 {
    0.465
}

/// The three horizons studied: one day, six months, one year.
pub const DEFAULT_HORIZONS: [u32; 3] = [1, 182, 365];

impl CohortSpec {
    pub fn new(outcome_code: impl Into<String>, horizon_days: u32) -> Self {
        Self {
            outcome_code: outcome_code.into(),
            min_code_count: default_min_code_count(),
            horizon_days,
            common_missing_threshold: default_missing_threshold(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outcome_code.is_empty() {
            return Err(Error::validation("outcome_code must be nonempty"));
        }
        if self.min_code_count == 0 {
            return Err(Error::validation("min_code_count must be positive"));
        }
        if !(self.common_missing_threshold > 0.0 && self.common_missing_threshold < 1.0) {
            return Err(Error::validation("common_missing_threshold must be in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMember {
    pub patient_id: String,
    pub is_case: bool,
    pub index_date: NaiveDate,
    pub cutoff_date: NaiveDate,
    pub age_at_cutoff: f64,
    pub sex: Sex,
}

/// A never-diagnosed patient awaiting a reference date from matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlCandidate {
    pub patient_id: String,
    pub sex: Sex,
    pub birth_date: NaiveDate,
    /// Earliest event of any kind; `None` for an empty record.
    pub first_event: Option<NaiveDate>,
}

/// Age in years (days / 365.25).
pub fn age_years(birth: NaiveDate, at: NaiveDate) -> f64 {
    (at - birth).num_days() as f64 / 365.25
}

fn cutoff(index: NaiveDate, horizon_days: u32) -> Result<NaiveDate> {
    index
        .checked_sub_days(Days::new(u64::from(horizon_days)))
        .ok_or_else(|| Error::validation("cutoff date out of range"))
}

/// Splits records into retained cases and the control pool.
///
/// Cases whose record has no event before their cutoff are dropped, so the
/// case list can only shrink as the horizon grows.
pub fn classify_patients(records: &[PatientRecord], spec: &CohortSpec) -> Result<(Vec<CohortMember>, Vec<ControlCandidate>)> {
    spec.validate()?;
    if records.is_empty() {
        return Err(Error::validation("no patient records"));
    }
    let mut cases = Vec::new();
    let mut pool = Vec::new();
    for r in records {
        let dates: Vec<NaiveDate> = r.outcome_dates(&spec.outcome_code).collect();
        if dates.is_empty() {
            pool.push(ControlCandidate {
                patient_id: r.id.clone(),
                sex: r.sex,
                birth_date: r.birth_date,
                first_event: r.events.first().map(|e| e.date),
            });
        } else if dates.len() >= spec.min_code_count {
            let index_date = dates.iter().copied().min().expect("nonempty");
            let cutoff_date = cutoff(index_date, spec.horizon_days)?;
            let has_history = r.events.first().is_some_and(|e| e.date < cutoff_date);
            if has_history && r.birth_date <= cutoff_date {
                cases.push(CohortMember {
                    patient_id: r.id.clone(),
                    is_case: true,
                    index_date,
                    cutoff_date,
                    age_at_cutoff: age_years(r.birth_date, cutoff_date),
                    sex: r.sex,
                });
            }
        }
    }
    Ok((cases, pool))
}

/// Quartile index 0..=3 against cut points `q` (ages equal to a cut fall low).
pub fn age_quartile(age: f64, cuts: &[f64; 3]) -> usize {
    cuts.iter().filter(|&&c| age > c).count()
}

/// Type-7 quartile cut points of the case ages.
pub fn case_age_cuts(cases: &[CohortMember]) -> Result<[f64; 3]> {
    let ages: Vec<f64> = cases.iter().map(|c| c.age_at_cutoff).collect();
    let q = |p| stats::quantile(&ages, p).ok_or_else(|| Error::validation("no cases to compute age quartiles"));
    Ok([q(0.25)?, q(0.5)?, q(0.75)?])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedCohort {
    pub cases: Vec<CohortMember>,
    /// `controls[i]` is matched to `cases[i]`.
    pub controls: Vec<CohortMember>,
    pub dropped_cases: Vec<String>,
    pub age_cuts: [f64; 3],
}

impl MatchedCohort {
    /// Cases followed by their controls, in matching order.
    pub fn members(&self) -> Vec<CohortMember> {
        self.cases.iter().chain(&self.controls).cloned().collect()
    }
}

/// Draws one control per case without replacement, requiring identical sex
/// and age quartile at the case's cutoff, and a record that starts before it.
pub fn match_controls(cases: &[CohortMember], pool: &[ControlCandidate], seed: u64) -> Result<MatchedCohort> {
    if pool.is_empty() {
        return Err(Error::validation("control pool is empty"));
    }
    let cuts = case_age_cuts(cases)?;
    let mut rng = seed::rng(seed, &[0xC0_0C]);
    let mut used = vec![false; pool.len()];
    let mut out = MatchedCohort { cases: Vec::new(), controls: Vec::new(), dropped_cases: Vec::new(), age_cuts: cuts };
    for case in cases {
        let quartile = age_quartile(case.age_at_cutoff, &cuts);
        let eligible: Vec<usize> = (0..pool.len())
            .filter(|&k| {
                let c = &pool[k];
                !used[k]
                    && c.sex == case.sex
                    && c.birth_date <= case.cutoff_date
                    && c.first_event.is_some_and(|d| d < case.cutoff_date)
                    && age_quartile(age_years(c.birth_date, case.cutoff_date), &cuts) == quartile
            })
            .collect();
        if eligible.is_empty() {
            log::warn!("no eligible control for case {}; dropping it", case.patient_id);
            out.dropped_cases.push(case.patient_id.clone());
            continue;
        }
        let k = eligible[rng.random_range(0..eligible.len())];
        used[k] = true;
        let c = &pool[k];
        out.controls.push(CohortMember {
            patient_id: c.patient_id.clone(),
            is_case: false,
            index_date: case.index_date,
            cutoff_date: case.cutoff_date,
            age_at_cutoff: age_years(c.birth_date, case.cutoff_date),
            sex: c.sex,
        });
        out.cases.push(case.clone());
    }
    Ok(out)
}

/// Lab codes used as predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    pub common: Vec<String>,
    pub rare: Vec<String>,
}

const COMMON_LABS: [&str; 28] = [
    "1743-4", "10466-1", "30239-8", "BMI", "1975-2", "17861-6", "2028-9", "2075-0", "2085-9", "13457-7", "2160-0",
    "788-0", "785-6", "787-2", "789-8", "2345-7", "4544-3", "718-7", "6690-2", "786-4", "751-8", "32623-1", "777-3",
    "2823-3", "2885-2", "2951-2", "2571-8", "3094-0",
];

const RARE_LABS: [&str; 115] = [
    "10330-9", "10334-1", "10501-5", "10535-3", "10886-0", "11572-5", "11580-8", "12180-6", "12187-1", "12841-3",
    "13964-2", "13965-9", "13967-5", "13969-1", "13982-4", "14338-8", "14804-9", "14957-5", "14959-1", "1763-2",
    "17820-2", "17849-1", "17856-6", "17862-4", "1798-8", "1825-9", "18262-6", "1834-1", "19123-9", "1922-4", "1925-7",
    "1960-4", "1968-7", "1986-9", "1988-5", "1989-3", "1990-1", "19994-3", "2019-8", "2039-6", "20433-9", "20436-2",
    "20437-0", "20438-8", "20448-7", "20563-3", "20565-8", "2064-4", "2069-3", "21198-7", "2132-9", "2143-6", "2157-6",
    "2236-8", "2243-4", "2276-4", "2284-8", "2324-2", "2339-0", "2340-8", "23860-0", "2458-8", "2465-3", "2472-9",
    "2498-4", "2501-5", "2502-3", "2614-6", "26498-6", "2703-7", "2708-6", "2714-4", "2731-8", "27353-2", "2742-5",
    "2744-1", "2777-1", "27811-9", "27818-4", "27822-6", "28009-9", "2839-9", "2857-1", "2888-6", "2889-4", "2965-2",
    "2986-8", "2990-0", "2991-8", "29958-6", "3024-7", "3026-2", "3040-3", "3051-0", "30522-7", "3084-1", "30934-4",
    "3167-4", "3181-5", "3182-3", "3255-7", "33762-6", "38483-4", "5206-8", "53115-2", "6303-2", "71695-1", "72582-0",
    "72586-1", "72598-6", "739-3", "740-1", "748-4", "763-3", "764-1",
];

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            common: COMMON_LABS.iter().map(|s| s.to_string()).collect(),
            rare: RARE_LABS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LabConfig {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for code in self.common.iter().chain(&self.rare) {
            if !seen.insert(code.as_str()) {
                return Err(Error::validation(format!("lab code {code} listed twice")));
            }
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: LabConfig = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Common codes have missing rate strictly below `threshold`; the rest are rare.
pub fn split_common_rare(rates: &[(String, f64)], threshold: f64) -> (Vec<String>, Vec<String>) {
    let mut common = Vec::new();
    let mut rare = Vec::new();
    for (code, rate) in rates {
        if *rate < threshold {
            common.push(code.clone());
        } else {
            rare.push(code.clone());
        }
    }
    (common, rare)
}

/// Fraction of members with no pre-cutoff measurement, per code.
pub fn lab_missing_rates(members: &[CohortMember], records: &HashMap<&str, &PatientRecord>, codes: &[String]) -> Result<Vec<(String, f64)>> {
    let mut seen = vec![0usize; codes.len()];
    let pos: HashMap<&str, usize> = codes.iter().enumerate().map(|(k, c)| (c.as_str(), k)).collect();
    for m in members {
        let rec = lookup(records, &m.patient_id)?;
        let mut hit = vec![false; codes.len()];
        for e in rec.events.iter().take_while(|e| e.date < m.cutoff_date) {
            if let EventPayload::Lab { code, .. } = &e.payload {
                if let Some(&k) = pos.get(code.as_str()) {
                    hit[k] = true;
                }
            }
        }
        hit.iter().zip(seen.iter_mut()).filter(|(h, _)| **h).for_each(|(_, s)| *s += 1);
    }
    let n = members.len().max(1) as f64;
    Ok(codes.iter().zip(seen).map(|(c, s)| (c.clone(), 1.0 - s as f64 / n)).collect())
}

fn lookup<'a>(records: &HashMap<&str, &'a PatientRecord>, id: &str) -> Result<&'a PatientRecord> {
    records.get(id).copied().ok_or_else(|| Error::validation(format!("no record for patient {id}")))
}

/// Feature matrix plus diagnostics from [`extract_features`].
#[derive(Debug, Clone, PartialEq)]
pub struct CohortFeatures {
    pub data: RawDataset,
    /// Lab events whose code is in neither list.
    pub unknown_lab_events: usize,
}

/// One row per member: common-lab medians, rare-lab presence flags, then
/// age, sex (M = 1), race and ethnicity (integer codes by first appearance).
pub fn extract_features(
    members: &[CohortMember],
    records: &HashMap<&str, &PatientRecord>,
    lab_config: &LabConfig,
) -> Result<CohortFeatures> {
    lab_config.validate()?;
    if members.is_empty() {
        return Err(Error::validation("cohort has no members"));
    }
    let n_common = lab_config.common.len();
    let n_rare = lab_config.rare.len();
    let d = n_common + n_rare + 4;
    let slot: HashMap<&str, usize> = lab_config
        .common
        .iter()
        .chain(&lab_config.rare)
        .enumerate()
        .map(|(k, c)| (c.as_str(), k))
        .collect();

    let recs: Vec<&PatientRecord> = members.iter().map(|m| lookup(records, &m.patient_id)).collect::<Result<_>>()?;
    let mut race_codes: Vec<String> = Vec::new();
    let mut eth_codes: Vec<String> = Vec::new();
    for r in &recs {
        if !race_codes.contains(&r.race) {
            race_codes.push(r.race.clone());
        }
        if !eth_codes.contains(&r.ethnicity) {
            eth_codes.push(r.ethnicity.clone());
        }
    }

    let rows: Vec<(Vec<f64>, usize)> = par::map_range(members.len(), |i| {
        let (m, rec) = (&members[i], recs[i]);
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); n_common];
        let mut row = vec![0.0; d];
        let mut unknown = 0;
        for e in rec.events.iter().take_while(|e| e.date < m.cutoff_date) {
            if let EventPayload::Lab { code, value } = &e.payload {
                match slot.get(code.as_str()) {
                    Some(&k) if k < n_common => values[k].push(*value),
                    Some(&k) => row[k] = 1.0,
                    None => unknown += 1,
                }
            }
        }
        for (k, v) in values.iter().enumerate() {
            row[k] = stats::median(v).unwrap_or(f64::NAN);
        }
        let base = n_common + n_rare;
        row[base] = m.age_at_cutoff;
        row[base + 1] = if m.sex == Sex::M { 1.0 } else { 0.0 };
        row[base + 2] = race_codes.iter().position(|c| *c == rec.race).expect("coded above") as f64;
        row[base + 3] = eth_codes.iter().position(|c| *c == rec.ethnicity).expect("coded above") as f64;
        (row, unknown)
    });
    let unknown_lab_events = rows.iter().map(|r| r.1).sum();
    if unknown_lab_events > 0 {
        log::debug!("{unknown_lab_events} lab events with unconfigured codes ignored");
    }

    let mut meta: Vec<FeatureMeta> = Vec::with_capacity(d);
    for code in &lab_config.common {
        meta.push(FeatureMeta { source_code: Some(code.clone()), ..FeatureMeta::continuous(code.clone()) });
    }
    for code in &lab_config.rare {
        meta.push(FeatureMeta { source_code: Some(code.clone()), is_rare_lab: true, ..FeatureMeta::binary(code.clone()) });
    }
    meta.push(FeatureMeta::continuous("age"));
    meta.push(FeatureMeta::binary("sex"));
    meta.push(FeatureMeta::categorical("race", race_codes.len().max(2)));
    meta.push(FeatureMeta::categorical("ethnicity", eth_codes.len().max(2)));

    let x = FeatureMatrix::new(members.len(), d, rows.into_iter().flat_map(|r| r.0).collect())?;
    let y = members.iter().map(|m| u8::from(m.is_case)).collect();
    Ok(CohortFeatures { data: RawDataset::new(x, y, meta)?, unknown_lab_events })
}

/// Output of the full classify, match and extract pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub matched: MatchedCohort,
    pub features: CohortFeatures,
}

pub fn build_cohort(records: &[PatientRecord], spec: &CohortSpec, lab_config: &LabConfig, seed: u64) -> Result<Cohort> {
    let (cases, pool) = classify_patients(records, spec)?;
    let matched = match_controls(&cases, &pool, seed)?;
    let index: HashMap<&str, &PatientRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let features = extract_features(&matched.members(), &index, lab_config)?;
    Ok(Cohort { matched, features })
}
