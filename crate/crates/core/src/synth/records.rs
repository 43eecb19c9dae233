use chrono::{Days, NaiveDate};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cohort::{Event, LabConfig, PatientRecord, Sex};
use crate::error::{Error, Result};
use crate::{par, seed};

/// Longitudinal record generator.
///
/// Every patient's timeline starts at `start_date` with a visit and runs for
/// `window_days`. Future cases get a diagnosis date at least
/// `min_history_days` into the window, three to five outcome-code events from
/// then on, and their common labs shifted by `disease_effect[k]` standard
/// deviations. A `partial_fraction` of the other patients carry one or two
/// outcome-code events and so belong to neither group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordsSpec {
    pub n_patients: usize,
    pub outcome_code: String,
    pub case_fraction: f64,
    pub partial_fraction: f64,
    pub common_lab_codes: Vec<String>,
    pub rare_lab_codes: Vec<String>,
    /// Per common lab, aligned with `common_lab_codes`; missing entries are 0.
    pub disease_effect: Vec<f64>,
    pub min_visits: usize,
    pub max_visits: usize,
    /// Probability that a common (rare) lab is drawn at a visit.
    pub common_lab_rate: f64,
    pub rare_lab_rate: f64,
    pub window_days: u32,
    pub min_history_days: u32,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for RecordsSpec {
    fn default() -> Self {
        Self {
            n_patients: 1000,
            outcome_code: "250.00".into(),
            case_fraction: 0.2,
            partial_fraction: 0.05,
            common_lab_codes: ["2345-7", "BMI", "2571-8", "2160-0", "718-7", "6690-2"].map(String::from).to_vec(),
            rare_lab_codes: ["4548-4", "2498-4", "739-3"].map(String::from).to_vec(),
            disease_effect: vec![1.0, 0.8, 0.5],
            min_visits: 4,
            max_visits: 12,
            common_lab_rate: 0.7,
            rare_lab_rate: 0.05,
            window_days: 1500,
            min_history_days: 400,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date"),
            seed: 0,
        }
    }
}

impl RecordsSpec {
    /// The lab panel this generator emits, as a predictor configuration.
    pub fn lab_config(&self) -> LabConfig {
        LabConfig { common: self.common_lab_codes.clone(), rare: self.rare_lab_codes.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 || self.outcome_code.is_empty() {
            return Err(Error::validation("need at least one patient and an outcome code"));
        }
        if self.common_lab_codes.iter().any(|c| self.rare_lab_codes.contains(c)) {
            return Err(Error::validation("common and rare lab codes must be disjoint"));
        }
        for p in [self.case_fraction, self.partial_fraction, self.common_lab_rate, self.rare_lab_rate] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation("fractions and rates must lie in [0, 1]"));
            }
        }
        if self.case_fraction + self.partial_fraction > 1.0 {
            return Err(Error::validation("case_fraction + partial_fraction exceeds 1"));
        }
        if self.min_visits == 0 || self.min_visits > self.max_visits {
            return Err(Error::validation("need 1 <= min_visits <= max_visits"));
        }
        if self.min_history_days >= self.window_days {
            return Err(Error::validation("min_history_days must be below window_days"));
        }
        if self.disease_effect.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("disease_effect must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedRecords {
    pub records: Vec<PatientRecord>,
    /// Ids of patients constructed as cases, in record order.
    pub planted_cases: Vec<String>,
}

const RACES: [(&str, f64); 4] = [("white", 0.8), ("black", 0.1), ("asian", 0.05), ("other", 0.05)];
const ETHNICITIES: [(&str, f64); 2] = [("non-hispanic", 0.9), ("hispanic", 0.1)];
const OTHER_DX: [&str; 4] = ["401.9", "272.4", "530.81", "278.00"];
const LAB_MEAN: f64 = 100.0;
const LAB_SD: f64 = 15.0;

fn pick<'a>(table: &[(&'a str, f64)], u: f64) -> &'a str {
    let mut acc = 0.0;
    for (name, p) in table {
        acc += p;
        if u < acc {
            return name;
        }
    }
    table[table.len() - 1].0
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Case,
    Partial,
    Other,
}

fn patient(spec: &RecordsSpec, i: usize) -> (PatientRecord, bool) {
    let mut rng = seed::rng(spec.seed, &[i as u64]);
    let u: f64 = rng.random();
    let role = if u < spec.case_fraction {
        Role::Case
    } else if u < spec.case_fraction + spec.partial_fraction {
        Role::Partial
    } else {
        Role::Other
    };
    let sex = if rng.random_bool(0.5) { Sex::F } else { Sex::M };
    let age_days = rng.random_range(25 * 365..80 * 365);
    let birth_date = spec.start_date - Days::new(age_days);
    let race = pick(&RACES, rng.random()).to_string();
    let ethnicity = pick(&ETHNICITIES, rng.random()).to_string();
    let window = u64::from(spec.window_days);
    let at = |d: u64| spec.start_date + Days::new(d);

    let dx_day = if role == Role::Case {
        let lo = u64::from(spec.min_history_days).max(window * 3 / 10);
        Some(rng.random_range(lo..window))
    } else {
        None
    };
    let n_visits = rng.random_range(spec.min_visits..=spec.max_visits);
    let mut visit_days: Vec<u64> = std::iter::once(0).chain((1..n_visits).map(|_| rng.random_range(0..window))).collect();
    visit_days.sort_unstable();

    let noise = Normal::new(0.0, LAB_SD).expect("positive sd");
    let offsets: Vec<f64> = spec.common_lab_codes.iter().map(|_| 0.5 * noise.sample(&mut rng)).collect();
    let mut events = Vec::new();
    for &v in &visit_days {
        for (k, code) in spec.common_lab_codes.iter().enumerate() {
            if rng.random::<f64>() < spec.common_lab_rate {
                let shift = if role == Role::Case { spec.disease_effect.get(k).copied().unwrap_or(0.0) * LAB_SD } else { 0.0 };
                let value = LAB_MEAN + offsets[k] + shift + noise.sample(&mut rng);
                events.push(Event::lab(at(v), code.clone(), value));
            }
        }
        for code in &spec.rare_lab_codes {
            if rng.random::<f64>() < spec.rare_lab_rate {
                events.push(Event::lab(at(v), code.clone(), 1.0 + rng.random::<f64>()));
            }
        }
        if rng.random::<f64>() < 0.2 {
            events.push(Event::diagnosis(at(v), OTHER_DX[rng.random_range(0..OTHER_DX.len())]));
        }
    }
    let outcome_days: Vec<u64> = match role {
        Role::Case => {
            let first = dx_day.expect("case has a diagnosis day");
            let extra = rng.random_range(2..=4);
            let mut days = vec![first];
            let mut d = first;
            for _ in 0..extra {
                d += rng.random_range(1..=90);
                days.push(d);
            }
            days
        }
        Role::Partial => (0..rng.random_range(1..=2)).map(|_| rng.random_range(0..window)).collect(),
        Role::Other => Vec::new(),
    };
    events.extend(outcome_days.into_iter().map(|d| Event::diagnosis(at(d), spec.outcome_code.clone())));
    events.sort_by_key(|e| e.date);
    let rec = PatientRecord { id: format!("P{i:06}"), sex, birth_date, race, ethnicity, events };
    (rec, role == Role::Case)
}

/// Records plus the planted case set; patient `i` draws from its own RNG substream.
pub fn generate_records_with_truth(spec: &RecordsSpec) -> Result<GeneratedRecords> {
    spec.validate()?;
    let generated = par::map_range(spec.n_patients, |i| patient(spec, i));
    let planted_cases = generated.iter().filter(|(_, c)| *c).map(|(r, _)| r.id.clone()).collect();
    Ok(GeneratedRecords { records: generated.into_iter().map(|(r, _)| r).collect(), planted_cases })
}

pub fn generate_records(spec: &RecordsSpec) -> Result<Vec<PatientRecord>> {
    Ok(generate_records_with_truth(spec)?.records)
}
