//! Observations, datasets, and ingestion of the transformer CSV format.
//!
//! Each unit is measured on its own clock starting at installation. A unit
//! installed before the truncation year is only recorded if it survived past
//! that year, so its likelihood is conditioned on survival to `tau_l`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};

/// Default truncation boundary for the transformer data.
pub const TRUNCATION_YEAR: i32 = 1980;
/// Default censoring boundary for the transformer data.
pub const CENSOR_YEAR: i32 = 2008;
/// Default time scale: lifetimes in years are divided by this.
pub const DEFAULT_SCALE: f64 = 100.0;

/// What was observed for a unit: right censoring, or failure from one of the
/// two competing causes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Censored,
    Cause1,
    Cause2,
}

impl Outcome {
    pub fn from_delta(delta: i64) -> Option<Self> {
        match delta {
            0 => Some(Outcome::Censored),
            1 => Some(Outcome::Cause1),
            2 => Some(Outcome::Cause2),
            _ => None,
        }
    }

    pub fn delta(self) -> u8 {
        match self {
            Outcome::Censored => 0,
            Outcome::Cause1 => 1,
            Outcome::Cause2 => 2,
        }
    }

    pub fn is_failure(self) -> bool {
        self != Outcome::Censored
    }
}

/// Cause index used by per-cause APIs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cause {
    One,
    Two,
}

impl Cause {
    pub fn outcome(self) -> Outcome {
        match self {
            Cause::One => Outcome::Cause1,
            Cause::Two => Outcome::Cause2,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Cause::One => 1,
            Cause::Two => 2,
        }
    }
}

/// One unit. `tau_l` is only consulted when `truncated` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub tau_l: f64,
    pub tau_r: f64,
    pub outcome: Outcome,
    pub truncated: bool,
}

impl Observation {
    pub fn new(t: f64, tau_l: f64, tau_r: f64, outcome: Outcome, truncated: bool) -> Result<Self> {
        let obs = Observation {
            t,
            tau_l,
            tau_r,
            outcome,
            truncated,
        };
        obs.validate().map_err(|message| Error::InvalidObservation { index: 0, message })?;
        Ok(obs)
    }

    /// Unit that entered observation at time zero (no truncation).
    pub fn untruncated(t: f64, tau_r: f64, outcome: Outcome) -> Result<Self> {
        Self::new(t, 0.0, tau_r, outcome, false)
    }

    /// Unit known to have survived past `tau_l`.
    pub fn truncated(t: f64, tau_l: f64, tau_r: f64, outcome: Outcome) -> Result<Self> {
        Self::new(t, tau_l, tau_r, outcome, true)
    }

    /// Truncation indicator in the 0/1 convention: 1 means not truncated.
    pub fn nu(&self) -> u8 {
        if self.truncated {
            0
        } else {
            1
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(format!("t must be positive, got {}", self.t));
        }
        if !(self.tau_r > 0.0 && self.tau_r.is_finite()) {
            return Err(format!("tau_R must be positive, got {}", self.tau_r));
        }
        match self.outcome {
            Outcome::Censored if self.t != self.tau_r => {
                return Err(format!(
                    "censored unit must have t = tau_R ({} != {})",
                    self.t, self.tau_r
                ))
            }
            Outcome::Cause1 | Outcome::Cause2 if self.t >= self.tau_r => {
                return Err(format!(
                    "failure time {} must precede tau_R {}",
                    self.t, self.tau_r
                ))
            }
            _ => {}
        }
        if self.truncated {
            if !(self.tau_l > 0.0 && self.tau_l < self.t) {
                return Err(format!(
                    "truncated unit needs 0 < tau_L < t, got tau_L = {}, t = {}",
                    self.tau_l, self.t
                ));
            }
            if self.tau_l >= self.tau_r {
                return Err(format!("tau_L {} must be below tau_R {}", self.tau_l, self.tau_r));
            }
        }
        Ok(())
    }
}

/// Validated, immutable collection of observations with its index sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    observations: Vec<Observation>,
    censored: Vec<usize>,
    cause1: Vec<usize>,
    cause2: Vec<usize>,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let mut censored = Vec::new();
        let mut cause1 = Vec::new();
        let mut cause2 = Vec::new();
        for (index, obs) in observations.iter().enumerate() {
            obs.validate()
                .map_err(|message| Error::InvalidObservation { index, message })?;
            match obs.outcome {
                Outcome::Censored => censored.push(index),
                Outcome::Cause1 => cause1.push(index),
                Outcome::Cause2 => cause2.push(index),
            }
        }
        Ok(Dataset {
            observations,
            censored,
            cause1,
            cause2,
        })
    }

    pub fn empty() -> Self {
        Dataset {
            observations: Vec::new(),
            censored: Vec::new(),
            cause1: Vec::new(),
            cause2: Vec::new(),
        }
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn m1(&self) -> usize {
        self.cause1.len()
    }

    pub fn m2(&self) -> usize {
        self.cause2.len()
    }

    pub fn m(&self) -> usize {
        self.m1() + self.m2()
    }

    pub fn failures(&self, cause: Cause) -> usize {
        match cause {
            Cause::One => self.m1(),
            Cause::Two => self.m2(),
        }
    }

    /// Indices of censored units (I0).
    pub fn censored_indices(&self) -> &[usize] {
        &self.censored
    }

    /// Indices of failures from the given cause (I1 or I2).
    pub fn cause_indices(&self, cause: Cause) -> &[usize] {
        match cause {
            Cause::One => &self.cause1,
            Cause::Two => &self.cause2,
        }
    }

    /// Fails with [`Error::EmptyCause`] unless both causes have failures.
    pub fn require_both_causes(&self) -> Result<()> {
        if self.m1() == 0 {
            return Err(Error::EmptyCause { cause: 1 });
        }
        if self.m2() == 0 {
            return Err(Error::EmptyCause { cause: 2 });
        }
        Ok(())
    }

    /// Multiplies every time (t, tau_L, tau_R) by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Dataset> {
        check_positive("factor", factor)?;
        let observations = self
            .observations
            .iter()
            .map(|o| Observation {
                t: o.t * factor,
                tau_l: o.tau_l * factor,
                tau_r: o.tau_r * factor,
                ..*o
            })
            .collect();
        Dataset::new(observations)
    }

    /// Combines two datasets, keeping order.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        let mut all = self.observations.clone();
        all.extend_from_slice(&other.observations);
        Dataset::new(all)
    }

    /// Recovers calendar records, assuming the times were built by
    /// [`to_dataset`] with the given censoring year and scale. Serial numbers
    /// are the 1-based positions.
    pub fn calendar_records(&self, censor_year: i32, scale: f64) -> Vec<RawTransformerRecord> {
        self.observations
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let install = censor_year as f64 - o.tau_r * scale;
                let exit = install + o.t * scale;
                RawTransformerRecord {
                    serial: i as i64 + 1,
                    install_year: install.round() as i32,
                    exit_year: exit.round() as i32,
                    nu: o.nu(),
                    delta: o.outcome.delta(),
                }
            })
            .collect()
    }
}

/// One row of the transformer table, in calendar years.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTransformerRecord {
    pub serial: i64,
    pub install_year: i32,
    pub exit_year: i32,
    pub nu: u8,
    pub delta: u8,
}

pub fn parse_transformer_csv(path: impl AsRef<Path>) -> Result<Vec<RawTransformerRecord>> {
    let text = std::fs::read_to_string(path)?;
    parse_transformer_str(&text)
}

/// Parses `sn,install_year,exit_year,nu,delta` rows. A header row is optional.
pub fn parse_transformer_str(text: &str) -> Result<Vec<RawTransformerRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let line = row + 1;
        let fields = result.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if fields.iter().all(str::is_empty) {
            continue;
        }
        if row == 0 && fields.get(0).is_some_and(|f| f.parse::<i64>().is_err()) {
            // header
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let int = |i: usize, name: &str| -> Result<i64> {
            fields[i].parse::<i64>().map_err(|_| Error::Parse {
                line,
                message: format!("{name} is not an integer: {:?}", &fields[i]),
            })
        };
        let serial = int(0, "sn")?;
        let install_year = int(1, "install_year")?;
        let exit_year = int(2, "exit_year")?;
        let nu = int(3, "nu")?;
        let delta = int(4, "delta")?;
        if !(0..=1).contains(&nu) {
            return Err(Error::Parse {
                line,
                message: format!("nu must be 0 or 1, got {nu}"),
            });
        }
        if !(0..=2).contains(&delta) {
            return Err(Error::Parse {
                line,
                message: format!("delta must be 0, 1 or 2, got {delta}"),
            });
        }
        let year = |v: i64, name: &str| -> Result<i32> {
            i32::try_from(v).map_err(|_| Error::Parse {
                line,
                message: format!("{name} out of range: {v}"),
            })
        };
        records.push(RawTransformerRecord {
            serial,
            install_year: year(install_year, "install_year")?,
            exit_year: year(exit_year, "exit_year")?,
            nu: nu as u8,
            delta: delta as u8,
        });
    }
    Ok(records)
}

/// Converts calendar records to unit-relative times divided by `scale`.
pub fn to_dataset(
    records: &[RawTransformerRecord],
    truncation_year: i32,
    censor_year: i32,
    scale: f64,
) -> Result<Dataset> {
    check_positive("scale", scale)?;
    let mut observations = Vec::with_capacity(records.len());
    for r in records {
        let bad = |message: String| Error::Consistency {
            serial: r.serial,
            message,
        };
        if r.exit_year <= r.install_year {
            return Err(bad(format!(
                "exit year {} not after install year {}",
                r.exit_year, r.install_year
            )));
        }
        if r.exit_year > censor_year {
            return Err(bad(format!(
                "exit year {} after censoring year {censor_year}",
                r.exit_year
            )));
        }
        let truncated = r.nu == 0;
        if truncated && r.install_year >= truncation_year {
            return Err(bad(format!(
                "marked truncated but installed in {} (truncation year {truncation_year})",
                r.install_year
            )));
        }
        if !truncated && r.install_year < truncation_year {
            return Err(bad(format!(
                "marked untruncated but installed in {} (truncation year {truncation_year})",
                r.install_year
            )));
        }
        let outcome = Outcome::from_delta(r.delta as i64)
            .ok_or_else(|| bad(format!("delta out of range: {}", r.delta)))?;
        let t = (r.exit_year - r.install_year) as f64 / scale;
        let tau_l = (truncation_year - r.install_year) as f64 / scale;
        let tau_r = (censor_year - r.install_year) as f64 / scale;
        let obs = Observation {
            t,
            tau_l,
            tau_r,
            outcome,
            truncated,
        };
        obs.validate().map_err(bad)?;
        observations.push(obs);
    }
    Dataset::new(observations)
}

/// The bundled transformer data at the given scale with the default
/// 1980/2008 boundaries.
pub fn transformer_dataset(scale: f64) -> Result<Dataset> {
    let records = parse_transformer_str(crate::TRANSFORMER_CSV)?;
    to_dataset(&records, TRUNCATION_YEAR, CENSOR_YEAR, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_rows_from_table() {
        let recs = parse_transformer_str("1,1961,1996,0,2\n31,1987,2008,1,0\n").unwrap();
        assert_eq!(
            recs[0],
            RawTransformerRecord {
                serial: 1,
                install_year: 1961,
                exit_year: 1996,
                nu: 0,
                delta: 2
            }
        );
        assert_eq!(
            recs[1],
            RawTransformerRecord {
                serial: 31,
                install_year: 1987,
                exit_year: 2008,
                nu: 1,
                delta: 0
            }
        );
    }

    #[test]
    fn header_and_crlf_accepted() {
        let recs =
            parse_transformer_str("sn,install_year,exit_year,nu,delta\r\n1,1961,1996,0,2\r\n").unwrap();
        assert_eq!(recs.len(), 1);
    }

    #[test]
    fn rejects_bad_delta() {
        let err = parse_transformer_str("5,1961,1992,0,3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_wrong_arity_and_non_integer() {
        let err = parse_transformer_str("1,1961,1996,0,2\n2,1964,1985,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_transformer_str("1,1961,19x6,0,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_transformer_str("1,1961,1996,2,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn converts_first_row() {
        let recs = parse_transformer_str("1,1961,1996,0,2\n").unwrap();
        let ds = to_dataset(&recs, 1980, 2008, 100.0).unwrap();
        let o = ds.observations()[0];
        assert_relative_eq!(o.t, 0.35, epsilon = 1e-12);
        assert_relative_eq!(o.tau_l, 0.19, epsilon = 1e-12);
        assert_relative_eq!(o.tau_r, 0.47, epsilon = 1e-12);
        assert_eq!(o.outcome, Outcome::Cause2);
        assert!(o.truncated);
    }

    #[test]
    fn identity_scale() {
        let recs = parse_transformer_str("31,1987,2008,1,0\n").unwrap();
        let ds = to_dataset(&recs, 1980, 2008, 1.0).unwrap();
        let o = ds.observations()[0];
        assert_eq!(o.t, 21.0);
        assert_eq!(o.tau_r, 21.0);
        assert_eq!(o.outcome, Outcome::Censored);
    }

    #[test]
    fn consistency_errors() {
        let recs = parse_transformer_str("7,1985,1990,0,1\n").unwrap();
        assert!(matches!(
            to_dataset(&recs, 1980, 2008, 1.0),
            Err(Error::Consistency { serial: 7, .. })
        ));
        let recs = parse_transformer_str("8,1985,2010,1,0\n").unwrap();
        assert!(matches!(
            to_dataset(&recs, 1980, 2008, 1.0),
            Err(Error::Consistency { serial: 8, .. })
        ));
    }

    #[test]
    fn bundled_counts() {
        let ds = transformer_dataset(DEFAULT_SCALE).unwrap();
        assert_eq!(ds.n(), 100);
        assert_eq!(ds.m1(), 14);
        assert_eq!(ds.m2(), 33);
        assert_eq!(ds.censored_indices().len(), 53);
    }

    #[test]
    fn observation_invariants() {
        assert!(Observation::untruncated(1.0, 1.0, Outcome::Censored).is_ok());
        assert!(Observation::untruncated(1.0, 2.0, Outcome::Censored).is_err());
        assert!(Observation::untruncated(2.0, 2.0, Outcome::Cause1).is_err());
        assert!(Observation::truncated(1.0, 1.5, 3.0, Outcome::Cause1).is_err());
        assert!(Observation::truncated(1.0, 0.5, 3.0, Outcome::Cause1).is_ok());
        assert!(Observation::untruncated(0.0, 1.0, Outcome::Cause1).is_err());
    }
}
