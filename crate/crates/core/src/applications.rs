//! Covariate codings for the two worked datasets, so a bare column of counts
//! can be turned into the standard regression design.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::CountSeries;

pub const POLIO_MONTHS: usize = 168;
pub const SEIZURE_DAYS: usize = 204;

/// Month index at which the polio trend is centred (January 1976).
const POLIO_TREND_ORIGIN: f64 = 73.0;

pub const POLIO_LABELS: [&str; 5] = ["trend", "cos12", "sin12", "cos6", "sin6"];

/// Monthly polio counts, January 1970 to December 1983, with trend
/// `(t - 73) / 1000` and annual and semi-annual harmonics.
pub fn polio_series(y: Vec<u64>) -> Result<CountSeries> {
    if y.len() != POLIO_MONTHS {
        return Err(Error::InvalidSeries(format!("polio series has {} months, expected {POLIO_MONTHS}", y.len())));
    }
    let t: Vec<f64> = (1..=y.len()).map(|t| t as f64).collect();
    let harmonic = |f: fn(f64) -> f64, period: f64| t.iter().map(|&t| f(2.0 * PI * t / period)).collect::<Vec<_>>();
    let columns = vec![
        t.iter().map(|&t| (t - POLIO_TREND_ORIGIN) / 1000.0).collect(),
        harmonic(f64::cos, 12.0),
        harmonic(f64::sin, 12.0),
        harmonic(f64::cos, 6.0),
        harmonic(f64::sin, 6.0),
    ];
    CountSeries::with_covariates(y, POLIO_LABELS.iter().map(|s| s.to_string()).zip(columns).collect())
}

/// How the seizure day index enters the model; the source does not say.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayCoding {
    /// `t / n`, so the coefficient is the change over the whole series.
    UnitInterval,
    /// `t / 1000`.
    PerThousand,
}

impl DayCoding {
    pub const ALL: [DayCoding; 2] = [DayCoding::UnitInterval, DayCoding::PerThousand];

    pub fn describe(self) -> &'static str {
        match self {
            DayCoding::UnitInterval => "day = t/n, t = 1..n",
            DayCoding::PerThousand => "day = t/1000, t = 1..n",
        }
    }
}

/// Daily seizure counts with a single day covariate.
pub fn seizure_series(y: Vec<u64>, coding: DayCoding) -> Result<CountSeries> {
    let n = y.len();
    let scale = match coding {
        DayCoding::UnitInterval => n as f64,
        DayCoding::PerThousand => 1000.0,
    };
    let day = (1..=n).map(|t| t as f64 / scale).collect();
    CountSeries::with_covariates(y, vec![("day".into(), day)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polio_design_columns() {
        let s = polio_series(vec![1; POLIO_MONTHS]).unwrap();
        assert_eq!(s.d(), 6);
        assert_eq!(s.x()[(72, 1)], 0.0);
        // Month 12 closes the first year: cos 1, sin 0 for both harmonics.
        assert!((s.x()[(11, 2)] - 1.0).abs() < 1e-12 && s.x()[(11, 3)].abs() < 1e-12);
        assert!((s.x()[(2, 4)] + 1.0).abs() < 1e-12);
        assert!(polio_series(vec![1; 10]).is_err());
    }

    #[test]
    fn seizure_codings() {
        let s = seizure_series(vec![0; SEIZURE_DAYS], DayCoding::UnitInterval).unwrap();
        assert_eq!(s.x()[(SEIZURE_DAYS - 1, 1)], 1.0);
        let s = seizure_series(vec![0; 4], DayCoding::PerThousand).unwrap();
        assert_eq!(s.x()[(3, 1)], 0.004);
    }
}
