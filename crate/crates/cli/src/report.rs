//! Backtest report and plot data, both derived from a run directory's daily
//! files so they can be regenerated without rerunning the models.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use psp_core::backtest::{coverage_summary, dm_test_var, ranking_model, violations, CoverageSummary, DmLoss, MethodForecasts, RankTable};
use serde::{Deserialize, Serialize};

use crate::config::{level_label, Model, SCHEMA_VERSION};
use crate::error::CliError;
use crate::pipeline::{daily_path, write_csv, write_json, Manifest};

pub const REPORT: &str = "backtest_report.json";

/// One row of `daily/<model>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRow {
    pub date: NaiveDate,
    pub ret: f64,
    pub var: Vec<f64>,
    pub hit: Vec<bool>,
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    field
        .parse()
        .map_err(|e: T::Err| CliError::io(path, format!("line {line}: bad value {field:?}: {e}")))
}

pub fn read_daily(run_dir: &Path, model: Model, n_levels: usize) -> Result<Vec<DailyRow>, CliError> {
    let path = daily_path(run_dir, model);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| CliError::io(&path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::io(&path, e))?;
        if rec.len() != 2 + 2 * n_levels {
            return Err(CliError::io(&path, format!("line {line}: expected {} columns", 2 + 2 * n_levels)));
        }
        let date = parse_field::<NaiveDate>(&path, line, &rec[0])?;
        let ret = parse_field::<f64>(&path, line, &rec[1])?;
        let var = (0..n_levels)
            .map(|k| parse_field::<f64>(&path, line, &rec[2 + k]))
            .collect::<Result<_, _>>()?;
        let hit = (0..n_levels)
            .map(|k| parse_field::<u8>(&path, line, &rec[2 + n_levels + k]).map(|h| h == 1))
            .collect::<Result<_, _>>()?;
        rows.push(DailyRow { date, ret, var, hit });
    }
    Ok(rows)
}

/// Serializes non-finite statistics as the strings `inf`, `-inf`, `nan`.
mod lenient_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad statistic {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmEntry {
    pub model_a: Model,
    pub model_b: Model,
    #[serde(with = "lenient_f64")]
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub model: Model,
    #[serde(flatten)]
    pub coverage: CoverageSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub confidence: f64,
    pub label: String,
    pub methods: Vec<MethodReport>,
    pub dm_loss: DmLoss,
    /// Every ordered pair `a < b` in model order; negative favors `a`.
    pub dm: Vec<DmEntry>,
    pub ranks: RankTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub schema_version: u32,
    pub n_days: usize,
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
    pub levels: Vec<LevelReport>,
}

impl BacktestReport {
    pub fn method(&self, label: &str, model: Model) -> Option<&MethodReport> {
        self.levels
            .iter()
            .find(|l| l.label == label)?
            .methods
            .iter()
            .find(|m| m.model == model)
    }
}

fn dated(rows: &[DailyRow], f: impl Fn(&DailyRow) -> f64) -> Vec<(NaiveDate, f64)> {
    rows.iter().map(|r| (r.date, f(r))).collect()
}

/// Recomputes `backtest_report.json` from the daily files of `run_dir`.
pub fn run_backtest(run_dir: &Path) -> Result<BacktestReport, CliError> {
    let manifest = Manifest::load(run_dir)?;
    let levels = &manifest.confidence_levels;
    let daily = manifest
        .models
        .iter()
        .map(|&m| read_daily(run_dir, m, levels.len()))
        .collect::<Result<Vec<_>, _>>()?;
    let returns = dated(&daily[0], |r| r.ret);
    for (m, rows) in manifest.models.iter().zip(&daily) {
        if dated(rows, |r| r.ret) != returns {
            return Err(CliError::io(
                &daily_path(run_dir, *m),
                "daily returns disagree with the other models",
            ));
        }
    }
    let dm_loss = manifest.config.backtest.dm_loss;
    let kappa = manifest.config.backtest.ranking_kappa;

    let level_reports = levels
        .iter()
        .enumerate()
        .map(|(k, &level)| {
            let var_of = |rows: &[DailyRow]| dated(rows, |r| r.var[k]);
            let methods = manifest
                .models
                .iter()
                .zip(&daily)
                .map(|(&model, rows)| {
                    let v = violations(&returns, &var_of(rows), level)?;
                    Ok(MethodReport {
                        model,
                        coverage: coverage_summary(&v)?,
                    })
                })
                .collect::<Result<Vec<_>, psp_core::Error>>()?;
            let mut dm = Vec::new();
            for a in 0..daily.len() {
                for b in a + 1..daily.len() {
                    let t = dm_test_var(&returns, &var_of(&daily[a]), &var_of(&daily[b]), level, dm_loss)?;
                    dm.push(DmEntry {
                        model_a: manifest.models[a],
                        model_b: manifest.models[b],
                        statistic: t.statistic,
                        p_value: t.p_value,
                    });
                }
            }
            let forecasts: Vec<MethodForecasts> = manifest
                .models
                .iter()
                .zip(&daily)
                .map(|(m, rows)| MethodForecasts {
                    name: m.name().to_string(),
                    var: var_of(rows),
                })
                .collect();
            Ok(LevelReport {
                confidence: level,
                label: level_label(level),
                methods,
                dm_loss,
                dm,
                ranks: ranking_model(&forecasts, &returns, kappa)?,
            })
        })
        .collect::<Result<Vec<_>, psp_core::Error>>()?;

    let report = BacktestReport {
        schema_version: SCHEMA_VERSION,
        n_days: returns.len(),
        first_date: returns.first().map(|r| r.0),
        last_date: returns.last().map(|r| r.0),
        levels: level_reports,
    };
    write_json(&run_dir.join(REPORT), &report)?;
    Ok(report)
}

pub fn plot_path(run_dir: &Path, model: Model, label: &str) -> PathBuf {
    run_dir.join("plots").join(format!("{}_{label}.csv", model.name()))
}

/// Writes `plots/<model>_<level>.csv` with `date,return,neg_var,hit` for
/// every model and confidence level of a completed run.
pub fn emit_plot_data(run_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let manifest = Manifest::load(run_dir)?;
    let levels = &manifest.confidence_levels;
    let mut written = Vec::new();
    for &model in &manifest.models {
        let rows = read_daily(run_dir, model, levels.len())?;
        for (k, &level) in levels.iter().enumerate() {
            let path = plot_path(run_dir, model, &level_label(level));
            let header = ["date", "return", "neg_var", "hit"].map(String::from);
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.date.to_string(),
                        r.ret.to_string(),
                        (-r.var[k]).to_string(),
                        (r.hit[k] as u8).to_string(),
                    ]
                })
                .collect();
            write_csv(&path, &header, &body)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_statistics_survive_json() {
        let e = DmEntry {
            model_a: Model::Psp,
            model_b: Model::Vix,
            statistic: f64::NEG_INFINITY,
            p_value: 0.0,
        };
        let text = serde_json::to_string(&e).unwrap();
        assert!(text.contains("\"-inf\""));
        assert_eq!(serde_json::from_str::<DmEntry>(&text).unwrap(), e);
    }

    #[test]
    fn missing_manifest_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_plot_data(dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("manifest.json"), "{err}");
    }
}
