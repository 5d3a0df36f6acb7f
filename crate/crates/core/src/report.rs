//! Merges whatever a run directory holds into one `report.json`.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{OracleConfig, SelftestConfig};
use crate::error::Result;
use crate::linear_oracle::{oracle_decay_report, OracleReport};
use crate::run::{format_float, write_json, SERIES_FILE, SUMMARY_FILE};
use crate::weights::selftest::{default_baseline, weight_selftest, SelftestReport};

pub const REPORT_FILE: &str = "report.json";
pub const ORACLE_REPORT_FILE: &str = "oracle_report.json";
pub const ORACLE_SERIES_FILE: &str = "oracle_series.csv";
pub const SELFTEST_FILE: &str = "weights_selftest.json";

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub present: Vec<String>,
    pub missing: Vec<String>,
}

/// Runs the oracle decay study and writes its report and time series.
pub fn write_oracle_outputs(cfg: &OracleConfig) -> Result<OracleReport> {
    let report = oracle_decay_report(&cfg.spec()?)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    write_json(&dir.join(ORACLE_REPORT_FILE), &report)?;
    let mut w = csv::Writer::from_path(dir.join(ORACLE_SERIES_FILE)).map_err(csv_error)?;
    w.write_record(["t", "sup_psi", "sup_dpsi", "sup_u_r", "sup_u_theta"]).map_err(csv_error)?;
    for row in &report.series {
        w.write_record([row.t, row.sup_psi, row.sup_dpsi, row.sup_u_r, row.sup_u_theta].map(format_float)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(report)
}

/// Runs the weight self-test against the configured baseline and writes its report.
pub fn write_selftest_outputs(cfg: &SelftestConfig) -> Result<SelftestReport> {
    let baseline = match &cfg.baseline {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => default_baseline(),
    };
    let report = weight_selftest(&cfg.spec(), &baseline)?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join(SELFTEST_FILE), &report)?;
    Ok(report)
}

/// Reads a CSV with a header row into column arrays; empty cells become null.
fn read_columns(path: &Path) -> Result<Value> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    let mut columns: Vec<Vec<Value>> = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        for (col, cell) in columns.iter_mut().zip(record.iter()) {
            col.push(cell.parse::<f64>().ok().and_then(|x| serde_json::Number::from_f64(x)).map_or(Value::Null, Value::Number));
        }
    }
    Ok(Value::Object(header.into_iter().zip(columns.into_iter().map(Value::Array)).collect()))
}

fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::InvalidParams(format!("csv: {e}"))
}

/// Writes `dir/report.json` from the summary, series, oracle and selftest
/// outputs found in `dir`. Rerunning overwrites the report with the same
/// content.
pub fn write_report(dir: &Path) -> Result<Manifest> {
    let mut out = Map::new();
    let mut present = Vec::new();
    let mut missing = Vec::new();
    let mut add = |key: &str, file: &str, value: Result<Option<Value>>| -> Result<()> {
        match value? {
            Some(v) => {
                out.insert(key.into(), v);
                present.push(file.to_owned());
            }
            None => missing.push(file.to_owned()),
        }
        Ok(())
    };
    let json = |file: &str| -> Result<Option<Value>> {
        let p = dir.join(file);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_str(&fs::read_to_string(p)?)?))
    };
    let table = |file: &str| -> Result<Option<Value>> {
        let p = dir.join(file);
        if !p.exists() {
            return Ok(None);
        }
        read_columns(&p).map(Some)
    };
    add("summary", SUMMARY_FILE, json(SUMMARY_FILE))?;
    add("series", SERIES_FILE, table(SERIES_FILE))?;
    add("oracle", ORACLE_REPORT_FILE, json(ORACLE_REPORT_FILE))?;
    add("weights_selftest", SELFTEST_FILE, json(SELFTEST_FILE))?;
    let manifest = Manifest { present, missing };
    out.insert("manifest".into(), serde_json::to_value(&manifest)?);
    crate::run::write_json(&dir.join(REPORT_FILE), &Value::Object(out))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_lists_missing_inputs() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join(SERIES_FILE), "t,a,b\n0.0,1.5,\n1.0,2.5,3\n").unwrap();
        let m = write_report(tmp.path()).unwrap();
        assert_eq!(m.present, vec![SERIES_FILE.to_owned()]);
        assert_eq!(m.missing.len(), 3);
        let first = fs::read_to_string(tmp.path().join(REPORT_FILE)).unwrap();
        let v: Value = serde_json::from_str(&first).unwrap();
        assert_eq!(v["series"]["a"][1], 2.5);
        assert!(v["series"]["b"][0].is_null());
        write_report(tmp.path()).unwrap();
        assert_eq!(fs::read_to_string(tmp.path().join(REPORT_FILE)).unwrap(), first);
    }
}
