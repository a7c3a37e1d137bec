//! Metrics CSV emission and parsing.
//!
//! One row per iteration, fixed schema, floats at 10 significant digits,
//! missing fields empty. Emission is deterministic, so identical runs yield
//! byte-identical files.

use crate::error::{Error, Result};
use crate::odpc::OdpcRecord;
use crate::pcmlp::IterationRecord;

pub const METRICS_HEADER: &str = "iter,model_error,bonus_min,bonus_mean,bonus_max,plan_value_model,value_true_mean,value_true_se,avg_bonus_per_step,info_gain,coverage,feasible";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvRecord {
    pub iter: usize,
    pub model_error: Option<f64>,
    pub bonus_min: Option<f64>,
    pub bonus_mean: Option<f64>,
    pub bonus_max: Option<f64>,
    pub plan_value_model: Option<f64>,
    pub value_true_mean: Option<f64>,
    pub value_true_se: Option<f64>,
    pub avg_bonus_per_step: Option<f64>,
    pub info_gain: Option<f64>,
    pub coverage: Option<f64>,
    pub feasible: Option<bool>,
}

impl From<&IterationRecord> for CsvRecord {
    fn from(r: &IterationRecord) -> Self {
        CsvRecord {
            iter: r.iteration,
            model_error: r.model_error,
            bonus_min: Some(r.bonus_min),
            bonus_mean: Some(r.bonus_mean),
            bonus_max: Some(r.bonus_max),
            plan_value_model: Some(r.plan_value_model),
            value_true_mean: Some(r.value_true_mean),
            value_true_se: Some(r.value_true_se),
            avg_bonus_per_step: Some(r.avg_bonus_per_step),
            info_gain: Some(r.info_gain),
            coverage: r.coverage,
            feasible: r.feasible,
        }
    }
}

impl From<&OdpcRecord> for CsvRecord {
    fn from(r: &OdpcRecord) -> Self {
        CsvRecord {
            iter: r.iteration,
            model_error: None,
            bonus_min: None,
            bonus_mean: None,
            bonus_max: None,
            plan_value_model: Some(r.optimistic_value),
            value_true_mean: Some(r.value_true_mean),
            value_true_se: Some(r.value_true_se),
            avg_bonus_per_step: None,
            info_gain: None,
            coverage: None,
            feasible: r.feasible,
        }
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

fn fmt_flag(v: Option<bool>) -> String {
    v.map(|b| if b { "1" } else { "0" }.to_string())
        .unwrap_or_default()
}

pub fn emit_metrics(records: &[CsvRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iter,
            fmt(r.model_error),
            fmt(r.bonus_min),
            fmt(r.bonus_mean),
            fmt(r.bonus_max),
            fmt(r.plan_value_model),
            fmt(r.value_true_mean),
            fmt(r.value_true_se),
            fmt(r.avg_bonus_per_step),
            fmt(r.info_gain),
            fmt(r.coverage),
            fmt_flag(r.feasible),
        ));
    }
    out
}

fn parse_opt(tok: &str, what: &str) -> Result<Option<f64>> {
    if tok.is_empty() {
        return Ok(None);
    }
    tok.parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("bad {what}: {tok:?}")))
}

pub fn parse_metrics(text: &str) -> Result<Vec<CsvRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty metrics".into()))?;
    if header != METRICS_HEADER {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut records = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(Error::Parse(format!("row has {} columns", cols.len())));
        }
        records.push(CsvRecord {
            iter: cols[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad iter {:?}", cols[0])))?,
            model_error: parse_opt(cols[1], "model_error")?,
            bonus_min: parse_opt(cols[2], "bonus_min")?,
            bonus_mean: parse_opt(cols[3], "bonus_mean")?,
            bonus_max: parse_opt(cols[4], "bonus_max")?,
            plan_value_model: parse_opt(cols[5], "plan_value_model")?,
            value_true_mean: parse_opt(cols[6], "value_true_mean")?,
            value_true_se: parse_opt(cols[7], "value_true_se")?,
            avg_bonus_per_step: parse_opt(cols[8], "avg_bonus_per_step")?,
            info_gain: parse_opt(cols[9], "info_gain")?,
            coverage: parse_opt(cols[10], "coverage")?,
            feasible: match cols[11] {
                "" => None,
                "1" => Some(true),
                "0" => Some(false),
                other => return Err(Error::Parse(format!("bad feasible {other:?}"))),
            },
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_iterations_is_header_only() {
        assert_eq!(emit_metrics(&[]), format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn emit_parse_emit_is_a_fixed_point() {
        let records = vec![
            CsvRecord {
                iter: 1,
                model_error: Some(0.12345678901234),
                bonus_min: Some(0.0),
                bonus_mean: Some(1.5),
                bonus_max: Some(3.0),
                plan_value_model: Some(2.25),
                value_true_mean: Some(1.875),
                value_true_se: Some(0.01),
                avg_bonus_per_step: Some(0.5),
                info_gain: Some(2.0),
                coverage: None,
                feasible: None,
            },
            CsvRecord {
                iter: 2,
                feasible: Some(true),
                ..Default::default()
            },
        ];
        let text = emit_metrics(&records);
        let parsed = parse_metrics(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(emit_metrics(&parsed), text);
        assert_eq!(parsed[1].feasible, Some(true));
        assert_eq!(parsed[1].model_error, None);
    }

    #[test]
    fn ten_significant_digits() {
        let records = vec![CsvRecord {
            iter: 1,
            model_error: Some(std::f64::consts::PI),
            ..Default::default()
        }];
        let text = emit_metrics(&records);
        assert!(text.contains("3.141592654e0"), "{text}");
    }

    #[test]
    fn header_mismatch_is_rejected() {
        assert!(parse_metrics("iter,nope\n").is_err());
    }
}
