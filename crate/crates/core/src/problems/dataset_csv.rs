use super::Sample;
use crate::error::{Error, Result};
use crate::metrics::format_sig17;
use crate::scalar::Scalar;

/// One sample per line: the feature columns followed by the label column,
/// 17 significant digits, no header.
pub fn write_samples<T: Scalar>(samples: &[Sample<T>]) -> String {
    let mut out = String::new();
    for s in samples {
        for f in &s.features {
            out.push_str(&format_sig17(f.as_f64()));
            out.push(',');
        }
        out.push_str(&format_sig17(s.label.as_f64()));
        out.push('\n');
    }
    out
}

pub fn read_samples<T: Scalar>(text: &str) -> Result<Vec<Sample<T>>> {
    let mut out = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| {
                    Error::ContractViolation(format!("line {}: {e}: {f:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() < 2 || width.is_some_and(|w| w != vals.len()) {
            return Err(Error::ContractViolation(format!(
                "line {}: inconsistent column count {}",
                lineno + 1,
                vals.len()
            )));
        }
        width = Some(vals.len());
        let (label, features) = vals.split_last().unwrap();
        out.push(Sample {
            features: features.iter().map(|&v| T::lit(v)).collect(),
            label: T::lit(*label),
        });
    }
    Ok(out)
}
