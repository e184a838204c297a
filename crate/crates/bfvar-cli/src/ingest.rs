//! CSV ingestion: one observation per row, grouped by a label column, in
//! first-appearance order.

use bfvar::{Error, GroupStats};

#[derive(Debug)]
pub struct IngestedGroups {
    pub labels: Vec<String>,
    pub stats: Vec<GroupStats>,
}

pub fn ingest_csv(path: &str, group_col: &str, value_col: &str) -> Result<IngestedGroups, Error> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Validation(format!("cannot read {path}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Validation(format!("cannot read CSV header: {e}")))?
        .clone();
    let gi = headers
        .iter()
        .position(|h| h == group_col)
        .ok_or_else(|| Error::Validation(format!("missing column '{group_col}' in {path}")))?;
    let vi = headers
        .iter()
        .position(|h| h == value_col)
        .ok_or_else(|| Error::Validation(format!("missing column '{value_col}' in {path}")))?;

    let mut labels: Vec<String> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // header is row 1
        let record = record.map_err(|e| Error::Validation(format!("row {row}: {e}")))?;
        let label = record
            .get(gi)
            .ok_or_else(|| Error::Validation(format!("row {row}: missing group field")))?
            .trim()
            .to_string();
        if label.is_empty() {
            return Err(Error::Validation(format!("row {row}: empty group label")));
        }
        let raw = record
            .get(vi)
            .ok_or_else(|| Error::Validation(format!("row {row}: missing value field")))?
            .trim();
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::Validation(format!("row {row}: non-numeric value '{raw}'")))?;
        if !value.is_finite() {
            return Err(Error::Validation(format!("row {row}: non-finite value")));
        }
        match labels.iter().position(|l| l == &label) {
            Some(k) => values[k].push(value),
            None => {
                labels.push(label);
                values.push(vec![value]);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Validation(format!("{path} contains no observations")));
    }
    let stats = values
        .iter()
        .map(|xs| {
            let n = xs.len() as u64;
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            GroupStats::new(n, ss)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IngestedGroups { labels, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn groups_in_first_appearance_order() {
        let f = write_csv("g,x\nb,1.0\na,2.0\nb,3.0\na,4.0\na,6.0\n");
        let got = ingest_csv(f.path().to_str().unwrap(), "g", "x").unwrap();
        assert_eq!(got.labels, vec!["b", "a"]);
        assert_eq!(got.stats[0].n(), 2);
        assert_eq!(got.stats[0].ss(), 2.0);
        assert_eq!(got.stats[1].n(), 3);
        assert_eq!(got.stats[1].ss(), 8.0);
    }

    #[test]
    fn single_value_group_has_zero_ss() {
        let f = write_csv("g,x\na,5.0\n");
        let got = ingest_csv(f.path().to_str().unwrap(), "g", "x").unwrap();
        assert_eq!(got.stats[0].n(), 1);
        assert_eq!(got.stats[0].ss(), 0.0);
    }

    #[test]
    fn errors_name_rows_and_columns() {
        let f = write_csv("g,x\na,1.0\na,oops\n");
        let err = ingest_csv(f.path().to_str().unwrap(), "g", "x").unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        let err = ingest_csv(f.path().to_str().unwrap(), "nope", "x").unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
    }
}
