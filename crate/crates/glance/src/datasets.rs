//! Loaders for the two bundled benchmark formats: the Statlog German Credit
//! attribute file and the COMPAS two-year recidivism export. Both reduce to
//! [`build_dataset`] after format-specific preprocessing.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;

use crate::tabular::{build_dataset, Dataset, FeatureSpec, MissingPolicy, SchemaConfig, UnknownCategoryPolicy};
use crate::{Error, Result};

/// Root directory searched for benchmark data files; overridable through the
/// GLANCE_DATA_DIR environment variable.
pub fn data_dir() -> PathBuf {
    std::env::var_os("GLANCE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// German Credit attribute names, in file order. Duration, credit amount,
/// and age are treated as continuous; the other 17 attributes as
/// categorical.
const GERMAN_COLUMNS: [&str; 21] = [
    "checking_status",
    "duration",
    "credit_history",
    "purpose",
    "credit_amount",
    "savings_status",
    "employment_since",
    "installment_rate",
    "personal_status",
    "other_debtors",
    "residence_since",
    "property",
    "age",
    "other_installment_plans",
    "housing",
    "existing_credits",
    "job",
    "num_dependents",
    "telephone",
    "foreign_worker",
    "label",
];

const GERMAN_NUMERIC: [&str; 3] = ["duration", "credit_amount", "age"];

pub fn german_credit_schema_config() -> SchemaConfig {
    let features = GERMAN_COLUMNS[..20]
        .iter()
        .map(|&name| {
            if GERMAN_NUMERIC.contains(&name) {
                FeatureSpec::Numeric { name: name.into() }
            } else {
                FeatureSpec::Categorical {
                    name: name.into(),
                    labels: None,
                }
            }
        })
        .collect();
    SchemaConfig {
        features,
        label_column: "label".into(),
        positive_label: "1".into(), // good credit risk
        negative_label: "2".into(),
        missing: MissingPolicy::Drop,
        unknown_category: UnknownCategoryPolicy::Add,
    }
}

/// Loads the whitespace-separated `german.data` attribute file (20
/// attributes plus a 1/2 risk label, no header row).
pub fn load_german_credit(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let headers: Vec<String> = GERMAN_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if fields.len() != GERMAN_COLUMNS.len() {
            return Err(Error::Ingest {
                row: i + 1,
                message: format!(
                    "expected {} fields, found {}",
                    GERMAN_COLUMNS.len(),
                    fields.len()
                ),
            });
        }
        records.push(fields);
    }
    build_dataset(&headers, records, &german_credit_schema_config())
}

pub fn compas_schema_config() -> SchemaConfig {
    SchemaConfig {
        features: vec![
            FeatureSpec::Categorical {
                name: "age_cat".into(),
                labels: None,
            },
            FeatureSpec::Categorical {
                name: "race".into(),
                labels: None,
            },
            FeatureSpec::Categorical {
                name: "sex".into(),
                labels: None,
            },
            FeatureSpec::Categorical {
                name: "c_charge_degree".into(),
                labels: None,
            },
            FeatureSpec::Numeric {
                name: "priors_count".into(),
            },
            FeatureSpec::Numeric {
                name: "length_of_stay".into(),
            },
        ],
        label_column: "two_year_recid".into(),
        positive_label: "0".into(), // favorable: no recidivism within two years
        negative_label: "1".into(),
        missing: MissingPolicy::Drop,
        unknown_category: UnknownCategoryPolicy::Add,
    }
}

fn parse_jail_date(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S").ok()
}

/// Loads the two-year COMPAS scores CSV with the standard quality filters:
/// screening within 30 days of arrest, known recidivism flag, and an
/// ordinary charge degree. The jail stay length is derived from the jail
/// in/out timestamps in whole days (negative stays clamped to zero); rows
/// without both timestamps are dropped.
pub fn load_compas(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not in header")))
    };
    let c_days = col("days_b_screening_arrest")?;
    let c_is_recid = col("is_recid")?;
    let c_degree = col("c_charge_degree")?;
    let c_score = col("score_text")?;
    let c_jail_in = col("c_jail_in")?;
    let c_jail_out = col("c_jail_out")?;
    let keep: Vec<usize> = [
        "age_cat",
        "race",
        "sex",
        "c_charge_degree",
        "priors_count",
        "two_year_recid",
    ]
    .iter()
    .map(|n| col(n))
    .collect::<Result<_>>()?;

    let mut out_headers: Vec<String> = [
        "age_cat",
        "race",
        "sex",
        "c_charge_degree",
        "priors_count",
        "two_year_recid",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    out_headers.push("length_of_stay".into());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let days: f64 = match rec.get(c_days).map(str::trim) {
            Some(v) if !v.is_empty() => match v.parse() {
                Ok(d) => d,
                Err(_) => continue,
            },
            _ => continue,
        };
        if !(-30.0..=30.0).contains(&days) {
            continue;
        }
        if rec.get(c_is_recid).map(str::trim) == Some("-1") {
            continue;
        }
        if rec.get(c_degree).map(str::trim) == Some("O") {
            continue;
        }
        if rec.get(c_score).map(str::trim) == Some("N/A") {
            continue;
        }
        let (jail_in, jail_out) = match (
            rec.get(c_jail_in).and_then(parse_jail_date),
            rec.get(c_jail_out).and_then(parse_jail_date),
        ) {
            (Some(i), Some(o)) => (i, o),
            _ => continue,
        };
        let stay_days = (jail_out - jail_in).num_days().max(0);
        let mut row: Vec<String> = keep
            .iter()
            .map(|&i| rec.get(i).unwrap_or("").to_string())
            .collect();
        row.push(stay_days.to_string());
        records.push(row);
    }
    build_dataset(&out_headers, records, &compas_schema_config())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::FeatureKind;
    use std::io::Write;

    #[test]
    fn german_loader_shapes_schema_and_labels() {
        // two rows in the Statlog attribute layout
        let rows = [
            "A11 6 A34 A43 1169 A65 A75 4 A93 A101 4 A121 67 A143 A152 2 A173 1 A192 A201 1",
            "A12 48 A32 A43 5951 A61 A73 2 A92 A101 2 A121 22 A143 A152 1 A173 1 A191 A201 2",
            "A14 12 A34 A46 2096 A61 A74 2 A93 A101 3 A121 49 A143 A152 1 A172 2 A191 A201 1",
        ];
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{}", rows.join("\n")).unwrap();
        let ds = load_german_credit(f.path()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels, vec![1, -1, 1]);
        let numeric = ds
            .schema
            .features
            .iter()
            .filter(|f| matches!(f.kind, FeatureKind::Numeric { .. }))
            .count();
        assert_eq!(numeric, 3);
        assert_eq!(ds.schema.arity(), 20);
    }

    #[test]
    fn german_loader_rejects_short_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "A11 6 A34").unwrap();
        let err = load_german_credit(f.path()).unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 1, .. }));
    }

    fn compas_csv(rows: &[&str]) -> tempfile::NamedTempFile {
        let header = "age_cat,race,sex,c_charge_degree,priors_count,two_year_recid,\
                      days_b_screening_arrest,is_recid,score_text,c_jail_in,c_jail_out";
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{header}").unwrap();
        for r in rows {
            writeln!(f, "{r}").unwrap();
        }
        f
    }

    #[test]
    fn compas_loader_applies_quality_filters_and_derives_stay() {
        let f = compas_csv(&[
            // kept: 2-day stay
            "25 - 45,Other,Male,F,3,1,0,1,High,2013-01-01 03:00:00,2013-01-03 05:00:00",
            // dropped: screening 45 days after arrest
            "25 - 45,Other,Male,F,3,1,45,1,High,2013-01-01 03:00:00,2013-01-03 05:00:00",
            // dropped: unknown recidivism flag
            "25 - 45,Other,Male,F,3,1,0,-1,High,2013-01-01 03:00:00,2013-01-03 05:00:00",
            // dropped: ordinary traffic offense
            "25 - 45,Other,Male,O,3,1,0,1,High,2013-01-01 03:00:00,2013-01-03 05:00:00",
            // dropped: missing jail dates
            "25 - 45,Other,Male,F,3,1,0,1,High,,",
            // kept: negative stay clamps to 0, favorable label
            "Less than 25,Other,Female,M,0,0,-2,0,Low,2013-01-05 00:00:00,2013-01-04 00:00:00",
        ]);
        let ds = load_compas(f.path()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels, vec![-1, 1]);
        let stay_idx = ds.schema.feature_index("length_of_stay").unwrap();
        let stays: Vec<f64> = ds
            .rows
            .iter()
            .map(|r| r.values[stay_idx].as_num().unwrap())
            .collect();
        assert_eq!(stays, vec![2.0, 0.0]);
        // 4 categorical + 2 continuous
        let numeric = ds
            .schema
            .features
            .iter()
            .filter(|f| matches!(f.kind, FeatureKind::Numeric { .. }))
            .count();
        assert_eq!(numeric, 2);
        assert_eq!(ds.schema.arity(), 6);
    }
}
