use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::profile::{ResidentProfile, Var};
use crate::error::{Error, Result};
use crate::survival::{Disposition, LosObservation};

/// First line of every file written by [`write_residents`].
pub const SCHEMA_LINE: &str = "# careflow residents v1";

const COLUMNS: [&str; 14] = [
    "resident_id",
    "admit_day",
    "x1",
    "x2",
    "x3",
    "x4",
    "x5",
    "x6",
    "x7",
    "x8",
    "x9",
    "los_days",
    "disposition",
    "censored",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidentRecord {
    pub resident_id: String,
    pub profile: ResidentProfile,
    pub los: LosObservation<f64>,
}

fn row_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Row { row, column: column.to_string(), message: message.into() }
}

pub fn load_residents(path: impl AsRef<Path>, dispositions: &[Disposition]) -> Result<Vec<ResidentRecord>> {
    read_residents(File::open(path)?, dispositions)
}

/// Parse the resident CSV. Lines starting with `#` are comments. Errors name
/// the 1-based line number in the file and the offending column.
pub fn read_residents<R: Read>(reader: R, dispositions: &[Disposition]) -> Result<Vec<ResidentRecord>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let header_line = rdr.position().line().max(1) as usize;
    let mut idx = [0usize; 14];
    for (i, col) in COLUMNS.iter().enumerate() {
        idx[i] = headers
            .iter()
            .position(|h| h == *col)
            .ok_or_else(|| row_err(header_line, col, "missing column"))?;
    }

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let int = |i: usize, lo: u64, hi: u64| -> Result<u64> {
            let s = field(i);
            let v: u64 = s.parse().map_err(|_| row_err(row, COLUMNS[i], format!("`{s}` is not a non-negative integer")))?;
            if v < lo || v > hi {
                return Err(row_err(row, COLUMNS[i], format!("{v} outside {lo}..={hi}")));
            }
            Ok(v)
        };

        let resident_id = field(0).to_string();
        if resident_id.is_empty() {
            return Err(row_err(row, "resident_id", "empty id"));
        }
        let admit_day = int(1, 0, u64::from(u32::MAX))? as u32;
        let mut values = [0u8; 9];
        for var in Var::ALL {
            let (lo, hi) = var.range();
            values[var.index()] = int(2 + var.index(), u64::from(lo), u64::from(hi))? as u8;
        }
        let los_s = field(11);
        let t: f64 = los_s.parse().map_err(|_| row_err(row, "los_days", format!("`{los_s}` is not a number")))?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(row_err(row, "los_days", format!("length of stay must be positive, got {los_s}")));
        }
        let censored = int(13, 0, 1)? == 1;
        let label = field(12);
        let los = match (censored, label.is_empty()) {
            (true, true) => LosObservation::censored(t),
            (false, false) => {
                let d = dispositions
                    .iter()
                    .find(|d| d.label == label)
                    .ok_or_else(|| row_err(row, "disposition", format!("unknown disposition `{label}`")))?;
                LosObservation::discharged(t, d.id)
            }
            (true, false) => return Err(row_err(row, "disposition", "censored rows must leave disposition empty")),
            (false, true) => return Err(row_err(row, "disposition", "discharged rows need a disposition")),
        };
        let profile = ResidentProfile::from_values(values, admit_day)?;
        out.push(ResidentRecord { resident_id, profile, los });
    }
    Ok(out)
}

pub fn save_residents(path: impl AsRef<Path>, records: &[ResidentRecord], dispositions: &[Disposition]) -> Result<()> {
    let mut f = File::create(path)?;
    write_residents(&mut f, records, dispositions)?;
    f.flush()?;
    Ok(())
}

pub fn write_residents<W: Write>(mut w: W, records: &[ResidentRecord], dispositions: &[Disposition]) -> Result<()> {
    writeln!(w, "{SCHEMA_LINE}")?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(COLUMNS)?;
    for r in records {
        let label = match r.los.disposition {
            None => String::new(),
            Some(id) => dispositions
                .iter()
                .find(|d| d.id == id)
                .map(|d| d.label.clone())
                .ok_or_else(|| Error::InvalidInput(format!("resident {} has unknown disposition {}", r.resident_id, id.0)))?,
        };
        let mut row = vec![r.resident_id.clone(), r.profile.admit_day.to_string()];
        row.extend(r.profile.values().iter().map(|v| v.to_string()));
        row.push(format!("{}", r.los.t_days));
        row.push(label);
        row.push(if r.los.is_censored() { "1" } else { "0" }.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::DispositionId;

    fn disp() -> Vec<Disposition> {
        vec![
            Disposition { id: DispositionId(1), label: "community".into() },
            Disposition { id: DispositionId(2), label: "hospital".into() },
        ]
    }

    const HEADER: &str = "resident_id,admit_day,x1,x2,x3,x4,x5,x6,x7,x8,x9,los_days,disposition,censored\n";

    #[test]
    fn header_only_is_empty() {
        assert!(read_residents(HEADER.as_bytes(), &disp()).unwrap().is_empty());
    }

    #[test]
    fn adl_out_of_range_names_row_and_column() {
        let csv = format!("{HEADER}a,0,3,0,0,1,0,0,0,0,0,12.5,community,0\nb,1,17,0,0,1,0,0,0,0,0,4,hospital,0\n");
        match read_residents(csv.as_bytes(), &disp()) {
            Err(Error::Row { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "x1");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column() {
        let csv = "resident_id,admit_day,x1\n";
        assert!(matches!(read_residents(csv.as_bytes(), &disp()), Err(Error::Row { column, .. }) if column == "x2"));
    }

    #[test]
    fn nonpositive_los_and_censor_rules() {
        let bad = [
            "a,0,3,0,0,1,0,0,0,0,0,0,community,0\n",
            "a,0,3,0,0,1,0,0,0,0,0,5,community,1\n",
            "a,0,3,0,0,1,0,0,0,0,0,5,,0\n",
            "a,0,3,0,0,1,0,0,0,0,0,5,home,0\n",
        ];
        for b in bad {
            let csv = format!("{HEADER}{b}");
            assert!(matches!(read_residents(csv.as_bytes(), &disp()), Err(Error::Row { row: 2, .. })), "{b}");
        }
    }

    #[test]
    fn round_trip_bytes() {
        let csv = format!("{SCHEMA_LINE}\n{HEADER}a,0,3,0,1,1,0,0,0,1,0,12.5,community,0\nb,7,16,1,0,5,3,1,1,0,1,0.1,,1\n");
        let recs = read_residents(csv.as_bytes(), &disp()).unwrap();
        assert_eq!(recs.len(), 2);
        let mut out = Vec::new();
        write_residents(&mut out, &recs, &disp()).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), csv);
    }
}
