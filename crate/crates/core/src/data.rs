//! Dataset ingestion: the pair CSV schema and the two embedded paired
//! studies (childhood blood-lead levels and the 6-MP remission trial).

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Dataset, MatchedPair};

/// Blood-lead levels (ug/dl) for 33 matched child pairs; the exposed child
/// (parent employed in the battery plant) is listed first.
pub const LEAD_LEVELS: [(f64, f64); 33] = [
    (38.0, 16.0),
    (23.0, 18.0),
    (41.0, 18.0),
    (18.0, 24.0),
    (37.0, 19.0),
    (36.0, 11.0),
    (23.0, 10.0),
    (62.0, 15.0),
    (31.0, 16.0),
    (34.0, 18.0),
    (24.0, 18.0),
    (14.0, 13.0),
    (21.0, 19.0),
    (17.0, 10.0),
    (16.0, 16.0),
    (20.0, 16.0),
    (15.0, 24.0),
    (10.0, 13.0),
    (45.0, 9.0),
    (39.0, 14.0),
    (22.0, 21.0),
    (35.0, 19.0),
    (49.0, 7.0),
    (48.0, 18.0),
    (44.0, 19.0),
    (35.0, 12.0),
    (43.0, 11.0),
    (39.0, 22.0),
    (34.0, 25.0),
    (13.0, 16.0),
    (73.0, 13.0),
    (25.0, 11.0),
    (27.0, 13.0),
];

/// Remission lengths in weeks for 21 leukaemia pairs as
/// (control weeks, control event, 6-MP weeks, 6-MP event);
/// event = true means relapse observed, false means censored.
pub const REMISSION_WEEKS: [(f64, bool, f64, bool); 21] = [
    (1.0, true, 10.0, true),
    (22.0, true, 7.0, true),
    (3.0, true, 32.0, false),
    (12.0, true, 23.0, true),
    (8.0, true, 22.0, true),
    (17.0, true, 6.0, true),
    (2.0, true, 16.0, true),
    (11.0, true, 34.0, false),
    (8.0, true, 32.0, false),
    (12.0, true, 25.0, false),
    (2.0, true, 11.0, false),
    (5.0, true, 20.0, false),
    (4.0, true, 19.0, false),
    (15.0, true, 6.0, true),
    (8.0, true, 17.0, false),
    (23.0, true, 35.0, false),
    (5.0, true, 6.0, true),
    (11.0, true, 13.0, true),
    (4.0, true, 9.0, false),
    (1.0, true, 6.0, false),
    (8.0, true, 10.0, false),
];

/// Raw row of the lead study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadRecord {
    pub pair: usize,
    pub case_level: f64,
    pub control_level: f64,
}

pub fn lead_records() -> Vec<LeadRecord> {
    LEAD_LEVELS
        .iter()
        .enumerate()
        .map(|(i, &(case_level, control_level))| LeadRecord {
            pair: i + 1,
            case_level,
            control_level,
        })
        .collect()
}

/// Raw row of the remission study, one subject per record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemissionRecord {
    pub pair: usize,
    pub weeks: f64,
    /// true = relapse observed, false = censored.
    pub event: bool,
    /// true = 6-MP arm, false = placebo.
    pub six_mp: bool,
}

pub fn leukaemia_records() -> Vec<RemissionRecord> {
    let mut out = Vec::with_capacity(42);
    for (i, &(cw, ce, mw, me)) in REMISSION_WEEKS.iter().enumerate() {
        out.push(RemissionRecord {
            pair: i + 1,
            weeks: cw,
            event: ce,
            six_mp: false,
        });
        out.push(RemissionRecord {
            pair: i + 1,
            weeks: mw,
            event: me,
            six_mp: true,
        });
    }
    out
}

/// Lead study as matched pairs: subject A is the exposed child (d = 1 for
/// every pair), y = 1 when the level reaches the threshold (level >= t),
/// k = 0. The default threshold is 16 ug/dl.
pub fn load_lead_dataset(threshold: f64) -> Dataset {
    let pairs = LEAD_LEVELS
        .iter()
        .map(|&(case, control)| {
            MatchedPair::no_covariates(case >= threshold, control >= threshold, true)
        })
        .collect();
    Dataset::new(pairs).expect("embedded table is non-empty")
}

/// How to dichotomize a censored remission time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensoringConvention {
    /// Use the recorded weeks as-is.
    FaceValue,
    /// Drop pairs containing a member censored strictly below the threshold
    /// (the remission status at the threshold is unknown for them).
    DropCensoredBelowThreshold,
}

impl std::str::FromStr for CensoringConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "face-value" | "face_value" => Ok(Self::FaceValue),
            "drop-censored" | "drop_censored" => Ok(Self::DropCensoredBelowThreshold),
            other => Err(Error::UnknownName {
                kind: "censoring convention",
                name: other.to_string(),
            }),
        }
    }
}

/// Remission study as matched pairs: subject A is the 6-MP patient (d = 1),
/// y = 1 when remission lasted at least the threshold (weeks >= t), k = 0.
/// The default threshold is 12 weeks with the face-value convention.
pub fn load_leukaemia_dataset(threshold: f64, convention: CensoringConvention) -> Result<Dataset> {
    let mut pairs = Vec::with_capacity(REMISSION_WEEKS.len());
    for &(control_weeks, control_event, mp_weeks, mp_event) in &REMISSION_WEEKS {
        if convention == CensoringConvention::DropCensoredBelowThreshold {
            let ambiguous = (!control_event && control_weeks < threshold)
                || (!mp_event && mp_weeks < threshold);
            if ambiguous {
                continue;
            }
        }
        pairs.push(MatchedPair::no_covariates(
            mp_weeks >= threshold,
            control_weeks >= threshold,
            true,
        ));
    }
    Dataset::new(pairs)
}

// ---------------------------------------------------------------------------
// Pair CSV schema
// ---------------------------------------------------------------------------
//
// Header: y_a,y_b,d[,x_a_1..x_a_k,x_b_1..x_b_k]; k is inferred from the
// header. Outcome and treatment cells must be 0 or 1; covariates must be
// finite reals.

fn expected_header(k: usize) -> Vec<String> {
    let mut h = vec!["y_a".to_string(), "y_b".to_string(), "d".to_string()];
    for i in 1..=k {
        h.push(format!("x_a_{i}"));
    }
    for i in 1..=k {
        h.push(format!("x_b_{i}"));
    }
    h
}

fn parse_binary(field: &str, line: usize, column: &str) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::MalformedRow {
            line,
            message: format!("column {column}: expected 0 or 1, got '{other}'"),
        }),
    }
}

fn parse_real(field: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|e| Error::MalformedRow {
        line,
        message: format!("column {column}: {e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedRow {
            line,
            message: format!("column {column}: non-finite value"),
        });
    }
    Ok(v)
}

/// Parses the pair CSV schema from any reader; row numbers in errors count
/// the header as line 1.
pub fn parse_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = csv.headers().map_err(|e| Error::MalformedRow {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyFile);
    }
    let cols = headers.len();
    if cols < 3 || (cols - 3) % 2 != 0 {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("expected 3 + 2k columns, got {cols}"),
        });
    }
    let k = (cols - 3) / 2;
    let expect = expected_header(k);
    for (got, want) in headers.iter().zip(&expect) {
        if got.trim() != want {
            return Err(Error::MalformedRow {
                line: 1,
                message: format!("expected column '{want}', got '{got}'"),
            });
        }
    }

    let mut pairs = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            line,
            message: e.to_string(),
        })?;
        if record.len() != cols {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {cols} fields, got {}", record.len()),
            });
        }
        let y_a = parse_binary(&record[0], line, "y_a")?;
        let y_b = parse_binary(&record[1], line, "y_b")?;
        let d = parse_binary(&record[2], line, "d")?;
        let mut x_a = Vec::with_capacity(k);
        let mut x_b = Vec::with_capacity(k);
        for j in 0..k {
            x_a.push(parse_real(&record[3 + j], line, &expect[3 + j])?);
        }
        for j in 0..k {
            x_b.push(parse_real(&record[3 + k + j], line, &expect[3 + k + j])?);
        }
        pairs.push(MatchedPair::new(y_a, y_b, d, x_a, x_b)?);
    }
    if pairs.is_empty() {
        return Err(Error::EmptyFile);
    }
    Dataset::new(pairs)
}

pub fn parse_dataset_path<P: AsRef<Path>>(path: P) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_dataset(std::io::BufReader::new(file))
}

/// Writes the dataset back out in the pair CSV schema; floats use the
/// shortest round-trip representation, so emit -> parse -> emit is stable.
pub fn emit_dataset(data: &Dataset) -> String {
    let k = data.k();
    let mut out = expected_header(k).join(",");
    out.push('\n');
    for p in data.pairs() {
        let mut fields = vec![
            u8::from(p.y_a()).to_string(),
            u8::from(p.y_b()).to_string(),
            u8::from(p.d()).to_string(),
        ];
        fields.extend(p.x_a().iter().map(|v| v.to_string()));
        fields.extend(p.x_b().iter().map(|v| v.to_string()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Raw study records as CSV, for the `data --raw` export.
pub fn emit_lead_raw() -> String {
    let mut out = String::from("pair,case_level,control_level\n");
    for r in lead_records() {
        out.push_str(&format!("{},{},{}\n", r.pair, r.case_level, r.control_level));
    }
    out
}

pub fn emit_leukaemia_raw() -> String {
    let mut out = String::from("pair,weeks,event,group\n");
    for r in leukaemia_records() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.pair,
            r.weeks,
            u8::from(r.event),
            if r.six_mp { "6-MP" } else { "control" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // FNV-1a over the embedded numbers, frozen so silent edits to the tables
    // are caught.
    fn fnv1a(values: impl Iterator<Item = u64>) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        for v in values {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    #[test]
    fn lead_table_fixtures() {
        assert_eq!(LEAD_LEVELS.len(), 33);
        let case_sum: f64 = LEAD_LEVELS.iter().map(|p| p.0).sum();
        let control_sum: f64 = LEAD_LEVELS.iter().map(|p| p.1).sum();
        assert_eq!(case_sum, 1051.0);
        assert_eq!(control_sum, 524.0);
        // Means to the printed 5 decimals.
        assert!((case_sum / 33.0 - 31.84848).abs() < 5e-6);
        assert!((control_sum / 33.0 - 15.87879).abs() < 5e-6);
        let checksum = fnv1a(
            LEAD_LEVELS
                .iter()
                .flat_map(|p| [p.0.to_bits(), p.1.to_bits()]),
        );
        assert_eq!(checksum, 0x7c63_1c02_07e0_ddcd, "{checksum:#x}");
    }

    #[test]
    fn leukaemia_table_fixtures() {
        assert_eq!(REMISSION_WEEKS.len(), 21);
        let control_sum: f64 = REMISSION_WEEKS.iter().map(|r| r.0).sum();
        let mp_sum: f64 = REMISSION_WEEKS.iter().map(|r| r.2).sum();
        assert_eq!(control_sum, 182.0);
        assert_eq!(mp_sum, 359.0);
        assert!(REMISSION_WEEKS.iter().all(|r| r.1), "controls all relapsed");
        let censored = REMISSION_WEEKS.iter().filter(|r| !r.3).count();
        assert_eq!(censored, 12);
        let checksum = fnv1a(REMISSION_WEEKS.iter().flat_map(|r| {
            [
                r.0.to_bits(),
                u64::from(r.1),
                r.2.to_bits(),
                u64::from(r.3),
            ]
        }));
        assert_eq!(checksum, 0xfd8a_7b94_2b2c_69c3, "{checksum:#x}");
    }

    #[test]
    fn lead_discordance_hand_tally() {
        // Independent tally at the default threshold: 12 pairs (1,0),
        // 2 pairs (0,1), 17 (1,1), 2 (0,0).
        let data = load_lead_dataset(16.0);
        assert_eq!(data.len(), 33);
        assert_eq!(data.k(), 0);
        let n10 = data
            .pairs()
            .iter()
            .filter(|p| p.y_a() && !p.y_b())
            .count();
        let n01 = data
            .pairs()
            .iter()
            .filter(|p| !p.y_a() && p.y_b())
            .count();
        assert_eq!((n10, n01), (12, 2));
        assert_eq!(data.discordant_count(), 14);
        assert!(data.pairs().iter().all(|p| p.d()));
        // Boundary value 16 maps to 1 under the inclusive threshold.
        assert!(data.pairs()[0].y_a() && data.pairs()[0].y_b());
        assert!(!data.pairs()[16].y_a() && data.pairs()[16].y_b());
    }

    #[test]
    fn leukaemia_discordance_hand_tally() {
        let data = load_leukaemia_dataset(12.0, CensoringConvention::FaceValue).unwrap();
        assert_eq!(data.len(), 21);
        let n10 = data
            .pairs()
            .iter()
            .filter(|p| p.y_a() && !p.y_b())
            .count();
        let n01 = data
            .pairs()
            .iter()
            .filter(|p| !p.y_a() && p.y_b())
            .count();
        assert_eq!((n10, n01), (9, 3));
        assert_eq!(data.discordant_count(), 12);
        // Pair 3: control 3 weeks, 6-MP 32 weeks (censored, face value).
        assert!(data.pairs()[2].y_a() && !data.pairs()[2].y_b());
        // Pair 11: 6-MP censored at 11 weeks counts as 0 at face value.
        assert!(!data.pairs()[10].y_a());
    }

    #[test]
    fn leukaemia_drop_censored_convention() {
        let dropped =
            load_leukaemia_dataset(12.0, CensoringConvention::DropCensoredBelowThreshold).unwrap();
        // Pairs 11, 19, 20, 21 have 6-MP members censored before 12 weeks.
        assert_eq!(dropped.len(), 17);
        assert_eq!(dropped.discordant_count(), 12);
        assert!("face-value".parse::<CensoringConvention>().is_ok());
        assert!("whenever".parse::<CensoringConvention>().is_err());
    }

    #[test]
    fn degenerate_threshold_kills_discordance() {
        let data = load_leukaemia_dataset(0.0, CensoringConvention::FaceValue).unwrap();
        assert_eq!(data.discordant_count(), 0);
        assert!(data.pairs().iter().all(|p| p.y_a() && p.y_b()));
    }

    #[test]
    fn csv_roundtrip() {
        let pairs = vec![
            MatchedPair::new(true, false, true, vec![0.25, -1.5], vec![0.5, 2.0]).unwrap(),
            MatchedPair::new(false, true, false, vec![1.0 / 3.0, 0.1], vec![-0.7, 0.3]).unwrap(),
            MatchedPair::new(true, true, true, vec![1e-17, 4.0], vec![9.9, -0.0125]).unwrap(),
        ];
        let data = Dataset::new(pairs).unwrap();
        let text = emit_dataset(&data);
        let parsed = parse_dataset(text.as_bytes()).unwrap();
        assert_eq!(parsed, data);
        assert_eq!(emit_dataset(&parsed), text);
    }

    #[test]
    fn csv_k0_roundtrip() {
        let data = load_lead_dataset(16.0);
        let text = emit_dataset(&data);
        assert!(text.starts_with("y_a,y_b,d\n"));
        let parsed = parse_dataset(text.as_bytes()).unwrap();
        assert_eq!(parsed, data);
    }

    #[test]
    fn csv_error_reporting() {
        let ok = "y_a,y_b,d,x_a_1,x_b_1\n1,0,1,0.5,0.25\n";
        assert_eq!(parse_dataset(ok.as_bytes()).unwrap().len(), 1);

        let bad_value = "y_a,y_b,d\n1,0,1\n2,0,1\n";
        match parse_dataset(bad_value.as_bytes()) {
            Err(Error::MalformedRow { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("y_a"), "{message}");
            }
            other => panic!("expected malformed row, got {other:?}"),
        }

        let bad_header = "y_a,y_b,d,x_1\n1,0,1,0.5\n";
        assert!(matches!(
            parse_dataset(bad_header.as_bytes()),
            Err(Error::MalformedRow { line: 1, .. })
        ));

        let bad_float = "y_a,y_b,d,x_a_1,x_b_1\n1,0,1,zebra,0.25\n";
        match parse_dataset(bad_float.as_bytes()) {
            Err(Error::MalformedRow { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("x_a_1"), "{message}");
            }
            other => panic!("expected malformed row, got {other:?}"),
        }

        let short_row = "y_a,y_b,d,x_a_1,x_b_1\n1,0,1,0.5\n";
        assert!(matches!(
            parse_dataset(short_row.as_bytes()),
            Err(Error::MalformedRow { line: 2, .. })
        ));

        assert!(matches!(
            parse_dataset("".as_bytes()),
            Err(Error::EmptyFile)
        ));
        assert!(matches!(
            parse_dataset("y_a,y_b,d\n".as_bytes()),
            Err(Error::EmptyFile)
        ));
    }

    #[test]
    fn raw_exports_have_all_rows() {
        assert_eq!(emit_lead_raw().lines().count(), 34);
        assert_eq!(emit_leukaemia_raw().lines().count(), 43);
    }
}
