//! CSV output shared by the command-line tool and the tests.
//!
//! Numbers are printed with 12 significant digits so files are byte-stable
//! for a given `(config, seed)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::types::RunSummary;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const SUMMARY_HEADER: [&str; 10] = [
    "setting",
    "n_pp",
    "n_pm",
    "n_mp",
    "n_mm",
    "n_singles_a",
    "n_singles_b",
    "n_neither",
    "n_double",
    "E",
];

/// Formats `x` like C's `%.12g`: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros removed.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let precision = SIGNIFICANT_DIGITS - 1;
    let sci = format!("{x:.precision$e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponent marker");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exponent) {
        let decimals = (precision as i32 - exponent).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exponent}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Per-setting counts and correlation, then footer rows for `S`, the three
/// efficiencies and the seed.
pub fn write_summary_csv<W: Write>(summary: &RunSummary, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(csv_error)?;
    for (setting, c) in summary.counts.iter() {
        let row = [
            setting.label().to_string(),
            c.pp().to_string(),
            c.pm().to_string(),
            c.mp().to_string(),
            c.mm().to_string(),
            c.alice_only().to_string(),
            c.bob_only().to_string(),
            c.neither().to_string(),
            c.double_events().to_string(),
            format_number(summary.correlation(setting)),
        ];
        w.write_record(&row).map_err(csv_error)?;
    }
    let footer = [
        ("S", format_number(summary.s_value)),
        ("eta_alice", format_number(summary.eta_alice)),
        ("eta_bob", format_number(summary.eta_bob)),
        ("eta_symmetric", format_number(summary.eta_symmetric)),
        ("seed", summary.seed.to_string()),
    ];
    for (name, value) in footer {
        w.write_record([name, value.as_str()]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_csv_string(summary: &RunSummary) -> Result<String> {
    let mut buf = Vec::new();
    write_summary_csv(summary, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Writes a numeric table. Missing values (`None`) are left empty.
pub fn write_numeric_csv<W: Write>(header: &[&str], rows: &[Vec<Option<f64>>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::invalid(format!(
                "row has {} values but the header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|v| v.map(format_number).unwrap_or_default()))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{CoincidenceCounts, MeasurementSettings, OutcomeTable, SettingCounts};

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(-0.5), "-0.5");
        assert_eq!(format_number(2.0 * std::f64::consts::SQRT_2), "2.82842712475");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(1.5e-7), "1.5e-7");
        assert_eq!(format_number(1234567.0), "1234567");
        assert_eq!(format_number(1e15), "1e15");
        assert_eq!(format_number(0.0001), "0.0001");
    }

    fn summary() -> RunSummary {
        let c = SettingCounts::new(40, 10, 10, 40, 5, 5, 10, 0, 2, 120).unwrap();
        RunSummary::from_counts(
            CoincidenceCounts::from_settings([c; 4]),
            [OutcomeTable::default(); 4],
            42,
            "test",
            MeasurementSettings::standard(),
            Default::default(),
        )
        .unwrap()
    }

    #[test]
    fn summary_layout() {
        let text = summary_csv_string(&summary()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[0],
            "setting,n_pp,n_pm,n_mp,n_mm,n_singles_a,n_singles_b,n_neither,n_double,E"
        );
        assert_eq!(lines.len(), 1 + 4 + 5);
        assert!(lines[1].ends_with(",40,10,10,40,5,5,10,2,0.6"), "{}", lines[1]);
        assert_eq!(lines[5], "S,1.2");
        assert_eq!(lines[9], "seed,42");
    }

    #[test]
    fn numeric_table() {
        let mut buf = Vec::new();
        write_numeric_csv(&["x", "y"], &[vec![Some(0.25), None]], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y\n0.25,\n");
        assert!(write_numeric_csv(&["x"], &[vec![None, None]], Vec::new()).is_err());
    }
}
