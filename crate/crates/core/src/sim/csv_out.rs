use std::io::Write;

use crate::Result;

/// A flat CSV record with a fixed header.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Writes a header and one line per row, `\n`-terminated. Floats use the
/// shortest representation that round-trips.
pub fn write_csv<W: Write, R: CsvRow>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(R::header())?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<R: CsvRow>(rows: &[R]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

impl CsvRow for super::SerPoint {
    fn header() -> &'static [&'static str] {
        &[
            "detector", "ebn0_db", "errors", "symbols", "ser", "ci95", "nc_avg", "cmult", "cadd",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.detector.to_string(),
            self.ebn0_db.to_string(),
            self.errors.to_string(),
            self.symbols.to_string(),
            self.ser.to_string(),
            self.ci95.to_string(),
            self.nc_avg.to_string(),
            self.cmult.to_string(),
            self.cadd.to_string(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{DetectorKind, SerPoint};

    #[test]
    fn ser_point_line() {
        let p = SerPoint {
            detector: DetectorKind::CandRake,
            ebn0_db: -2.5,
            errors: 3,
            symbols: 10,
            ser: 0.3,
            ci95: 0.1,
            nc_avg: 4.25,
            cmult: 1.0 / 3.0,
            cadd: 7.0,
        };
        let text = to_csv_string(&[p]);
        assert_eq!(
            text,
            "detector,ebn0_db,errors,symbols,ser,ci95,nc_avg,cmult,cadd\n\
             cand-rake,-2.5,3,10,0.3,0.1,4.25,0.3333333333333333,7\n"
        );
        let third: f64 = text.lines().nth(1).unwrap().split(',').nth(7).unwrap().parse().unwrap();
        assert_eq!(third, 1.0 / 3.0);
    }
}
