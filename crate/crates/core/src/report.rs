//! Plain CSV helpers shared by the dump routines.

use std::io::Write;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a header and rows of floats.
pub fn write_table<W: Write>(mut out: W, header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Write named columns of equal length.
pub fn write_columns<W: Write>(out: W, header: &[&str], columns: &[&[f64]]) -> std::io::Result<()> {
    let len = columns.first().map_or(0, |c| c.len());
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    write_table(out, header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_layout() {
        let mut buf = Vec::new();
        write_columns(&mut buf, &["t", "x"], &[&[0.0, 1.0], &[2.0, 3.0]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,x\n0.0000000000000000e0,2.0000000000000000e0\n1.0000000000000000e0,3.0000000000000000e0\n"
        );
    }
}
