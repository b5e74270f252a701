//! Line-delimited JSON measurement logs.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulator::Measurement;

/// Parses one record per non-blank line. Errors carry the 1-based line
/// number; timestamps must be non-decreasing.
pub fn read_log<R: Read>(reader: R) -> Result<Vec<Measurement>> {
    let mut out: Vec<Measurement> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let m: Measurement = serde_json::from_str(&line).map_err(|e| Error::MalformedLog {
            line: Some(i + 1),
            msg: e.to_string(),
        })?;
        if !m.timestamp().is_finite() {
            return Err(Error::MalformedLog {
                line: Some(i + 1),
                msg: "non-finite timestamp".into(),
            });
        }
        if let Some(prev) = out.last() {
            if m.timestamp() < prev.timestamp() {
                return Err(Error::MalformedLog {
                    line: Some(i + 1),
                    msg: format!(
                        "timestamp {} precedes previous record at {}",
                        m.timestamp(),
                        prev.timestamp()
                    ),
                });
            }
        }
        out.push(m);
    }
    Ok(out)
}

pub fn load_log(path: impl AsRef<Path>) -> Result<Vec<Measurement>> {
    read_log(std::fs::File::open(path)?)
}

pub fn write_log<W: Write>(mut w: W, log: &[Measurement]) -> Result<()> {
    for m in log {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_log(path: impl AsRef<Path>, log: &[Measurement]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_log(f, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate, Scenario};

    #[test]
    fn written_log_reads_back() {
        let log = generate(&Scenario {
            loops: 1,
            ..Scenario::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_log(&mut buf, &log).unwrap();
        assert_eq!(read_log(&buf[..]).unwrap(), log);
    }

    #[test]
    fn bad_record_reports_its_line() {
        let text = "{\"type\":\"GT\",\"t\":0.0,\"x\":1.0,\"y\":1.0}\n\n{\"type\":\"STEP\",\"t\":1.0,\"c\":-1,\"alpha\":0.0}\n";
        match read_log(text.as_bytes()) {
            Err(Error::MalformedLog { line: Some(3), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_order_record_is_rejected() {
        let text = "{\"type\":\"GT\",\"t\":5.0,\"x\":1.0,\"y\":1.0}\n{\"type\":\"GT\",\"t\":4.0,\"x\":1.0,\"y\":1.0}\n";
        assert!(matches!(
            read_log(text.as_bytes()),
            Err(Error::MalformedLog { line: Some(2), .. })
        ));
    }

    #[test]
    fn unknown_type_is_rejected() {
        let text = "{\"type\":\"BARO\",\"t\":5.0}\n";
        assert!(matches!(
            read_log(text.as_bytes()),
            Err(Error::MalformedLog { line: Some(1), .. })
        ));
    }
}
