use super::lambda_label;
use crate::error::{Error, Result};
use crate::scenario::DgpKind;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

pub const RESULTS_HEADER: [&str; 17] = [
    "dgp",
    "lambda",
    "method",
    "rep",
    "seed",
    "x1",
    "x2",
    "x3",
    "x4",
    "x5",
    "x6",
    "oracle_J",
    "oracle_EC",
    "oracle_CVaR",
    "oracle_calls",
    "seconds",
    "status",
];

/// One replication of one method in one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dgp: DgpKind,
    pub lambda: f64,
    pub method: String,
    pub rep: usize,
    pub seed: u64,
    pub x: [f64; 6],
    pub oracle_j: f64,
    pub oracle_ec: f64,
    pub oracle_cvar: f64,
    pub oracle_calls: u64,
    pub seconds: f64,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub(crate) fn key(&self) -> (String, String, String, usize) {
        (self.dgp.label().to_string(), lambda_label(self.lambda), self.method.clone(), self.rep)
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.dgp.label().to_string(),
            lambda_label(self.lambda),
            self.method.clone(),
            self.rep.to_string(),
            self.seed.to_string(),
        ];
        r.extend(self.x.iter().map(|v| v.to_string()));
        r.extend([self.oracle_j, self.oracle_ec, self.oracle_cvar].iter().map(|v| v.to_string()));
        r.push(self.oracle_calls.to_string());
        r.push(self.seconds.to_string());
        // a row counts as written once its line is terminated, so keep it on one line
        r.push(self.status.replace(['\n', '\r'], " "));
        r
    }

    fn parse(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != RESULTS_HEADER.len() {
            return Err(Error::Results(format!("incomplete row: {rec:?}")));
        }
        let bad = |what: &str| Error::Results(format!("bad {what} in row {rec:?}"));
        let real = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(RESULTS_HEADER[i]));
        Ok(ResultRow {
            dgp: rec[0].parse().map_err(|_| bad("dgp"))?,
            lambda: real(1)?,
            method: rec[2].to_string(),
            rep: rec[3].parse().map_err(|_| bad("rep"))?,
            seed: rec[4].parse().map_err(|_| bad("seed"))?,
            x: [real(5)?, real(6)?, real(7)?, real(8)?, real(9)?, real(10)?],
            oracle_j: real(11)?,
            oracle_ec: real(12)?,
            oracle_cvar: real(13)?,
            oracle_calls: rec[14].parse().map_err(|_| bad("oracle_calls"))?,
            seconds: real(15)?,
            status: rec[16].to_string(),
        })
    }
}

fn parse_all(text: &str) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::Results(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(ResultRow::parse(&rec?)?);
    }
    Ok(rows)
}

/// Reads a complete results file.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)?;
    if !text.ends_with('\n') {
        return Err(Error::Results(format!("{} ends with an incomplete row", path.display())));
    }
    parse_all(&text)
}

/// Reads a results file for resuming, cutting off an unterminated last line.
pub(crate) fn load_for_append(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)?;
    let keep = text.rfind('\n').map_or(0, |i| i + 1);
    if keep < text.len() {
        std::fs::write(path, &text[..keep])?;
    }
    if keep == 0 {
        return Ok(Vec::new());
    }
    parse_all(&text[..keep])
}

/// Appends rows one at a time, flushing each.
pub(crate) struct Appender {
    file: File,
}

impl Appender {
    pub(crate) fn open(path: &Path, write_header: bool) -> Result<Self> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if write_header && file.metadata()?.len() == 0 {
            file.write_all(encode(&RESULTS_HEADER.map(String::from))?.as_bytes())?;
        }
        Ok(Appender { file })
    }

    pub(crate) fn append(&mut self, row: &ResultRow) -> Result<()> {
        self.file.write_all(encode(&row.record())?.as_bytes())?;
        self.file.flush()?;
        Ok(())
    }
}

fn encode(fields: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields)?;
    let bytes = w.into_inner().map_err(|e| Error::Results(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Results(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(rep: usize) -> ResultRow {
        ResultRow {
            dgp: DgpKind::Dgp1,
            lambda: 0.7,
            method: "acfs".into(),
            rep,
            seed: 99,
            x: [0.1, 0.2, 0.0, 0.05, 0.1, 0.5],
            oracle_j: 120.5,
            oracle_ec: 100.0,
            oracle_cvar: 29.285714285714285,
            oracle_calls: 1234,
            seconds: 0.0,
            status: "failed: a, b".into(),
        }
    }

    #[test]
    fn round_trip_with_quoting_and_nan() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let mut w = Appender::open(&p, true).unwrap();
        let mut r1 = row(1);
        r1.oracle_j = f64::NAN;
        w.append(&row(0)).unwrap();
        w.append(&r1).unwrap();
        let back = read_results(&p).unwrap();
        assert_eq!(back[0], row(0));
        assert!(back[1].oracle_j.is_nan());
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(
            "dgp,lambda,method,rep,seed,x1,x2,x3,x4,x5,x6,oracle_J,oracle_EC,oracle_CVaR,oracle_calls,seconds,status"
        ));
    }

    #[test]
    fn torn_tail_is_dropped_on_resume_but_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let mut w = Appender::open(&p, true).unwrap();
        w.append(&row(0)).unwrap();
        drop(w);
        let mut text = std::fs::read_to_string(&p).unwrap();
        text.push_str("dgp1,0.7,acfs,1,99,0.1");
        std::fs::write(&p, &text).unwrap();
        assert!(read_results(&p).is_err());
        assert_eq!(load_for_append(&p).unwrap(), vec![row(0)]);
        assert_eq!(read_results(&p).unwrap(), vec![row(0)]);
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(read_results(&p).is_err());
    }
}
