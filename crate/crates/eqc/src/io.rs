//! Data files: CSV with `#` provenance lines, and JSON reports.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context};
use eqc_core::fitting::CurvePoint;
use serde::{Deserialize, Serialize};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Key/value pairs identifying how a data file was produced.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub fields: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Provenance {
            command: command.to_owned(),
            fields: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn write_comments<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# eqc {VERSION} {}", self.command)?;
        for (k, v) in &self.fields {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }

    fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("version".into(), VERSION.into());
        map.insert("command".into(), self.command.clone().into());
        for (k, v) in &self.fields {
            map.insert(k.clone(), v.clone().into());
        }
        map.into()
    }
}

/// One row of an EQC curve file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub x: f64,
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    #[serde(rename = "N1")]
    pub n1: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub p: f64,
    pub eqc_original: f64,
    pub eqc_transformed: f64,
    pub diff: f64,
    pub diff_stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub p: f64,
    pub e0: f64,
    pub extrapolated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub p: f64,
    pub theta_p: f64,
    pub theta_std_error: f64,
    pub eqc: f64,
    pub eqc_std_error: f64,
}

/// Writes `rows` as CSV, or as `{"provenance": .., "rows": [..]}` JSON.
pub fn write_table<W: Write, R: Serialize>(
    mut w: W,
    provenance: &Provenance,
    rows: &[R],
    format: crate::config::Format,
) -> anyhow::Result<()> {
    match format {
        crate::config::Format::Csv => {
            provenance.write_comments(&mut w)?;
            let mut csv = csv::Writer::from_writer(w);
            for r in rows {
                csv.serialize(r)?;
            }
            csv.flush()?;
        }
        crate::config::Format::Json => {
            let doc = serde_json::json!({ "provenance": provenance.to_json(), "rows": rows });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Reads `(x, mean, std_error)` from a curve CSV; extra columns are ignored.
pub fn read_curve<R: Read>(r: R) -> anyhow::Result<Vec<CurvePoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (Some(x), Some(mean)) = (column("x"), column("mean")) else {
        bail!(
            "curve file needs x and mean columns, found {:?}",
            headers.iter().collect::<Vec<_>>()
        );
    };
    let se = column("std_error");
    let mut out = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> anyhow::Result<f64> {
            let v = record.get(i).unwrap_or("");
            v.parse::<f64>()
                .with_context(|| format!("row {}: bad number {v:?}", n + 1))
        };
        let std_error = match se {
            Some(i) => field(i)?,
            None => 0.0,
        };
        out.push(CurvePoint::new(field(x)?, field(mean)?, std_error));
    }
    if out.is_empty() {
        bail!("curve file has no rows");
    }
    Ok(out)
}

pub fn read_curve_file(path: &Path) -> anyhow::Result<Vec<CurvePoint>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_curve(std::io::BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Format;

    #[test]
    fn curve_round_trip() {
        let rows = [
            CurveRow {
                x: 1.0,
                mean: 0.43,
                std_error: 0.004,
                trials: 10,
                n1: 4,
            },
            CurveRow {
                x: 2.0,
                mean: 0.4,
                std_error: 0.0041,
                trials: 10,
                n1: 4,
            },
        ];
        let prov = Provenance::new("simulate")
            .with("kind", "square")
            .with("seed", 42);
        let mut buf = Vec::new();
        write_table(&mut buf, &prov, &rows, Format::Csv).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!(
            "# eqc {VERSION} simulate\n# kind=square\n# seed=42\nx,mean,std_error,trials,N1\n"
        )));
        let back = read_curve(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1], CurvePoint::new(2.0, 0.4, 0.0041));
    }

    #[test]
    fn json_table() {
        let prov = Provenance::new("theta").with("L", 8);
        let mut buf = Vec::new();
        write_table(
            &mut buf,
            &prov,
            &[AnalyticRow {
                p: 1.0,
                e0: 1.0,
                extrapolated: false,
            }],
            Format::Json,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["provenance"]["L"], "8");
        assert_eq!(v["rows"][0]["e0"], 1.0);
    }

    #[test]
    fn malformed_curves() {
        assert!(read_curve("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_curve("x,mean\n1,zz\n".as_bytes()).is_err());
        assert!(read_curve("x,mean\n".as_bytes()).is_err());
        assert_eq!(
            read_curve("# c\nx,mean\n3,0.5\n".as_bytes()).unwrap()[0].std_error,
            0.0
        );
    }
}
