//! One row of a training log and its CSV encoding.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags {
    pub diverged: bool,
    /// A plain GD step was taken because the gradient vanished.
    pub zero_grad: bool,
    pub spectral_unconverged: bool,
}

impl Flags {
    pub fn is_empty(&self) -> bool {
        !(self.diverged || self.zero_grad || self.spectral_unconverged)
    }

    fn encode(&self) -> String {
        let mut parts = Vec::new();
        if self.diverged {
            parts.push("diverged");
        }
        if self.zero_grad {
            parts.push("zero_grad");
        }
        if self.spectral_unconverged {
            parts.push("spectral_unconverged");
        }
        parts.join("|")
    }

    fn decode(s: &str) -> Result<Self> {
        let mut flags = Flags::default();
        for part in s.split('|').filter(|p| !p.is_empty()) {
            match part {
                "diverged" => flags.diverged = true,
                "zero_grad" => flags.zero_grad = true,
                "spectral_unconverged" => flags.spectral_unconverged = true,
                other => return Err(Error::Log(format!("unknown flag `{other}`"))),
            }
        }
        Ok(flags)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub wall_s: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub uphill_grad_norm: f64,
    /// Top-k Hessian eigenvalue magnitudes, descending.
    pub lambda_mags: Vec<f64>,
    pub gd_edge: f64,
    pub sam_edge: f64,
    pub align_iterate: f64,
    pub align_uphill: f64,
    pub flags: Flags,
}

pub fn csv_header(k: usize) -> String {
    let mut cols = vec!["step", "wall_s", "loss", "grad_norm", "uphill_grad_norm"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    cols.extend((1..=k).map(|i| format!("lambda{i}")));
    cols.extend(
        ["gd_edge", "sam_edge", "align_iterate", "align_uphill", "flags"]
            .into_iter()
            .map(String::from),
    );
    cols.join(",")
}

/// `{:.16e}` gives 17 significant digits, enough to round-trip any f64.
fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

impl StepRecord {
    pub fn to_csv_row(&self) -> String {
        let mut fields = vec![
            self.step.to_string(),
            fmt_f64(self.wall_s),
            fmt_f64(self.loss),
            fmt_f64(self.grad_norm),
            fmt_f64(self.uphill_grad_norm),
        ];
        fields.extend(self.lambda_mags.iter().map(|&x| fmt_f64(x)));
        fields.extend([
            fmt_f64(self.gd_edge),
            fmt_f64(self.sam_edge),
            fmt_f64(self.align_iterate),
            fmt_f64(self.align_uphill),
            self.flags.encode(),
        ]);
        fields.join(",")
    }
}

/// Writes a header and all rows. Every record must have the same `k`.
pub fn write_csv<W: Write>(mut out: W, k: usize, records: &[StepRecord]) -> Result<()> {
    writeln!(out, "{}", csv_header(k))?;
    for r in records {
        if r.lambda_mags.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: r.lambda_mags.len(),
            });
        }
        writeln!(out, "{}", r.to_csv_row())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &std::path::Path, k: usize, records: &[StepRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), k, records)
}

/// A parsed log: the header plus rows as raw columns, so callers can pick
/// series by name.
#[derive(Clone, Debug, PartialEq)]
pub struct LogTable {
    pub columns: Vec<String>,
    pub records: Vec<StepRecord>,
}

impl LogTable {
    pub fn k(&self) -> usize {
        self.columns.iter().filter(|c| c.starts_with("lambda")).count()
    }

    /// Values of a named column, or `None` if the log has no such column.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let getter: Box<dyn Fn(&StepRecord) -> f64> = match name {
            "step" => Box::new(|r| r.step as f64),
            "wall_s" => Box::new(|r| r.wall_s),
            "loss" => Box::new(|r| r.loss),
            "grad_norm" => Box::new(|r| r.grad_norm),
            "uphill_grad_norm" => Box::new(|r| r.uphill_grad_norm),
            "gd_edge" => Box::new(|r| r.gd_edge),
            "sam_edge" => Box::new(|r| r.sam_edge),
            "align_iterate" => Box::new(|r| r.align_iterate),
            "align_uphill" => Box::new(|r| r.align_uphill),
            other => {
                let i: usize = other.strip_prefix("lambda")?.parse().ok()?;
                if i == 0 || i > self.k() {
                    return None;
                }
                Box::new(move |r| r.lambda_mags[i - 1])
            }
        };
        Some(self.records.iter().map(getter).collect())
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse()
            .map_err(|_| Error::Log(format!("line {line}: bad number `{s}`"))),
    }
}

pub fn read_csv<R: BufRead>(input: R) -> Result<LogTable> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Log("empty log".into()))??;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let k = columns.len().checked_sub(10).ok_or_else(|| Error::Log("short header".into()))?;
    if header != csv_header(k) {
        return Err(Error::Log(format!("unexpected header `{header}`")));
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != columns.len() {
            return Err(Error::Log(format!(
                "line {lineno}: expected {} fields, got {}",
                columns.len(),
                f.len()
            )));
        }
        let num = |i: usize| parse_f64(f[i], lineno);
        records.push(StepRecord {
            step: f[0]
                .parse()
                .map_err(|_| Error::Log(format!("line {lineno}: bad step `{}`", f[0])))?,
            wall_s: num(1)?,
            loss: num(2)?,
            grad_norm: num(3)?,
            uphill_grad_norm: num(4)?,
            lambda_mags: (5..5 + k).map(num).collect::<Result<_>>()?,
            gd_edge: num(5 + k)?,
            sam_edge: num(6 + k)?,
            align_iterate: num(7 + k)?,
            align_uphill: num(8 + k)?,
            flags: Flags::decode(f[9 + k])?,
        });
    }
    Ok(LogTable { columns, records })
}

pub fn read_csv_file(path: &std::path::Path) -> Result<LogTable> {
    read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}
