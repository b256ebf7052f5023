//! The metrics CSV: one header, then append-only rows of two kinds.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use transq_core::eval::ScoreSeries;
use transq_core::transcoder::LossBreakdown;

pub const HEADER: &str = "step,kind,q_loss,f_loss,r_loss,s_loss,total,episode_return,eval_mean,epsilon";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    TrainLoss,
    Eval,
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::TrainLoss => "train-loss",
            RowKind::Eval => "eval",
        }
    }
}

/// One CSV row; fields a kind does not use are `None` and written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub kind: RowKind,
    pub q_loss: Option<f64>,
    pub f_loss: Option<f64>,
    pub r_loss: Option<f64>,
    pub s_loss: Option<f64>,
    pub total: Option<f64>,
    pub episode_return: Option<f64>,
    pub eval_mean: Option<f64>,
    pub epsilon: Option<f64>,
}

impl MetricsRow {
    pub fn train(step: u64, loss: &LossBreakdown, episode_return: Option<f64>, epsilon: f64) -> Self {
        MetricsRow {
            step,
            kind: RowKind::TrainLoss,
            q_loss: Some(loss.q_loss),
            f_loss: Some(loss.f_loss),
            r_loss: Some(loss.r_loss),
            s_loss: Some(loss.s_loss),
            total: Some(loss.total),
            episode_return,
            eval_mean: None,
            epsilon: Some(epsilon),
        }
    }

    pub fn eval(step: u64, mean: f64, epsilon: f64) -> Self {
        MetricsRow {
            step,
            kind: RowKind::Eval,
            q_loss: None,
            f_loss: None,
            r_loss: None,
            s_loss: None,
            total: None,
            episode_return: None,
            eval_mean: Some(mean),
            epsilon: Some(epsilon),
        }
    }

    pub fn to_line(&self) -> String {
        let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.kind.as_str(),
            f(self.q_loss),
            f(self.f_loss),
            f(self.r_loss),
            f(self.s_loss),
            f(self.total),
            f(self.episode_return),
            f(self.eval_mean),
            f(self.epsilon)
        )
    }

    pub fn parse(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 10 {
            return Err(format!("expected 10 fields, got {}", fields.len()));
        }
        let num = |i: usize| -> Result<Option<f64>, String> {
            match fields[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| format!("field {i}: `{s}` is not a number")),
            }
        };
        Ok(MetricsRow {
            step: fields[0].parse().map_err(|_| format!("bad step `{}`", fields[0]))?,
            kind: match fields[1] {
                "train-loss" => RowKind::TrainLoss,
                "eval" => RowKind::Eval,
                k => return Err(format!("unknown row kind `{k}`")),
            },
            q_loss: num(2)?,
            f_loss: num(3)?,
            r_loss: num(4)?,
            s_loss: num(5)?,
            total: num(6)?,
            episode_return: num(7)?,
            eval_mean: num(8)?,
            epsilon: num(9)?,
        })
    }
}

/// Appends rows, writing the header first if the file is new or empty.
pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if file.metadata()?.len() == 0 {
            writeln!(file, "{HEADER}")?;
        }
        Ok(MetricsWriter {
            out: BufWriter::new(file),
        })
    }

    pub fn write(&mut self, row: &MetricsRow) -> std::io::Result<()> {
        writeln!(self.out, "{}", row.to_line())
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == HEADER => {}
        _ => return Err(format!("{}: missing metrics header", path.display())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(MetricsRow::parse(&line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 2))?);
    }
    Ok(rows)
}

/// Evaluation means as a score series.
pub fn eval_series(rows: &[MetricsRow]) -> Result<ScoreSeries, String> {
    let points = rows
        .iter()
        .filter(|r| r.kind == RowKind::Eval)
        .filter_map(|r| r.eval_mean.map(|m| (r.step, m)))
        .collect();
    ScoreSeries::new(points).map_err(|e| e.to_string())
}
