use std::io::Write;

use serde::{Deserialize, Serialize};

/// Outcome of the pair decision made during an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairFlag {
    None,
    Rejected,
    Accepted,
    Damped,
}

impl PairFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PairFlag::None => "none",
            PairFlag::Rejected => "rejected",
            PairFlag::Accepted => "accepted",
            PairFlag::Damped => "damped",
        }
    }
}

/// One iteration's metrics. `loss` and `gnorm` are mini-batch values at
/// `θ_k`; the probed full-data values refer to `θ_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRow {
    pub k: usize,
    /// Cumulative data passes after this iteration.
    pub epoch: f64,
    pub loss: f64,
    pub gnorm: f64,
    pub full_loss: Option<f64>,
    pub fullgnorm: Option<f64>,
    pub relerr: Option<f64>,
    pub lambda: f64,
    pub sg: usize,
    pub sh: usize,
    pub pair: PairFlag,
    pub ms: Option<f64>,
}

pub const CSV_HEADER: &str = "k,epoch,loss,gnorm,fullgnorm,relerr,lambda,sg,sh,pair,ms";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<IterRow>,
}

impl RunRecord {
    pub fn push(&mut self, row: IterRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&IterRow> {
        self.rows.last()
    }

    /// Writes the fixed-header CSV. Floats use the shortest round-trip
    /// exponent form, so equal records give equal bytes.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(CSV_HEADER.split(','))?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                format!("{:e}", r.epoch),
                format!("{:e}", r.loss),
                format!("{:e}", r.gnorm),
                opt(r.fullgnorm),
                opt(r.relerr),
                format!("{:e}", r.lambda),
                r.sg.to_string(),
                r.sh.to_string(),
                r.pair.as_str().to_string(),
                opt(r.ms),
            ])?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
