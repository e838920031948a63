//! Run log: one CSV row per seeded or evolved individual.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::GrowthFunctionId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Seed,
    Evolve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub wallclock_s: f64,
    pub event: EventKind,
    pub individual_id: u64,
    pub parent_id: u64,
    pub mutation_tag: GrowthFunctionId,
    pub params: u64,
    pub fitness: f64,
    /// Best fitness in the population after this event.
    pub best_fitness: f64,
    /// Population size after this event.
    pub population_size: usize,
}

impl LogRow {
    /// Equality ignoring the wallclock column.
    pub fn same_event(&self, other: &LogRow) -> bool {
        LogRow { wallclock_s: 0.0, ..self.clone() } == LogRow { wallclock_s: 0.0, ..other.clone() }
    }
}

/// CSV writer that flushes after every row.
pub struct LogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> LogWriter<W> {
    pub fn new(w: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(w),
        }
    }

    pub fn write(&mut self, row: &LogRow) -> Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_log<W: Write>(w: W, rows: &[LogRow]) -> Result<()> {
    let mut out = LogWriter::new(w);
    for r in rows {
        out.write(r)?;
    }
    Ok(())
}

pub fn read_log<R: Read>(r: R) -> Result<Vec<LogRow>> {
    let mut rows = Vec::new();
    for rec in csv::Reader::from_reader(r).deserialize() {
        rows.push(rec.map_err(|e| Error::Format(format!("run log: {e}")))?);
    }
    Ok(rows)
}

/// Percentage of values falling in each of `bins` equal ranges over
/// `[lo, hi]`. Values on the upper edge count in the last bin.
pub fn fitness_histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0usize; bins];
    if bins == 0 || values.is_empty() || !(hi > lo) {
        return vec![0.0; bins];
    }
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    counts.iter().map(|&c| 100.0 * c as f64 / values.len() as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: u64) -> LogRow {
        LogRow {
            wallclock_s: 0.25,
            event: EventKind::Seed,
            individual_id: id,
            parent_id: 0,
            mutation_tag: GrowthFunctionId::Const,
            params: 1234,
            fitness: 0.1 + id as f64 / 3.0,
            best_fitness: 0.9,
            population_size: id as usize,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(1), row(2)];
        let mut buf = Vec::new();
        write_log(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "wallclock_s,event,individual_id,parent_id,mutation_tag,params,fitness,best_fitness,population_size\n"
        ));
        assert!(text.contains(",seed,1,0,CONST,1234,"));
        assert_eq!(read_log(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn histogram_percentages() {
        let h = fitness_histogram(&[0.0, 0.1, 0.5, 1.0], 0.0, 1.0, 4);
        assert_eq!(h, vec![50.0, 0.0, 25.0, 25.0]);
    }
}
