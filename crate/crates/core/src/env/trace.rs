use std::io::Write;

use serde::{Deserialize, Serialize};

use super::StepOutcome;
use crate::metrics::CompensatedSum;

/// One slot of an episode, in the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: usize,
    pub x: f64,
    pub y: f64,
    pub serving_bs: usize,
    /// `-1` when the entry SNR met the threshold and no decision was taken.
    pub action: i64,
    pub snr_db: f64,
    pub cnt: usize,
    pub tau_b_us: f64,
    pub rate: f64,
    pub throughput: f64,
    pub reward: f64,
    pub handover: u8,
    pub fallback: u8,
}

impl TraceRow {
    pub fn new(slot: usize, position: [f64; 2], out: &StepOutcome) -> Self {
        Self {
            slot,
            x: position[0],
            y: position[1],
            serving_bs: out.serving,
            action: out.action.map_or(-1, |a| a.index() as i64),
            snr_db: out.snr_db,
            cnt: out.cnt,
            tau_b_us: out.tau_b * 1e6,
            rate: out.rate,
            throughput: out.throughput,
            reward: out.reward,
            handover: u8::from(out.handover_executed),
            fallback: u8::from(out.reactive_fallback),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub realization: u64,
    pub rows: Vec<TraceRow>,
}

impl EpisodeTrace {
    pub fn slots(&self) -> usize {
        self.rows.len()
    }

    pub fn total_throughput(&self) -> f64 {
        self.rows.iter().map(|r| r.throughput).collect::<CompensatedSum>().value()
    }

    pub fn unmet_slots(&self, threshold: f64) -> usize {
        self.rows.iter().filter(|r| r.throughput <= threshold).count()
    }

    pub fn handovers(&self) -> usize {
        self.rows.iter().filter(|r| r.handover == 1).count()
    }

    pub fn fallbacks(&self) -> usize {
        self.rows.iter().filter(|r| r.fallback == 1).count()
    }

    /// A→B→A serving changes completed within three slots.
    pub fn ping_pongs(&self) -> usize {
        let serving: Vec<usize> = self.rows.iter().map(|r| r.serving_bs).collect();
        let changes: Vec<(usize, usize, usize)> = serving
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(i, w)| (i + 1, w[0], w[1]))
            .collect();
        changes
            .windows(2)
            .filter(|c| c[0].1 == c[1].2 && c[0].2 == c[1].1 && c[1].0 - c[0].0 < 3)
            .count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
