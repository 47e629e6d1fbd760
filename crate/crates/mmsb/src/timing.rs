use std::time::{Duration, Instant};

use mmsb_core::{Stage, StageObserver};

/// Wall time per pipeline stage, summed over repeated entries.
#[derive(Debug, Default, Clone)]
pub struct StageTimer {
    totals: Vec<(Stage, Duration)>,
    open: Option<(Stage, Instant)>,
}

impl StageTimer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn totals(&self) -> &[(Stage, Duration)] {
        &self.totals
    }

    pub fn seconds(&self, stage: Stage) -> f64 {
        self.totals
            .iter()
            .filter(|(s, _)| *s == stage)
            .map(|(_, d)| d.as_secs_f64())
            .sum()
    }

    pub fn total_seconds(&self) -> f64 {
        self.totals.iter().map(|(_, d)| d.as_secs_f64()).sum()
    }
}

impl StageObserver for StageTimer {
    fn enter(&mut self, stage: Stage) {
        self.open = Some((stage, Instant::now()));
    }

    fn exit(&mut self, stage: Stage) {
        if let Some((open, start)) = self.open.take() {
            debug_assert_eq!(open, stage);
            let elapsed = start.elapsed();
            match self.totals.iter_mut().find(|(s, _)| *s == stage) {
                Some((_, d)) => *d += elapsed,
                None => self.totals.push((stage, elapsed)),
            }
        }
    }
}
