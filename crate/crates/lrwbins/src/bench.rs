//! Latency benchmark: pure first stage, pure RPC, and the multistage path.
//!
//! Means are wall-clock per inference, averaged per batch and over
//! repetitions. `first_stage_floor` adds a busy-wait to every first-stage
//! attempt; raw table scoring runs in nanoseconds, so emulating a production
//! first stage (feature assembly plus interpreted evaluation) needs an
//! explicit cost knob before stage ratios mean anything.

use std::hint::black_box;
use std::time::{Duration, Instant};

use crate::config_table::FirstStageTable;
use crate::error::{Error, Result};
use crate::metrics::projected_multistage_latency;
use crate::rpc::RpcClient;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub batch_sizes: Vec<usize>,
    pub repetitions: usize,
    /// Simulated per-attempt cost of the embedded first stage.
    pub first_stage_floor: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            batch_sizes: vec![10, 100, 1000],
            repetitions: 3,
            first_stage_floor: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub batch_size: usize,
    pub mean_first_ms: f64,
    pub mean_second_ms: f64,
    pub mean_multistage_ms: f64,
    /// From the analytic model with measured means and observed coverage.
    pub projected_multistage_ms: f64,
    pub speedup_vs_second: f64,
    /// Fraction of multistage calls answered by the first stage.
    pub coverage: f64,
}

#[derive(Debug, Clone)]
pub struct LatencyReport {
    pub batches: Vec<BatchReport>,
}

impl LatencyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "batch_size,mean_first_ms,mean_second_ms,mean_multistage_ms,projected_multistage_ms,speedup_vs_second,coverage\n",
        );
        for b in &self.batches {
            out.push_str(&format!(
                "{},{:.4},{:.4},{:.4},{:.4},{:.3},{:.4}\n",
                b.batch_size,
                b.mean_first_ms,
                b.mean_second_ms,
                b.mean_multistage_ms,
                b.projected_multistage_ms,
                b.speedup_vs_second,
                b.coverage
            ));
        }
        out
    }
}

/// Spin until `floor` has elapsed. Sleeping is far too coarse for sub-ms
/// budgets.
fn burn(floor: Duration) {
    if floor.is_zero() {
        return;
    }
    let t0 = Instant::now();
    while t0.elapsed() < floor {
        std::hint::spin_loop();
    }
}

/// Measure all three paths on the given rows. Rows must be full schema
/// width; the routing decision per row comes from the table itself.
pub fn bench(
    table: &FirstStageTable,
    client: &mut RpcClient,
    rows: &[Vec<f64>],
    config: &BenchConfig,
) -> Result<LatencyReport> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no benchmark rows".into()));
    }
    if config.repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
    }
    let covered: Vec<&Vec<f64>> = rows.iter().filter(|r| table.predict(r).is_some()).collect();
    if covered.is_empty() {
        return Err(Error::InvalidParameter(
            "no rows are covered by the first stage".into(),
        ));
    }

    let mut batches = Vec::with_capacity(config.batch_sizes.len());
    for &batch_size in &config.batch_sizes {
        if batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        let mut first_ms = 0.0;
        let mut second_ms = 0.0;
        let mut multi_ms = 0.0;
        let mut coverage = 0.0;

        for _ in 0..config.repetitions {
            // pure first stage over covered rows only
            let t0 = Instant::now();
            for i in 0..batch_size {
                let row = covered[i % covered.len()];
                burn(config.first_stage_floor);
                black_box(table.predict(black_box(row)));
            }
            first_ms += t0.elapsed().as_secs_f64() * 1e3 / batch_size as f64;

            // pure second stage over all rows
            let t0 = Instant::now();
            for i in 0..batch_size {
                let row = &rows[i % rows.len()];
                black_box(client.remote_predict(row)?);
            }
            second_ms += t0.elapsed().as_secs_f64() * 1e3 / batch_size as f64;

            // multistage over all rows
            let mut hits = 0usize;
            let t0 = Instant::now();
            for i in 0..batch_size {
                let row = &rows[i % rows.len()];
                burn(config.first_stage_floor);
                match table.predict(black_box(row)) {
                    Some(p) => {
                        black_box(p);
                        hits += 1;
                    }
                    None => {
                        black_box(client.remote_predict(row)?);
                    }
                }
            }
            multi_ms += t0.elapsed().as_secs_f64() * 1e3 / batch_size as f64;
            coverage += hits as f64 / batch_size as f64;
        }

        let reps = config.repetitions as f64;
        let mean_first_ms = first_ms / reps;
        let mean_second_ms = second_ms / reps;
        let mean_multistage_ms = multi_ms / reps;
        let coverage = coverage / reps;
        let projected = projected_multistage_latency(
            Duration::from_secs_f64(mean_first_ms / 1e3),
            Duration::from_secs_f64(mean_second_ms / 1e3),
            coverage,
        );
        batches.push(BatchReport {
            batch_size,
            mean_first_ms,
            mean_second_ms,
            mean_multistage_ms,
            projected_multistage_ms: projected.as_secs_f64() * 1e3,
            speedup_vs_second: mean_second_ms / mean_multistage_ms,
            coverage,
        });
    }

    Ok(LatencyReport { batches })
}
