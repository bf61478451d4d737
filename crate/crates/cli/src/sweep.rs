//! Sweeps over (scheme, SNR, budget, seed) and their CSV output.
//!
//! Each sweep point writes `<output_dir>/<scheme>_snr<snr>_b<budget>_s<seed>/rounds.csv`
//! with one row per [`RoundRecord`]; `aggregate.csv` holds the end-of-round
//! accuracy mean and sample standard deviation over seeds for every
//! (scheme, snr, budget, round).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fedair_core::federation::{run_experiment, RoundRecord};
use fedair_core::Real;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SchemeVariant};
use crate::HarnessError;

pub const ROUND_COLUMNS: [&str; 12] = [
    "scheme",
    "seed",
    "round",
    "learner",
    "direction",
    "snr_db",
    "budget",
    "success",
    "symbols_used",
    "mse",
    "acc_global",
    "acc_local_mean",
];

pub const AGGREGATE_COLUMNS: [&str; 12] = [
    "scheme",
    "snr_db",
    "budget",
    "round",
    "seeds",
    "global_acc_mean",
    "global_acc_std",
    "local_acc_mean",
    "local_acc_std",
    "success_rate",
    "mse_mean",
    "symbols_mean",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub scheme: SchemeVariant,
    pub snr_db: f64,
    pub budget: usize,
    pub seed: u64,
}

impl SweepPoint {
    pub fn dir_name(&self) -> String {
        format!(
            "{}_snr{}_b{}_s{}",
            self.scheme.label(),
            self.snr_db,
            self.budget,
            self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub point: SweepPoint,
    pub records: Vec<RoundRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub scheme: String,
    pub snr_db: f64,
    pub budget: usize,
    pub round: usize,
    pub seeds: usize,
    pub global_acc_mean: f64,
    pub global_acc_std: f64,
    pub local_acc_mean: f64,
    pub local_acc_std: f64,
    pub success_rate: f64,
    pub mse_mean: Option<f64>,
    pub symbols_mean: f64,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub run_dirs: Vec<PathBuf>,
    pub aggregate_path: PathBuf,
    pub results: Vec<RunResult>,
    pub aggregate: Vec<AggregateRow>,
}

/// All points in scheme, SNR, budget, seed order.
pub fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>, HarnessError> {
    let budgets = cfg.resolved_budgets()?;
    let mut points = Vec::new();
    for &scheme in &cfg.schemes {
        for &snr_db in &cfg.snr_db {
            for &budget in &budgets {
                for &seed in &cfg.seeds {
                    points.push(SweepPoint {
                        scheme,
                        snr_db,
                        budget,
                        seed,
                    });
                }
            }
        }
    }
    Ok(points)
}

pub fn run_point(cfg: &ExperimentConfig, point: SweepPoint) -> Result<RunResult, HarnessError> {
    let spec = cfg.spec(point.scheme, point.snr_db, point.budget, point.seed)?;
    let records = run_experiment::<Real>(&spec)?;
    Ok(RunResult { point, records })
}

/// Runs every point, in parallel, returning results in sweep order.
pub fn run_points(cfg: &ExperimentConfig) -> Result<Vec<RunResult>, HarnessError> {
    sweep_points(cfg)?
        .into_par_iter()
        .map(|p| run_point(cfg, p))
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rounds<W: Write>(run: &RunResult, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROUND_COLUMNS)?;
    let p = &run.point;
    for r in &run.records {
        w.write_record([
            p.scheme.label().to_string(),
            p.seed.to_string(),
            r.round.to_string(),
            opt(r.learner),
            r.direction.to_string(),
            p.snr_db.to_string(),
            p.budget.to_string(),
            r.success.to_string(),
            r.symbols_used.to_string(),
            opt(r.mse),
            r.acc_global.to_string(),
            r.acc_local_mean.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io("csv output", e))?;
    Ok(())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-seed statistics for one round of one run.
struct RoundStat {
    global: f64,
    local: f64,
    attempts: usize,
    successes: usize,
    mse: Vec<f64>,
    symbols: usize,
}

fn round_stats(records: &[RoundRecord], round: usize) -> Option<RoundStat> {
    let rs: Vec<&RoundRecord> = records.iter().filter(|r| r.round == round).collect();
    let last = rs.last()?;
    let transmissions: Vec<&&RoundRecord> = rs.iter().filter(|r| r.learner.is_some()).collect();
    Some(RoundStat {
        global: last.acc_global,
        local: last.acc_local_mean,
        attempts: transmissions.len(),
        successes: transmissions.iter().filter(|r| r.success).count(),
        mse: transmissions.iter().filter_map(|r| r.mse).collect(),
        symbols: rs.iter().map(|r| r.symbols_used).sum(),
    })
}

/// Groups runs by (scheme, snr, budget) in first-seen order and reduces
/// each round over seeds.
pub fn aggregate(results: &[RunResult]) -> Vec<AggregateRow> {
    let mut groups: Vec<(SchemeVariant, f64, usize, Vec<&RunResult>)> = Vec::new();
    for r in results {
        let p = &r.point;
        match groups
            .iter_mut()
            .find(|g| g.0 == p.scheme && g.1.to_bits() == p.snr_db.to_bits() && g.2 == p.budget)
        {
            Some(g) => g.3.push(r),
            None => groups.push((p.scheme, p.snr_db, p.budget, vec![r])),
        }
    }
    let mut rows = Vec::new();
    for (scheme, snr_db, budget, runs) in groups {
        let max_round = runs
            .iter()
            .flat_map(|r| r.records.iter().map(|x| x.round))
            .max()
            .unwrap_or(0);
        for round in 0..=max_round {
            let stats: Vec<RoundStat> = runs
                .iter()
                .filter_map(|r| round_stats(&r.records, round))
                .collect();
            if stats.is_empty() {
                continue;
            }
            let g: Vec<f64> = stats.iter().map(|s| s.global).collect();
            let l: Vec<f64> = stats.iter().map(|s| s.local).collect();
            let (global_acc_mean, global_acc_std) = mean_std(&g);
            let (local_acc_mean, local_acc_std) = mean_std(&l);
            let attempts: usize = stats.iter().map(|s| s.attempts).sum();
            let successes: usize = stats.iter().map(|s| s.successes).sum();
            let mses: Vec<f64> = stats.iter().flat_map(|s| s.mse.iter().copied()).collect();
            rows.push(AggregateRow {
                scheme: scheme.label().to_string(),
                snr_db,
                budget,
                round,
                seeds: stats.len(),
                global_acc_mean,
                global_acc_std,
                local_acc_mean,
                local_acc_std,
                success_rate: if attempts == 0 {
                    1.0
                } else {
                    successes as f64 / attempts as f64
                },
                mse_mean: (!mses.is_empty()).then(|| mean_std(&mses).0),
                symbols_mean: stats.iter().map(|s| s.symbols as f64).sum::<f64>() / stats.len() as f64,
            });
        }
    }
    rows
}

pub fn write_aggregate<W: Write>(rows: &[AggregateRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            r.snr_db.to_string(),
            r.budget.to_string(),
            r.round.to_string(),
            r.seeds.to_string(),
            r.global_acc_mean.to_string(),
            r.global_acc_std.to_string(),
            r.local_acc_mean.to_string(),
            r.local_acc_std.to_string(),
            r.success_rate.to_string(),
            opt(r.mse_mean),
            r.symbols_mean.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io("csv output", e))?;
    Ok(())
}

fn create(path: &Path) -> Result<fs::File, HarnessError> {
    fs::File::create(path).map_err(|e| HarnessError::io(path, e))
}

/// Runs the whole sweep and writes all CSVs under `cfg.output_dir`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    cfg.validate()?;
    let results = run_points(cfg)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut run_dirs = Vec::with_capacity(results.len());
    for run in &results {
        let dir = out.join(run.point.dir_name());
        fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        write_rounds(run, create(&dir.join("rounds.csv"))?)?;
        run_dirs.push(dir);
    }
    let aggregate = aggregate(&results);
    let aggregate_path = out.join("aggregate.csv");
    write_aggregate(&aggregate, create(&aggregate_path)?)?;
    Ok(SweepOutput {
        run_dirs,
        aggregate_path,
        results,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fedair_core::federation::Direction;
    use fedair_core::schemes::SchemeKind;

    fn rec(round: usize, learner: Option<usize>, acc: f64, success: bool) -> RoundRecord {
        RoundRecord {
            round,
            learner,
            direction: if learner.is_some() {
                Direction::Up
            } else {
                Direction::Init
            },
            scheme: SchemeKind::Analog,
            success,
            symbols_used: if learner.is_some() { 10 } else { 0 },
            mse: (success && learner.is_some()).then_some(0.5),
            acc_global: acc,
            acc_local_mean: acc / 2.0,
        }
    }

    fn run(seed: u64, accs: [f64; 2]) -> RunResult {
        RunResult {
            point: SweepPoint {
                scheme: SchemeVariant::parse("analog").unwrap(),
                snr_db: 10.0,
                budget: 100,
                seed,
            },
            records: vec![
                rec(0, None, 0.3, true),
                rec(1, Some(0), 0.5, true),
                rec(1, Some(1), accs[0], false),
                rec(2, Some(0), accs[1], true),
            ],
        }
    }

    #[test]
    fn aggregate_takes_end_of_round_values() {
        let rows = aggregate(&[run(0, [0.6, 0.8]), run(1, [0.8, 0.6])]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].round, 0);
        assert_eq!(rows[0].global_acc_std, 0.0);
        let r1 = &rows[1];
        assert!((r1.global_acc_mean - 0.7).abs() < 1e-12);
        assert!((r1.global_acc_std - (0.02f64).sqrt()).abs() < 1e-12);
        assert!((r1.local_acc_mean - 0.35).abs() < 1e-12);
        assert_eq!(r1.success_rate, 0.5);
        assert_eq!(r1.symbols_mean, 20.0);
        assert_eq!(r1.seeds, 2);
        assert_eq!(rows[2].mse_mean, Some(0.5));
    }

    #[test]
    fn rounds_csv_has_fixed_columns() {
        let mut buf = Vec::new();
        write_rounds(&run(3, [0.1, 0.2]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), ROUND_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "analog,3,0,,init,10,100,true,0,,0.3,0.15");
        assert_eq!(lines.next().unwrap(), "analog,3,1,0,up,10,100,true,10,0.5,0.5,0.25");
        assert_eq!(lines.next().unwrap(), "analog,3,1,1,up,10,100,false,10,,0.1,0.05");
    }

    #[test]
    fn dir_names() {
        let p = SweepPoint {
            scheme: SchemeVariant::parse("digital-bpsk").unwrap(),
            snr_db: -2.5,
            budget: 7,
            seed: 1,
        };
        assert_eq!(p.dir_name(), "digital-bpsk_snr-2.5_b7_s1");
    }
}
