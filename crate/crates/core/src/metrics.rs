//! Error statistics and the MAPE model-fit metric.

use std::fmt::Write as _;
use std::io::Write;

use crate::scenario::TrajectoryLog;
use crate::{Error, Result};

/// Absolute-error statistics of one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: f64,
    pub max: f64,
    pub rmse: f64,
}

pub fn channel_stats(errors: &[f64]) -> Result<ChannelStats> {
    if errors.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = errors.len() as f64;
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut max: f64 = 0.0;
    for &e in errors {
        let a = e.abs();
        sum += a;
        sq += e * e;
        max = max.max(a);
    }
    // clip the last-ulp rounding so mean ≤ rmse ≤ max holds exactly
    let mean = (sum / n).min(max);
    let rmse = (sq / n).sqrt().clamp(mean, max);
    Ok(ChannelStats { mean, max, rmse })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    /// Mean absolute percentage error over the retained samples [%].
    pub percent: f64,
    /// Samples whose truth magnitude fell below the floor.
    pub excluded: usize,
    pub total: usize,
}

/// Mean absolute percentage error, skipping samples with `|truth| < floor`.
pub fn mape(estimate: &[f64], truth: &[f64], floor: f64) -> Result<Mape> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch(estimate.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(Error::EmptySeries);
    }
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("MAPE floor {floor} must be positive")));
    }
    let mut sum = 0.0;
    let mut kept = 0usize;
    for (&e, &t) in estimate.iter().zip(truth) {
        if t.abs() < floor {
            continue;
        }
        sum += ((e - t) / t).abs();
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::AllSamplesExcluded(truth.len()));
    }
    Ok(Mape { percent: 100.0 * sum / kept as f64, excluded: truth.len() - kept, total: truth.len() })
}

/// Floor at `fraction` of the series' peak magnitude.
pub fn relative_floor(truth: &[f64], fraction: f64) -> f64 {
    fraction * truth.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// [`mape`] with the floor at 1 % of the truth's peak magnitude.
pub fn mape_default(estimate: &[f64], truth: &[f64]) -> Result<Mape> {
    let floor = relative_floor(truth, 0.01);
    if floor == 0.0 {
        return Err(Error::AllSamplesExcluded(truth.len()));
    }
    mape(estimate, truth, floor)
}

pub const CHANNELS: [&str; 6] = ["X", "Y", "Z", "roll", "pitch", "yaw"];

/// Statistics of the six tracking channels of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub controller: String,
    pub channels: [ChannelStats; 6],
}

/// Position errors against the reference and attitude errors against the
/// commanded attitude, over samples with `t ∈ [from, to]`.
pub fn run_stats(log: &TrajectoryLog, from: f64, to: f64) -> Result<RunStats> {
    let window: Vec<_> = log.records.iter().filter(|r| r.t >= from - 1e-9 && r.t <= to + 1e-9).collect();
    let mut channels = [ChannelStats { mean: 0.0, max: 0.0, rmse: 0.0 }; 6];
    for (c, slot) in channels.iter_mut().enumerate() {
        let series: Vec<f64> = window
            .iter()
            .map(|r| if c < 3 { r.position_error()[c] } else { r.attitude_error()[c - 3] })
            .collect();
        *slot = channel_stats(&series)?;
    }
    Ok(RunStats { controller: log.controller.to_string(), channels })
}

/// Comparison table: one row per channel and controller, channels outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub runs: Vec<RunStats>,
}

impl ComparisonReport {
    pub fn get(&self, controller: &str, channel: usize) -> Option<ChannelStats> {
        self.runs.iter().find(|r| r.controller == controller).map(|r| r.channels[channel])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["channel", "controller", "mean", "max", "rmse"])?;
        for (c, name) in CHANNELS.iter().enumerate() {
            for run in &self.runs {
                let s = run.channels[c];
                w.write_record([
                    name.to_string(),
                    run.controller.clone(),
                    format!("{:e}", s.mean),
                    format!("{:e}", s.max),
                    format!("{:e}", s.rmse),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8}{:<10}{:>14}{:>14}{:>14}", "channel", "method", "mean", "max", "rmse");
        for (c, name) in CHANNELS.iter().enumerate() {
            for run in &self.runs {
                let st = run.channels[c];
                let _ = writeln!(s, "{:<8}{:<10}{:>14.6}{:>14.6}{:>14.6}", name, run.controller, st.mean, st.max, st.rmse);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stats_examples() {
        let c = channel_stats(&[0.5; 7]).unwrap();
        assert_eq!((c.mean, c.max, c.rmse), (0.5, 0.5, 0.5));
        let c = channel_stats(&[1.0, -1.0]).unwrap();
        assert_eq!((c.mean, c.max, c.rmse), (1.0, 1.0, 1.0));
        let c = channel_stats(&[0.0, 2.0]).unwrap();
        assert_eq!((c.mean, c.max), (1.0, 2.0));
        assert!((c.rmse - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(channel_stats(&[]), Err(Error::EmptySeries)));
    }

    #[test]
    fn mape_examples() {
        let t = [1.0, -2.0, 3.0];
        assert_eq!(mape(&t, &t, 0.1).unwrap().percent, 0.0);
        let est: Vec<f64> = t.iter().map(|v| 1.1 * v).collect();
        assert!((mape(&est, &t, 0.1).unwrap().percent - 10.0).abs() < 1e-12);
        let m = mape(&[1.1, 1.8, 4.4], &[1.0, 2.0, 4.0], 0.5).unwrap();
        assert!((m.percent - 10.0).abs() < 1e-12);
        let m = mape(&[1.0, 5.0], &[0.001, 4.0], 0.01).unwrap();
        assert_eq!((m.excluded, m.total), (1, 2));
        assert!(matches!(mape(&[1.0], &[0.0], 0.1), Err(Error::AllSamplesExcluded(1))));
        assert!(mape(&[1.0], &[1.0, 2.0], 0.1).is_err());
        assert!(mape(&[1.0], &[1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn mean_rmse_max_ordering(v in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            let s = channel_stats(&v).unwrap();
            prop_assert!(0.0 <= s.mean && s.mean <= s.rmse && s.rmse <= s.max);
        }

        #[test]
        fn mape_scale_invariant(
            t in prop::collection::vec(0.5f64..10.0, 1..50),
            noise in prop::collection::vec(-0.3f64..0.3, 50),
            c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        ) {
            let e: Vec<f64> = t.iter().zip(&noise).map(|(a, n)| a * (1.0 + n)).collect();
            let base = mape(&e, &t, 0.1).unwrap().percent;
            let es: Vec<f64> = e.iter().map(|x| c * x).collect();
            let ts: Vec<f64> = t.iter().map(|x| c * x).collect();
            let scaled = mape(&es, &ts, 0.1 * c.abs()).unwrap().percent;
            prop_assert!((base - scaled).abs() < 1e-9 * base.max(1.0));
        }
    }
}
