use super::{EvalError, EvalReport};
use crate::train::TrainConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Layer,
    Rank,
    Curvature,
    /// Grid values are upper length limits; each point covers the lengths
    /// above the previous limit.
    SentenceLength,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Layer => "layer",
            SweepAxis::Rank => "rank",
            SweepAxis::Curvature => "curvature",
            SweepAxis::SentenceLength => "sentence_length",
        }
    }

    /// The base config with this axis set to `value`. Layer and length
    /// points leave the training config unchanged.
    pub fn apply(self, base: &TrainConfig, value: f64) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Rank => cfg.rank = value as usize,
            SweepAxis::Curvature => cfg.curvature = value,
            SweepAxis::Layer | SweepAxis::SentenceLength => {}
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: Option<EvalReport>,
    /// Why the point has no report.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub base: TrainConfig,
    pub points: Vec<SweepPoint>,
}

/// Runs `run` once per grid value with the axis applied to `base`. A failed
/// point is kept with its error as a note and the sweep continues.
pub fn sweep<F>(axis: SweepAxis, grid: &[f64], base: &TrainConfig, mut run: F) -> Result<SweepReport, EvalError>
where
    F: FnMut(&TrainConfig, f64) -> Result<EvalReport, String>,
{
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let points = grid
        .iter()
        .map(|&value| match run(&axis.apply(base, value), value) {
            Ok(report) => SweepPoint { value, report: Some(report), note: None },
            Err(note) => {
                log::warn!("{} = {value} skipped: {note}", axis.as_str());
                SweepPoint { value, report: None, note: Some(note) }
            }
        })
        .collect();
    Ok(SweepReport {
        axis,
        base: base.clone(),
        points,
    })
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes") + "\n"
    }

    /// One row per point: the axis value then every top-level metric, `NA`
    /// where missing.
    pub fn to_tsv(&self) -> String {
        let names: BTreeSet<&String> = self
            .points
            .iter()
            .filter_map(|p| p.report.as_ref())
            .flat_map(|r| r.metrics.keys())
            .collect();
        let mut out = self.axis.as_str().to_string();
        for n in &names {
            out.push('\t');
            out.push_str(n);
        }
        out.push('\n');
        for p in &self.points {
            let _ = write!(out, "{}", p.value);
            for n in &names {
                match p.report.as_ref().and_then(|r| r.metrics.get(*n)) {
                    Some(v) => write!(out, "\t{v}").unwrap(),
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{ConfigEcho, REPORT_FORMAT};
    use crate::probes::{Geometry, Task};
    use std::collections::BTreeMap;

    fn report(rank: usize) -> EvalReport {
        EvalReport {
            format: REPORT_FORMAT.into(),
            config: ConfigEcho { task: Task::Distance, geometry: Geometry::Poincare, rank, curvature: Some(1.0), layer: None },
            conventions: BTreeMap::new(),
            sentences: 1,
            metrics: BTreeMap::from([("uuas".to_string(), rank as f64 / 10.0)]),
            skipped: BTreeMap::new(),
            buckets: Vec::new(),
            edge_lengths: None,
        }
    }

    #[test]
    fn points_follow_the_grid_and_failures_become_notes() {
        let base = TrainConfig::default();
        let rep = sweep(SweepAxis::Rank, &[2.0, 4.0, 8.0], &base, |cfg, _| {
            if cfg.rank == 4 {
                Err("missing".into())
            } else {
                Ok(report(cfg.rank))
            }
        })
        .unwrap();
        assert_eq!(rep.points.len(), 3);
        assert_eq!(rep.points[1].note.as_deref(), Some("missing"));
        assert_eq!(rep.to_tsv(), "rank\tuuas\n2\t0.2\n4\tNA\n8\t0.8\n");
        assert!(matches!(sweep(SweepAxis::Rank, &[], &base, |_, _| Ok(report(1))), Err(EvalError::EmptyGrid)));
        assert_eq!(SweepAxis::Curvature.apply(&base, 0.5).curvature, 0.5);
    }
}
