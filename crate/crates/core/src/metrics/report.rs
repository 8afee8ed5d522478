use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SampleReport;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::Difficulty;
use crate::manifest::{Manifest, PredictionRecord};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub stratum: String,
    pub count: usize,
    pub sr_p: f64,
    pub sr_r: f64,
    pub sr_f1: f64,
    pub op: f64,
    pub or: f64,
    pub f1_rel: f64,
    pub mp_ned: f64,
    pub format_rate: f64,
}

impl StratumSummary {
    fn from_samples<'a>(stratum: &str, samples: impl Iterator<Item = &'a SampleReport>) -> Self {
        let mut s = StratumSummary {
            stratum: stratum.to_string(),
            count: 0,
            sr_p: 0.0,
            sr_r: 0.0,
            sr_f1: 0.0,
            op: 0.0,
            or: 0.0,
            f1_rel: 0.0,
            mp_ned: 0.0,
            format_rate: 0.0,
        };
        for r in samples {
            s.count += 1;
            s.sr_p += r.sr.precision;
            s.sr_r += r.sr.recall;
            s.sr_f1 += r.sr.f1;
            s.op += r.triplet.precision;
            s.or += r.triplet.recall;
            s.f1_rel += r.triplet.f1;
            s.mp_ned += r.mp_ned;
            s.format_rate += f64::from(u8::from(r.format_ok));
        }
        if s.count > 0 {
            let n = s.count as f64;
            for v in [
                &mut s.sr_p,
                &mut s.sr_r,
                &mut s.sr_f1,
                &mut s.op,
                &mut s.or,
                &mut s.f1_rel,
                &mut s.mp_ned,
                &mut s.format_rate,
            ] {
                *v /= n;
            }
        }
        s
    }
}

/// Per-difficulty means plus an `Overall` row weighted by sample count.
/// Empty strata report zeros with `count == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub schema_version: u32,
    pub notes: Vec<String>,
    pub strata: Vec<StratumSummary>,
}

pub const OVERALL: &str = "Overall";

impl StratifiedReport {
    pub fn from_samples(samples: &[SampleReport]) -> Self {
        let mut strata: Vec<StratumSummary> = Difficulty::ALL
            .iter()
            .map(|d| StratumSummary::from_samples(d.label(), samples.iter().filter(|s| s.difficulty == *d)))
            .collect();
        strata.push(StratumSummary::from_samples(OVERALL, samples.iter()));
        StratifiedReport {
            schema_version: SCHEMA_VERSION,
            notes: vec![
                "mp_ned is 1.0 for an obstructed target whose think section yields no path".into(),
                "missing or malformed outputs score zero on every metric and 1.0 on mp_ned".into(),
            ],
            strata,
        }
    }

    pub fn stratum(&self, difficulty: Difficulty) -> &StratumSummary {
        self.strata
            .iter()
            .find(|s| s.stratum == difficulty.label())
            .expect("every difficulty has a row")
    }

    pub fn overall(&self) -> &StratumSummary {
        self.strata.last().expect("overall row")
    }

    /// Fixed-width text table, one row per stratum.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "stratum", "count", "SR-P", "SR-R", "SR-F1", "OP", "OR", "F1_rel", "MP_NED", "format"
        );
        for s in &self.strata {
            if s.count == 0 {
                let _ = writeln!(
                    out,
                    "{:<8} {:>6}{}",
                    s.stratum,
                    0,
                    format!(" {:>7}", "-").repeat(8)
                );
                continue;
            }
            let _ = writeln!(
                out,
                "{:<8} {:>6} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
                s.stratum, s.count, s.sr_p, s.sr_r, s.sr_f1, s.op, s.or, s.f1_rel, s.mp_ned, s.format_rate
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "# {n}");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DatasetEvaluation {
    /// One report per manifest sample, in manifest order.
    pub samples: Vec<SampleReport>,
    pub report: StratifiedReport,
}

/// Scores every manifest sample. Samples without a prediction count as
/// format failures; predictions naming unknown samples are an error, and so
/// is an empty prediction set against a non-empty manifest.
pub fn evaluate_dataset(
    predictions: &[PredictionRecord],
    manifest: &Manifest,
    radius: f64,
    exec: Execution,
) -> Result<DatasetEvaluation> {
    if predictions.is_empty() && !manifest.is_empty() {
        return Err(Error::Manifest(format!(
            "no predictions for a manifest of {} samples",
            manifest.len()
        )));
    }
    let aligned = manifest.align(predictions)?;
    let pairs: Vec<_> = manifest.samples().iter().zip(aligned).collect();
    let samples = exec.map(&pairs, |(gt, pred)| match pred {
        Some(p) => gt.score(&p.output, radius),
        None => SampleReport::format_failure(&gt.sample_id, &gt.record),
    });
    let report = StratifiedReport::from_samples(&samples);
    Ok(DatasetEvaluation { samples, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::PrfScores;

    fn sample(d: Difficulty, f1: f64, mp: f64) -> SampleReport {
        SampleReport {
            sample_id: String::new(),
            difficulty: d,
            sr: PrfScores::new(f1, f1),
            triplet: PrfScores::new(f1, f1),
            mp_ned: mp,
            format_ok: true,
        }
    }

    #[test]
    fn overall_is_sample_weighted() {
        let samples = vec![
            sample(Difficulty::Easy, 1.0, 0.0),
            sample(Difficulty::Easy, 1.0, 0.0),
            sample(Difficulty::Easy, 1.0, 0.0),
            sample(Difficulty::Hard, 0.0, 1.0),
        ];
        let r = StratifiedReport::from_samples(&samples);
        assert_eq!(r.stratum(Difficulty::Easy).sr_f1, 1.0);
        assert_eq!(r.stratum(Difficulty::Hard).mp_ned, 1.0);
        assert_eq!(r.stratum(Difficulty::Medium).count, 0);
        assert_eq!(r.overall().count, 4);
        assert_eq!(r.overall().sr_f1, 0.75);
        assert_eq!(r.overall().mp_ned, 0.25);
        assert!(r.to_table().lines().count() >= 6);
    }
}
