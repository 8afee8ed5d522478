//! Verifiable rewards for reinforcement fine-tuning.
//!
//! `r = lambda_fmt * r_fmt + lambda_task * r_task`, where `r_fmt` is the
//! binary format check and `r_task` is the IoU between the predicted and
//! ground-truth top-level obstructor sets. Group advantages subtract the
//! group mean from each reward.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::manifest::{GroundTruthSample, Manifest, PredictionRecord};
use crate::metrics::mp_ned;
use crate::scene::ObjectId;
use crate::trace::{check_format, Setting};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub lambda_fmt: f64,
    pub lambda_task: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            lambda_fmt: 0.1,
            lambda_task: 0.9,
        }
    }
}

impl RewardConfig {
    pub fn new(lambda_fmt: f64, lambda_task: f64) -> Result<Self> {
        let cfg = RewardConfig {
            lambda_fmt,
            lambda_task,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.lambda_fmt) || !ok(self.lambda_task) {
            return Err(Error::Domain(format!(
                "reward weights must be finite and >= 0, got ({}, {})",
                self.lambda_fmt, self.lambda_task
            )));
        }
        if self.lambda_fmt == 0.0 && self.lambda_task == 0.0 {
            return Err(Error::Domain("reward weights are both zero".into()));
        }
        Ok(())
    }

    /// Reward of a perfect output.
    pub fn max_reward(&self) -> f64 {
        self.lambda_fmt + self.lambda_task
    }
}

pub fn format_reward(text: &str, setting: Setting) -> u8 {
    u8::from(check_format(text, setting))
}

/// Set IoU of predicted and ground-truth answers.
pub fn task_reward(pred: &BTreeSet<ObjectId>, gt: &BTreeSet<ObjectId>) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::Domain("ground-truth answer set is empty".into()));
    }
    let inter = pred.intersection(gt).count();
    let union = pred.union(gt).count();
    Ok(inter as f64 / union as f64)
}

/// Per-sample reward line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub sample_id: String,
    pub r_fmt: u8,
    pub r_task: f64,
    pub r: f64,
    /// `1 - MP_NED`; reported, never mixed into `r`.
    pub r_path: f64,
}

pub fn combined_reward(text: &str, gt: &GroundTruthSample, cfg: &RewardConfig, radius: f64) -> RewardRecord {
    let r_fmt = format_reward(text, gt.setting);
    let (r_task, r_path) = if r_fmt == 1 {
        let resolved = gt.resolve(text, radius);
        let task =
            task_reward(&resolved.answer, &gt.record.answer_set()).expect("answer sets are never empty");
        (
            task,
            1.0 - mp_ned(&resolved.think_paths, &gt.record.obstruction_paths),
        )
    } else {
        (0.0, 0.0)
    };
    RewardRecord {
        sample_id: gt.sample_id.clone(),
        r_fmt,
        r_task,
        r: cfg.lambda_fmt * f64::from(r_fmt) + cfg.lambda_task * r_task,
        r_path,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRewards {
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
}

pub fn group_advantages(rewards: &[f64]) -> Result<GroupRewards> {
    if rewards.is_empty() {
        return Err(Error::Domain("empty reward group".into()));
    }
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(GroupRewards {
        values: rewards.to_vec(),
        advantages: rewards.iter().map(|r| r - mean).collect(),
    })
}

/// Rewards for every prediction, in prediction order.
pub fn reward_batch(
    predictions: &[PredictionRecord],
    manifest: &Manifest,
    cfg: &RewardConfig,
    radius: f64,
    exec: Execution,
) -> Result<Vec<RewardRecord>> {
    cfg.validate()?;
    manifest.align(predictions)?;
    Ok(exec.map(predictions, |p| {
        let gt = manifest.get(&p.sample_id).expect("aligned above");
        combined_reward(&p.output, gt, cfg, radius)
    }))
}
