//! Closed-form concentration, sample-complexity and regret bounds.

use serde::{Deserialize, Serialize};

use crate::bandit::check_delta;
use crate::error::{Error, Result};

fn check_open_unit(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {value}")))
    }
}

fn check_gap(name: &str, gap: f64) -> Result<()> {
    if gap > 0.0 && gap <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1], got {gap}")))
    }
}

/// Simultaneous deviation bound for all categories after `n` draws.
pub fn dkw_epsilon(n: u64, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("DKW epsilon needs n >= 1"));
    }
    check_delta(delta)?;
    Ok(((2.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Samples saved per node by the DKW bound over a union-bounded Hoeffding
/// bound at accuracy `epsilon`.
pub fn hoeffding_savings(arms: usize, epsilon: f64) -> Result<f64> {
    if arms < 2 {
        return Err(Error::domain(format!("need at least two arms, got {arms}")));
    }
    check_open_unit("epsilon", epsilon)?;
    Ok((arms as f64).ln() / (2.0 * epsilon * epsilon))
}

/// Draws after which the empirical argmax is the true best label with
/// probability at least `1 - delta`. Real-valued; callers take the ceiling.
pub fn min_samples(delta: f64, gap: f64) -> Result<f64> {
    check_delta(delta)?;
    check_gap("gap", gap)?;
    Ok(2.0 * (2.0 / delta).ln() / (gap * gap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub arms: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub gap: f64,
    pub gap_min: f64,
    pub horizon: u64,
    pub r_max: f64,
    pub nodes: u64,
    /// Fixed samples per node under majority vote.
    pub samples: u64,
    pub episodes: u64,
    /// Universal constant of the adaptive regret bound.
    pub constant: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            arms: 3,
            delta: 0.05,
            epsilon: 0.05,
            gap: 0.5,
            gap_min: 0.4,
            horizon: 3,
            r_max: 1.0,
            nodes: 3,
            samples: 5,
            episodes: 100,
            constant: 1.0,
        }
    }
}

impl BoundConfig {
    fn check_regret_inputs(&self) -> Result<()> {
        check_gap("gap_min", self.gap_min)?;
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::domain(format!("r_max must be positive, got {}", self.r_max)));
        }
        Ok(())
    }
}

/// Cumulative regret bound for fixed majority voting; linear in episodes.
pub fn mv_regret_bound(cfg: &BoundConfig) -> Result<f64> {
    cfg.check_regret_inputs()?;
    let decay = (-(cfg.samples as f64) * cfg.gap_min * cfg.gap_min / 2.0).exp();
    Ok(2.0 * cfg.horizon as f64 * cfg.r_max * cfg.nodes as f64 * cfg.episodes as f64 * decay)
}

/// Cumulative regret bound for adaptive sampling; logarithmic in episodes.
pub fn adaptive_regret_bound(cfg: &BoundConfig) -> Result<f64> {
    cfg.check_regret_inputs()?;
    if cfg.episodes < 2 {
        return Err(Error::domain("adaptive regret bound needs at least two episodes"));
    }
    if cfg.constant.is_nan() || cfg.constant <= 0.0 {
        return Err(Error::domain(format!(
            "constant must be positive, got {}",
            cfg.constant
        )));
    }
    let scale = cfg.horizon as f64 * cfg.r_max * cfg.arms as f64 * cfg.nodes as f64;
    Ok(cfg.constant * scale * (cfg.episodes as f64).ln() / (cfg.gap_min * cfg.gap_min))
}

pub fn regret_ratio(cfg: &BoundConfig) -> Result<f64> {
    let adaptive = adaptive_regret_bound(cfg)?;
    let mv = mv_regret_bound(cfg)?;
    if mv == 0.0 {
        return Err(Error::DivisionByZero("majority-vote regret bound is zero".into()));
    }
    Ok(adaptive / mv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub config: BoundConfig,
    pub dkw_epsilon: f64,
    pub hoeffding_savings: f64,
    pub min_samples_per_arm: f64,
    pub min_samples_total: f64,
    pub mv_regret_bound: f64,
    pub adaptive_regret_bound: f64,
    pub regret_ratio: f64,
}

impl BoundsReport {
    /// Evaluates every calculator. The DKW epsilon uses `samples` as its n.
    pub fn evaluate(cfg: &BoundConfig) -> Result<Self> {
        let per_arm = min_samples(cfg.delta, cfg.gap)?;
        Ok(BoundsReport {
            config: *cfg,
            dkw_epsilon: dkw_epsilon(cfg.samples, cfg.delta)?,
            hoeffding_savings: hoeffding_savings(cfg.arms, cfg.epsilon)?,
            min_samples_per_arm: per_arm,
            min_samples_total: per_arm * cfg.arms as f64,
            mv_regret_bound: mv_regret_bound(cfg)?,
            adaptive_regret_bound: adaptive_regret_bound(cfg)?,
            regret_ratio: regret_ratio(cfg)?,
        })
    }

    pub fn render_table(&self) -> String {
        let c = &self.config;
        let rows = [
            (
                format!("dkw_epsilon(n={}, delta={})", c.samples, c.delta),
                self.dkw_epsilon,
            ),
            (
                format!("hoeffding_savings(K={}, eps={})", c.arms, c.epsilon),
                self.hoeffding_savings,
            ),
            (
                format!("min_samples per arm (delta={}, gap={})", c.delta, c.gap),
                self.min_samples_per_arm,
            ),
            (format!("min_samples total (x{} arms)", c.arms), self.min_samples_total),
            (
                format!("mv_regret_bound(T={}, n={})", c.episodes, c.samples),
                self.mv_regret_bound,
            ),
            (
                format!("adaptive_regret_bound(T={}, C={})", c.episodes, c.constant),
                self.adaptive_regret_bound,
            ),
            ("regret_ratio (adaptive / mv)".to_string(), self.regret_ratio),
        ];
        let width = rows.iter().map(|(name, _)| name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, value) in rows {
            out.push_str(&format!("{name:<width$}  {value:>14.4}\n"));
        }
        out
    }
}
