//! Random caIMDP generation and the continuous-versus-sampled comparison
//! harness.
//!
//! The generator produces concave/convex-class instances over a cylinder
//! action set by default: a random row-stochastic base matrix `B` is widened
//! into action-dependent quadratic bounds
//!
//! ```text
//! lower(a) = B(1−ε) + Bεκ(1 − ‖a − z‖²/D²)    (concave)
//! upper(a) = B(1+ε) − Bεκ(1 − ‖a − z'‖²/D²)   (convex)
//! ```
//!
//! with per-entry anchor points `z, z'` drawn from the action set's bounding
//! box and `D` the bounding-box diagonal, so the bracket stays in `[0, 1]`
//! and for `κ ≤ 1` the bounds straddle `B` and inherit its row sums. Rewards
//! are uniform in `[0, 10]`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bellman::{discrete_vi, synthesize, BellmanError, SynthesisReport};
use crate::model::{
    validate_pointwise, ActionSet, BoundFunction, Caimdp, ModelError, Shape,
    DEFAULT_VALIDATION_SAMPLES,
};
use crate::optimizers::OptimizerConfig;
use crate::sampling;

const MAX_GENERATION_RETRIES: usize = 10;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("generation failed after {MAX_GENERATION_RETRIES} attempts: {0}")]
    GenerationFailed(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bellman(#[from] BellmanError),
}

/// Parameters of the random-instance generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_states: usize,
    pub action_set: ActionSet,
    /// Interval half-width ε ∈ [0, 0.5); ε = 0 degenerates to an ordinary
    /// Markov chain.
    pub eps: f64,
    /// Curvature scale κ ∈ [0, 1].
    pub kappa: f64,
    pub seed: u64,
}

/// The default 3-d action set: a disk of squared radius 0.2 around
/// (0.5, 0.5) crossed with the unit interval.
pub fn cylinder_action_set() -> ActionSet {
    ActionSet::Product {
        factors: vec![
            ActionSet::Ball {
                center: vec![0.5, 0.5],
                radius: 0.2f64.sqrt(),
            },
            ActionSet::Box {
                lo: vec![0.0],
                hi: vec![1.0],
            },
        ],
    }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_states: 25,
            action_set: cylinder_action_set(),
            eps: 0.2,
            kappa: 0.5,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_states == 0 {
            return Err(ExperimentError::InvalidConfig(
                "n_states must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.eps) {
            return Err(ExperimentError::InvalidConfig(
                "eps must lie in [0, 0.5)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(ExperimentError::InvalidConfig(
                "kappa must lie in [0, 1]".into(),
            ));
        }
        if self.eps > 0.0 && self.n_states < 2 {
            return Err(ExperimentError::InvalidConfig(
                "widened intervals need at least 2 states to keep upper bounds below 1".into(),
            ));
        }
        self.action_set.validate()?;
        Ok(())
    }
}

/// Generate a validated random instance. With ε, κ > 0 the result is in the
/// concave/convex class; the output always passes pointwise validation on
/// 256 quasi-random actions (the construction guarantees it, the check runs
/// anyway and generation retries on failure).
pub fn generate(cfg: &GeneratorConfig) -> Result<Caimdp, ExperimentError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last_failure = String::new();
    for _ in 0..MAX_GENERATION_RETRIES {
        let imdp = draw_instance(cfg, &mut rng)?;
        let actions = imdp.default_validation_actions(DEFAULT_VALIDATION_SAMPLES);
        let report = validate_pointwise(&imdp, &actions)?;
        if report.passed() {
            return Ok(imdp);
        }
        last_failure = format!("worst violation {:.3e}", report.worst_violation());
    }
    Err(ExperimentError::GenerationFailed(last_failure))
}

fn draw_instance(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<Caimdp, ExperimentError> {
    let n = cfg.n_states;
    let dim = cfg.action_set.dim();
    let (box_lo, box_hi) = cfg.action_set.bounding_box();
    let diameter = cfg.action_set.diameter_bound();

    // Row-stochastic base matrix; rows are blended toward uniform when a
    // single entry is so large that widening by (1+ε) would push the upper
    // bound past 1.
    let cap = (1.0 - 1e-9) / (1.0 + cfg.eps);
    let mut base = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let sum: f64 = row.iter().sum();
        for x in &mut row {
            *x /= sum;
        }
        let max = row.iter().cloned().fold(0.0f64, f64::max);
        if n > 1 && max > cap {
            let theta = ((max - cap) / (max - 1.0 / n as f64) + 1e-12).min(1.0);
            for x in &mut row {
                *x = (1.0 - theta) * *x + theta / n as f64;
            }
        }
        base.push(row);
    }

    let draw_anchor = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim)
            .map(|d| {
                if box_hi[d] > box_lo[d] {
                    rng.gen_range(box_lo[d]..box_hi[d])
                } else {
                    box_lo[d]
                }
            })
            .collect()
    };

    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for q in 0..n {
        let mut lo_row = Vec::with_capacity(n);
        let mut hi_row = Vec::with_capacity(n);
        for q2 in 0..n {
            let b = base[q][q2];
            let scale = b * cfg.eps * cfg.kappa;
            if scale == 0.0 || diameter == 0.0 {
                lo_row.push(BoundFunction::constant(dim, b * (1.0 - cfg.eps)));
                hi_row.push(BoundFunction::constant(dim, b * (1.0 + cfg.eps)));
                continue;
            }
            let d2 = diameter * diameter;
            let z = draw_anchor(rng);
            let z2 = draw_anchor(rng);
            // lower(a) = b(1−ε) + scale·(1 − ‖a − z‖²/D²), expanded into
            // ½aᵀHa + cᵀa + d form with H = −(2·scale/D²)·I.
            let lo_bound = anchored_quadratic(-scale / d2, &z, b * (1.0 - cfg.eps) + scale)?;
            // upper(a) = b(1+ε) − scale·(1 − ‖a − z'‖²/D²).
            let hi_bound = anchored_quadratic(scale / d2, &z2, b * (1.0 + cfg.eps) - scale)?;
            lo_row.push(lo_bound);
            hi_row.push(hi_bound);
        }
        lower.push(lo_row);
        upper.push(hi_row);
    }

    let reward: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
    Ok(Caimdp::new(cfg.action_set.clone(), lower, upper, reward)?)
}

/// `coef·‖a − z‖² + level` as a quadratic bound function.
fn anchored_quadratic(coef: f64, z: &[f64], level: f64) -> Result<BoundFunction, ModelError> {
    let dim = z.len();
    let mut hessian = vec![vec![0.0; dim]; dim];
    for (d, row) in hessian.iter_mut().enumerate() {
        row[d] = 2.0 * coef;
    }
    let linear: Vec<f64> = z.iter().map(|zi| -2.0 * coef * zi).collect();
    let offset = level + coef * z.iter().map(|zi| zi * zi).sum::<f64>();
    let shape = if coef < 0.0 { Shape::Concave } else { Shape::Convex };
    BoundFunction::quadratic(hessian, linear, offset, shape)
}

/// One row of a [`ComparisonReport`]: either a sampled-action run (with the
/// sample count) or the continuous-synthesis reference row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Number of sampled actions; `None` marks the continuous row.
    pub samples: Option<usize>,
    pub repetitions: usize,
    pub mean_cpu_seconds: f64,
    /// Mean over repetitions of `100·max_q (R⋆(q) − R_s(q))/R⋆(q)`.
    pub mean_max_subopt_pct: f64,
}

/// Continuous-versus-sampled synthesis comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub horizon: usize,
    pub gamma: f64,
    pub continuous: ComparisonRow,
    pub sampled: Vec<ComparisonRow>,
    /// Optimal continuous values per state.
    pub r_star: Vec<f64>,
    /// Per sample count, mean over repetitions of the per-state sampled
    /// values (same order as `sampled`).
    pub r_sampled_mean: Vec<Vec<f64>>,
    /// Worst (most negative slack) value of `R_s(q) − R⋆(q)` seen across
    /// all states, counts, and repetitions; positive values mean a sampled
    /// run beat the continuous one, which can happen only within solver
    /// tolerance.
    pub max_sampled_excess: f64,
}

impl ComparisonReport {
    /// CSV with one row per sample count plus the continuous row:
    /// `s,mean_cpu_seconds,mean_max_subopt_pct`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,mean_cpu_seconds,mean_max_subopt_pct\n");
        for row in &self.sampled {
            out.push_str(&format!(
                "{},{},{}\n",
                row.samples.expect("sampled row"),
                row.mean_cpu_seconds,
                row.mean_max_subopt_pct
            ));
        }
        out.push_str(&format!(
            "continuous,{},{}\n",
            self.continuous.mean_cpu_seconds, self.continuous.mean_max_subopt_pct
        ));
        out
    }

    /// Per-state reward curves: `state,R_star,R_<s1>,R_<s2>,...`.
    pub fn curves_csv(&self) -> String {
        let mut header = String::from("state,R_star");
        for row in &self.sampled {
            header.push_str(&format!(",R_{}", row.samples.expect("sampled row")));
        }
        header.push('\n');
        let mut out = header;
        for q in 0..self.r_star.len() {
            out.push_str(&format!("{},{}", q, self.r_star[q]));
            for values in &self.r_sampled_mean {
                out.push_str(&format!(",{}", values[q]));
            }
            out.push('\n');
        }
        out
    }

    pub fn zero_timings(&mut self) {
        self.continuous.mean_cpu_seconds = 0.0;
        for row in &mut self.sampled {
            row.mean_cpu_seconds = 0.0;
        }
    }
}

fn derive_seed(base: u64, samples: usize, repetition: usize) -> u64 {
    base.wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add((samples as u64).wrapping_mul(0xBF58476D1CE4E5B9))
        .wrapping_add((repetition as u64).wrapping_mul(0x94D049BB133111EB))
}

/// Run continuous synthesis once for the reference values, then for each
/// sample count and repetition draw that many uniform actions from the set,
/// run discrete value iteration, and aggregate suboptimality percentages and
/// wall time.
pub fn compare(
    imdp: &Caimdp,
    sample_counts: &[usize],
    repetitions: usize,
    horizon: usize,
    gamma: f64,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<ComparisonReport, ExperimentError> {
    if sample_counts.contains(&0) {
        return Err(ExperimentError::InvalidConfig(
            "sample counts must be at least 1".into(),
        ));
    }
    if repetitions == 0 {
        return Err(ExperimentError::InvalidConfig(
            "repetitions must be at least 1".into(),
        ));
    }

    let started = Instant::now();
    let continuous: SynthesisReport = synthesize(imdp, horizon, gamma, cfg)?;
    let continuous_seconds = started.elapsed().as_secs_f64();
    let r_star = continuous.v0().to_vec();

    let n = imdp.n_states();
    let mut sampled_rows = Vec::with_capacity(sample_counts.len());
    let mut r_sampled_mean = Vec::with_capacity(sample_counts.len());
    let mut max_sampled_excess = f64::NEG_INFINITY;
    for &s in sample_counts {
        let mut subopt_sum = 0.0;
        let mut seconds_sum = 0.0;
        let mut value_mean = vec![0.0; n];
        for rep in 0..repetitions {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s, rep));
            let actions = sampling::uniform_in_set(imdp.action_set(), s, &mut rng)
                .map_err(ExperimentError::Sampling)?;
            let rep_started = Instant::now();
            let report = discrete_vi(imdp, &actions, horizon, gamma)?;
            seconds_sum += rep_started.elapsed().as_secs_f64();

            let mut worst_pct = 0.0f64;
            for q in 0..n {
                let sampled_value = report.v0()[q];
                value_mean[q] += sampled_value / repetitions as f64;
                max_sampled_excess = max_sampled_excess.max(sampled_value - r_star[q]);
                if r_star[q] > 0.0 {
                    worst_pct = worst_pct.max(100.0 * (r_star[q] - sampled_value) / r_star[q]);
                }
            }
            subopt_sum += worst_pct;
        }
        sampled_rows.push(ComparisonRow {
            samples: Some(s),
            repetitions,
            mean_cpu_seconds: seconds_sum / repetitions as f64,
            mean_max_subopt_pct: subopt_sum / repetitions as f64,
        });
        r_sampled_mean.push(value_mean);
    }

    Ok(ComparisonReport {
        seed,
        horizon,
        gamma,
        continuous: ComparisonRow {
            samples: None,
            repetitions: 1,
            mean_cpu_seconds: continuous_seconds,
            mean_max_subopt_pct: 0.0,
        },
        sampled: sampled_rows,
        r_star,
        r_sampled_mean,
        max_sampled_excess,
    })
}
