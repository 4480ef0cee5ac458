//! Finite-N player system driven by affine feedbacks.
//!
//! Players interact through the empirical mean, which is recomputed at every
//! Euler–Maruyama step on the model grid. Each `(repeat, player)` pair draws
//! from its own counter-based stream, so policy comparisons share noise
//! (common random numbers) and results do not depend on thread scheduling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, SolveError};
use crate::lqmodel::{LQModel, MeanFlow};
use crate::policy::FeedbackPolicy;
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(rename = "N")]
    pub n_players: usize,
    pub n_repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(n_players: usize, n_repeats: usize, seed: u64) -> Result<Self, ModelError> {
        let cfg = Self {
            n_players,
            n_repeats,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_players < 2 {
            return Err(ModelError::Parameter(format!("N must be at least 2, got {}", self.n_players)));
        }
        if self.n_repeats < 1 {
            return Err(ModelError::Parameter("n_repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean and standard error of a list of independent replicates.
fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Permutation-invariant sum: the same multiset of values always gives the
/// same bits.
fn sorted_mean(values: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(values);
    scratch.sort_unstable_by(f64::total_cmp);
    scratch.iter().sum::<f64>() / values.len() as f64
}

struct RepeatOutcome {
    mean_path: Vec<f64>,
    average_cost: f64,
    first_player_cost: f64,
}

/// Player 0 follows `first`, everyone else `rest`. `labels[i]` selects the
/// random stream of player `i`.
fn run_repeat(
    model: &LQModel,
    first: &FeedbackPolicy,
    rest: &FeedbackPolicy,
    n_players: usize,
    seed: u64,
    repeat: u64,
    labels: Option<&[u64]>,
) -> RepeatOutcome {
    let grid = model.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let sdt = model.sigma * dt.sqrt();
    let mut rngs: Vec<ChaCha8Rng> = (0..n_players)
        .map(|i| stream(seed, repeat, labels.map_or(i as u64, |l| l[i])))
        .collect();
    let mut x = vec![model.x0; n_players];
    let mut cost = vec![0.0; n_players];
    let mut scratch = Vec::with_capacity(n_players);
    let mut mean_path = Vec::with_capacity(n + 1);
    let mut mean = model.x0;
    mean_path.push(mean);
    let policy_of = |i: usize| if i == 0 { first } else { rest };
    let running = |k: usize, i: usize, x: f64, mean: f64| {
        let alpha = policy_of(i).at_node(k, x);
        let r = model.m[k] * x + model.mbar[k] * mean;
        0.5 * model.n[k] * alpha * alpha + 0.5 * r * r
    };
    for k in 0..n {
        for i in 0..n_players {
            let f_left = running(k, i, x[i], mean);
            let alpha = policy_of(i).at_node(k, x[i]);
            let drift = model.a[k] * x[i] + model.abar[k] * mean + model.beta[k] + model.b[k] * alpha;
            let z: f64 = rngs[i].sample(StandardNormal);
            x[i] += drift * dt + sdt * z;
            cost[i] += 0.5 * dt * f_left;
        }
        mean = sorted_mean(&x, &mut scratch);
        mean_path.push(mean);
        for i in 0..n_players {
            cost[i] += 0.5 * dt * running(k + 1, i, x[i], mean);
        }
    }
    for i in 0..n_players {
        let r = model.q * x[i] + model.qbar * mean;
        cost[i] += 0.5 * r * r;
    }
    RepeatOutcome {
        mean_path,
        average_cost: sorted_mean(&cost, &mut scratch),
        first_player_cost: cost[0],
    }
}

fn run_ensemble(
    model: &LQModel,
    first: &FeedbackPolicy,
    rest: &FeedbackPolicy,
    cfg: &SimulationConfig,
    labels: Option<&[u64]>,
) -> Result<Vec<RepeatOutcome>, SolveError> {
    cfg.validate()?;
    for p in [first, rest] {
        if p.grid() != model.grid() {
            return Err(ModelError::GridMismatch("policy grid differs from model grid".into()).into());
        }
    }
    if let Some(l) = labels {
        if l.len() != cfg.n_players {
            return Err(ModelError::Parameter("one stream label per player required".into()).into());
        }
    }
    Ok((0..cfg.n_repeats as u64)
        .into_par_iter()
        .map(|r| run_repeat(model, first, rest, cfg.n_players, cfg.seed, r, labels))
        .collect())
}

/// `E μ̄^N` under Euler stepping: the empirical-mean recursion is linear, so its
/// expectation follows the same scheme without noise.
pub fn euler_reference_mean(model: &LQModel, policy: &FeedbackPolicy) -> Vec<f64> {
    let grid = model.grid();
    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.n_nodes());
    let mut mu = model.x0;
    out.push(mu);
    for k in 0..grid.n_steps() {
        let alpha = policy.at_node(k, mu);
        mu += (model.a[k] * mu + model.abar[k] * mu + model.beta[k] + model.b[k] * alpha) * dt;
        out.push(mu);
    }
    out
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n_players: usize,
    pub n_repeats: usize,
    /// Empirical mean path averaged over repeats.
    #[serde(serialize_with = "serialize_flow")]
    pub empirical_mean_flow: MeanFlow,
    /// Standard error of the terminal empirical mean over repeats.
    pub empirical_mean_T_se: f64,
    /// Expected empirical mean of the Euler scheme.
    #[serde(serialize_with = "serialize_flow")]
    pub reference_mean_flow: MeanFlow,
    /// Average over repeats of `sup_t |μ̄^N_t − E μ̄^N_t|`.
    pub chaos_error: f64,
    pub chaos_error_se: f64,
    pub per_player_cost: f64,
    /// From the spread of per-repeat averages; `NaN` for a single repeat.
    pub per_player_cost_se: f64,
}

fn serialize_flow<S: serde::Serializer>(flow: &MeanFlow, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(flow.values())
}

/// Every player uses `policy`.
pub fn simulate_game(
    model: &LQModel,
    policy: &FeedbackPolicy,
    cfg: &SimulationConfig,
) -> Result<EnsembleStats, SolveError> {
    simulate_game_with_streams(model, policy, cfg, None)
}

/// As [`simulate_game`], with player `i` drawing from stream `labels[i]`.
pub fn simulate_game_with_streams(
    model: &LQModel,
    policy: &FeedbackPolicy,
    cfg: &SimulationConfig,
    labels: Option<&[u64]>,
) -> Result<EnsembleStats, SolveError> {
    let outcomes = run_ensemble(model, policy, policy, cfg, labels)?;
    let grid = *model.grid();
    let reference = euler_reference_mean(model, policy);
    let reps = outcomes.len() as f64;
    let mut avg = vec![0.0; grid.n_nodes()];
    for o in &outcomes {
        for (a, m) in avg.iter_mut().zip(&o.mean_path) {
            *a += m / reps;
        }
    }
    let sup_errors: Vec<f64> = outcomes
        .iter()
        .map(|o| {
            o.mean_path
                .iter()
                .zip(&reference)
                .map(|(m, r)| (m - r).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let costs: Vec<f64> = outcomes.iter().map(|o| o.average_cost).collect();
    let terminal: Vec<f64> = outcomes.iter().map(|o| o.mean_path[grid.n_steps()]).collect();
    let (chaos_error, chaos_error_se) = mean_se(&sup_errors);
    let (per_player_cost, per_player_cost_se) = mean_se(&costs);
    Ok(EnsembleStats {
        n_players: cfg.n_players,
        n_repeats: cfg.n_repeats,
        empirical_mean_flow: MeanFlow::new(grid, avg)?,
        empirical_mean_T_se: mean_se(&terminal).1,
        reference_mean_flow: MeanFlow::new(grid, reference)?,
        chaos_error,
        chaos_error_se,
        per_player_cost,
        per_player_cost_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashGapReport {
    /// `max_d E[J_eq − J_d]` for player 1; positive means a profitable deviation.
    pub gap: f64,
    /// Standard error of the maximizing deviation's paired difference.
    pub gap_se: f64,
    pub best_deviation: usize,
    pub gaps: Vec<f64>,
    pub gap_ses: Vec<f64>,
    pub equilibrium_cost: f64,
}

/// Player 1 tries each deviation while the others keep `equilibrium`.
pub fn nash_gap(
    model: &LQModel,
    equilibrium: &FeedbackPolicy,
    deviations: &[FeedbackPolicy],
    cfg: &SimulationConfig,
) -> Result<NashGapReport, SolveError> {
    if deviations.is_empty() {
        return Err(ModelError::Parameter("at least one deviation is required".into()).into());
    }
    let base = run_ensemble(model, equilibrium, equilibrium, cfg, None)?;
    let base_costs: Vec<f64> = base.iter().map(|o| o.first_player_cost).collect();
    let mut gaps = Vec::with_capacity(deviations.len());
    let mut gap_ses = Vec::with_capacity(deviations.len());
    for dev in deviations {
        let runs = run_ensemble(model, dev, equilibrium, cfg, None)?;
        let diffs: Vec<f64> = base_costs
            .iter()
            .zip(&runs)
            .map(|(eq, o)| eq - o.first_player_cost)
            .collect();
        let (g, se) = mean_se(&diffs);
        gaps.push(g);
        gap_ses.push(se);
    }
    let best = (0..gaps.len())
        .max_by(|&a, &b| gaps[a].total_cmp(&gaps[b]))
        .expect("nonempty");
    Ok(NashGapReport {
        gap: gaps[best],
        gap_se: gap_ses[best],
        best_deviation: best,
        gaps,
        gap_ses,
        equilibrium_cost: mean_se(&base_costs).0,
    })
}

/// Constant shifts of slope and intercept drawn uniformly from `[−width, width]`.
pub fn random_affine_deviations(
    base: &FeedbackPolicy,
    count: usize,
    width: f64,
    seed: u64,
) -> Vec<FeedbackPolicy> {
    let mut rng = stream(seed, u64::MAX, 0);
    (0..count)
        .map(|_| {
            let ds: f64 = rng.random_range(-width..=width);
            let di: f64 = rng.random_range(-width..=width);
            base.perturbed(|_| ds, |_| di)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SocialCostReport {
    pub cost_mfg: f64,
    pub cost_mkv: f64,
    /// `cost_mfg − cost_mkv`; positive when cooperation pays.
    pub difference: f64,
    /// Standard error of the paired per-repeat differences.
    pub se: f64,
}

/// Average player cost when everyone uses the MFG policy versus everyone
/// using the MKV policy, under common random numbers.
pub fn social_cost_comparison(
    model: &LQModel,
    mfg_policy: &FeedbackPolicy,
    mkv_policy: &FeedbackPolicy,
    cfg: &SimulationConfig,
) -> Result<SocialCostReport, SolveError> {
    let a = run_ensemble(model, mfg_policy, mfg_policy, cfg, None)?;
    let b = run_ensemble(model, mkv_policy, mkv_policy, cfg, None)?;
    let ca: Vec<f64> = a.iter().map(|o| o.average_cost).collect();
    let cb: Vec<f64> = b.iter().map(|o| o.average_cost).collect();
    let diffs: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x - y).collect();
    let (difference, se) = mean_se(&diffs);
    Ok(SocialCostReport {
        cost_mfg: mean_se(&ca).0,
        cost_mkv: mean_se(&cb).0,
        difference,
        se,
    })
}
