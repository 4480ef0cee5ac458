//! Command dispatch: config in, summary line and artifact out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use meanfield::emissions::{classify_regime, simulate_emissions, EmissionsModel, EmissionsPolicy};
use meanfield::lqmodel::{LQModel, MeanFlow, TimeGrid};
use meanfield::mfg_lq::{mfg_cost, solve_mfg, MfgOptions};
use meanfield::mfg_pde_oracle::{picard_solve, AdditiveRunningCost, MeanFieldModel, PicardOptions, SpaceGrid};
use meanfield::mkv_lq::{compare, mkv_cost, solve_mkv};
use meanfield::nplayer_sim::{
    nash_gap, random_affine_deviations, simulate_game, social_cost_comparison, SimulationConfig,
};
use meanfield::scalar_examples::{
    additive_running_flow, additive_running_mean, general_linear_terminal, linear_terminal, lq_zero_terminal_mean,
    quadratic_cost_mfg, quadratic_terminal, Bracket, FixedPointReport, Mode,
};
use meanfield::{ModelError, SolveError};

use crate::config::{Command, ExperimentConfig, Format, PolicyChoice};
use crate::error::CliError;

/// Command-line overrides for the emissions model and the RNG seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub cap: Option<f64>,
    pub sigma: Option<f64>,
    pub horizon: Option<f64>,
    pub x0: Option<f64>,
    pub paths: Option<usize>,
}

/// Ordered `key=value` pairs; floats are printed with six decimals.
/// Some commands also carry a table meant for standard output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pairs: Vec<(String, String)>,
    pub table: Option<String>,
}

impl Summary {
    fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.pairs.push((key.into(), format!("{v:.6}")));
        self
    }
    fn text(&mut self, key: &str, v: impl ToString) -> &mut Self {
        self.pairs.push((key.into(), v.to_string()));
        self
    }
    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
    pub fn line(&self) -> String {
        let mut out = String::new();
        for (i, (k, v)) in self.pairs.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{k}={v}");
        }
        out
    }
}

/// A result table that can be written as CSV or as JSON.
struct Artifact {
    json: Value,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Artifact {
    fn columns(json: Value, cols: Vec<(&str, Vec<f64>)>) -> Self {
        let header = cols.iter().map(|(n, _)| n.to_string()).collect();
        let len = cols.first().map_or(0, |(_, v)| v.len());
        let rows = (0..len)
            .map(|i| cols.iter().map(|(_, v)| v[i].to_string()).collect())
            .collect();
        Self { json, header, rows }
    }

    fn csv_string(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| CliError::Other(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| CliError::Other(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Other(e.to_string()))
    }

    fn write(&self, path: &Path, format: Format) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Other(format!("cannot write {}: {e}", path.display()));
        match format {
            Format::Json => {
                let mut text = serde_json::to_string_pretty(&self.json).map_err(|e| CliError::Other(e.to_string()))?;
                text.push('\n');
                std::fs::write(path, text).map_err(io)
            }
            Format::Csv => std::fs::write(path, self.csv_string()?).map_err(io),
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn lq_model(cfg: &ExperimentConfig) -> Result<LQModel, CliError> {
    let spec = cfg.model.as_ref().ok_or_else(|| CliError::Validation("`model` is required".into()))?;
    Ok(spec.build()?)
}

fn mfg_options(cfg: &ExperimentConfig) -> MfgOptions {
    MfgOptions {
        allow_short_horizon: cfg.numerics.short_horizon,
    }
}

fn time_column(grid: &TimeGrid) -> Vec<f64> {
    grid.points()
}

fn run_solve_mfg(cfg: &ExperimentConfig, s: &mut Summary) -> Result<Artifact, CliError> {
    let model = lq_model(cfg)?;
    let sol = solve_mfg(&model, mfg_options(cfg))?;
    let cost = mfg_cost(&model, &sol)?;
    s.num("mean_T", sol.mean_flow.terminal())
        .num("cost", cost)
        .num("fixed_point_residual", sol.fixed_point_residual());
    let json = json!({
        "mean_T": sol.mean_flow.terminal(),
        "cost": cost,
        "fixed_point_residual": sol.fixed_point_residual(),
        "t": time_column(model.grid()),
        "mean": sol.mean_flow.values(),
        "variance": sol.moments.variance,
        "ybar": sol.ybar.values(),
        "eta": sol.eta,
        "chi": sol.chi,
        "slope": sol.feedback.slope,
        "intercept": sol.feedback.intercept,
    });
    Ok(Artifact::columns(
        json,
        vec![
            ("t", time_column(model.grid())),
            ("mean", sol.mean_flow.values().to_vec()),
            ("variance", sol.moments.variance.clone()),
            ("ybar", sol.ybar.values().to_vec()),
            ("eta", sol.eta.clone()),
            ("chi", sol.chi.clone()),
            ("slope", sol.feedback.slope.clone()),
            ("intercept", sol.feedback.intercept.clone()),
        ],
    ))
}

fn run_solve_mkv(cfg: &ExperimentConfig, s: &mut Summary) -> Result<Artifact, CliError> {
    let model = lq_model(cfg)?;
    let sol = solve_mkv(&model)?;
    let cost = mkv_cost(&model, &sol)?;
    s.num("mean_T", sol.xbar.terminal())
        .num("cost", cost)
        .num("consistency_residual", sol.consistency_residual());
    let json = json!({
        "mean_T": sol.xbar.terminal(),
        "cost": cost,
        "consistency_residual": sol.consistency_residual(),
        "t": time_column(model.grid()),
        "mean": sol.xbar.values(),
        "variance": sol.moments.variance,
        "ybar": sol.ybar.values(),
        "eta": sol.eta,
        "chi": sol.chi,
        "slope": sol.feedback.slope,
        "intercept": sol.feedback.intercept,
    });
    Ok(Artifact::columns(
        json,
        vec![
            ("t", time_column(model.grid())),
            ("mean", sol.xbar.values().to_vec()),
            ("variance", sol.moments.variance.clone()),
            ("ybar", sol.ybar.values().to_vec()),
            ("eta", sol.eta.clone()),
            ("chi", sol.chi.clone()),
            ("slope", sol.feedback.slope.clone()),
            ("intercept", sol.feedback.intercept.clone()),
        ],
    ))
}

fn run_compare(cfg: &ExperimentConfig, s: &mut Summary) -> Result<Artifact, CliError> {
    let model = lq_model(cfg)?;
    let (mfg, mkv, rep) = compare(&model, mfg_options(cfg))?;
    s.num("mfg_mean_T", rep.mfg_mean_T)
        .num("mkv_mean_T", rep.mkv_mean_T)
        .num("sup_mean_gap", rep.sup_mean_gap)
        .num("mfg_cost_under_mkv_objective", rep.mfg_cost_under_mkv_objective)
        .num("mkv_cost", rep.mkv_cost);
    let mut json = to_json(&rep);
    json["t"] = to_json(&time_column(model.grid()));
    json["mfg_mean"] = to_json(&mfg.mean_flow.values());
    json["mkv_mean"] = to_json(&mkv.xbar.values());
    Ok(Artifact::columns(
        json,
        vec![
            ("t", time_column(model.grid())),
            ("mfg_mean", mfg.mean_flow.values().to_vec()),
            ("mkv_mean", mkv.xbar.values().to_vec()),
        ],
    ))
}

#[derive(Serialize)]
struct ExampleRow {
    example: &'static str,
    mode: &'static str,
    existence: String,
    root_index: usize,
    root: f64,
    solvability_margin: f64,
}

fn push_report(rows: &mut Vec<ExampleRow>, example: &'static str, rep: &FixedPointReport) {
    let existence = to_json(&rep.existence).as_str().unwrap_or_default().to_string();
    if rep.roots.is_empty() {
        rows.push(ExampleRow {
            example,
            mode: rep.mode.label(),
            existence: existence.clone(),
            root_index: 0,
            root: f64::NAN,
            solvability_margin: rep.solvability_margin,
        });
    }
    for (i, &root) in rep.roots.iter().enumerate() {
        rows.push(ExampleRow {
            example,
            mode: rep.mode.label(),
            existence: existence.clone(),
            root_index: i,
            root,
            solvability_margin: rep.solvability_margin,
        });
    }
}

fn run_examples(cfg: &ExperimentConfig, s: &mut Summary) -> Result<Artifact, CliError> {
    let p = cfg.scalar.unwrap_or_default();
    let mut rows = Vec::new();
    for mode in [Mode::Mfg, Mode::Mkv] {
        push_report(&mut rows, "linear_terminal", &linear_terminal(p.r, p.horizon, p.x0, mode)?);
        push_report(&mut rows, "quadratic_terminal", &quadratic_terminal(p.r, p.horizon, p.x0, mode)?);
        push_report(
            &mut rows,
            "sine_terminal",
            &general_linear_terminal(f64::sin, f64::cos, p.horizon, p.x0, mode, Bracket::Auto)?,
        );
        match quadratic_cost_mfg(|u| u, p.horizon, p.x0, mode, Bracket::Auto) {
            Ok(rep) => push_report(&mut rows, "quadratic_cost_identity", &rep),
            Err(SolveError::Unsupported(_)) => rows.push(ExampleRow {
                example: "quadratic_cost_identity",
                mode: mode.label(),
                existence: "unsupported".into(),
                root_index: 0,
                root: f64::NAN,
                solvability_margin: f64::NAN,
            }),
            Err(e) => return Err(e.into()),
        }
        rows.push(ExampleRow {
            example: "additive_running_mean_T",
            mode: mode.label(),
            existence: "unique".into(),
            root_index: 0,
            root: additive_running_mean(p.horizon, p.x0, mode, p.horizon)?,
            solvability_margin: f64::NAN,
        });
        let grid = TimeGrid::new(p.horizon, 2)?;
        rows.push(ExampleRow {
            example: "zero_terminal_mean_T",
            mode: mode.label(),
            existence: "unique".into(),
            root_index: 0,
            root: lq_zero_terminal_mean(grid, p.x0, mode).terminal(),
            solvability_margin: f64::NAN,
        });
    }
    let mfg_lin = linear_terminal(p.r, p.horizon, p.x0, Mode::Mfg)?;
    let mkv_lin = linear_terminal(p.r, p.horizon, p.x0, Mode::Mkv)?;
    s.num("r", p.r).num("T", p.horizon).num("x0", p.x0);
    if let (Some(a), Some(b)) = (mfg_lin.roots.first(), mkv_lin.roots.first()) {
        s.num("mfg_linear_root", *a).num("mkv_linear_root", *b);
    }
    s.text("rows", rows.len());
    let header: Vec<String> = ["example", "mode", "existence", "root_index", "root", "solvability_margin"]
        .iter()
        .map(|h| h.to_string())
        .collect();
    let csv_rows = rows
        .iter()
        .map(|r| {
            vec![
                r.example.to_string(),
                r.mode.to_string(),
                r.existence.clone(),
                r.root_index.to_string(),
                r.root.to_string(),
                r.solvability_margin.to_string(),
            ]
        })
        .collect();
    let artifact = Artifact {
        json: to_json(&rows),
        header,
        rows: csv_rows,
    };
    s.table = Some(artifact.csv_string()?);
    Ok(artifact)
}

fn emissions_model(cfg: &ExperimentConfig, o: &Overrides) -> Result<EmissionsModel, CliError> {
    let base = cfg.emissions;
    let pick = |flag: Option<f64>, field: Option<f64>, name: &str| {
        flag.or(field)
            .ok_or_else(|| CliError::Validation(format!("emissions parameter `{name}` is missing")))
    };
    Ok(EmissionsModel::new(
        pick(o.lambda, base.map(|b| b.lambda), "lambda")?,
        pick(o.cap, base.map(|b| b.cap), "cap")?,
        pick(o.sigma, base.map(|b| b.sigma), "sigma")?,
        pick(o.horizon, base.map(|b| b.horizon), "T")?,
        pick(o.x0, base.map(|b| b.x0), "x0")?,
    )?)
}

fn run_emissions(cfg: &ExperimentConfig, o: &Overrides, s: &mut Summary) -> Result<Artifact, CliError> {
    let model = emissions_model(cfg, o)?;
    let paths = o.paths.unwrap_or(cfg.numerics.paths);
    let report = classify_regime(&model);
    let policy = match report.regime {
        meanfield::emissions::Regime::Bau => EmissionsPolicy::Zero,
        _ => EmissionsPolicy::Optimal,
    };
    let sim = simulate_emissions(&model, policy, paths, cfg.numerics.seed)?;
    s.text("regime", to_json(&report.regime).as_str().unwrap_or_default())
        .num("prob_exceed", report.prob_exceed)
        .num("mean_T", report.mean_T)
        .num("delta", report.delta)
        .text("fixed_point_ok", report.fixed_point_ok)
        .num("mc_prob_exceed", sim.prob_exceed)
        .num("mc_prob_exceed_se", sim.prob_exceed_se)
        .num("mc_mean_T", sim.mean_T)
        .num("mc_mean_T_se", sim.mean_T_se);
    let mut json = to_json(&report);
    json["model"] = to_json(&model);
    json["simulation"] = to_json(&sim);
    let header: Vec<String> = [
        "regime",
        "prob_exceed",
        "mean_T",
        "delta",
        "fixed_point_ok",
        "singular",
        "mc_prob_exceed",
        "mc_prob_exceed_se",
        "mc_mean_T",
        "mc_mean_T_se",
    ]
    .iter()
    .map(|h| h.to_string())
    .collect();
    let row = vec![
        to_json(&report.regime).as_str().unwrap_or_default().to_string(),
        report.prob_exceed.to_string(),
        report.mean_T.to_string(),
        report.delta.to_string(),
        report.fixed_point_ok.to_string(),
        report.singular.to_string(),
        sim.prob_exceed.to_string(),
        sim.prob_exceed_se.to_string(),
        sim.mean_T.to_string(),
        sim.mean_T_se.to_string(),
    ];
    Ok(Artifact {
        json,
        header,
        rows: vec![row],
    })
}

fn run_simulate(cfg: &ExperimentConfig, s: &mut Summary) -> Result<Artifact, CliError> {
    let model = lq_model(cfg)?;
    let n = &cfg.numerics;
    let sim = SimulationConfig::new(n.N, n.n_repeats, n.seed)?;
    let policy = match n.policy {
        PolicyChoice::Mfg => solve_mfg(&model, mfg_options(cfg))?.feedback,
        PolicyChoice::Mkv => solve_mkv(&model)?.feedback,
    };
    let stats = simulate_game(&model, &policy, &sim)?;
    s.num("chaos_error", stats.chaos_error)
        .num("chaos_error_se", stats.chaos_error_se)
        .num("per_player_cost", stats.per_player_cost)
        .num("per_player_cost_se", stats.per_player_cost_se)
        .num("empirical_mean_T", stats.empirical_mean_flow.terminal())
        .num("empirical_mean_T_se", stats.empirical_mean_T_se);
    let mut json = to_json(&stats);
    json["config"] = to_json(&sim);
    json["numerics"] = to_json(n);
    if n.deviations > 0 {
        let devs = random_affine_deviations(&policy, n.deviations, n.deviation_width, n.deviation_seed);
        let gap = nash_gap(&model, &policy, &devs, &sim)?;
        s.num("nash_gap", gap.gap).num("nash_gap_se", gap.gap_se);
        json["nash_gap"] = to_json(&gap);
    }
    if n.social_cost {
        let mfg = solve_mfg(&model, mfg_options(cfg))?.feedback;
        let mkv = solve_mkv(&model)?.feedback;
        let social = social_cost_comparison(&model, &mfg, &mkv, &sim)?;
        s.num("social_cost_mfg", social.cost_mfg)
            .num("social_cost_mkv", social.cost_mkv)
            .num("social_cost_difference", social.difference)
            .num("social_cost_difference_se", social.se);
        json["social_cost"] = to_json(&social);
    }
    json["t"] = to_json(&time_column(model.grid()));
    Ok(Artifact::columns(
        json,
        vec![
            ("t", time_column(model.grid())),
            ("empirical_mean", stats.empirical_mean_flow.values().to_vec()),
            ("reference_mean", stats.reference_mean_flow.values().to_vec()),
        ],
    ))
}

fn run_oracle(cfg: &ExperimentConfig, s: &mut Summary) -> Result<Artifact, CliError> {
    let n = &cfg.numerics;
    let opts = PicardOptions {
        damping: n.damping,
        tol: n.tol,
        max_iter: n.max_iter,
    };
    let (model, time, reference): (Box<dyn MeanFieldModel>, TimeGrid, MeanFlow) =
        if let Some(spec) = &cfg.model {
            let m = spec.build()?;
            let reference = solve_mfg(&m, mfg_options(cfg))?.mean_flow;
            let time = *m.grid();
            (Box::new(m), time, reference)
        } else if let Some(a) = &cfg.additive {
            let time = TimeGrid::new(a.horizon, a.n_steps)?;
            let m = AdditiveRunningCost {
                horizon: a.horizon,
                x0: a.x0,
                sigma: a.sigma,
            };
            (Box::new(m), time, additive_running_flow(time, a.x0, Mode::Mfg))
        } else if let Some(e) = &cfg.emissions {
            e.validate()?;
            let time = TimeGrid::new(e.horizon, 400)?;
            let mean_t = classify_regime(e).mean_T;
            let reference = MeanFlow::new(
                time,
                time.points().iter().map(|t| e.x0 + (mean_t - e.x0) * t / e.horizon).collect(),
            )?;
            (Box::new(*e), time, reference)
        } else {
            return Err(CliError::Validation("oracle needs a model".into()));
        };
    let margin = (model.x0() - reference.terminal()).abs() + 1.0;
    let space = SpaceGrid::around(model.x0(), model.sigma(), model.horizon(), margin, n.n_x)?;
    let out = picard_solve(model.as_ref(), time, &space, opts)?;
    let gap = out.mean_flow.sup_distance(&reference);
    s.num("mean_T", out.mean_flow.terminal())
        .num("reference_mean_T", reference.terminal())
        .num("sup_gap_to_reference", gap)
        .text("iterations", out.iterations())
        .text("converged", out.converged)
        .num("final_residual", *out.residuals.last().expect("at least one iteration"));
    if !out.converged {
        return Err(CliError::NoConvergence(format!(
            "Picard iteration stopped after {} iterations with residual {:e}",
            out.iterations(),
            out.residuals.last().copied().unwrap_or(f64::NAN)
        )));
    }
    let json = json!({
        "mean_T": out.mean_flow.terminal(),
        "reference_mean_T": reference.terminal(),
        "sup_gap_to_reference": gap,
        "iterations": out.iterations(),
        "residuals": out.residuals,
        "t": time_column(&time),
        "mean": out.mean_flow.values(),
        "reference_mean": reference.values(),
    });
    Ok(Artifact::columns(
        json,
        vec![
            ("t", time_column(&time)),
            ("mean", out.mean_flow.values().to_vec()),
            ("reference_mean", reference.values().to_vec()),
        ],
    ))
}

fn output_target(cfg: &ExperimentConfig, o: &Overrides) -> Option<(PathBuf, Format)> {
    let path = o
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|x| x.path.as_ref().map(PathBuf::from)))?;
    let format = o
        .format
        .or_else(|| cfg.output.as_ref().and_then(|x| x.format))
        .unwrap_or_else(|| {
            if path.extension().is_some_and(|e| e == "csv") {
                Format::Csv
            } else {
                Format::Json
            }
        });
    Some((path, format))
}

/// Runs one command. The artifact is written only when the solve succeeds.
pub fn run(command: Command, cfg: &ExperimentConfig, overrides: &Overrides) -> Result<Summary, CliError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = overrides.seed {
        cfg.numerics.seed = seed;
    }
    if let Some(paths) = overrides.paths {
        cfg.numerics.paths = paths;
    }
    cfg.validate(command).map_err(CliError::Validation)?;
    let mut summary = Summary::default();
    summary.text("command", command.name());
    let artifact = match command {
        Command::SolveMfg => run_solve_mfg(&cfg, &mut summary),
        Command::SolveMkv => run_solve_mkv(&cfg, &mut summary),
        Command::Compare => run_compare(&cfg, &mut summary),
        Command::Examples => run_examples(&cfg, &mut summary),
        Command::Emissions => run_emissions(&cfg, overrides, &mut summary),
        Command::Simulate => run_simulate(&cfg, &mut summary),
        Command::Oracle => run_oracle(&cfg, &mut summary),
    }?;
    if let Some((path, format)) = output_target(&cfg, overrides) {
        artifact.write(&path, format)?;
    }
    Ok(summary)
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Model(m) => m.into(),
            SolveError::BlowUp { .. } | SolveError::NoFixedPoint { .. } => CliError::Nonexistence(e.to_string()),
            SolveError::HypothesesViolated | SolveError::Cfl { .. } | SolveError::Unsupported(_) => {
                CliError::Validation(e.to_string())
            }
            SolveError::OffsetMismatch { .. } => CliError::Other(e.to_string()),
        }
    }
}
