use batchlab::ctmc::{
    build_generator, metrics, solve_poisson, steady_state, Generator, MetricsReport,
    PoissonSolution, StateDistribution,
};
use batchlab::{RewardSpec, SystemState};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::model::{parse_reward, Model, ModelArgs};
use crate::output::table;
use crate::{Context, Outcome, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Four rooms, two physicians, groups of three, lambda 1/30, mu 1/15.
    Experimental,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value = "experimental")]
    pub preset: Preset,
    #[command(flatten)]
    pub model: ModelArgs,
    /// personal, group or occupancy.
    #[arg(long)]
    pub reward: Option<String>,
    /// State whose relative value is zero, e.g. "(0,0,0)".
    #[arg(long)]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub closed_classes: usize,
    pub balance_residual: f64,
    pub poisson_residual: f64,
    pub little_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub model: Model,
    pub reward: RewardSpec,
    pub generator: Generator,
    pub stationary: StateDistribution,
    pub poisson: PoissonSolution,
    pub metrics: MetricsReport,
    pub checks: Checks,
}

pub fn solve(model: Model, reward: RewardSpec, reference: Option<SystemState>) -> anyhow::Result<SolveReport> {
    let generator = build_generator(&model.params, &model.profile)?;
    generator.ensure_unichain()?;
    let stationary = steady_state(&generator)?;
    let reference = reference.unwrap_or_else(|| model.params.empty_state());
    let poisson = solve_poisson(&generator, &reward, &reference)?;
    let metrics = metrics(&model.params, &model.profile)?;
    let checks = Checks {
        closed_classes: generator.closed_classes(),
        balance_residual: stationary.balance_residual(&generator),
        poisson_residual: poisson.max_residual(&generator, &generator.reward_vector(&reward)),
        little_gap: metrics.little_gap(),
    };
    Ok(SolveReport {
        model,
        reward,
        generator,
        stationary,
        poisson,
        metrics,
        checks,
    })
}

pub fn run(ctx: &Context, args: &SolveArgs) -> anyhow::Result<Outcome> {
    let Preset::Experimental = args.preset;
    let model = Model::resolve(&args.model, &ctx.config)?;
    let reward = match args.reward.as_deref().or(ctx.config.reward.as_deref()) {
        Some(r) => parse_reward(r)?,
        None => RewardSpec::PersonalThroughput { focal: 0 },
    };
    let reference = args
        .reference
        .as_deref()
        .map(|s| s.parse::<SystemState>().map_err(|e| Usage(format!("--reference: {e}"))))
        .transpose()?;
    let report = solve(model, reward, reference)?;
    ctx.output.emit(&report, render)?;
    Ok(Outcome::Pass)
}

fn rate(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.6}")
    }
}

fn reward_label(r: &RewardSpec) -> String {
    match r {
        RewardSpec::PersonalThroughput { focal } => format!("completions of physician {focal}"),
        RewardSpec::GroupThroughput => "completions of all physicians".into(),
        RewardSpec::Occupancy => "patients in rooms".into(),
    }
}

pub fn render(r: &SolveReport) -> String {
    let gen = &r.generator;
    let names: Vec<String> = gen.states.iter().map(ToString::to_string).collect();
    let mut out = format!("{}\n\n", r.model.describe());

    out.push_str(&format!("generator Q over {} states (row = from)\n", gen.len()));
    let mut headers = vec![""];
    headers.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(&gen.rates)
        .map(|(name, row)| iter_row(name, row.iter().map(|x| rate(*x))))
        .collect();
    out.push_str(&table(&headers, &rows));

    out.push_str(&format!("\nreward: {}\n", reward_label(&r.reward)));
    let rows: Vec<Vec<String>> = gen
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                s.to_string(),
                format!("{:.6}", r.stationary.probabilities[i]),
                format!("{:.6}", r.poisson.relative_values[i]),
            ]
        })
        .collect();
    out.push_str(&table(&["state", "pi", "h"], &rows));
    out.push_str(&format!("gain g = {:.9}\n\n", r.poisson.gain));

    let m = &r.metrics;
    let individual: Vec<String> = m.individual_throughput.iter().map(|x| format!("{x:.6}")).collect();
    out.push_str(&format!(
        "system throughput   {:.6}\nper physician       {}\nmean occupancy      {:.6}\nmean sojourn        {:.6}\nblocking rate       {:.6}\n",
        m.system_throughput,
        individual.join(" "),
        m.mean_occupancy,
        m.mean_sojourn,
        m.blocking_rate
    ));
    let c = &r.checks;
    out.push_str(&format!(
        "\nchecks: {} closed class(es), balance residual {:.1e}, Poisson residual {:.1e}, Little gap {:.1e}\n",
        c.closed_classes, c.balance_residual, c.poisson_residual, c.little_gap
    ));
    out
}

fn iter_row(first: &str, rest: impl Iterator<Item = String>) -> Vec<String> {
    std::iter::once(first.to_string()).chain(rest).collect()
}
