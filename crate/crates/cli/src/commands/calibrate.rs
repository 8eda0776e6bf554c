use batchlab::calibration::{
    calibrate, calibration_report, check_threshold, CalibrationReport, CalibrationTargets, Money,
    ThresholdCheck, TreatmentKind, TreatmentSpec,
};
use batchlab::Strategy;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::{Context, Outcome, Usage};

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// IT, GT, GT_NUDGE or GT_ST; all four when omitted.
    #[arg(long)]
    pub treatment: Option<TreatmentKind>,
    /// Also search thresholds and rates for the strength and earnings targets.
    #[arg(long)]
    pub search: bool,
    /// Target incentive strength in percent (needs --treatment).
    #[arg(long, requires = "treatment")]
    pub strength: Option<f64>,
    /// Target expected earnings under the optimal strategy (needs --treatment).
    #[arg(long, requires = "treatment")]
    pub earnings: Option<Money>,
    /// Simulated shifts per strategy for the threshold validity check.
    #[arg(long, default_value_t = 0)]
    pub check_shifts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Search {
    pub targets: CalibrationTargets,
    pub spec: TreatmentSpec,
    pub report: CalibrationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentCalibration {
    pub spec: TreatmentSpec,
    pub report: CalibrationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<Search>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub threshold_checks: Vec<ThresholdCheck>,
}

pub fn run(ctx: &Context, args: &CalibrateArgs) -> anyhow::Result<Outcome> {
    let specs = ctx.config.server.treatment_specs()?;
    let kinds: Vec<TreatmentKind> = match args.treatment {
        Some(k) => vec![k],
        None => TreatmentKind::ALL.to_vec(),
    };
    if (args.strength.is_some() || args.earnings.is_some()) && !args.search {
        return Err(Usage("--strength and --earnings only apply with --search".into()).into());
    }
    let mut out = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let spec = specs[&kind].clone();
        let report = calibration_report(&spec)?;
        let search = if args.search {
            let mut targets = CalibrationTargets::published(kind);
            targets.strength = args.strength.unwrap_or(targets.strength);
            targets.earnings = args.earnings.unwrap_or(targets.earnings);
            targets.horizon = spec.horizon;
            let (found, found_report) = calibrate(kind, &targets, &spec.params)?;
            Some(Search {
                targets,
                spec: found,
                report: found_report,
            })
        } else {
            None
        };
        let threshold_checks = if args.check_shifts > 0 {
            [Strategy::Batch, Strategy::NoBatch]
                .into_iter()
                .map(|s| check_threshold(&spec, s, args.check_shifts, ctx.seed()))
                .collect::<batchlab::Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        out.push(TreatmentCalibration {
            spec,
            report,
            search,
            threshold_checks,
        });
    }
    ctx.output.emit(&out, |v| v.iter().map(render).collect::<Vec<_>>().join("\n"))?;
    Ok(Outcome::Pass)
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Batch => "batching",
        Strategy::NoBatch => "assigning one",
    }
}

fn render_report(r: &CalibrationReport, unit: &str) -> String {
    let opt = r.kind.optimal();
    format!(
        "  expected {unit}: {:.4} when {} (optimal), {:.4} when {}\n  expected bonus: {} vs {}\n  incentive strength: {:.2}%\n  expected earnings under the optimal strategy: {}\n",
        r.expected_metric_opt,
        strategy_name(opt),
        r.expected_metric_subopt,
        strategy_name(opt.other()),
        r.bonus_opt,
        r.bonus_subopt,
        r.incentive_strength,
        r.expected_earnings_opt
    )
}

pub fn render(c: &TreatmentCalibration) -> String {
    let s = &c.spec;
    let unit = s.kind.metric_unit();
    let mut out = format!(
        "{}: base fee {} plus {}\n",
        s.kind.label(),
        s.base_fee,
        s.describe()
    );
    out.push_str(&render_report(&c.report, unit));
    out.push_str(&format!("  end-of-shift credit ({unit}):\n"));
    for line in s.terminal_table.render(unit, 2).lines() {
        out.push_str(&format!("    {line}\n"));
    }
    if let Some(found) = &c.search {
        out.push_str(&format!(
            "  search for {:.1}% and {}: threshold {}, rate {}\n",
            found.targets.strength, found.targets.earnings, found.spec.threshold, found.spec.per_unit
        ));
        out.push_str(&render_report(&found.report, unit));
    }
    for t in &c.threshold_checks {
        out.push_str(&format!(
            "  threshold check, {} over {} shifts: {:.1}% unpaid, mean paid bonus ${:.2} vs linear ${:.2}: {}\n",
            strategy_name(t.strategy),
            t.shifts,
            100.0 * t.prob_unpaid,
            t.mean_clipped_bonus,
            t.linear_bonus,
            if t.valid { "valid" } else { "NOT valid" }
        ));
    }
    out
}
