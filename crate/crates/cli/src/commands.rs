//! One handler per subcommand. Each builds a parameter map recording the
//! resolved inputs, computes its results, and renders them as a JSON
//! envelope or a plot-ready CSV table.

use std::error::Error;

use serde_json::{json, Map, Value};

use truncnb::bd_simulator::{
    empirical_stationary, estimate_h_difference, mean_first_transition_from_zero, simulate_path,
    RunLength, SimConfig,
};
use truncnb::distributions::tv_distance;
use truncnb::fault_model::{
    fault_count_law, proposition_bounds, BoundComparison, FaultParams, RepairConvention,
};
use truncnb::stein_factors::{
    brute_force_g2, exact_g2, monotonicity_sweep, poisson_limit_gaps, untruncated_limit,
};
use truncnb::stein_solver::{max_equation_residual, solve_closed_form, TestFunction};

use crate::envelope::{csv_table, float_cell, OutputEnvelope};
use crate::{ConventionArg, FactorArgs, FaultArgs, Format, SimulateArgs, SolveArgs};

fn render(
    format: Format,
    command: &'static str,
    parameters: Map<String, Value>,
    results: Value,
    csv: String,
) -> Result<String, Box<dyn Error>> {
    match format {
        Format::Json => Ok(OutputEnvelope::new(command, parameters, results).to_json()?),
        Format::Csv => Ok(csv),
    }
}

pub fn factor(args: &FactorArgs, format: Format) -> Result<String, Box<dyn Error>> {
    let (params, mut parameters) = args.law.resolve()?;

    if let Some(list) = &args.limit_p_sweep {
        let Some(rate) = args.law.poisson else {
            return Err("the limit sweep needs --poisson: it compares matched-mean \
                        negative binomial factors against the Poisson one"
                .into());
        };
        let n = args.n.expect("--limit-p-sweep requires --n");
        let probs = parse_float_list(list)?;
        let gaps = poisson_limit_gaps(rate, n, &probs)?;
        parameters.insert("limit_p_sweep".into(), json!(probs));
        parameters.insert("n".into(), json!(n));
        let rows: Vec<String> = gaps
            .iter()
            .map(|g| {
                format!(
                    "{},{},{}",
                    float_cell(g.p),
                    float_cell(g.exact_gap),
                    float_cell(g.bound_gap)
                )
            })
            .collect();
        let results = json!({ "gaps": serde_json::to_value(&gaps)? });
        return render(
            format,
            "factor",
            parameters,
            results,
            csv_table("p,exact_gap,bound_gap", &rows),
        );
    }

    if let Some(max) = args.sweep_n {
        let sweep = monotonicity_sweep(&params, max);
        let limit = untruncated_limit(&params);
        parameters.insert("sweep_max".into(), json!(max));
        let rows: Vec<String> = sweep
            .iter()
            .enumerate()
            .map(|(n, bound)| format!("{n},{}", float_cell(*bound)))
            .collect();
        let results = json!({ "bounds": sweep, "limit": limit });
        return render(
            format,
            "factor",
            parameters,
            results,
            csv_table("n,bound", &rows),
        );
    }

    let n = args.n.expect("--n is required without --sweep-n");
    parameters.insert("n".into(), json!(n));
    let report = exact_g2(&params, n);
    let rows: Vec<String> = report
        .per_state
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{i},{}", float_cell(*s)))
        .collect();
    let mut results = serde_json::to_value(&report)?;
    if args.brute_force {
        parameters.insert("brute_force".into(), json!(true));
        let brute = brute_force_g2(&params, n)?;
        results
            .as_object_mut()
            .expect("the factor report is an object")
            .insert("brute_force".into(), json!(brute));
    }
    render(
        format,
        "factor",
        parameters,
        results,
        csv_table("i,delta_sup", &rows),
    )
}

pub fn solve(args: &SolveArgs, format: Format) -> Result<String, Box<dyn Error>> {
    let (params, mut parameters) = args.law.resolve()?;
    let indices = parse_index_list(&args.set)?;
    let f = TestFunction::from_indices(args.n, &indices)?;
    let closed = solve_closed_form(&params, &f)?;
    let residual = max_equation_residual(&params, &f, &closed.solution)?;
    parameters.insert("n".into(), json!(args.n));
    parameters.insert("set".into(), json!(indices));
    let rows: Vec<String> = closed
        .solution
        .values()
        .iter()
        .enumerate()
        .map(|(i, g)| format!("{i},{}", float_cell(*g)))
        .collect();
    let results = json!({
        "g": closed.solution.values(),
        "max_equation_residual": residual,
        "n": args.n,
        "used_forward_fallback": closed.used_forward_fallback,
    });
    render(
        format,
        "solve",
        parameters,
        results,
        csv_table("i,g", &rows),
    )
}

const FAULT_HEADER: &str = "days,repair,prob,n,lambda,var_w,tv_trunc,tv_untrunc,\
                            bound_trunc,bound_untrunc,ratio,slope";

pub fn fault(args: &FaultArgs, format: Format) -> Result<String, Box<dyn Error>> {
    let convention = match args.convention {
        ConventionArg::FaultDayCounts => RepairConvention::FaultDayCounts,
        ConventionArg::StartsNextDay => RepairConvention::StartsNextDay,
    };
    let mut parameters = Map::new();
    parameters.insert("days".into(), json!(args.days));
    parameters.insert("repair".into(), json!(args.repair));
    parameters.insert(
        "convention".into(),
        json!(match args.convention {
            ConventionArg::FaultDayCounts => "fault-day-counts",
            ConventionArg::StartsNextDay => "starts-next-day",
        }),
    );

    let row = |prob: f64, c: &BoundComparison, slope: Option<f64>| {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            args.days,
            args.repair,
            float_cell(prob),
            c.n,
            float_cell(c.lambda),
            float_cell(c.var_w),
            float_cell(c.tv_trunc),
            float_cell(c.tv_untrunc),
            float_cell(c.bound_trunc),
            float_cell(c.bound_untrunc),
            float_cell(c.bound_trunc / prob),
            slope.map(float_cell).unwrap_or_default(),
        )
    };

    if let Some(list) = &args.p_sweep {
        let probs = parse_float_list(list)?;
        parameters.insert("p_sweep".into(), json!(probs));
        let mut comparisons = Vec::with_capacity(probs.len());
        for &prob in &probs {
            let fault = FaultParams::new(args.days, args.repair, prob)?
                .with_convention(convention);
            comparisons.push(proposition_bounds(&fault)?);
        }
        let mut rows = Vec::with_capacity(probs.len());
        let mut points = Vec::with_capacity(probs.len());
        for (i, (&prob, c)) in probs.iter().zip(&comparisons).enumerate() {
            let slope = (i > 0).then(|| {
                (c.bound_trunc / comparisons[i - 1].bound_trunc).ln()
                    / (prob / probs[i - 1]).ln()
            });
            rows.push(row(prob, c, slope));
            let mut point = serde_json::to_value(c)?;
            let map = point.as_object_mut().expect("the comparison is an object");
            map.insert("prob".into(), json!(prob));
            map.insert("ratio".into(), json!(c.bound_trunc / prob));
            map.insert("slope".into(), json!(slope));
            points.push(point);
        }
        return render(
            format,
            "fault",
            parameters,
            json!({ "points": points }),
            csv_table(FAULT_HEADER, &rows),
        );
    }

    let prob = args.prob.expect("clap requires --prob without --p-sweep");
    parameters.insert("prob".into(), json!(prob));
    let fault = FaultParams::new(args.days, args.repair, prob)?.with_convention(convention);
    let law = fault_count_law(&fault);
    let c = proposition_bounds(&fault)?;
    let rows = vec![row(prob, &c, None)];
    let mut results = serde_json::to_value(&c)?;
    let map = results.as_object_mut().expect("the comparison is an object");
    map.insert("law".into(), serde_json::to_value(&law)?);
    map.insert("prob".into(), json!(prob));
    map.insert("ratio".into(), json!(c.bound_trunc / prob));
    render(
        format,
        "fault",
        parameters,
        results,
        csv_table(FAULT_HEADER, &rows),
    )
}

pub fn simulate(args: &SimulateArgs, format: Format) -> Result<String, Box<dyn Error>> {
    let (params, mut parameters) = args.law.resolve()?;
    parameters.insert("n".into(), json!(args.n));
    parameters.insert("seed".into(), json!(args.seed));
    if let Some(horizon) = args.horizon {
        parameters.insert("horizon".into(), json!(horizon));
    }
    if let Some(events) = args.events {
        parameters.insert("events".into(), json!(events));
    }

    let run = match (args.horizon, args.events) {
        (Some(horizon), None) => RunLength::Horizon(horizon),
        (None, Some(events)) => RunLength::EventCap(events),
        // The transition-time estimator sizes its own runs.
        (None, None) if args.tau01 => RunLength::EventCap(1),
        (None, None) => {
            return Err(
                "pass --horizon <time> or --events <jumps> to size each replication".into(),
            )
        }
        (Some(_), Some(_)) => unreachable!("the parser rejects --horizon with --events"),
    };
    let reps = args
        .reps
        .unwrap_or(if args.stationary || args.path { 1 } else { 10_000 });
    parameters.insert("replications".into(), json!(reps));
    let config = SimConfig::new(params, args.n, run)?
        .with_seed(args.seed)
        .with_replications(reps)?;

    if args.stationary {
        parameters.insert("initial".into(), json!(args.initial));
        parameters.insert("mode".into(), json!("stationary"));
        let config = config.with_initial_state(args.initial)?;
        let empirical = empirical_stationary(&config)?;
        let truncated = params.truncated(args.n);
        let tv = tv_distance(&empirical, &truncated)?;
        let rows: Vec<String> = empirical
            .probs()
            .iter()
            .zip(truncated.probs())
            .enumerate()
            .map(|(state, (e, t))| format!("{state},{},{}", float_cell(*e), float_cell(*t)))
            .collect();
        let results = json!({
            "empirical": serde_json::to_value(&empirical)?,
            "replications": reps,
            "seed": args.seed,
            "tv_to_truncated": tv,
        });
        return render(
            format,
            "simulate",
            parameters,
            results,
            csv_table("state,empirical,truncated", &rows),
        );
    }

    if args.tau01 {
        parameters.insert("mode".into(), json!("tau01"));
        let report = mean_first_transition_from_zero(&config)?;
        let rows = vec![format!(
            "{},{},{},{},{},{},{}",
            float_cell(report.estimate.point),
            float_cell(report.estimate.std_error),
            report.estimate.replications,
            float_cell(report.analytic),
            float_cell(report.implied_sharp),
            float_cell(report.implied_sharp_std_error),
            float_cell(report.factor_bound),
        )];
        let results = json!({
            "analytic": report.analytic,
            "factor_bound": report.factor_bound,
            "implied_sharp": report.implied_sharp,
            "implied_sharp_std_error": report.implied_sharp_std_error,
            "point": report.estimate.point,
            "replications": report.estimate.replications,
            "seed": args.seed,
            "std_error": report.estimate.std_error,
        });
        return render(
            format,
            "simulate",
            parameters,
            results,
            csv_table(
                "point,std_error,replications,analytic,implied_sharp,\
                 implied_sharp_std_error,factor_bound",
                &rows,
            ),
        );
    }

    if args.h_diff {
        let set_text = args.set.as_deref().expect("clap requires --set with --h-diff");
        let state = args.state.expect("clap requires --state with --h-diff");
        let indices = parse_index_list(set_text)?;
        parameters.insert("mode".into(), json!("h-diff"));
        parameters.insert("set".into(), json!(indices));
        parameters.insert("state".into(), json!(state));
        let f = TestFunction::from_indices(args.n, &indices)?;
        let estimate = estimate_h_difference(&config, &f, state)?;
        let exact = solve_closed_form(&params, &f)?.solution.values()[state + 1];
        let rows = vec![format!(
            "{},{},{},{}",
            float_cell(estimate.point),
            float_cell(estimate.std_error),
            estimate.replications,
            float_cell(exact),
        )];
        let results = json!({
            "exact_value": exact,
            "point": estimate.point,
            "replications": estimate.replications,
            "seed": args.seed,
            "std_error": estimate.std_error,
        });
        return render(
            format,
            "simulate",
            parameters,
            results,
            csv_table("point,std_error,replications,exact_value", &rows),
        );
    }

    parameters.insert("initial".into(), json!(args.initial));
    parameters.insert("mode".into(), json!("path"));
    let config = config.with_initial_state(args.initial)?;
    let path = simulate_path(&config)?;
    match format {
        Format::Json => {
            let results = json!({
                "events": path.len() - 1,
                "path": path,
                "seed": args.seed,
            });
            Ok(OutputEnvelope::new("simulate", parameters, results).to_json()?)
        }
        Format::Csv => {
            let rows: Vec<String> = path
                .iter()
                .map(|(t, state)| format!("{},{state}", float_cell(*t)))
                .collect();
            Ok(csv_table("t,state", &rows))
        }
    }
}

pub(crate) fn parse_pair(text: &str) -> Result<(f64, f64), Box<dyn Error>> {
    let Some((left, right)) = text.split_once(',') else {
        return Err(format!("expected two numbers as \"r,p\", got \"{text}\"").into());
    };
    Ok((parse_number(left)?, parse_number(right)?))
}

fn parse_number(text: &str) -> Result<f64, Box<dyn Error>> {
    let trimmed = text.trim();
    trimmed
        .parse()
        .map_err(|err| format!("cannot parse \"{trimmed}\" as a number: {err}").into())
}

fn parse_float_list(text: &str) -> Result<Vec<f64>, Box<dyn Error>> {
    if text.trim().is_empty() {
        return Err("the probability list is empty".into());
    }
    text.split(',').map(parse_number).collect()
}

fn parse_index_list(text: &str) -> Result<Vec<usize>, Box<dyn Error>> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<usize>().map_err(|err| {
                format!("cannot parse \"{part}\" as a state index: {err}").into()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::{parse_float_list, parse_index_list, parse_pair};

    #[test]
    fn pair_parsing_accepts_spaces_and_rejects_junk() {
        assert_eq!(parse_pair("2.5, 0.3").unwrap(), (2.5, 0.3));
        assert!(parse_pair("2.5").is_err());
        assert!(parse_pair("a,b").is_err());
    }

    #[test]
    fn index_list_parsing_treats_empty_as_empty_set() {
        assert_eq!(parse_index_list("").unwrap(), Vec::<usize>::new());
        assert_eq!(parse_index_list(" 0, 2,5").unwrap(), vec![0, 2, 5]);
        assert!(parse_index_list("0,-1").is_err());
    }

    #[test]
    fn float_list_parsing_rejects_empty_input() {
        assert_eq!(parse_float_list("1e-1,1e-2").unwrap(), vec![0.1, 0.01]);
        assert!(parse_float_list("").is_err());
    }
}
