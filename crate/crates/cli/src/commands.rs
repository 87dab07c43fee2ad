//! Implementations of the analyze, design and simulate subcommands.

use serde_json::json;

use goldsci_core::design::{
    optimize_allocation, required_total_n, Allocation, DesignOptions, EffectScenario,
    MixtureScenario,
};
use goldsci_core::sci::{
    analyze, ArmSummary, DesignParams, MethodReport, SciMethod, TrialData, VarianceMode,
};
use goldsci_core::simulate::{run_simulation, MethodSummary, SimulationConfig, SimulationSummary};

use crate::config::RunConfig;
use crate::output::{emit, json_num, num, Format, Table};
use crate::{AnalyzeArgs, CliError, CommonArgs, DesignArgs, SimulateArgs};

/// Flag value if present, else config value, else `None`.
macro_rules! merged {
    ($flag:expr, $cfg:expr, $getter:ident, $key:literal) => {
        match $flag {
            Some(v) => Some(v),
            None => $cfg.$getter($key)?,
        }
    };
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(path) => Ok(RunConfig::load(path)?),
        None => Ok(RunConfig::default()),
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing required value: {flag}")))
}

/// Builds design parameters from explicit margins and/or historical effect.
fn build_params(
    alpha: Option<f64>,
    delta0: Option<f64>,
    delta1: Option<f64>,
    r: Option<f64>,
    mu_r_hist: Option<f64>,
    q: Option<f64>,
) -> Result<DesignParams, CliError> {
    let alpha = alpha.unwrap_or(0.025);
    let q = q.unwrap_or(0.01);
    let (delta0, delta1) = match (delta0, delta1, r, mu_r_hist) {
        (Some(d0), Some(d1), _, _) => (d0, d1),
        (None, None, Some(r), Some(mu)) => (r * mu, (1.0 - r) * mu),
        (Some(d0), None, Some(r), Some(mu)) => (d0, (1.0 - r) * mu),
        (None, Some(d1), Some(r), Some(mu)) => (r * mu, d1),
        _ => {
            return Err(CliError::usage(
                "margins unspecified: give --delta0/--delta1 or --r with --mu-r-hist",
            ))
        }
    };
    let params = DesignParams { alpha, delta0, delta1, r, mu_r_hist, q };
    params.validate()?;
    Ok(params)
}

fn parse_method(s: &str) -> Result<SciMethod, CliError> {
    match s {
        "iu" => Ok(SciMethod::Iu),
        "informative" => Ok(SciMethod::Informative),
        "single-step" => Ok(SciMethod::SingleStep),
        "baseline" => Ok(SciMethod::BaselineNoSci),
        other => Err(CliError::usage(format!(
            "unknown method '{other}' (expected iu, informative, single-step or baseline)"
        ))),
    }
}

fn parse_method_list(s: &str) -> Result<Vec<SciMethod>, CliError> {
    if s == "all" {
        return Ok(SciMethod::ALL.to_vec());
    }
    s.split(',').map(|tok| parse_method(tok.trim())).collect()
}

fn dump_effective(common: &CommonArgs, cfg: &RunConfig) -> Result<(), CliError> {
    if let Some(path) = &common.dump_config {
        std::fs::write(path, cfg.dump())
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn set_params(cfg: &mut RunConfig, params: &DesignParams) {
    cfg.set("alpha", params.alpha.to_string());
    cfg.set("delta0", params.delta0.to_string());
    cfg.set("delta1", params.delta1.to_string());
    if let Some(r) = params.r {
        cfg.set("r", r.to_string());
    }
    if let Some(mu) = params.mu_r_hist {
        cfg.set("mu_r_hist", mu.to_string());
    }
    cfg.set("q", params.q.to_string());
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

pub fn run_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let p = &args.params;
    let params = build_params(
        merged!(p.alpha, cfg, get_f64, "alpha"),
        merged!(p.delta0, cfg, get_f64, "delta0"),
        merged!(p.delta1, cfg, get_f64, "delta1"),
        merged!(p.r, cfg, get_f64, "r"),
        merged!(p.mu_r_hist, cfg, get_f64, "mu_r_hist"),
        merged!(p.q, cfg, get_f64, "q"),
    )?;

    let mean_e = require(args.mean_e, "--mean-e")?;
    let mean_r = require(args.mean_r, "--mean-r")?;
    let mean_p = require(args.mean_p, "--mean-p")?;
    let n_e = require(merged!(args.n_e, cfg, get_usize, "n_e"), "--n-e")?;
    let n_r = require(merged!(args.n_r, cfg, get_usize, "n_r"), "--n-r")?;
    let n_p = require(merged!(args.n_p, cfg, get_usize, "n_p"), "--n-p")?;

    let sigma = merged!(args.sigma, cfg, get_f64, "sigma");
    let sd_e = merged!(args.sd_e, cfg, get_f64, "sd_e");
    let sd_r = merged!(args.sd_r, cfg, get_f64, "sd_r");
    let sd_p = merged!(args.sd_p, cfg, get_f64, "sd_p");

    let (variance_mode, sds) = match (sigma, sd_e, sd_r, sd_p) {
        (Some(s), None, None, None) => (VarianceMode::KnownSigma(s), (None, None, None)),
        (None, Some(e), Some(r), Some(p)) => {
            (VarianceMode::PooledPerComparison, (Some(e), Some(r), Some(p)))
        }
        _ => {
            return Err(CliError::usage(
                "give either --sigma or all of --sd-e, --sd-r, --sd-p",
            ))
        }
    };
    let trial = TrialData {
        arm_e: ArmSummary { mean: mean_e, sd: sds.0, n: n_e },
        arm_r: ArmSummary { mean: mean_r, sd: sds.1, n: n_r },
        arm_p: ArmSummary { mean: mean_p, sd: sds.2, n: n_p },
        variance_mode,
    };

    let method_spec = args
        .method
        .or_else(|| cfg.get("method").map(str::to_string))
        .unwrap_or_else(|| "all".into());
    let methods: Vec<SciMethod> = if method_spec == "all" {
        SciMethod::ALL.to_vec()
    } else {
        vec![parse_method(&method_spec)?]
    };

    let format = resolve_format(&args.common, &cfg, Format::Text)?;

    let mut effective = cfg.clone();
    set_params(&mut effective, &params);
    match variance_mode {
        VarianceMode::KnownSigma(s) => effective.set("sigma", s.to_string()),
        VarianceMode::PooledPerComparison => {
            effective.set("sd_e", sds.0.unwrap().to_string());
            effective.set("sd_r", sds.1.unwrap().to_string());
            effective.set("sd_p", sds.2.unwrap().to_string());
        }
    }
    effective.set("n_e", n_e.to_string());
    effective.set("n_r", n_r.to_string());
    effective.set("n_p", n_p.to_string());
    effective.set("method", method_spec.clone());
    effective.set("output_format", format.name().to_string());
    dump_effective(&args.common, &effective)?;

    let mut table = Table::new(vec![
        "method",
        "ell_EP",
        "ell_ER",
        "L_EP",
        "L_ER",
        "filter",
        "filter_holds",
        "gatekeeper_rejected",
        "verdict",
    ]);
    for method in methods {
        let report = analyze(&trial, &params, method)?;
        push_report_row(&mut table, &report);
    }
    emit(args.common.out.as_deref(), &table.render(format))?;
    Ok(())
}

fn push_report_row(table: &mut Table, report: &MethodReport) {
    let (l_ep, l_er, filter, holds) = match &report.sci {
        Some(sci) => (
            num(sci.l_ep),
            num(sci.l_er),
            sci.filter_used.name().to_string(),
            sci.filter_holds,
        ),
        None => (
            "-".to_string(),
            "-".to_string(),
            "superiority".to_string(),
            report.outcome.filter_holds,
        ),
    };
    let json_l = match &report.sci {
        Some(sci) => (json_num(sci.l_ep), json_num(sci.l_er)),
        None => (serde_json::Value::Null, serde_json::Value::Null),
    };
    table.push(
        vec![
            report.method.name().to_string(),
            num(report.ell_ep),
            num(report.ell_er),
            l_ep,
            l_er,
            filter.clone(),
            holds.to_string(),
            report.outcome.gatekeeper_rejected.to_string(),
            report.outcome.verdict.name().to_string(),
        ],
        vec![
            json!(report.method.name()),
            json_num(report.ell_ep),
            json_num(report.ell_er),
            json_l.0,
            json_l.1,
            json!(filter),
            json!(holds),
            json!(report.outcome.gatekeeper_rejected),
            json!(report.outcome.verdict.name()),
        ],
    );
}

fn resolve_format(
    common: &CommonArgs,
    cfg: &RunConfig,
    default: Format,
) -> Result<Format, CliError> {
    let spec = common
        .format
        .clone()
        .or_else(|| cfg.get("output_format").map(str::to_string));
    match spec {
        Some(s) => Ok(Format::parse(&s)?),
        None => Ok(default),
    }
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

/// Parses "v:weight,v:weight" into (v, weight) pairs.
fn parse_mixture(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    s.split(',')
        .map(|tok| {
            let (v, w) = tok
                .trim()
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("mixture component '{tok}': expected v:weight")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("mixture component '{tok}': bad v")))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("mixture component '{tok}': bad weight")))?;
            Ok((v, w))
        })
        .collect()
}

pub fn run_design(args: DesignArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let p = &args.params;
    let params = build_params(
        merged!(p.alpha, cfg, get_f64, "alpha"),
        merged!(p.delta0, cfg, get_f64, "delta0"),
        merged!(p.delta1, cfg, get_f64, "delta1"),
        merged!(p.r, cfg, get_f64, "r"),
        merged!(p.mu_r_hist, cfg, get_f64, "mu_r_hist"),
        merged!(p.q, cfg, get_f64, "q"),
    )?;
    let sigma = require(merged!(args.sigma, cfg, get_f64, "sigma"), "--sigma")?;
    let effect_ep = require(merged!(args.effect_ep, cfg, get_f64, "effect_ep"), "--effect-ep")?;
    let method = parse_method(&require(
        args.method
            .clone()
            .or_else(|| cfg.get("method").map(str::to_string)),
        "--method",
    )?)?;
    let target = merged!(args.target_power, cfg, get_f64, "target_power").unwrap_or(0.9);
    let mu_r_hist = merged!(args.params.mu_r_hist.or(params.mu_r_hist), cfg, get_f64, "mu_r_hist");

    // Scenario: a mixture flag/config, a v value, or a direct effect.
    let cfg_v_list = cfg.get_f64_list("v_list")?;
    let cfg_weights = cfg.get_f64_list("weights")?;
    let (mixture, scenario_label, dumped_vs): (MixtureScenario, String, Option<(Vec<f64>, Vec<f64>)>) =
        if let Some(spec) = &args.mixture {
            let pairs = parse_mixture(spec)?;
            let mu = mu_r_hist
                .ok_or_else(|| CliError::usage("--mixture requires --mu-r-hist"))?;
            let components = pairs
                .iter()
                .map(|&(v, w)| (EffectScenario::from_v(effect_ep, v, mu, sigma), w))
                .collect();
            let (vs, ws): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            (
                MixtureScenario::new(components).map_err(cli_from_core)?,
                format!("mixture({spec})"),
                Some((vs, ws)),
            )
        } else if let (Some(vs), Some(ws)) = (&cfg_v_list, &cfg_weights) {
            if args.v.is_none() && args.effect_rp.is_none() {
                let mu = mu_r_hist
                    .ok_or_else(|| CliError::usage("config v_list/weights require mu_r_hist"))?;
                if vs.len() != ws.len() {
                    return Err(CliError::usage("v_list and weights must have equal length"));
                }
                let components = vs
                    .iter()
                    .zip(ws)
                    .map(|(&v, &w)| (EffectScenario::from_v(effect_ep, v, mu, sigma), w))
                    .collect();
                (
                    MixtureScenario::new(components).map_err(cli_from_core)?,
                    "mixture(config)".to_string(),
                    Some((vs.clone(), ws.clone())),
                )
            } else {
                single_scenario(&args, &cfg, effect_ep, sigma, mu_r_hist)?
            }
        } else {
            single_scenario(&args, &cfg, effect_ep, sigma, mu_r_hist)?
        };

    let mut opts = DesignOptions::default();
    if let Some(reps) = merged!(args.mc_reps, cfg, get_u64, "reps") {
        opts.mc_reps = reps;
    }
    if let Some(seed) = merged!(args.mc_seed, cfg, get_u64, "seed") {
        opts.mc_seed = seed;
    }
    if let Some(cap) = args.n_e_cap {
        opts.n_e_cap = cap;
    }

    let format = resolve_format(&args.common, &cfg, Format::Text)?;

    let mut effective = cfg.clone();
    set_params(&mut effective, &params);
    effective.set("sigma", sigma.to_string());
    effective.set("effect_ep", effect_ep.to_string());
    if let Some((vs, ws)) = &dumped_vs {
        effective.set(
            "v_list",
            vs.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        effective.set(
            "weights",
            ws.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
    } else {
        effective.set("effect_rp", mixture.components[0].0.effect_rp.to_string());
    }
    effective.set("method", method.name().to_string());
    effective.set("target_power", target.to_string());
    effective.set("reps", opts.mc_reps.to_string());
    effective.set("seed", opts.mc_seed.to_string());
    effective.set("output_format", format.name().to_string());
    dump_effective(&args.common, &effective)?;

    let run = || -> Result<(Table, ()), CliError> {
        let mut table = Table::new(vec![
            "method",
            "scenario",
            "n_E",
            "n_R",
            "n_P",
            "N",
            "achieved_power",
        ]);
        let row = match (args.c_r, args.c_p) {
            (Some(c_r), Some(c_p)) => {
                let size = required_total_n(&mixture, c_r, c_p, &params, method, target, &opts)
                    .map_err(cli_from_core)?;
                (size.n_e, size.n_r, size.n_p, size.n_total, size.achieved_power)
            }
            (None, None) => {
                let res = optimize_allocation(&mixture, &params, method, target, &opts)
                    .map_err(cli_from_core)?;
                (res.n_e, res.n_r, res.n_p, res.n_total, res.achieved_power)
            }
            _ => return Err(CliError::usage("give both --c-r and --c-p, or neither")),
        };
        table.push(
            vec![
                method.name().to_string(),
                scenario_label.clone(),
                row.0.to_string(),
                row.1.to_string(),
                row.2.to_string(),
                row.3.to_string(),
                num(row.4),
            ],
            vec![
                json!(method.name()),
                json!(scenario_label),
                json!(row.0),
                json!(row.1),
                json!(row.2),
                json!(row.3),
                json_num(row.4),
            ],
        );
        Ok((table, ()))
    };
    let (table, ()) = with_threads(args.threads, run)?;
    emit(args.common.out.as_deref(), &table.render(format))?;
    Ok(())
}

fn single_scenario(
    args: &DesignArgs,
    cfg: &RunConfig,
    effect_ep: f64,
    sigma: f64,
    mu_r_hist: Option<f64>,
) -> Result<(MixtureScenario, String, Option<(Vec<f64>, Vec<f64>)>), CliError> {
    let effect_rp = match args.effect_rp {
        Some(e) => Some(e),
        None => cfg.get_f64("effect_rp")?,
    };
    let scenario = match (args.v, effect_rp) {
        (Some(v), None) => {
            let mu = mu_r_hist.ok_or_else(|| CliError::usage("--v requires --mu-r-hist"))?;
            EffectScenario::from_v(effect_ep, v, mu, sigma)
        }
        (None, Some(e)) => EffectScenario::new(effect_ep, e, sigma),
        (Some(_), Some(_)) => {
            return Err(CliError::usage("give either --v or --effect-rp, not both"))
        }
        (None, None) => {
            return Err(CliError::usage("missing scenario: give --effect-rp, --v or --mixture"))
        }
    };
    let label = match scenario.v {
        Some(v) => format!("v={v}"),
        None => format!("effect_rp={}", scenario.effect_rp),
    };
    Ok((scenario.into(), label, None))
}

fn cli_from_core(e: goldsci_core::Error) -> CliError {
    e.into()
}

/// Runs `f` inside a dedicated thread pool when a thread count is requested.
pub(crate) fn with_threads<T>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError>
where
    T: Send,
{
    match threads {
        None => f(),
        Some(n) => {
            if n == 0 {
                return Err(CliError::usage("--threads must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::numerical(format!("cannot build thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let p = &args.params;
    let params = build_params(
        merged!(p.alpha, cfg, get_f64, "alpha"),
        merged!(p.delta0, cfg, get_f64, "delta0"),
        merged!(p.delta1, cfg, get_f64, "delta1"),
        merged!(p.r, cfg, get_f64, "r"),
        merged!(p.mu_r_hist, cfg, get_f64, "mu_r_hist"),
        merged!(p.q, cfg, get_f64, "q"),
    )?;
    let sigma = require(merged!(args.sigma, cfg, get_f64, "sigma"), "--sigma")?;
    let effect_ep = require(merged!(args.effect_ep, cfg, get_f64, "effect_ep"), "--effect-ep")?;
    let n_e = require(merged!(args.n_e, cfg, get_usize, "n_e"), "--n-e")?;
    let n_r = require(merged!(args.n_r, cfg, get_usize, "n_r"), "--n-r")?;
    let n_p = require(merged!(args.n_p, cfg, get_usize, "n_p"), "--n-p")?;
    let reps = require(merged!(args.reps, cfg, get_u64, "reps"), "--reps")?;
    if reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    let seed = merged!(args.seed, cfg, get_u64, "seed").unwrap_or(42);
    let methods_spec = args
        .methods
        .or_else(|| cfg.get("method").map(str::to_string))
        .unwrap_or_else(|| "all".into());
    let methods = parse_method_list(&methods_spec)?;
    let mu_r_hist = merged!(args.params.mu_r_hist.or(params.mu_r_hist), cfg, get_f64, "mu_r_hist");

    let v_list = match &args.v_list {
        Some(s) => Some(
            s.split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::usage(format!("bad v value '{tok}'")))
                })
                .collect::<Result<Vec<f64>, CliError>>()?,
        ),
        None => cfg.get_f64_list("v_list")?,
    };

    let alloc = Allocation::from_sizes(n_e, n_r, n_p).map_err(cli_from_core)?;
    let format = resolve_format(&args.common, &cfg, Format::Csv)?;

    let base_scenario = match (&v_list, args.effect_rp, cfg.get_f64("effect_rp")?) {
        (Some(_), None, _) => EffectScenario::new(effect_ep, 0.0, sigma),
        (None, Some(e), _) | (None, None, Some(e)) => EffectScenario::new(effect_ep, e, sigma),
        (Some(_), Some(_), _) => {
            return Err(CliError::usage("give either --v-list or --effect-rp, not both"))
        }
        (None, None, None) => {
            return Err(CliError::usage("missing scenario: give --effect-rp or --v-list"))
        }
    };

    let config = SimulationConfig {
        scenario: base_scenario,
        alloc,
        params,
        methods,
        reps,
        seed,
    };

    let mut effective = cfg.clone();
    set_params(&mut effective, &params);
    effective.set("sigma", sigma.to_string());
    effective.set("effect_ep", effect_ep.to_string());
    effective.set("n_e", n_e.to_string());
    effective.set("n_r", n_r.to_string());
    effective.set("n_p", n_p.to_string());
    effective.set("method", methods_spec.clone());
    effective.set("reps", reps.to_string());
    effective.set("seed", seed.to_string());
    effective.set("output_format", format.name().to_string());
    match &v_list {
        Some(vs) => effective.set(
            "v_list",
            vs.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        ),
        None => effective.set("effect_rp", base_scenario.effect_rp.to_string()),
    }
    dump_effective(&args.common, &effective)?;

    let summaries: Vec<SimulationSummary> = with_threads(args.threads, || match &v_list {
        Some(vs) => {
            let mu = mu_r_hist.ok_or_else(|| CliError::usage("--v-list requires --mu-r-hist"))?;
            goldsci_core::simulate::sweep_v(&config, vs, mu).map_err(cli_from_core)
        }
        None => Ok(vec![run_simulation(&config).map_err(cli_from_core)?]),
    })?;

    let table = summary_table(&summaries);
    emit(args.common.out.as_deref(), &table.render(format))?;
    Ok(())
}

/// Simulation summaries as rows of the standard CSV schema.
pub fn summary_table(summaries: &[SimulationSummary]) -> Table {
    let mut table = Table::new(vec![
        "v",
        "method",
        "filter_rate",
        "pos_total",
        "pos_ER",
        "pos_EP",
        "median_L_EP",
        "median_L_ER",
        "reps",
        "seed",
    ]);
    for summary in summaries {
        for m in &summary.per_method {
            push_summary_row(&mut table, summary, m);
        }
    }
    table
}

fn push_summary_row(table: &mut Table, summary: &SimulationSummary, m: &MethodSummary) {
    let v_cell = match summary.v {
        Some(v) => num(v),
        None => String::new(),
    };
    let v_json = match summary.v {
        Some(v) => json!(v),
        None => serde_json::Value::Null,
    };
    table.push(
        vec![
            v_cell,
            m.method.name().to_string(),
            num(m.filter_rate),
            num(m.pos_total),
            num(m.pos_er),
            num(m.pos_ep),
            num(m.median_l_ep),
            num(m.median_l_er),
            summary.reps.to_string(),
            summary.seed.to_string(),
        ],
        vec![
            v_json,
            json!(m.method.name()),
            json_num(m.filter_rate),
            json_num(m.pos_total),
            json_num(m.pos_er),
            json_num(m.pos_ep),
            json_num(m.median_l_ep),
            json_num(m.median_l_er),
            json!(summary.reps),
            json!(summary.seed),
        ],
    );
}
