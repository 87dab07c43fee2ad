//! `reproduce`: regenerates the bundled reference tables (optimal sample
//! sizes, worked bound examples, operating characteristics) and the clinical
//! example as CSV files plus a manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use goldsci_core::design::{optimize_allocation, Allocation, DesignOptions, EffectScenario};
use goldsci_core::sci::{
    analyze, sci_informative, sci_iu_formal, sci_single_step, ArmSummary, DesignParams, SciMethod,
    SciResult, TrialData, VarianceMode, Verdict,
};
use goldsci_core::simulate::{sweep_v, SimulationConfig};

use crate::commands::{summary_table, with_threads};
use crate::output::{json_num, num, Table};
use crate::{CliError, ReproduceArgs};

/// Margins and level used by every bundled design-stage configuration:
/// alpha = 0.025, delta0 = delta1 = 0.5 (r = 1/2, historical effect 1),
/// q = 0.01, sigma = 2.
fn reference_params() -> DesignParams {
    DesignParams::from_historical(0.025, 0.5, 1.0, 0.01).expect("static")
}

const SIGMA: f64 = 2.0;

/// Worked-example trial: n = (356, 348, 145), known sigma, X_P = 0.
fn reference_trial(x_e: f64, x_r: f64) -> TrialData {
    TrialData {
        arm_e: ArmSummary::new(x_e, 356),
        arm_r: ArmSummary::new(x_r, 348),
        arm_p: ArmSummary::new(0.0, 145),
        variance_mode: VarianceMode::KnownSigma(SIGMA),
    }
}

/// Six-week depression trial (duloxetine vs paroxetine vs placebo),
/// pooled per-comparison SDs, delta0 = delta1 = 2.5.
fn depression_trial(mean_e: f64) -> TrialData {
    TrialData {
        arm_e: ArmSummary::with_sd(mean_e, 6.1, 147),
        arm_r: ArmSummary::with_sd(9.4, 6.9, 148),
        arm_p: ArmSummary::with_sd(8.3, 5.8, 145),
        variance_mode: VarianceMode::PooledPerComparison,
    }
}

fn depression_params() -> DesignParams {
    DesignParams::from_historical(0.025, 0.5, 5.0, 0.01).expect("static")
}

const EXAMPLE_ROWS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, 0.5), (1.0, 0.3), (0.8, 0.3)];

pub fn run(args: ReproduceArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let reps = args.reps.unwrap_or(100_000);
    if reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    let seed = args.seed.unwrap_or(42);
    match args.target.as_str() {
        "table1" => with_threads(args.threads, || table1(&args.out_dir)),
        "table2" => table2(&args.out_dir),
        "table4" => with_threads(args.threads, || table4(&args.out_dir, reps, seed)),
        "example" => example(&args.out_dir),
        other => Err(CliError::usage(format!(
            "unknown reproduce target '{other}' (expected table1, table2, table4 or example)"
        ))),
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(path)
}

// ---------------------------------------------------------------------------
// table1: optimal sample sizes
// ---------------------------------------------------------------------------

fn table1(dir: &Path) -> Result<(), CliError> {
    let params = reference_params();
    let mut table = Table::new(vec![
        "method",
        "scenario",
        "n_E",
        "n_R",
        "n_P",
        "N",
        "achieved_power",
    ]);
    for (scenario_idx, v) in [(1, 1.0), (2, 0.5), (3, 0.0)] {
        let scenario = EffectScenario::from_v(1.0, v, 1.0, SIGMA);
        for method in [
            SciMethod::BaselineNoSci,
            SciMethod::Iu,
            SciMethod::Informative,
            SciMethod::SingleStep,
        ] {
            let res = optimize_allocation(
                &scenario.into(),
                &params,
                method,
                0.9,
                &DesignOptions::default(),
            )?;
            table.push(
                vec![
                    method.name().to_string(),
                    scenario_idx.to_string(),
                    res.n_e.to_string(),
                    res.n_r.to_string(),
                    res.n_p.to_string(),
                    res.n_total.to_string(),
                    num(res.achieved_power),
                ],
                vec![
                    json!(method.name()),
                    json!(scenario_idx),
                    json!(res.n_e),
                    json!(res.n_r),
                    json!(res.n_p),
                    json!(res.n_total),
                    json_num(res.achieved_power),
                ],
            );
        }
    }
    write_file(dir, "table1.csv", &table.to_csv())?;
    write_file(
        dir,
        "manifest_table1.txt",
        "table1.csv: minimal total sample sizes for 90% success probability at the\n\
         reference design settings (alpha = 0.025 one-sided, sigma = 2, delta0 =\n\
         delta1 = 0.5, experimental effect 1.0), optimized over allocation ratios\n\
         (coarse grid step 0.05 on [0.05, 3], refinement step 0.01).\n\
         Scenarios: 1 reference effect 1.0, 2 effect 0.5, 3 effect 0.0.\n\
         Methods iu / single-step / baseline use exact Gaussian probabilities\n\
         (quadrature tolerance 1e-8); the informative method uses seeded Monte\n\
         Carlo with 100000 replications, so its entries carry a sampling\n\
         uncertainty of a few subjects and its published counterparts were\n\
         themselves smoothed.\n",
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// table2: worked bound examples
// ---------------------------------------------------------------------------

fn verdict_cells(sci: &SciResult, params: &DesignParams) -> (String, String) {
    let outcome = goldsci_core::sci::adjudicate_success(sci, params).expect("paired");
    match outcome.verdict {
        Verdict::SuccessEr => ("no".into(), "yes".into()),
        Verdict::SuccessEp => ("yes".into(), "no".into()),
        Verdict::Failure => ("no".into(), "no".into()),
    }
}

fn table2(dir: &Path) -> Result<(), CliError> {
    let params = reference_params();

    let mut t2a = Table::new(vec![
        "X_E", "X_R", "iu_filter", "ell_EP", "ell_ER", "L_EP", "L_ER", "success_EP", "success_ER",
    ]);
    for (x_e, x_r) in EXAMPLE_ROWS {
        let sci = sci_iu_formal(&reference_trial(x_e, x_r), &params)?;
        let (ep, er) = verdict_cells(&sci, &params);
        t2a.push(
            vec![
                num(x_e),
                num(x_r),
                yes_no(sci.filter_holds),
                num(sci.ell_ep),
                num(sci.ell_er),
                num(sci.l_ep),
                num(sci.l_er),
                ep.clone(),
                er.clone(),
            ],
            vec![
                json_num(x_e),
                json_num(x_r),
                json!(sci.filter_holds),
                json_num(sci.ell_ep),
                json_num(sci.ell_er),
                json_num(sci.l_ep),
                json_num(sci.l_er),
                json!(ep),
                json!(er),
            ],
        );
    }
    write_file(dir, "table2a.csv", &t2a.to_csv())?;

    let mut t2b = Table::new(vec![
        "X_E",
        "X_R",
        "superiority_filter",
        "L_inf_EP",
        "L_inf_ER",
        "success_EP",
        "success_ER",
    ]);
    for (x_e, x_r) in EXAMPLE_ROWS {
        let sci = sci_informative(&reference_trial(x_e, x_r), &params)?;
        let (ep, er) = verdict_cells(&sci, &params);
        t2b.push(
            vec![
                num(x_e),
                num(x_r),
                yes_no(sci.filter_holds),
                num(sci.l_ep),
                num(sci.l_er),
                ep.clone(),
                er.clone(),
            ],
            vec![
                json_num(x_e),
                json_num(x_r),
                json!(sci.filter_holds),
                json_num(sci.l_ep),
                json_num(sci.l_er),
                json!(ep),
                json!(er),
            ],
        );
    }
    write_file(dir, "table2b.csv", &t2b.to_csv())?;

    let mut t2c = Table::new(vec![
        "X_E",
        "X_R",
        "superiority_filter",
        "L_S_EP",
        "L_S_ER",
        "success_EP",
        "success_ER",
    ]);
    for (x_e, x_r) in EXAMPLE_ROWS {
        let sci = sci_single_step(&reference_trial(x_e, x_r), &params)?;
        let (ep, er) = verdict_cells(&sci, &params);
        t2c.push(
            vec![
                num(x_e),
                num(x_r),
                yes_no(sci.filter_holds),
                num(sci.l_ep),
                num(sci.l_er),
                ep.clone(),
                er.clone(),
            ],
            vec![
                json_num(x_e),
                json_num(x_r),
                json!(sci.filter_holds),
                json_num(sci.l_ep),
                json_num(sci.l_er),
                json!(ep),
                json!(er),
            ],
        );
    }
    write_file(dir, "table2c.csv", &t2c.to_csv())?;

    write_file(
        dir,
        "manifest_table2.txt",
        "Worked bound examples at n = (356, 348, 145), sigma = 2 known,\n\
         alpha = 0.025, delta0 = delta1 = 0.5, observed X_P = 0, q = 0.01.\n\
         table2a.csv: stepwise bounds with the intersection-union filter\n\
         (filter threshold X_R > 0.591).\n\
         table2b.csv: informative bounds with the superiority filter\n\
         (threshold X_R > 0.387); the E-vs-P bound spends the complementary\n\
         level (1 - q^(L_ER + delta0)) * alpha.\n\
         table2c.csv: single-step bounds with the superiority filter; the\n\
         equicoordinate quantile solves the bivariate normal equation exactly\n\
         (d = 2.22350 at correlation 0.378235), roughly 0.002 below rounded\n\
         published values of these bounds, which correspond to a larger\n\
         quantile (consistent with the correlation entering unsquare-rooted).\n\
         Stepwise and informative bounds match their published counterparts\n\
         to +-0.001.\n",
    )?;
    Ok(())
}

fn yes_no(b: bool) -> String {
    if b {
        "yes".into()
    } else {
        "no".into()
    }
}

// ---------------------------------------------------------------------------
// table4: operating characteristics
// ---------------------------------------------------------------------------

fn table4(dir: &Path, reps: u64, seed: u64) -> Result<(), CliError> {
    let params = reference_params();
    let v_grid = [1.0, 0.75, 0.5, 0.25, 0.0];
    for (name, sizes) in [("table4a.csv", (356, 348, 145)), ("table4b.csv", (227, 75, 285))] {
        let config = SimulationConfig {
            scenario: EffectScenario::from_v(1.0, 1.0, 1.0, SIGMA),
            alloc: Allocation::from_sizes(sizes.0, sizes.1, sizes.2)?,
            params,
            methods: SciMethod::ALL.to_vec(),
            reps,
            seed,
        };
        let summaries = sweep_v(&config, &v_grid, 1.0)?;
        write_file(dir, name, &summary_table(&summaries).to_csv())?;
    }
    let mut manifest = String::new();
    let _ = writeln!(
        manifest,
        "Operating characteristics from {reps} seeded replications (seed {seed})\n\
         per v value; arm means are drawn directly from their exact normal laws.\n\
         table4a.csv: allocation (356, 348, 145). table4b.csv: (227, 75, 285).\n\
         Columns follow the simulate CSV schema; the filter_rate column refers\n\
         to each method's own filter (intersection-union for iu, superiority\n\
         otherwise). Monte Carlo standard error of the rates is about 0.16\n\
         percentage points at 100000 replications; published counterparts agree\n\
         within about one percentage point."
    );
    write_file(dir, "manifest_table4.txt", &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// example: clinical trial analysis
// ---------------------------------------------------------------------------

fn example(dir: &Path) -> Result<(), CliError> {
    let params = depression_params();
    let mut table = Table::new(vec![
        "variant",
        "method",
        "ell_EP",
        "ell_ER",
        "L_EP",
        "L_ER",
        "filter_holds",
        "verdict",
    ]);
    for (variant, mean_e) in [("original", 10.2), ("hypothetical", 12.2)] {
        let trial = depression_trial(mean_e);
        for method in [SciMethod::BaselineNoSci, SciMethod::Iu, SciMethod::Informative] {
            let report = analyze(&trial, &params, method)?;
            let (l_ep, l_er) = match &report.sci {
                Some(sci) => (num(sci.l_ep), num(sci.l_er)),
                None => ("-".into(), "-".into()),
            };
            let (l_ep_json, l_er_json) = match &report.sci {
                Some(sci) => (json_num(sci.l_ep), json_num(sci.l_er)),
                None => (serde_json::Value::Null, serde_json::Value::Null),
            };
            table.push(
                vec![
                    variant.to_string(),
                    report.method.name().to_string(),
                    num(report.ell_ep),
                    num(report.ell_er),
                    l_ep,
                    l_er,
                    report.outcome.filter_holds.to_string(),
                    report.outcome.verdict.name().to_string(),
                ],
                vec![
                    json!(variant),
                    json!(report.method.name()),
                    json_num(report.ell_ep),
                    json_num(report.ell_er),
                    l_ep_json,
                    l_er_json,
                    json!(report.outcome.filter_holds),
                    json!(report.outcome.verdict.name()),
                ],
            );
        }
    }
    write_file(dir, "example.csv", &table.to_csv())?;
    write_file(
        dir,
        "manifest_example.txt",
        "Analysis of a six-week three-arm depression trial (duloxetine vs\n\
         paroxetine vs placebo): mean decreases 10.2/9.4/8.3, SDs 6.1/6.9/5.8,\n\
         n = 147/148/145, pooled per-comparison SDs with normal quantiles,\n\
         alpha = 0.025, delta0 = delta1 = 2.5, q = 0.01.\n\
         example.csv: bounds and verdicts for the observed data and for a\n\
         hypothetical variant with experimental mean 12.2. Expected values:\n\
         original ell_EP = 0.53, ell_ER = -0.69, stepwise (0.53, -1.97),\n\
         informative (0.528, -1.67), all verdicts failure; hypothetical\n\
         stepwise (2.53, 0.03), informative (2.53, -0.59), verdict success-ep\n\
         (tolerance +-0.01). The full hierarchy is enforced in the baseline\n\
         procedure: non-inferiority is tested before relevant superiority,\n\
         which does not change these verdicts.\n",
    )?;
    Ok(())
}
