//! End-to-end checks of the command-line interface: flag handling, exit
//! codes, output formats, configuration files, and the reproduce targets.

use std::path::Path;
use std::process::{Command, Output};

fn goldsci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goldsci"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const DEPRESSION: &[&str] = &[
    "--mean-e", "10.2", "--mean-r", "9.4", "--mean-p", "8.3", "--sd-e", "6.1", "--sd-r", "6.9",
    "--sd-p", "5.8", "--n-e", "147", "--n-r", "148", "--n-p", "145", "--delta0", "2.5",
    "--delta1", "2.5",
];

#[test]
fn analyze_reports_all_methods_with_exit_zero() {
    let mut args = vec!["analyze"];
    args.extend_from_slice(DEPRESSION);
    args.extend_from_slice(&["--method", "all"]);
    let out = goldsci(&args);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("0.534388"), "unadjusted E-P bound missing:\n{text}");
    assert!(text.contains("-0.686601"), "unadjusted E-R bound missing:\n{text}");
    assert!(text.contains("-1.965612"), "stepwise E-R bound missing:\n{text}");
    assert!(text.contains("0.527705"), "informative E-P bound missing:\n{text}");
    assert_eq!(text.matches("failure").count(), 4, "all verdicts are failures:\n{text}");
}

#[test]
fn analyze_success_row() {
    let out = goldsci(&[
        "analyze", "--mean-e", "1", "--mean-r", "1", "--mean-p", "0", "--sigma", "2", "--n-e",
        "356", "--n-r", "348", "--n-p", "145", "--delta0", "0.5", "--delta1", "0.5", "--method",
        "iu",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("success-er"));
}

#[test]
fn analyze_missing_flag_exits_2_and_names_it() {
    let out = goldsci(&[
        "analyze", "--mean-e", "1", "--mean-r", "1", "--mean-p", "0", "--sigma", "2", "--n-e",
        "356", "--n-r", "348", "--delta0", "0.5", "--delta1", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.lines().count() == 1, "single-line diagnostic expected: {err}");
    assert!(err.contains("--n-p"), "diagnostic names the flag: {err}");
}

#[test]
fn analyze_rejects_mixed_variance_spec() {
    let out = goldsci(&[
        "analyze", "--mean-e", "1", "--mean-r", "1", "--mean-p", "0", "--sigma", "2", "--sd-e",
        "1.0", "--n-e", "356", "--n-r", "348", "--n-p", "145", "--delta0", "0.5", "--delta1",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_json_mirrors_csv_fields() {
    let mut args = vec!["analyze"];
    args.extend_from_slice(DEPRESSION);
    args.extend_from_slice(&["--method", "iu", "--format", "json"]);
    let out = goldsci(&args);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let row = &parsed[0];
    for key in [
        "method",
        "ell_EP",
        "ell_ER",
        "L_EP",
        "L_ER",
        "filter",
        "filter_holds",
        "gatekeeper_rejected",
        "verdict",
    ] {
        assert!(!row[key].is_null() || key == "L_ER", "missing {key}: {row}");
    }
    assert_eq!(row["verdict"], "failure");
}

#[test]
fn design_fixed_ratios_reproduces_baseline_total() {
    let out = goldsci(&[
        "design", "--effect-ep", "1", "--v", "1", "--mu-r-hist", "1", "--r", "0.5", "--sigma",
        "2", "--method", "baseline", "--c-r", "1.0145", "--c-p", "0.2957", "--format", "csv",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let data_line = text.lines().nth(1).unwrap();
    let n: usize = data_line.split(',').nth(5).unwrap().parse().unwrap();
    assert!((795..=799).contains(&n), "N = {n}");
}

#[test]
fn design_rejects_half_specified_ratios() {
    let out = goldsci(&[
        "design", "--effect-ep", "1", "--effect-rp", "1", "--sigma", "2", "--delta0", "0.5",
        "--delta1", "0.5", "--method", "iu", "--c-r", "1.0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn design_rejects_bad_mixture_weights() {
    let out = goldsci(&[
        "design", "--effect-ep", "1", "--mu-r-hist", "1", "--r", "0.5", "--sigma", "2",
        "--method", "iu", "--mixture", "1:0.6,0.75:0.6", "--c-r", "1", "--c-p", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("weights"), "{}", stderr(&out));
}

#[test]
fn design_singleton_mixture_equals_plain_scenario() {
    let fixed = [
        "--effect-ep", "1", "--mu-r-hist", "1", "--r", "0.5", "--sigma", "2", "--method", "iu",
        "--c-r", "0.9775", "--c-p", "0.4073", "--format", "csv",
    ];
    let mut a_args = vec!["design", "--mixture", "1:1.0"];
    a_args.extend_from_slice(&fixed);
    let mut b_args = vec!["design", "--v", "1"];
    b_args.extend_from_slice(&fixed);
    let a = goldsci(&a_args);
    let b = goldsci(&b_args);
    assert!(a.status.success() && b.status.success());
    let pick = |s: &str| {
        s.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .skip(2)
            .take(4)
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    assert_eq!(pick(&stdout(&a)), pick(&stdout(&b)));
}

#[test]
fn simulate_zero_reps_exits_2() {
    let out = goldsci(&[
        "simulate", "--effect-ep", "1", "--effect-rp", "1", "--sigma", "2", "--n-e", "356",
        "--n-r", "348", "--n-p", "145", "--delta0", "0.5", "--delta1", "0.5", "--reps", "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_csv_schema_and_seed_stability() {
    let args = [
        "simulate", "--effect-ep", "1", "--effect-rp", "0.5", "--sigma", "2", "--n-e", "100",
        "--n-r", "100", "--n-p", "100", "--delta0", "0.5", "--delta1", "0.5", "--reps", "5000",
        "--seed", "9",
    ];
    let a = goldsci(&args);
    let b = goldsci(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let text = stdout(&a);
    assert!(text.starts_with(
        "v,method,filter_rate,pos_total,pos_ER,pos_EP,median_L_EP,median_L_ER,reps,seed\n"
    ));
    assert_eq!(text.lines().count(), 5, "header plus one row per method:\n{text}");
}

#[test]
fn config_file_round_trips_through_dump() {
    let dir = std::env::temp_dir().join(format!("goldsci-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let dumped = dir.join("effective.conf");
    let args = [
        "simulate", "--effect-ep", "1", "--v-list", "0,1", "--mu-r-hist", "1", "--sigma", "2",
        "--n-e", "120", "--n-r", "110", "--n-p", "90", "--delta0", "0.5", "--delta1", "0.5",
        "--reps", "3000", "--seed", "5",
    ];
    let mut first = args.to_vec();
    let dump_flag = dumped.to_str().unwrap();
    first.extend_from_slice(&["--dump-config", dump_flag]);
    let a = goldsci(&first);
    assert!(a.status.success(), "stderr: {}", stderr(&a));

    // Re-running purely from the dumped config gives identical output.
    let b = goldsci(&["simulate", "--config", dump_flag]);
    assert!(b.status.success(), "stderr: {}", stderr(&b));
    assert_eq!(stdout(&a), stdout(&b));

    // And dumping again reproduces the same file.
    let dumped2 = dir.join("effective2.conf");
    let c = goldsci(&[
        "simulate",
        "--config",
        dump_flag,
        "--dump-config",
        dumped2.to_str().unwrap(),
    ]);
    assert!(c.status.success());
    assert_eq!(
        std::fs::read_to_string(&dumped).unwrap(),
        std::fs::read_to_string(&dumped2).unwrap()
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = std::env::temp_dir().join(format!("goldsci-cli-badcfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.conf");
    std::fs::write(&path, "alpha = 0.025\nnonsense = 1\n").unwrap();
    let out = goldsci(&[
        "analyze", "--config", path.to_str().unwrap(), "--mean-e", "1", "--mean-r", "1",
        "--mean-p", "0", "--sigma", "2", "--n-e", "50", "--n-r", "50", "--n-p", "50", "--delta0",
        "0.5", "--delta1", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nonsense"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn flags_override_config_values() {
    let dir = std::env::temp_dir().join(format!("goldsci-cli-override-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("base.conf");
    std::fs::write(
        &path,
        "alpha = 0.025\ndelta0 = 0.5\ndelta1 = 0.5\nsigma = 2\nn_e = 356\nn_r = 348\nn_p = 145\n",
    )
    .unwrap();
    // X_R = 1 clears the superiority filter at alpha = 0.025 but not at a
    // much stricter level supplied via flag.
    let base = goldsci(&[
        "analyze", "--config", path.to_str().unwrap(), "--mean-e", "1", "--mean-r", "1",
        "--mean-p", "0", "--method", "informative", "--format", "csv",
    ]);
    assert!(base.status.success());
    assert!(stdout(&base).contains("success-er"));
    let strict = goldsci(&[
        "analyze", "--config", path.to_str().unwrap(), "--mean-e", "1", "--mean-r", "1",
        "--mean-p", "0", "--method", "informative", "--format", "csv", "--alpha", "0.0001",
    ]);
    assert!(strict.status.success());
    assert!(!stdout(&strict).contains("success-er"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reproduce_table2_and_example_artifacts() {
    let dir = std::env::temp_dir().join(format!("goldsci-repro-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = goldsci(&["reproduce", "table2", "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    for name in ["table2a.csv", "table2b.csv", "table2c.csv", "manifest_table2.txt"] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
    let t2a = std::fs::read_to_string(dir.join("table2a.csv")).unwrap();
    assert!(t2a.contains("0.204505"), "stepwise bound missing:\n{t2a}");

    let out = goldsci(&["reproduce", "example", "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let example = std::fs::read_to_string(dir.join("example.csv")).unwrap();
    assert!(example.contains("original"));
    assert!(example.contains("hypothetical"));
    assert!(example.contains("success-ep"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reproduce_unknown_target_exits_2() {
    let out = goldsci(&["reproduce", "table9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_informative_requires_valid_q() {
    let mut args = vec!["analyze"];
    args.extend_from_slice(DEPRESSION);
    args.extend_from_slice(&["--method", "informative", "--q", "1.5"]);
    let out = goldsci(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("q"));
}

#[test]
fn help_and_version_work() {
    assert!(goldsci(&["--help"]).status.success());
    assert!(goldsci(&["--version"]).status.success());
    assert!(Path::new(env!("CARGO_BIN_EXE_goldsci")).exists());
}
