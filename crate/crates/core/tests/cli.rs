use std::fs;
use std::path::PathBuf;

use qfp::cli::{run, EXIT_INVALID, EXIT_OK, EXIT_UNCONVERGED};
use qfp::sweep::{read_csv, CSV_HEADER};

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qfp(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("qfp").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qfp-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn validate_passes() {
    let o = qfp(&["validate"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stdout);
    assert!(o.stdout.lines().count() >= 5);
    assert!(o.stdout.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn rectify_prints_one_record() {
    let o = qfp(&[
        "rectify", "--p-inc", "0.001", "--length", "0.45", "--dw1", "0.6", "--dw2", "0", "--gamma1", "1", "--gamma2", "1",
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines.len(), 1);
    let fields: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(fields.len(), CSV_HEADER.len());
    assert_eq!(&fields[..6], &["0.001", "0.45", "0.6", "0", "1", "1"]);
    assert_eq!(&fields[15..17], &["true", "true"]);

    let with_header = qfp(&["rectify", "--p-inc", "0.001", "--header"]);
    assert_eq!(with_header.stdout.lines().next().unwrap(), CSV_HEADER.join(","));
}

#[test]
fn transmit_fills_one_direction() {
    let o = qfp(&["transmit", "--p-inc", "0.01", "--dw1", "0.3", "--direction", "rtl", "--header"]);
    assert_eq!(o.code, EXIT_OK);
    let recs = read_csv(o.stdout.as_bytes()).unwrap();
    assert_eq!(recs.len(), 1);
    assert!(recs[0].t12.is_none() && recs[0].t21.is_some());
    assert!(recs[0].converged_21 && !recs[0].converged_12);
}

#[test]
fn sweep_from_config_file() {
    let cfg = scratch("map.cfg");
    let out = scratch("map.csv");
    fs::write(
        &cfg,
        "# low power rectification map\np_inc = 0.001\ndw2 = 0\naxis1 = L:0:1:5\naxis2 = dw1:-1:1:3\noutputs = rectify,p1,p2,profile_average\n",
    )
    .unwrap();
    let o = qfp(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let recs = read_csv(text.as_bytes()).unwrap();
    assert_eq!(recs.len(), 15);
    // Row-major: the first axis varies slowest.
    assert_eq!(recs[0].params.length, 0.0);
    assert_eq!(recs[2].params.dw1, 1.0);
    assert_eq!(recs[3].params.length, 0.25);
    assert!(recs.iter().all(|r| r.avg_intracavity.is_some() && r.r_factor.is_some()));
}

#[test]
fn flags_override_config() {
    let cfg = scratch("override.cfg");
    fs::write(&cfg, "p_inc = 0.5\nlength = 0.2\n").unwrap();
    let o = qfp(&["rectify", "--config", cfg.to_str().unwrap(), "--p-inc", "0.25", "--header"]);
    assert_eq!(o.code, EXIT_OK);
    let r = &read_csv(o.stdout.as_bytes()).unwrap()[0];
    assert_eq!(r.params.p_inc, 0.25);
    assert_eq!(r.params.length, 0.2);
}

#[test]
fn invalid_input_exits_one() {
    let cfg = scratch("bad.cfg");
    fs::write(&cfg, "p_inc = 0.1\nwavelength = 3\n").unwrap();
    for args in [
        vec!["rectify", "--config", cfg.to_str().unwrap()],
        vec!["rectify", "--p-inc", "-1"],
        vec!["rectify", "--bogus"],
        vec!["transmit", "--direction", "up"],
        vec!["sweep", "--axis1", "p_inc:0:1:5:log"],
        vec!["sweep", "--axis1", "L:0:1:1"],
        vec!["sweep"],
        vec!["search", "--l-min", "1", "--l-max", "0"],
        vec!["rectify", "--damping", "0"],
        vec![],
    ] {
        let o = qfp(&args);
        assert_eq!(o.code, EXIT_INVALID, "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn strict_reports_unconverged_points() {
    let starved = ["rectify", "--p-inc", "0.1", "--max-iterations", "1"];
    assert_eq!(qfp(&starved).code, EXIT_OK);
    let mut strict = starved.to_vec();
    strict.push("--strict");
    let o = qfp(&strict);
    assert_eq!(o.code, EXIT_UNCONVERGED);
    assert!(o.stdout.contains("false"));
}

#[test]
fn transparent_grid() {
    let o = qfp(&["sweep", "--dw1", "1e6", "--dw2", "-1e6", "--axis1", "L:0.1:0.9:2", "--axis2", "p_inc:0.01:1:2:log"]);
    assert_eq!(o.code, EXIT_OK);
    let recs = read_csv(o.stdout.as_bytes()).unwrap();
    assert_eq!(recs.len(), 4);
    for r in &recs {
        assert!((r.t12.unwrap() - 1.0).abs() < 1e-6);
        assert!((r.t21.unwrap() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn sweep_output_independent_of_workers() {
    let base = ["sweep", "--p-inc", "0.01", "--axis1", "L:0:1:9", "--axis2", "dw1:-2:2:7", "--outputs", "rectify,p1,p2,profile_average"];
    let runs: Vec<String> = ["1", "3", "8"]
        .iter()
        .map(|w| {
            let mut a = base.to_vec();
            a.extend(["--workers", w]);
            qfp(&a).stdout
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn profile_samples() {
    let o = qfp(&["profile", "--p-inc", "0.1", "--samples", "11"]);
    assert_eq!(o.code, EXIT_OK);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines[0], "z,p_intr");
    assert_eq!(lines.len(), 12);
    assert!(lines[11].starts_with("1,"));
    assert!(o.stderr.contains("average intracavity intensity"));
}

#[test]
fn search_prints_best_point() {
    let o = qfp(&["search", "--p-inc", "0.05", "--grid", "9", "--rounds", "1", "--identical", "--dw2", "0.2"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let recs = read_csv(o.stdout.as_bytes()).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].params.dw1, 0.2);
    assert!(recs[0].r_factor.unwrap() <= 1e-8);
}

#[test]
fn help_goes_to_stdout() {
    let o = qfp(&["--help"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.contains("sweep"));
}
