use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "case,rep,m,rel_err,apriori,residual,accepted,tau,wall_ms";

fn marktop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marktop")).args(args).output().expect("binary runs")
}

fn marktop_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marktop"))
        .args(args)
        .env("MARKTOP_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[derive(Debug, Clone)]
struct Row {
    case: String,
    rep: String,
    m: usize,
    rel_err: Option<f64>,
    apriori: Option<f64>,
    residual: f64,
    accepted: bool,
}

fn parse_csv(text: &str) -> Vec<Row> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 9, "{l}");
            let opt = |s: &str| if s.is_empty() { None } else { Some(s.parse::<f64>().unwrap()) };
            Row {
                case: f[0].into(),
                rep: f[1].into(),
                m: f[2].parse().unwrap(),
                rel_err: opt(f[3]),
                apriori: opt(f[4]),
                residual: f[5].parse().unwrap(),
                accepted: f[6].parse().unwrap(),
            }
        })
        .collect()
}

fn without_timing(text: &str) -> String {
    text.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

fn min_err(rows: &[Row], case: &str, rep: &str) -> f64 {
    rows.iter()
        .filter(|r| r.case == case && r.rep == rep)
        .filter_map(|r| r.rel_err)
        .fold(f64::INFINITY, f64::min)
}

/// Last accepted degree before the first rejection.
fn chosen_m(rows: &[Row], case: &str, rep: &str) -> usize {
    rows.iter()
        .filter(|r| r.case == case && r.rep == rep)
        .take_while(|r| r.accepted)
        .map(|r| r.m)
        .last()
        .unwrap()
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("missing {key}"))
        .to_string()
}

#[test]
fn nodes_prints_bounds() {
    let out = stdout(&marktop(&["nodes", "--alpha=-inf", "--beta=0", "--c=0.5", "--d=1", "--m=4"]));
    let nodes: Vec<f64> = field(&out, "nodes").split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(nodes.len(), 8);
    assert!(nodes.iter().all(|&z| z > 0.5 && z < 1.0));
    let eta: f64 = field(&out, "eta").parse().unwrap();
    let two_rho: f64 = field(&out, "2rho^2m").parse().unwrap();
    assert!(eta <= two_rho + 1e-10);
    assert!(field(&out, "apriori").parse::<f64>().is_ok());
}

#[test]
fn nodes_marks_undefined_bound() {
    let out = stdout(&marktop(&["nodes", "--c=1e-14", "--d=1", "--m=1"]));
    assert!(field(&out, "2rho^2m").parse::<f64>().unwrap() >= 1.0);
    assert_eq!(field(&out, "apriori"), "invalid");
}

#[test]
fn invalid_geometry_exits_with_config_code() {
    assert_eq!(marktop(&["nodes", "--c=1", "--d=1", "--m=2"]).status.code(), Some(2));
    assert_eq!(marktop(&["scan", "--c=2", "--d=1"]).status.code(), Some(2));
    assert_eq!(marktop(&["matfun", "--function", "power"]).status.code(), Some(2));
    assert_eq!(marktop_env(&["matfun", "--n", "16"], "zero").status.code(), Some(2));
}

#[test]
fn oversized_oracle_exits_with_runtime_code() {
    assert_eq!(marktop(&["matfun", "--n", "1500", "--lmin", "1", "--lmax", "3"]).status.code(), Some(3));
}

#[test]
fn scan_reaches_machine_precision_on_easy_interval() {
    let rows = parse_csv(&stdout(&marktop(&["scan", "--c", "0.5", "--d", "1", "--m-max", "10"])));
    for rep in ["pfd", "bary", "thiele"] {
        assert!(min_err(&rows, "scalar", rep) <= 1e-11, "{rep}");
    }
}

#[test]
fn scan_degrades_modestly_with_condition() {
    let rows = parse_csv(&stdout(&marktop(&["scan", "--c", "1e-6", "--d", "1", "--m-max", "30", "--m-min", "5"])));
    assert!(rows.iter().all(|r| r.m >= 5));
    for rep in ["pfd", "bary", "thiele"] {
        assert!(min_err(&rows, "scalar", rep) <= 1e-9, "{rep}");
    }
}

#[test]
fn rejected_rows_exceed_the_threshold() {
    let rows = parse_csv(&stdout(&marktop(&["scan", "--c", "1e-3", "--d", "1", "--m-max", "25"])));
    let mut rejected = 0;
    for r in rows.iter().filter(|r| !r.accepted) {
        rejected += 1;
        let threshold = r.apriori.map_or(f64::INFINITY, |b| 5.0 * b);
        assert!(r.residual >= threshold, "{r:?}");
    }
    assert!(rejected > 0);
}

#[test]
fn matfun_cases_behave_as_expected() {
    let args = [
        "matfun", "--function", "log-ratio", "--matrix", "random", "--n", "96", "--lmin", "25", "--lmax", "139.2",
        "--seed", "5", "--case", "i,ii,iv", "--reps", "pfd,bary,thiele",
    ];
    let text = stdout(&marktop(&args));
    let rows = parse_csv(&text);
    assert!(min_err(&rows, "i", "pfd") <= 1e-9);
    for rep in ["pfd", "bary", "thiele"] {
        assert!(chosen_m(&rows, "ii", rep) > chosen_m(&rows, "i", rep), "{rep}");
    }
    // the three representations agree on diagonal arguments
    let mut by_m: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.case == "iv") {
        if let Some(e) = r.rel_err {
            by_m.entry(r.m).or_default().push(e);
        }
    }
    for (m, errs) in by_m.iter().filter(|(_, e)| e.len() == 3 && e[0] > 1e-11) {
        let (lo, hi) = errs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
        assert!(hi <= 1.01 * lo, "m={m}: {errs:?}");
    }
    for r in rows.iter().filter(|r| r.accepted && r.m <= chosen_m(&rows, &r.case, &r.rep)) {
        if let (Some(e), Some(b)) = (r.rel_err, r.apriori) {
            if r.case != "ii" {
                assert!(e <= b + 1e-12, "{r:?}");
            }
        }
    }
}

#[test]
fn output_is_reproducible_and_independent_of_thread_count() {
    let args = ["matfun", "--n", "48", "--lmin", "1", "--lmax", "50", "--seed", "9", "--case", "i,iii", "--reps", "pfd,thiele"];
    let a = stdout(&marktop_env(&args, "1"));
    let b = stdout(&marktop_env(&args, "3"));
    assert_eq!(without_timing(&a), without_timing(&b));
}

#[test]
fn generated_files_round_trip_through_matfun() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    let p = path.to_str().unwrap();
    stdout(&marktop(&["gen", "--n", "40", "--lmin", "2", "--lmax", "30", "--seed", "4", "-o", p]));
    let first = std::fs::read_to_string(&path).unwrap();
    stdout(&marktop(&["gen", "--n", "40", "--lmin", "2", "--lmax", "30", "--seed", "4", "-o", p]));
    assert_eq!(first, std::fs::read_to_string(&path).unwrap());
    assert_eq!(first.lines().count(), 1 + 40 + 39);

    let from_file = stdout(&marktop(&["matfun", "--matrix", "file", "--file", p, "--reps", "pfd"]));
    let direct =
        stdout(&marktop(&["matfun", "--n", "40", "--lmin", "2", "--lmax", "30", "--seed", "4", "--reps", "pfd"]));
    assert_eq!(without_timing(&from_file), without_timing(&direct));
    assert!(!Path::new(&dir.path().join("missing")).exists());
    assert_eq!(marktop(&["matfun", "--matrix", "file", "--file", "/does/not/exist"]).status.code(), Some(2));
}

#[test]
fn laplacian_power_run() {
    let rows = parse_csv(&stdout(&marktop(&[
        "matfun", "--function", "power", "--gamma=-0.5", "--matrix", "laplacian1d", "--n", "63", "--case", "iii", "--reps",
        "pfd",
    ])));
    assert!(min_err(&rows, "iii", "pfd") <= 1e-8);
}
