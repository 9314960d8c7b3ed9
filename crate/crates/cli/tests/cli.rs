use std::io::Write as _;
use std::process::{Command, Output};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/clin_synthetic.csv");

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-mct"))
        .args(args)
        .env("ROBUST_MCT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn temp_csv(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn csv_table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let j = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

#[test]
fn fixture_groups_are_dose_ordered_with_control_first() {
    let (header, rows) = csv_table(&stdout(&["mlt", "--input", FIXTURE, "--response", "CreatKinase", "--format", "csv"]));
    let labels: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(labels, ["62.5 - 0", "125 - 0", "250 - 0", "500 - 0", "1000 - 0"]);
    let p = column(&header, &rows, "p_adjusted");
    assert!(p.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(p[4] < 0.001);
}

#[test]
fn two_groups_reduce_to_the_pooled_t_test() {
    let x = [4.1, 5.3, 3.8, 6.0, 5.1, 4.4];
    let y = [6.2, 5.9, 7.4, 5.1, 6.8];
    let mut text = String::from("Dose,y\n");
    for v in x {
        text += &format!("0,{v}\n");
    }
    for v in y {
        text += &format!("1,{v}\n");
    }
    let f = temp_csv(&text);
    let (header, rows) = csv_table(&stdout(&["dunnett", "--input", f.path().to_str().unwrap(), "--response", "y", "--format", "csv"]));
    assert_eq!(rows.len(), 1);

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ss = |v: &[f64]| v.iter().map(|a| (a - mean(v)).powi(2)).sum::<f64>();
    let df = (x.len() + y.len() - 2) as f64;
    let se = ((ss(&x) + ss(&y)) / df * (1.0 / x.len() as f64 + 1.0 / y.len() as f64)).sqrt();
    let t = (mean(&y) - mean(&x)) / se;
    let p = 2.0 * robust_mct::dist::t_cdf(-t.abs(), df);
    assert!((column(&header, &rows, "statistic")[0] - t).abs() < 1e-12);
    assert!((column(&header, &rows, "df")[0] - df).abs() < 1e-12);
    assert!((column(&header, &rows, "p_adjusted")[0] - p).abs() < 1e-10);
}

#[test]
fn human_and_csv_carry_the_same_numbers() {
    let base = ["satterthwaite", "--input", FIXTURE, "--response", "ALT"];
    let csv_out = stdout(&[&base[..], &["--format", "csv"]].concat());
    let human = stdout(&base);
    let (_, rows) = csv_table(&csv_out);
    for row in rows {
        let line = human.lines().find(|l| l.starts_with(&row[1])).expect("row in human output");
        let fields: Vec<&str> = line[row[1].len()..].split_whitespace().collect();
        assert_eq!(fields, row[2..].iter().map(String::as_str).collect::<Vec<_>>());
    }
}

#[test]
fn csv_output_round_trips_at_15_digits() {
    let (_, rows) = csv_table(&stdout(&["robust", "--input", FIXTURE, "--response", "CreatKinase", "--format", "csv"]));
    for row in rows {
        for field in &row[2..] {
            let v: f64 = field.parse().unwrap();
            let again: f64 = format!("{v:.14e}").parse().unwrap();
            assert_eq!(v, again, "{field} is not a 15-digit value");
        }
    }
}

#[test]
fn missing_values_abort_unless_dropped() {
    let f = temp_csv("Dose,y\n0,1.2\n0,2.2\n0,1.9\n5,NA\n5,3.1\n5,2.8\n");
    let path = f.path().to_str().unwrap();
    let out = run(&["dunnett", "--input", path, "--response", "y"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("missing value"), "{err}");
    let ok = stdout(&["dunnett", "--input", path, "--response", "y", "--drop-missing"]);
    assert!(ok.contains("dropped rows with missing values at lines 5"), "{ok}");
}

#[test]
fn diagnostics_for_bad_input() {
    let f = temp_csv("Dose,y\n0,1.2\n0,2.2\n5,3.1\n");
    let out = run(&["dunnett", "--input", f.path().to_str().unwrap(), "--response", "y"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid design"));

    let f = temp_csv("Dose,y\n0,1.2\n0,abc\n5,3.1\n5,3.3\n");
    let err = String::from_utf8(run(&["dunnett", "--input", f.path().to_str().unwrap(), "--response", "y"]).stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("`abc`"), "{err}");

    let err = String::from_utf8(run(&["npar", "--input", FIXTURE, "--response", "Bilirubin"]).stderr).unwrap();
    assert!(err.contains("no column `Bilirubin`"), "{err}");

    let err = String::from_utf8(run(&["npar", "--input", FIXTURE, "--response", "ALT", "--control", "7"]).stderr).unwrap();
    assert!(err.contains("control group `7` not found"), "{err}");
}

#[test]
fn colr_reports_odds_ratios_and_json_is_valid() {
    let out = stdout(&["colr", "--input", FIXTURE, "--response", "CreatKinase", "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for r in rows {
        let (or, est) = (r["odds_ratio"].as_f64().unwrap(), r["estimate"].as_f64().unwrap());
        assert!((or.ln() - est).abs() < 1e-9);
        assert!(r["or_lower"].as_f64().unwrap() < or);
    }
    assert_eq!(doc["meta"]["df"], "inf");
}

#[test]
fn mmm_covers_every_endpoint_and_dose() {
    let out = stdout(&["mmm", "--input", FIXTURE, "--response", "CreatKinase,ALT", "--format", "csv"]);
    let (header, rows) = csv_table(&out);
    assert_eq!(rows.len(), 10);
    assert!(rows[0][1].starts_with("CreatKinase: ") && rows[9][1].starts_with("ALT: "));
    assert_eq!(column(&header, &rows, "df")[0], 11.0);
}

#[test]
fn plot_data_lists_points_means_and_sds() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.csv");
    stdout(&["npar", "--input", FIXTURE, "--response", "ALT", "--emit-plot-data", plot.to_str().unwrap()]);
    let (header, rows) = csv_table(&std::fs::read_to_string(plot).unwrap());
    assert_eq!(header, ["response", "group", "kind", "value"]);
    assert_eq!(rows.iter().filter(|r| r[2] == "point").count(), 60);
    assert_eq!(rows.iter().filter(|r| r[2] == "mean").count(), 6);
    assert_eq!(rows.iter().filter(|r| r[2] == "sd").count(), 6);
}

#[test]
fn sim_smoke_run() {
    let out = stdout(&["sim", "--runs", "100", "--procedures", "dun", "--format", "csv"]);
    let (header, rows) = csv_table(&out);
    assert_eq!(header.len(), 14);
    assert_eq!(rows.len(), 28);
}

#[test]
fn sim_reads_a_config_file_and_flags_win() {
    let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    f.write_all(b"runs = 150\nseed = 5\nprocedures = [\"dun\", \"rob\"]\nrows = [\"h1-mixture\"]\n").unwrap();
    let path = f.path().to_str().unwrap();
    let (header, rows) = csv_table(&stdout(&["sim", "--config", path, "--runs", "200", "--format", "csv"]));
    assert_eq!(rows.len(), 12);
    assert!(column(&header, &rows, "runs").iter().all(|&r| r == 200.0));
    let again = stdout(&["sim", "--config", path, "--runs", "200", "--format", "csv"]);
    assert_eq!(csv_table(&again).1, rows);
}

#[test]
fn invalid_procedure_is_a_usage_error() {
    let out = run(&["sim", "--runs", "10", "--procedures", "dun,steel"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("valid: dun, sat, saw, rob, mlt, rel"), "{err}");
}
