use std::path::Path;
use std::process::{Command, Output};

fn gksop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gksop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'), "CSV must use LF line endings");
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| if c.is_empty() { None } else { Some(c.parse().unwrap()) })
                .collect()
        })
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<Option<f64>>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].unwrap()).collect()
}

#[test]
fn snr_sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("snr.toml");
    std::fs::write(
        &config,
        "d_m = 2\ne_m = 2\nmethods = [\"closed\"]\nsweep = \"d_gamma_bar_db\"\nstart = 0.0\nend = 60.0\nstep = 5.0\n",
    )
    .unwrap();
    let out = dir.path().join("snr.csv");
    let run = gksop(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["d_gamma_bar_db", "closed"]);
    assert_eq!(rows.len(), 13);
    let sop = column(&header, &rows, "closed");
    assert!(sop.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(rows[4][0], Some(20.0));
    assert_eq!(sop[4], 3.455_407_919_084_929e-3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let args = [
            "sweep",
            "--sweep",
            "rate_rs",
            "--start",
            "0.5",
            "--end",
            "2",
            "--step",
            "0.5",
            "--methods",
            "closed,mc,conventional",
            "--mc_samples",
            "20000",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ];
        assert!(gksop(&args).status.success());
        std::fs::read(out).unwrap()
    };
    let first = run("a.csv", "1");
    assert_eq!(first, run("b.csv", "1"));
    assert_eq!(first, run("c.csv", "3"));
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("rate_rs,closed,mc,mc_stderr,conventional,gap\n"));
    // 17 significant digits in every cell.
    for cell in text.lines().nth(1).unwrap().split(',') {
        let mantissa = cell.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{cell}");
    }
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "d_gamma_bar_db = 30.0\nmethods = [\"closed\"]\n").unwrap();
    let out = dir.path().join("p.csv");
    let args = [
        "point",
        "--config",
        config.to_str().unwrap(),
        "--d_gamma_bar_db",
        "20",
        "--out",
        out.to_str().unwrap(),
    ];
    let run = gksop(&args);
    assert!(run.status.success());
    let (_, rows) = read_csv(&out);
    assert_eq!(rows[0][0], Some(20.0));
    assert_eq!(rows[0][1], Some(3.455_407_919_084_929e-3));
}

#[test]
fn point_reports_units_and_agrees_with_simulation() {
    let run = gksop(&[
        "point",
        "--d_gamma_bar_db",
        "10",
        "--methods",
        "closed,mc",
        "--mc_samples",
        "1000000",
    ]);
    assert!(run.status.success());
    let report = String::from_utf8(run.stdout).unwrap();
    assert!(report.contains("d_gamma_bar_db=10 -> linear 10;"), "{report}");
    assert!(report.contains("e_gamma_bar_db=0 -> linear 1"), "{report}");
    let value = |name: &str| -> f64 {
        let line = report.lines().find(|l| l.starts_with(name)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    let (closed, mc) = (value("closed"), value("mc"));
    let se = (mc * (1.0 - mc) / 1e6).sqrt() * 1.2;
    assert!((closed - mc).abs() <= (3.0 * se).max(0.02 * closed), "{closed} vs {mc}");
}

#[test]
fn identical_links_give_one_half() {
    let out = tempfile::NamedTempFile::new().unwrap();
    let args = [
        "point",
        "--e_gamma_bar_db",
        "20",
        "--rate_rs",
        "0",
        "--mu",
        "0",
        "--methods",
        "closed,quadrature",
        "--out",
        out.path().to_str().unwrap(),
    ];
    assert!(gksop(&args).status.success());
    let (_, rows) = read_csv(out.path());
    for v in &rows[0][1..] {
        assert!((v.unwrap() - 0.5).abs() <= 1e-8);
    }
}

#[test]
fn equal_shapes_reject_the_asymptote() {
    let run = gksop(&["point", "--d_k", "2", "--d_m", "2", "--methods", "asymptotic"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("k_d != m_d"));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.toml");
    std::fs::write(&config, "methods = []\n").unwrap();
    assert_eq!(
        gksop(&["point", "--config", config.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(gksop(&["point", "--d_m", "0"]).status.code(), Some(1));
    assert_eq!(gksop(&["point", "--methods", "bogus"]).status.code(), Some(1));
    assert_eq!(
        gksop(&["sweep", "--sweep", "mu", "--start", "3", "--end", "1", "--step", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(gksop(&["point", "--unknown"]).status.code(), Some(1));
}

#[test]
fn numerical_failures_leave_empty_cells_and_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail.csv");
    let args = [
        "sweep",
        "--sweep",
        "mu",
        "--start",
        "0",
        "--end",
        "1",
        "--step",
        "1",
        "--methods",
        "closed,quadrature",
        "--quad_rel_tol",
        "1e-300",
        "--out",
        out.to_str().unwrap(),
    ];
    let run = gksop(&args);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("failed_cells=2"));
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[1].is_some() && r[2].is_none()));
}

#[test]
fn validate_reports_each_check_and_detects_faults() {
    let run = gksop(&["validate", "--level", "fast"]);
    assert_eq!(run.status.code(), Some(0));
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text
        .lines()
        .filter(|l| l.starts_with("check="))
        .all(|l| l.contains("status=pass")));
    assert!(text.contains("check=closed_vs_quadrature"));

    let run = gksop(&["validate", "--inject_fault"]);
    assert_eq!(run.status.code(), Some(3));
    assert!(String::from_utf8(run.stdout)
        .unwrap()
        .contains("check=mixture_normalization status=fail"));
}
