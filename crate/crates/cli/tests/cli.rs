use std::process::{Command, Output};

fn hanner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hanner"))
        .args(args)
        .env_remove("HANNER_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn fvector_paper_rows() {
    let o = hanner(&[
        "fvector", "--a", "1/2", "--n", "2", "--kmax", "5", "--engine", "paper",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,coefficient");
    assert_eq!(lines[3], "2,34");
    assert_eq!(lines.len(), 7);
}

#[test]
fn fvector_geometric_and_json() {
    let o = hanner(&[
        "--format",
        "json",
        "fvector",
        "--a",
        "1/2",
        "--n",
        "2",
        "--kmax",
        "4",
        "--engine",
        "geometric",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        v["coefficient"],
        serde_json::json!(["8", "24", "32", "16", "1"])
    );
}

#[test]
fn schedule_letters() {
    let o = hanner(&["schedule", "--a", "1/2", "--steps", "4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().next(), Some("P,H,P,H"));
    let o = hanner(&["schedule", "--a", "2/5", "--steps", "10", "--window", "5"]);
    assert!(stdout(&o).contains("m,word,products"));
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(
        code(&hanner(&[
            "fvector", "--a", "3/2", "--n", "2", "--kmax", "5"
        ])),
        3
    );
    assert_eq!(
        code(&hanner(&[
            "fvector", "--a", "1/2", "--n", "2", "--kmax", "5", "--bogus"
        ])),
        3
    );
    assert_eq!(
        code(&hanner(&[
            "fvector", "--a", "1/2", "--n", "2", "--kmax", "5", "--engine", "fast"
        ])),
        3
    );
    assert_eq!(code(&hanner(&[])), 3);
    assert_eq!(
        code(&hanner(&[
            "asymptotics",
            "--a",
            "1/2",
            "--delta",
            "1/2",
            "--nmax",
            "30"
        ])),
        3
    );
    assert_eq!(
        code(&hanner(&[
            "lower-bound",
            "--a",
            "1/2",
            "--q",
            "2",
            "--m",
            "2",
            "--k",
            "32"
        ])),
        3
    );
    assert_eq!(
        code(&hanner(&[
            "trees", "--a", "1/2", "--q", "2", "--m", "3", "--budget", "10"
        ])),
        3
    );
    assert_eq!(code(&hanner(&["oracle", "--a", "1/2", "--n", "5"])), 3);
    assert_eq!(code(&hanner(&["--help"])), 0);
}

#[test]
fn tolerance_failure_exits_2() {
    let args = [
        "asymptotics",
        "--a",
        "1/2",
        "--delta",
        "1/2",
        "--nmax",
        "20",
        "--tolerance",
        "0.0001",
    ];
    let o = hanner(&args);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside"));
}

#[test]
fn asymptotics_csv_file() {
    let dir = std::env::temp_dir().join(format!("hanner-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rows.csv");
    let o = hanner(&[
        "asymptotics",
        "--a",
        "1/2",
        "--delta",
        "1/2",
        "--nmax",
        "20",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let rows = std::fs::read_to_string(&path).unwrap();
    assert_eq!(rows.lines().next(), Some("n,d,k,Q,m,p,log2_coeff,rho"));
    assert_eq!(rows.lines().count(), 22);
    assert!(stdout(&o).starts_with("slope"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn oracle_reports() {
    let o = hanner(&["--format", "json", "oracle", "--a", "1/2", "--n", "2"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["f_vector"], serde_json::json!([8, 24, 32, 16]));
    assert_eq!(v["face_total"], 81);
    assert_eq!(
        (v["R2"].as_u64(), v["r_inv_sq"].as_u64()),
        (Some(2), Some(2))
    );
    let o = hanner(&[
        "--format",
        "json",
        "oracle",
        "--a",
        "1/2",
        "--n",
        "1",
        "--full-lattice",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["faces"].as_array().unwrap().len(), 9);
}

#[test]
fn flm_report_triple() {
    let o = hanner(&[
        "--format",
        "json",
        "flm-report",
        "--a",
        "1/2",
        "--delta",
        "1/2",
        "--nmax",
        "22",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let r = &v["report"];
    assert_eq!(r["facet_exponent"], 0.5);
    assert_eq!(r["vertex_exponent"], 0.75);
    assert_eq!(r["radii_exponent"], 1.0);
    assert_eq!(r["total"], 2.25);
    assert!((r["fitted_vertex_exponent"].as_f64().unwrap() - 0.75).abs() < 0.05);
}

#[test]
fn phi_and_trees_and_lower_bound() {
    let o = hanner(&["phi", "--word", "RSR"]);
    assert!(stdout(&o).contains("4,1,16\n4,2,2\n"));
    let o = hanner(&[
        "--format", "json", "trees", "--a", "1/2", "--q", "2", "--m", "2",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["trees"], 20);
    assert_eq!(v["tree_sum"], v["engine"]);
    let o = hanner(&[
        "--format",
        "json",
        "lower-bound",
        "--a",
        "1/2",
        "--q",
        "2",
        "--m",
        "3",
        "--k",
        "8",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        (v["h"].as_u64(), v["leaves"].as_u64(), v["jstar"].as_u64()),
        (Some(1), Some(16), Some(4))
    );
    assert_eq!(v["holds"], true);
}

#[test]
fn config_defaults_and_override() {
    let dir = std::env::temp_dir().join(format!("hanner-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("defaults.conf");
    std::fs::write(
        &cfg,
        "# defaults\nengine = geometric\nkmax = 4\nformat = json\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = hanner(&["--config", cfg, "fvector", "--a", "1/2", "--n", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        v["coefficient"],
        serde_json::json!(["8", "24", "32", "16", "1"])
    );
    let o = hanner(&[
        "--config", cfg, "fvector", "--a", "1/2", "--n", "2", "--engine", "paper", "--format",
        "csv",
    ]);
    assert!(stdout(&o).contains("2,34"));
    assert_eq!(
        code(&hanner(&["--config", "/nonexistent/x.conf", "selftest"])),
        3
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn deterministic_across_thread_counts() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_hanner"))
            .args([
                "--format",
                "json",
                "asymptotics",
                "--a",
                "1/3",
                "--delta",
                "1/2",
                "--nmax",
                "24",
            ])
            .env("HANNER_THREADS", threads)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("3"));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_hanner"))
        .args(["selftest"])
        .env("HANNER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 3);
}

#[test]
fn selftest_passes() {
    let o = hanner(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).lines().skip(1).all(|l| l.contains(",true,")));
}
