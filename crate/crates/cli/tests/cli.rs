use std::path::Path;
use std::process::{Command, Output};

use pcosync_cli::export::{read_rewards, read_states, read_transitions};
use pcosync_core::dtmc::enumerate_states;
use pcosync_core::ModelParams;

fn pcosync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcosync"))
        .args(args)
        .env_remove("PCOSYNC_PROFILE_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pcosync(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>().join(","),
        "N,T,R,epsilon,mu,lambda,U,profile,metric,aggregate,value,per_node_mWh,reach_probability,states,transitions,wall_ms"
    );
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn single_query_gives_one_row() {
    let out = ok(&[
        "analyze",
        "--n",
        "8",
        "--t",
        "10",
        "--r",
        "3",
        "--eps",
        "0.1",
        "--mu",
        "0.2",
        "--lambda",
        "1.0",
        "--profile",
        "micaz",
        "--query",
        "power:avg",
    ]);
    let rows = rows(&out);
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(
        &row[..10],
        ["8", "10", "3", "0.1", "0.2", "1", "", "micaz", "power", "avg"]
    );
    let value: f64 = row[10].parse().unwrap();
    let per_node: f64 = row[11].parse().unwrap();
    assert!((per_node - value / 8.0 * 1000.0).abs() < 1e-15);
    assert_eq!(row[12], "1");
    assert_eq!(row[13], "24310");
    assert_eq!(row[15], "");
    assert!(!out.contains('\r'));
}

#[test]
fn half_cycle_refractory_reports_infinity() {
    let out = ok(&[
        "analyze",
        "--r",
        "5",
        "--query",
        "time:avg",
        "--query",
        "power:max",
    ]);
    for row in rows(&out) {
        assert_eq!(row[10], "inf");
        assert!(row[12].parse::<f64>().unwrap() < 1.0);
    }
}

#[test]
fn invalid_input_exits_with_one() {
    for args in [
        &["analyze", "--r", "10"][..],
        &["analyze", "--mu", "1.5"],
        &["analyze", "--lambda", "1.2"],
        &["analyze", "--query", "energy:avg"],
        &["restab", "--n", "10", "--u", "10"],
        &["restab", "--n", "10"],
        &["simulate", "--n", "4"],
        &["analyze", "--bogus"],
    ] {
        let out = pcosync(args);
        assert_eq!(
            out.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn solver_failure_keeps_rows_and_appends_status() {
    let out = pcosync(&[
        "analyze",
        "--n",
        "3",
        "--t",
        "4",
        "--r",
        "1,2",
        "--solver",
        "iterative",
        "--max-iterations",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let rows = rows(&String::from_utf8(out.stdout).unwrap());
    let last = rows.last().unwrap();
    assert_eq!(&last[8..10], ["status", "error"]);
    assert!(last[10].contains("converge"), "{}", last[10]);
    assert_eq!(last.len(), 16);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let args = [
        "analyze", "--n", "4,5", "--t", "6", "--r", "1:1:3", "--lambda", "0.5,1", "--u", "1,2",
    ];
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_pcosync"))
            .args(args)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert_eq!(
        rows(std::str::from_utf8(&one).unwrap()).len(),
        2 * 3 * 2 * 2 * 4
    );
}

#[test]
fn config_file_supplies_sweep_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(
        &cfg,
        "# small sweep\nn = 4\nt = 6\nr = 1\nr = 2\nlambda = 0.5:0.5:1.0\nquery = time:avg\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let all = rows(&ok(&["analyze", "--config", cfg]));
    assert_eq!(all.len(), 4);
    assert_eq!(
        all.iter()
            .map(|r| (r[2].as_str(), r[5].as_str()))
            .collect::<Vec<_>>(),
        [("1", "0.5"), ("1", "1"), ("2", "0.5"), ("2", "1")]
    );
    let overridden = rows(&ok(&["analyze", "--config", cfg, "--r", "3"]));
    assert_eq!(overridden.len(), 2);
    assert!(overridden.iter().all(|r| r[2] == "3"));
    let out = dir.path().join("out.csv");
    ok(&[
        "analyze",
        "--config",
        cfg,
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(rows(&std::fs::read_to_string(out).unwrap()), all);
}

#[test]
fn restabilisation_support_and_reduction() {
    let p = ModelParams::new(10, 10, 4, 0.1, 0.0).unwrap();
    let gamma1 = enumerate_states(&p)
        .filter(|s| s.largest_group() >= 9)
        .count();
    let out = pcosync(&[
        "restab", "--n", "10", "--t", "10", "--r", "4", "--mu", "0", "--u", "1", "--query",
        "time:avg",
    ]);
    assert!(out.status.success());
    let rows = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows[0][6], "1");
    assert_eq!(rows[0][13], gamma1.to_string());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("of 92378 global states"), "{stderr}");
}

#[test]
fn lone_oscillator_is_absorbed_within_a_cycle() {
    let out = ok(&[
        "restab",
        "--n",
        "15",
        "--t",
        "10",
        "--r",
        "4",
        "--eps",
        "0.1",
        "--mu",
        "0",
        "--u",
        "1",
        "--start",
        "(0,0,0,0,1,0,0,0,0,14)",
        "--query",
        "time:max",
    ]);
    let row = &rows(&out)[0];
    assert_eq!(row[10], "0.1");
}

#[test]
fn export_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "export",
        "--n",
        "2",
        "--t",
        "2",
        "--r",
        "0",
        "--eps",
        "0.5",
        "--mu",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for name in [
        "model.sta",
        "model.tra",
        "model.time.trew",
        "model.power.trew",
    ] {
        let got = std::fs::read(dir.path().join(name)).unwrap();
        let want = std::fs::read(golden.join(name)).unwrap();
        assert_eq!(got, want, "{name}");
    }
}

#[test]
fn export_reparses_stochastic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = pcosync(&[
        "export",
        "--n",
        "5",
        "--t",
        "6",
        "--r",
        "2",
        "--mu",
        "0.3",
        "--out",
        d,
        "--basename",
        "m",
    ]);
    assert!(out.status.success());
    let states = read_states(&std::fs::read_to_string(dir.path().join("m.sta")).unwrap()).unwrap();
    let (n, entries) =
        read_transitions(&std::fs::read_to_string(dir.path().join("m.tra")).unwrap()).unwrap();
    assert_eq!(states.len(), n);
    assert_eq!(n, 252);
    let mut mass = vec![0.0; n];
    for &(s, _, p) in &entries {
        mass[s] += p;
    }
    assert!(mass.iter().all(|m| (m - 1.0).abs() <= 1e-12));
    for kind in ["time", "power"] {
        let rewards = read_rewards(
            &std::fs::read_to_string(dir.path().join(format!("m.{kind}.trew"))).unwrap(),
        )
        .unwrap();
        assert_eq!(rewards.len(), entries.len());
        assert!(rewards
            .iter()
            .zip(&entries)
            .all(|(r, e)| (r.0, r.1) == (e.0, e.1) && r.2 >= 0.0));
    }
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains(&format!("{n} states and {} transitions", entries.len())));

    let many = pcosync(&["export", "--r", "1,2", "--out", d]);
    assert_eq!(many.status.code(), Some(1));
}

#[test]
fn seeded_simulation_repeats() {
    let args = [
        "simulate",
        "--n",
        "4",
        "--t",
        "6",
        "--r",
        "1",
        "--mu",
        "0.3",
        "--seed",
        "9",
        "--samples",
        "5000",
    ];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let mut r = csv::Reader::from_reader(a.as_bytes());
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>().join(","),
        "N,T,R,epsilon,mu,lambda,U,profile,metric,seed,samples,mean,std_error,max_observed,per_node_mWh,censored"
    );
    assert_eq!(r.records().count(), 2);
}

#[test]
fn deterministic_simulation_matches_analysis() {
    let start = "(2,0,1,0,0,2,0)";
    let model = [
        "--n", "5", "--t", "7", "--r", "2", "--eps", "0.2", "--mu", "0", "--start", start,
    ];
    let exact = rows(&ok(&[
        &["analyze", "--query", "time:avg", "--query", "power:avg"][..],
        &model,
    ]
    .concat()));
    let sim = ok(&[&["simulate", "--seed", "1", "--samples", "20"][..], &model].concat());
    let sim: Vec<csv::StringRecord> = csv::Reader::from_reader(sim.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect();
    for (e, s) in exact.iter().zip(&sim) {
        assert_eq!(e[8], s[8]);
        let (x, y): (f64, f64) = (e[10].parse().unwrap(), s[11].parse().unwrap());
        assert!((x - y).abs() <= 1e-12 * x, "{x} vs {y}");
        assert_eq!(&s[12], "0");
    }
}

#[test]
fn profiles_are_saved_listed_and_used() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "profile",
        "save",
        "slow",
        "--cycle-s",
        "8",
        "--profile-dir",
        d,
    ]);
    assert_eq!(
        ok(&["profile", "list", "--profile-dir", d]),
        "micaz\nslow\n"
    );
    let shown = ok(&["profile", "show", "slow", "--profile-dir", d]);
    assert!(shown.contains("cycle_s = 8"));
    assert!(ok(&["profile", "show", "micaz"]).contains("# W_I = 1.666666666666667e-9"));

    let q = [
        "analyze",
        "--n",
        "3",
        "--t",
        "5",
        "--r",
        "1",
        "--eps",
        "0.5",
        "--query",
        "power:avg",
    ];
    let base: f64 = rows(&ok(&q))[0][10].parse().unwrap();
    let slow = Command::new(env!("CARGO_BIN_EXE_pcosync"))
        .args([&q[..], &["--profile", "slow"]].concat())
        .env("PCOSYNC_PROFILE_DIR", d)
        .output()
        .unwrap();
    assert!(slow.status.success());
    let slow_rows = rows(&String::from_utf8(slow.stdout).unwrap());
    assert_eq!(slow_rows[0][7], "slow");
    let slow_value: f64 = slow_rows[0][10].parse().unwrap();
    // only the transmit term does not scale with C
    assert!(slow_value > 7.0 * base && slow_value < 8.0 * base);

    let missing = pcosync(&["analyze", "--profile", "nosuch"]);
    assert_eq!(missing.status.code(), Some(1));
}
