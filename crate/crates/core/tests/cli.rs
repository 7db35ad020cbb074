mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{random_topology, seeded, topology_csv};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrgather"))
        .args(args)
        .output()
        .expect("spawn corrgather")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn bits_matrix_three_four_five() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "id,x,y\n0,0,0\n1,3,4\n");
    let o = bin(&["bits", "--topology", &t, "--model", "1", "--n", "5"]);
    assert!(o.status.success());
    assert_eq!(data_lines(&stdout(&o)), vec!["0,5", "5,0"]);
}

#[test]
fn bits_single_node() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "id,x,y\n0,1,1\n");
    for model in ["1", "2"] {
        let o = bin(&["bits", "--topology", &t, "--model", model]);
        assert_eq!(data_lines(&stdout(&o)), vec!["0"]);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "id,x,y\n0,0,0\n1,3,4\n");

    let o = bin(&["bits", "--topology", &t, "--model", "2", "--alpha", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha2 must be positive"));

    let o = bin(&["bits", "--topology", &t, "--model", "2", "--alpha", "-1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = bin(&["sweep", "--step", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = bin(&["evaluate", "--topology", &t, "--rule", "additive"]);
    assert_eq!(o.status.code(), Some(2));

    let missing = dir.path().join("nope.csv");
    let o = bin(&["bits", "--topology", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let dup = write(dir.path(), "dup.csv", "id,x,y\n0,0,0\n0,1,1\n");
    let o = bin(&["bits", "--topology", &dup]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let big: String = std::iter::once("id,x,y\n".to_string())
        .chain((0..11).map(|i| format!("{i},{i},0\n")))
        .collect();
    let big = write(dir.path(), "big.csv", &big);
    let o = bin(&["stats", "--topology", &big]);
    assert_eq!(o.status.code(), Some(4));
    let o = bin(&["optimize", "--topology", &big, "--strategy", "brute-force"]);
    assert_eq!(o.status.code(), Some(4));
    let o = bin(&["stats", "--topology", &big, "--mode", "sampled", "--count", "50"]);
    assert!(o.status.success());

    let o = bin(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_collinear() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "id,x,y\n0,0,0\n1,1,0\n2,2,0\n");
    let o = bin(&["evaluate", "--topology", &t, "--order", "0,1,2", "--rule", "min"]);
    let text = stdout(&o);
    assert!(text.contains("# total=7"), "{text}");
    assert_eq!(data_lines(&text), vec!["position,node,bits", "0,0,5", "1,1,1", "2,2,1"]);
    let o = bin(&["evaluate", "--topology", &t, "--order", "0,2,1"]);
    assert!(stdout(&o).contains("# total=8"));
    assert!(stdout(&o).contains("# order=0 2 1"));
    let o = bin(&["evaluate", "--topology", &t, "--order", "0,0,1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_brute_force_matches_greedy_prim() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(7);
    let t = write(dir.path(), "t.csv", &topology_csv(&random_topology(&mut rng, 6, 5.0)));
    let total = |strategy: &str| {
        let o = bin(&["optimize", "--topology", &t, "--strategy", strategy, "--rule", "min"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let row = data_lines(&text)[1].to_string();
        row.split(',').nth(2).unwrap().parse::<u64>().unwrap()
    };
    assert_eq!(total("brute-force"), total("greedy-prim"));

    let o = bin(&["optimize", "--topology", &t, "--strategy", "greedy-prim", "--rule", "max"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&[
        "optimize", "--topology", &t, "--strategy", "greedy-prim", "--rule", "max", "--force",
    ]);
    assert!(o.status.success());
}

#[test]
fn simulate_constant_field_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(3);
    let t = write(dir.path(), "t.csv", &topology_csv(&random_topology(&mut rng, 7, 5.0)));
    let o = bin(&[
        "simulate", "--topology", &t, "--model", "2", "--n", "8", "--smoothness", "0", "--seeds", "1,2",
    ]);
    let text = stdout(&o);
    let rows = data_lines(&text);
    assert_eq!(rows[0], "L\tseed\ttotal_bits\texact_count\tmax_abs_error");
    for row in &rows[1..] {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols[3], "7", "{row}");
        assert_eq!(cols[4], "0");
    }
    assert!(text.starts_with("# command=simulate\n"));
    assert!(text.contains("# seeds=1,2"));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "id,x,y\n0,0,0\n1,1,0\n2,2,0\n");
    let cfg = write(
        dir.path(),
        "run.conf",
        &format!("# paper defaults\nmodel = 1\nn=5\nalpha=1\nbeta=1\nrule=min\ntopology={t}\norder=0,2,1\n"),
    );
    let o = bin(&["evaluate", "--config", &cfg]);
    assert!(stdout(&o).contains("# total=8"), "{}", stdout(&o));
    let o = bin(&["evaluate", "--config", &cfg, "--order", "0,1,2"]);
    assert!(stdout(&o).contains("# total=7"));

    let bad = write(dir.path(), "bad.conf", "model\n");
    let o = bin(&["evaluate", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.tsv");
    let o = bin(&["sweep", "--model", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&out).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows[1], "0\t0");
    let budgets: Vec<u32> = rows[1..]
        .iter()
        .map(|r| r.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(budgets.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(12);
    let t = write(dir.path(), "t.csv", &topology_csv(&random_topology(&mut rng, 8, 5.0)));
    let args = ["stats", "--topology", &t, "--mode", "sampled", "--count", "2000", "--seed", "4"];
    let a = bin(&args);
    let b = bin(&args);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    let c = bin(&threaded);
    assert_eq!(a.stdout, b.stdout);
    // the threads flag is not echoed, so output matches byte for byte
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn help_documents_formats() {
    let o = bin(&["--help"]);
    let text = stdout(&o);
    for word in ["bits", "sweep", "evaluate", "optimize", "simulate", "stats", "TSV", "CSV"] {
        assert!(text.contains(word), "help lacks {word}");
    }
}
