use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn schedsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schedsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn triples(path: &Path) -> BTreeSet<(String, String, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[2].to_string(), f[3].to_string())
        })
        .collect()
}

#[test]
fn summary_and_paired_per_job_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = schedsim(&[
        "--njobs", "200", "--reps-min", "3", "--reps-max", "3", "--policy", "ps", "--policy",
        "fspe+ps", "--out", out, "--per-job",
    ]);
    assert!(matches!(res.status.code(), Some(0) | Some(3)), "{res:?}");
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "size_dist,shape,alpha,sigma,timeshape,load,njobs,trace,policy,mst,ci_halfwidth,reps,converged,norm_ps,norm_fspe+ps"
    );
    assert_eq!(lines.count(), 2);
    let jobs = dir.path().join("jobs");
    for rep in 0..3 {
        let ps = triples(&jobs.join(format!("ps_rep{rep}.csv")));
        let fspe_ps = triples(&jobs.join(format!("fspe+ps_rep{rep}.csv")));
        assert_eq!(ps.len(), 200);
        assert_eq!(ps, fspe_ps);
    }
}

#[test]
fn identical_plans_give_identical_output() {
    let args = ["--njobs", "300", "--reps-min", "4", "--reps-max", "4", "--seed", "9", "--policy", "srpt", "--policy", "las"];
    let a = schedsim(&args);
    let b = schedsim(&args);
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn non_convergence_has_its_own_exit_status() {
    let res = schedsim(&["--njobs", "100", "--reps-min", "2", "--reps-max", "2", "--ci-target", "0.000001", "--policy", "ps"]);
    assert_eq!(res.status.code(), Some(3));
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",2,false,1"));
}

#[test]
fn sweep_emits_one_group_per_value() {
    let res = schedsim(&[
        "--njobs", "200", "--reps-min", "2", "--reps-max", "2", "--policy", "ps", "--policy", "srpt",
        "--sweep", "sigma", "--values", "0.5,1",
    ]);
    let text = String::from_utf8(res.stdout).unwrap();
    let sigmas: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(sigmas, vec!["0.5", "0.5", "1", "1"]);
}

#[test]
fn trace_replay() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let body: String = (0..50).map(|i| format!("{} {}\n", i * 10, 1 + (i * 7) % 13)).collect();
    fs::write(&trace, body).unwrap();
    let res = schedsim(&[
        "--trace", trace.to_str().unwrap(), "--trace-format", "two_column", "--target-load", "0.8",
        "--sigma", "0", "--reps-min", "2", "--reps-max", "2", "--policy", "srpt", "--policy", "srpte",
    ]);
    let text = String::from_utf8(res.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "trace");
    // Exact estimates: SRPTE is SRPT.
    assert_eq!(rows[0][9], rows[1][9]);
}

#[test]
fn usage_errors() {
    assert_eq!(schedsim(&["--sweep", "speed", "--values", "1"]).status.code(), Some(2));
    assert_eq!(schedsim(&["--policy", "srtf"]).status.code(), Some(2));
    let res = schedsim(&["--load", "1.5", "--njobs", "10"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8(res.stderr).unwrap().contains("load"));
    let res = schedsim(&["--trace", "/nonexistent/trace.txt"]);
    assert_eq!(res.status.code(), Some(1));
}
