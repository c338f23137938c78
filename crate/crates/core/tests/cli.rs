use std::path::Path;
use std::process::{Command, Output};

fn trsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trsc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn encode_and_compress() {
    let o = trsc(&["encode", "--width", "3", "--value", "5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "10111010\n");
    let o = trsc(&["encode", "--width", "3", "--value", "5", "--unary"]);
    assert_eq!(stdout(&o), "11111000\n");
    let o = trsc(&["compress", "--width", "6", "--value", "45", "--parallelism", "8"]);
    assert_eq!(stdout(&o).lines().nth(1), Some("1011101,5,10,6.4000"));
}

#[test]
fn multiply_with_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.csv");
    let o = trsc(&["mul", "--a", "255", "--b", "255", "--parallelism", "64", "--ledger-out", path(&ledger)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().nth(1), Some("255,255,255,255,32,44.3004"));
    let l = std::fs::read_to_string(&ledger).unwrap();
    assert!(l.starts_with("category,ops,cycles,energy_pj\n"));
    assert!(l.contains("total,141,32,44.300400"));
}

#[test]
fn trace_driven_dot_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    std::fs::write(&trace, "a,b,sign\n255,255,1\n255,255,-1\n10,20,1\n").unwrap();
    let o = trsc(&["dot", "--trace", path(&trace), "--signed"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o);
    let value: i64 = row.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((0..=1).contains(&value));

    let o = trsc(&["dot", "--trace", path(&trace)]);
    assert_eq!(code(&o), 3);

    let o = trsc(&["compare", "--pairs", "255:255,255:255"]);
    let s = stdout(&o);
    assert!(s.contains("tr_assisted,true,510,32,"));
    assert!(s.contains("coruscant_reference,false,,90,"));
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = trsc(&["sweep", "--widths", "8,6", "--parallelisms", "64,4", "--workload", "uniform:300", "--out", path(&out)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped n=6 P=64"));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let o = trsc(&["report", path(&out), "--format", "csv"]);
    let keys: Vec<String> =
        stdout(&o).lines().skip(1).map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(keys, ["6,4", "8,4", "8,64"]);
    let o = trsc(&["report", path(&out)]);
    assert!(stdout(&o).lines().next().unwrap().trim_start().starts_with("n  "));

    let same = trsc(&["sweep", "--workload", "network:200", "--seed", "7"]);
    let again = trsc(&["sweep", "--workload", "network:200", "--seed", "7"]);
    assert_eq!(stdout(&same), stdout(&again));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&trsc(&["frobnicate"])), 1);
    assert_eq!(code(&trsc(&["mul", "--a", "1"])), 1);
    assert_eq!(code(&trsc(&["--help"])), 0);

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "width = 8\nwarp = 9\n").unwrap();
    let o = trsc(&["--config", path(&cfg), "mul", "--a", "1", "--b", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(code(&trsc(&["mul", "--a", "1", "--b", "1", "--parallelism", "6"])), 2);
    assert_eq!(code(&trsc(&["--config", "/nonexistent.cfg", "mul", "--a", "1", "--b", "1"])), 2);

    assert_eq!(code(&trsc(&["mul", "--a", "300", "--b", "1"])), 3);
    let trace = dir.path().join("bad.csv");
    std::fs::write(&trace, "a,b\n1,2\n999,1\n").unwrap();
    let o = trsc(&["dot", "--trace", path(&trace)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let partial = dir.path().join("partial.csv");
    std::fs::write(&partial, "n,P,workload,cycles\n8,4,x,10\n").unwrap();
    assert_eq!(code(&trsc(&["report", path(&partial)])), 3);
}

#[test]
fn config_file_applies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "# narrow\nwidth = 6\nparallelism = 8\n").unwrap();
    let o = trsc(&["--config", path(&cfg), "mul", "--a", "63", "--b", "63"]);
    assert_eq!(code(&o), 0);
    let row = stdout(&o);
    let fields: Vec<&str> = row.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[2], fields[3]);
}
