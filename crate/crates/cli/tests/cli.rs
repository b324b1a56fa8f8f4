use std::path::PathBuf;
use std::process::{Command, Output};

fn slr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slr"))
        .args(args)
        .output()
        .expect("run slr")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("slr-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn unpreconditioned_solve_succeeds() {
    let o = slr(&["solve", "--matrix", "lap2d:16,16,0", "--precond", "none", "--no-timing"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(slr_cli::run::SOLVE_HEADER));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "lap2d:16x16:0");
    assert_eq!(row[3], "none");
    assert_eq!(row[10], "true");
}

#[test]
fn missing_matrix_file_is_an_error() {
    let o = slr(&["solve", "--matrix", "mm:/nonexistent/a.mtx"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn iteration_cap_gives_status_two() {
    let o = slr(&[
        "solve", "--matrix", "lap2d:32,32,0", "--precond", "none", "--maxit", "3", "--no-timing",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.contains(",F,"), "{row}");
}

#[test]
fn bench_writes_one_row_per_line() {
    let dir = scratch("bench");
    let empty = dir.join("empty.txt");
    std::fs::write(&empty, "# nothing\n\n").unwrap();
    let o = slr(&["bench", empty.to_str().unwrap(), "--no-timing"]);
    assert_eq!(stdout(&o), format!("{}\n", slr_cli::run::SOLVE_HEADER));

    let suite = dir.join("suite.txt");
    std::fs::write(
        &suite,
        "matrix=lap2d:24,24,0 nd=4 rank=4\n\
         matrix=lap2d:24,24,0 precond=ict\n\
         matrix=mm:/nonexistent.mtx\n",
    )
    .unwrap();
    let o = slr(&["bench", suite.to_str().unwrap(), "--no-timing"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].ends_with("true"));
    assert!(rows[2].ends_with(",F,-,false"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = scratch("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# two-level run\nmatrix=lap2d:20,20,0\nnd=4\nrank=2\n").unwrap();
    let o = slr(&["solve", "--config", cfg.to_str().unwrap(), "--rank", "5", "--no-timing"]);
    assert_eq!(o.status.code(), Some(0));
    let row: Vec<String> = stdout(&o).lines().nth(1).unwrap().split(',').map(String::from).collect();
    assert_eq!(row[4], "4");
    assert_eq!(row[5], "5");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn kappa_curve_matches_dense_column() {
    let o = slr(&[
        "analyze", "kappa", "--matrix", "lap2d:64,64,0", "--nd", "2", "--rank", "8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,kappa,kappa_dense"));
    let mut count = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - v[2]).abs() <= 1e-8 * v[1], "{line}");
        count += 1;
    }
    assert!(count > 10);
}

#[test]
fn rank_search_matches_dense_count() {
    let o = slr(&[
        "analyze", "rank", "33", "--matrix", "lap2d:128,128,0", "--nd", "8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let rank: usize = row[4].parse().unwrap();

    // eigenvalues of H that push 1/(1-lambda) above 33
    let a = slr_core::sparse::gen_laplacian_2d(128, 128, 0.0).unwrap();
    let part = slr_core::partition::geometric_bisection_grid(slr_core::GridShape::new_2d(128, 128), 8)
        .unwrap();
    let dd = slr_core::partition::build_dd(&a, &part).unwrap();
    let ds = slr_core::analysis::dense_schur(&dd).unwrap();
    let lam = ds.h_eigen().values;
    let dense = lam.iter().filter(|&&l| 1.0 / (1.0 - l) > 33.0).count();
    assert_eq!(rank, dense);
}

#[test]
fn thread_count_from_environment() {
    let args = ["solve", "--matrix", "lap2d:32,32,0", "--nd", "4", "--no-timing"];
    let one = Command::new(env!("CARGO_BIN_EXE_slr"))
        .args(args)
        .env("SLR_THREADS", "1")
        .output()
        .unwrap();
    let two = Command::new(env!("CARGO_BIN_EXE_slr"))
        .args(args)
        .env("SLR_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn gen_round_trips_through_matrix_market() {
    let dir = scratch("gen");
    let path = dir.join("a.mtx");
    let o = slr(&["gen", "--matrix", "lap3d:5,4,3,0.1", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m = format!("mm:{}", path.display());
    let o = slr(&["solve", "--matrix", &m, "--precond", "ict", "--no-timing"]);
    assert_eq!(o.status.code(), Some(0));
    let row: Vec<String> = stdout(&o).lines().nth(1).unwrap().split(',').map(String::from).collect();
    assert_eq!(row[1], "60");
    let _ = std::fs::remove_dir_all(&dir);
}
