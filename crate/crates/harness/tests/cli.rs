use std::path::Path;
use std::process::{Command, Output};

fn autoal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autoal")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

const TINY: &[&str] = &["--set", "blob_points=300", "--rounds", "2", "--budget", "20", "--seeds", "0,1", "--set", "task_epochs=10"];

#[test]
fn unknown_method_exits_2_and_lists_methods() {
    let out = autoal(&["validate-config", "--method", "coreset"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("autoal") && err.contains("bald") && err.contains("random"), "{err}");
}

#[test]
fn infeasible_budget_exits_2() {
    let out = autoal(&["validate-config", "--set", "blob_points=200", "--rounds", "8", "--budget", "50"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("exp.conf");
    std::fs::write(&file, "# experiment\nrounds = 3\nlambda = 2.5\n").unwrap();
    let out = autoal(&["validate-config", "--config", file.to_str().unwrap(), "--rounds", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rounds = 5\n") && text.contains("lambda = 2.5\n"), "{text}");
    assert!(text.starts_with("version = autoal "));
}

#[test]
fn run_writes_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = vec!["run", "--method", "autoal", "--out", out.to_str().unwrap(), "--warmup-epochs", "5", "--joint-epochs", "3"];
    args.extend_from_slice(TINY);
    let res = autoal(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(first_line(&out.join("rounds.csv")), "run_id,method,seed,round,labeled_count,test_accuracy");
    assert_eq!(first_line(&out.join("strategy_scores.csv")), "run_id,seed,round,strategy,normalized_score");
    let rows = std::fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 3);
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    for key in autoal_harness::config::KEYS {
        assert!(manifest.contains(&format!("\n{key} = ")), "{key}");
    }
    assert!(manifest.contains("warmup_epochs = 5\n"));
}

#[test]
fn compare_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let mut args = vec!["compare", "--methods", "random,entropy", "--out", out.to_str().unwrap()];
    args.extend_from_slice(TINY);
    let res = autoal(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let compare = out.join("compare.csv");
    assert_eq!(first_line(&compare), "method,round,labeled_count,mean_accuracy,std_accuracy,n_seeds");
    assert!(out.join("random").join("rounds.csv").is_file() && out.join("entropy").join("manifest.txt").is_file());
    let text = std::fs::read_to_string(&compare).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",2")));

    let svg = dir.path().join("curves.svg");
    let res = autoal(&["plot", compare.to_str().unwrap(), svg.to_str().unwrap()]);
    assert!(res.status.success());
    let svg = std::fs::read_to_string(svg).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);

    let single = dir.path().join("single.svg");
    let rounds = out.join("random").join("rounds.csv");
    assert!(autoal(&["plot", rounds.to_str().unwrap(), single.to_str().unwrap()]).status.success());
    let single = std::fs::read_to_string(single).unwrap();
    assert_eq!(single.matches("<polyline").count(), 1);
    let points = single.split("class=\"curve\"").nth(1).unwrap().split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(points.split_whitespace().count(), 3);
}

#[test]
fn plot_rejects_unknown_csv() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n").unwrap();
    let res = autoal(&["plot", bad.to_str().unwrap(), dir.path().join("x.svg").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
