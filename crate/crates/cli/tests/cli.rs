use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn trajkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajkit"))
        .current_dir(dir)
        .env_remove("TRAJKIT_CORES")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = trajkit(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn simulate(dir: &Path, preset: &str, n: usize, seed: u64) -> PathBuf {
    let name = format!("{preset}_{n}_{seed}.csv");
    ok(
        dir,
        &["simulate", "--preset", preset, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", &name],
    );
    dir.join(name)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let code = |args: &[&str]| trajkit(tmp.path(), args).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&[]), Some(1));
    assert_eq!(code(&["cluster", "--bogus"]), Some(1));
    assert_eq!(code(&["cluster", "--input", "missing.csv"]), Some(2));
    assert_eq!(code(&["simulate", "--preset", "nope", "--out", "x.csv"]), Some(1));
    simulate(tmp.path(), "clean2", 40, 1);
    let input = "clean2_40_1.csv";
    assert_eq!(code(&["cluster", "--input", input, "--k", "0"]), Some(1));
    assert_eq!(code(&["rand", "--input", input, "--replicates", "1"]), Some(1));
    assert_eq!(code(&["rand", "--input", input, "--k-list", "0,2"]), Some(1));
    assert_eq!(code(&["sil", "--input", input]), Some(1));
    let out = trajkit(tmp.path(), &["sil", "--input", input, "--k-list", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("single cluster"));
}

#[test]
fn simulate_writes_csv_and_spec() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate(tmp.path(), "bp5", 50, 7);
    let rows = lines(&csv);
    assert_eq!(rows[0], "id,time,response,true_group");
    let ids: std::collections::BTreeSet<&str> =
        rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(ids.len(), 50);
    let spec: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec["n_subjects"], 50);
    assert_eq!(spec["seed"], 7);

    ok(tmp.path(), &["simulate", "--preset", "bp5", "--n", "50", "--seed", "7", "--out", "again.csv.gz"]);
    let gz = fs::read(tmp.path().join("again.csv.gz")).unwrap();
    assert_eq!(&gz[..2], &[0x1f, 0x8b]);
}

#[test]
fn cluster_outputs_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate(tmp.path(), "clean2", 200, 3);
    ok(tmp.path(), &["cluster", "--input", csv.to_str().unwrap(), "--k", "2", "--out-dir", "run"]);
    let run = tmp.path().join("run");
    for f in ["assignments.csv", "centers.csv", "trace.csv", "centers_summary.csv", "model.json", "centers.svg"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let assign = lines(&run.join("assignments.csv"));
    assert_eq!(assign[0], "id,cluster");
    assert_eq!(assign.len(), 201);
    assert_eq!(lines(&run.join("centers.csv"))[0], "cluster,time,pred");
    assert_eq!(lines(&run.join("trace.csv"))[0], "iter,switch_pct,drops");
    let svg = fs::read_to_string(run.join("centers.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    let m = manifest(&run);
    assert_eq!(m["command"], "cluster");
    assert_eq!(m["params"]["k"], 2);
    assert_eq!(m["seed"], 12345);
    let files = m["files"].as_array().unwrap();
    let rows_of = |name: &str| {
        files.iter().find(|f| f["name"] == name).unwrap_or_else(|| panic!("{name} not listed"))["rows"]
            .clone()
    };
    assert_eq!(rows_of("assignments.csv"), 200);
    assert!(files.iter().any(|f| f["name"] == "manifest.json"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate(tmp.path(), "bp5", 150, 5);
    let input = csv.to_str().unwrap();
    for dir in ["a", "b"] {
        ok(tmp.path(), &["cluster", "--input", input, "--k", "3", "--seed", "8", "--out-dir", dir]);
    }
    for f in ["assignments.csv", "centers.csv", "trace.csv", "centers_summary.csv", "model.json", "centers.svg"] {
        assert_eq!(
            fs::read_to_string(tmp.path().join("a").join(f)).unwrap(),
            fs::read_to_string(tmp.path().join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
    let again = simulate(tmp.path(), "bp5", 150, 5);
    assert_eq!(fs::read_to_string(&csv).unwrap(), fs::read_to_string(again).unwrap());
}

#[test]
fn sil_from_run_and_k_list() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate(tmp.path(), "clean2", 120, 2);
    let input = csv.to_str().unwrap();
    ok(tmp.path(), &["cluster", "--input", input, "--k", "2", "--out-dir", "run"]);
    let stdout = ok(tmp.path(), &["sil", "--from-run", "run", "--out-dir", "s1"]);
    assert!(stdout.starts_with("k=2 mean silhouette "));
    let rows = lines(&tmp.path().join("s1/silhouette_k2.csv"));
    assert_eq!(rows[0], "id,cluster,neighbor,silhouette");
    assert_eq!(rows.len(), 121);

    let stdout = ok(tmp.path(), &["sil", "--input", input, "--k-list", "2,3", "--out-dir", "s2"]);
    assert_eq!(stdout.lines().count(), 2);
    for f in ["silhouette_k2.csv", "silhouette_k3.csv", "silhouette_k2.svg", "silhouette_summary.csv"] {
        assert!(tmp.path().join("s2").join(f).is_file(), "{f} missing");
    }
    // Same data, k and seed: the silhouettes agree either way.
    assert_eq!(
        fs::read_to_string(tmp.path().join("s1/silhouette_k2.csv")).unwrap(),
        fs::read_to_string(tmp.path().join("s2/silhouette_k2.csv")).unwrap()
    );
}

#[test]
fn rand_outputs() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate(tmp.path(), "clean2", 60, 4);
    let input = csv.to_str().unwrap();
    ok(tmp.path(), &["rand", "--input", input, "--k-list", "2..3", "--replicates", "3", "--out-dir", "r"]);
    let r = tmp.path().join("r");
    let rand = lines(&r.join("rand.csv"));
    assert_eq!(rand[0], "k_a,rep_a,k_b,rep_b,ari");
    assert_eq!(rand.len(), 1 + 6 * 5 / 2);
    assert_eq!(lines(&r.join("assignments.csv")).len(), 1 + 6 * 60);
    assert_eq!(lines(&r.join("truth_ari.csv")).len(), 1 + 6);
    assert!(r.join("rand_matrix.svg").is_file());
    let m = manifest(&r);
    assert_eq!(m["extra"]["k_list"], serde_json::json!([2, 3]));

    // Without a truth column there is nothing to score against.
    let stripped: String = lines(&csv)
        .iter()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    fs::write(tmp.path().join("plain.csv"), stripped).unwrap();
    ok(tmp.path(), &["rand", "--input", "plain.csv", "--k-list", "2", "--replicates", "2", "--out-dir", "p"]);
    assert!(!tmp.path().join("p/truth_ari.csv").exists());
    assert!(tmp.path().join("p/rand.csv").is_file());
}

#[test]
fn hclust_outputs() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate(tmp.path(), "bp5", 200, 6);
    let input = csv.to_str().unwrap();
    ok(tmp.path(), &["hclust", "--input", input, "--k", "2", "--grid", "20", "--out-dir", "h2"]);
    let dend = lines(&tmp.path().join("h2/dendrogram.csv"));
    assert_eq!(dend[0], "step,node_a,node_b,height,size,cluster_a,cluster_b");
    assert_eq!(dend.len(), 2);

    ok(tmp.path(), &["hclust", "--input", input, "--k", "6", "--grid", "20", "--cut", "3", "--out-dir", "h6"]);
    let h6 = tmp.path().join("h6");
    let resp = lines(&h6.join("resp.csv"));
    assert_eq!(resp[0].split(',').count(), 21);
    let live = resp.len() - 1;
    assert_eq!(lines(&h6.join("dendrogram.csv")).len(), live);
    let clades: std::collections::BTreeSet<String> = lines(&h6.join("clades.csv"))[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(clades.len(), 3.min(live));
    assert!(h6.join("dendrogram.svg").is_file());
}

#[test]
fn compare_runs() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate(tmp.path(), "bp5", 200, 9);
    let input = csv.to_str().unwrap();
    ok(tmp.path(), &["cluster", "--input", input, "--k", "3", "--seed", "1", "--out-dir", "a"]);
    ok(tmp.path(), &["cluster", "--input", input, "--k", "4", "--seed", "2", "--out-dir", "b"]);
    let stdout = ok(
        tmp.path(),
        &[
            "compare", "--centers-a", "a/centers.csv", "--centers-b", "b/centers.csv",
            "--assign-a", "a/assignments.csv", "--assign-b", "b/assignments.csv", "--out-dir", "c",
        ],
    );
    let ari: f64 = stdout.trim().strip_prefix("ARI ").unwrap().parse().unwrap();
    assert!((-1.0..=1.0).contains(&ari));
    let mapping = lines(&tmp.path().join("c/mapping.csv"));
    assert_eq!(mapping[0], "cluster_a,cluster_b,distance");
    let live_a = lines(&tmp.path().join("a/centers_summary.csv")).len() - 1;
    let live_b = lines(&tmp.path().join("b/centers_summary.csv")).len() - 1;
    assert_eq!(mapping.len() - 1, live_a.max(live_b));
    assert!(tmp.path().join("c/overlay.svg").is_file());
    assert!(tmp.path().join("c/compare.json").is_file());

    let out = trajkit(tmp.path(), &["compare", "--centers-a", "a/centers.csv", "--centers-b", "b/centers.csv", "--assign-a", "a/assignments.csv"]);
    assert_eq!(out.status.code(), Some(1));
}
