use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qaembed::graph::{generate_chimera, load_edge_list, save_edge_list, ChimeraSpec};
use qaembed::ising::{brute_force_min, random_ising, IsingJson};
use qaembed::{Embedding, Graph, IsingModel};
use serde_json::Value;

fn qaembed(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qaembed"))
        .args(args)
        .current_dir(dir)
        .env_remove("QAEMBED_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn chimera(m: usize) -> Graph {
    generate_chimera(ChimeraSpec::new(m).unwrap()).unwrap()
}

#[test]
fn gen_chimera_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qaembed(&["gen", "chimera", "--m", "2", "--out", &p(dir.path(), "c2.edges")], dir.path()));
    let g = load_edge_list(dir.path().join("c2.edges")).unwrap();
    assert_eq!(g.num_nodes(), 32);
    assert_eq!(g, chimera(2));
    assert!(dir.path().join("c2.edges.manifest.json").exists());
}

#[test]
fn gen_er_with_p_one_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qaembed(&["gen", "er", "--n", "5", "--p", "1", "--out", &p(dir.path(), "k5.edges")], dir.path()));
    assert_eq!(load_edge_list(dir.path().join("k5.edges")).unwrap(), Graph::complete(5));
}

#[test]
fn missing_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qaembed(&["gen", "chimera"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = qaembed(&["gen", "chimera", "--m", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qaembed(&["gen", "ising", "--graph", "does-not-exist.edges"], dir.path());
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn default_output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qaembed"))
        .args(["gen", "chimera", "--m", "1"])
        .current_dir(dir.path())
        .env("QAEMBED_OUT_DIR", dir.path().join("results"))
        .output()
        .unwrap();
    ok(&out);
    assert!(dir.path().join("results/chimera_m1.edges").exists());
}

fn setup_identity(dir: &Path) -> (PathBuf, PathBuf) {
    let g = chimera(1);
    let h = g.induced_subgraph(&[0, 1, 4, 5, 6].into_iter().collect());
    let (hp, gp) = (dir.join("h.edges"), dir.join("g.edges"));
    save_edge_list(&h, &hp).unwrap();
    save_edge_list(&g, &gp).unwrap();
    (hp, gp)
}

#[test]
fn embed_identity_instance_reports_unit_acl() {
    let dir = tempfile::tempdir().unwrap();
    let (hp, gp) = setup_identity(dir.path());
    let emb = p(dir.path(), "e.json");
    let stdout = ok(&qaembed(
        &["embed", "--source", &hp.display().to_string(), "--target", &gp.display().to_string(), "--out", &emb],
        dir.path(),
    ));
    let doc: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(doc["metrics"]["acl"], 1.0);
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["metrics"]["acl"], 1.0);

    // the manifest digests match the files on disk
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.json.manifest.json")).unwrap()).unwrap();
    let digest = manifest["outputs"]["e.json"].as_str().unwrap().to_string();
    use sha2::Digest;
    let actual = format!("{:x}", sha2::Sha256::digest(std::fs::read(dir.path().join("e.json")).unwrap()));
    assert_eq!(digest, actual);
    assert_eq!(manifest["base_seed"], 0);

    let stdout = ok(&qaembed(
        &["validate", "--source", &hp.display().to_string(), "--target", &gp.display().to_string(), "--embedding", &emb],
        dir.path(),
    ));
    assert!(stdout.contains("\"valid\": true"));
}

#[test]
fn clique_algo_embeds_complete_graphs() {
    let dir = tempfile::tempdir().unwrap();
    save_edge_list(&Graph::complete(6), dir.path().join("k6.edges")).unwrap();
    save_edge_list(&chimera(2), dir.path().join("c2.edges")).unwrap();
    let stdout = ok(&qaembed(
        &["embed", "--source", "k6.edges", "--target", "c2.edges", "--algo", "clique", "--out", "k6.json"],
        dir.path(),
    ));
    let doc: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(doc["metrics"]["acl"], 3.0);
}

#[test]
fn embedding_failure_exits_with_json() {
    let dir = tempfile::tempdir().unwrap();
    save_edge_list(&Graph::complete(5), dir.path().join("k5.edges")).unwrap();
    save_edge_list(&Graph::complete(4), dir.path().join("k4.edges")).unwrap();
    let out = qaembed(&["embed", "--source", "k5.edges", "--target", "k4.edges"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["success"], false);
    assert!(doc["failure"].is_string());
    assert!(!dir.path().join("embedding.json").exists());
}

#[test]
fn corrupted_embedding_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let (hp, gp) = setup_identity(dir.path());
    // variable 0 gets a second, non-adjacent qubit and variable 1 reuses qubit 4
    let bad = Embedding::from_chains([(0, vec![0, 3]), (1, vec![1, 4]), (4, vec![4]), (5, vec![5]), (6, vec![6])]).unwrap();
    std::fs::write(dir.path().join("bad.json"), bad.to_canonical_json()).unwrap();
    let out = qaembed(
        &["validate", "--source", &hp.display().to_string(), "--target", &gp.display().to_string(), "--embedding", "bad.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["valid"], false);
    assert_eq!(report["connectivity_violations"], serde_json::json!([0]));
    assert_eq!(report["overlap_pairs"], serde_json::json!([[1, 4]]));
}

#[test]
fn solve_recovers_the_exact_optimum() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qaembed(&["gen", "er", "--n", "6", "--p", "0.5", "--seed", "3", "--out", "h.edges"], dir.path()));
    ok(&qaembed(&["gen", "ising", "--graph", "h.edges", "--seed", "5", "--out", "model.json"], dir.path()));
    ok(&qaembed(&["gen", "chimera", "--m", "1", "--out", "c1.edges"], dir.path()));
    ok(&qaembed(
        &[
            "solve", "--model", "model.json", "--target", "c1.edges", "--prefactor", "1", "--reads", "500", "--seed",
            "9", "--out", "res.json",
        ],
        dir.path(),
    ));
    let doc: IsingJson = serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    let model = IsingModel::from_json(&doc).unwrap();
    assert_eq!(model.to_json(), random_ising(&load_edge_list(dir.path().join("h.edges")).unwrap(), 5).to_json());
    let (_, optimum) = brute_force_min(&model).unwrap();
    let res: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("res.json")).unwrap()).unwrap();
    let best = res["unembedded_energies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((best - optimum).abs() < 1e-9, "best {best} optimum {optimum}");
    let reads = std::fs::read_to_string(dir.path().join("res.reads.csv")).unwrap();
    assert_eq!(reads.lines().count(), 501);
}

#[test]
fn heatmap_of_two_by_two_grid_has_four_cells() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("grid.csv"), "size,density,p\n8,0.1,1\n8,0.2,0.5\n12,0.1,0.75\n12,0.2,0\n").unwrap();
    ok(&qaembed(
        &["report", "heatmap", "--in", "grid.csv", "--x", "size", "--y", "density", "--value", "p", "--out", "h.svg"],
        dir.path(),
    ));
    let svg = std::fs::read_to_string(dir.path().join("h.svg")).unwrap();
    assert_eq!(svg.matches("class=\"cell\"").count(), 4);
    assert!(svg.contains("viewBox=\"0 0 900 600\""));
    assert!(svg.starts_with("<svg"));
    for label in ["8", "12", "0.1", "0.2"] {
        assert!(svg.contains(&format!(">{label}</text>")), "missing axis label {label}");
    }
}

fn attr(tag: &str, name: &str) -> f64 {
    let key = format!(" {name}=\"");
    let start = tag.find(&key).unwrap() + key.len();
    let end = start + tag[start..].find('"').unwrap();
    tag[start..end].parse().unwrap()
}

#[test]
fn scatter_ols_overlay_passes_through_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("acl,err\n");
    for k in 0..6 {
        let x = 1.0 + 0.5 * f64::from(k);
        csv.push_str(&format!("{x},{}\n", 3.0 * x - 2.0));
    }
    std::fs::write(dir.path().join("pts.csv"), csv).unwrap();
    ok(&qaembed(
        &["report", "scatter", "--in", "pts.csv", "--x", "acl", "--y", "err", "--ols", "--out", "s.svg"],
        dir.path(),
    ));
    let svg = std::fs::read_to_string(dir.path().join("s.svg")).unwrap();
    let points: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"point\"")).collect();
    assert_eq!(points.len(), 6);
    let line = svg.lines().find(|l| l.contains("class=\"ols\"")).unwrap();
    let (first, last) = (points[0], points[5]);
    assert!((attr(line, "x1") - attr(first, "cx")).abs() < 0.01);
    assert!((attr(line, "y1") - attr(first, "cy")).abs() < 0.01);
    assert!((attr(line, "x2") - attr(last, "cx")).abs() < 0.01);
    assert!((attr(line, "y2") - attr(last, "cy")).abs() < 0.01);
}

#[test]
fn line_report_and_column_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("rows.csv"), "acl,err\n1,0.1\n1,0.3\n2,0.4\n2,\n2,0.6\n").unwrap();
    ok(&qaembed(&["report", "line", "--in", "rows.csv", "--x", "acl", "--y", "err", "--out", "l.svg"], dir.path()));
    let svg = std::fs::read_to_string(dir.path().join("l.svg")).unwrap();
    assert_eq!(svg.matches("class=\"box\"").count(), 2);
    let out = qaembed(&["report", "line", "--in", "rows.csv", "--x", "acl", "--y", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("empty.csv"), "acl,err\n").unwrap();
    let out = qaembed(&["report", "line", "--in", "empty.csv", "--x", "acl", "--y", "err"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

fn bench_outputs(dir: &Path, jobs: &str) -> Value {
    ok(&qaembed(&["bench", "rq2", "--config", "small.toml", "--out-dir", "out", "--jobs", jobs], dir));
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn bench_reruns_reproduce_manifest_digests() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("small.toml"),
        "sizes = [6, 10]\ndensities = [0.3, 0.8]\ntrial_count = 4\nchimera_m = 2\nseed = 3\n",
    )
    .unwrap();
    let a = bench_outputs(dir.path(), "1");
    let b = bench_outputs(dir.path(), "2");
    let timing: Vec<&str> = a["timing_outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(timing, ["rq2_time.csv"]);
    for (name, digest) in a["outputs"].as_object().unwrap() {
        if !timing.contains(&name.as_str()) {
            assert_eq!(&b["outputs"][name], digest, "{name} differs between reruns");
        }
    }
    assert_eq!(a["config"]["sizes"], serde_json::json!([6, 10]));

    for (exp, file) in [("rq1a", "rq1a_rows.csv"), ("rq1b", "rq1b_slopes.csv")] {
        ok(&qaembed(&["bench", exp, "--config", "small.toml", "--out-dir", "out"], dir.path()));
        assert!(dir.path().join("out").join(file).exists());
    }
    std::fs::write(dir.path().join("bad.toml"), "densities = [2.0]\n").unwrap();
    let out = qaembed(&["bench", "rq2", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_rq2_default_config_writes_full_boundary_grid() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qaembed(&["bench", "rq2", "--out-dir", "out"], dir.path()));
    let text = std::fs::read_to_string(dir.path().join("out/rq2_boundary.csv")).unwrap();
    // 11 sizes × 10 densities plus the header
    assert_eq!(text.lines().count(), 1 + 11 * 10);
    assert!(dir.path().join("out/rq2_native.csv").exists());
}
