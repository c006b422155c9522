use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn priorcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_priorcs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    /// 20×24 dictionary, a batch from it and its prior.
    fn fixtures(&self) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
        let dict = self.path("dict.txt");
        ok(&priorcs(&[
            "synth",
            "dict",
            "--n",
            "20",
            "--k",
            "24",
            "--seed",
            "1",
            "--out",
            path_str(&dict),
        ]));
        let x = self.path("x.txt");
        let alpha = self.path("alpha.txt");
        ok(&priorcs(&[
            "synth",
            "batch",
            "--dict",
            path_str(&dict),
            "--groups",
            "16,5,2,1",
            "--sparsity",
            "4",
            "--trials",
            "30",
            "--seed",
            "2",
            "--out-x",
            path_str(&x),
            "--out-alpha",
            path_str(&alpha),
        ]));
        let prior = self.path("xi.txt");
        ok(&priorcs(&[
            "synth",
            "prior",
            "--alpha",
            path_str(&alpha),
            "--out",
            path_str(&prior),
        ]));
        (dict, x, alpha, prior)
    }
}

fn header(path: &Path) -> (usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let first = text.lines().next().unwrap();
    let mut it = first
        .trim_start_matches('#')
        .split_whitespace()
        .map(|kv| kv.split('=').nth(1).unwrap().parse::<usize>().unwrap());
    (it.next().unwrap(), it.next().unwrap())
}

#[test]
fn random_design_has_requested_shape() {
    let ws = Workspace::new();
    let (dict, ..) = ws.fixtures();
    let phi = ws.path("phi.txt");
    let out = priorcs(&[
        "design",
        "--algo",
        "random",
        "--m",
        "3",
        "--dict",
        path_str(&dict),
        "--seed",
        "7",
        "--out",
        path_str(&phi),
    ]);
    ok(&out);
    assert_eq!(header(&phi), (3, 20));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("objective="));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.path("phi.txt.json")).unwrap()).unwrap();
    assert!(report["objective"].is_f64() && report["trailing_spectrum_sum"].is_f64());
}

#[test]
fn pwdsmd_without_prior_is_usage_error() {
    let ws = Workspace::new();
    let (dict, ..) = ws.fixtures();
    let out = priorcs(&[
        "design",
        "--algo",
        "pwdsmd",
        "--m",
        "8",
        "--dict",
        path_str(&dict),
        "--seed",
        "1",
        "--out",
        path_str(&ws.path("p.txt")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--prior"));
}

#[test]
fn random_design_without_seed_is_rejected() {
    let ws = Workspace::new();
    let (dict, ..) = ws.fixtures();
    let out = priorcs(&[
        "design",
        "--algo",
        "random",
        "--m",
        "3",
        "--dict",
        path_str(&dict),
        "--out",
        path_str(&ws.path("p.txt")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dictionary_is_io_error() {
    let ws = Workspace::new();
    let out = priorcs(&[
        "design",
        "--algo",
        "dcs",
        "--m",
        "3",
        "--dict",
        path_str(&ws.path("absent.txt")),
        "--out",
        path_str(&ws.path("p.txt")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn pwdsmd_design_is_reproducible() {
    let ws = Workspace::new();
    let (dict, _, _, prior) = ws.fixtures();
    let run = |name: &str| {
        let p = ws.path(name);
        ok(&priorcs(&[
            "design",
            "--algo",
            "pwdsmd",
            "--tau",
            "0.2",
            "--m",
            "8",
            "--dict",
            path_str(&dict),
            "--prior",
            path_str(&prior),
            "--seed",
            "11",
            "--out",
            path_str(&p),
        ]));
        (
            fs::read(&p).unwrap(),
            fs::read(ws.path(&format!("{name}.json"))).unwrap(),
        )
    };
    assert_eq!(run("a.txt"), run("b.txt"));
}

fn design_and_measure(ws: &Workspace, dict: &Path, x: &Path) -> (PathBuf, PathBuf) {
    let phi = ws.path("phi.txt");
    ok(&priorcs(&[
        "design",
        "--algo",
        "dcs",
        "--m",
        "12",
        "--dict",
        path_str(dict),
        "--out",
        path_str(&phi),
    ]));
    // y = Φ X by hand, outside the library
    let phi_m = read_matrix(&phi);
    let x_m = read_matrix(x);
    let y: Vec<Vec<f64>> = (0..phi_m.len())
        .map(|i| {
            (0..x_m[0].len())
                .map(|l| (0..x_m.len()).map(|j| phi_m[i][j] * x_m[j][l]).sum())
                .collect()
        })
        .collect();
    let y_path = ws.path("y.txt");
    write_matrix(&y_path, &y);
    (phi, y_path)
}

fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect()
}

fn write_matrix(path: &Path, rows: &[Vec<f64>]) {
    let mut text = format!("# rows={} cols={}\n", rows.len(), rows[0].len());
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn pdomp_with_zero_beta_matches_omp_bytes() {
    let ws = Workspace::new();
    let (dict, x, _, prior) = ws.fixtures();
    let (phi, y) = design_and_measure(&ws, &dict, &x);
    let omp = ws.path("omp.txt");
    let pd = ws.path("pd.txt");
    ok(&priorcs(&[
        "recover",
        "--algo",
        "omp",
        "--phi",
        path_str(&phi),
        "--dict",
        path_str(&dict),
        "--y",
        path_str(&y),
        "--sparsity",
        "4",
        "--out",
        path_str(&omp),
    ]));
    ok(&priorcs(&[
        "recover",
        "--algo",
        "pdomp",
        "--phi",
        path_str(&phi),
        "--dict",
        path_str(&dict),
        "--y",
        path_str(&y),
        "--prior",
        path_str(&prior),
        "--beta",
        "0",
        "--sparsity",
        "4",
        "--out",
        path_str(&pd),
    ]));
    assert_eq!(fs::read(&omp).unwrap(), fs::read(&pd).unwrap());
    assert_eq!(
        fs::read(ws.path("omp.txt.xhat")).unwrap(),
        fs::read(ws.path("pd.txt.xhat")).unwrap()
    );
    assert_eq!(header(&omp), (24, 30));
    assert_eq!(header(&ws.path("omp.txt.xhat")), (20, 30));
}

#[test]
fn recover_argument_errors() {
    let ws = Workspace::new();
    let (dict, x, ..) = ws.fixtures();
    let (phi, y) = design_and_measure(&ws, &dict, &x);
    let a = ws.path("a.txt");
    let base = [
        "--phi",
        path_str(&phi),
        "--dict",
        path_str(&dict),
        "--y",
        path_str(&y),
        "--out",
        path_str(&a),
    ];
    let mut args = vec!["recover", "--algo", "pdomp", "--sparsity", "3"];
    args.extend(base);
    assert_eq!(priorcs(&args).status.code(), Some(2));
    let mut args = vec!["recover", "--algo", "omp", "--sparsity", "13"];
    args.extend(base);
    assert_eq!(priorcs(&args).status.code(), Some(2));
}

#[test]
fn single_atom_reconstruction_is_exact() {
    let ws = Workspace::new();
    let (dict, ..) = ws.fixtures();
    let phi = ws.path("phi.txt");
    ok(&priorcs(&[
        "design",
        "--algo",
        "random",
        "--m",
        "10",
        "--dict",
        path_str(&dict),
        "--seed",
        "3",
        "--out",
        path_str(&phi),
    ]));
    let phi_m = read_matrix(&phi);
    let psi_m = read_matrix(&dict);
    // y = 2.5 Φ ψ_7
    let y: Vec<Vec<f64>> = (0..10)
        .map(|i| vec![2.5 * (0..20).map(|j| phi_m[i][j] * psi_m[j][7]).sum::<f64>()])
        .collect();
    let y_path = ws.path("y.txt");
    write_matrix(&y_path, &y);
    let out = priorcs(&[
        "recover",
        "--algo",
        "omp",
        "--phi",
        path_str(&phi),
        "--dict",
        path_str(&dict),
        "--y",
        path_str(&y_path),
        "--sparsity",
        "1",
        "--out",
        path_str(&ws.path("a.txt")),
    ]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let residual: f64 = stdout
        .trim()
        .strip_prefix("max_residual=")
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual < 1e-9, "{residual}");
    let alpha = read_matrix(&ws.path("a.txt"));
    assert!((alpha[7][0] - 2.5).abs() < 1e-9);
}

#[test]
fn experiment_writes_csv() {
    let ws = Workspace::new();
    let out = ws.path("r.csv");
    ok(&priorcs(&[
        "experiment",
        "--case",
        "tau_sweep",
        "--seed",
        "1",
        "--scale",
        "4",
        "--trials",
        "20",
        "--out",
        path_str(&out),
    ]));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_value,design,recovery,mse,e_r,trials,seed,mse_se"
    );
    let taus: Vec<f64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(taus.contains(&0.2) && taus.contains(&1.0));
}

#[test]
fn experiment_output_ignores_worker_count() {
    let ws = Workspace::new();
    let run = |workers: &str, name: &str| {
        let p = ws.path(name);
        ok(&priorcs(&[
            "experiment",
            "--case",
            "system_sparsity",
            "--seed",
            "5",
            "--trials",
            "30",
            "--workers",
            workers,
            "--out",
            path_str(&p),
        ]));
        fs::read(&p).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("4", "b.csv"));
}

#[test]
fn experiment_accepts_json_config() {
    let ws = Workspace::new();
    let cfg = r#"{
        "case_id": "beta_sweep", "m": 8, "n": 16, "k": 20, "sparsity": 2, "snr_db": 25.0, "trials": 10,
        "group_spec": {"group_sizes": [12, 8], "sparsity": 2},
        "algorithms": [{"design": "pwdsmd", "recovery": "pdomp"}],
        "sweep": {"param": "beta", "values": [0.0, 0.01]},
        "master_seed": 0, "tau": 0.3, "beta": 0.0001, "gamma": 0.5, "bh_iters": 5
    }"#;
    let path = ws.write("case.json", cfg);
    let out = ws.path("r.csv");
    ok(&priorcs(&[
        "experiment",
        "--case",
        path_str(&path),
        "--seed",
        "4",
        "--out",
        path_str(&out),
    ]));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 3);
}

#[test]
fn experiment_errors() {
    let ws = Workspace::new();
    let out = ws.path("r.csv");
    let unknown = priorcs(&[
        "experiment",
        "--case",
        "nonsense",
        "--seed",
        "1",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(unknown.status.code(), Some(2));

    let cfg = r#"{
        "case_id": "sparsity_sweep", "m": 8, "n": 16, "k": 20, "sparsity": 2, "snr_db": null, "trials": 10,
        "group_spec": {"group_sizes": [12, 8], "sparsity": 2},
        "algorithms": [{"design": "dcs", "recovery": "omp"}],
        "sweep": {"param": "sparsity", "values": [2, 12]},
        "master_seed": 0, "tau": 0.3, "beta": 0.0001, "gamma": 0.5, "bh_iters": 5
    }"#;
    let path = ws.write("bad.json", cfg);
    let infeasible = priorcs(&[
        "experiment",
        "--case",
        path_str(&path),
        "--seed",
        "1",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(infeasible.status.code(), Some(2));
    assert!(!out.exists());

    let no_seed = priorcs(&["experiment", "--case", "tau_sweep", "--out", path_str(&out)]);
    assert_eq!(no_seed.status.code(), Some(2));
}

#[test]
fn metrics_subcommands() {
    let ws = Workspace::new();
    let (dict, x, _, prior) = ws.fixtures();
    let welch = priorcs(&["metrics", "welch", "--m", "50", "--k", "240"]);
    ok(&welch);
    assert!(String::from_utf8_lossy(&welch.stdout).contains("0.12609"));

    let coh = priorcs(&["metrics", "coherence", "--dict", path_str(&dict)]);
    ok(&coh);
    assert!(String::from_utf8_lossy(&coh.stdout).contains("\"mu\""));

    let same = priorcs(&[
        "metrics",
        "mse",
        "--x",
        path_str(&x),
        "--xhat",
        path_str(&x),
    ]);
    ok(&same);
    assert!(String::from_utf8_lossy(&same.stdout).contains("\"mse\":0.0"));

    let abe = priorcs(&["metrics", "entropy", "--prior", path_str(&prior)]);
    ok(&abe);
    assert!(String::from_utf8_lossy(&abe.stdout).contains("\"abe\""));
}

#[test]
fn synth_is_reproducible() {
    let ws = Workspace::new();
    let (dict, x, alpha, _) = ws.fixtures();
    let again = Workspace::new();
    let (dict2, x2, alpha2, _) = again.fixtures();
    assert_eq!(fs::read(dict).unwrap(), fs::read(dict2).unwrap());
    assert_eq!(fs::read(x).unwrap(), fs::read(x2).unwrap());
    assert_eq!(fs::read(alpha).unwrap(), fs::read(alpha2).unwrap());
}

#[test]
fn infeasible_groups_are_usage_errors() {
    let ws = Workspace::new();
    let (dict, ..) = ws.fixtures();
    let out = priorcs(&[
        "synth",
        "batch",
        "--dict",
        path_str(&dict),
        "--groups",
        "22,1,1",
        "--sparsity",
        "9",
        "--trials",
        "3",
        "--seed",
        "1",
        "--out-x",
        path_str(&ws.path("x.txt")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
