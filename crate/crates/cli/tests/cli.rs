use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use twophase_cli::config::Config;
use twophase_cli::manifest::RunManifest;

fn twophase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twophase"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_with(dir: &Path, sub: &str, toml: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, toml).unwrap();
    let out = dir.join("out");
    let mut args = vec![sub, "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    twophase(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn oracle_prints_laminate_means() {
    let dir = TempDir::new().unwrap();
    let o = run_with(dir.path(), "oracle", "", &["--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("a11 = 1.6000000000"), "{text}");
    assert!(text.contains("a22 = 2.5000000000"), "{text}");
    let m = manifest(dir.path());
    assert_eq!(m.subcommand, "oracle");
    assert_eq!(m.seed, 42);
    assert_eq!(m.outputs, vec!["oracle.json".to_string()]);
}

#[test]
fn zero_data_solve_has_zero_norms() {
    let dir = TempDir::new().unwrap();
    let o = run_with(dir.path(), "solve", "[mesh]\nh = 0.0625\n", &[]);
    assert_eq!(o.status.code(), Some(0));
    let norms = std::fs::read_to_string(dir.path().join("out/norms.csv")).unwrap();
    for line in norms.lines().skip(1) {
        let (name, value) = line.split_once(',').unwrap();
        if name != "energy_constant" {
            assert_eq!(value.parse::<f64>().unwrap(), 0.0, "{name}");
        }
    }
    assert!(dir.path().join("out/field.txt").exists());
}

const CONSTANT_RATE: &str = r#"
[plus]
kind = "isotropic"
value = 3.0
lambda = 3.0

[minus]
kind = "isotropic"
value = 1.0
lambda = 3.0

[data]
g = [{ kind = "constant", value = 1.0 }]

[rate]
eps_minus = [0.25, 0.125]
richardson = false
"#;

#[test]
fn constant_tensors_give_zero_rate_errors() {
    let dir = TempDir::new().unwrap();
    let o = run_with(dir.path(), "rate", CONSTANT_RATE, &["--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/rate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eps_plus,eps_minus,h,L2_error,slope_so_far"));
    let errors: Vec<f64> = lines.map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(errors, vec![0.0, 0.0]);
}

const LAMINATE_EXCESS: &str = r#"
[domain]
min = [-0.4, -0.4]
max = [0.4, 0.4]

[plus]
kind = "laminate"
axis = 0
fraction = 0.5
low = 1.0
high = 4.0
lambda = 4.0

[mesh]
h = 0.0125
h_cell = 0.0625

[data]
g = [{ kind = "sine", offset = 2.0, amplitude = 0.5, frequency = 0.5 }]

[excess]
theta = 0.5
levels = 3
"#;

#[test]
fn repeated_runs_write_identical_csv() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        let o = run_with(d.path(), "excess", LAMINATE_EXCESS, &[]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["excess.csv", "audit.csv"] {
        let x = std::fs::read(a.path().join("out").join(file)).unwrap();
        let y = std::fs::read(b.path().join("out").join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs");
    }
    assert_eq!(manifest(a.path()).config_hash, manifest(b.path()).config_hash);
}

#[test]
fn resume_reuses_finished_tasks() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run_with(dir.path(), "rate", CONSTANT_RATE, &[]).status.code(), Some(0));
    let first = manifest(dir.path());
    assert_eq!(first.tasks.len(), 2);
    assert_eq!(run_with(dir.path(), "rate", CONSTANT_RATE, &["--resume"]).status.code(), Some(0));
    let second = manifest(dir.path());
    assert_eq!(first.tasks, second.tasks);

    // A changed config invalidates the stored tasks.
    let changed = CONSTANT_RATE.replace("value = 1.0\nlambda", "value = 2.0\nlambda");
    assert_eq!(run_with(dir.path(), "rate", &changed, &["--resume"]).status.code(), Some(0));
    let third = manifest(dir.path());
    assert_ne!(third.config_hash, first.config_hash);
    assert_ne!(third.tasks[0].seconds, first.tasks[0].seconds);
}

#[test]
fn invalid_configs_exit_with_code_2() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("[mesh]\nh = -1.0\n", "mesh.h"),
        ("[mesh]\nhh = 1.0\n", "unknown field"),
        ("[scales]\neps_plus = 0.5\neps_minus = 0.25\n", "eps_plus"),
        ("[plus]\nkind = \"laminate\"\naxis = 3\nfraction = 0.5\nlow = 1.0\nhigh = 2.0\nlambda = 2.0\n", "plus: axis"),
        ("[data]\nm = 2\n", "data.m"),
        ("[data]\ng = [{ kind = \"lift\" }]\n", "data.g"),
    ];
    for (toml, needle) in cases {
        let o = run_with(dir.path(), "solve", toml, &[]);
        assert_eq!(o.status.code(), Some(2), "{toml}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{err} lacks {needle}");
    }
}

#[test]
fn solver_failure_exits_with_code_3() {
    let dir = TempDir::new().unwrap();
    let toml = "[data]\ng = [{ kind = \"constant\", value = 1.0 }]\n[solver]\nmax_iterations = 1\npreconditioner = \"jacobi\"\n";
    let o = run_with(dir.path(), "solve", toml, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_check_exits_with_code_4() {
    let dir = TempDir::new().unwrap();
    let toml = r#"
[data]
g = [{ kind = "holder", offset = 2.0, coefficient = 1.0, alpha = 0.5 }]

[stability]
t = [0.25, 0.125]
cells = 16

[check]
min_stability_reduction = 100.0
"#;
    let o = run_with(dir.path(), "stability", toml, &["--check"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(dir.path().join("out/stability.csv").exists());
    let o = run_with(dir.path(), "stability", toml, &[]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn cell_writes_corrector_files() {
    let dir = TempDir::new().unwrap();
    let toml = "[plus]\nkind = \"checkerboard\"\na = 1.0\nb = 4.0\nlambda = 4.0\n[mesh]\nh_cell = 0.0625\n";
    let o = run_with(dir.path(), "cell", toml, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("homogenized tensor (plus phase)"));
    for f in ["summary.json", "chi_1_1.txt", "chi_2_1.txt", "flux.txt"] {
        assert!(dir.path().join("out/plus").join(f).exists(), "{f}");
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = Config::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        cfg.experiment(&dir).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}
