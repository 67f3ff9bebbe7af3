use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use cordes_lab::suite;

const BINARY: &str = env!("CARGO_BIN_EXE_cordes-lab");

fn collect(dir: &Path, root: &Path, files: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).expect("readable output directory") {
        let path = entry.expect("directory entry").path();
        if path.is_dir() {
            collect(&path, root, files);
        } else {
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            files.insert(rel, std::fs::read(&path).unwrap());
        }
    }
}

/// Runs the reference zero-order computation in a fresh working directory and
/// returns every file it wrote.
fn run_binary() -> Result<BTreeMap<String, Vec<u8>>, String> {
    let cwd = tempfile::tempdir().map_err(|e| e.to_string())?;
    let status = Command::new(BINARY)
        .current_dir(cwd.path())
        .args(["perturb-zero", "--N", "4", "--gamma", "3", "--sigma", "-0.125", "--p", "3"])
        .args(["--delta", "0.01", "--linearization", "--seed", "7", "--out", "run"])
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let mut files = BTreeMap::new();
    let root = cwd.path().join("run");
    collect(&root, &root, &mut files);
    Ok(files)
}

fn determinism() -> (bool, String) {
    match (run_binary(), run_binary()) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
            let same = a.len() == b.len() && differing.is_empty();
            (same, format!("{} files, {} differing {:?}", a.len(), differing.len(), differing))
        }
        (Err(e), _) | (_, Err(e)) => (false, format!("run failed: {e}")),
    }
}

fn line(id: u8, name: &str, passed: bool, elapsed: Duration, budget: Option<Duration>, detail: &str) -> bool {
    let on_time = budget.is_none_or(|b| elapsed <= b);
    let ok = passed && on_time;
    let budget = budget.map(|b| format!("{}s", b.as_secs())).unwrap_or_else(|| "-".into());
    println!(
        "{} criterion {id:>2} {name:<28} {:>8.2}s / {budget:<5} {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn main() -> ExitCode {
    let mut all = true;
    for c in suite::criteria() {
        let o = suite::run(&c);
        all &= line(o.id, o.name, o.passed, o.elapsed, c.budget, &o.detail);
    }
    let start = Instant::now();
    let (passed, detail) = determinism();
    all &= line(10, "determinism", passed, start.elapsed(), None, &detail);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
