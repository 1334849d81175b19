#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(rel: &str) -> PathBuf {
    fixtures().join(rel)
}

pub fn updating() -> bool {
    std::env::var("UPDATE_GOLDENS").is_ok_and(|v| v == "1")
}

/// Compares `actual` with the golden file, or rewrites it under
/// `UPDATE_GOLDENS=1`.
pub fn check_golden(golden: &Path, actual: &[u8]) -> Result<(), String> {
    if updating() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(golden, actual).unwrap();
    }
    compare_bytes(golden, actual)
}

pub fn compare_bytes(golden: &Path, actual: &[u8]) -> Result<(), String> {
    let expected = fs::read(golden).map_err(|e| format!("{}: {e}", golden.display()))?;
    if expected == actual {
        return Ok(());
    }
    let (e, a) = (String::from_utf8_lossy(&expected), String::from_utf8_lossy(actual));
    let line = e
        .lines()
        .zip(a.lines())
        .position(|(x, y)| x != y)
        .unwrap_or_else(|| e.lines().count().min(a.lines().count()));
    Err(format!(
        "{} differs at line {}:\n  expected: {:?}\n  actual:   {:?}",
        golden.display(),
        line + 1,
        e.lines().nth(line).unwrap_or("<eof>"),
        a.lines().nth(line).unwrap_or("<eof>")
    ))
}

fn files_under(root: &Path) -> BTreeSet<PathBuf> {
    let mut out = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let Ok(entries) = fs::read_dir(&dir) else { continue };
        for entry in entries.flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out
}

/// Every file under `actual` matches the same path under `golden`, and
/// neither side has extra files. Rewrites `golden` under `UPDATE_GOLDENS=1`.
pub fn check_golden_dir(golden: &Path, actual: &Path) -> Result<(), String> {
    if updating() {
        let _ = fs::remove_dir_all(golden);
        for rel in files_under(actual) {
            check_golden(&golden.join(&rel), &fs::read(actual.join(&rel)).unwrap())?;
        }
    }
    compare_dirs(golden, actual)
}

/// Like [`check_golden_dir`] but never rewrites.
pub fn compare_dirs(golden: &Path, actual: &Path) -> Result<(), String> {
    let produced = files_under(actual);
    let mut errors = Vec::new();
    for rel in &produced {
        if let Err(e) = compare_bytes(&golden.join(rel), &fs::read(actual.join(rel)).unwrap()) {
            errors.push(e);
        }
    }
    for rel in files_under(golden).difference(&produced) {
        errors.push(format!("golden file {} was not produced", rel.display()));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("\n"))
    }
}

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_debatetree"));
    for var in [
        "TOD_CHAT_ENDPOINT",
        "TOD_CHAT_MODEL",
        "TOD_API_KEY",
        "TOD_EMBED_ENDPOINT",
        "TOD_EMBED_MODEL",
        "RUST_LOG",
    ] {
        cmd.env_remove(var);
    }
    cmd
}

pub fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `compare` on dataset row 1 with the fixture mock script.
pub fn compare_fixture(out: &Path) -> Output {
    run_bin(&[
        "compare",
        "--dataset",
        path_str(&fixture("dataset.tsv")),
        "--row",
        "1",
        "--mock",
        path_str(&fixture("mock/pair.yaml")),
        "--out",
        path_str(out),
    ])
}
