//! Runs every config under configs/ into a temporary directory, as the binary would.
use renewal_lab::cli::{prepare, run, RunArgs};
use std::path::PathBuf;

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let out = std::env::temp_dir().join("renewal-lab-batch");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&root)
        .expect("configs directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        if name.starts_with("classify") && std::env::args().all(|a| a != "--all") {
            println!("{name}: skipped (pass --all)");
            continue;
        }
        let args = RunArgs { config: path.clone(), out: Some(out.join(&name)), seed: None, set: Vec::new() };
        match prepare(None, &args).and_then(|cfg| run(&cfg)) {
            Ok(m) => println!("{name}: {} artifacts, {:.2} s", m.artifacts.len(), m.wall_time_s),
            Err(e) => println!("{name}: failed ({e}), exit code {}", e.exit_code()),
        }
    }
}
