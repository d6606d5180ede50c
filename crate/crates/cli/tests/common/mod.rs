#![allow(dead_code)]

use argrid_cli::config::Cli;
use argrid_cli::error::CliError;
use clap::Parser;
use serde_json::Value;
use std::path::{Path, PathBuf};

pub const START: &str = "2022-03-06T23:00:00Z";

pub fn run(args: &[&str]) -> Result<Value, CliError> {
    let cli = Cli::try_parse_from(std::iter::once("argrid").chain(args.iter().copied())).expect("arguments parse");
    argrid_cli::run(cli)
}

pub struct City {
    pub dir: tempfile::TempDir,
}

impl City {
    /// Synthetic radial city with `days` of five-minute snapshots in its store.
    pub fn new(days: u32) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap().to_owned();
        run(&["synth", "--out", &format!("{d}/city"), "--days", &days.to_string()]).unwrap();
        run(&["ingest", "--source", &format!("{d}/city/source.json"), "--store", &format!("{d}/store")]).unwrap();
        Self { dir }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn s(&self, rel: &str) -> String {
        self.path(rel).to_str().unwrap().to_owned()
    }

    /// `--grid/--sites/--store` flags.
    pub fn run_flags(&self) -> Vec<String> {
        vec![
            "--grid".into(),
            self.s("city/grid.csv"),
            "--sites".into(),
            self.s("city/sites.csv"),
            "--store".into(),
            self.s("store"),
        ]
    }

    pub fn cmd(&self, command: &str, extra: &[&str]) -> Result<Value, CliError> {
        let flags = self.run_flags();
        let mut args: Vec<&str> = vec![command];
        args.extend(flags.iter().map(|s| s.as_str()));
        args.extend_from_slice(extra);
        run(&args)
    }
}

pub fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

/// Every file in `a` exists in `b` with identical bytes, and vice versa.
pub fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let list = |d: &Path| {
        let mut v: Vec<String> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    let (la, lb) = (list(a), list(b));
    if la != lb {
        return Err(format!("file lists differ: {la:?} vs {lb:?}"));
    }
    for f in &la {
        if std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap() {
            return Err(format!("{f} differs"));
        }
    }
    Ok(la.len())
}
