//! All-or-nothing artifact emission: every file is rendered in memory,
//! staged under a temporary name, and renamed only once all staging
//! succeeded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

/// The envelope every JSON report shares.
#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    status: &'a str,
    config: &'a RunConfig,
    result: Option<&'a T>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn json<T: Serialize>(
        &mut self,
        name: &str,
        command: &str,
        status: &str,
        config: &RunConfig,
        result: Option<&T>,
    ) -> Result<(), CliError> {
        let report = Report {
            command,
            version: VERSION,
            status,
            config,
            result,
        };
        let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Output(e.to_string()))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.serialize(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |p: &Path, e: std::io::Error| CliError::Output(format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(io(&tmp, e));
            }
            staged.push((tmp, dir.join(name)));
        }
        let mut done = Vec::with_capacity(staged.len());
        for (i, (tmp, dst)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, dst) {
                for (t, _) in &staged[i..] {
                    let _ = fs::remove_file(t);
                }
                for d in &done {
                    let _ = fs::remove_file(d);
                }
                return Err(io(dst, e));
            }
            done.push(dst.clone());
        }
        Ok(done)
    }
}
