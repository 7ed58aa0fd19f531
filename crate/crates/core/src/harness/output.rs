//! Result files and run metadata.

use super::config::ExperimentConfig;
use super::trace::TraceBundle;
use super::trials::{sweep_csv, SweepRow};
use crate::affinity::AffinityMatrix;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use std::path::{Path, PathBuf};

/// Hash git would assign to a blob with these contents.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Canonical byte form of everything a run depends on.
pub fn input_bytes(config: &ExperimentConfig, affinity: &AffinityMatrix) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string(config)?;
    s.push('\n');
    for row in affinity.to_rows() {
        s.push_str(
            &row.iter()
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        s.push('\n');
    }
    Ok(s.into_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub input_hash: String,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Results<'a> {
    pub sweep: Option<&'a [SweepRow]>,
    pub trace: Option<&'a TraceBundle>,
    pub design_json: Option<&'a str>,
}

/// Writes `pe_sweep.csv`, `trace_*.csv`, `design.json` (whichever are
/// present) and always `meta.json`. Returns the written paths in order.
pub fn emit_results(
    out_dir: &Path,
    config: &ExperimentConfig,
    affinity: &AffinityMatrix,
    results: &Results<'_>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut files: Vec<(String, String)> = Vec::new();
    if let Some(rows) = results.sweep {
        files.push(("pe_sweep.csv".into(), sweep_csv(rows)));
    }
    if let Some(t) = results.trace {
        files.extend(t.to_csv().into_iter().map(|(n, c)| (n.to_string(), c)));
    }
    if let Some(d) = results.design_json {
        files.push(("design.json".into(), d.to_string()));
    }
    let meta = Meta {
        config: config.clone(),
        seed: config.seed,
        input_hash: git_blob_hash(&input_bytes(config, affinity)?),
        files: files.iter().map(|(n, _)| n.clone()).collect(),
    };
    files.push(("meta.json".into(), serde_json::to_string_pretty(&meta)?));
    let mut written = Vec::with_capacity(files.len());
    for (name, content) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_meta(path: &Path) -> Result<Meta> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(
            git_blob_hash(b"hello\n"),
            "ce013625030ba8dba906f756967f9e9ca394464a"
        );
        assert_eq!(
            git_blob_hash(b""),
            "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
        );
    }
}
