//! Artifact layout: `<out>/<pair-id>/<variant>/{summary.txt, tree.json,
//! transcript.md, manifest.json}` plus a pair-level manifest for compare runs.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunArtifacts, RunConfig, Variant};
use crate::transcript::{render_markdown, TranscriptEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantFiles {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<String>,
    pub transcript: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantManifest {
    pub pair_id: String,
    pub variant: Variant,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: VariantFiles,
    pub chat_calls: usize,
    pub embedding_calls: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth_reached: Option<usize>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareEntry {
    pub variant: Variant,
    pub status: RunStatus,
    pub directory: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareManifest {
    pub pair_id: String,
    pub variants: Vec<CompareEntry>,
}

impl CompareManifest {
    pub fn any_failed(&self) -> bool {
        self.variants.iter().any(|v| v.status == RunStatus::Failed)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    fs::write(path, s)
}

fn transcript_title(pair_id: &str, variant: Variant) -> String {
    format!("Transcript: {pair_id} / {variant}")
}

fn with_newline(s: &str) -> String {
    if s.ends_with('\n') {
        s.to_string()
    } else {
        format!("{s}\n")
    }
}

/// Writes one successful run; returns its manifest.
pub fn write_artifacts(out: &Path, pair_id: &str, artifacts: &RunArtifacts) -> io::Result<VariantManifest> {
    let dir = out.join(pair_id).join(artifacts.variant.as_str());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("summary.txt"), with_newline(&artifacts.summary))?;
    let tree_file = match &artifacts.tree {
        Some(tree) => {
            fs::write(dir.join("tree.json"), tree.to_json())?;
            Some("tree.json".to_string())
        }
        None => {
            let stale = dir.join("tree.json");
            if stale.exists() {
                fs::remove_file(stale)?;
            }
            None
        }
    };
    fs::write(
        dir.join("transcript.md"),
        render_markdown(&transcript_title(pair_id, artifacts.variant), &artifacts.transcript),
    )?;
    let manifest = VariantManifest {
        pair_id: pair_id.to_string(),
        variant: artifacts.variant,
        status: RunStatus::Ok,
        error: None,
        files: VariantFiles {
            summary: Some("summary.txt".into()),
            tree: tree_file,
            transcript: "transcript.md".into(),
        },
        chat_calls: artifacts.chat_calls(),
        embedding_calls: artifacts.embedding_calls(),
        node_count: artifacts.tree.as_ref().map(|t| t.len()),
        max_depth_reached: artifacts.tree.as_ref().map(|t| t.max_depth()),
        config: artifacts.config.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Writes the transcript and a failed manifest for a run that errored.
pub fn write_failure(
    out: &Path,
    pair_id: &str,
    config: &RunConfig,
    error: &str,
    transcript: &[TranscriptEntry],
) -> io::Result<VariantManifest> {
    let dir = out.join(pair_id).join(config.variant.as_str());
    fs::create_dir_all(&dir)?;
    for stale in ["summary.txt", "tree.json"] {
        let p = dir.join(stale);
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    fs::write(
        dir.join("transcript.md"),
        render_markdown(&transcript_title(pair_id, config.variant), transcript),
    )?;
    let chat_calls = transcript
        .iter()
        .filter(|e| matches!(e, TranscriptEntry::Chat(_)))
        .count();
    let embedding_calls = transcript
        .iter()
        .filter(|e| matches!(e, TranscriptEntry::Embedding { fetched, .. } if *fetched > 0))
        .count();
    let manifest = VariantManifest {
        pair_id: pair_id.to_string(),
        variant: config.variant,
        status: RunStatus::Failed,
        error: Some(error.to_string()),
        files: VariantFiles {
            summary: None,
            tree: None,
            transcript: "transcript.md".into(),
        },
        chat_calls,
        embedding_calls,
        node_count: None,
        max_depth_reached: None,
        config: config.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Pair-level manifest plus `summaries.md` holding every summary in
/// variant order.
pub fn write_compare_manifest(
    out: &Path,
    pair_id: &str,
    runs: &[(VariantManifest, Option<String>)],
) -> io::Result<CompareManifest> {
    let dir = out.join(pair_id);
    fs::create_dir_all(&dir)?;
    let manifest = CompareManifest {
        pair_id: pair_id.to_string(),
        variants: runs
            .iter()
            .map(|(m, _)| CompareEntry {
                variant: m.variant,
                status: m.status,
                directory: m.variant.as_str().to_string(),
                summary: m.files.summary.as_ref().map(|s| format!("{}/{s}", m.variant)),
                error: m.error.clone(),
            })
            .collect(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    let mut side_by_side = format!("# Summaries: {pair_id}\n");
    for (m, summary) in runs {
        side_by_side.push_str(&format!("\n## {}\n\n", m.variant));
        match (summary, &m.error) {
            (Some(s), _) => side_by_side.push_str(&with_newline(s)),
            (None, Some(e)) => side_by_side.push_str(&format!("Failed: {e}\n")),
            (None, None) => side_by_side.push_str("Failed.\n"),
        }
    }
    fs::write(dir.join("summaries.md"), side_by_side)?;
    Ok(manifest)
}
