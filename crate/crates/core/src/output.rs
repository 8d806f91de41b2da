//! Result files: per-replicate traces, summaries, sweeps, bounds tables
//! and the run manifest, plus the parsers for the input documents.
//!
//! Arms are written 1-indexed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentKind;
use crate::bounds::BoundsRow;
use crate::engine::{PrincipalKind, ResultTable, Stat, Trace};
use crate::error::OutputError;
use crate::model::{GameConfig, Preset, RewardModel};
use crate::principal::SolveMode;

/// Where the ground-truth model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Preset(Preset),
    Inline(RewardModel),
}

impl ModelSource {
    pub fn model(&self) -> RewardModel {
        match self {
            ModelSource::Preset(p) => p.model(),
            ModelSource::Inline(m) => m.clone(),
        }
    }

    /// Directory label: the preset name, or `custom`.
    pub fn label(&self) -> &str {
        match self {
            ModelSource::Preset(p) => p.name(),
            ModelSource::Inline(_) => "custom",
        }
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config: GameConfig,
    pub model: ModelSource,
    pub solver: SolveMode,
    #[serde(default)]
    pub principal: PrincipalKind,
    pub agent: AgentKind,
    /// Horizons of a sweep; absent for a single run.
    #[serde(default, rename = "T_list", skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<usize>>,
    pub out_dir: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch at which the run started.
    pub timestamp: u64,
}

/// A config file holds either a bare configuration or a full manifest.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigDocument {
    Config(GameConfig),
    Manifest(Box<RunManifest>),
}

pub fn parse_config(text: &str) -> Result<GameConfig, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn parse_manifest(text: &str) -> Result<RunManifest, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn parse_reward_model(text: &str) -> Result<RewardModel, serde_json::Error> {
    serde_json::from_str(text)
}

/// Parses a manifest if the document has a `config` key, else a bare config.
pub fn parse_config_document(text: &str) -> Result<ConfigDocument, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("config").is_some() {
        Ok(ConfigDocument::Manifest(Box::new(serde_json::from_value(
            value,
        )?)))
    } else {
        Ok(ConfigDocument::Config(serde_json::from_value(value)?))
    }
}

/// Parses a comma-separated list of horizons such as `1000,5000,10000`.
pub fn parse_t_list(text: &str) -> Result<Vec<usize>, String> {
    let list = text
        .split(',')
        .map(str::trim)
        .map(|s| {
            s.parse::<usize>()
                .map_err(|e| format!("invalid horizon {s:?}: {e}"))
                .and_then(|t| {
                    if t == 0 {
                        Err("horizons must be positive".to_string())
                    } else {
                        Ok(t)
                    }
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if list.is_empty() {
        return Err("empty horizon list".into());
    }
    Ok(list)
}

/// `<out>/<label>/<T>/replicate_<i>`.
pub fn replicate_dir(out: &Path, label: &str, horizon: usize, replicate: usize) -> PathBuf {
    out.join(label)
        .join(horizon.to_string())
        .join(format!("replicate_{replicate}"))
}

pub fn trace_path(out: &Path, label: &str, horizon: usize, replicate: usize) -> PathBuf {
    replicate_dir(out, label, horizon, replicate)
        .join(format!("trace_{label}_T{horizon}_r{replicate}.csv"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn ensure_parent(path: &Path) -> Result<(), OutputError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(())
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), OutputError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub const TRACE_HEADER: [&str; 7] = [
    "t",
    "mode",
    "chosen_arm",
    "incentive_sum",
    "regret_cum",
    "linf_err",
    "agent_correct",
];

pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<(), OutputError> {
    let rows = trace
        .steps
        .iter()
        .zip(&trace.summary.regret_curve)
        .map(|(s, &cum)| {
            vec![
                s.t.to_string(),
                s.mode.as_str().to_string(),
                (s.chosen_arm + 1).to_string(),
                num(s.pi.iter().sum()),
                num(cum),
                opt(s.linf_error),
                u8::from(s.agent_correct).to_string(),
            ]
        });
    write_rows(path, &TRACE_HEADER, rows)
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "n",
    "T",
    "replicate",
    "seed",
    "linf_final",
    "l1_final",
    "regret_final",
    "wallclock_s",
];

fn replicate_rows(table: &ResultTable, wallclock: bool) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                table.n.to_string(),
                table.horizon.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
            ];
            match &r.outcome {
                Ok(m) => row.extend([
                    opt(m.linf_final),
                    num(m.l1_final),
                    num(m.regret_final),
                    if wallclock {
                        num(m.wallclock_s)
                    } else {
                        String::new()
                    },
                ]),
                Err(_) => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            row
        })
        .collect()
}

/// Replicate rows followed by `mean`, `std` and `stderr` rows.
///
/// Wall-clock times vary between runs, so they are left empty unless
/// `wallclock` is set; this keeps the file byte-identical across replays.
pub fn write_summary_csv(
    path: &Path,
    table: &ResultTable,
    wallclock: bool,
) -> Result<(), OutputError> {
    let mut rows = replicate_rows(table, wallclock);
    let agg = table.aggregate();
    let pick: [(&str, fn(&Stat) -> f64); 3] = [
        ("mean", |s| s.mean),
        ("std", |s| s.std),
        ("stderr", |s| s.stderr),
    ];
    for (label, f) in pick {
        let cell = |s: Option<Stat>| s.as_ref().map(f).map(num).unwrap_or_default();
        rows.push(vec![
            table.n.to_string(),
            table.horizon.to_string(),
            label.to_string(),
            String::new(),
            cell(agg.linf_final),
            cell(agg.l1_final),
            cell(agg.regret_final),
            if wallclock {
                cell(agg.wallclock_s)
            } else {
                String::new()
            },
        ]);
    }
    write_rows(path, &SUMMARY_HEADER, rows)
}

/// One row per `(n, T, replicate)`, tables in the given order.
pub fn write_sweep_csv(
    path: &Path,
    tables: &[ResultTable],
    wallclock: bool,
) -> Result<(), OutputError> {
    let rows = tables.iter().flat_map(|t| replicate_rows(t, wallclock));
    write_rows(path, &SUMMARY_HEADER, rows)
}

/// Wall-clock seconds per replicate, kept apart from the reproducible files.
pub fn write_timing_csv(path: &Path, tables: &[ResultTable]) -> Result<(), OutputError> {
    let rows = tables.iter().flat_map(|t| {
        t.rows.iter().map(move |r| {
            vec![
                t.n.to_string(),
                t.horizon.to_string(),
                r.replicate.to_string(),
                r.outcome
                    .as_ref()
                    .map(|m| num(m.wallclock_s))
                    .unwrap_or_default(),
            ]
        })
    });
    write_rows(path, &["n", "T", "replicate", "wallclock_s"], rows)
}

pub const BOUNDS_HEADER: [&str; 13] = [
    "t",
    "pt_bound",
    "pt_bound_clamped",
    "expected_eta",
    "lambda",
    "concentration_raw",
    "concentration",
    "regret_term1",
    "regret_term2",
    "regret_term3",
    "regret_term4",
    "regret_term5",
    "regret_term6",
];

/// Bounds table; columns past `pt_bound_clamped` hold only up to `alpha`.
pub fn write_bounds_csv(path: &Path, rows: &[BoundsRow]) -> Result<(), OutputError> {
    let mut header: Vec<&str> = BOUNDS_HEADER.to_vec();
    header.push("regret_total");
    let rows = rows.iter().map(|r| {
        let mut v = vec![
            r.t.to_string(),
            num(r.pt_bound),
            num(r.pt_bound.min(1.0)),
            num(r.expected_eta),
            num(r.lambda),
            num(r.concentration.raw),
            num(r.concentration.probability),
        ];
        v.extend(r.regret.terms.iter().map(|&x| num(x)));
        v.push(num(r.regret.total));
        v
    });
    write_rows(path, &header, rows)
}

pub fn save_manifest(path: &Path, manifest: &RunManifest) -> Result<(), OutputError> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(manifest).map_err(|source| OutputError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_manifest(&text).map_err(|source| OutputError::Json {
        path: path.display().to_string(),
        source,
    })
}
