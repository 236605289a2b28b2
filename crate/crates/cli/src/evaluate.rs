use std::path::{Path, PathBuf};

use clap::Args;
use qcuts3d::metrics::{evaluate, MetricsReport};
use qcuts3d::volume::binarize_ground_truth;
use qcuts3d::{io, Error, LabelVolume, Result};
use serde::Serialize;
use serde_json::Value;

use crate::segment::{DIAGNOSTICS_FILE, MASK_FILE, SALIENCY_FILE};
use crate::{emit, Format};

pub const LABELS_FILE: &str = "labels.raw";

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted mask (u8, 1 = solid).
    #[arg(long, required_unless_present = "batch", conflicts_with = "batch")]
    pub pred: Option<PathBuf>,

    /// Saliency field used for the ROC curve.
    #[arg(long, required_unless_present = "batch", conflicts_with = "batch")]
    pub field: Option<PathBuf>,

    /// Ground-truth label volume.
    #[arg(long, required_unless_present = "batch", conflicts_with = "batch")]
    pub truth: Option<PathBuf>,

    /// Segment diagnostics, for the scales and runtime columns.
    #[arg(long, conflicts_with = "batch")]
    pub diagnostics: Option<PathBuf>,

    /// Directory of volumes, one subdirectory each holding mask.raw,
    /// saliency.raw, labels.raw and optionally diagnostics.json.
    #[arg(long, value_name = "DIR")]
    pub batch: Option<PathBuf>,

    /// Solid phase in the truth labels, by code or codebook name.
    #[arg(long, default_value = "solid")]
    pub solid: String,

    /// ROC thresholds spread evenly over [0, 1].
    #[arg(long, default_value_t = 256)]
    pub thresholds: usize,

    #[arg(long, value_enum, default_value_t)]
    pub format: Format,

    /// Write the report here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Phase code given as a number or a codebook name.
pub fn phase_code(labels: &LabelVolume, phase: &str) -> Result<u8> {
    if let Ok(code) = phase.parse::<u8>() {
        return Ok(code);
    }
    labels.code_of(phase).ok_or_else(|| {
        let names: Vec<&str> = labels.codebook().values().map(String::as_str).collect();
        Error::Argument(format!("no phase named `{phase}` in codebook {names:?}"))
    })
}

struct Scored {
    id: String,
    report: MetricsReport,
    scales: Vec<usize>,
    runtime: Option<f64>,
}

fn score(pred: &Path, field: &Path, truth: &Path, diag: Option<&Path>, a: &EvaluateArgs) -> Result<Scored> {
    let mask = io::load_mask(pred)?;
    let field = io::load_saliency(field)?;
    let labels = io::load_labels(truth)?;
    let truth_mask = binarize_ground_truth(&labels, phase_code(&labels, &a.solid)?)?;
    let report = evaluate(&mask, &field, &truth_mask, a.thresholds)?;
    let (scales, runtime) = match diag {
        Some(p) => read_run_info(p)?,
        None => (Vec::new(), None),
    };
    Ok(Scored {
        id: String::new(),
        report,
        scales,
        runtime,
    })
}

/// Scales and wall-clock seconds from a segment diagnostics file.
fn read_run_info(path: &Path) -> Result<(Vec<usize>, Option<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let scales = v["config"]["scales"]
        .as_array()
        .map(|a| a.iter().filter_map(|s| s.as_u64()).map(|s| s as usize).collect())
        .unwrap_or_default();
    Ok((scales, v["seconds"].as_f64()))
}

#[derive(Serialize)]
struct BatchMean {
    volumes: usize,
    iou: f64,
    auroc: f64,
    me: f64,
    runtime_s: Option<f64>,
}

fn mean(rows: &[Scored]) -> BatchMean {
    let n = rows.len() as f64;
    let avg = |f: &dyn Fn(&Scored) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let runtime = rows
        .iter()
        .map(|r| r.runtime)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / n);
    BatchMean {
        volumes: rows.len(),
        iou: avg(&|r| r.report.iou),
        auroc: avg(&|r| r.report.auroc),
        me: avg(&|r| r.report.me),
        runtime_s: runtime,
    }
}

fn batch_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MASK_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Argument(format!(
            "{} has no subdirectories containing {MASK_FILE}",
            dir.display()
        )));
    }
    Ok(dirs)
}

fn run_batch(dir: &Path, a: &EvaluateArgs) -> Result<()> {
    let mut rows = Vec::new();
    for d in batch_dirs(dir)? {
        let diag = d.join(DIAGNOSTICS_FILE);
        let mut s = score(
            &d.join(MASK_FILE),
            &d.join(SALIENCY_FILE),
            &d.join(LABELS_FILE),
            diag.is_file().then_some(diag.as_path()),
            a,
        )?;
        s.id = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        rows.push(s);
    }
    let m = mean(&rows);
    let text = match a.format {
        Format::Csv => {
            let mut out = format!("{}\n", MetricsReport::CSV_HEADER);
            for r in &rows {
                out.push_str(&r.report.csv_row(&r.id, &r.scales, r.runtime));
                out.push('\n');
            }
            let same_scales = rows.windows(2).all(|w| w[0].scales == w[1].scales);
            let scales: Vec<String> = if same_scales {
                rows[0].scales.iter().map(|s| s.to_string()).collect()
            } else {
                Vec::new()
            };
            out.push_str(&format!(
                "mean,{},{:.6},{:.6},{:.6},{}\n",
                scales.join(";"),
                m.iou,
                m.auroc,
                m.me,
                m.runtime_s.map(|r| format!("{r:.3}")).unwrap_or_default()
            ));
            out
        }
        Format::Json => {
            let volumes: Vec<Value> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "volume": r.id,
                        "scales": r.scales,
                        "runtime_s": r.runtime,
                        "report": r.report,
                    })
                })
                .collect();
            let v = serde_json::json!({"volumes": volumes, "mean": m});
            serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
        }
    };
    emit(&text, a.output.as_ref())
}

pub fn run(a: &EvaluateArgs) -> Result<()> {
    if let Some(dir) = &a.batch {
        return run_batch(dir, a);
    }
    let (pred, field, truth) = match (&a.pred, &a.field, &a.truth) {
        (Some(p), Some(f), Some(t)) => (p, f, t),
        _ => return Err(Error::Argument("--pred, --field and --truth are required".into())),
    };
    let mut s = score(pred, field, truth, a.diagnostics.as_deref(), a)?;
    s.id = pred
        .file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let text = match a.format {
        Format::Csv => format!(
            "{}\n{}\n",
            MetricsReport::CSV_HEADER,
            s.report.csv_row(&s.id, &s.scales, s.runtime)
        ),
        Format::Json => serde_json::to_string_pretty(&s.report).expect("report serializes") + "\n",
    };
    emit(&text, a.output.as_ref())
}
