use std::path::{Path, PathBuf};

use clap::Args;
use qcuts3d::io::{self, read_sidecar};
use qcuts3d::Result;
use serde_json::{json, Value};

use crate::config::{RunConfig, THREADS_ENV};
use crate::{emit, Format};

#[derive(Debug, Args)]
pub struct InfoArgs {
    /// Raw files to summarize.
    pub files: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

fn summarize(path: &Path) -> Result<Value> {
    let sc = read_sidecar(path)?;
    let kind = sc.kind.clone().unwrap_or_else(|| "volume".to_string());
    let stats = match kind.as_str() {
        "mask" => {
            let m = io::load_mask(path)?;
            json!({"solid_fraction": m.solid_fraction()})
        }
        "labels" => {
            let l = io::load_labels(path)?;
            let n = l.labels().len() as f64;
            let fractions: serde_json::Map<String, Value> = l
                .codebook()
                .iter()
                .map(|(&code, name)| {
                    let c = l.labels().iter().filter(|&&x| x == code).count();
                    (name.clone(), json!(c as f64 / n))
                })
                .collect();
            json!({"phase_fractions": fractions})
        }
        "supervoxels" => json!({}),
        _ => {
            let v = io::load_volume_with(path, &sc)?;
            let vox = v.voxels();
            let (lo, hi) = vox
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let mean = vox.iter().sum::<f64>() / vox.len() as f64;
            json!({"min": lo, "max": hi, "mean": mean})
        }
    };
    Ok(json!({
        "path": path,
        "kind": kind,
        "dims": sc.dims,
        "dtype": sc.dtype,
        "axis_order": sc.axis_order,
        "stats": stats,
    }))
}

pub fn run(a: &InfoArgs) -> Result<()> {
    let files = a
        .files
        .iter()
        .map(|p| summarize(p))
        .collect::<Result<Vec<Value>>>()?;
    let env = std::env::var(THREADS_ENV).ok();
    let info = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "hardware_threads": std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        "threads_env": env,
        "default_config": RunConfig::default(),
        "exit_codes": {"ok": 0, "argument": 2, "format": 3, "data": 4, "convergence": 5, "io": 6},
        "files": files,
    });
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&info).expect("info serializes") + "\n",
        Format::Csv => {
            let mut out = String::from("path,kind,nx,ny,nz,dtype\n");
            for f in &files {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    f["path"].as_str().unwrap_or_default(),
                    f["kind"].as_str().unwrap_or_default(),
                    f["dims"][0],
                    f["dims"][1],
                    f["dims"][2],
                    f["dtype"].as_str().unwrap_or_default()
                ));
            }
            out
        }
    };
    emit(&text, None)
}
