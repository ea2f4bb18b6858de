use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use pyramidnet_core::pyramid::{import_matrix, write_matrix_csv};
use pyramidnet_core::train::Network;
use pyramidnet_core::{angles_from_matrix, Mat64, PyramidLayer};

use crate::config::layered;
use crate::failure::Failure;
use crate::write_output;

const ROUNDTRIP_TOL: f64 = 1e-8;

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportArgs {
    /// Trained model JSON (from `train --save-model`) to take the layer from
    #[arg(long, value_name = "PATH", conflicts_with = "import")]
    model: Option<PathBuf>,
    /// Layer index within the model [default: 0]
    #[arg(long)]
    layer: Option<usize>,
    /// Decompose this CSV matrix into pyramid angles instead of exporting
    #[arg(long, value_name = "PATH")]
    import: Option<PathBuf>,
    /// Width of the random layer used when no model is given [default: 8]
    #[arg(long)]
    n: Option<usize>,
    /// Use the all-zero-angle layer (the identity) instead of a random one
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    zero: Option<bool>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Matrix CSV to write; with --import, the recovered angles as JSON [default: matrix.csv, angles.json]
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

layered!(ExportArgs {
    model,
    layer,
    import,
    n,
    zero,
    seed,
    out,
});

fn csv_of(m: &Mat64) -> String {
    let mut buf = Vec::new();
    write_matrix_csv(m, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii CSV")
}

fn join(v: &[f64]) -> String {
    v.iter().map(|s| format!("{s}")).collect::<Vec<_>>().join(",")
}

/// Decomposes `w` and reports the reconstruction residual and sign mask.
fn roundtrip(w: &Mat64) -> Result<PyramidLayer, Failure> {
    let d = angles_from_matrix(w).map_err(|e| Failure::from_data("decomposing matrix", e))?;
    let residual = d.reconstruct().max_abs_diff(w);
    println!("roundtrip residual={residual:.3e}");
    println!("sign_mask={}", join(&d.sign_mask));
    println!("flipped_wires={:?}", d.flipped_wires());
    if !(residual <= ROUNDTRIP_TOL) {
        return Err(Failure::check(format!("residual {residual:.3e} exceeds {ROUNDTRIP_TOL:e}")));
    }
    Ok(d.layer)
}

pub fn run(a: ExportArgs) -> Result<(), Failure> {
    if let Some(path) = &a.import {
        let w = import_matrix(path).map_err(|e| Failure::from_data(&format!("reading {}", path.display()), e))?;
        println!("imported {}x{} matrix from {}", w.rows(), w.cols(), path.display());
        let layer = roundtrip(&w)?;
        let out = a.out.clone().unwrap_or_else(|| PathBuf::from("angles.json"));
        let json = serde_json::to_string_pretty(&layer).expect("serializable");
        write_output(&out, &json)?;
        println!("angles written to {}", out.display());
        return Ok(());
    }

    let layer = match &a.model {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
            let net: Network = serde_json::from_str(&text)
                .map_err(|e| Failure::data(format!("bad model {}: {e}", path.display())))?;
            let k = a.layer.unwrap_or(0);
            let count = net.layers().len();
            net.layers()
                .get(k)
                .ok_or_else(|| Failure::config(format!("--layer {k} out of range for {count} layers")))?
                .pyramid
                .clone()
        }
        None => {
            let n = a.n.unwrap_or(8);
            if a.zero.unwrap_or(false) {
                PyramidLayer::identity(n, n)?
            } else {
                PyramidLayer::random(n, n, &mut ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(0)))?
            }
        }
    };
    let w = layer.matrix();
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("matrix.csv"));
    write_output(&out, &csv_of(&w))?;
    println!("{}x{} matrix written to {}", w.rows(), w.cols(), out.display());
    if w.is_square() {
        roundtrip(&w)?;
    } else {
        println!("roundtrip skipped: angle recovery needs a square matrix");
    }
    Ok(())
}
