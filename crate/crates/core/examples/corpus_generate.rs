//! The built-in corpus, and a generate → verify round trip through the
//! JSON spec format.
use jdlg::cli::{generate_spec, verify_bytes};
use jdlg::corpus::{self, PresetParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for entry in corpus::standard_corpus() {
        println!(
            "{:<42} h {:<8} reversible {:<3} ergodic {}",
            entry.name,
            format!("{:?}", entry.expected.h),
            entry.expected.reversible_dim,
            entry.expected.ergodic,
        );
    }

    let params = PresetParams { h: Some(5), mixing: vec![2], seed: Some(3), ..Default::default() };
    let spec = generate_spec("classical_cycle", &params).map_err(|e| e.message)?;
    let bytes = serde_json::to_vec_pretty(&spec)?;
    let mismatches = verify_bytes(&bytes, None).map_err(|e| e.message)?;
    println!("round trip of {}: {} mismatches", spec.name.as_deref().unwrap_or("?"), mismatches.len());
    Ok(())
}
