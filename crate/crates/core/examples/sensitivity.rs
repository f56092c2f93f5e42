//! End-to-end response estimate from a TOML configuration.
//!
//! ```text
//! cargo run --release --example sensitivity -- configs/perturbed_mixed.toml
//! ```

use std::path::PathBuf;

use s3_core::config::S3Config;
use s3_core::driver::run_s3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/perturbed_mixed.toml")
    });
    let cfg = S3Config::from_toml_str(&std::fs::read_to_string(&path)?)?;
    let r = run_s3(&cfg)?;

    println!("{}", path.display());
    println!("response      {:>10.5} +/- {:.5}", r.psi_total, r.psi_stderr);
    println!("  coboundary  {:>10.5} +/- {:.5}", r.coboundary_term, r.coboundary_stderr);
    println!("  unstable    {:>10.5} +/- {:.5}", r.unstable_terms.iter().sum::<f64>(), r.series_stderr);
    for (k, (t, e)) in r.unstable_terms.iter().zip(&r.unstable_stderr).enumerate().take(6) {
        println!("    k = {k:>2}  {t:>10.5} +/- {e:.5}");
    }
    println!("mean rho {:.2e} +/- {:.2e}", r.diagnostics.mean_rho.value, r.diagnostics.mean_rho.stderr);
    println!("max decomposition residual {:.2e}", r.diagnostics.solver.max_decomposition_residual);
    for w in &r.diagnostics.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
