//! Runs a `sigma` experiment from an inline TOML config through the same
//! entry point as the binary and prints the ledger entry.

use iwip::cli::{run_config, ExperimentConfig};

const CONFIG: &str = r#"
experiment = "sigma"
observable = "cosine"
master_seed = 42
output_dir = "target/example-out"

[map]
kind = "doubling"

[params]
n = 5000
replicas = 500
mc_budget = 4000000
"#;

fn main() -> iwip::Result<()> {
    let entry = run_config(&ExperimentConfig::from_toml(CONFIG)?)?;
    for r in &entry.verdicts {
        println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.test_name);
    }
    println!("artifacts in target/example-out: {:?}", entry.artifacts);
    Ok(())
}
