//! Parse a case file, run every stage and write the artifacts.
use fracfreq::runner::{parse_config, run_case};

const CASE: &str = "\
[case]
id = hardy_h

[params]
n = 3
s = 0.5
lambda = 0.5

[perturbation]
h_coefficient = 0.1
h_exponent = 0.5

[boundary]
kind = mode
index = 1

[grid]
m = 160
n = 128
";

fn main() -> fracfreq::Result<()> {
    let config = parse_config(CASE)?;
    let dir = std::env::temp_dir().join("fracfreq-run").join(&config.id);
    let summary = run_case(&config, &dir)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    println!("artifacts in {}", dir.display());
    Ok(())
}
