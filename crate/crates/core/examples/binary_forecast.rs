//! Static 4-qubit reservoir on periodic binary sequences, one Haar operator
//! per seed. Prints the forecast accuracy for each run.
//!
//! `cargo run --release --example binary_forecast -- [marginal] [PERIOD...]`

use std::time::Instant;

use qreservoir::experiment::{run_experiment, ExperimentConfig, OperatorSpec, SchemeKind, TaskSpec};
use qreservoir::reservoir::FeatureMode;

fn main() -> qreservoir::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = if args.iter().any(|a| a == "marginal") {
        FeatureMode::Marginal
    } else {
        FeatureMode::Distribution
    };
    let periods: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let periods = if periods.is_empty() { vec![2, 4] } else { periods };
    for period in periods {
        let start = Instant::now();
        let mut good = 0;
        for seed in 0..10u64 {
            let mut config = ExperimentConfig::new(
                SchemeKind::Static,
                4,
                TaskSpec::BinaryPeriodic { period, length: 100 },
            );
            config.seed = seed;
            config.feature_mode = mode;
            config.operator = OperatorSpec::Haar { k: 4, seed };
            let out = run_experiment(&config)?;
            let acc = out.metrics.accuracy.unwrap_or(0.0);
            if acc >= 0.9 {
                good += 1;
            }
            println!(
                "period {period} seed {seed}: accuracy {acc:.2} train_mse {:.4}",
                out.metrics.train_mse
            );
        }
        println!("period {period}: {good}/10 runs >= 0.9 in {:.1?}", start.elapsed());
    }
    Ok(())
}
