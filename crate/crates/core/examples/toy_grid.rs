//! Runs the O / S / OS grid on the toy recording and prints the aggregate
//! table.
//!
//! Usage: `toy_grid [epochs_per_class] [seeds]`

use std::time::Instant;

use forecast_synth::evaluation::{run_experiment_grid, Condition, ExperimentConfig, ForecasterChoice};
use forecast_synth::forecast::Architecture;
use forecast_synth::labeling::{label_dataset, LabelingConfig};
use forecast_synth::toy::{make_toy_dataset, TOY_EPOCH_SECONDS};

fn main() -> forecast_synth::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let epochs_per_class = args.first().copied().unwrap_or(100);
    let seeds = args.get(1).copied().unwrap_or(5);

    let start = Instant::now();
    let toy = make_toy_dataset(epochs_per_class, 0.3, 0)?;
    let dataset = label_dataset(&toy.eeg, &toy.emg, TOY_EPOCH_SECONDS, "toy-1", &LabelingConfig::default())?;
    let config = ExperimentConfig {
        forecasters: vec![ForecasterChoice::new(Architecture::LinearDms), ForecasterChoice::new(Architecture::Mlp)],
        windows: vec![50, 100],
        seeds,
        ..ExperimentConfig::default()
    };
    let result = run_experiment_grid(&dataset, &config)?;
    print!("{}", result.aggregate_csv(&Condition::ALL));
    for f in &result.failures {
        eprintln!("failed: {f:?}");
    }
    eprintln!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
