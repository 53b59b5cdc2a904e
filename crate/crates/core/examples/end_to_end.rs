//! Generates a synthetic dataset, trains on it and prints the evaluation report.
//!
//! Usage: cargo run --release --example end_to_end -- [SEED] [STEPS]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgar_core::synth::{generate_dataset, SynthConfig};
use sgar_core::train::{evaluate, train_with, TrainConfig, TrainState};

fn arg(i: usize) -> Option<u64> {
    std::env::args().nth(i).map(|s| s.parse().expect("numeric argument"))
}

fn main() -> sgar_core::Result<()> {
    let seed = arg(1).unwrap_or(0);
    let cfg = TrainConfig {
        seed,
        steps: arg(2).unwrap_or(TrainConfig::default().steps),
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train_set, eval_set) = generate_dataset(&mut rng, &SynthConfig::default(), 2500, 0.8)?;
    let started = std::time::Instant::now();
    let (state, _) = train_with(&cfg, &train_set, TrainState::initial(&cfg), |r, _| {
        if r.step % 250 == 0 {
            println!("step {:5} loss {:.4}", r.step, r.total);
        }
        Ok(())
    })?;
    println!("trained in {:.1?}", started.elapsed());
    let report = evaluate(&state.params, &eval_set)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}
