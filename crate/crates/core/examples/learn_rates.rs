//! Fits a rate ladder to synthetic counts drawn from three regimes.

use beliefsum::simulator::trial_rng;
use beliefsum::{learn_ladder, LearnerConfig, TrainingSet};
use rand_distr::{Distribution, Poisson};

fn main() -> beliefsum::Result<()> {
    let mut rng = trial_rng(3, 0);
    let mut counts = Vec::new();
    for rate in [4.0, 12.0, 30.0] {
        let d = Poisson::new(rate).unwrap();
        counts.extend((0..500).map(|_| d.sample(&mut rng) as u64));
    }
    let data = TrainingSet::new(counts, "synthetic")?;
    let cfg = LearnerConfig { n_normal: 3, ..LearnerConfig::default() };
    let learned = learn_ladder(&data, &cfg)?;

    println!("data sha256: {}", data.digest());
    println!("k-means converged: {}", learned.fit.converged);
    println!("rates: {:?}", learned.ladder.rates());
    for w in &learned.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
