//! Monte Carlo operating curve: false-alarm fraction and mean delay across
//! thresholds on paths drawn from the model.

use beliefsum::config::ModelConfigFile;
use beliefsum::{evaluate, ScenarioConfig};

fn main() -> beliefsum::Result<()> {
    let det = ModelConfigFile::person_counts().detector()?;
    let scenario = ScenarioConfig::new(det.ladder.clone(), det.model.clone(), 200, 42)?;
    let thresholds: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let report = evaluate(&scenario, &det, 2000, &thresholds)?;

    println!("threshold  false alarms  mean delay  censored");
    for p in &report.operating_points {
        println!(
            "{:>9.1}  {:>12.4}  {:>10}  {:>8}",
            p.threshold,
            p.false_alarm_fraction,
            p.mean_delay.map_or("-".into(), |d| format!("{d:.2}")),
            p.censored
        );
    }
    Ok(())
}
