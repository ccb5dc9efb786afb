//! Simulates a day of person counts with a quiet spell, streams it through
//! the detector in monitor mode and summarizes the statistic before and
//! during the event.

use beliefsum::config::ModelConfigFile;
use beliefsum::simulator::{sample_day, trial_rng, DayProfile, EventWindow};
use beliefsum::Detector;

fn main() -> beliefsum::Result<()> {
    let det_cfg = ModelConfigFile::person_counts().detector()?;
    let (start, end) = (1200, 1500);
    let profile = DayProfile {
        slots: 2000,
        event: Some(EventWindow { start, end, state: 0 }),
    };
    let day = sample_day(&det_cfg.ladder, &det_cfg.model, &profile, &mut trial_rng(7, 0))?;

    let threshold = det_cfg.threshold;
    let mut detector = Detector::new(det_cfg)?;
    let stats: Vec<f64> = day
        .counts
        .iter()
        .map(|&y| detector.observe(y).map(|r| r.statistic))
        .collect::<beliefsum::Result<_>>()?;

    let above = stats[..start].iter().filter(|&&s| s > threshold).count();
    println!("pre-event slots above {threshold}: {above}/{start}");
    let first = stats[start..].iter().position(|&s| s > threshold);
    match first {
        Some(k) => println!("first crossing after the event starts: slot {}", start + k),
        None => println!("no crossing after the event starts"),
    }
    let held = stats[start..end].iter().filter(|&&s| s > threshold).count();
    println!("event slots above threshold: {held}/{}", end - start);
    println!("earliest alarm latched in monitor mode: {:?}", detector.state().alarm_step);
    Ok(())
}
