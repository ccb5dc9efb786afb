//! Shows how the weight on the low-rate state trades off catching a drop
//! against catching a surge.

use beliefsum::simulator::{alarm_times, sample_day, trial_rng, DayProfile, EventWindow};
use beliefsum::{DetectorConfig, RateLadder, TransitionModel};

fn main() -> beliefsum::Result<()> {
    let ladder = RateLadder::new(vec![3.0, 10.0, 16.0, 30.0])?;
    let row = vec![0.01, 0.49, 0.49, 0.01];
    let model = TransitionModel::new(vec![row.clone(), row], 1.0, 1.0)?;
    let threshold = 0.3;
    println!("event  alpha  first alarm (event at step 301)");
    for (name, state) in [("drop", 0), ("surge", 3)] {
        let profile = DayProfile {
            slots: 400,
            event: Some(EventWindow { start: 300, end: 400, state }),
        };
        let day = sample_day(&ladder, &model, &profile, &mut trial_rng(11, state as u64))?;
        for alpha in [0.2, 0.5, 0.8] {
            let det = DetectorConfig::new(ladder.clone(), model.clone(), alpha, threshold)?;
            let alarm = alarm_times(&day.counts, &det, &[threshold])?[0];
            println!("{name:>5}  {alpha:>5}  {}", alarm.map_or("none".into(), |k| k.to_string()));
        }
    }
    Ok(())
}
