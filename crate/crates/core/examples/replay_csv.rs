//! Writes a small per-second count CSV, bins it into six-second steps and
//! replays it through the person-count detector in stop-at-alarm mode.

use std::io::Write;

use beliefsum::config::ModelConfigFile;
use beliefsum::detector::run;
use beliefsum::ingest::ingest;
use beliefsum::report::write_trajectory;
use beliefsum::AlarmMode;

fn main() -> beliefsum::Result<()> {
    let dir = std::env::temp_dir().join("beliefsum-replay");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("people.csv");
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "timestamp,count")?;
    for t in 0..240 {
        // Steady foot traffic for three minutes, then the room empties.
        let count = if t < 180 { 1 + t % 3 } else { 0 };
        writeln!(f, "{},{count}", 1_700_000_000 + t)?;
    }
    drop(f);

    let cfg = ModelConfigFile::person_counts();
    let series = ingest(&path, cfg.binning)?;
    let det = cfg.detector()?.with_mode(AlarmMode::StopAtAlarm);
    let out = run(&series.counts, &det)?;
    println!("{} bins, alarm at {:?}", series.counts.len(), out.alarm_step);
    write_trajectory(std::io::stdout().lock(), &out.records[out.records.len().saturating_sub(5)..])
}
