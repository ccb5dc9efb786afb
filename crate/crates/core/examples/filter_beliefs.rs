//! Runs the full and the two-coordinate filters side by side on a short
//! count sequence and prints both posteriors.

use beliefsum::learner::person_count_ladder;
use beliefsum::{belief_update, default_transition, reduced_update, Belief};

fn main() -> beliefsum::Result<()> {
    let ladder = person_count_ladder();
    let model = default_transition(5, 1.0, 1.0)?;
    let row = model.shared_row().expect("uniform rows").to_vec();

    let mut full = Belief::uniform_normal(5);
    let mut reduced = full.reduced();
    println!("step count  full(q0, qN+1)        reduced(q0, qN+1)");
    for (k, y) in [12u64, 9, 14, 0, 0, 1, 0, 70, 66].into_iter().enumerate() {
        full = belief_update(&full, y, &ladder, &model)?;
        reduced = reduced_update(reduced, y, &ladder, &row, 1.0, 1.0)?;
        println!(
            "{:>4} {:>5}  ({:.4}, {:.4})      ({:.4}, {:.4})",
            k + 1,
            y,
            full.low(),
            full.high(),
            reduced.q_low(),
            reduced.q_high()
        );
    }
    Ok(())
}
