//! Solves the stopping problem on a grid for a few cost ratios and prints the
//! size of the stop region and the threshold on `q0 + qN+1`.

use beliefsum::learner::person_count_ladder;
use beliefsum::{
    check_convexity, check_threshold_in_sum, default_transition, value_iterate, CostModel,
    SimplexGrid, SolverOptions,
};

fn main() -> beliefsum::Result<()> {
    let ladder = person_count_ladder();
    let model = default_transition(5, 1.0, 1.0)?;
    let grid = SimplexGrid::new(100)?;
    println!("  c_d  iters  stop pts  convex  threshold");
    for cd in [0.01, 0.05, 0.2, 1.0] {
        let cost = CostModel::new(1.0, cd)?;
        let sol = value_iterate(&grid, &cost, &ladder, &model, &SolverOptions::default())?;
        let convex = check_convexity(&sol.policy, &grid).convex;
        let threshold = check_threshold_in_sum(&sol.policy, &grid).threshold;
        println!(
            "{cd:>5}  {:>5}  {:>8}  {convex:>6}  {}",
            sol.value.iterations,
            sol.policy.stop_count(),
            threshold.map_or("-".into(), |a| format!("{a:.3}"))
        );
    }
    Ok(())
}
