//! Multi-objective TPE on two competing quadratics; prints the best trial
//! for each objective.

use commbench::hpo::{run_study, select_best, Dimension, Params, SearchSpace, StudyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = SearchSpace::new(vec![
        Dimension::uniform("x", -5.0, 5.0),
        Dimension::uniform("y", -5.0, 5.0),
        Dimension::categorical("shift", vec![0.into(), 1.into(), 2.into()]),
    ])?;
    let objective = |p: &Params| {
        let x = p["x"].as_f64().ok_or("x")?;
        let y = p["y"].as_f64().ok_or("y")?;
        let shift = p["shift"].as_f64().ok_or("shift")?;
        // maximized: negated distances to (shift, 0) and (0, 2)
        Ok(vec![-((x - shift).powi(2) + y * y), -(x * x + (y - 2.0).powi(2))])
    };
    let config = StudyConfig {
        max_trials: 120,
        ..StudyConfig::default()
    };
    let study = run_study(objective, space, config, 42)?;
    for i in 0..2 {
        let best = select_best(study.history(), i)?;
        let shown: Vec<String> = best.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("objective {i}: {:.4} at trial {} ({})", best.objectives[i], best.index, shown.join(", "));
    }
    Ok(())
}
