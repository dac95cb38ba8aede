//! Runs an experiment from an inline JSON config and prints the CSV it would write.

use eqmollify::config::{parse_config, ExperimentKind};
use eqmollify::experiment::run_experiment;

fn main() -> eqmollify::Result<()> {
    let config = parse_config(
        r#"{
            "scenario": "orbit_currents",
            "epsilons": [0.1, 0.05],
            "currents": [{
                "label": "wide_orbit",
                "dimension": 2,
                "degree": 0,
                "pieces": [
                    {"kind": "dirac", "point": [0.3, 0.0]},
                    {"kind": "dirac", "point": [0.0, 0.3]},
                    {"kind": "dirac", "point": [-0.3, 0.0]},
                    {"kind": "dirac", "point": [0.0, -0.3]}
                ]
            }]
        }"#,
    )?;
    let report = run_experiment(ExperimentKind::InvarianceCheck, &config)?;
    print!("{}", report.results_csv());
    print!("{}", report.summary_json());
    Ok(())
}
