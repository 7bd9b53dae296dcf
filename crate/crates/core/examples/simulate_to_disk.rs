//! Writes each simulated scenario to disk in the layout the `boat` binary
//! reads, then reloads one of them.
//!
//!     cargo run --example simulate_to_disk -- /tmp/boat-sim

use std::path::PathBuf;

use boat::bdid::{read_panel_csv, PanelColumns};
use boat::simulator::{simulate, Scenario, ScenarioSpec};

fn main() -> boat::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("boat-sim"));
    let specs = [
        ("psm", Scenario::ConfoundedPsm, -0.3),
        ("did", Scenario::SeasonalDid, -0.3),
        ("rdd", Scenario::CutoffRdd, -1.2),
    ];
    for (name, scenario, ate) in specs {
        let spec = ScenarioSpec::new(scenario, 200, 100, ate, 0);
        let dir = root.join(name);
        for f in simulate(&spec)?.write_to(&dir)? {
            println!("wrote {}", f.display());
        }
    }
    let back = read_panel_csv(root.join("did/data.csv"), &PanelColumns::default())?;
    println!("reloaded panel: {} units, cell-mean effect {:+.3}", back.panel.len(), back.panel.cell_means().ate());
    Ok(())
}
