//! The eigendecomposition projection compared with plain Cesàro averaging
//! and with a burn-in window that is a multiple of the period.
use jdlg::algebra::StateFamily;
use jdlg::config::Tolerances;
use jdlg::corpus;
use jdlg::decomposition::{eigendecompose, jdlg_split, oracle_characters, peripheral_oracle, OracleSchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerances::default();
    let entry = corpus::classical_cycle(4, &[2], 7)?;
    let split = jdlg_split(&entry.channel, &StateFamily::single(entry.state.clone()), &tol)?;
    let data = eigendecompose(&entry.channel, &tol)?;
    let characters = oracle_characters(&data);
    println!("{}: {} peripheral characters", entry.name, characters.len());

    for iterations in [100, 1_000, 10_000] {
        let oracle = peripheral_oracle(&entry.channel, &characters, OracleSchedule::Cesaro { iterations })?;
        println!("Cesàro N = {iterations:>6}: ‖P − oracle‖ = {:.2e}", (split.projection() - oracle).norm());
    }
    for burn_in in [8, 32, 128] {
        let schedule = OracleSchedule::Windowed { burn_in, window: 4 * 16 };
        let oracle = peripheral_oracle(&entry.channel, &characters, schedule)?;
        println!("window after {burn_in:>3} steps: ‖P − oracle‖ = {:.2e}", (split.projection() - oracle).norm());
    }
    Ok(())
}
