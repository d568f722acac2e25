//! Distance between the powers of T and their periodic part, its geometric
//! rate, Cesàro probes and the mean ergodic limit.
use jdlg::algebra::StateFamily;
use jdlg::asymptotics::{convergence_report, default_probes, mean_ergodic_report, periodic_checks, periodic_part};
use jdlg::config::Tolerances;
use jdlg::corpus;
use jdlg::decomposition::jdlg_split;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerances::default();
    let entry = corpus::classical_cycle(3, &[3], 5)?;
    let split = jdlg_split(&entry.channel, &StateFamily::single(entry.state.clone()), &tol)?;
    let periodic = periodic_part(&entry.channel, &split)?;
    let checks = periodic_checks(&entry.channel, &periodic, &split);
    println!("{}: periodic part {:?}", entry.name, checks);

    let report = convergence_report(&entry.channel, &periodic, &split, 64, &default_probes(&split, 4, 1));
    for n in [0, 1, 2, 4, 8, 16, 32, 64] {
        println!("n = {n:>2}  ‖Tⁿ − Sⁿ‖ = {:.3e}", report.distances[n]);
    }
    println!("stable radius {:.4}, fitted rate {:?}", report.stable_radius, report.r_fit);
    for p in &report.probes {
        println!("{:?} probe slope {:?}", p.class, p.slope.map(|s| (s * 1000.0).round() / 1000.0));
    }

    let mean = mean_ergodic_report(&entry.channel, &split, 4, 14);
    let worst = mean.scaled.iter().copied().fold(0.0, f64::max);
    println!("mean ergodic: max N·‖A_N − Q‖ = {worst:.3}, bounded {}", mean.pass);
    Ok(())
}
