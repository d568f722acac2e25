//! The multiplicative domain of a channel, computed directly and through the
//! quadratic form, compared with the reversible part.
use jdlg::algebra::StateFamily;
use jdlg::config::Tolerances;
use jdlg::corpus;
use jdlg::decomposition::jdlg_split;
use jdlg::structure::multiplicative_domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerances::default();
    for entry in [corpus::dephasing(0.5)?, corpus::flip_pinch()?, corpus::random_unital(3, 11)?] {
        let domain = multiplicative_domain(&entry.channel, &entry.state, &tol, 0)?;
        let split = jdlg_split(&entry.channel, &StateFamily::single(entry.state.clone()), &tol)?;
        println!(
            "{:<28} domain dim {} (quadratic {}), reversible dim {}, gap {:.1e}, Schwarz defect {:.1e}",
            entry.name,
            domain.dim,
            domain.quadratic_dim,
            split.reversible_dim(),
            domain.gap,
            domain.schwarz_defect,
        );
    }
    Ok(())
}
