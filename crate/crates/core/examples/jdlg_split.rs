//! Splitting the algebra into reversible and stable parts, then checking
//! individual elements against both characterisations.
use jdlg::algebra::StateFamily;
use jdlg::config::Tolerances;
use jdlg::corpus;
use jdlg::decomposition::{isometry_check, jdlg_split, kernel_membership};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerances::default();
    let entry = corpus::flip_pinch()?;
    let family = StateFamily::single(entry.state.clone());
    let split = jdlg_split(&entry.channel, &family, &tol)?;

    println!("{}: dim reversible {}, dim stable {}", entry.name, split.reversible_dim(), split.stable_dim());
    println!("idempotency {:.1e}", split.idempotency_residual());
    println!("self-adjointness {:.1e}", split.symmetry_residual());
    println!("commutation with T {:.1e}", split.commutation_residual(&entry.channel));
    println!("stable radius {:.4}", split.stable_radius());

    for x in split.reversible_elements() {
        let iso = isometry_check(&x, &entry.channel, &family, 1e-8, 16)?;
        println!("reversible element: isometric orbit {} (defect {:.1e})", iso.pass, iso.relative_defect);
    }
    for x in split.stable_elements() {
        let k = kernel_membership(&x, &split, &entry.channel, 1e-8, 64)?;
        println!(
            "stable element: ‖P x‖ = {:.1e}, decay rate {:?}, stable {}",
            k.projection_norm, k.decay_rate, k.stable
        );
    }
    Ok(())
}
