//! The induced operator on the GNS space and the contraction hypothesis.
use jdlg::algebra::StateFamily;
use jdlg::config::Tolerances;
use jdlg::corpus;
use jdlg::gns::{compare_peripheral_spectra, gns_matrix, verify_hypothesis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerances::default();
    for entry in [corpus::dephasing(0.4)?, corpus::flip_pinch()?, corpus::clock_shift_mixture(3)?] {
        let op = gns_matrix(&entry.channel, &entry.state, &tol)?;
        let hyp = verify_hypothesis(&entry.channel, &StateFamily::single(entry.state.clone()), &tol);
        let spectra = compare_peripheral_spectra(&entry.channel, &entry.state, &tol, 1e-8)?;
        println!(
            "{:<24} ‖T_φ‖ = {:.6}  hypothesis {}  peripheral spectra agree: {} ({} values)",
            entry.name,
            op.norm(),
            if hyp.pass { "holds" } else { "fails" },
            spectra.coincide,
            spectra.operator.len(),
        );
    }

    // Amplitude damping does not preserve the trace, so the tracial state
    // gives no contraction.
    let algebra = jdlg::algebra::BlockAlgebra::full_matrix(2)?;
    let damping = jdlg::channel::amplitude_damping(0.5)?;
    let trace = jdlg::algebra::NormalState::tracial(&algebra);
    let hyp = verify_hypothesis(&damping, &StateFamily::single(trace), &tol);
    println!("amplitude damping under the trace: norm {:.4}, pass {}", hyp.max_norm(), hyp.pass);
    Ok(())
}
