//! Kraus, Choi and superoperator views of the same map, plus the checks
//! that separate channels from merely positive maps.
use jdlg::algebra::BlockAlgebra;
use jdlg::channel::{amplitude_damping, transpose_map, ChannelMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let damping = amplitude_damping(0.3)?;
    let choi = damping.to_choi()?;
    let rebuilt = ChannelMap::from_choi(&BlockAlgebra::full_matrix(2)?, choi)?;
    let gap = (damping.superoperator() - rebuilt.superoperator()).norm();
    println!("Kraus -> Choi -> superoperator round trip: {gap:.2e}");
    println!("representation coherence: {:.2e}", damping.representation_coherence());

    let cp = damping.is_completely_positive(1e-10);
    println!("damping CP: {} (min Choi eigenvalue {:.3})", cp.completely_positive, cp.min_choi_eigenvalue);
    println!("damping unitality residual: {:.3}", damping.unitality_residual());

    let transpose = transpose_map(2)?;
    let cp = transpose.is_completely_positive(1e-10);
    println!("transpose CP: {} (min Choi eigenvalue {:.3})", cp.completely_positive, cp.min_choi_eigenvalue);

    match damping.find_invariant_state(1e-8) {
        Ok(s) => println!("invariant state: fixed space {}, faithful {}", s.fixed_space_dim, s.faithful),
        Err(e) => println!("no invariant state: {e}"),
    }
    Ok(())
}
