//! Elements of M₂ ⊕ ℂ, a faithful state on it, and the φ-inner product.
use jdlg::algebra::{BlockAlgebra, NormalState, PhiMetric};
use jdlg::linalg::{c64, CMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let algebra = BlockAlgebra::new(vec![2, 1])?;
    println!("blocks {:?}, dimension {}", algebra.block_dims(), algebra.dim());

    let x = algebra.element(vec![
        CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 1.0), c64(0.0, 0.0), c64(2.0, 0.0)]),
        CMatrix::from_element(1, 1, c64(-1.0, 0.0)),
    ])?;
    let xx = x.adjoint().mul(&x)?;
    println!("‖x‖ = {:.4}, min eigenvalue of x*x = {:.4}", x.operator_norm(), xx.min_eigenvalue());

    let state = NormalState::new(
        &algebra,
        vec![
            CMatrix::from_row_slice(2, 2, &[c64(0.5, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.25, 0.0)]),
            CMatrix::from_element(1, 1, c64(0.25, 0.0)),
        ],
    )?;
    println!("faithful: {}", state.is_faithful());
    println!("φ(x) = {:.4}", state.expect(&x)?);
    println!("φ(x*x) = {:.4}", state.expect(&xx)?);

    let metric = PhiMetric::new(&algebra, &state)?;
    println!("‖x‖_φ = {:.4}", metric.norm(&x.coords()));
    Ok(())
}
