//! Perron-Frobenius structure of ergodic channels: the peripheral group, the
//! rotation invariance of the spectrum and the unitary eigenvectors.
use jdlg::config::Tolerances;
use jdlg::corpus;
use jdlg::structure::{perron_frobenius_report, StructureOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerances::default();
    let options = StructureOptions::default();
    let entries = [corpus::classical_cycle(4, &[], 0)?, corpus::clock_shift_mixture(3)?, corpus::dephasing(0.3)?];
    for entry in entries {
        println!("== {}", entry.name);
        let report = match perron_frobenius_report(&entry.channel, &entry.state, &tol, &options) {
            Ok(r) => r,
            Err(e) => {
                println!("refused: {e}");
                continue;
            }
        };
        println!("ergodic {}, fixed space {}, complete {}", report.ergodic, report.fixed_dim, report.complete);
        let values: Vec<String> = report.group.distinct.iter().map(|z| format!("{z:.3}")).collect();
        println!("peripheral values [{}]", values.join(", "));
        println!("group order {:?}, closed under products {}", report.h, report.group.closed);
        let worst = report.rotation.iter().map(|r| r.residual).fold(0.0, f64::max);
        println!("rotation invariance residual {worst:.1e}");
        println!("Choi-Effros associativity {:.1e}", report.choi_effros.associativity);
        println!("unitary eigenvectors {}", report.unitary_eigenvectors.len());
        if let Some(r) = report.eigen_relation_residual {
            println!("T(u x) = α u T(x) residual {r:.1e}");
        }
        for w in &report.warnings {
            println!("warning: {w}");
        }
    }
    Ok(())
}
