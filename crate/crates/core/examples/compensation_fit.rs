//! Fits compensation filters for a synthetic plant and shows how well each
//! cross path is explained by its self path.

use proactive_anc::combiner::fit_compensation;
use proactive_anc::plant::synth_paths;

fn main() -> proactive_anc::Result<()> {
    let paths = synth_paths(4, 64, 64, 1, 0.3)?;
    for taps in [16, 64, 128] {
        let comp = fit_compensation(&paths, taps, 1e-9)?;
        println!("L_c = {taps:>3}: worst relative residual {:.3e}", comp.max_residual_fit());
    }

    let comp = fit_compensation(&paths, 64, 1e-9)?;
    println!("\nrelative residual ||s_km - s_kk * c_km|| / ||s_km||, L_c = 64");
    for k in 0..paths.num_nodes() {
        let row: Vec<String> = (0..paths.num_nodes())
            .map(|m| format!("{:>9.2e}", comp.residual_fit(k, m)))
            .collect();
        println!("  mic {k}: {}", row.join(" "));
    }
    Ok(())
}
