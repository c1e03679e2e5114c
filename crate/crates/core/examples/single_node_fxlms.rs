//! One node, white reference, and a plant whose primary path is the
//! secondary path followed by a short FIR, so perfect cancellation exists.
//! A step-size sweep picks mu before the final run.

use proactive_anc::dsp::{convolve, FirFilter};
use proactive_anc::harness::{mu_grid, run_scenario, stability_sweep, Algorithm, NoiseSpec, Scenario};
use proactive_anc::plant::{save_paths, PathMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn decaying(rng: &mut ChaCha8Rng, len: usize, delay: usize) -> Vec<f64> {
    (0..len)
        .map(|i| match i.checked_sub(delay) {
            Some(t) => rng.gen_range(-1.0..1.0) * (-(t as f64) / (len as f64 / 4.0)).exp(),
            None => 0.0,
        })
        .collect()
}

fn main() -> proactive_anc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let s = decaying(&mut rng, 32, 2);
    let g = decaying(&mut rng, 33, 4);
    let paths = PathMatrix::new(
        vec![FirFilter::new(convolve(&s, &g))?],
        vec![FirFilter::new(s)?],
    )?;
    let dir = std::env::temp_dir().join("anc-single-node");
    std::fs::create_dir_all(&dir)?;
    let bundle = dir.join("paths.txt");
    save_paths(&paths, &bundle)?;

    let mut scenario = Scenario {
        name: "single-node".into(),
        duration_s: 10.0,
        nodes: 1,
        taps: 128,
        secondary_taps: 32,
        primary_taps: 64,
        compensation_taps: 32,
        noise: NoiseSpec::White,
        algorithms: vec![Algorithm::Decentralized],
        paths_file: Some(bundle),
        ..Scenario::desk()
    };

    let sweep = stability_sweep(&scenario, Algorithm::Decentralized, &mu_grid(1e-4, 1e-1, 3))?;
    for p in &sweep {
        println!(
            "mu {:>9.2e}  steady-state ANSE {:>8.2} dB{}",
            p.mu,
            p.steady_state_anse_db,
            if p.diverged { "  (diverged)" } else { "" }
        );
    }
    let best = sweep
        .iter()
        .filter(|p| !p.diverged)
        .min_by(|a, b| a.steady_state_anse_db.total_cmp(&b.steady_state_anse_db))
        .expect("a stable step size");
    scenario.set_mu(best.mu);

    let result = run_scenario(&scenario, Some(&dir))?;
    let summary = &result.summaries[0];
    println!(
        "mu {:.2e}: ANSE after 1 s {:.1} dB, final {:.1} dB; CSVs in {}",
        best.mu,
        summary.anse[10],
        summary.final_window_anse_db,
        dir.join("single-node").display()
    );
    Ok(())
}
