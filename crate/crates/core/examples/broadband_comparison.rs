//! Desk-scale broadband comparison of the four controllers.
//!
//! ```text
//! cargo run --release --example broadband_comparison -- [mu] [cross_gain] [path_seed]
//! ```

use proactive_anc::harness::{run_scenario, Scenario};

fn main() -> proactive_anc::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut s = Scenario::desk();
    if let Some(mu) = args.next() {
        s.set_mu(mu.parse().expect("mu"));
    }
    if let Some(g) = args.next() {
        s.cross_gain = g.parse().expect("cross_gain");
    }
    if let Some(seed) = args.next() {
        s.seeds.paths = seed.parse().expect("path_seed");
    }
    let t = std::time::Instant::now();
    let result = run_scenario(&s, None)?;
    println!("{} samples in {:.1?}", s.ticks(), t.elapsed());
    for x in &result.summaries {
        let third = x.anse.len() / 3;
        println!(
            "{:<14} steady {:>7.2} dB  at 1/3 {:>7.2} dB  rounds {:>5}  reduction {:.5}",
            x.algorithm.as_str(),
            x.steady_state_anse_db,
            x.anse[third],
            x.comm.rounds,
            x.comm.reduction_vs_per_sample
        );
    }
    Ok(())
}
