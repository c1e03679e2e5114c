//! The proactive protocol under uniform network delays.
//!
//! ```text
//! cargo run --release --example delay_robustness -- [mu] [hysteresis_db]
//! ```

use proactive_anc::harness::{run_scenario, Algorithm, Scenario};

fn main() -> proactive_anc::Result<()> {
    let mu: Option<f64> = std::env::args().nth(1).map(|m| m.parse().expect("mu"));
    let hyst: Option<f64> = std::env::args().nth(2).map(|h| h.parse().expect("hysteresis_db"));
    for delay_s in [0.0, 0.5, 3.0] {
        let mut s = Scenario::desk();
        s.name = format!("delay-{delay_s}");
        s.algorithms = vec![Algorithm::PcDmcanc];
        s.delay_s = delay_s;
        if let Some(mu) = mu {
            s.set_mu(mu);
        }
        if let Some(h) = hyst {
            s.hysteresis_db = h;
        }
        let r = run_scenario(&s, None)?;
        let x = &r.summaries[0];
        let worst = x.anse[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "delay {delay_s:>4} s: final {:>7.2} dB, steady {:>7.2} dB, worst after first frame {:>6.2} dB, {} rounds",
            x.final_window_anse_db, x.steady_state_anse_db, worst, x.comm.rounds
        );
    }
    Ok(())
}
