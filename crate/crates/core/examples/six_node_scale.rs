//! Six nodes with 512-tap controllers and 256-tap secondary paths at the
//! step size 5e-7. Expect several minutes per algorithm in release
//! builds. Pass a duration in seconds to shorten it.

use proactive_anc::harness::{run_scenario, Scenario};

fn main() -> proactive_anc::Result<()> {
    let mut s = Scenario::six_node_broadband();
    if let Some(d) = std::env::args().nth(1) {
        s.duration_s = d.parse().expect("duration in seconds");
    }
    let out = std::path::Path::new("out");
    let result = run_scenario(&s, Some(out))?;
    for x in &result.summaries {
        println!(
            "{:<14} steady-state ANSE {:>7.2} dB, {} rounds",
            x.algorithm.as_str(),
            x.steady_state_anse_db,
            x.comm.rounds
        );
    }
    println!("CSV bundle in {}", out.join(&s.name).display());
    Ok(())
}
