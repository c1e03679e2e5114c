//! Prints the message timeline of the first combination rounds under a
//! uniform network delay.

use proactive_anc::combiner::fit_compensation;
use proactive_anc::dsp::NoiseSource;
use proactive_anc::netsim::{NetConfig, PcDmcanc, PcDmcancConfig, RoundTrigger};
use proactive_anc::node::NodeConfig;
use proactive_anc::plant::synth_paths;
use proactive_anc::sim::simulate;

fn main() -> proactive_anc::Result<()> {
    let rate = 16000.0;
    let paths = synth_paths(3, 64, 32, 7, 0.3)?;
    let reference = NoiseSource::band_limited(200.0, 900.0, rate, 8)?.generate(16000)?;
    let cfg = PcDmcancConfig {
        node: NodeConfig {
            taps: 64,
            mu: 2e-4,
            frame_len: 1600,
            hysteresis_db: 0.0,
        },
        net: NetConfig::uniform_seconds(3, 0.05, rate)?,
        trigger: RoundTrigger::Rnl,
    };
    let mut ctrl = PcDmcanc::new(&cfg, &paths, fit_compensation(&paths, 32, 1e-9)?)?;
    let trace = simulate(&mut ctrl, &paths, &reference, rate, None)?;

    for round in trace.log.rounds.iter().take(2) {
        println!(
            "epoch {} triggered by node {} at tick {} (joined by {:?})",
            round.epoch, round.trigger, round.start_tick, round.coalesced
        );
        for e in trace.log.events.iter().filter(|e| e.epoch == round.epoch) {
            let to = e.to.map_or("all".to_string(), |t| t.to_string());
            println!("  {:>6}  {:<18} {} -> {}", e.tick, e.kind.as_str(), e.from, to);
        }
    }
    println!("{} rounds in {} samples", trace.log.rounds.len(), trace.ticks());
    Ok(())
}
