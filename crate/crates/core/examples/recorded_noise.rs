//! Drives a scenario from a WAV recording. Without an argument a synthetic
//! two-tone hum is written to a temporary file first.
//!
//! ```text
//! cargo run --release --example recorded_noise -- [file.wav] [channel]
//! ```

use std::path::PathBuf;

use proactive_anc::harness::{run_scenario, Algorithm, NoiseSpec, Scenario};

fn synth_hum() -> PathBuf {
    let path = std::env::temp_dir().join("anc-hum.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&path, spec).expect("create wav");
    for i in 0..32000 {
        let t = i as f64 / 16000.0;
        let v = 0.4 * (2.0 * std::f64::consts::PI * 240.0 * t).sin()
            + 0.2 * (2.0 * std::f64::consts::PI * 480.0 * t).sin();
        w.write_sample((v * 32767.0) as i16).expect("write sample");
    }
    w.finalize().expect("finalize wav");
    path
}

fn main() -> proactive_anc::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(synth_hum);
    let channel = args.next().map(|c| c.parse().expect("channel index"));
    let s = Scenario {
        name: "recorded".into(),
        duration_s: 10.0,
        noise: NoiseSpec::File { path, channel },
        algorithms: vec![Algorithm::PcDmcanc, Algorithm::Decentralized],
        ..Scenario::desk()
    };
    let result = run_scenario(&s, None)?;
    for x in &result.summaries {
        println!("{:<14} steady-state ANSE {:.2} dB", x.algorithm.as_str(), x.steady_state_anse_db);
    }
    Ok(())
}
