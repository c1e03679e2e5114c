use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::baselines::{Centralized, Decentralized, IdealMcgd};
use crate::combiner::{fit_compensation, CompensationSet};
use crate::dsp::{load_wav_channel, FirFilter, NoiseSource};
use crate::error::{AncError, Result};
use crate::metrics::{anse_curve, comm_stats, steady_state_anse, CommStats, RunTrace};
use crate::netsim::{NetConfig, PcDmcanc, PcDmcancConfig};
use crate::node::NodeConfig;
use crate::plant::{load_paths, synth_paths, PathMatrix};
use crate::sim::{simulate, Controller};

use super::output::write_bundle;
use super::scenario::{Algorithm, NoiseSpec, Scenario};

/// Plant, controller-side models and reference signal shared by every
/// algorithm of a scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub paths: PathMatrix,
    /// What the controllers believe the paths are. Equal to `paths` unless
    /// `secondary_model_snr_db` is set.
    pub models: PathMatrix,
    pub compensation: CompensationSet,
    pub reference: Vec<f64>,
}

/// Salt mixed into the path seed for secondary-model perturbation.
const MODEL_NOISE_SALT: u64 = 0x5eed_0f_a7f1;

fn perturb_models(paths: &PathMatrix, snr_db: f64, seed: u64) -> Result<PathMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ MODEL_NOISE_SALT);
    let scale = 10f64.powf(-snr_db / 20.0);
    let secondary = paths
        .secondaries()
        .iter()
        .map(|s| {
            let sigma = scale * s.norm() / (s.len() as f64).sqrt();
            let coeffs = s
                .coeffs()
                .iter()
                .map(|&c| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    c + sigma * n
                })
                .collect();
            FirFilter::new(coeffs)
        })
        .collect::<Result<Vec<_>>>()?;
    PathMatrix::new(paths.primaries().to_vec(), secondary)
}

/// Builds the plant and reference for `s`.
pub fn prepare(s: &Scenario) -> Result<Prepared> {
    s.validate()?;
    let paths = match &s.paths_file {
        Some(file) => {
            let p = load_paths(file)?;
            if p.num_nodes() != s.nodes {
                return Err(AncError::config(format!(
                    "paths_file: bundle has K={}, scenario has K={}",
                    p.num_nodes(),
                    s.nodes
                )));
            }
            p
        }
        None => synth_paths(
            s.nodes,
            s.primary_taps,
            s.secondary_taps,
            s.seeds.paths,
            s.cross_gain,
        )?,
    };
    let models = match s.secondary_model_snr_db {
        Some(snr) => perturb_models(&paths, snr, s.seeds.paths)?,
        None => paths.clone(),
    };
    let compensation = fit_compensation(&models, s.compensation_taps, s.ridge)?;
    let ticks = s.ticks();
    let source = match &s.noise {
        NoiseSpec::Band { f_lo, f_hi } => {
            NoiseSource::band_limited(*f_lo, *f_hi, s.sample_rate, s.seeds.noise)?
        }
        NoiseSpec::White => NoiseSource::white(s.sample_rate, s.seeds.noise),
        NoiseSpec::File { path, channel } => {
            let audio = load_wav_channel(path, *channel)?.expect_rate(s.sample_rate.round() as u32)?;
            NoiseSource::playback(audio.samples, s.sample_rate)
        }
    };
    let reference = source.generate(ticks)?;
    Ok(Prepared {
        paths,
        models,
        compensation,
        reference,
    })
}

fn node_config(s: &Scenario, mu: f64) -> NodeConfig {
    NodeConfig {
        taps: s.taps,
        mu,
        frame_len: s.frame_len(),
        hysteresis_db: s.hysteresis_db,
    }
}

/// Instantiates one algorithm for the scenario with step size `mu`.
pub fn build_controller(
    s: &Scenario,
    alg: Algorithm,
    mu: f64,
    prep: &Prepared,
) -> Result<Box<dyn Controller>> {
    Ok(match alg {
        Algorithm::PcDmcanc => {
            let cfg = PcDmcancConfig {
                node: node_config(s, mu),
                net: NetConfig::uniform(s.nodes, s.delay_samples()),
                trigger: s.communication,
            };
            Box::new(PcDmcanc::new(&cfg, &prep.models, prep.compensation.clone())?)
        }
        Algorithm::Centralized => Box::new(Centralized::new(s.taps, mu, &prep.models)?),
        Algorithm::Decentralized => Box::new(Decentralized::new(&node_config(s, mu), &prep.models)?),
        Algorithm::IdealMcgd => Box::new(IdealMcgd::new(
            s.taps,
            mu,
            &prep.models,
            prep.compensation.clone(),
        )?),
    })
}

/// Samples over which the steady-state ANSE is averaged: the last tenth of
/// the run, and never less than one ANSE window.
pub fn steady_state_tail(s: &Scenario) -> usize {
    (s.ticks() / 10).max(s.anse_window).min(s.ticks())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub mu: f64,
    pub steady_state_anse_db: f64,
    pub final_window_anse_db: f64,
    pub anse: Vec<f64>,
    pub comm: CommStats,
}

/// Output of [`run_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub prepared: Prepared,
    pub traces: Vec<RunTrace>,
    pub summaries: Vec<AlgorithmSummary>,
}

impl ScenarioResult {
    pub fn trace(&self, label: &str) -> Option<&RunTrace> {
        self.traces.iter().find(|t| t.label == label)
    }

    pub fn summary(&self, label: &str) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm.as_str() == label)
    }

    pub fn steady_state_anse(&self, label: &str) -> Option<f64> {
        self.summary(label).map(|s| s.steady_state_anse_db)
    }
}

fn summarize(s: &Scenario, alg: Algorithm, mu: f64, trace: &RunTrace) -> Result<AlgorithmSummary> {
    let anse = anse_curve(trace, s.anse_window)?;
    Ok(AlgorithmSummary {
        algorithm: alg,
        mu,
        steady_state_anse_db: steady_state_anse(trace, steady_state_tail(s))?,
        final_window_anse_db: anse.last().copied().unwrap_or(f64::NAN),
        anse,
        comm: comm_stats(trace),
    })
}

/// Runs one algorithm against an already prepared plant.
pub fn run_algorithm(s: &Scenario, alg: Algorithm, mu: f64, prep: &Prepared) -> Result<RunTrace> {
    let mut ctrl = build_controller(s, alg, mu, prep)?;
    simulate(ctrl.as_mut(), &prep.paths, &prep.reference, s.sample_rate, None)
}

/// Runs every selected algorithm (one thread each) and, when `out` is
/// given, writes the CSV bundle to `out/<scenario-name>/`.
pub fn run_scenario(s: &Scenario, out: Option<&Path>) -> Result<ScenarioResult> {
    if s.ticks() % s.anse_window != 0 {
        return Err(AncError::config(format!(
            "anse_window: {} does not divide the {}-sample run",
            s.anse_window,
            s.ticks()
        )));
    }
    let prep = prepare(s)?;
    let results: Vec<Result<RunTrace>> = std::thread::scope(|scope| {
        let handles: Vec<_> = s
            .algorithms
            .iter()
            .map(|&alg| {
                let prep = &prep;
                scope.spawn(move || run_algorithm(s, alg, s.mu_for(alg), prep))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(AncError::Numerical("simulation thread panicked".into()))))
            .collect()
    });
    let traces = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summaries = s
        .algorithms
        .iter()
        .zip(&traces)
        .map(|(&alg, t)| summarize(s, alg, s.mu_for(alg), t))
        .collect::<Result<Vec<_>>>()?;
    let result = ScenarioResult {
        scenario: s.clone(),
        prepared: prep,
        traces,
        summaries,
    };
    if let Some(root) = out {
        write_bundle(&result, &root.join(&s.name))?;
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub mu: f64,
    pub steady_state_anse_db: f64,
    /// Non-finite output or steady-state ANSE above 0 dB.
    pub diverged: bool,
}

/// `per_decade` log-spaced step sizes from `lo` to `hi` inclusive.
pub fn mu_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| lo * 10f64.powf(i as f64 / per_decade as f64))
        .collect()
}

/// Runs `alg` once per candidate step size (in parallel) and reports the
/// steady-state ANSE of each.
pub fn stability_sweep(s: &Scenario, alg: Algorithm, mus: &[f64]) -> Result<Vec<SweepPoint>> {
    let prep = prepare(s)?;
    let tail = steady_state_tail(s);
    std::thread::scope(|scope| {
        let handles: Vec<_> = mus
            .iter()
            .map(|&mu| {
                let prep = &prep;
                scope.spawn(move || -> Result<SweepPoint> {
                    let trace = run_algorithm(s, alg, mu, prep)?;
                    let anse = steady_state_anse(&trace, tail)?;
                    let finite = trace.errors.iter().flatten().all(|v| v.is_finite());
                    Ok(SweepPoint {
                        mu,
                        steady_state_anse_db: anse,
                        diverged: !finite || !anse.is_finite() || anse > 0.0,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(AncError::Numerical("sweep thread panicked".into()))))
            .collect()
    })
}

/// The swept step size with the lowest steady-state ANSE.
pub fn tune_mu(s: &Scenario, alg: Algorithm, mus: &[f64]) -> Result<SweepPoint> {
    stability_sweep(s, alg, mus)?
        .into_iter()
        .filter(|p| !p.diverged)
        .min_by(|a, b| a.steady_state_anse_db.total_cmp(&b.steady_state_anse_db))
        .ok_or_else(|| AncError::Numerical(format!("every swept step size diverged for {alg}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Scenario {
        Scenario {
            name: "tiny".into(),
            duration_s: 0.5,
            nodes: 2,
            taps: 16,
            secondary_taps: 16,
            primary_taps: 16,
            compensation_taps: 16,
            ..Scenario::desk()
        }
    }

    #[test]
    fn shadow_run_matches_disturbance_without_control() {
        let s = tiny();
        let prep = prepare(&s).unwrap();
        let trace = run_algorithm(&s, Algorithm::Decentralized, 0.0, &prep).unwrap();
        assert_eq!(trace.errors, trace.disturbances);
    }

    #[test]
    fn all_algorithms_run() {
        let r = run_scenario(&tiny(), None).unwrap();
        assert_eq!(r.traces.len(), 4);
        for alg in Algorithm::ALL {
            let summary = r.summary(alg.as_str()).unwrap();
            assert!(summary.steady_state_anse_db.is_finite());
            assert_eq!(summary.anse.len(), 5);
        }
    }

    #[test]
    fn model_snr_perturbs_only_secondary() {
        let s = Scenario {
            secondary_model_snr_db: Some(20.0),
            ..tiny()
        };
        let prep = prepare(&s).unwrap();
        assert_eq!(prep.models.primaries(), prep.paths.primaries());
        let s0 = prep.paths.secondary(0, 0);
        let m0 = prep.models.secondary(0, 0);
        let err: f64 = s0
            .coeffs()
            .iter()
            .zip(m0.coeffs())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let rel_db = 20.0 * (err / s0.norm()).log10();
        assert!((rel_db + 20.0).abs() < 3.0, "{rel_db}");
    }

    #[test]
    fn mu_grid_endpoints() {
        let g = mu_grid(1e-4, 1e-2, 4);
        assert_eq!(g.len(), 9);
        assert!((g[8] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn wrong_anse_window_rejected() {
        let s = Scenario {
            anse_window: 3000,
            ..tiny()
        };
        assert!(run_scenario(&s, None).is_err());
    }
}
