//! End-to-end acceptance checks. Runs sequentially (custom harness) so that
//! wall-clock limits are measured without competing test threads, and prints
//! one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proactive_anc::baselines::CentralizedState;
use proactive_anc::combiner::fit_compensation;
use proactive_anc::dsp::{convolve, fir_convolve_step, DelayLine, FirFilter};
use proactive_anc::harness::{
    build_controller, mu_grid, prepare, run_scenario, tune_mu, Algorithm,
    NoiseSpec, Scenario, ScenarioResult,
};
use proactive_anc::metrics::{anse_curve, comm_stats, RunTrace};
use proactive_anc::netsim::RoundTrigger;
use proactive_anc::node::{NodeConfig, NodeState};
use proactive_anc::plant::{save_paths, synth_paths, PathMatrix, PlantState};
use proactive_anc::sim::{simulate, Controller};

struct Report {
    failures: Vec<u32>,
}

impl Report {
    fn line(&mut self, id: u32, ok: bool, text: String) {
        println!("criterion {id} [{}] {text}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures.push(id);
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn decaying(rng: &mut ChaCha8Rng, len: usize, delay: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            if i < delay {
                0.0
            } else {
                let t = (i - delay) as f64;
                rng.gen_range(-1.0..1.0) * (-t / (len as f64 / 4.0)).exp()
            }
        })
        .collect()
}

/// Single node, white reference, a primary path that is the secondary path
/// filtered by a 33-tap FIR: the 128-tap controller can cancel exactly.
fn criterion_1(report: &mut Report, scratch: &Path) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let s = decaying(&mut rng, 32, 2);
    let g = decaying(&mut rng, 33, 4);
    let p = convolve(&s, &g);
    let paths = PathMatrix::new(
        vec![FirFilter::new(p).unwrap()],
        vec![FirFilter::new(s).unwrap()],
    )
    .unwrap();
    let bundle = scratch.join("single-node-paths.txt");
    save_paths(&paths, &bundle).unwrap();
    let scenario = Scenario {
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
    let best = tune_mu(&scenario, Algorithm::Decentralized, &mu_grid(1e-4, 1e-2, 4)).unwrap();
    let mut tuned = scenario.clone();
    tuned.set_mu(best.mu);
    let result = run_scenario(&tuned, None).unwrap();
    let anse = result.steady_state_anse("decentralized").unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    report.line(
        1,
        anse <= -40.0 && elapsed < 5.0,
        format!(
            "single-node FxLMS: steady-state ANSE {anse:.2} dB (limit -40 dB) at mu={:.3e} after {} s of audio; wall {elapsed:.2} s (limit 5 s)",
            best.mu, scenario.duration_s
        ),
    );
}

fn filter_trajectory(
    ctrl: &mut dyn Controller,
    paths: &PathMatrix,
    reference: &[f64],
) -> Vec<Vec<f64>> {
    let k = ctrl.num_nodes();
    let mut traj = vec![Vec::new(); k];
    let mut obs = |_: u64, c: &dyn Controller| {
        for (i, t) in traj.iter_mut().enumerate() {
            t.extend_from_slice(c.filter(i));
        }
    };
    simulate(ctrl, paths, reference, 16000.0, Some(&mut obs)).unwrap();
    traj
}

fn criterion_2(report: &mut Report) {
    let s = Scenario {
        name: "oracle".into(),
        duration_s: 5000.0 / 16000.0,
        nodes: 3,
        taps: 64,
        secondary_taps: 32,
        primary_taps: 32,
        compensation_taps: 32,
        delay_s: 0.0,
        communication: RoundTrigger::EveryTick,
        anse_window: 1000,
        ..Scenario::desk()
    };
    assert_eq!(s.ticks(), 5000);
    let prep = prepare(&s).unwrap();
    let mu = 5e-4;
    let mut pc = build_controller(&s, Algorithm::PcDmcanc, mu, &prep).unwrap();
    let mut ideal = build_controller(&s, Algorithm::IdealMcgd, mu, &prep).unwrap();
    let a = filter_trajectory(pc.as_mut(), &prep.paths, &prep.reference);
    let b = filter_trajectory(ideal.as_mut(), &prep.paths, &prep.reference);
    let diff = a
        .iter()
        .zip(&b)
        .map(|(x, y)| max_abs_diff(x, y))
        .fold(0.0, f64::max);
    let moved = a.iter().map(|t| t.iter().fold(0.0f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max);
    report.line(
        2,
        diff <= 1e-10 && moved > 0.0,
        format!("forced-round protocol vs per-sample MCGD, K=3 N=64 5000 ticks: max |dw| {diff:.3e} (limit 1e-10), max |w| {moved:.3e}"),
    );
}

fn criteria_3_and_6(report: &mut Report) -> ScenarioResult {
    let s = Scenario::desk();
    let start = Instant::now();
    let result = run_scenario(&s, None).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pc = result.steady_state_anse("pc-dmcanc").unwrap();
    let central = result.steady_state_anse("centralized").unwrap();
    let decentral = result.steady_state_anse("decentralized").unwrap();
    let ideal = result.steady_state_anse("ideal-mcgd").unwrap();
    let near_central = (pc - central).abs() <= 2.0;
    let beats_decentral = pc <= decentral - 3.0;
    report.line(
        3,
        near_central && beats_decentral && elapsed < 60.0,
        format!(
            "desk broadband, cross_gain {}: pc-dmcanc {pc:.2} dB, centralized {central:.2} dB (|diff| {:.2}, limit 2), decentralized {decentral:.2} dB (margin {:.2}, need >= 3), ideal-mcgd {ideal:.2} dB; wall {elapsed:.1} s (limit 60 s)",
            s.cross_gain,
            (pc - central).abs(),
            decentral - pc
        ),
    );

    let trace = result.trace("pc-dmcanc").unwrap();
    let stats = comm_stats(trace);
    let bound = s.nodes as f64 / s.frame_len() as f64;
    report.line(
        6,
        stats.events_per_sample <= bound && stats.reduction_vs_per_sample >= 0.99,
        format!(
            "communication: {} gradient broadcasts in {} rounds, {:.3e} per sample (limit K/frame_len = {bound:.3e}), reduction {:.4}% vs per-sample exchange (limit 99%)",
            stats.events,
            stats.rounds,
            stats.events_per_sample,
            100.0 * stats.reduction_vs_per_sample
        ),
    );
    result
}

fn delayed(delay_s: f64) -> Scenario {
    Scenario {
        name: format!("desk-delay-{delay_s}"),
        delay_s,
        algorithms: vec![Algorithm::PcDmcanc],
        ..Scenario::desk()
    }
}

/// Runs the protocol with a filter observer; returns the trace and, per
/// node, the ticks after which the filter differed from the previous tick.
fn observed_run(s: &Scenario) -> (RunTrace, Vec<Vec<u64>>) {
    let prep = prepare(s).unwrap();
    let mut ctrl = build_controller(s, Algorithm::PcDmcanc, s.mu_for(Algorithm::PcDmcanc), &prep).unwrap();
    let k = s.nodes;
    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; s.taps]; k];
    let mut changes: Vec<Vec<u64>> = vec![Vec::new(); k];
    let mut obs = |tick: u64, c: &dyn Controller| {
        for i in 0..k {
            let w = c.filter(i);
            if w.iter().zip(&prev[i]).any(|(a, b)| a.to_bits() != b.to_bits()) {
                changes[i].push(tick);
                prev[i].copy_from_slice(w);
            }
        }
    };
    let trace = simulate(ctrl.as_mut(), &prep.paths, &prep.reference, s.sample_rate, Some(&mut obs)).unwrap();
    (trace, changes)
}

fn criterion_4(report: &mut Report, s: &Scenario, trace: &RunTrace, changes: &[Vec<u64>]) {
    let window = s.anse_window;
    let anse = anse_curve(trace, window).unwrap();
    // Windows lying entirely inside [snap, apply), compared against the
    // window that holds the snapshot tick.
    let deviation = |snap: u64, apply: u64| -> Option<f64> {
        let reference = anse[snap as usize / window];
        let first = snap as usize / window + 1;
        let end = (apply as usize / window).min(anse.len());
        (first < end).then(|| {
            anse[first..end]
                .iter()
                .map(|v| (v - reference).abs())
                .fold(0.0, f64::max)
        })
    };
    let mut intervals = 0;
    let mut measured = 0;
    let mut worst_db = 0.0f64;
    let mut worst_all_frozen_db = 0.0f64;
    let mut filter_moved = 0;
    for round in &trace.log.rounds {
        let applies: Vec<u64> = round.apply_tick.iter().flatten().copied().collect();
        if applies.len() == s.nodes {
            let last_snap = round.snapshot_tick.iter().flatten().copied().max().unwrap();
            let first_apply = applies.iter().copied().min().unwrap();
            if let Some(d) = deviation(last_snap, first_apply) {
                worst_all_frozen_db = worst_all_frozen_db.max(d);
            }
        }
        for k in 0..s.nodes {
            let (Some(snap), Some(apply)) = (round.snapshot_tick[k], round.apply_tick[k]) else {
                continue;
            };
            intervals += 1;
            if changes[k].iter().any(|&t| t > snap && t < apply) {
                filter_moved += 1;
            }
            if let Some(d) = deviation(snap, apply) {
                measured += 1;
                worst_db = worst_db.max(d);
            }
        }
    }
    report.line(
        4,
        intervals > 0 && measured > 0 && worst_db <= 1.0 && filter_moved == 0,
        format!(
            "frozen intervals under {} s delay: {intervals} node-intervals, {filter_moved} with filter changes (limit 0); worst {window}-sample ANSE deviation from the snapshot window {worst_db:.2} dB over {measured} intervals (limit 1 dB); all-nodes-frozen spans only: {worst_all_frozen_db:.2} dB",
            s.delay_s
        ),
    );
}

fn criterion_5(report: &mut Report, zero_delay: &[f64], half_second: &[f64]) {
    let s3 = delayed(3.0);
    let three = run_scenario(&s3, None).unwrap().summaries[0].anse.clone();
    let base = *zero_delay.last().unwrap();
    let mut ok = true;
    let mut parts = vec![format!("zero-delay final {base:.2} dB")];
    for (label, curve) in [("0.5 s", half_second), ("3 s", &three[..])] {
        let fin = *curve.last().unwrap();
        let peak = curve[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ok &= (fin - base).abs() <= 3.0 && peak <= 0.0;
        parts.push(format!(
            "{label}: final {fin:.2} dB (diff {:.2}, limit 3), max after first frame {peak:.2} dB (limit 0)",
            fin - base
        ));
    }
    report.line(5, ok, format!("delay robustness: {}", parts.join("; ")));
}

fn criterion_7(report: &mut Report) {
    let k = 4;
    let l_s = 64;
    let g_len = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let selfs: Vec<Vec<f64>> = (0..k).map(|_| decaying(&mut rng, l_s - g_len + 1, 1)).collect();
    let mut secondary = Vec::new();
    for row in 0..k {
        for col in 0..k {
            let s = if row == col {
                let mut s = selfs[row].clone();
                s.resize(l_s, 0.0);
                s
            } else {
                let g: Vec<f64> = (0..g_len).map(|_| rng.gen_range(-0.5..0.5)).collect();
                convolve(&selfs[row], &g)
            };
            secondary.push(FirFilter::new(s).unwrap());
        }
    }
    let primary = (0..k).map(|_| FirFilter::new(decaying(&mut rng, 32, 4)).unwrap()).collect();
    let paths = PathMatrix::new(primary, secondary).unwrap();
    let comp = fit_compensation(&paths, l_s, 1e-10).unwrap();
    let worst = comp.max_residual_fit();
    report.line(
        7,
        worst <= 1e-6,
        format!("compensation fit on s_km = s_kk * g, K=4: max residual {worst:.3e} (limit 1e-6)"),
    );
}

fn criterion_8(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let h = FirFilter::new((0..48).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let x: Vec<f64> = (0..2000).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let full = convolve(h.coeffs(), &x);
    let mut line = DelayLine::new(h.len());
    let streamed: Vec<f64> = x
        .iter()
        .map(|&v| {
            line.push(v);
            fir_convolve_step(&h, &line)
        })
        .collect();
    let conv_err = max_abs_diff(&streamed, &full[..x.len()]);

    let paths = synth_paths(1, 32, 16, 3, 0.0).unwrap();
    let taps = 32;
    let mu = 1e-3;
    let mut central = CentralizedState::new(taps, mu, &paths).unwrap();
    let cfg = NodeConfig {
        taps,
        mu,
        frame_len: 100,
        hysteresis_db: 0.0,
    };
    let mut node = NodeState::new(0, &cfg, paths.secondary(0, 0).clone()).unwrap();
    let (mut plant_a, mut plant_b) = (PlantState::new(&paths), PlantState::new(&paths));
    let mut xh = DelayLine::new(taps);
    let (mut ya, mut ea, mut eb) = ([0.0], [0.0], [0.0]);
    let mut k1_err = 0.0f64;
    for _ in 0..3000 {
        let xn: f64 = rng.gen_range(-1.0..1.0);
        xh.push(xn);
        central.control(&xh, &mut ya);
        let yb = node.control_out(&xh);
        plant_a.step(&paths, xn, &ya, &mut ea);
        plant_b.step(&paths, xn, &[yb], &mut eb);
        central.adapt(xn, &ea);
        node.filter_reference(xn);
        node.adapt(eb[0]);
        k1_err = k1_err.max(max_abs_diff(&central.filters()[0], node.filter().coeffs()));
    }

    let paths = synth_paths(3, 24, 16, 9, 0.4).unwrap();
    let n = 500;
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y1: Vec<[f64; 3]> = (0..n).map(|_| [0; 3].map(|_: i32| rng.gen_range(-1.0..1.0))).collect();
    let y2: Vec<[f64; 3]> = (0..n).map(|_| [0; 3].map(|_: i32| rng.gen_range(-1.0..1.0))).collect();
    let run = |ys: &dyn Fn(usize) -> [f64; 3]| -> Vec<[f64; 3]> {
        let mut st = PlantState::new(&paths);
        let mut e = [0.0; 3];
        (0..n)
            .map(|i| {
                st.step(&paths, xs[i], &ys(i), &mut e);
                e
            })
            .collect()
    };
    let d = run(&|_| [0.0; 3]);
    let e1 = run(&|i| y1[i]);
    let e2 = run(&|i| y2[i]);
    let e12 = run(&|i| [y1[i][0] + y2[i][0], y1[i][1] + y2[i][1], y1[i][2] + y2[i][2]]);
    let mut sup_err = 0.0f64;
    for i in 0..n {
        for k in 0..3 {
            let lhs = e12[i][k] - d[i][k];
            let rhs = (e1[i][k] - d[i][k]) + (e2[i][k] - d[i][k]);
            sup_err = sup_err.max((lhs - rhs).abs());
        }
    }

    let mut rnl_node = NodeState::new(
        0,
        &NodeConfig {
            frame_len: 1600,
            ..cfg
        },
        FirFilter::new(vec![1.0]).unwrap(),
    )
    .unwrap();
    let rnl = (0..1600u64).filter_map(|t| rnl_node.rnl_update(0.1, t)).last().unwrap().rnl_db;
    let rnl_err = (rnl + 20.0).abs();

    report.line(
        8,
        conv_err <= 1e-10 && k1_err <= 1e-12 && sup_err <= 1e-10 && rnl_err <= 1e-12,
        format!(
            "kernels: streaming conv {conv_err:.1e} (1e-10), centralized K=1 vs node {k1_err:.1e} (1e-12), superposition {sup_err:.1e} (1e-10), RNL of 0.1 frame {rnl:.15} dB (err {rnl_err:.1e}, 1e-12)"
        ),
    );
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn criterion_9(report: &mut Report, scratch: &Path) {
    let s = Scenario {
        name: "determinism".into(),
        duration_s: 2.0,
        nodes: 3,
        delay_s: 0.05,
        ..Scenario::desk()
    };
    let (a, b) = (scratch.join("run-a"), scratch.join("run-b"));
    run_scenario(&s, Some(&a)).unwrap();
    run_scenario(&s, Some(&b)).unwrap();
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    let csvs = ta.keys().filter(|k| k.ends_with(".csv")).count();
    let differing: Vec<&String> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).collect();
    let events = ta
        .get("determinism/pc-dmcanc/events.csv")
        .map_or(0, |b| b.iter().filter(|&&c| c == b'\n').count().saturating_sub(1));
    report.line(
        9,
        ta.keys().eq(tb.keys()) && differing.is_empty() && csvs >= 28 && events > 0,
        format!(
            "determinism: {} files ({csvs} CSV, {events} protocol events) across two runs, {} differ",
            ta.len(),
            differing.len()
        ),
    );
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let mut report = Report { failures: Vec::new() };
    let start = Instant::now();

    criterion_1(&mut report, scratch.path());
    criterion_2(&mut report);
    let desk = criteria_3_and_6(&mut report);
    let s_half = delayed(0.5);
    let (half_trace, changes) = observed_run(&s_half);
    criterion_4(&mut report, &s_half, &half_trace, &changes);
    let zero = &desk.summary("pc-dmcanc").unwrap().anse;
    let half = anse_curve(&half_trace, s_half.anse_window).unwrap();
    criterion_5(&mut report, zero, &half);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report, scratch.path());

    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if !report.failures.is_empty() {
        println!("failed criteria: {:?}", report.failures);
        std::process::exit(1);
    }
}
