//! CSV bundle writer and the cross-run comparison table.
//!
//! Layout under `out/<scenario-name>/`:
//!
//! | file | columns |
//! |------|---------|
//! | `anse.csv` | `window_start_tick`, one column per algorithm |
//! | `psd.csv` | `freq_hz`, `control-off`, one column per algorithm |
//! | `comm.csv` | `algorithm,events,events_per_sample,reduction_vs_per_sample,rounds` |
//! | `summary.csv` | `algorithm,mu,steady_state_anse_db,final_window_anse_db` |
//! | `paths.txt` | plant bundle |
//! | `<algorithm>/anse.csv` | `window_start_tick,anse_db` |
//! | `<algorithm>/psd.csv` | `freq_hz,power_db` |
//! | `<algorithm>/comm.csv` | `events,events_per_sample,reduction_vs_per_sample,rounds` |
//! | `<algorithm>/rnl.csv` | `tick,node,rnl_db,mode` |
//! | `<algorithm>/events.csv` | `tick,kind,from,to,epoch` |
//! | `<algorithm>/rounds.csv` | `epoch,trigger,start_tick,end_tick,coalesced` |
//!
//! Floats are written with 9 significant digits.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{AncError, Result};
use crate::metrics::{welch_psd, CommStats, Psd, RunTrace};

use super::runner::ScenarioResult;

/// `%.9g`-style formatting.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-5..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| {
        AncError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Node-averaged spectrum of `signals` over their second half.
pub fn steady_state_psd(signals: &[Vec<f64>], segment: usize, sample_rate: f64) -> Result<Psd> {
    let mut acc: Option<Psd> = None;
    for sig in signals {
        let half = &sig[sig.len() / 2..];
        let psd = welch_psd(half, segment.min(half.len()), 0.5, sample_rate)?;
        acc = Some(match acc {
            None => psd,
            Some(mut a) => {
                for (p, q) in a.power.iter_mut().zip(&psd.power) {
                    *p += q;
                }
                a
            }
        });
    }
    let mut psd = acc.ok_or_else(|| AncError::Metric("no signals to average".into()))?;
    let n = signals.len() as f64;
    for (p, db) in psd.power.iter_mut().zip(psd.power_db.iter_mut()) {
        *p /= n;
        *db = if *p > 0.0 {
            10.0 * p.log10()
        } else {
            crate::metrics::PSD_FLOOR_DB
        };
    }
    Ok(psd)
}

fn comm_row(c: &CommStats) -> String {
    format!(
        "{},{},{},{}",
        c.events,
        fmt_sig(c.events_per_sample),
        fmt_sig(c.reduction_vs_per_sample),
        c.rounds
    )
}

fn algorithm_files(trace: &RunTrace, anse: &[f64], window: usize, psd: &Psd, comm: &CommStats) -> Vec<(&'static str, String)> {
    let mut a = String::from("window_start_tick,anse_db\n");
    for (i, v) in anse.iter().enumerate() {
        let _ = writeln!(a, "{},{}", i * window, fmt_sig(*v));
    }
    let mut p = String::from("freq_hz,power_db\n");
    for (f, db) in psd.iter() {
        let _ = writeln!(p, "{},{}", fmt_sig(f), fmt_sig(db));
    }
    let c = format!(
        "events,events_per_sample,reduction_vs_per_sample,rounds\n{}\n",
        comm_row(comm)
    );
    let mut r = String::from("tick,node,rnl_db,mode\n");
    for rec in &trace.log.rnl {
        let _ = writeln!(r, "{},{},{},{}", rec.tick, rec.node, fmt_sig(rec.rnl_db), rec.mode.as_str());
    }
    let mut ev = String::from("tick,kind,from,to,epoch\n");
    for e in &trace.log.events {
        let to = e.to.map_or_else(|| "all".to_string(), |t| t.to_string());
        let _ = writeln!(ev, "{},{},{},{},{}", e.tick, e.kind.as_str(), e.from, to, e.epoch);
    }
    let mut rounds = String::from("epoch,trigger,start_tick,end_tick,coalesced\n");
    for rd in &trace.log.rounds {
        let end = rd.end_tick.map_or_else(String::new, |t| t.to_string());
        let coalesced: Vec<String> = rd.coalesced.iter().map(usize::to_string).collect();
        let _ = writeln!(
            rounds,
            "{},{},{},{},{}",
            rd.epoch,
            rd.trigger,
            rd.start_tick,
            end,
            coalesced.join(" ")
        );
    }
    vec![
        ("anse.csv", a),
        ("psd.csv", p),
        ("comm.csv", c),
        ("rnl.csv", r),
        ("events.csv", ev),
        ("rounds.csv", rounds),
    ]
}

/// Writes the full CSV bundle for a finished scenario into `dir`.
pub fn write_bundle(result: &ScenarioResult, dir: &Path) -> Result<()> {
    let s = &result.scenario;
    fs::create_dir_all(dir)?;
    let off = steady_state_psd(&result.traces[0].disturbances, s.psd_segment, s.sample_rate)?;
    let mut psds = Vec::new();
    for (trace, summary) in result.traces.iter().zip(&result.summaries) {
        let psd = steady_state_psd(&trace.errors, s.psd_segment, s.sample_rate)?;
        let sub = dir.join(summary.algorithm.as_str());
        fs::create_dir_all(&sub)?;
        for (name, body) in algorithm_files(trace, &summary.anse, s.anse_window, &psd, &summary.comm) {
            write_file(&sub.join(name), &body)?;
        }
        psds.push(psd);
    }

    let names: Vec<&str> = result.summaries.iter().map(|x| x.algorithm.as_str()).collect();
    let mut anse = format!("window_start_tick,{}\n", names.join(","));
    let windows = result.summaries.first().map_or(0, |x| x.anse.len());
    for w in 0..windows {
        let _ = write!(anse, "{}", w * s.anse_window);
        for summary in &result.summaries {
            let _ = write!(anse, ",{}", fmt_sig(summary.anse[w]));
        }
        anse.push('\n');
    }
    write_file(&dir.join("anse.csv"), &anse)?;

    let mut psd = format!("freq_hz,control-off,{}\n", names.join(","));
    for (i, f) in off.freqs.iter().enumerate() {
        let _ = write!(psd, "{},{}", fmt_sig(*f), fmt_sig(off.power_db[i]));
        for p in &psds {
            let _ = write!(psd, ",{}", fmt_sig(p.power_db[i]));
        }
        psd.push('\n');
    }
    write_file(&dir.join("psd.csv"), &psd)?;

    let mut comm = String::from("algorithm,events,events_per_sample,reduction_vs_per_sample,rounds\n");
    let mut summary = String::from("algorithm,mu,steady_state_anse_db,final_window_anse_db\n");
    for x in &result.summaries {
        let _ = writeln!(comm, "{},{}", x.algorithm, comm_row(&x.comm));
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            x.algorithm,
            fmt_sig(x.mu),
            fmt_sig(x.steady_state_anse_db),
            fmt_sig(x.final_window_anse_db)
        );
    }
    write_file(&dir.join("comm.csv"), &comm)?;
    write_file(&dir.join("summary.csv"), &summary)?;
    write_file(&dir.join("paths.txt"), &result.prepared.paths.to_bundle_string())
}

/// Steady-state ANSE per algorithm read back from `summary.csv`.
pub fn read_summary(dir: &Path) -> Result<BTreeMap<String, f64>> {
    let file = dir.join("summary.csv");
    let text = fs::read_to_string(&file).map_err(|e| {
        AncError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", file.display())))
    })?;
    let bad = |line: usize, why: &str| AncError::Metric(format!("{}:{line}: {why}", file.display()));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("algorithm,mu,steady_state_anse_db") => {}
        _ => return Err(bad(1, "unexpected header")),
    }
    let mut out = BTreeMap::new();
    for (i, line) in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 3 {
            return Err(bad(i + 1, "expected at least 3 columns"));
        }
        let v: f64 = cols[2].parse().map_err(|_| bad(i + 1, "steady_state_anse_db is not a number"))?;
        out.insert(cols[0].to_string(), v);
    }
    Ok(out)
}

/// Steady-state ANSE of several output directories side by side, with the
/// difference of each against the first.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub dirs: Vec<PathBuf>,
    /// `(algorithm, value per dir)`.
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

pub fn compare(dirs: &[PathBuf]) -> Result<CompareTable> {
    if dirs.is_empty() {
        return Err(AncError::config("compare: give at least one output directory"));
    }
    let summaries = dirs.iter().map(|d| read_summary(d)).collect::<Result<Vec<_>>>()?;
    let mut algs: Vec<String> = summaries.iter().flat_map(|m| m.keys().cloned()).collect();
    algs.sort();
    algs.dedup();
    let rows = algs
        .into_iter()
        .map(|a| {
            let vals = summaries.iter().map(|m| m.get(&a).copied()).collect();
            (a, vals)
        })
        .collect();
    Ok(CompareTable {
        dirs: dirs.to_vec(),
        rows,
    })
}

impl fmt::Display for CompareTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        write!(f, "{:<16}", "algorithm")?;
        for (i, d) in self.dirs.iter().enumerate() {
            let name = d.file_name().map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned());
            if i == 0 {
                write!(f, " {name:>14}")?;
            } else {
                write!(f, " {name:>14} {:>8}", "diff")?;
            }
        }
        writeln!(f)?;
        for (alg, vals) in &self.rows {
            write!(f, "{alg:<16}")?;
            for (i, v) in vals.iter().enumerate() {
                write!(f, " {:>14}", cell(*v))?;
                if i > 0 {
                    let diff = v.zip(vals[0]).map(|(a, b)| a - b);
                    write!(f, " {:>8}", cell(diff))?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
