//! The five scenarios. Each writes its tables into the output directory and
//! returns a JSON summary.

use rayon::prelude::*;
use serde_json::{json, Value};
use srmetro::metrology::{
    allan_deviation, fit_lorentzian, lorentzian_fit, photocurrent, power_spectrum, run_cycles,
    CycleConfig, CycleSet, PowerSpectrum,
};
use srmetro::observables::{observe, pulse_shape, ObservableRecord};
use srmetro::oracle::{compare_from_ground, default_cutoff};
use srmetro::sde::{run_ensemble, run_stream, run_trajectory, RunConfig, TrajectoryRecord};
use srmetro::{Moment, SystemParams};

use crate::config::{Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::output::{OutputDir, Table};

/// Share of the peak photon number that marks the end of a pulse.
pub const TAIL_FRACTION: f64 = 0.01;

pub fn run_scenario(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    match cfg.scenario()? {
        Scenario::PulseScan => pulse_scan(cfg, out),
        Scenario::Heterodyne => heterodyne(cfg, out),
        Scenario::Coherent => coherent(cfg, out),
        Scenario::Metrology => metrology(cfg, out),
        Scenario::OracleCheck => oracle_check(cfg, out),
    }
}

fn no_sweep(cfg: &ScenarioConfig) -> Result<SystemParams, CliError> {
    if cfg.sweep.is_some() {
        return Err(CliError::Config(format!(
            "scenario {} does not take a sweep",
            cfg.scenario()?.name()
        )));
    }
    cfg.params()
}

fn run_config(cfg: &ScenarioConfig) -> RunConfig {
    RunConfig::new(cfg.t_end(), cfg.dt()).with_stride(cfg.stride)
}

fn unconditioned(p: &SystemParams) -> SystemParams {
    SystemParams {
        detection_efficiency: 0.0,
        ..p.clone()
    }
}

fn nan_or(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

fn observable_table(rec: &TrajectoryRecord) -> Table {
    let mut t = Table::new(&[
        "time", "photons", "j_bar", "m_bar", "a_x", "a_y", "a_z", "re_a", "im_a", "flagged",
    ]);
    for (o, s) in observe(&rec.times, &rec.states, rec.params.n_atoms)
        .iter()
        .zip(&rec.states)
    {
        t.push(vec![
            o.time,
            o.photon_number,
            o.j_bar,
            o.m_bar,
            o.spin[0],
            o.spin[1],
            o.spin[2],
            s.a.re,
            s.a.im,
            if o.flagged { 1.0 } else { 0.0 },
        ]);
    }
    t
}

fn pulse_summary(rec: &TrajectoryRecord) -> Value {
    let obs = observe(&rec.times, &rec.states, rec.params.n_atoms);
    let photons: Vec<f64> = obs.iter().map(|o| o.photon_number).collect();
    let shape = pulse_shape(&rec.times, &photons, TAIL_FRACTION);
    let tail = shape.and_then(|s| s.tail_index).map(|i| obs[i]);
    json!({
        "n_atoms": rec.params.n_atoms,
        "peak_time": shape.map(|s| s.peak_time),
        "peak_photons": shape.map(|s| s.peak_photons),
        "fwhm": shape.and_then(|s| s.fwhm),
        "tail_time": tail.map(|o| o.time),
        "a_z_after_pulse": tail.map(|o| o.spin[2]),
        "a_z_after_pulse_per_atom": tail.map(|o| o.spin_per_atom[2]),
        "closure_flags": obs.iter().filter(|o| o.flagged).count(),
        "positivity_violations": rec.positivity.violations,
    })
}

fn pulse_scan(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let sets = cfg.sweep_params()?;
    let run = run_config(cfg);
    let records = sets
        .par_iter()
        .map(|(_, p)| run_trajectory(&unconditioned(p), &run, cfg.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut summary = Table::new(&[
        "value",
        "n_atoms",
        "peak_time",
        "peak_photons",
        "fwhm",
        "a_z_after_pulse",
        "a_z_after_pulse_per_atom",
    ]);
    let mut rows = Vec::new();
    for (k, ((value, _), rec)) in sets.iter().zip(&records).enumerate() {
        out.table(&format!("pulse_{k:02}.csv"), &observable_table(rec))?;
        let s = pulse_summary(rec);
        let f = |key: &str| s[key].as_f64().unwrap_or(f64::NAN);
        summary.push(vec![
            nan_or(*value),
            rec.params.n_atoms as f64,
            f("peak_time"),
            f("peak_photons"),
            f("fwhm"),
            f("a_z_after_pulse"),
            f("a_z_after_pulse_per_atom"),
        ]);
        rows.push(json!({ "value": value, "file": format!("pulse_{k:02}.csv"), "pulse": s }));
    }
    out.table("pulse_summary.csv", &summary)?;
    Ok(json!({
        "sweep": cfg.sweep.as_ref().map(|s| &s.field),
        "tail_fraction": TAIL_FRACTION,
        "pulses": rows,
    }))
}

/// Share of points where `mean` lies within `k` standard errors of `target`.
/// Points with zero spread count when the values coincide to rounding.
fn within(mean: &[f64], se: &[f64], target: &[f64], k: f64) -> f64 {
    let hits = mean
        .iter()
        .zip(se)
        .zip(target)
        .filter(|((m, s), t)| {
            let d = (*m - *t).abs();
            d <= k * *s || d <= 1e-9 * (m.abs() + t.abs() + 1e-300)
        })
        .count();
    hits as f64 / mean.len().max(1) as f64
}

fn heterodyne(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let p = no_sweep(cfg)?;
    let run = run_config(cfg);
    let ens = run_ensemble(&p, &run, cfg.trajectories, cfg.seed)?;
    let stats = ens
        .stats
        .as_ref()
        .ok_or_else(|| CliError::Core(ens.failures[0].1.clone()))?;
    let reference = run_trajectory(&unconditioned(&p), &run, cfg.seed)?;
    let n = p.n();
    let mut t = Table::new(&[
        "time",
        "photons_mean",
        "photons_se",
        "photons_ref",
        "a_z_mean",
        "a_z_se",
        "a_z_ref",
        "re_ad_mean",
        "re_ad_se",
        "im_ad_mean",
        "im_ad_se",
    ]);
    let len = stats.times.len().min(reference.states.len());
    for k in 0..len {
        let (m, s, r) = (&stats.mean[k], &stats.std_err[k], &reference.states[k]);
        t.push(vec![
            stats.times[k],
            m.ada.re,
            s.ada.re,
            r.ada.re,
            n * (m.s22.re - 0.5),
            n * s.s22.re,
            n * (r.s22.re - 0.5),
            m.a.re,
            s.a.re,
            -m.a.im,
            s.a.im,
        ]);
    }
    out.table("ensemble.csv", &t)?;
    out.table("reference.csv", &observable_table(&reference))?;
    for rec in ens.records.iter().take(cfg.keep_trajectories) {
        out.table(
            &format!("trajectory_{:04}.csv", rec.stream),
            &observable_table(rec),
        )?;
    }
    let col = |name: &str| t.column(name).unwrap_or_default();
    let zeros = vec![0.0; len];
    Ok(json!({
        "trajectories": cfg.trajectories,
        "succeeded": ens.successes(),
        "failed": ens.failures.iter().map(|(i, e)| json!({"index": i, "error": e.to_string()})).collect::<Vec<_>>(),
        "within_3se": {
            "photons": within(&col("photons_mean"), &col("photons_se"), &col("photons_ref"), 3.0),
            "a_z": within(&col("a_z_mean"), &col("a_z_se"), &col("a_z_ref"), 3.0),
            "re_ad_vs_zero": within(&col("re_ad_mean"), &col("re_ad_se"), &zeros, 3.0),
            "im_ad_vs_zero": within(&col("im_ad_mean"), &col("im_ad_se"), &zeros, 3.0),
        },
        "reference": pulse_summary(&reference),
    }))
}

fn cycle_config(cfg: &ScenarioConfig, span: f64) -> CycleConfig {
    CycleConfig {
        span,
        dt: cfg.dt(),
        window: cfg.window,
        fit: cfg.fit,
        noiseless: false,
    }
}

fn fit_table(set: &CycleSet) -> Table {
    let mut t = Table::new(&[
        "cycle",
        "accepted",
        "y",
        "center_hz",
        "hwhm_hz",
        "amplitude",
        "offset",
        "snr",
        "iterations",
    ]);
    for (i, o) in set.outcomes.iter().enumerate() {
        match o.fit() {
            Some(f) => t.push(vec![
                i as f64,
                1.0,
                o.sample().unwrap_or(f64::NAN),
                f.fit.line.center,
                f.fit.line.hwhm,
                f.fit.line.amplitude,
                f.fit.line.offset,
                f.snr,
                f.fit.iterations as f64,
            ]),
            None => {
                let mut row = vec![f64::NAN; 9];
                row[0] = i as f64;
                row[1] = 0.0;
                t.push(row);
            }
        }
    }
    t
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn set_summary(set: &CycleSet) -> Value {
    let fits = set.fits();
    let y = set.samples();
    let (y_mean, y_sd) = mean_sd(&y);
    let (f0, _) = mean_sd(&fits.iter().map(|f| f.fit.line.center).collect::<Vec<_>>());
    let (fwhm, fwhm_sd) = mean_sd(
        &fits
            .iter()
            .map(|f| 2.0 * f.fit.line.hwhm)
            .collect::<Vec<_>>(),
    );
    let (snr, _) = mean_sd(&fits.iter().map(|f| f.snr).collect::<Vec<_>>());
    json!({
        "cycles": set.outcomes.len(),
        "accepted": y.len(),
        "rejection_rate": set.rejection_rate(),
        "y_mean": y_mean,
        "y_sd": y_sd,
        "y_standard_error": y_sd / (y.len() as f64).sqrt(),
        "center_hz_mean": f0,
        "fwhm_hz_mean": fwhm,
        "fwhm_hz_sd": fwhm_sd,
        "snr_mean": snr,
    })
}

fn check_rejections(cfg: &ScenarioConfig, set: &CycleSet) -> Result<(), CliError> {
    let share = set.rejection_rate();
    if share > cfg.max_rejection {
        return Err(CliError::TooManyRejections {
            share: 100.0 * share,
            limit: 100.0 * cfg.max_rejection,
        });
    }
    Ok(())
}

fn spectrum_table(spec: &PowerSpectrum, model: impl Fn(f64) -> f64) -> Table {
    let mut t = Table::new(&["freq_hz", "power", "fit"]);
    for (&f, &p) in spec.freqs.iter().zip(&spec.power) {
        t.push(vec![f, p, model(f)]);
    }
    t
}

fn coherent(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let p = no_sweep(cfg)?;
    let rec = run_trajectory(&unconditioned(&p), &run_config(cfg), cfg.seed)?;
    out.table("observables.csv", &observable_table(&rec))?;
    let obs = observe(&rec.times, &rec.states, p.n_atoms);
    let during: Vec<&ObservableRecord> = obs
        .iter()
        .filter(|o| o.time > 0.0 && o.time <= p.drive_duration)
        .collect();
    let max =
        |f: &dyn Fn(&ObservableRecord) -> f64| during.iter().map(|o| f(o)).fold(0.0, f64::max);
    let set = run_cycles(&p, &cycle_config(cfg, cfg.span), cfg.cycles, cfg.seed)?;
    out.table("fits.csv", &fit_table(&set))?;
    check_rejections(cfg, &set)?;
    Ok(json!({
        "spin_length_over_half_n_max": max(&|o| o.spin_length() / (0.5 * p.n())),
        "spin_length_over_half_n_min": during.iter().map(|o| o.spin_length() / (0.5 * p.n())).fold(f64::INFINITY, f64::min),
        "a_x_abs_max": max(&|o| o.spin[0].abs()),
        "a_y_abs_max": max(&|o| o.spin[1].abs()),
        "pulse": pulse_summary(&rec),
        "cycles": set_summary(&set),
    }))
}

fn metrology(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    if let Some(line) = cfg.synthetic {
        let truth = srmetro::metrology::Lorentzian {
            center: line.center_hz,
            hwhm: line.hwhm_hz,
            amplitude: line.amplitude,
            offset: line.offset,
        };
        let spec = PowerSpectrum::from_fn(line.bin_hz, line.bins, |f| truth.eval(f));
        let fit = fit_lorentzian(&spec, &cfg.fit)?;
        out.table("spectrum.csv", &spectrum_table(&spec, |f| fit.line.eval(f)))?;
        out.json("synthetic_fit.json", &fit)?;
        return Ok(json!({ "truth": truth, "fit": fit }));
    }
    let p = no_sweep(cfg)?;
    let main = cycle_config(cfg, cfg.span);
    let set = run_cycles(&p, &main, cfg.cycles, cfg.seed)?;
    out.table("fits.csv", &fit_table(&set))?;
    check_rejections(cfg, &set)?;

    let first = run_stream(
        &p,
        &RunConfig::new(cfg.span, cfg.dt()).with_stride(usize::MAX),
        cfg.seed,
        0,
    )?;
    let spec = power_spectrum(&photocurrent(&first)?, cfg.span, &cfg.window)?;
    let fit = lorentzian_fit(&spec, &p, &cfg.fit).ok();
    out.table(
        "spectrum.csv",
        &spectrum_table(&spec, |f| fit.map_or(f64::NAN, |s| s.fit.line.eval(f))),
    )?;

    let mut scan = Table::new(&[
        "span",
        "cycles",
        "accepted",
        "snr_mean",
        "fwhm_hz_mean",
        "y_mean",
        "y_sd",
    ]);
    let mut scan_rows = Vec::new();
    for (j, &span) in cfg.spans.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(j as u64 + 1);
        let s = run_cycles(&p, &cycle_config(cfg, span), cfg.span_cycles, seed)?;
        let v = set_summary(&s);
        let f = |k: &str| v[k].as_f64().unwrap_or(f64::NAN);
        scan.push(vec![
            span,
            cfg.span_cycles as f64,
            f("accepted"),
            f("snr_mean"),
            f("fwhm_hz_mean"),
            f("y_mean"),
            f("y_sd"),
        ]);
        scan_rows.push(json!({ "span": span, "stats": v }));
    }
    out.table("span_scan.csv", &scan)?;

    let y = set.samples();
    let mut allan = Table::new(&["cycle_time", "m", "tau", "sigma", "pairs"]);
    let mut laws = Vec::new();
    for &tc in &cfg.cycle_times {
        let a = allan_deviation(&y, tc, cfg.max_m)?;
        for k in 0..a.m.len() {
            allan.push(vec![
                tc,
                a.m[k] as f64,
                a.taus[k],
                a.sigma[k],
                a.pairs[k] as f64,
            ]);
        }
        let law = a.power_law(f64::NEG_INFINITY, f64::INFINITY);
        laws.push(json!({ "cycle_time": tc, "power_law": law }));
    }
    out.table("allan.csv", &allan)?;

    Ok(json!({
        "span": cfg.span,
        "cycles": set_summary(&set),
        "span_scan": scan_rows,
        "allan": laws,
    }))
}

fn oracle_check(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let base = no_sweep(cfg)?;
    let o = &cfg.oracle;
    let mut results = Vec::new();
    for &n in &o.n_atoms {
        let p = SystemParams {
            n_atoms: n as u64,
            detection_efficiency: 0.0,
            ..base.clone()
        };
        let n_max = o.n_max.unwrap_or(default_cutoff(n));
        let cmp = compare_from_ground(&p, n_max, o.t_end, o.dt, o.stride)?;
        let mut headers = vec![
            "time".to_string(),
            "third_relative".into(),
            "trace".into(),
            "purity".into(),
        ];
        for m in Moment::ALL {
            for part in ["exact_re", "exact_im", "model_re", "model_im"] {
                headers.push(format!("{}_{part}", m.name()));
            }
        }
        let mut t = Table {
            headers,
            rows: Vec::new(),
        };
        for (k, s) in cmp.run.samples.iter().enumerate().take(cmp.times.len()) {
            let mut row = vec![cmp.times[k], cmp.third_relative[k], s.trace, s.purity];
            for m in Moment::ALL {
                let (e, c) = (cmp.exact[k].get(m), cmp.model[k].get(m));
                row.extend([e.re, e.im, c.re, c.im]);
            }
            t.push(row);
        }
        out.table(&format!("oracle_n{n}.csv"), &t)?;
        let gated = cmp.deviation(cmp.gated_len(o.gate));
        let full = cmp.deviation(cmp.times.len());
        results.push(json!({
            "n_atoms": n,
            "n_max": n_max,
            "rk4_dt": cmp.run.dt,
            "max_trace_drift": cmp.run.max_trace_drift(),
            "gated": gated,
            "full": full,
        }));
    }
    Ok(json!({ "gate": o.gate, "results": results }))
}
