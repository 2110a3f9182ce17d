//! The runnable scenarios behind each subcommand.

use std::f64::consts::PI;

use super::config::{Orientation, RunConfig, ScenarioName};
use super::csv::Table;
use crate::dynamics::{evolve_adiabatic_exact, evolve_full, preset_d2, preset_mixed_measured, PhaseProgram, Schedule};
use crate::error::{Error, Result};
use crate::holonomy::{cyclic_shift, holonomy, nonabelian_witness, NonAbelianWitness, PhaseLoop};
use crate::qmath::{frobenius_distance, frobenius_distance_phase_min, CMat2, CVec};
use crate::reconstruct::{dark_from_populations, sign_resolve, unitary_from_populations, UnitaryFit};
use crate::thermal::{
    decoherence_time, ensemble_average_checked, envelope, fit_temperature, pinned_populations, synthetic_series,
    FitOptions, Scenario, TemperatureFit,
};
use crate::tripod::{DarkFrame, TripodConfig};
use crate::units;

/// Rendered CSV plus human-readable summary lines.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub csv: String,
    pub summary: Vec<String>,
}

pub fn run(cfg: &RunConfig) -> Result<Output> {
    cfg.validate()?;
    match cfg.scenario {
        ScenarioName::Fig2 => fig2(cfg),
        ScenarioName::Fig3 => fig3(cfg),
        ScenarioName::Fig4 => fig4(cfg),
        ScenarioName::Thermometry => thermometry(cfg),
        ScenarioName::Adiabaticity => adiabaticity(cfg),
        ScenarioName::Loop => loop_report(cfg),
    }
}

fn table(cfg: &RunConfig, columns: &[&str]) -> Table {
    let mut t = Table::new(columns);
    t.comment(format!("tripod {}", cfg.scenario.as_str()));
    t.comment(format!("config_sha256 = {}", cfg.hash()));
    t.comment("units: time us, velocity um/us, frequency kHz, temperature uK, phases rad unless *_over_pi");
    for line in cfg.canonical().lines() {
        t.comment(line);
    }
    t
}

fn time_grid(cfg: &RunConfig) -> Vec<f64> {
    let n = (cfg.t_max_us / cfg.t_step_us + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * cfg.t_step_us).collect()
}

/// Pinned and thermal `P_i(t)` for a `D_2` atom at fixed phases.
pub fn fig2(cfg: &RunConfig) -> Result<Output> {
    let tri = cfg.tripod();
    let times = time_grid(cfg);
    let spec = cfg.thermal();
    let scenario = Scenario::Static { phases: (0.0, 0.0), times: times.clone() };
    let ens = ensemble_average_checked(&tri, &spec, &scenario, &preset_d2())?;
    let pinned = evolve_adiabatic_exact(
        &tri,
        &Schedule::new(times.clone(), PhaseProgram::Static((0.0, 0.0)))?,
        &[0.0; 3],
        &preset_d2(),
    )?;
    let mut t = table(cfg, &["t_us", "P1", "P2", "P3", "P3_minus_P1", "envelope", "P1_th", "P2_th", "P3_th", "P3_minus_P1_th"]);
    for (i, &ti) in times.iter().enumerate() {
        let p = pinned.populations[i];
        let q = ens.populations[i];
        let env = envelope(&tri, spec.thermal_velocity, ti);
        t.row(&[ti, p[0], p[1], p[2], p[2] - p[0], env, q[0], q[1], q[2], q[2] - q[0]]);
    }
    let summary = vec![format!(
        "decoherence time {:.4} us at {:.4} uK",
        decoherence_time(&tri, spec.thermal_velocity),
        cfg.temperature_uk
    )];
    Ok(Output { csv: t.render(), summary })
}

/// One point of the loop-size scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fig3Point {
    pub phi0: f64,
    pub pinned: [f64; 3],
    pub thermal: [f64; 3],
    /// `(|d_1|^2, |d_2|^2)` reconstructed from the thermal populations.
    pub dark_populations: (f64, f64),
    /// Reconstructed azimuth, `NaN` at the poles.
    pub azimuth: f64,
    /// Azimuth of the pinned-atom state.
    pub azimuth_pinned: f64,
    pub purity: f64,
}

pub fn fig3_point(cfg: &RunConfig, tri: &TripodConfig, phi0: f64, d0: &CVec<2>) -> Result<Fig3Point> {
    let lp = cfg.phase_loop(phi0)?;
    let spec = cfg.thermal();
    let ens = ensemble_average_checked(tri, &spec, &Scenario::Loop { path: lp.clone(), samples: 1 }, d0)?;
    let thermal = ens.final_populations();
    let pinned_state = holonomy(&lp, 1)?.mul_vec(d0);
    let pinned = pinned_populations(tri, &lp, d0)?;
    let rec = sign_resolve(&dark_from_populations(thermal)?, &pinned_state);
    let az_pin = if pinned_state[0].norm() < 1e-9 || pinned_state[1].norm() < 1e-9 {
        f64::NAN
    } else {
        (pinned_state[1] * pinned_state[0].conj()).arg()
    };
    Ok(Fig3Point {
        phi0,
        pinned,
        thermal,
        dark_populations: (rec.d1 * rec.d1, rec.d2 * rec.d2),
        azimuth: if rec.is_pole() { f64::NAN } else { rec.phi },
        azimuth_pinned: az_pin,
        purity: ens.final_purity(),
    })
}

/// Final populations against loop size, pinned and thermal.
pub fn fig3(cfg: &RunConfig) -> Result<Output> {
    let tri = cfg.tripod();
    let mut t = table(
        cfg,
        &[
            "phi0_over_pi", "P1_pin", "P2_pin", "P3_pin", "P1_th", "P2_th", "P3_th", "popD1", "popD2", "phi_azim",
            "purity", "phi_azim_pin",
        ],
    );
    let n = cfg.phi0_points - 1;
    for i in 0..=n {
        let f = cfg.phi0_max_over_pi * i as f64 / n as f64;
        let p = fig3_point(cfg, &tri, f * PI, &preset_d2())?;
        t.row(&[
            f,
            p.pinned[0],
            p.pinned[1],
            p.pinned[2],
            p.thermal[0],
            p.thermal[1],
            p.thermal[2],
            p.dark_populations.0,
            p.dark_populations.1,
            p.azimuth,
            p.purity,
            p.azimuth_pinned,
        ]);
    }
    Ok(Output { csv: t.render(), summary: vec![] })
}

/// Pinned and reconstructed thermal holonomies of a loop and its shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fig4Analysis {
    pub pinned: NonAbelianWitness,
    pub thermal: UnitaryFit,
    pub thermal_shifted: UnitaryFit,
    /// `sqrt(2 - |Tr(U^H U')|)` between the reconstructed thermal operators.
    pub thermal_distance: f64,
    pub thermal_distance_phase_min: f64,
}

/// The two input states used for the reconstruction.
pub fn fig4_inputs() -> [CVec<2>; 2] {
    [preset_d2(), preset_mixed_measured()]
}

pub fn fig4_analysis(cfg: &RunConfig, phi0: f64) -> Result<Fig4Analysis> {
    let tri = cfg.tripod();
    let lp = cfg.phase_loop(phi0)?;
    let shifted = cyclic_shift(&lp, 1)?;
    let pinned = nonabelian_witness(&lp, 1)?;
    let spec = cfg.thermal();
    let inputs = fig4_inputs();
    let fit = |path: &PhaseLoop, predicted: &CMat2| -> Result<UnitaryFit> {
        let mut pops = [[0.0; 3]; 2];
        for (p, d0) in pops.iter_mut().zip(&inputs) {
            let ens = ensemble_average_checked(&tri, &spec, &Scenario::Loop { path: path.clone(), samples: 1 }, d0)?;
            *p = ens.final_populations();
        }
        Ok(unitary_from_populations(inputs, pops, predicted)?.0)
    };
    let thermal = fit(&lp, &pinned.u)?;
    let thermal_shifted = fit(&shifted, &pinned.u_shifted)?;
    Ok(Fig4Analysis {
        pinned,
        thermal,
        thermal_shifted,
        thermal_distance: frobenius_distance(&thermal.u, &thermal_shifted.u),
        thermal_distance_phase_min: frobenius_distance_phase_min(&thermal.u, &thermal_shifted.u),
    })
}

fn matrix_rows(t: &mut Table, name: &str, u: &CMat2) {
    for (i, row) in u.m.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            t.labelled_row(&format!("{name}_{}{}_re", i + 1, j + 1), &[z.re]);
            t.labelled_row(&format!("{name}_{}{}_im", i + 1, j + 1), &[z.im]);
        }
    }
}

/// Order dependence of the loop holonomy, pinned and reconstructed.
pub fn fig4(cfg: &RunConfig) -> Result<Output> {
    let a = fig4_analysis(cfg, cfg.phi0_over_pi * PI)?;
    let mut t = table(cfg, &["quantity", "value"]);
    matrix_rows(&mut t, "U_pin", &a.pinned.u);
    matrix_rows(&mut t, "Ushift_pin", &a.pinned.u_shifted);
    matrix_rows(&mut t, "U_th", &a.thermal.u);
    matrix_rows(&mut t, "Ushift_th", &a.thermal_shifted.u);
    let scalars = [
        ("D_pin", a.pinned.distance),
        ("Dtilde_pin", a.pinned.distance_phase_min),
        ("conjugacy_residual_pin", a.pinned.conjugacy_residual),
        ("trace_mismatch_pin", a.pinned.trace_mismatch),
        ("D_th", a.thermal_distance),
        ("Dtilde_th", a.thermal_distance_phase_min),
        ("fit_residual_th", a.thermal.residual),
        ("fit_residual_shift_th", a.thermal_shifted.residual),
        ("distance_to_pinned_th", a.thermal.distance_to_prediction),
        ("distance_to_pinned_shift_th", a.thermal_shifted.distance_to_prediction),
    ];
    for (k, v) in scalars {
        t.labelled_row(k, &[v]);
    }
    let summary = vec![
        format!("pinned D = {:.6}, Dtilde = {:.6}", a.pinned.distance, a.pinned.distance_phase_min),
        format!("thermal D = {:.6}, Dtilde = {:.6}", a.thermal_distance, a.thermal_distance_phase_min),
        format!(
            "U' = V U V^H to {:.2e}; |Tr U| - |Tr U'| = {:.2e}",
            a.pinned.conjugacy_residual, a.pinned.trace_mismatch
        ),
    ];
    Ok(Output { csv: t.render(), summary })
}

/// Noiseless and noisy fits of the same synthetic series.
pub fn thermometry_fits(cfg: &RunConfig) -> Result<[TemperatureFit; 2]> {
    let tri = cfg.tripod();
    let times = time_grid(cfg);
    let opts = FitOptions { nuisance: true, v_max: None };
    let clean = synthetic_series(&tri, tri.thermal_velocity, &times, 0.0, 1, cfg.seed)?;
    let noisy = synthetic_series(&tri, tri.thermal_velocity, &times, cfg.noise, cfg.shots, cfg.seed)?;
    Ok([fit_temperature(&clean, &tri, &opts)?, fit_temperature(&noisy, &tri, &opts)?])
}

/// Temperature recovered from synthetic `P_3 - P_1` data.
pub fn thermometry(cfg: &RunConfig) -> Result<Output> {
    let fits = thermometry_fits(cfg)?;
    let tri = cfg.tripod();
    let mut t = table(
        cfg,
        &["case", "T_true_uK", "T_fit_uK", "vbar_true", "vbar_fit", "rel_error", "residual", "no_decay"],
    );
    let mut summary = vec![];
    for (name, f) in ["noiseless", "noisy"].iter().zip(&fits) {
        let rel = if cfg.temperature_uk > 0.0 { (f.temperature_uk - cfg.temperature_uk) / cfg.temperature_uk } else { f64::NAN };
        t.labelled_row(
            name,
            &[
                cfg.temperature_uk,
                f.temperature_uk,
                tri.thermal_velocity,
                f.thermal_velocity,
                rel,
                f.residual,
                if f.no_decay { 1.0 } else { 0.0 },
            ],
        );
        summary.push(if f.no_decay {
            format!("{name}: no decay resolved (T consistent with 0)")
        } else {
            format!("{name}: T = {:.4} uK", f.temperature_uk)
        });
    }
    Ok(Output { csv: t.render(), summary })
}

/// Full-model vs adiabatic comparison for one loop rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticityPoint {
    /// `sqrt3 Omega / gamma`
    pub ratio: f64,
    pub rabi_khz: f64,
    pub final_discrepancy: f64,
    pub max_discrepancy: f64,
    pub max_leakage: f64,
}

/// Runs a `D_2` atom at rest around the configured loop with
/// `Omega = ratio * gamma / sqrt3`, `gamma = phi0 / segment`.
pub fn adiabaticity_point(cfg: &RunConfig, ratio: f64) -> Result<AdiabaticityPoint> {
    let phi0 = cfg.phi0_over_pi * PI;
    let gamma = phi0 / cfg.segment_us;
    if !(gamma > 0.0) {
        return Err(Error::Config("loop.phi0_over_pi must be positive".into()));
    }
    let omega = ratio * gamma / 3f64.sqrt();
    let mut run = cfg.clone();
    run.rabi_khz = Some(units::rad_per_us_to_khz(omega));
    let tri = run.tripod();
    let lp = run.phase_loop(phi0)?;
    let sched = Schedule::sweep(lp, cfg.steps * 3)?;
    let d0 = preset_d2();
    let frame = DarkFrame::from_relative_phases(tri.steady_rabi(), 0.0, 0.0)?;
    let full = evolve_full(&tri, &sched, &[0.0; 3], &frame.bare_amplitudes(&d0))?;
    let ad = evolve_adiabatic_exact(&tri, &sched, &[0.0; 3], &d0)?;
    let diff = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
    let max_discrepancy = full.populations.iter().zip(&ad.populations).map(|(a, b)| diff(a, b)).fold(0.0, f64::max);
    Ok(AdiabaticityPoint {
        ratio,
        rabi_khz: units::rad_per_us_to_khz(omega),
        final_discrepancy: diff(&full.final_populations(), &ad.final_populations()),
        max_discrepancy,
        max_leakage: full.max_leakage,
    })
}

pub fn adiabaticity(cfg: &RunConfig) -> Result<Output> {
    let mut t = table(cfg, &["ratio", "rabi_kHz", "final_discrepancy", "max_discrepancy", "max_leakage"]);
    let n = cfg.ratio_points - 1;
    for i in 0..=n {
        let ratio = cfg.ratio_min + (cfg.ratio_max - cfg.ratio_min) * i as f64 / n as f64;
        let p = adiabaticity_point(cfg, ratio)?;
        t.row(&[p.ratio, p.rabi_khz, p.final_discrepancy, p.max_discrepancy, p.max_leakage]);
    }
    Ok(Output { csv: t.render(), summary: vec![] })
}

/// Holonomy of an arbitrary polygon and its distance to every cyclic shift.
pub fn loop_report(cfg: &RunConfig) -> Result<Output> {
    let lp = cfg.phase_loop(cfg.phi0_over_pi * PI)?;
    let u = holonomy(&lp, 1)?;
    let mut t = table(cfg, &["quantity", "value"]);
    matrix_rows(&mut t, "U", &u);
    let det = u.det();
    t.labelled_row("det_re", &[det.re]);
    t.labelled_row("det_im", &[det.im]);
    t.labelled_row("abs_trace", &[u.trace().norm()]);
    t.labelled_row("duration_us", &[lp.total_duration()]);
    let mut summary = vec![];
    for k in 1..lp.len() {
        let w = nonabelian_witness(&lp, k)?;
        t.labelled_row(&format!("D_shift{k}"), &[w.distance]);
        t.labelled_row(&format!("Dtilde_shift{k}"), &[w.distance_phase_min]);
        t.labelled_row(&format!("conjugacy_residual_shift{k}"), &[w.conjugacy_residual]);
        summary.push(format!("start vertex {k}: D = {:.6}", w.distance));
    }
    if cfg.orientation == Orientation::Phi2First && cfg.vertices_over_pi.is_none() {
        summary.push("loop traversed phi2 first".into());
    }
    Ok(Output { csv: t.render(), summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(s: ScenarioName) -> RunConfig {
        let mut c = RunConfig::defaults(s);
        c.quadrature_order = 16;
        c.phi0_points = 3;
        c.ratio_points = 2;
        c.t_max_us = 10.0;
        c
    }

    #[test]
    fn every_scenario_runs() {
        for s in [
            ScenarioName::Fig2,
            ScenarioName::Fig3,
            ScenarioName::Fig4,
            ScenarioName::Thermometry,
            ScenarioName::Adiabaticity,
            ScenarioName::Loop,
        ] {
            let out = run(&small(s)).unwrap();
            assert!(out.csv.starts_with(&format!("# tripod {}", s.as_str())));
            assert!(out.csv.lines().filter(|l| !l.starts_with('#')).count() > 1);
        }
    }

    #[test]
    fn output_is_repeatable() {
        let c = small(ScenarioName::Fig3);
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
    }

    #[test]
    fn fig4_pinned_distance() {
        let a = fig4_analysis(&small(ScenarioName::Fig4), PI).unwrap();
        assert!((a.pinned.distance - 1.125).abs() < 1e-9);
        assert!(a.pinned.is_conjugate(1e-12));
    }

    #[test]
    fn zero_temperature_reports_no_decay() {
        let mut c = small(ScenarioName::Thermometry);
        c.temperature_uk = 0.0;
        c.t_max_us = 60.0;
        let fits = thermometry_fits(&c).unwrap();
        assert!(fits[0].no_decay);
    }
}
