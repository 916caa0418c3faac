//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any failure.

use std::cell::RefCell;
use std::process::ExitCode;
use std::time::Instant;

use ion_reservoir::collision::{self, StageMap};
use ion_reservoir::fock::{self, DensityMatrix, FockSpace};
use ion_reservoir::lasers::{self, EngineeredChannel, Preset};
use ion_reservoir::metrics::fidelity;
use ion_reservoir::otto::{self, OttoParams};
use ion_reservoir::reset::{self, ElectronicState, ResetParams};
use ion_reservoir::{Stepper, C64};
use ion_reservoir_cli::validate;

const ETA: f64 = 0.05;
const AREA: f64 = 4.5;
const DIM: usize = 40;

type R<T> = Result<T, Box<dyn std::error::Error>>;

/// Worst trace error, hermiticity error and eigenvalue over every stage of
/// every evolution run below.
#[derive(Debug, Clone, Copy)]
struct Worst {
    trace: f64,
    herm: f64,
    min_eig: f64,
    stages: usize,
}

thread_local! {
    static WORST: RefCell<Worst> = const {
        RefCell::new(Worst { trace: 0.0, herm: 0.0, min_eig: f64::INFINITY, stages: 0 })
    };
}

fn record(rho: &DensityMatrix) -> R<()> {
    let d = rho.diagnostics()?;
    WORST.with(|w| {
        let mut w = w.borrow_mut();
        w.trace = w.trace.max(d.trace_error);
        w.herm = w.herm.max(d.hermiticity_error);
        w.min_eig = w.min_eig.min(d.min_eigenvalue);
        w.stages += 1;
    });
    Ok(())
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> R<Outcome> {
    Ok(Outcome { passed, detail })
}

fn space() -> FockSpace {
    FockSpace::new(DIM).unwrap()
}

/// First stage with fidelity to `target` above 0.95, searching up to `max`.
fn n95(
    map: &StageMap,
    rho0: &DensityMatrix,
    target: &DensityMatrix,
    max: usize,
) -> R<Option<usize>> {
    let mut rho = rho0.clone();
    record(&rho)?;
    for k in 0..=max {
        if k > 0 {
            rho = map.apply(&rho)?;
            record(&rho)?;
        }
        if fidelity(&rho, target)? > 0.95 {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

fn show(n: Option<usize>) -> String {
    n.map_or_else(|| "none".into(), |n| n.to_string())
}

fn in_range(n: Option<usize>, lo: usize, hi: usize) -> bool {
    n.is_some_and(|n| (lo..=hi).contains(&n))
}

fn sig3(x: f64) -> String {
    format!("{x:.2e}")
}

fn c1_thresholds() -> R<Outcome> {
    let cases = [
        (0.8, 2.44e-2, -5.24e-1),
        (0.6, 1.18e-1, -1.45),
        (5.0 / 3.0, 6.82e-1, 1.18e-1),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (ratio, hi, lo) in cases {
        let t = otto::chi_thresholds(1.0, ratio);
        let pass = sig3(t.surpass_high) == sig3(hi) && sig3(t.surpass_low) == sig3(lo);
        ok &= pass;
        parts.push(format!(
            "{ratio:.3}: ({}, {})",
            sig3(t.surpass_high),
            sig3(t.surpass_low)
        ));
    }
    outcome(ok, parts.join("; "))
}

fn c2_efficiency_point() -> R<Outcome> {
    let p = OttoParams::new(1.0, 0.8, C64::new(0.0, 0.0), 0.25, C64::new(0.0, 0.4))?;
    let chi = otto::chi_closed_form(&p)?;
    let e = otto::efficiency(&p).value.unwrap_or(f64::NAN);
    let s = FockSpace::new(60)?;
    let (ra, rc) = otto::cycle_states(s, &p)?;
    let num = otto::energetics_numeric(&ra, &rc, &p)?;
    let en = otto::efficiency_from_energetics(&num.cycle)
        .value
        .unwrap_or(f64::NAN);
    outcome(
        (chi - 0.390244).abs() <= 1e-6 && (e - 0.5).abs() <= 1e-9 && (en - 0.5).abs() <= 1e-4,
        format!("chi = {chi:.7}, E = {e:.12}, E(numeric, dim 60) = {en:.8}"),
    )
}

fn thermal_channels(nbar: f64) -> R<Vec<EngineeredChannel>> {
    Ok(lasers::preset_channels(
        space(),
        Preset::ThermalPair { nbar },
        ETA,
        AREA,
    )?)
}

/// `(n̄, N95 from vacuum, N95 from D(0.6i)|0⟩)`.
type ThermalRun = (f64, Option<usize>, Option<usize>);

/// Stage counts from vacuum and from `D(0.6i)|0⟩` for each thermal target.
fn thermal_runs() -> R<Vec<ThermalRun>> {
    let s = space();
    let mut out = Vec::new();
    for nbar in [0.25, 0.5, 1.0] {
        let ch = thermal_channels(nbar)?;
        let map = StageMap::new(s, &ch, Stepper::Semigroup)?;
        let target = fock::thermal_state(s, nbar)?;
        let vac = n95(&map, &fock::vacuum(s), &target, 200)?;
        let coh = n95(
            &map,
            &fock::coherent_state(s, C64::new(0.0, 0.6)),
            &target,
            300,
        )?;
        out.push((nbar, vac, coh));
    }
    Ok(out)
}

fn c3_thermal_vacuum(runs: &[ThermalRun]) -> R<Outcome> {
    let windows = [(5, 20), (12, 35), (25, 60)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (&(nbar, vac, _), &(lo, hi)) in runs.iter().zip(&windows) {
        ok &= in_range(vac, lo, hi);
        parts.push(format!("nbar {nbar}: N95 = {} in [{lo}, {hi}]", show(vac)));
    }
    outcome(ok, parts.join("; "))
}

fn c4_thermal_coherent(runs: &[ThermalRun]) -> R<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(nbar, vac, coh) in runs {
        let later = matches!((vac, coh), (Some(v), Some(c)) if c > v);
        ok &= in_range(coh, 40, 90) && later;
        parts.push(format!(
            "nbar {nbar}: N95 = {} (vacuum start {})",
            show(coh),
            show(vac)
        ));
    }
    outcome(
        ok,
        format!(
            "{} ; window [40, 90], must exceed vacuum start",
            parts.join("; ")
        ),
    )
}

fn c5_speedup() -> R<Outcome> {
    let s = space();
    let preset = Preset::SqueezedCoherent {
        r: 0.11,
        alpha: C64::new(0.0, 0.48),
    };
    let single = lasers::preset_channels(s, preset, ETA, AREA)?;
    let two: Vec<_> = single.iter().chain(&single).cloned().collect();
    let target = preset.target_state(s)?;
    let vac = fock::vacuum(s);
    let n1 = n95(
        &StageMap::new(s, &single, Stepper::Semigroup)?,
        &vac,
        &target,
        200,
    )?;
    let n2 = n95(
        &StageMap::new(s, &two, Stepper::Semigroup)?,
        &vac,
        &target,
        200,
    )?;
    let faster = matches!((n1, n2), (Some(a), Some(b)) if b < a);
    outcome(
        in_range(n2, 12, 32) && in_range(n1, 28, 60) && faster,
        format!(
            "two-bath N95 = {} in [12, 32], single-bath N95 = {} in [28, 60]",
            show(n2),
            show(n1)
        ),
    )
}

fn steady_infidelity(preset: Preset) -> R<f64> {
    let s = space();
    let ch = lasers::preset_channels(s, preset, ETA, AREA)?;
    let ss = collision::steady_state(&collision::liouvillian(&ch)?)?;
    Ok(1.0 - fidelity(&ss.state, &preset.target_state(s)?)?)
}

fn c6_steady_states() -> R<Outcome> {
    let cooling = steady_infidelity(Preset::Cooling)?;
    let squeezing = steady_infidelity(Preset::Squeezed { r: 0.5 })?;
    let thermal = steady_infidelity(Preset::ThermalPair { nbar: 0.25 })?;
    let row3 = steady_infidelity(Preset::SqueezedCoherent {
        r: 0.11,
        alpha: C64::new(0.0, 0.48),
    })?;
    outcome(
        cooling <= 1e-9 && squeezing <= 1e-6 && thermal <= 1e-8 && row3 <= 1e-5,
        format!(
            "1-F: cooling {cooling:.2e} (<= 1e-9), squeezing {squeezing:.2e} (<= 1e-6), \
             thermal {thermal:.2e} (<= 1e-8), squeezed coherent {row3:.2e} (<= 1e-5)"
        ),
    )
}

fn c7_collisional_validity() -> R<Outcome> {
    let (d1, d2) = validate::kraus_vs_exact()?;
    let factor = d1 / d2;
    outcome(
        d1 <= 1e-3 && (5.0..=12.0).contains(&factor),
        format!("distance {d1:.3e} at area 0.1 (<= 1e-3), halving factor {factor:.3} in [5, 12]"),
    )
}

fn c8_reset() -> R<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for ratio in [0.02, 0.05] {
        let p = ResetParams::new(ratio, 1.0)?;
        let tr = reset::reset_step(
            &ElectronicState::level(1)?,
            1,
            &p,
            4.0 / p.gamma_eff(),
            p.default_dt(),
        )?;
        let rate = reset::fit_decay_rate(&tr, 1).unwrap_or(f64::NAN);
        let rel = (rate / p.gamma_eff() - 1.0).abs();

        let mixed = ElectronicState::mixture([0.0, 0.5, 0.5, 0.0])?;
        let t = p.default_step_time();
        let first = reset::reset_step(&mixed, 1, &p, t, p.default_dt())?;
        let drift = first
            .states
            .iter()
            .map(|s| (s.population(2) - 0.5).abs())
            .fold(0.0, f64::max);
        let mut ground = f64::INFINITY;
        for start in [
            ElectronicState::level(1)?,
            ElectronicState::level(2)?,
            mixed,
        ] {
            ground = ground.min(reset::full_reset(&start, &p, None)?.population(0));
        }
        ok &= rel <= 0.05 && ground >= 0.999 && drift < 1e-6;
        parts.push(format!(
            "ratio {ratio}: rate error {:.2}%, rho00 {ground:.6}, rho22 drift {drift:.1e}",
            100.0 * rel
        ));
    }
    outcome(ok, parts.join("; "))
}

fn c9_otto_oracles() -> R<Outcome> {
    let s = FockSpace::new(60)?;
    let (mut diff, mut closure) = (0.0f64, 0.0f64);
    let mut points = 0;
    for nbar in [0.1, 0.25, 0.5] {
        for ai in [0.2, 0.4, 0.6] {
            for zi in [0.0, 0.1, 0.2] {
                let p = OttoParams::new(1.0, 0.8, C64::new(0.0, zi), nbar, C64::new(0.0, ai))?;
                let closed = otto::energetics_closed(&p);
                let (ra, rc) = otto::cycle_states(s, &p)?;
                let num = otto::energetics_numeric(&ra, &rc, &p)?;
                diff = diff.max(num.cycle.max_abs_difference(&closed));
                closure = closure
                    .max(closed.closure().abs())
                    .max(num.cycle.closure().abs());
                points += 1;
            }
        }
    }
    outcome(
        diff <= 1e-6 && closure <= 1e-9,
        format!(
            "{points} points: max difference {diff:.2e} (<= 1e-6), closure {closure:.2e} (<= 1e-9)"
        ),
    )
}

fn c10_invariant_suite() -> R<Outcome> {
    let report = validate::run_suite(None)?;
    let failed: Vec<_> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.clone())
        .collect();
    let w = WORST.with(|w| *w.borrow());
    let runs_ok =
        w.trace <= 1e-9 && w.herm <= fock::HERMITICITY_TOL && w.min_eig >= -fock::POSITIVITY_TOL;
    let pick = |n: &str| {
        report
            .get(n)
            .map(|c| c.measured.clone())
            .unwrap_or_default()
    };
    outcome(
        failed.is_empty() && runs_ok,
        format!(
            "{} stages: trace {:.1e}, hermiticity {:.1e}, min eigenvalue {:.1e}; semigroup {}; FvdG {}; failed checks: [{}]",
            w.stages,
            w.trace,
            w.herm,
            w.min_eig,
            pick("semigroup_residual"),
            pick("fuchs_van_de_graaf"),
            failed.join(", ")
        ),
    )
}

fn report(id: u32, name: &str, res: R<Outcome>, all: &mut bool) {
    let (passed, detail) = match res {
        Ok(o) => (o.passed, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    *all &= passed;
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[{tag}] {id:>2} {name}: {detail}");
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut all = true;
    report(1, "chi thresholds", c1_thresholds(), &mut all);
    report(2, "efficiency point", c2_efficiency_point(), &mut all);
    match thermal_runs() {
        Ok(runs) => {
            report(
                3,
                "thermal synthesis from vacuum",
                c3_thermal_vacuum(&runs),
                &mut all,
            );
            report(
                4,
                "thermal synthesis from coherent",
                c4_thermal_coherent(&runs),
                &mut all,
            );
        }
        Err(e) => {
            let msg = e.to_string();
            report(
                3,
                "thermal synthesis from vacuum",
                Err(msg.clone().into()),
                &mut all,
            );
            report(
                4,
                "thermal synthesis from coherent",
                Err(msg.into()),
                &mut all,
            );
        }
    }
    report(5, "two-bath speed-up", c5_speedup(), &mut all);
    report(6, "steady-state oracles", c6_steady_states(), &mut all);
    report(
        7,
        "collisional expansion validity",
        c7_collisional_validity(),
        &mut all,
    );
    report(8, "electronic reset", c8_reset(), &mut all);
    report(9, "otto oracle equivalence", c9_otto_oracles(), &mut all);
    report(10, "invariant suite", c10_invariant_suite(), &mut all);
    println!("acceptance runtime: {:.1} s", start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
