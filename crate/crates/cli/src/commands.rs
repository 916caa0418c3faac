//! Subcommand drivers: each writes a CSV table plus a JSON summary.

use ion_reservoir::collision::{self, ideal_channel, StageMap};
use ion_reservoir::fock::{self, DensityMatrix, FockSpace};
use ion_reservoir::lasers::{self, EngineeredChannel, Preset};
use ion_reservoir::metrics::fidelity;
use ion_reservoir::otto::{self, OttoParams};
use ion_reservoir::reset::{self, ElectronicState};
use ion_reservoir::{Error as CoreError, Stepper, C64};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, SweepVariable};
use crate::output::{self, Guard, OutputPaths, ResultRow, RowWriter};
use crate::CliError;

/// Threshold used for the reported `n_95` stage count.
pub const SYNTH_FIDELITY: f64 = 0.95;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub numeric: bool,
    pub synthesize: bool,
}

/// Outcome of one subcommand.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Value,
    /// Checks whose failure makes the run a validation failure.
    pub guards: Vec<Guard>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.guards.iter().all(|g| g.passed)
    }
}

fn finish(
    command: &str,
    cfg: &ExperimentConfig,
    out: &OutputPaths,
    mut body: Value,
    guards: Vec<Guard>,
) -> Result<RunReport, CliError> {
    let passed = guards.iter().all(|g| g.passed);
    let obj = body.as_object_mut().expect("summary body is an object");
    obj.insert("command".into(), json!(command));
    obj.insert("config".into(), serde_json::to_value(cfg)?);
    obj.insert("versions".into(), output::versions());
    obj.insert("output".into(), json!(out.csv.display().to_string()));
    obj.insert("guards".into(), serde_json::to_value(&guards)?);
    obj.insert("passed".into(), json!(passed));
    output::write_summary(&out.summary, &body)?;
    Ok(RunReport {
        summary: body,
        guards,
    })
}

/// Fidelity, or `None` with a row warning when a state is not PSD enough.
fn try_fidelity(
    row: &mut ResultRow,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<Option<f64>, CliError> {
    match fidelity(rho, sigma) {
        Ok(f) => Ok(Some(f)),
        Err(CoreError::NegativeEigenvalue(_)) => {
            if !row.has_warning("fidelity_undefined") {
                row.add_warning("fidelity_undefined");
            }
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Default)]
struct RowStats {
    max_trace_error: f64,
    min_eigenvalue: f64,
    flagged: usize,
    unguarded: usize,
}

impl RowStats {
    fn new() -> Self {
        Self {
            min_eigenvalue: f64::INFINITY,
            ..Default::default()
        }
    }

    fn push(&mut self, row: &ResultRow) {
        self.max_trace_error = self.max_trace_error.max(row.trace_error);
        self.min_eigenvalue = self.min_eigenvalue.min(row.min_eigenvalue);
        if !row.warnings.is_empty() {
            self.flagged += 1;
        }
        if !row.guarded() {
            self.unguarded += 1;
        }
    }

    fn json(&self) -> Value {
        json!({
            "max_trace_error": self.max_trace_error,
            "min_eigenvalue": self.min_eigenvalue,
            "flagged_rows": self.flagged,
        })
    }

    fn guard(&self) -> Guard {
        Guard::new(
            "row_invariants",
            self.unguarded == 0,
            format!(
                "max trace error {:e}, min eigenvalue {:e}",
                self.max_trace_error, self.min_eigenvalue
            ),
        )
    }
}

fn guard_tag(channels: &[EngineeredChannel]) -> bool {
    let over = channels.iter().any(|c| c.exceeds_guard());
    if over {
        warn!(
            "an increment exceeds {}; the collisional expansion is outside its validity range",
            lasers::EPSILON_GUARD
        );
    }
    over
}

/// Target for F∞: the configured target, the preset target of a single
/// preset entry, or the kernel of the Liouvillian.
fn synthesis_target(
    cfg: &ExperimentConfig,
    space: FockSpace,
    channels: &[EngineeredChannel],
) -> Result<(DensityMatrix, &'static str), CliError> {
    if let Some(t) = cfg.target(space)? {
        return Ok((t, "target_state"));
    }
    let l = collision::liouvillian(channels)?;
    let ss = collision::steady_state(&l)?;
    if ss.truncation_dominated {
        warn!(
            "steady state is dominated by the truncation (tail {:e})",
            ss.tail_mass
        );
    }
    Ok((ss.state, "steady_state"))
}

pub fn synth(cfg: &ExperimentConfig, out: &OutputPaths) -> Result<RunReport, CliError> {
    let space = cfg.space()?;
    let channels = cfg.build_channels(space)?;
    let rho0 = cfg.initial(space)?;
    let (target, source) = synthesis_target(cfg, space, &channels)?;
    let over_guard = guard_tag(&channels);
    let map = StageMap::new(space, &channels, cfg.stepper())?;

    let mut writer = RowWriter::create(&out.csv)?;
    let mut stats = RowStats::new();
    let mut n95 = None;
    let mut rho = rho0.clone();
    let mut last = None;
    for k in 0..=cfg.n_stages {
        if k > 0 {
            rho = map.apply(&rho)?;
        }
        let mut row = ResultRow::measure(k, &rho)?;
        if over_guard {
            row.add_warning("epsilon_guard");
        }
        row.fidelity_inf = try_fidelity(&mut row, &rho, &target)?;
        row.fidelity_0 = try_fidelity(&mut row, &rho, &rho0)?;
        if n95.is_none() && row.fidelity_inf.is_some_and(|f| f > SYNTH_FIDELITY) {
            n95 = Some(k);
        }
        stats.push(&row);
        writer.write(&row)?;
        last = Some(row);
    }
    let rows = writer.finish()?;
    let last = last.expect("at least the initial row");
    info!("synth: {rows} rows, n_95 = {n95:?}");
    let body = json!({
        "stepper": cfg.stepper().as_str(),
        "channels": channels.len(),
        "epsilons": channels.iter().map(|c| c.epsilon).collect::<Vec<_>>(),
        "fidelity_reference": source,
        "rows": rows,
        "n_95": n95,
        "final": {
            "fidelity_inf": last.fidelity_inf,
            "fidelity_0": last.fidelity_0,
            "mean_occupation": last.mean_occupation,
        },
        "diagnostics": stats.json(),
    });
    finish("synth", cfg, out, body, vec![stats.guard()])
}

#[derive(Debug, Clone, PartialEq)]
struct ProtectRun {
    rows: Vec<ResultRow>,
    stats_json: Value,
    guard: Guard,
}

fn protect_run(
    rho0: &DensityMatrix,
    channels: &[EngineeredChannel],
    n: usize,
    stepper: Stepper,
) -> Result<ProtectRun, CliError> {
    let map = StageMap::new(rho0.space(), channels, stepper)?;
    let over = guard_tag(channels);
    let mut stats = RowStats::new();
    let mut rows = Vec::with_capacity(n + 1);
    let mut rho = rho0.clone();
    for k in 0..=n {
        if k > 0 {
            rho = map.apply(&rho)?;
        }
        let mut row = ResultRow::measure(k, &rho)?;
        if over {
            row.add_warning("epsilon_guard");
        }
        row.fidelity_0 = try_fidelity(&mut row, &rho, rho0)?;
        stats.push(&row);
        rows.push(row);
    }
    Ok(ProtectRun {
        rows,
        stats_json: stats.json(),
        guard: stats.guard(),
    })
}

fn non_increasing(rows: &[ResultRow]) -> bool {
    rows.windows(2)
        .all(|w| match (w[0].fidelity_0, w[1].fidelity_0) {
            (Some(a), Some(b)) => b <= a + 1e-12,
            _ => false,
        })
}

/// Worst `F₀(protected) − F₀(unprotected)` over all stages.
fn worst_margin(protected: &[ResultRow], bare: &[ResultRow]) -> f64 {
    protected
        .iter()
        .zip(bare)
        .map(|(p, b)| match (p.fidelity_0, b.fidelity_0) {
            (Some(x), Some(y)) => x - y,
            _ => f64::NEG_INFINITY,
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn protect(cfg: &ExperimentConfig, out: &OutputPaths) -> Result<RunReport, CliError> {
    let pc = cfg
        .protect
        .as_ref()
        .ok_or_else(|| CliError::Config("protect: a [protect] block is required".into()))?;
    if !cfg.channels.is_empty() {
        return Err(CliError::Config(
            "channels: protect builds its channels from the [protect] block".into(),
        ));
    }
    let space = cfg.space()?;
    let key = |k: &str, e: CoreError| CliError::Config(format!("protect.{k}: {e}"));
    let rho0 = fock::squeezed_vacuum(space, pc.r);
    let a = fock::annihilation(space);
    let dissipation = ideal_channel(a.clone(), pc.epsilon_dissipation)
        .map_err(|e| key("epsilon_dissipation", e))?;
    let bare = protect_run(
        &rho0,
        std::slice::from_ref(&dissipation),
        cfg.n_stages,
        cfg.stepper(),
    )?;

    let mut guards = vec![bare.guard.clone()];
    let mut body = json!({
        "stepper": cfg.stepper().as_str(),
        "reference_r": pc.r,
        "unprotected": {
            "final_fidelity_0": bare.rows.last().and_then(|r| r.fidelity_0),
            "monotone_decreasing": non_increasing(&bare.rows),
            "diagnostics": bare.stats_json,
        },
    });

    let main_rows = match &pc.protection {
        None => bare.rows,
        Some(p) => {
            let k2 = &a + &fock::creation(space).scale(C64::from(p.r.tanh()));
            let ch2 = ideal_channel(k2, p.epsilon).map_err(|e| key("protection.epsilon", e))?;
            let run = protect_run(&rho0, &[dissipation, ch2], cfg.n_stages, cfg.stepper())?;
            output::write_rows(&out.sibling("unprotected"), &bare.rows)?;
            let margin = worst_margin(&run.rows, &bare.rows);
            let matched = (p.r - pc.r).abs() < 1e-12;
            body["protected"] = json!({
                "r2": p.r,
                "epsilon2": p.epsilon,
                "final_fidelity_0": run.rows.last().and_then(|r| r.fidelity_0),
                "worst_margin_vs_unprotected": margin,
                "diagnostics": run.stats_json,
            });
            body["unprotected"]["output"] = json!(out.sibling("unprotected").display().to_string());
            guards.push(run.guard);
            if matched {
                guards.push(Guard::new(
                    "protection_never_worse",
                    margin >= -1e-12,
                    format!("min over N of F0(protected) - F0(unprotected) = {margin:e}"),
                ));
            }
            run.rows
        }
    };
    output::write_rows(&out.csv, &main_rows)?;
    body["rows"] = json!(main_rows.len());
    finish("protect", cfg, out, body, guards)
}

pub fn steady(cfg: &ExperimentConfig, out: &OutputPaths) -> Result<RunReport, CliError> {
    let space = cfg.space()?;
    let channels = cfg.build_channels(space)?;
    let l = collision::liouvillian(&channels)?;
    let ss = collision::steady_state(&l)?;
    let target = match cfg.target(space)? {
        Some(t) => Some(t),
        None if cfg.channels.len() == 1 => cfg.channels[0]
            .target(space)
            .transpose()
            .map_err(|e| CliError::Config(format!("channels[0]: {e}")))?,
        None => None,
    };
    let mut row = ResultRow::measure("inf", &ss.state)?;
    if ss.truncation_dominated {
        row.add_warning("truncation_dominated");
    }
    if let Some(t) = &target {
        row.fidelity_inf = try_fidelity(&mut row, &ss.state, t)?;
    }
    if cfg.initial_state.is_some() {
        let rho0 = cfg.initial(space)?;
        row.fidelity_0 = try_fidelity(&mut row, &ss.state, &rho0)?;
    }
    output::write_rows(&out.csv, std::slice::from_ref(&row))?;
    let body = json!({
        "kernel_eigenvalue": ss.kernel_eigenvalue,
        "spectral_gap": ss.gap,
        "tail_mass": ss.tail_mass,
        "truncation_dominated": ss.truncation_dominated,
        "fidelity_to_target": row.fidelity_inf,
        "mean_occupation": row.mean_occupation,
    });
    let guard = Guard::new(
        "row_invariants",
        row.guarded(),
        format!(
            "trace error {:e}, min eigenvalue {:e}",
            row.trace_error, row.min_eigenvalue
        ),
    );
    finish("steady", cfg, out, body, vec![guard])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResetRow {
    pub step: usize,
    pub t: f64,
    pub rho00: f64,
    pub rho11: f64,
    pub rho22: f64,
    pub rho33: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    pub warnings: String,
}

fn reset_row(step: usize, t: f64, s: &ElectronicState) -> Result<ResetRow, CliError> {
    let min = s.min_eigenvalue()?;
    let mut w = output::Warnings::default();
    w.flag(s.trace_error() > output::ROW_TRACE_TOL, "trace");
    w.flag(min < -fock::POSITIVITY_TOL, "positivity");
    Ok(ResetRow {
        step,
        t,
        rho00: s.population(0),
        rho11: s.population(1),
        rho22: s.population(2),
        rho33: s.population(3),
        trace_error: s.trace_error(),
        min_eigenvalue: min,
        warnings: w.into_string(),
    })
}

pub fn reset(cfg: &ExperimentConfig, out: &OutputPaths) -> Result<RunReport, CliError> {
    let rc = cfg
        .reset
        .as_ref()
        .ok_or_else(|| CliError::Config("reset: a [reset] block is required".into()))?;
    let key = |e: CoreError| CliError::Config(format!("reset: {e}"));
    let params = rc.params().map_err(key)?;
    let initial = rc.initial().map_err(key)?;
    let t_step = rc.step_time.unwrap_or_else(|| params.default_step_time());
    let dt = rc.dt.unwrap_or_else(|| params.default_dt());

    let first = reset::reset_step(&initial, 1, &params, t_step, dt).map_err(key)?;
    let second = reset::reset_step(first.last(), 2, &params, t_step, dt).map_err(key)?;

    let mut rows = Vec::with_capacity(first.times.len() + second.times.len());
    for (t, s) in first.times.iter().zip(&first.states) {
        rows.push(reset_row(1, *t, s)?);
    }
    for (t, s) in second.times.iter().zip(&second.states) {
        rows.push(reset_row(2, t_step + *t, s)?);
    }
    output::write_rows(&out.csv, &rows)?;

    let g = params.gamma_eff();
    let rel = |r: Option<f64>| r.map(|r| r / g - 1.0);
    let rate1 = reset::fit_decay_rate(&first, 1);
    let rate2 = reset::fit_decay_rate(&second, 2);
    let p22_0 = initial.population(2);
    let drift = first
        .states
        .iter()
        .map(|s| (s.population(2) - p22_0).abs())
        .fold(0.0, f64::max);
    let ground = second.last().population(0);
    let body = json!({
        "gamma_eff": g,
        "step_time": t_step,
        "dt": dt,
        "fitted_rate_step1": rate1,
        "fitted_rate_step2": rate2,
        "relative_error_step1": rel(rate1),
        "relative_error_step2": rel(rate2),
        "rho22_drift_step1": drift,
        "final_ground_population": ground,
        "rows": rows.len(),
    });
    let worst_trace = rows.iter().map(|r| r.trace_error).fold(0.0, f64::max);
    let guards = vec![Guard::new(
        "row_invariants",
        rows.iter().all(|r| {
            (r.trace_error <= output::ROW_TRACE_TOL && r.min_eigenvalue >= -fock::POSITIVITY_TOL)
                || !r.warnings.is_empty()
        }),
        format!("max trace error {worst_trace:e}"),
    )];
    finish("reset", cfg, out, body, guards)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OttoRow {
    pub x: f64,
    pub chi: Option<f64>,
    pub efficiency: Option<f64>,
    pub efficiency_otto: f64,
    pub regime: String,
    pub surpasses_otto: bool,
    pub w1: Option<f64>,
    pub q2: Option<f64>,
    pub w3: Option<f64>,
    pub q4: Option<f64>,
    pub w_total: Option<f64>,
    pub closure: Option<f64>,
    pub w_total_numeric: Option<f64>,
    pub efficiency_numeric: Option<f64>,
    pub max_difference: Option<f64>,
    pub nbar_c_numeric: Option<f64>,
    pub tail_mass: Option<f64>,
    pub fidelity_a: Option<f64>,
    pub fidelity_c: Option<f64>,
    pub warnings: String,
}

/// Dissipatively prepared `ρ_A` (thermal pair or cooling) and `ρ_C`
/// (coherent preset), with their fidelities to the ideal states.
fn synthesized_states(
    cfg: &ExperimentConfig,
    space: FockSpace,
    p: &OttoParams,
) -> Result<(DensityMatrix, DensityMatrix, f64, f64), CliError> {
    let key = |e: CoreError| CliError::Config(format!("otto --synthesize: {e}"));
    let pa = if p.nbar_a > 0.0 {
        Preset::ThermalPair { nbar: p.nbar_a }
    } else {
        Preset::Cooling
    };
    let pc = Preset::Coherent { alpha: p.alpha };
    let run = |preset: Preset| -> Result<(DensityMatrix, f64), CliError> {
        let chans = lasers::preset_channels(space, preset, cfg.eta, cfg.pulse_area).map_err(key)?;
        let rho = collision::evolve_with(
            &fock::vacuum(space),
            &chans,
            cfg.n_stages,
            cfg.stepper(),
            |_, _| Ok(()),
        )?;
        let f = fidelity(&rho, &preset.target_state(space)?)?;
        Ok((rho, f))
    };
    let (ra, fa) = run(pa)?;
    let (rc, fc) = run(pc)?;
    Ok((ra, rc, fa, fc))
}

fn otto_point(
    cfg: &ExperimentConfig,
    opts: RunOptions,
    var: SweepVariable,
    x: f64,
) -> Result<OttoRow, CliError> {
    let oc = cfg.otto.as_ref().expect("checked by caller");
    let key = |e: CoreError| CliError::Config(format!("otto (at {} = {x}): {e}", var.as_str()));
    let p = oc.params_at(var, x).map_err(key)?;
    let e_otto = otto::otto_reference(p.nu0, p.nu1);
    let mut w = output::Warnings::default();
    if var == SweepVariable::Chi {
        let eff = otto::efficiency_for_chi(p.nu0, p.nu1, x, oc.population_sign);
        return Ok(OttoRow {
            x,
            chi: Some(x),
            efficiency: eff.value,
            efficiency_otto: e_otto,
            regime: eff.regime.as_str().into(),
            surpasses_otto: eff.value.is_some_and(|v| v > e_otto),
            ..Default::default()
        });
    }
    let chi = match otto::chi_closed_form(&p) {
        Ok(c) => Some(c),
        Err(CoreError::ChiDenominator(_)) => {
            w.flag(true, "chi_undefined");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let e = otto::energetics_closed(&p);
    let eff = otto::efficiency_from_energetics(&e);
    let mut row = OttoRow {
        x,
        chi,
        efficiency: eff.value,
        efficiency_otto: e_otto,
        regime: eff.regime.as_str().into(),
        surpasses_otto: eff.value.is_some_and(|v| v > e_otto),
        w1: Some(e.w1),
        q2: Some(e.q2),
        w3: Some(e.w3),
        q4: Some(e.q4),
        w_total: Some(e.w_total),
        closure: Some(e.closure()),
        ..Default::default()
    };
    if opts.numeric || opts.synthesize {
        let space = cfg.space()?;
        let (ra, rc) = if opts.synthesize {
            let (ra, rc, fa, fc) = synthesized_states(cfg, space, &p)?;
            row.fidelity_a = Some(fa);
            row.fidelity_c = Some(fc);
            (ra, rc)
        } else {
            otto::cycle_states(space, &p).map_err(key)?
        };
        let n = otto::energetics_numeric(&ra, &rc, &p)?;
        w.flag(n.truncation_warning(), "truncation");
        row.w_total_numeric = Some(n.cycle.w_total);
        row.efficiency_numeric = otto::efficiency_from_energetics(&n.cycle).value;
        row.max_difference = Some(n.cycle.max_abs_difference(&e));
        row.nbar_c_numeric = Some(n.nbar_c);
        row.tail_mass = Some(n.tail_mass);
    }
    row.warnings = w.into_string();
    Ok(row)
}

pub fn otto_cmd(
    cfg: &ExperimentConfig,
    opts: RunOptions,
    out: &OutputPaths,
) -> Result<RunReport, CliError> {
    let oc = cfg
        .otto
        .as_ref()
        .ok_or_else(|| CliError::Config("otto: an [otto] block is required".into()))?;
    oc.params()
        .map_err(|e| CliError::Config(format!("otto: {e}")))?;
    if opts.synthesize && cfg.n_stages == 0 {
        return Err(CliError::Config(
            "n_stages: --synthesize needs n_stages > 0".into(),
        ));
    }
    let (var, grid) = match &oc.sweep {
        Some(s) => (s.variable, s.grid()),
        None => (SweepVariable::AlphaIm, vec![oc.alpha[1]]),
    };
    if var == SweepVariable::Chi && (opts.numeric || opts.synthesize) {
        warn!("a chi sweep has no states; --numeric and --synthesize are ignored");
    }
    // Points are independent; collect keeps grid order.
    let rows = grid
        .par_iter()
        .map(|&x| otto_point(cfg, opts, var, x))
        .collect::<Result<Vec<_>, _>>()?;
    output::write_rows(&out.csv, &rows)?;

    let p = oc.params().expect("validated above");
    let th = otto::chi_thresholds(p.nu0, p.nu1);
    let surpassing: Vec<f64> = rows
        .iter()
        .filter(|r| r.surpasses_otto)
        .map(|r| r.x)
        .collect();
    let max_of = |f: fn(&OttoRow) -> Option<f64>| {
        rows.iter()
            .filter_map(f)
            .map(f64::abs)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    let body = json!({
        "sweep_variable": var.as_str(),
        "points": rows.len(),
        "efficiency_otto": otto::otto_reference(p.nu0, p.nu1),
        "chi_thresholds": {
            "surpass_high": th.surpass_high,
            "surpass_low": th.surpass_low,
            "zero_work": th.zero_work,
        },
        "surpassing_points": surpassing.len(),
        "surpassing_range": surpassing.first().map(|a| [*a, *surpassing.last().unwrap()]),
        "max_closure": max_of(|r| r.closure),
        "max_numeric_difference": max_of(|r| r.max_difference),
        "numeric": opts.numeric || opts.synthesize,
        "synthesized": opts.synthesize,
    });
    let mut guards = Vec::new();
    if let Some(c) = max_of(|r| r.closure) {
        guards.push(Guard::new(
            "cycle_closure",
            c <= 1e-9,
            format!("max |sum W + sum Q| = {c:e}"),
        ));
    }
    if opts.numeric && !opts.synthesize {
        if let Some(d) = max_of(|r| r.max_difference) {
            let tol = 1e-6 * p.nu0;
            guards.push(Guard::new(
                "numeric_matches_closed_form",
                d <= tol,
                format!("max difference {d:e} (tolerance {tol:e})"),
            ));
        }
    }
    finish("otto", cfg, out, body, guards)
}
