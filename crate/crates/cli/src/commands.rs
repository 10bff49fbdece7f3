//! One function per subcommand. Each returns the files it produces; the
//! caller writes them.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ionstrobe_core::calib::{
    bootstrap_cosine, bootstrap_pattern, build_decode_tables, decode_relative, decode_trace,
    fit_cosine, fit_wave_pattern, noise_floor_estimate, tune_pulse_train, CosineFit, Decoded,
    DecodeTables, FitSample, TuneOptions,
};
use ionstrobe_core::sequence::{
    pattern_grid_scan, run_interleaved_scan, run_scan, Excitation, PatternField, ScanRecord,
    ScanSpec,
};
use ionstrobe_core::stability::{
    apply_reference_correction, phase_stats, simulate_phase_trace, PhaseNoiseModel, PhaseTrace,
};
use ionstrobe_core::Error;
use serde::Serialize;

use crate::config::{linspace, OuterKind, RunConfig};
use crate::model::{outer_column, outer_var, resolve, Model, TUNING_COLUMNS};
use crate::output::{sha256_hex, sibling, Artifact, Footer, OutputTable};
use crate::tables_io::{read_tables, write_tables};
use crate::CliError;

/// zN·µs per kg·m/s.
const P_ZNUS: f64 = 1e27;
const X_NM: f64 = 1e9;

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    /// Directory relative paths in the config are resolved against.
    pub base_dir: &'a Path,
    pub out: &'a Path,
}

impl Context<'_> {
    fn footer(&self) -> Footer {
        Footer::new(self.cfg.to_toml(), self.cfg.detection.base_seed)
    }

    fn artifact(&self, path: PathBuf, table: &OutputTable) -> Artifact {
        Artifact {
            path,
            content: table.render(&self.footer()),
        }
    }
}

fn phi_grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let s = &cfg.scan;
    linspace(s.phi_start_rad, s.phi_stop_rad, s.phi_num, s.phi_endpoint, "scan.phi_num")
}

fn outer_grid(cfg: &RunConfig, excitation: Excitation) -> Result<Vec<f64>, CliError> {
    let s = &cfg.scan;
    if !s.outer_values.is_empty() {
        if s.outer_range.is_some() {
            return Err(CliError::config(
                "scan.outer_range",
                "outer_values and outer_range are mutually exclusive",
            ));
        }
        return Ok(s.outer_values.clone());
    }
    if let Some(r) = &s.outer_range {
        return r.values("scan.outer_range");
    }
    let v = match (s.outer_var, excitation) {
        (OuterKind::AlphaPhase, Excitation::Coherent(a)) => a.phase,
        (OuterKind::AlphaAbs, Excitation::Coherent(a)) => a.magnitude,
        (OuterKind::ZetaPhase, Excitation::Squeeze(z)) => z.phase,
        (OuterKind::ZetaAbs, Excitation::Squeeze(z)) => z.magnitude,
        _ => 0.0,
    };
    Ok(vec![v])
}

fn scan_spec(cfg: &RunConfig, model: &Model) -> Result<ScanSpec, CliError> {
    let mut scan = ScanSpec::new(
        phi_grid(cfg)?,
        outer_var(cfg.scan.outer_var),
        outer_grid(cfg, model.spec.excitation)?,
    );
    scan.shots = cfg.detection.shots();
    scan.base_seed = cfg.detection.base_seed;
    scan.interleave_reference = cfg.scan.interleave_reference;
    if scan.shots == Some(0) {
        return Err(CliError::config("detection.shots", "must be >= 1"));
    }
    Ok(scan)
}

fn fit_block(block: &[ScanRecord], shots: Option<usize>) -> (Vec<FitSample>, Result<CosineFit, Error>) {
    let samples: Vec<FitSample> = block.iter().map(|r| r.fit_sample(shots)).collect();
    let fit = fit_cosine(&samples);
    (samples, fit)
}

fn fit_note(name: &str, outer: f64, fit: &Result<CosineFit, Error>) -> String {
    match fit {
        Ok(f) => format!(
            "fit {name}={outer:.11e} offset={:.11e} contrast={:.11e} contrast_err={:.11e} phase_rad={:.11e} phase_err_rad={:.11e} residual_rms={:.3e}",
            f.offset,
            f.contrast,
            f.contrast_err(),
            f.phase,
            f.phase_err(),
            f.residual_rms
        ),
        Err(e) => format!("fit {name}={outer:.11e} failed: {e}"),
    }
}

fn model_notes(table: &mut OutputTable, cfg: &RunConfig, model: &Model) {
    let (dphi, scale) = model.train_settings(cfg);
    table.note(format!(
        "eta_effective={:.11e} phase_step_rad={dphi:.11e} rabi_scale={scale:.11e} train_duration_us={:.11e} envelope={:.11e}",
        model.eta,
        model.spec.analysis.total_duration() * 1e6,
        model.spec.envelope()
    ));
}

pub fn ramsey_scan(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let model = Model::build(ctx.cfg, ctx.base_dir, None)?;
    let scan = scan_spec(ctx.cfg, &model)?;
    let records = run_scan(&scan, &model.spec)?;
    let name = outer_column(ctx.cfg.scan.outer_var);
    let mut table = OutputTable::new(
        "ionstrobe ramsey-scan",
        &[name, "phi_rad", "p_down", "p_down_sem", "sigma_z", "delta_n"],
    );
    for r in &records {
        table.push(vec![r.outer, r.phi, r.p_down_mean, r.p_down_sem, r.sigma_z, r.delta_n]);
    }
    model_notes(&mut table, ctx.cfg, &model);
    for block in records.chunks(scan.phi_grid.len()) {
        let (_, fit) = fit_block(block, scan.shots);
        table.note(fit_note(name, block[0].outer, &fit));
    }
    Ok(vec![ctx.artifact(ctx.out.to_path_buf(), &table)])
}

/// Motional periods per flash cycle in squeeze runs.
pub const SQUEEZE_CYCLES: f64 = 2.0;

pub fn squeeze_scan(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let cfg = ctx.cfg;
    if !matches!(cfg.scan.outer_var, OuterKind::ZetaPhase | OuterKind::ZetaAbs) {
        return Err(CliError::config("scan.outer_var", "squeeze-scan needs zeta_phase or zeta_abs"));
    }
    if cfg.squeeze.backaction_stride == 0 {
        return Err(CliError::config("squeeze.backaction_stride", "must be >= 1"));
    }
    let model = Model::build(cfg, ctx.base_dir, Some(SQUEEZE_CYCLES))?;
    if !matches!(model.spec.excitation, Excitation::Squeeze(_)) {
        return Err(CliError::config("state.zeta_abs", "squeeze-scan needs a squeezed state"));
    }
    let scan = scan_spec(cfg, &model)?;
    let records = run_scan(&scan, &model.spec)?;
    let name = outer_column(cfg.scan.outer_var);
    let mut main = OutputTable::new(
        "ionstrobe squeeze-scan",
        &[name, "phi_rad", "p_down", "p_down_sem", "sigma_z"],
    );
    let mut back = OutputTable::new("ionstrobe squeeze-scan back-action", &[name, "phi_rad", "delta_n"]);
    let n_phi = scan.phi_grid.len();
    for (k, block) in records.chunks(n_phi).enumerate() {
        for r in block {
            main.push(vec![r.outer, r.phi, r.p_down_mean, r.p_down_sem, r.sigma_z]);
            if k % cfg.squeeze.backaction_stride == 0 {
                back.push(vec![r.outer, r.phi, r.delta_n]);
            }
        }
    }
    model_notes(&mut main, cfg, &model);
    main.note(format!("cycle_dur_ns={:.11e}", model.spec.analysis.cycle_dur * 1e9));
    for (k, block) in records.chunks(n_phi).enumerate() {
        let (samples, fit) = fit_block(block, scan.shots);
        main.note(fit_note(name, block[0].outer, &fit));
        if let (Ok(f), Some(shots)) = (&fit, scan.shots) {
            if cfg.squeeze.bootstrap_replicas > 0 {
                let seed = scan.base_seed.wrapping_add((scan.len() + k) as u64);
                let b = bootstrap_cosine(&samples, f, shots, cfg.squeeze.bootstrap_replicas, seed)?;
                main.note(format!(
                    "bootstrap {name}={:.11e} contrast_std={:.11e} phase_std_rad={:.11e} replicas={}",
                    block[0].outer, b.contrast_std, b.phase_std, b.replicas
                ));
            }
        }
    }
    Ok(vec![
        ctx.artifact(ctx.out.to_path_buf(), &main),
        ctx.artifact(sibling(ctx.out, "backaction"), &back),
    ])
}

pub fn pattern_scan(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let cfg = ctx.cfg;
    let p = cfg
        .pattern
        .as_ref()
        .ok_or_else(|| CliError::config("pattern", "pattern-scan needs a [pattern] section"))?;
    if !(p.half_extent_nm > 0.0) {
        return Err(CliError::config("pattern.half_extent_nm", "must be > 0"));
    }
    if !(0.0..=1.0).contains(&p.contrast) {
        return Err(CliError::config("pattern.contrast", "must lie in [0, 1]"));
    }
    let field = PatternField::new(p.wavelength_nm * 1e-9, p.rotation_rad, p.phase_origin_rad, p.contrast)
        .map_err(|_| CliError::config("pattern.wavelength_nm", "must be > 0"))?;
    let shots = cfg.detection.shots();
    if shots == Some(0) {
        return Err(CliError::config("detection.shots", "must be >= 1"));
    }
    let seed = cfg.detection.base_seed;
    let points = pattern_grid_scan(&field, p.contrast, p.half_extent_nm * 1e-9, p.grid_num, shots, seed)
        .map_err(|e| match e {
            Error::InvalidParameter { name, reason } => CliError::config(name, &reason),
            other => CliError::Numerical(other),
        })?;
    let fit = fit_wave_pattern(&points);
    let mut table = OutputTable::new(
        "ionstrobe pattern-scan",
        &["x_nm", "z_nm", "p_down", "p_down_sem", "residual"],
    );
    for pt in &points {
        let residual = match &fit {
            Ok(f) => {
                let model = PatternField::new(f.wavelength, f.rotation, f.phase_origin, f.amplitude)
                    .map(|m| m.probe(pt.x, pt.z))
                    .unwrap_or(f64::NAN);
                pt.p_down - model
            }
            Err(_) => f64::NAN,
        };
        table.push(vec![pt.x * X_NM, pt.z * X_NM, pt.p_down, pt.sem, residual]);
    }
    let fit = match fit {
        Ok(f) => f,
        Err(e) => {
            table.note(format!("pattern fit failed: {e}"));
            let artifact = ctx.artifact(ctx.out.to_path_buf(), &table);
            return Err(CliError::Partial {
                artifacts: vec![artifact],
                message: format!("pattern fit failed: {e}; probe map written to {}", ctx.out.display()),
            });
        }
    };
    table.note(format!(
        "fit wavelength_nm={:.11e} wavelength_err_nm={:.11e} rotation_rad={:.11e} rotation_err_rad={:.11e}",
        fit.wavelength * X_NM,
        fit.wavelength_err * X_NM,
        fit.rotation,
        fit.rotation_err
    ));
    table.note(format!(
        "fit phase_origin_rad={:.11e} amplitude={:.11e} residual_rms={:.11e} reduced_chi2={:.11e} iterations={}",
        fit.phase_origin, fit.amplitude, fit.residual_rms, fit.reduced_chi2, fit.iterations
    ));
    if let Some(shots) = shots {
        if p.bootstrap_replicas > 0 {
            let bseed = seed.wrapping_add(points.len() as u64);
            let b = bootstrap_pattern(&points, &fit, shots, p.bootstrap_replicas, bseed)?;
            table.note(format!(
                "bootstrap wavelength_std_nm={:.11e} rotation_std_rad={:.11e} replicas={}",
                b.wavelength_std * X_NM,
                b.rotation_std,
                b.replicas
            ));
        }
    }
    Ok(vec![ctx.artifact(ctx.out.to_path_buf(), &table)])
}

#[derive(Serialize)]
struct TablesKey<'a> {
    phase_step_rad: f64,
    rabi_scale: f64,
    alpha_max: f64,
    alpha_step: f64,
    phi_num: usize,
    hilbert: &'a crate::config::HilbertSection,
    mode: &'a crate::config::ModeSection,
    units: &'a crate::config::UnitsSection,
    drive: &'a crate::config::DriveSection,
    sync: &'a crate::config::SyncSection,
    dephasing: &'a crate::config::DephasingSection,
}

/// Hash of everything the decode tables depend on.
pub fn tables_key(cfg: &RunConfig, model: &Model) -> String {
    let (dphi, scale) = model.train_settings(cfg);
    let mut train = cfg.train.clone();
    train.tuning_file = None;
    let key = TablesKey {
        phase_step_rad: dphi,
        rabi_scale: scale,
        alpha_max: cfg.tables.alpha_max,
        alpha_step: cfg.tables.alpha_step,
        phi_num: cfg.tables.phi_num,
        hilbert: &cfg.hilbert,
        mode: &cfg.mode,
        units: &cfg.units,
        drive: &cfg.drive,
        sync: &cfg.sync,
        dephasing: &cfg.dephasing,
    };
    let text = format!(
        "{}\n[train]\n{}",
        toml::to_string(&key).expect("key serializes"),
        toml::to_string(&train).expect("train serializes")
    );
    sha256_hex(&text)
}

fn build_tables(cfg: &RunConfig, model: &Model) -> Result<DecodeTables, CliError> {
    let alpha = cfg.tables.alpha_grid()?;
    if cfg.tables.phi_num < 5 {
        return Err(CliError::config("tables.phi_num", "must be >= 5"));
    }
    let phi = linspace(-PI, PI, cfg.tables.phi_num, false, "tables.phi_num")?;
    Ok(build_decode_tables(&model.spec, &alpha, &phi, &model.units)?)
}

/// Tables from `tables.file`, the cache, or a fresh build (stored in the
/// cache when one is configured).
fn obtain_tables(ctx: &Context, model: &Model) -> Result<(DecodeTables, Vec<Artifact>), CliError> {
    let cfg = ctx.cfg;
    let key = tables_key(cfg, model);
    let load = |path: &Path| -> Result<Option<DecodeTables>, CliError> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(_) => return Ok(None),
        };
        let (tables, stored) = read_tables(&text)
            .map_err(|e| CliError::config("tables.file", &format!("{}: {e}", path.display())))?;
        if stored != key {
            return Err(CliError::config(
                "tables.file",
                &format!("{} was built for a different configuration", path.display()),
            ));
        }
        Ok(Some(tables))
    };
    if let Some(file) = &cfg.tables.file {
        let path = resolve(ctx.base_dir, file);
        return match load(&path)? {
            Some(t) => Ok((t, Vec::new())),
            None => Err(CliError::config("tables.file", &format!("cannot read {}", path.display()))),
        };
    }
    if let Some(dir) = &cfg.tables.cache_dir {
        let path = resolve(ctx.base_dir, dir).join(format!("{key}.tables"));
        if let Some(t) = load(&path)? {
            return Ok((t, Vec::new()));
        }
        let tables = build_tables(cfg, model)?;
        let artifact = Artifact {
            path,
            content: write_tables(&tables, &key),
        };
        return Ok((tables, vec![artifact]));
    }
    Ok((build_tables(cfg, model)?, Vec::new()))
}

pub fn build_tables_cmd(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let model = Model::build(ctx.cfg, ctx.base_dir, None)?;
    let key = tables_key(ctx.cfg, &model);
    let tables = build_tables(ctx.cfg, &model)?;
    let mut content = write_tables(&tables, &key);
    ctx.footer().render(&mut content);
    let mut out = vec![Artifact {
        path: ctx.out.to_path_buf(),
        content,
    }];
    if let Some(dir) = &ctx.cfg.tables.cache_dir {
        out.push(Artifact {
            path: resolve(ctx.base_dir, dir).join(format!("{key}.tables")),
            content: write_tables(&tables, &key),
        });
    }
    Ok(out)
}

fn decode_flag(d: &Result<Decoded, Error>) -> f64 {
    match d {
        Ok(d) if d.x_clamped || d.p_clamped => 1.0,
        Ok(_) => 0.0,
        Err(_) => 2.0,
    }
}

pub fn trace_phase_space(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let cfg = ctx.cfg;
    let model = Model::build(cfg, ctx.base_dir, None)?;
    let alpha = match model.spec.excitation {
        Excitation::Coherent(a) => a.magnitude,
        Excitation::None => 0.0,
        Excitation::Squeeze(_) => {
            return Err(CliError::config("state.zeta_abs", "trace-phase-space needs a coherent state"))
        }
    };
    if cfg.trace.theta_num == 0 {
        return Err(CliError::config("trace.theta_num", "must be >= 1"));
    }
    let (tables, mut artifacts) = obtain_tables(ctx, &model)?;
    let thetas = linspace(0.0, 2.0 * PI, cfg.trace.theta_num, false, "trace.theta_num")?;
    let mut scan = ScanSpec::new(phi_grid(cfg)?, ionstrobe_core::sequence::OuterVar::AlphaPhase, thetas);
    scan.shots = cfg.detection.shots();
    scan.base_seed = cfg.detection.base_seed;
    let base = model
        .spec
        .with_excitation(Excitation::Coherent(ionstrobe_core::hilbert::CoherentAmp::new(alpha, 0.0)?));
    let pairs = run_interleaved_scan(&scan, &base)?;
    let n_phi = scan.phi_grid.len();
    let mut meas_fits = Vec::new();
    let mut ref_fits = Vec::new();
    for block in pairs.chunks(n_phi) {
        let m: Vec<ScanRecord> = block.iter().map(|p| p.measurement).collect();
        let r: Vec<ScanRecord> = block
            .iter()
            .map(|p| p.reference.ok_or_else(|| Error::MissingReference("trace scan".into())))
            .collect::<Result<_, _>>()?;
        meas_fits.push(fit_block(&m, scan.shots).1);
        ref_fits.push(fit_block(&r, scan.shots).1);
    }

    let mut phases = Vec::new();
    let mut contrasts = Vec::new();
    for (m, r) in meas_fits.iter().zip(&ref_fits) {
        match (m, r) {
            (Ok(m), Ok(r)) => {
                phases.push(m.phase - r.phase);
                contrasts.push(m.contrast * tables.contrast_ref / r.contrast);
            }
            _ => {
                phases.push(f64::NAN);
                contrasts.push(f64::NAN);
            }
        }
    }
    let decoded = decode_trace(&phases, &contrasts, &tables);

    let mut table = OutputTable::new(
        "ionstrobe trace-phase-space",
        &["alpha_abs", "theta0_rad", "phi0_rad", "contrast", "X_nm", "P_zNus", "decode_flag"],
    );
    let nan_row = |a: f64, t: f64| vec![a, t, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 2.0];
    for (k, &theta) in scan.outer_grid.iter().enumerate() {
        match &ref_fits[k] {
            Ok(r) => {
                let d = decode_relative(r.phase - tables.phi0_ref, r.contrast, &tables, None);
                let flag = decode_flag(&d);
                let (x, p) = d.as_ref().map_or((f64::NAN, f64::NAN), |d| (d.x, d.p_abs));
                table.push(vec![0.0, theta, r.phase - tables.phi0_ref, r.contrast, x * X_NM, p * P_ZNUS, flag]);
            }
            Err(_) => table.push(nan_row(0.0, theta)),
        }
        match (&meas_fits[k], &decoded[k]) {
            (Ok(m), d) => {
                let flag = decode_flag(d);
                let (phase, x, p) = d
                    .as_ref()
                    .map_or((phases[k], f64::NAN, f64::NAN), |d| (d.phase_rel, d.x, d.p_abs));
                table.push(vec![alpha, theta, phase, m.contrast, x * X_NM, p * P_ZNUS, flag]);
            }
            (Err(_), _) => table.push(nan_row(alpha, theta)),
        }
    }
    model_notes(&mut table, cfg, &model);
    table.note(format!(
        "tables phi0_ref_rad={:.11e} contrast_ref={:.11e} key={}",
        tables.phi0_ref,
        tables.contrast_ref,
        tables_key(cfg, &model)
    ));
    for (k, d) in decoded.iter().enumerate() {
        if let Err(e) = d {
            table.note(format!("decode theta0_rad={:.11e} failed: {e}", scan.outer_grid[k]));
        }
    }
    if cfg.trace.noise_repeats > 0 {
        let shots = cfg.detection.shots().ok_or_else(|| {
            CliError::config("trace.noise_repeats", "the noise floor needs detection.mode = \"shots\"")
        })?;
        let seed = cfg.detection.base_seed.wrapping_add(1 << 32);
        let nf = noise_floor_estimate(&model.spec, &tables, &scan.phi_grid, shots, cfg.trace.noise_repeats, seed)?;
        table.note(format!(
            "noise_floor sigma_X_nm={:.11e} sigma_P_zNus={:.11e} repeats={} shots={shots}",
            nf.sigma_x * X_NM,
            nf.sigma_p * P_ZNUS,
            cfg.trace.noise_repeats
        ));
    }
    artifacts.insert(0, ctx.artifact(ctx.out.to_path_buf(), &table));
    Ok(artifacts)
}

pub fn calibrate_train(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let mut cfg = ctx.cfg.clone();
    cfg.train.auto_tune = false;
    cfg.train.tuning_file = None;
    let model = Model::build(&cfg, ctx.base_dir, None)?;
    let mut untuned = model.spec.with_excitation(Excitation::None);
    untuned.analysis.phase_step = 0.0;
    untuned.analysis.drive.rabi = 2.0 * PI * cfg.drive.rabi_hz;
    let opts = TuneOptions {
        tol: cfg.train.tune_tol,
        ..TuneOptions::default()
    };
    if !(opts.tol > 0.0) {
        return Err(CliError::config("train.tune_tol", "must be > 0"));
    }
    let t = tune_pulse_train(&untuned, &opts)?;
    let mut table = OutputTable::new("ionstrobe calibrate-train", &TUNING_COLUMNS);
    table.push(vec![
        t.phase_step,
        t.rabi_scale,
        t.achieved_sigma_z,
        t.total_duration * 1e6,
        t.iterations as f64,
        t.evaluations as f64,
    ]);
    table.note(format!(
        "eta_effective={:.11e} rabi_hz={:.11e} flash_ns={:.11e} cycle_ns={:.11e} n_flashes={}",
        model.eta,
        cfg.drive.rabi_hz,
        untuned.analysis.flash_dur * 1e9,
        untuned.analysis.cycle_dur * 1e9,
        untuned.analysis.n_flashes
    ));
    table.note("use this file as train.tuning_file to apply the tuning");
    Ok(vec![ctx.artifact(ctx.out.to_path_buf(), &table)])
}

fn trace_table(trace: &PhaseTrace, label: &str) -> OutputTable {
    let mut t = OutputTable::new(&format!("ionstrobe stability trace {label}"), &["t_s", "phase_rad"]);
    for (&ts, &p) in trace.t.iter().zip(&trace.phase) {
        t.push(vec![ts, p]);
    }
    t
}

pub fn stability(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let cfg = ctx.cfg;
    let s = cfg
        .stability
        .as_ref()
        .ok_or_else(|| CliError::config("stability", "stability needs a [stability] section"))?;
    if s.rows.is_empty() {
        return Err(CliError::config("stability.rows", "needs at least one row"));
    }
    let mut table = OutputTable::new(
        "ionstrobe stability",
        &["row", "corrected", "window_s", "windows", "window_std_deg", "two_sample_deg"],
    );
    let mut out = Vec::new();
    for (k, row) in s.rows.iter().enumerate() {
        let model = PhaseNoiseModel::new(
            row.white_sigma_rad,
            row.rw_sigma_rad_per_sqrt_s,
            row.drift_rate_rad_per_s,
            s.sample_interval_s,
        )
        .map_err(|e| match e {
            Error::InvalidParameter { name, reason } => CliError::config(name, &reason),
            other => CliError::Numerical(other),
        })?;
        let seed = cfg.detection.base_seed.wrapping_add(k as u64);
        let trace = simulate_phase_trace(&model, s.duration_s, seed)
            .map_err(|e| CliError::config("stability.duration_s", &e.to_string()))?;
        let mut variants = vec![(0.0, trace.clone())];
        if let Some(interval) = s.reference_interval_s {
            let c = apply_reference_correction(&trace, interval)
                .map_err(|e| CliError::config("stability.reference_interval_s", &e.to_string()))?;
            variants.push((1.0, c));
        }
        for (flag, tr) in &variants {
            for &w in &s.windows_s {
                let st = phase_stats(tr, w)
                    .map_err(|e| CliError::config("stability.windows_s", &e.to_string()))?;
                table.push(vec![
                    k as f64,
                    *flag,
                    w,
                    st.windows as f64,
                    st.window_std.to_degrees(),
                    st.two_sample.to_degrees(),
                ]);
            }
        }
        table.note(format!(
            "row {k} label={} white_sigma_rad={:.11e} rw_sigma_rad_per_sqrt_s={:.11e} drift_rate_rad_per_s={:.11e} seed={seed}",
            row.label, row.white_sigma_rad, row.rw_sigma_rad_per_sqrt_s, row.drift_rate_rad_per_s
        ));
        if s.write_traces {
            out.push(ctx.artifact(sibling(ctx.out, &format!("trace{k}")), &trace_table(&trace, &row.label)));
        }
    }
    out.insert(0, ctx.artifact(ctx.out.to_path_buf(), &table));
    Ok(out)
}
