//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use ionstrobe_cli::config::{DetectionMode, RunConfig};
use ionstrobe_cli::output::parse_table;
use ionstrobe_cli::{execute, Command, Common};
use ionstrobe_core::calib::{
    bootstrap_cosine, derive_lamb_dicke, fit_cosine, fit_wave_pattern, tune_pulse_train, wrap_phase,
    CosineFit, FitSample, TuneOptions,
};
use ionstrobe_core::dynamics::{DephasingSpec, Envelope, PulseTrainSpec, TrainPropagator};
use ionstrobe_core::hilbert::{
    coupling_operator, displacement_operator, make_initial_state, squeeze_operator, CoherentAmp, DriveParams, FrameParams,
    HilbertSpec, ModeParams, Spin, SpinMotionState, SqueezeParam, UnitScale, AMU, HBAR,
};
use ionstrobe_core::sequence::{
    pattern_grid_scan, run_scan, Excitation, OuterVar, PatternField, ScanSpec, SequenceRunner,
    SequenceSpec, SyncPulse, ThermalAveraging,
};
use ionstrobe_core::stability::{
    apply_reference_correction, simulate_phase_trace, windowed_phase_stat, Estimator, PhaseNoiseModel,
};
use ionstrobe_core::Complex64;

const OMEGA: f64 = 2.0 * PI * 1.3e6;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn units() -> UnitScale {
    UnitScale::new(HBAR, 25.0 * AMU, OMEGA).unwrap()
}

fn base_spec(fock: usize, eta: f64, cycle: f64) -> SequenceSpec {
    SequenceSpec {
        hilbert: HilbertSpec::new(fock, 1e-4).unwrap(),
        mode: ModeParams::new(OMEGA, 0.15, 0.0).unwrap(),
        frame: FrameParams::default(),
        thermal: ThermalAveraging::default(),
        excitation: Excitation::None,
        sync: SyncPulse::default(),
        analysis: PulseTrainSpec {
            n_flashes: 30,
            flash_dur: 100e-9,
            cycle_dur: cycle,
            base_phase: 0.0,
            phase_step: 0.0,
            drive: DriveParams::new(2.0 * PI * 0.3e6, 0.0, eta).unwrap(),
        },
        dephasing: DephasingSpec::new(70e-6, Envelope::Gaussian).unwrap(),
    }
}

fn tuned(fock: usize, eta: f64, cycle: f64) -> SequenceSpec {
    let mut s = base_spec(fock, eta, cycle);
    let t = tune_pulse_train(&s, &TuneOptions::default()).unwrap();
    s.analysis = t.apply(&s.analysis);
    s
}

fn phi_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect()
}

/// One fit per outer value of an analytic scan.
fn fits(spec: &SequenceSpec, var: OuterVar, outer: &[f64], n_phi: usize) -> Vec<CosineFit> {
    let scan = ScanSpec::new(phi_grid(n_phi), var, outer.to_vec());
    let records = run_scan(&scan, spec).unwrap();
    records
        .chunks(n_phi)
        .map(|b| fit_cosine(&b.iter().map(|r| r.fit_sample(None)).collect::<Vec<_>>()).unwrap())
        .collect()
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 1.0 + k - x);
    for m in 1..n {
        let m = m as f64;
        let next = ((2.0 * m + 1.0 + k - x) * cur - (m + k) * prev) / (m + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn c1_operator_oracle() -> Outcome {
    let spec = HilbertSpec::new(60, 1e-4).unwrap();
    let mut worst: f64 = 0.0;
    for eta in [0.18, 0.23, 0.40] {
        let c = coupling_operator(eta, &spec).unwrap();
        for m in 0..48 {
            for n in 0..48 {
                let (lo, hi) = (m.min(n), m.max(n));
                let d = hi - lo;
                let mag = (-0.5 * eta * eta).exp()
                    * eta.powi(d as i32)
                    * (0.5 * (ln_factorial(lo) - ln_factorial(hi))).exp()
                    * laguerre(lo, d, eta * eta);
                let exact = Complex64::i().powi(d as i32) * mag;
                worst = worst.max((c[(m, n)] - exact).norm());
            }
        }
    }
    check(worst < 1e-8, format!("max |error| = {worst:.2e}"))
}

fn c2_state_analytics() -> Outcome {
    let spec = HilbertSpec::new(160, 1e-4).unwrap();
    let vac = SpinMotionState::basis(Spin::Down, 0, &spec).unwrap();
    let d = displacement_operator(CoherentAmp::new(3.0, 0.0).unwrap(), &spec).unwrap();
    let n_coh = vac.apply_motion(&d).unwrap().mean_n();
    let s = squeeze_operator(SqueezeParam::new(1.0, 0.0).unwrap(), &spec).unwrap();
    let sq = vac.apply_motion(&s).unwrap();
    let n_sq = sq.mean_n();
    let u = units();
    let q = sq.quadrature_moments();
    let product = q.var_x * u.x_zpf.powi(2) * q.var_p * u.p_zpf.powi(2) / (HBAR / 2.0).powi(2);
    let ok = (n_coh - 9.0).abs() < 1e-6
        && (n_sq - 1f64.sinh().powi(2)).abs() < 1e-6
        && (product - 1.0).abs() < 1e-6;
    check(
        ok,
        format!("<n>_coh = {n_coh:.9}, <n>_sq = {n_sq:.9}, VarX VarP/(hbar/2)^2 = {product:.9}"),
    )
}

fn c3_units() -> Outcome {
    let u = units();
    let x = u.x_zpf * 1e9;
    let p = u.p_zpf * 1e27;
    let eta = derive_lamb_dicke(25.0 * AMU, OMEGA, 140e-9, 0.840, HBAR).unwrap();
    let ok = (x - 12.47).abs() <= 0.01 && (p - 4.228).abs() <= 0.005 && (0.35..=0.42).contains(&eta);
    check(ok, format!("x_zpf = {x:.4} nm, p_zpf = {p:.4} zN us, eta(140 nm, 0.840 rad) = {eta:.4}"))
}

fn c4_pi_half_train() -> Outcome {
    let s = base_spec(128, 0.4, 769.23e-9);
    let t = tune_pulse_train(&s, &TuneOptions::default()).map_err(|e| e.to_string())?;
    let tuned = t.apply(&s.analysis);
    // independent check: the train alone on the thermal ensemble
    let prop = TrainPropagator::new(&s.hilbert, &tuned, &s.mode, &s.frame).unwrap();
    let mut sz = 0.0;
    for (n, w) in s.thermal_ensemble().unwrap() {
        let psi = make_initial_state(Spin::Down, n, &s.hilbert).unwrap();
        sz += w * prop.run(&psi, tuned.base_phase).unwrap().sigma_z();
    }
    let dur = t.total_duration * 1e6;
    let ok = t.achieved_sigma_z.abs() < 0.01 && sz.abs() < 0.01 && (dur - 23.1).abs() < 0.05;
    check(
        ok,
        format!(
            "|sigma_z| = {:.2e} (tuner), {:.2e} (re-run), duration {dur:.3} us, rabi_scale {:.4}",
            t.achieved_sigma_z.abs(),
            sz.abs(),
            t.rabi_scale
        ),
    )
}

fn c5_encoding_linearity() -> Outcome {
    let u = units();
    let eta = 0.4;
    let s = tuned(60, eta, 2.0 * PI / OMEGA);
    let amps = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let mut xs = Vec::new();
    let mut phases = Vec::new();
    for theta in [0.0, PI] {
        let spec = s.with_excitation(Excitation::Coherent(CoherentAmp::new(0.0, theta).unwrap()));
        let f = fits(&spec, OuterVar::AlphaAbs, &amps, 12);
        let mut prev = 0.0;
        for (a, fit) in amps.iter().zip(&f) {
            let rel = wrap_phase(fit.phase - f[0].phase);
            // follow the branch continuously along |alpha|
            let rel = prev + wrap_phase(rel - prev);
            prev = rel;
            xs.push(2.0 * a * theta.cos() * u.x_zpf);
            phases.push(rel);
        }
    }
    let n = xs.len() as f64;
    let (mx, mp) = (xs.iter().sum::<f64>() / n, phases.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&phases).map(|(x, p)| (x - mx) * (p - mp)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let resid = xs
        .iter()
        .zip(&phases)
        .map(|(x, p)| (p - mp - slope * (x - mx)).abs())
        .fold(0.0, f64::max);
    let expect = 2.0 * eta / (2.0 * u.x_zpf);
    let rel = slope.abs() / expect - 1.0;
    check(
        rel.abs() < 0.05,
        format!(
            "|slope| = {:.5} rad/nm vs {:.5} rad/nm ({:+.2}%), max residual {resid:.1e} rad",
            slope.abs() * 1e-9,
            expect * 1e-9,
            100.0 * rel
        ),
    )
}

fn c6_contrast_ordering() -> Outcome {
    let s = tuned(60, 0.4, 2.0 * PI / OMEGA);
    let spec = s.with_excitation(Excitation::Coherent(CoherentAmp::new(3.0, 0.0).unwrap()));
    let f = fits(&spec, OuterVar::AlphaPhase, &[0.0, PI / 2.0], 12);
    let (c0, c90) = (f[0].contrast, f[1].contrast);
    let mut worst: f64 = 0.0;
    for (eta, rabi) in [(0.0, 2.0 * PI * 0.3e6), (0.4, 0.0)] {
        let mut b = base_spec(60, eta, 2.0 * PI / OMEGA);
        b.analysis.drive = DriveParams::new(rabi, 0.0, eta).unwrap();
        let b = b.with_excitation(Excitation::Coherent(CoherentAmp::new(3.0, 0.7).unwrap()));
        let runner = SequenceRunner::new(&b).unwrap();
        for k in 0..12 {
            worst = worst.max(runner.run_direct(-PI + k as f64 * PI / 6.0).unwrap().delta_n.abs());
        }
    }
    check(
        c90 < c0 && worst < 1e-9,
        format!("C(0) = {c0:.5}, C(pi/2) = {c90:.5}, max |delta_n| without coupling = {worst:.1e}"),
    )
}

fn c7_pattern_recovery() -> Outcome {
    let field = PatternField::new(138e-9, 0.840, 0.0, 0.76).unwrap();
    let clean = pattern_grid_scan(&field, 0.76, 200e-9, 26, None, 0).unwrap();
    let f0 = fit_wave_pattern(&clean).map_err(|e| e.to_string())?;
    let noisy = pattern_grid_scan(&field, 0.76, 200e-9, 26, Some(250), 17).unwrap();
    let f1 = fit_wave_pattern(&noisy).map_err(|e| e.to_string())?;
    let d0 = ((f0.wavelength * 1e9 - 138.0).abs(), (f0.rotation - 0.840).abs());
    let d1 = ((f1.wavelength * 1e9 - 138.0).abs(), (f1.rotation - 0.840).abs());
    let ok = d0.0 <= 0.1 && d0.1 <= 0.002 && d1.0 <= 2.0 && d1.1 <= 0.03;
    check(
        ok,
        format!(
            "noiseless {:.4} nm / {:.5} rad; 250 shots {:.3}({:.0}) nm / {:.4}({:.0}) rad",
            f0.wavelength * 1e9,
            f0.rotation,
            f1.wavelength * 1e9,
            f1.wavelength_err * 1e10,
            f1.rotation,
            f1.rotation_err * 1e4
        ),
    )
}

fn demo_config(name: &str) -> (RunConfig, PathBuf) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    (RunConfig::load(&dir.join(name)).unwrap(), dir)
}

fn common(out: &Path) -> Common {
    Common {
        config: PathBuf::new(),
        out: out.to_path_buf(),
        seed: None,
        threads: None,
    }
}

fn note_value(text: &str, key: &str) -> Option<f64> {
    text.lines()
        .filter(|l| l.starts_with("# "))
        .flat_map(|l| l.split_whitespace())
        .find_map(|w| w.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
}

fn c8_trace_round_trip() -> Outcome {
    let (mut cfg, dir) = demo_config("fig4.toml");
    let cache = tempfile::tempdir().unwrap();
    cfg.tables.cache_dir = Some(cache.path().to_string_lossy().into_owned());
    let out = cache.path().join("trace.dat");

    let mut analytic = cfg.clone();
    analytic.detection.mode = DetectionMode::Analytic;
    analytic.trace.noise_repeats = 0;
    let art = execute(&Command::TracePhaseSpace(common(&out)), &analytic, &dir).map_err(|e| e.to_string())?;
    let (header, rows) = parse_table(&art[0].content).ok_or("unreadable trace table")?;
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (ca, ct, cx, cp) = (col("alpha_abs"), col("theta0_rad"), col("X_nm"), col("P_zNus"));
    let u = units();
    let (xa, pa) = (2.0 * u.x_zpf * 6.5 * 1e9, 2.0 * u.p_zpf * 6.5 * 1e27);
    let mut ex: f64 = 0.0;
    let mut ep: f64 = 0.0;
    for r in rows.iter().filter(|r| r[ca] > 0.0) {
        let t = r[ct];
        ex = ex.max((r[cx] - xa * t.cos()).abs() / xa);
        ep = ep.max((r[cp] - pa * t.sin().abs()).abs() / pa);
    }

    let art = execute(&Command::TracePhaseSpace(common(&out)), &cfg, &dir).map_err(|e| e.to_string())?;
    let sx = note_value(&art[0].content, "sigma_X_nm").ok_or("missing noise floor")?;
    let sp = note_value(&art[0].content, "sigma_P_zNus").ok_or("missing noise floor")?;
    let ok = ex < 0.05 && ep < 0.10 && (1.0..=5.0).contains(&sx) && (4.0..=20.0).contains(&sp);
    check(
        ok,
        format!(
            "max |X - {xa:.1} cos| = {:.2}% of amplitude, max ||P| - {pa:.2} |sin|| = {:.2}%, noise floor {sx:.2} nm / {sp:.2} zN us",
            100.0 * ex,
            100.0 * ep
        ),
    )
}

fn c9_squeeze_contrast() -> Outcome {
    let cycle = 2.0 * 2.0 * PI / OMEGA;
    let s = tuned(160, 0.4, cycle);
    let shots = 500;
    let phi = phi_grid(24);
    let mut diffs = Vec::new();
    let mut lines = Vec::new();
    let mut significant = false;
    for (k, r) in [0.25, 0.5, 1.0].into_iter().enumerate() {
        let spec = s.with_excitation(Excitation::Squeeze(SqueezeParam::new(r, 0.0).unwrap()));
        let mut scan = ScanSpec::new(phi.clone(), OuterVar::ZetaPhase, vec![0.0, PI]);
        scan.shots = Some(shots);
        scan.base_seed = 100 * k as u64;
        let records = run_scan(&scan, &spec).map_err(|e| e.to_string())?;
        let mut c = Vec::new();
        for (j, block) in records.chunks(phi.len()).enumerate() {
            let samples: Vec<FitSample> = block.iter().map(|r| r.fit_sample(Some(shots))).collect();
            let f = fit_cosine(&samples).map_err(|e| e.to_string())?;
            let b = bootstrap_cosine(&samples, &f, shots, 200, 7 + 10 * k as u64 + j as u64)
                .map_err(|e| e.to_string())?;
            c.push((f.contrast, b.contrast_std));
        }
        let diff = c[0].0 - c[1].0;
        let sigma = (c[0].1.powi(2) + c[1].1.powi(2)).sqrt();
        // the significance requirement is stated at |zeta| = 1
        if r == 1.0 {
            significant = diff.abs() > 5.0 * sigma;
        }
        diffs.push(diff.abs());
        lines.push(format!("|zeta|={r}: C(0)-C(pi) = {diff:+.4} ({:.1} sigma)", diff.abs() / sigma));
    }
    let monotone = diffs.windows(2).all(|w| w[1] > w[0]);
    check(significant && monotone, lines.join(", "))
}

fn c10_stability() -> Outcome {
    let model = |w, rw, d| PhaseNoiseModel::new(w, rw, d, 0.1).unwrap();
    let white = simulate_phase_trace(&model(0.1, 0.0, 0.0), 20_000.0, 5).unwrap();
    let ws: Vec<f64> = [2.0, 40.0, 200.0]
        .iter()
        .map(|&w| windowed_phase_stat(&white, w, Estimator::WindowStd).unwrap())
        .collect();
    let spread = ws.iter().cloned().fold(0.0, f64::max) / ws.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;

    let mut short = 0.0;
    let mut long = 0.0;
    for seed in 0..20 {
        let tr = simulate_phase_trace(&model(0.0, 0.05, 0.0), 20_000.0, seed).unwrap();
        short += windowed_phase_stat(&tr, 2.0, Estimator::TwoSample).unwrap().powi(2);
        long += windowed_phase_stat(&tr, 200.0, Estimator::TwoSample).unwrap().powi(2);
    }
    let growth = (long / short).sqrt() / 10.0 - 1.0;

    let drift = simulate_phase_trace(&model(0.01, 0.0, 0.01), 2_000.0, 3).unwrap();
    let corrected = apply_reference_correction(&drift, 10.0).unwrap();
    let before = windowed_phase_stat(&drift, 200.0, Estimator::TwoSample).unwrap();
    let after = windowed_phase_stat(&corrected, 200.0, Estimator::TwoSample).unwrap();
    let residual = after / before;

    let (cfg, dir) = demo_config("table-stability.toml");
    let tmp = tempfile::tempdir().unwrap();
    let art = execute(&Command::Stability(common(&tmp.path().join("s.dat"))), &cfg, &dir)
        .map_err(|e| e.to_string())?;
    let (header, rows) = parse_table(&art[0].content).ok_or("unreadable stability table")?;
    let (cr, cc, cs) = (
        header.iter().position(|h| h == "row").unwrap(),
        header.iter().position(|h| h == "corrected").unwrap(),
        header.iter().position(|h| h == "two_sample_deg").unwrap(),
    );
    let series = |row: f64| -> Vec<f64> {
        rows.iter().filter(|r| r[cr] == row && r[cc] == 0.0).map(|r| r[cs]).collect()
    };
    let (mw, ac) = (series(0.0), series(1.0));
    let pattern = mw.len() == 3 && ac.len() == 3 && mw[0] > mw[1] && mw[1] > mw[2] && ac[1] < ac[0] && ac[1] < ac[2];
    let ok = spread < 0.10 && growth.abs() < 0.15 && residual < 0.05 && pattern;
    check(
        ok,
        format!(
            "white window_std spread {:.1}%, rw sqrt-growth error {:+.1}%, drift residual {:.2}%, demo MW-MW {:.2?} deg, AC-AC {:.2?} deg",
            100.0 * spread,
            100.0 * growth,
            100.0 * residual,
            mw,
            ac
        ),
    )
}

const DETERMINISM_CONFIGS: [(&str, &str); 7] = [
    (
        "ramsey-scan",
        "[train]\nauto_tune = true\n[hilbert]\nfock_dim = 40\n[state]\nalpha_abs = 2.0\n[scan]\nphi_num = 8\nouter_var = \"alpha_phase\"\nouter_values = [0.0, 1.5]\n[detection]\nmode = \"shots\"\nshots = 50\nbase_seed = 9\n",
    ),
    (
        "pattern-scan",
        "[detection]\nmode = \"shots\"\nshots = 100\nbase_seed = 4\n[pattern]\ngrid_num = 12\nbootstrap_replicas = 10\n",
    ),
    (
        "trace-phase-space",
        "[train]\nauto_tune = true\n[hilbert]\nfock_dim = 84\n[state]\nalpha_abs = 1.0\n[scan]\nphi_num = 6\n[detection]\nmode = \"shots\"\nshots = 5000\nbase_seed = 5\n[tables]\nalpha_max = 4.0\nalpha_step = 1.0\nphi_num = 6\n[trace]\ntheta_num = 4\nnoise_repeats = 20\n",
    ),
    (
        "squeeze-scan",
        "[train]\nauto_tune = true\n[hilbert]\nfock_dim = 40\n[state]\nzeta_abs = 0.25\n[scan]\nphi_num = 6\nouter_var = \"zeta_phase\"\nouter_values = [0.0, 3.141592653589793]\n[detection]\nmode = \"shots\"\nshots = 100\nbase_seed = 6\n[squeeze]\nbootstrap_replicas = 10\n",
    ),
    ("calibrate-train", "[hilbert]\nfock_dim = 24\n"),
    (
        "build-tables",
        "[train]\nauto_tune = true\n[hilbert]\nfock_dim = 30\n[tables]\nalpha_max = 1.5\nphi_num = 6\n",
    ),
    (
        "stability",
        "[detection]\nbase_seed = 3\n[stability]\nduration_s = 600.0\nwindows_s = [2.0, 40.0]\nreference_interval_s = 10.0\nwrite_traces = true\n[[stability.rows]]\nlabel = \"a\"\nwhite_sigma_rad = 0.2\nrw_sigma_rad_per_sqrt_s = 0.01\n",
    ),
];

fn run_binary(cmd: &str, config: &Path, out: &Path) -> Result<(), String> {
    let status = Process::new(env!("CARGO_BIN_EXE_ionstrobe"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{cmd}: {}", String::from_utf8_lossy(&status.stderr).trim()))
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut compared = 0;
    for (cmd, text) in DETERMINISM_CONFIGS {
        let config = tmp.path().join(format!("{cmd}.toml"));
        std::fs::write(&config, text).unwrap();
        let mut runs = Vec::new();
        for k in 0..2 {
            let dir = tmp.path().join(format!("{cmd}-{k}"));
            std::fs::create_dir_all(&dir).unwrap();
            run_binary(cmd, &config, &dir.join("out.dat"))?;
            runs.push(snapshot(&dir));
        }
        if runs[0].is_empty() || runs[0] != runs[1] {
            return Err(format!("{cmd}: outputs differ between runs"));
        }
        compared += runs[0].len();
    }
    Ok(format!("7 commands, {compared} files byte-identical across two runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 11] = [
        ("operator oracle", c1_operator_oracle, Duration::from_secs(1)),
        ("coherent/squeezed analytics", c2_state_analytics, Duration::from_secs(1)),
        ("units", c3_units, Duration::from_secs(1)),
        ("pi/2 train", c4_pi_half_train, Duration::from_secs(120)),
        ("encoding linearity", c5_encoding_linearity, Duration::from_secs(300)),
        ("contrast ordering", c6_contrast_ordering, Duration::from_secs(300)),
        ("pattern fit recovery", c7_pattern_recovery, Duration::from_secs(300)),
        ("phase-space trace round trip", c8_trace_round_trip, Duration::from_secs(600)),
        ("squeezed-state scan", c9_squeeze_contrast, Duration::from_secs(600)),
        ("stability statistics", c10_stability, Duration::from_secs(120)),
        ("determinism", c11_determinism, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (k, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > *budget => Err(format!("{d}; over the {budget:?} budget")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("criterion {:>2} {tag} {name} [{:.1} s]: {detail}", k + 1, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
