//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::{Duration, Instant};

use num_complex::Complex64;

use doalab_core::array::{steering_grid, steering_vector, DoaGrid};
use doalab_core::beamformers::{
    du_gain, du_noise_aware_unload, du_spectrum, du_unload, music_spectrum, mvdr_dl_spectrum,
    srp_spectrum, two_source_gains, Method, RegularizationParams,
};
use doalab_core::linalg::{eig_invocations, hermitian_eig, HermitianMatrix};
use doalab_core::pipeline::{
    beampattern_table, half_power_beamwidth, localize_signal, run_sweep, synthesize_scene,
    ProcessingConfig, Scenario, SweepAxis, SweepSpec,
};
use doalab_core::simulator::{SourceKind, SourceSpec};
use doalab_core::spectral::{estimate_psd, stft, BinRange, PsdMatrix};
use doalab_core::{ArrayGeometry, WeightKind};

const FS: f64 = 44100.0;
const L: usize = 2048;
const TONE_BIN: usize = 46; // bin holding 1000 Hz at fs=44100, L=2048

fn pass(n: usize, title: &str) {
    println!("[acceptance] criterion {n} ({title}): PASS");
}

fn ula(sensors: usize, spacing: f64) -> ArrayGeometry {
    ArrayGeometry::uniform_linear(sensors, spacing, 343.0).unwrap()
}

fn psd_from(matrix: HermitianMatrix) -> PsdMatrix {
    PsdMatrix {
        matrix,
        snapshot_count: 1,
        noise_power: None,
    }
}

/// Exact-theory single-source PSD `P_s a a^H + sigma^2 I` at one bin.
fn exact_psd(geom: &ArrayGeometry, bin: usize, theta: f64, p_s: f64, sigma2: f64) -> PsdMatrix {
    let a = steering_vector(geom, bin, L, FS, theta).unwrap();
    psd_from(
        HermitianMatrix::from_outer_product(&a.entries, p_s)
            .add(&HermitianMatrix::identity(geom.sensors()).scale(sigma2))
            .unwrap(),
    )
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn bandlimited_source(doa_deg: f64, power: f64, duration_s: f64) -> SourceSpec {
    SourceSpec {
        kind: SourceKind::Bandlimited {
            f_lo_hz: 80.0,
            f_hi_hz: 8000.0,
        },
        duration_s,
        doa_deg,
        power,
    }
}

#[test]
fn criterion_01_eigenvalue_map_identity() {
    let start = Instant::now();
    let sizes = [4usize, 8, 16];
    for case in 0..200 {
        let n = sizes[case % sizes.len()];
        let psd = psd_from(random_psd(n, n + 2, 1000 + case as u64));
        let tr = psd.matrix.trace();

        let original = hermitian_eig(&psd.matrix).unwrap();
        let unloaded = du_unload(&psd).unwrap();
        let mapped = hermitian_eig(&unloaded).unwrap();

        // Eigenvalues of tr I - Phi are {tr - lambda_i}, reversed order.
        let mut expected: Vec<f64> = original.eigenvalues.iter().map(|l| tr - l).collect();
        expected.reverse();
        for (got, want) in mapped.eigenvalues.iter().zip(&expected) {
            assert!(
                (got - want).abs() <= 1e-9 * tr.abs().max(1.0),
                "case {case}: eigenvalue {got} vs {want}"
            );
        }

        // The minimum eigenvalue's eigenvector is the original top eigenvector.
        let top = original.eigenvector(0);
        let bottom = mapped.eigenvector(n - 1);
        let inner: Complex64 = top.iter().zip(&bottom).map(|(a, b)| a.conj() * b).sum();
        assert!(
            inner.norm() > 1.0 - 1e-8,
            "case {case}: |inner| = {}",
            inner.norm()
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    pass(1, "eigenvalue map identity");
}

/// Seeded random PSD matrix (Gram of k random vectors), local to this suite.
fn random_psd(n: usize, k: usize, seed: u64) -> HermitianMatrix {
    // splitmix-style expansion keeps the suite free of extra dependencies.
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z as f64 / u64::MAX as f64) * 2.0 - 1.0
    };
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    for _ in 0..k {
        let v: Vec<Complex64> = (0..n).map(|_| Complex64::new(next(), next())).collect();
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] += v[i] * v[j].conj();
            }
        }
    }
    HermitianMatrix::new(n, entries).unwrap()
}

#[test]
fn criterion_02_du_music_proportionality() {
    let geom = ula(8, 0.07);
    let grid = DoaGrid::with_step(-90.0, 90.0, 1.0).unwrap();
    let table = steering_grid(&geom, L, FS, &BinRange::new(TONE_BIN, TONE_BIN), &grid).unwrap();
    let view = table.bin(TONE_BIN).unwrap();

    let psd = exact_psd(&geom, TONE_BIN, -18.0, 1.0, 0.0);
    let tr = psd.matrix.trace();
    let du = du_spectrum(&psd, &view).unwrap();
    let music = music_spectrum(&psd, 1, &view).unwrap();

    let peak = argmax(&du.values);
    assert_eq!(grid.angle(peak), -18.0);

    let mut max_ratio = f64::MIN;
    let mut min_ratio = f64::MAX;
    for i in 0..grid.len() {
        if i == peak {
            continue; // the floored singularity at the true DOA
        }
        let ratio = du.values[i] / music.values[i];
        max_ratio = max_ratio.max(ratio);
        min_ratio = min_ratio.min(ratio);
        assert!(
            (ratio * tr - 1.0).abs() < 1e-8,
            "angle {}: ratio {ratio} vs 1/tr {}",
            grid.angle(i),
            1.0 / tr
        );
    }
    assert!(
        max_ratio / min_ratio - 1.0 < 1e-8,
        "spread {}",
        max_ratio / min_ratio - 1.0
    );
    pass(2, "DU = MUSIC / tr(Phi), noise-free single source");
}

#[test]
fn criterion_03_mvdr_small_load_tracks_music() {
    let geom = ula(8, 0.07);
    let grid = DoaGrid::with_step(-90.0, 90.0, 1.0).unwrap();
    let table = steering_grid(&geom, L, FS, &BinRange::new(TONE_BIN, TONE_BIN), &grid).unwrap();
    let view = table.bin(TONE_BIN).unwrap();

    let psd = exact_psd(&geom, TONE_BIN, -18.0, 1.0, 0.0);
    let params = RegularizationParams {
        dl_constant: 1e-8,
        dl_load: psd.matrix.trace() * 1e-8,
        du_unload: psd.matrix.trace(),
    };
    let mvdr = mvdr_dl_spectrum(&psd, &params, &view).unwrap();
    let music = music_spectrum(&psd, 1, &view).unwrap();
    let du = du_spectrum(&psd, &view).unwrap();

    let peak = argmax(&mvdr.values);
    assert_eq!(argmax(&music.values), peak);
    assert_eq!(argmax(&du.values), peak);
    assert_eq!(grid.angle(peak), -18.0);

    let mut max_ratio = f64::MIN;
    let mut min_ratio = f64::MAX;
    for i in 0..grid.len() {
        if i == peak {
            continue;
        }
        let ratio = mvdr.values[i] / music.values[i];
        max_ratio = max_ratio.max(ratio);
        min_ratio = min_ratio.min(ratio);
    }
    let spread = max_ratio / min_ratio - 1.0;
    assert!(spread < 1e-4, "off-peak spread {spread}");
    pass(3, "MVDR with tiny load tracks MUSIC off-peak");
}

#[test]
fn criterion_04_noisy_du_residual() {
    let geom = ula(8, 0.07);
    let psd = exact_psd(&geom, TONE_BIN, -18.0, 1.0, 0.1);

    let unloaded = du_unload(&psd).unwrap();
    let eig = hermitian_eig(&unloaded).unwrap();
    let smallest = *eig.eigenvalues.last().unwrap();
    assert!(
        (smallest - 0.7).abs() <= 1e-9,
        "residual eigenvalue {smallest} vs (N-1) sigma^2 = 0.7"
    );

    // The noise-aware regularizer annihilates the signal direction.
    let aware = du_noise_aware_unload(&psd, 0.1).unwrap();
    let signal = hermitian_eig(&psd.matrix).unwrap().eigenvector(0);
    let q = aware.quadratic_form(&signal).unwrap();
    assert!(q.abs() < 1e-9, "quadratic form at signal eigenvector: {q}");
    pass(4, "noisy DU residual (N-1) sigma^2 and noise-aware null");
}

#[test]
fn criterion_05_single_snapshot_collapse() {
    let geom = ula(8, 0.07);
    let base = Scenario {
        geometry: geom,
        sample_rate: FS,
        sources: vec![bandlimited_source(-18.0, 1.0, 0.35)],
        snr_db: 20.0,
        seed: 0,
    };
    let config = ProcessingConfig {
        snapshots: 1,
        dl_constant: 1e-4,
        ..Default::default()
    };

    for trial in 0..50u64 {
        let mut scenario = base.clone();
        scenario.seed = 5000 + trial;
        let (signal, _) = synthesize_scene(&scenario).unwrap();

        let mut per_method: Vec<Vec<f64>> = Vec::new();
        for method in [Method::Du, Method::Mvdr, Method::Music] {
            let mut cfg = config.clone();
            cfg.method = method;
            let outcome = localize_signal(&signal, &scenario.geometry, &cfg, None).unwrap();
            per_method.push(
                outcome
                    .window_estimates
                    .iter()
                    .map(|e| e.angles_deg[0])
                    .collect(),
            );
        }
        assert_eq!(
            per_method[0], per_method[1],
            "trial {trial}: DU vs MVDR estimates differ"
        );
        assert_eq!(
            per_method[0], per_method[2],
            "trial {trial}: DU vs MUSIC estimates differ"
        );
    }
    pass(
        5,
        "M=1 collapse: DU, MVDR, MUSIC argmax identical in 50 trials",
    );
}

#[test]
fn criterion_06_beampattern_resolution() {
    let scenario = Scenario {
        geometry: ula(8, 0.07),
        sample_rate: FS,
        sources: Vec::new(), // beampattern_table injects the sinusoid
        snr_db: 20.0,
        seed: 61,
    };
    let config = ProcessingConfig {
        grid: DoaGrid::with_step(-90.0, 90.0, 0.5).unwrap(),
        ..Default::default()
    };
    let table = beampattern_table(&scenario, &config, 1000.0, -18.0).unwrap();

    let steer_idx = table
        .grid
        .angles_deg()
        .iter()
        .position(|&a| a == -18.0)
        .unwrap();
    let mut widths = std::collections::HashMap::new();
    for (kind, db) in &table.patterns {
        assert!(
            db[steer_idx].abs() <= 0.01,
            "{kind:?}: {} dB at the steering angle",
            db[steer_idx]
        );
        let linear: Vec<f64> = db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
        let width = half_power_beamwidth(table.grid.angles_deg(), &linear).unwrap();
        widths.insert(*kind, width);
    }
    assert!(
        widths[&WeightKind::Du] < widths[&WeightKind::Conventional],
        "DU width {} vs conventional {}",
        widths[&WeightKind::Du],
        widths[&WeightKind::Conventional]
    );
    pass(
        6,
        "DU beamwidth strictly narrower than conventional, 0 dB at steer",
    );
}

#[test]
fn criterion_07_broadband_localization_orderings() {
    let start = Instant::now();
    let scenario = Scenario {
        geometry: ula(8, 0.07),
        sample_rate: FS,
        sources: vec![bandlimited_source(-18.0, 1.0, 1.0)],
        snr_db: 20.0,
        seed: 700,
    };

    // SNR 20 dB, M = 10: DU <= 2 deg and DU <= SRP.
    let config_a = ProcessingConfig {
        snapshots: 10,
        ..Default::default()
    };
    let sweep_a = SweepSpec {
        axis: SweepAxis::SnrDb,
        values: vec![20.0],
        methods: vec![Method::Srp, Method::Du],
        trials: 50,
    };
    let result_a = run_sweep(&scenario, &config_a, &sweep_a).unwrap();
    let srp_rmse = result_a.rows[0].rmse_deg;
    let du_rmse = result_a.rows[1].rmse_deg;
    assert!(du_rmse <= 2.0, "DU RMSE {du_rmse} exceeds 2 deg");
    assert!(
        du_rmse <= srp_rmse,
        "DU RMSE {du_rmse} vs SRP RMSE {srp_rmse}"
    );

    // SNR 0 dB, M = 5: DU <= MVDR.
    let config_b = ProcessingConfig {
        snapshots: 5,
        ..Default::default()
    };
    let sweep_b = SweepSpec {
        axis: SweepAxis::SnrDb,
        values: vec![0.0],
        methods: vec![Method::Du, Method::Mvdr],
        trials: 50,
    };
    let result_b = run_sweep(&scenario, &config_b, &sweep_b).unwrap();
    let du_low = result_b.rows[0].rmse_deg;
    let mvdr_low = result_b.rows[1].rmse_deg;
    assert!(
        du_low <= mvdr_low,
        "DU RMSE {du_low} vs MVDR RMSE {mvdr_low} at 0 dB"
    );

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!(
        "[acceptance]   detail: SNR20 DU {du_rmse:.3} deg, SRP {srp_rmse:.3} deg; \
         SNR0 DU {du_low:.3} deg, MVDR {mvdr_low:.3} deg; {elapsed:?}"
    );
    pass(
        7,
        "broadband free-field orderings (DU <= 2 deg, <= SRP, <= MVDR at 0 dB)",
    );
}

#[test]
fn criterion_08_two_source_separation() {
    let scenario = Scenario {
        geometry: ula(16, 0.2),
        sample_rate: FS,
        sources: vec![
            bandlimited_source(-11.0, 1.0, 1.0),
            bandlimited_source(31.0, 0.8, 1.0),
        ],
        snr_db: 20.0,
        seed: 800,
    };
    let config = ProcessingConfig {
        snapshots: 10,
        n_sources: 2,
        min_separation_deg: 5.0,
        ..Default::default()
    };
    let sweep = SweepSpec {
        axis: SweepAxis::SnrDb,
        values: vec![20.0],
        methods: vec![Method::Du, Method::Music],
        trials: 25,
    };
    let result = run_sweep(&scenario, &config, &sweep).unwrap();
    let du_rmse = result.rows[0].rmse_deg;
    let music_rmse = result.rows[1].rmse_deg;
    assert!(du_rmse <= 2.0, "DU two-source RMSE {du_rmse}");
    assert!(music_rmse <= 2.0, "MUSIC two-source RMSE {music_rmse}");
    println!("[acceptance]   detail: DU {du_rmse:.3} deg, MUSIC {music_rmse:.3} deg");
    pass(8, "two-source recovery within 2 deg for DU and MUSIC");
}

#[test]
fn criterion_09_du_cost_comparable_to_srp() {
    // Per-bin PSD estimates over the full 80-8000 Hz band from one window of
    // a synthesized broadband scene.
    let geom = ula(8, 0.07);
    let scenario = Scenario {
        geometry: geom.clone(),
        sample_rate: FS,
        sources: vec![bandlimited_source(-18.0, 1.0, 1.0)],
        snr_db: 20.0,
        seed: 900,
    };
    let (signal, _) = synthesize_scene(&scenario).unwrap();
    let spectra = stft(&signal, L, 1536, doalab_core::Window::Hann).unwrap();
    let bins = doalab_core::spectral::bin_range(FS, L, 80.0, 8000.0).unwrap();
    let psds = estimate_psd(&spectra, 9, 10, &bins).unwrap();
    let grid = DoaGrid::with_step(-90.0, 90.0, 1.0).unwrap();
    let table = steering_grid(&geom, L, FS, &bins, &grid).unwrap();

    let run_srp = || {
        for (psd, bin) in psds.iter().zip(bins.iter()) {
            std::hint::black_box(srp_spectrum(psd, &table.bin(bin).unwrap()));
        }
    };
    let run_du = || {
        for (psd, bin) in psds.iter().zip(bins.iter()) {
            std::hint::black_box(du_spectrum(psd, &table.bin(bin).unwrap()).unwrap());
        }
    };
    let run_music = || {
        for (psd, bin) in psds.iter().zip(bins.iter()) {
            std::hint::black_box(music_spectrum(psd, 1, &table.bin(bin).unwrap()).unwrap());
        }
    };

    // Structural guarantee first: the DU path never touches the eigensolver.
    run_du();
    let before = eig_invocations();
    run_du();
    run_srp();
    assert_eq!(
        eig_invocations(),
        before,
        "DU or SRP invoked the eigensolver"
    );
    run_music();
    assert!(eig_invocations() > before);

    // Interleave the 20 repetitions so ambient load from concurrently running
    // tests hits all three methods alike.
    let timed = |f: &dyn Fn()| {
        let t0 = Instant::now();
        f();
        t0.elapsed()
    };
    let mut samples: [Vec<Duration>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    run_srp();
    run_du();
    run_music(); // warmup
    for _ in 0..20 {
        samples[0].push(timed(&run_srp));
        samples[1].push(timed(&run_du));
        samples[2].push(timed(&run_music));
    }
    let median = |times: &mut Vec<Duration>| {
        times.sort();
        times[times.len() / 2]
    };
    let t_srp = median(&mut samples[0]);
    let t_du = median(&mut samples[1]);
    let t_music = median(&mut samples[2]);
    println!(
        "[acceptance]   detail: SRP {t_srp:?}, DU {t_du:?}, MUSIC {t_music:?} per full-band pass"
    );
    assert!(
        t_du.as_secs_f64() <= 1.5 * t_srp.as_secs_f64(),
        "DU {t_du:?} vs 1.5x SRP {t_srp:?}"
    );
    assert!(
        t_du.as_secs_f64() <= 0.7 * t_music.as_secs_f64(),
        "DU {t_du:?} vs 0.7x MUSIC {t_music:?}"
    );
    pass(
        9,
        "DU cost <= 1.5x SRP and <= 0.7x MUSIC, no eigensolver on the DU path",
    );
}

#[test]
fn criterion_10_gain_formulas() {
    // 100-point (N, SNR) lattice for the single-source gain, checked against
    // the power-ratio route G = (N-1) sigma^2 / (N (P_s + sigma^2)).
    let sensor_counts = [2usize, 4, 8, 16, 32];
    let snrs: Vec<f64> = (0..20)
        .map(|i| 10f64.powf(-2.0 + 0.25 * i as f64))
        .collect();
    let mut points = 0;
    for &n in &sensor_counts {
        for &snr in &snrs {
            let sigma2 = 0.37;
            let p_s = snr * sigma2;
            let oracle = (n as f64 - 1.0) * sigma2 / (n as f64 * (p_s + sigma2));
            assert!(
                (du_gain(n, snr) - oracle).abs() <= 1e-12,
                "du_gain({n}, {snr})"
            );
            points += 1;
        }
    }
    assert_eq!(points, 100);

    // Same lattice shape for the two-source gains against the power form
    // G1 = (N P_s2 + (N-1) sigma^2) / (N (P_s1 + P_s2 + sigma^2)).
    let mut points = 0;
    for &n in &[3usize, 4, 8, 16, 32] {
        for (i, &snr1) in snrs.iter().enumerate().take(10) {
            for &snr2 in snrs.iter().skip(i).take(2) {
                let sigma2 = 1.3;
                let (p1, p2) = (snr1 * sigma2, snr2 * sigma2);
                let nf = n as f64;
                let denom = nf * (p1 + p2 + sigma2);
                let oracle1 = (nf * p2 + (nf - 1.0) * sigma2) / denom;
                let oracle2 = (nf * p1 + (nf - 1.0) * sigma2) / denom;
                let (g1, g2) = two_source_gains(n, snr1, snr2);
                assert!((g1 - oracle1).abs() <= 1e-12, "G1({n}, {snr1}, {snr2})");
                assert!((g2 - oracle2).abs() <= 1e-12, "G2({n}, {snr1}, {snr2})");
                assert!(g1 + g2 <= 2.0);
                points += 1;
            }
        }
    }
    assert_eq!(points, 100);
    pass(
        10,
        "gain formulas match closed forms on a 100-point lattice",
    );
}

#[test]
fn criterion_11_sweep_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sweep.toml"),
        r#"
seed = 42
trials = 4
snapshots = 5

[[sources]]
kind = "bandlimited"
f_lo_hz = 80.0
f_hi_hz = 8000.0
doa_deg = -18.0
duration_s = 0.5

[sweep]
axis = "snr_db"
values = [0.0, 20.0]
methods = ["srp-phat", "du", "mvdr"]
"#,
    )
    .unwrap();

    let run = |threads: &str, out: &str| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_doalab"))
            .current_dir(dir.path())
            .args([
                "sweep",
                "--config",
                "sweep.toml",
                "--threads",
                threads,
                "--out",
                out,
            ])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };

    let a = run("1", "a.csv");
    let b = run("1", "b.csv");
    let c = run("8", "c.csv");
    assert_eq!(a, b, "rerun with 1 thread differs");
    assert_eq!(a, c, "8-thread run differs from 1-thread run");
    pass(
        11,
        "sweep CSV byte-identical across reruns and thread counts",
    );
}
