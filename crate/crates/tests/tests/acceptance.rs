//! Acceptance suite: one check per criterion, each printing a single
//! PASS/FAIL line with the measured values. Built without the libtest
//! harness so every line shows up under plain `cargo test`. Release builds are much faster;
//! the full suite takes roughly a quarter of an hour on one core.

use std::sync::OnceLock;

use faer::Mat;
use uscqed::evolve::{
    lindblad_evolve, schrodinger_evolve, DissipatorConfig, FactoredDensity, IntegratorConfig,
};
use uscqed::experiments::{
    constrained_harvest_with, disorder_monte_carlo, dissipative_harvest, flux_map, flux_profile, protection_scan,
    run_ground_harvest, run_singlet_harvest, sweep_eef, thermal_point, ConfigSource, DisorderKind, ExperimentConfig,
    Scenario,
};
use uscqed::fluxqubit::PathSample;
use uscqed::linalg::expm_hermitian;
use uscqed::model::{build_full_hamiltonian, ControlledHamiltonian, ModelParams};
use uscqed::observables::Observer;
use uscqed::schedules::{ControlSchedule, Segment, Shape};
use uscqed::spectral::{compare_lowest_manifold, eigensystem};
use uscqed::statespace::{annihilator, pauli, product_state, register_state, Axis, DensityMatrix, HilbertSpace};
use uscqed::C64;

struct Item {
    label: String,
    passed: bool,
}

#[derive(Default)]
struct Report(Vec<Item>);

impl Report {
    fn check(&mut self, passed: bool, label: impl Into<String>) {
        self.0.push(Item {
            label: label.into(),
            passed,
        });
    }

    fn finish(self, criterion: u32, title: &str) {
        let passed = self.0.iter().all(|i| i.passed);
        let details: Vec<String> = self
            .0
            .iter()
            .map(|i| format!("{}{}", if i.passed { "" } else { "!" }, i.label))
            .collect();
        println!(
            "criterion {criterion:2} {}: {title}; {}",
            if passed { "PASS" } else { "FAIL" },
            details.join("; ")
        );
        assert!(passed, "criterion {criterion} failed: {}", details.join("; "));
    }
}

fn preset(name: &str, overrides: &[&str]) -> ExperimentConfig {
    let overrides = overrides
        .iter()
        .map(|o| uscqed::experiments::parse_override(o).unwrap())
        .collect();
    ConfigSource {
        preset: Some(name.into()),
        text: None,
        overrides,
    }
    .load(match name {
        "fig3b" => Scenario::Sweep,
        "fig3c" => Scenario::Thermal,
        "fig4" => Scenario::Singlet,
        "figS2" => Scenario::Disorder,
        "figS7" => Scenario::Fluxmap,
        "figS8" => Scenario::Fluxpath,
        "figS9" => Scenario::Dissipative,
        _ => Scenario::Harvest,
    })
    .unwrap()
}

fn criterion_01_usc_splitting_law() {
    const GAP_TOL: f64 = 0.05;
    let mut r = Report::default();
    for n in [2usize, 4] {
        for g in [4.0, 5.0] {
            let cmp = compare_lowest_manifold(n, 1.0, 1.0, g, 140).unwrap();
            let err = cmp.max_gap_error();
            r.check(err < GAP_TOL, format!("N={n} g={g} gap err {err:.4}"));
            r.check(cmp.ordering_matches, format!("N={n} g={g} ordering {}", cmp.ordering_matches));
        }
    }
    r.finish(1, "lowest-manifold splittings within 5% per gap, ordering exact");
}

fn criterion_02_ground_state_harvesting() {
    let mut r = Report::default();
    for n in [2usize, 4, 6] {
        let floor = if n == 2 { 0.95 } else { 0.90 };
        for shape in ["cosine", "linear"] {
            let cfg = preset(
                "fig2b",
                &[&format!("n_qubits={n}"), &format!("ground.adiabatic_shape=\"{shape}\"")],
            );
            let h = run_ground_harvest(&cfg).unwrap();
            r.check(h.eef >= floor, format!("N={n} {shape} F_E {:.4} (>= {floor})", h.eef));
            r.check(h.min_post_purity > 0.9, format!("N={n} {shape} purity {:.4}", h.min_post_purity));
        }
    }
    r.finish(2, "ground-state harvesting");
}

fn criterion_03_robustness_sweep() {
    const NOISE: f64 = 0.02;
    let cfg = preset("fig3b", &["sweep.t4=[0.25, 0.5]"]);
    let grid = sweep_eef(&cfg).unwrap();
    let mut r = Report::default();
    let i = grid.g_min.iter().position(|g| (g - 0.2).abs() < 1e-12).unwrap();
    let j = grid.t4.iter().position(|t| (t - 0.5).abs() < 1e-12).unwrap();
    r.check(grid.eef[i][j] >= 0.9, format!("EEF(0.2, 0.5) {:.4}", grid.eef[i][j]));
    for (j, t4) in grid.t4.iter().enumerate() {
        let worst_rise = (1..grid.g_min.len())
            .map(|i| grid.eef[i][j] - grid.eef[i - 1][j])
            .fold(f64::NEG_INFINITY, f64::max);
        r.check(worst_rise <= NOISE, format!("T4={t4} largest rise {worst_rise:.4}"));
    }
    r.finish(3, "robustness sweep");
}

fn criterion_04_thermal_extraction() {
    let cfg = preset("fig3c", &[]);
    let n_cut = cfg.thermal.n_cut;
    let mut r = Report::default();
    for t in [0.5, 1.0, 1.5] {
        let p = thermal_point(&cfg, t, n_cut).unwrap().point;
        r.check(
            p.eef >= p.ground_population + 0.05,
            format!("T={t} EEF {:.4} p0 {:.4}", p.eef, p.ground_population),
        );
    }
    let zero = thermal_point(&cfg, 0.0, n_cut).unwrap().point.eef;
    let coherent = run_ground_harvest(&cfg).unwrap().eef;
    r.check((zero - coherent).abs() < 1e-6, format!("T=0 vs coherent {:.1e}", zero - coherent));
    let coarse = thermal_point(&cfg, 1.5, n_cut).unwrap().point.eef;
    let fine = thermal_point(&cfg, 1.5, cfg.thermal.n_cut_check).unwrap().point.eef;
    r.check((fine - coarse).abs() < 0.01, format!("n_cut drift {:.1e}", fine - coarse));
    r.finish(4, "thermal extraction");
}

fn criterion_05_singlet_protocol() {
    let cfg = preset("fig4", &[]);
    let s = run_singlet_harvest(&cfg).unwrap();
    let mut r = Report::default();
    r.check(s.final_s2 < 0.2, format!("<S2> {:.4}", s.final_s2));
    r.check(s.final_purity > 0.9, format!("purity {:.4}", s.final_purity));
    let mut control = cfg.clone();
    control.singlet.omega_low_b = None;
    let c = run_singlet_harvest(&control).unwrap();
    r.check(c.s2_drift < 1e-8, format!("no-offset S2 drift {:.1e}", c.s2_drift));
    r.finish(5, "singlet protocol");
}

fn criterion_06_protection() {
    let cfg = preset("fig4", &[]);
    let scan = protection_scan(&cfg).unwrap();
    let first = scan.time_average[0];
    let last = *scan.time_average.last().unwrap();
    let mut r = Report::default();
    r.check(
        first >= 5.0 * last,
        format!("<S2> g_f=0 {first:.2e}, g_f={} {last:.2e}, ratio {:.1}", scan.g_f.last().unwrap(), first / last),
    );
    r.finish(6, "protection");
}

fn criterion_07_disorder() {
    let mut r = Report::default();
    let coupling = disorder_monte_carlo(&preset("figS2", &["disorder.kind=\"coupling\""])).unwrap();
    assert_eq!(coupling.kind, DisorderKind::Coupling);
    r.check(
        coupling.mean_eef >= 0.9,
        format!("coupling mean F_E {:.4} +- {:.4}", coupling.mean_eef, coupling.stderr_eef),
    );
    let freq = disorder_monte_carlo(&preset("figS2", &["disorder.kind=\"frequency\""])).unwrap();
    let d = freq.final_purity_mean - freq.clean_final_purity;
    r.check(
        d.abs() <= 0.05,
        format!("frequency purity {:.4} vs clean {:.4}", freq.final_purity_mean, freq.clean_final_purity),
    );
    r.finish(7, "disorder");
}

fn criterion_08_dissipation() {
    let cfg = preset("figS9", &["dissipation.temperatures=[0.0, 1.0]"]);
    let points = dissipative_harvest(&cfg).unwrap();
    let mut r = Report::default();
    for p in &points {
        let pp = 100.0 * p.degradation;
        if p.temperature == 0.0 {
            r.check(pp < 1.0, format!("T=0 drop {pp:.2} pp"));
        } else {
            r.check((pp - 3.5).abs() <= 2.0, format!("T={} drop {pp:.2} pp", p.temperature));
        }
        let tr = p.diagnostics.max_trace_error.max(p.coherent.diagnostics.max_trace_error);
        r.check(tr < 1e-6, format!("T={} trace err {tr:.1e}", p.temperature));
    }
    r.finish(8, "dissipation");
}

fn figs8_profile() -> &'static Vec<PathSample> {
    static PROFILE: OnceLock<Vec<PathSample>> = OnceLock::new();
    PROFILE.get_or_init(|| flux_profile(&preset("figS8", &[])).unwrap())
}

fn within(x: f64, target: f64, frac: f64) -> bool {
    (x - target).abs() <= frac * target
}

fn criterion_09_flux_landscape() {
    // 5x5 keeps the runtime down; the extremes sit on the window corners.
    let cfg = preset("figS7", &["flux.f_alpha.points=5", "flux.f_beta.points=5"]);
    let land = flux_map(&cfg).unwrap();
    let (w_lo, w_hi) = land.omega_q_range();
    let (g_lo, g_hi) = land.g_range();
    let mut r = Report::default();
    r.check(within(w_lo, 0.5, 0.2), format!("omega_q min {w_lo:.3}"));
    r.check(within(w_hi, 50.0, 0.2), format!("omega_q max {w_hi:.2}"));
    r.check(within(g_lo, 0.17, 0.2), format!("g min {g_lo:.3}"));
    r.check(within(g_hi, 4.5, 0.2), format!("g max {g_hi:.3}"));

    let s8 = preset("figS8", &["n_qubits=2"]);
    let res = constrained_harvest_with(&s8, figs8_profile().clone()).unwrap();
    let t = &res.table;
    let i_peak = t.t.iter().position(|x| (x - s8.flux.pulse.t_up).abs() < 1e-9).unwrap();
    let (a, b, c) = (t.omega_q[0], t.omega_q[i_peak], *t.omega_q.last().unwrap());
    r.check(within(a, 22.8, 0.1), format!("path start {a:.2}"));
    r.check(within(b, 0.7, 0.1), format!("path turn {b:.3}"));
    r.check(within(c, 22.8, 0.1), format!("path end {c:.2}"));
    r.finish(9, "flux-qubit landscape and path");
}

fn criterion_10_constrained_pulse() {
    let mut r = Report::default();
    for (n, floor, strict) in [(2usize, 0.93, false), (4, 0.9, true)] {
        let cfg = preset("figS8", &[&format!("n_qubits={n}")]);
        let h = constrained_harvest_with(&cfg, figs8_profile().clone()).unwrap().harvest;
        let ok = if strict { h.eef > floor } else { h.eef >= floor };
        r.check(ok, format!("N={n} F_E {:.4}", h.eef));
    }
    r.finish(10, "constrained-pulse harvesting");
}

fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

fn scaled(m: &Mat<C64>, c: f64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)
}

/// `H` assembled from explicit Kronecker products with qubit 0 outermost.
fn brute_force_hamiltonian(p: &ModelParams, n_fock: usize) -> Mat<C64> {
    let n = p.g.len();
    let id2 = Mat::<C64>::identity(2, 2);
    let idf = Mat::<C64>::identity(n_fock, n_fock);
    let sx = Mat::from_fn(2, 2, |i, j| C64::new(if i != j { 1.0 } else { 0.0 }, 0.0));
    let sz = Mat::from_fn(2, 2, |i, j| C64::new(if i == j { if i == 1 { 1.0 } else { -1.0 } } else { 0.0 }, 0.0));
    let on = |k: usize, op: &Mat<C64>| {
        let mut m = Mat::<C64>::identity(1, 1);
        for q in 0..n {
            m = kron(&m, if q == k { op } else { &id2 });
        }
        m
    };
    let a = Mat::from_fn(n_fock, n_fock, |i, j| C64::new(if j == i + 1 { (j as f64).sqrt() } else { 0.0 }, 0.0));
    let adag = a.adjoint().to_owned();
    let quad = &a + &adag;
    let num = &adag * &a;
    let reg_id = Mat::<C64>::identity(1 << n, 1 << n);
    let mut h = scaled(&kron(&reg_id, &num), p.omega_r);
    let mut x = Mat::<C64>::zeros(1 << n, 1 << n);
    for i in 0..n {
        h += scaled(&kron(&on(i, &sz), &idf), p.omega_q[i] / 2.0);
        x += scaled(&on(i, &sx), p.g[i] / 2.0);
    }
    h += kron(&x, &quad);
    h += scaled(&kron(&(&x * &x), &idf), 1.0 / p.omega_r);
    h
}

fn max_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

fn hold(n: usize, t: f64, g: f64, w: f64) -> ControlSchedule {
    ControlSchedule::new(n, vec![Segment::uniform(n, t, Shape::Hold, (g, g), (w, w))]).unwrap()
}

fn criterion_11_property_suite() {
    let mut r = Report::default();

    // propagator against the dense exponential, dim 2^2 * 100 = 400
    let space = HilbertSpace::new(2, 100).unwrap();
    let ham = ControlledHamiltonian::new(space, 1.0).unwrap();
    let (g, w, t) = (1.2, 0.8, 2.0);
    let psi0 = product_state(&space, 0, &register_state("ud").unwrap()).unwrap();
    let obs = Observer::new(space, register_state("dd").unwrap()).unwrap();
    let traj = schrodinger_evolve(&ham, &hold(2, t, g, w), &psi0, &obs, &IntegratorConfig::default()).unwrap();
    let u = expm_hermitian(&ham.to_operator(&[g; 2], &[w; 2]).unwrap().to_dense(), C64::new(0.0, -t)).unwrap();
    let err = (0..space.dim())
        .map(|i| {
            let e: C64 = (0..space.dim()).map(|j| u[(i, j)] * psi0.amplitudes[j]).sum();
            (e - traj.final_state.amplitudes[i]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    r.check(err < 1e-8, format!("expm err {err:.1e}"));

    // norm drift along a full protocol
    let cfg = preset("fig2b", &["n_qubits=2", "n_fock=30"]);
    let h = run_ground_harvest(&cfg).unwrap();
    let drift = h.trajectory.stats.max_norm_drift;
    r.check(drift < 1e-8, format!("norm drift {drift:.1e}"));

    // trace and positivity under a thermal dissipator
    let small = HilbertSpace::new(1, 8).unwrap();
    let sham = ControlledHamiltonian::new(small, 1.0).unwrap();
    let sched = ControlSchedule::new(1, vec![Segment::uniform(1, 5.0, Shape::Cosine, (0.2, 1.5), (2.0, 0.7))]).unwrap();
    let sobs = Observer::new(small, register_state("d").unwrap()).unwrap();
    let rho0 = FactoredDensity::from_pure(&product_state(&small, 1, &register_state("u").unwrap()).unwrap());
    let diss = DissipatorConfig {
        kappa: 0.2,
        temperature: 0.5,
        basis_dim: small.dim(),
        rate_floor: 0.0,
        ..Default::default()
    };
    let lt = lindblad_evolve(&sham, &sched, &rho0, &sobs, &IntegratorConfig::default(), &diss).unwrap();
    let tr = lt.diagnostics.max_trace_error;
    r.check(tr < 1e-6, format!("trace err {tr:.1e}"));
    let min_eig = lt.final_state.to_dense().eigenvalues().unwrap()[0];
    r.check(min_eig > -1e-10, format!("min eigenvalue {min_eig:.1e}"));

    // operator constructions against brute-force Kronecker products
    let mut worst: f64 = 0.0;
    for n in 1..=3usize {
        for nf in 2..=5usize {
            let p = ModelParams {
                omega_r: 1.3,
                g: (0..n).map(|i| 0.4 + 0.7 * i as f64).collect(),
                omega_q: (0..n).map(|i| 1.1 - 0.3 * i as f64).collect(),
            };
            let sp = HilbertSpace::new(n, nf).unwrap();
            let built = build_full_hamiltonian(&p, &sp).unwrap().to_dense();
            worst = worst.max(max_diff(&built, &brute_force_hamiltonian(&p, nf)));
            let ch = ControlledHamiltonian::new(sp, p.omega_r).unwrap();
            worst = worst.max(max_diff(&ch.to_operator(&p.g, &p.omega_q).unwrap().to_dense(), &built));
        }
    }
    let ladder = annihilator(4).unwrap().to_dense();
    let zz = pauli(0, Axis::Z, 1).unwrap().to_dense();
    worst = worst.max((ladder[(2, 3)] - C64::new(3f64.sqrt(), 0.0)).norm()).max((zz[(1, 1)] - C64::new(1.0, 0.0)).norm());
    r.check(worst < 1e-12, format!("operator mismatch {worst:.1e}"));

    // Gibbs fixed point, dim 20
    let gs = HilbertSpace::new(1, 10).unwrap();
    let gham = ControlledHamiltonian::new(gs, 1.0).unwrap();
    let (g, w, temp) = (0.3, 0.8, 0.6);
    let psi = product_state(&gs, 0, &register_state("u").unwrap()).unwrap();
    let gobs = Observer::new(gs, register_state("d").unwrap()).unwrap();
    let gdiss = DissipatorConfig {
        kappa: 0.3,
        temperature: temp,
        rate_floor: 0.0,
        basis_dim: gs.dim(),
        rebuild_interval: 0.5,
        ..Default::default()
    };
    let gcfg = IntegratorConfig {
        record_stride: 10.0,
        tolerance: 1e-9,
        ..Default::default()
    };
    let gt = lindblad_evolve(&gham, &hold(1, 80.0, g, w), &FactoredDensity::from_pure(&psi), &gobs, &gcfg, &gdiss).unwrap();
    let es = eigensystem(&gham.to_operator(&[g], &[w]).unwrap(), gs.dim()).unwrap();
    let weights: Vec<f64> = es.values.iter().map(|e| (-(e - es.values[0]) / temp).exp()).collect();
    let z: f64 = weights.iter().sum();
    let gibbs = DensityMatrix::mixture(
        &es.vectors.iter().zip(&weights).map(|(v, p)| (p / z, v.clone())).collect::<Vec<_>>(),
    )
    .unwrap();
    let diff = DensityMatrix {
        entries: gt.final_state.to_dense().entries - gibbs.entries,
    };
    let dist: f64 = 0.5 * diff.eigenvalues().unwrap().iter().map(|x| x.abs()).sum::<f64>();
    r.check(dist < 1e-3, format!("Gibbs trace distance {dist:.1e}"));

    r.finish(11, "property suite");
}

fn main() {
    let criteria: [(u32, fn()); 11] = [
        (1, criterion_01_usc_splitting_law),
        (2, criterion_02_ground_state_harvesting),
        (3, criterion_03_robustness_sweep),
        (4, criterion_04_thermal_extraction),
        (5, criterion_05_singlet_protocol),
        (6, criterion_06_protection),
        (7, criterion_07_disorder),
        (8, criterion_08_dissipation),
        (9, criterion_09_flux_landscape),
        (10, criterion_10_constrained_pulse),
        (11, criterion_11_property_suite),
    ];
    // `Report::finish` already printed the line; only unexpected panics need their message
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    for (n, run) in criteria {
        if let Err(payload) = std::panic::catch_unwind(run) {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("panic");
            if !msg.starts_with("criterion ") {
                println!("criterion {n:2} FAIL: {msg}");
            }
            failed.push(n);
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
