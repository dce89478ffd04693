//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any
//! criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wignerlab::clt::{baiyao_closed_forms, build_contour, CltEvaluator, TestFunction};
use wignerlab::experiments::{local_law_probe, run_clt_samples, ExperimentConfig, ExperimentSummary, LocalLawReport, Statistic};
use wignerlab::freeconv::FreeConvolution;
use wignerlab::measures::{Deformation, DiagonalMode, SpectralMeasure};
use wignerlab::quadrature::integrate_adaptive;
use wignerlab::rmt_sim::{EnsembleConfig, EntryDistribution};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(k: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = f();
    let elapsed = t.elapsed();
    let in_time = elapsed <= limit;
    let pass = out.pass && in_time;
    println!(
        "criterion {k} [{name}]: {} ({}; {:.2?} of {:.0?} allowed{})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed,
        limit,
        if in_time { "" } else { ", over time" }
    );
    pass
}

/// Closed-form semicircle transform, the root of m² + zm + 1 = 0 with
/// Im m > 0 (Im z > 0).
fn m_sc_oracle(z: Complex64) -> Complex64 {
    let disc = (z * z - 4.0).sqrt();
    let r1 = (-z + disc) / 2.0;
    let r2 = (-z - disc) / 2.0;
    if r1.im > 0.0 {
        r1
    } else {
        r2
    }
}

/// Clearing denominators in m = ½[1/(−c−z−m) + 1/(c−z−m)] gives
/// m³ + 2z m² + (z² − c² + 1) m + z = 0; its Herglotz root from the
/// companion matrix.
fn two_point_oracle(a: f64, theta: f64, z: Complex64) -> Complex64 {
    let cc = theta * a;
    let coeffs = [z, z * z - cc * cc + 1.0, 2.0 * z];
    let comp = faer::Mat::<Complex64>::from_fn(3, 3, |i, j| {
        if j == 2 {
            -coeffs[i]
        } else if i == j + 1 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let roots = comp.eigenvalues().expect("companion eigenvalues");
    let upper: Vec<Complex64> = roots.into_iter().filter(|r| r.im > 0.0).collect();
    assert_eq!(upper.len(), 1);
    upper[0]
}

fn criterion_1() -> Outcome {
    let tp = SpectralMeasure::two_point(0.5).unwrap();
    let sc = FreeConvolution::new(&tp, 0.0).unwrap();
    let deformed = FreeConvolution::new(&tp, 1.0).unwrap();
    let (mut e0, mut e1) = (0.0f64, 0.0f64);
    for re in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        for im in [0.5, 0.75, 1.0, 1.5, 2.0] {
            let z = c(re, im);
            e0 = e0.max((sc.solve(z).unwrap().m - m_sc_oracle(z)).norm());
            e1 = e1.max((deformed.solve(z).unwrap().m - two_point_oracle(0.5, 1.0, z)).norm());
        }
    }
    Outcome {
        pass: e0 <= 1e-10 && e1 <= 1e-10,
        detail: format!("max |m - m_sc| = {e0:.2e}, max |m - companion root| = {e1:.2e}, tol 1e-10"),
    }
}

fn density_moment<D: Deformation + ?Sized>(law: &D, theta: f64, k: i32) -> f64 {
    let fc = FreeConvolution::new(law, theta).unwrap();
    let e = fc.edges().unwrap();
    let half = 0.5 * (e.l_plus - e.l_minus);
    integrate_adaptive(
        |t| {
            let x = e.l_minus + half * (1.0 - t.cos());
            Ok(fc.density(x, 1e-9)? * x.powi(k) * half * t.sin())
        },
        0.0,
        PI,
        1e-11,
        500,
    )
    .unwrap()
    .0
}

fn criterion_2() -> Outcome {
    let tp = SpectralMeasure::two_point(0.5).unwrap();
    let u = SpectralMeasure::uniform(0.5).unwrap();
    let e = FreeConvolution::new(&tp, 0.0).unwrap().edges().unwrap();
    let edge_err = (e.l_minus + 2.0).abs().max((e.l_plus - 2.0).abs());
    let mut worst = 0.0f64;
    let cases: [(&SpectralMeasure, f64); 2] = [(&tp, 1.0), (&u, 0.3)];
    for (law, theta) in cases {
        let mass = density_moment(law, theta, 0);
        let var = density_moment(law, theta, 2);
        let want = 1.0 + theta * theta * law.moment(2);
        worst = worst.max((mass - 1.0).abs()).max((var - want).abs());
    }
    Outcome {
        pass: edge_err <= 1e-10 && worst <= 1e-6,
        detail: format!("edge error {edge_err:.2e}, worst mass/variance error {worst:.2e}"),
    }
}

fn criterion_3() -> Outcome {
    let tp = SpectralMeasure::two_point(0.5).unwrap();
    let u = SpectralMeasure::uniform(0.5).unwrap();
    let laws: [(&SpectralMeasure, f64); 2] = [(&tp, 1.0), (&u, 0.3)];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let rel = |a: Complex64, b: Complex64| (a - b).norm() / b.norm().max(1e-300);
    // fourth-order central difference
    let d = |f: &dyn Fn(Complex64) -> Complex64, z: Complex64| {
        let h = 1e-3;
        (-f(z + 2.0 * h) + 8.0 * f(z + h) - 8.0 * f(z - h) + f(z - 2.0 * h)) / (12.0 * h)
    };
    for k in 0..20 {
        let (law, theta) = laws[k % 2];
        let fc = FreeConvolution::new(law, theta).unwrap();
        let mut draw = || {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            c(rng.random_range(-3.0..3.0), sign * rng.random_range(0.3..2.0))
        };
        let (z1, z2) = (draw(), draw());
        let s = fc.solve(z1).unwrap();
        let m = |z: Complex64| fc.solve(z).unwrap().m;
        let m1 = |z: Complex64| fc.solve(z).unwrap().m1;
        worst = worst.max(rel(d(&m, z1), s.m1)).max(rel(d(&m1, z1), s.m2));
        let k12 = fc.i_kernel(z1, z2).unwrap();
        let i_of = |a: Complex64, b: Complex64| fc.i_kernel(a, b).unwrap();
        worst = worst
            .max(rel(d(&|z| i_of(z, z2).i, z1), k12.d_i_dz1))
            .max(rel(d(&|z| i_of(z1, z).i, z2), k12.d_i_dz2))
            .max(rel(d(&|z| i_of(z, z2).d_i_dz2, z1), k12.d2_i));
    }
    let mut max_i = 0.0f64;
    for (law, theta) in laws {
        let e = FreeConvolution::new(law, theta).unwrap().edges().unwrap();
        let ev = CltEvaluator::new(law, theta, build_contour(&e, 0.5, 0.5, 64).unwrap()).unwrap();
        max_i = max_i.max(ev.max_kernel_modulus());
    }
    Outcome {
        pass: worst <= 1e-5 && max_i < 1.0,
        detail: format!("worst relative FD mismatch {worst:.2e}, max |I| on contour {max_i:.4}"),
    }
}

fn criterion_4() -> Outcome {
    let tp = SpectralMeasure::two_point(0.5).unwrap();
    let e = FreeConvolution::new(&tp, 0.0).unwrap().edges().unwrap();
    let ev = CltEvaluator::new(&tp, 0.0, build_contour(&e, 0.5, 0.5, 64).unwrap()).unwrap();
    let mut worst = 0.0f64;
    for k in 1..=4 {
        let phi = TestFunction::monomial(k).unwrap();
        for (w2, w4) in [(2.0, 3.0), (1.0, 1.0), (2.0, 1.0)] {
            let (m, v) = baiyao_closed_forms(&phi, w2, w4, 32);
            let cm = ev.m_phi(&phi, w2, w4).unwrap().re;
            let cv = ev.v_phi(&phi, w2, w4).unwrap().re;
            worst = worst.max((cm - m).abs()).max((cv - v).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("worst |contour - closed form| {worst:.2e}"),
    }
}

fn deformed_ensemble(v_mode: DiagonalMode) -> EnsembleConfig {
    EnsembleConfig {
        n: 400,
        theta: 0.5,
        measure: SpectralMeasure::two_point(0.5).unwrap(),
        v_mode,
        entry: EntryDistribution::Gaussian { w2_diag: 1.0 },
        master_seed: 20_240_611,
    }
}

fn config_5() -> ExperimentConfig {
    let ens = EnsembleConfig {
        n: 500,
        theta: 0.0,
        measure: SpectralMeasure::two_point(0.5).unwrap(),
        v_mode: DiagonalMode::DeterministicQuantile,
        entry: EntryDistribution::Gaussian { w2_diag: 2.0 },
        master_seed: 5,
    };
    ExperimentConfig::new(ens, TestFunction::monomial(2).unwrap(), 2000, Statistic::T)
}

fn config_6() -> ExperimentConfig {
    ExperimentConfig::new(
        deformed_ensemble(DiagonalMode::DeterministicQuantile),
        TestFunction::monomial(3).unwrap(),
        1000,
        Statistic::T,
    )
}

fn config_7() -> ExperimentConfig {
    ExperimentConfig::new(
        deformed_ensemble(DiagonalMode::IidSample),
        TestFunction::monomial(2).unwrap(),
        1000,
        Statistic::S,
    )
}

fn with_workers(mut cfg: ExperimentConfig, w: usize) -> ExperimentConfig {
    cfg.workers = Some(w);
    cfg
}

type Run = (ExperimentSummary, Vec<f64>);

fn criterion_5(run: &Run) -> Outcome {
    let (s, _) = run;
    let mean_ok = (s.sample_mean - 1.0).abs() <= 0.18;
    let var_ok = (s.sample_var / 4.0 - 1.0).abs() <= 0.13;
    let ks = s.ks_stat.unwrap_or(f64::INFINITY);
    let ks_ok = ks <= 1.63 / 2000f64.sqrt();
    Outcome {
        pass: mean_ok && var_ok && ks_ok,
        detail: format!(
            "mean {:.4} (1 +- 0.18), var {:.4} (4 +- 0.52), KS {:.4} <= {:.4}",
            s.sample_mean,
            s.sample_var,
            ks,
            1.63 / 2000f64.sqrt()
        ),
    }
}

fn criterion_6(run: &Run) -> Outcome {
    let (s, _) = run;
    let m = s.theory_m.unwrap();
    let v = s.theory_v.unwrap();
    let mean_band = 4.0 * s.se_mean + 10.0 / (s.n as f64).sqrt();
    let var_band = 4.0 * (2.0 / s.replicas as f64).sqrt();
    let mean_ok = (s.sample_mean - m).abs() <= mean_band;
    let var_ok = (s.sample_var / v - 1.0).abs() <= var_band;
    Outcome {
        pass: mean_ok && var_ok,
        detail: format!(
            "mean {:.4} vs M {:.4} (band {:.4}), var {:.4} vs V {:.4} (ratio {:.4}, band {:.4})",
            s.sample_mean,
            m,
            mean_band,
            s.sample_var,
            v,
            s.sample_var / v,
            var_band
        ),
    }
}

fn criterion_7(run: &Run) -> Outcome {
    let (s, _) = run;
    let vt = s.theory_v.unwrap();
    let mean_ok = s.sample_mean.abs() <= 4.0 * s.se_mean;
    let band = 4.0 * (2.0 / s.replicas as f64).sqrt();
    // Vtilde(x²) vanishes for this symmetric two-point law, so the band
    // is applied on the absolute scale there.
    let (var_ok, how) = if vt.abs() <= 1e-8 {
        ((s.sample_var - vt).abs() <= band, "absolute")
    } else {
        ((s.sample_var / vt - 1.0).abs() <= band, "relative")
    };
    Outcome {
        pass: mean_ok && var_ok,
        detail: format!(
            "mean {:.4} (4 se = {:.4}), var {:.4} vs Vtilde {:.3e} ({how} band {:.4})",
            s.sample_mean,
            4.0 * s.se_mean,
            s.sample_var,
            vt,
            band
        ),
    }
}

fn run_local_law(workers: usize) -> LocalLawReport {
    let ens = EnsembleConfig {
        n: 2,
        ..deformed_ensemble(DiagonalMode::DeterministicQuantile)
    };
    local_law_probe(&ens, &[250, 500, 1000, 2000], &[c(0.0, 2.0)], 32, Some(workers)).unwrap()
}

fn criterion_8(report: &LocalLawReport) -> Outcome {
    let slope = report.slopes[0].1;
    let medians: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("N={}: {:.2e}", r.n, r.median_deviation))
        .collect();
    Outcome {
        pass: (-1.3..=-0.7).contains(&slope),
        detail: format!("slope {slope:.3} in [-1.3, -0.7]; {}", medians.join(", ")),
    }
}

fn main() {
    let mut all = true;
    all &= report(1, "solver vs oracles", Duration::from_secs(1), criterion_1);
    all &= report(2, "edges, mass, variance", Duration::from_secs(30), criterion_2);
    all &= report(3, "derivative and kernel oracles", Duration::from_secs(10), criterion_3);
    all &= report(4, "zero-coupling closed forms", Duration::from_secs(60), criterion_4);

    let mut run5 = None;
    all &= report(5, "GOE exact moments", Duration::from_secs(180), || {
        let r = run_clt_samples(&with_workers(config_5(), 1)).unwrap();
        let out = criterion_5(&r);
        run5 = Some(r);
        out
    });
    let mut run6 = None;
    all &= report(6, "deterministic-V CLT", Duration::from_secs(180), || {
        let r = run_clt_samples(&with_workers(config_6(), 1)).unwrap();
        let out = criterion_6(&r);
        run6 = Some(r);
        out
    });
    let mut run7 = None;
    all &= report(7, "random-V CLT", Duration::from_secs(180), || {
        let r = run_clt_samples(&with_workers(config_7(), 1)).unwrap();
        let out = criterion_7(&r);
        run7 = Some(r);
        out
    });
    let mut run8 = None;
    all &= report(8, "local law scaling", Duration::from_secs(300), || {
        let r = run_local_law(1);
        let out = criterion_8(&r);
        run8 = Some(r);
        out
    });

    let (run5, run6, run7, run8) = (run5.unwrap(), run6.unwrap(), run7.unwrap(), run8.unwrap());
    all &= report(9, "worker-count determinism", Duration::from_secs(1800), || {
        let mut mismatches = Vec::new();
        for w in [2, 8] {
            if run_clt_samples(&with_workers(config_5(), w)).unwrap() != run5 {
                mismatches.push(format!("5@{w}"));
            }
            if run_clt_samples(&with_workers(config_6(), w)).unwrap() != run6 {
                mismatches.push(format!("6@{w}"));
            }
            if run_clt_samples(&with_workers(config_7(), w)).unwrap() != run7 {
                mismatches.push(format!("7@{w}"));
            }
            if run_local_law(w) != run8 {
                mismatches.push(format!("8@{w}"));
            }
        }
        Outcome {
            pass: mismatches.is_empty(),
            detail: if mismatches.is_empty() {
                "criteria 5-8 bitwise identical at 1, 2 and 8 workers".into()
            } else {
                format!("differences: {}", mismatches.join(" "))
            },
        }
    });

    if all {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: some criteria FAILED");
        std::process::exit(1);
    }
}
