//! Acceptance suite, run without the libtest harness so that every
//! criterion prints exactly one `PASS`/`FAIL` line.
//!
//! A few sub-checks are known to be unattainable as stated (see
//! `KNOWN_GAPS`). They are still computed and reported as `FAIL`; the
//! binary only exits non-zero on a failure not listed there.

use ekit::core::{calibrate_e_to_p, CalibratorSpec};
use ekit::multitest::{bhy, bhy_calibrator, closed_ebh, ebh, ebh_minimally_adaptive};
use ekit::risk::{e_stat, es_beta, EStatSpec, ForecastRecord};
use ekit::seed::rng_for;
use ekit::sim::{self, Dependence, EbhSimConfig, LossFamily, NullProcess};
use ekit::thresholds::{r_gamma, t_alpha, ShapeClass};
use ekit::universal;
use ekit::{EValue, PValue};
use rand::Rng;
use std::time::{Duration, Instant};

const SEED: u64 = 20_240_601;

/// `(criterion, check)` pairs that cannot be met as stated.
const KNOWN_GAPS: &[(u32, &str)] = &[
    // The exact SPRT rejection probability at p = 0.55 is 0.4959; the stated
    // 0.52 matches the fixed-sample test instead.
    (1, "power p=0.55"),
    // The log-optimal growth for e uniform on {0, 4} is log(4/3) / 2.
    (6, "growth"),
];

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    /// Prints the criterion line and returns the unexpected failures.
    fn finish(self, id: u32, title: &str) -> Vec<String> {
        let failed: Vec<&Check> = self.checks.iter().filter(|c| !c.pass).collect();
        let status = if failed.is_empty() { "PASS" } else { "FAIL" };
        let mut line = format!("criterion {id:>2} {status} {title} ({} checks", self.checks.len());
        if failed.is_empty() {
            line.push(')');
        } else {
            line.push_str("; failed: ");
            let parts: Vec<String> = failed.iter().map(|c| format!("{} [{}]", c.name, c.detail)).collect();
            line.push_str(&parts.join(", "));
            line.push(')');
        }
        println!("{line}");
        failed
            .iter()
            .filter(|c| !KNOWN_GAPS.iter().any(|(i, n)| *i == id && *n == c.name))
            .map(|c| format!("criterion {id}: {} [{}]", c.name, c.detail))
            .collect()
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn runtime_check(r: &mut Report, start: Instant, budget: Duration) {
    let el = start.elapsed();
    r.check("runtime", el < budget, format!("{:.1}s of {:.0}s", el.as_secs_f64(), budget.as_secs_f64()));
}

fn criterion_01_sprt_table() -> Vec<String> {
    let start = Instant::now();
    let mut r = Report::default();
    let rows = sim::wald_rows(10_000, SEED).unwrap();
    let times = [137.7, 234.5, 139.3, 76.1];
    let powers = [0.04, 0.52, 0.96, 1.00];
    for ((row, t), p) in rows.iter().zip(times).zip(powers) {
        r.check(
            format!("stopping time p={}", row.p),
            within(row.stopping_time.mean, t, 2.0),
            format!("{:.2} vs {t}", row.stopping_time.mean),
        );
        r.check(format!("power p={}", row.p), within(row.power.mean, p, 0.02), format!("{:.4} vs {p}", row.power.mean));
    }
    runtime_check(&mut r, start, Duration::from_secs(30));
    r.finish(1, "SPRT versus fixed-sample LRT")
}

/// Worst case of `P(E >= t)` over decreasing densities with mean at most one,
/// searched over two-component mixtures of uniforms `U[0, b]` on a grid.
fn decreasing_density_oracle(t: f64) -> f64 {
    let bs: Vec<f64> = (1..=4000).map(|i| 0.005 * i as f64 * t).collect();
    let tail = |b: f64| (1.0 - t / b).max(0.0);
    let mut best = 0.0f64;
    for (i, &b1) in bs.iter().enumerate() {
        // A single component, padded with mass at zero to meet the mean.
        let w = (2.0 / b1).min(1.0);
        best = best.max(w * tail(b1));
        for &b2 in bs.iter().skip(i + 1).step_by(7) {
            // Mean constraint w b1 / 2 + (1 - w) b2 / 2 = 1 when it binds.
            if b1 < 2.0 && b2 > 2.0 {
                let w = (b2 - 2.0) / (b2 - b1);
                best = best.max(w * tail(b1) + (1.0 - w) * tail(b2));
            }
        }
    }
    best
}

fn criterion_02_improved_thresholds() -> Vec<String> {
    let start = Instant::now();
    let mut r = Report::default();
    let alphas = [0.001, 0.01, 0.02, 0.05, 0.1, 0.2];
    let table: [(ShapeClass, [f64; 6]); 6] = [
        (ShapeClass::E0, [1000.0, 100.0, 50.0, 20.0, 10.0, 5.0]),
        (ShapeClass::D, [500.0, 50.0, 25.0, 10.0, 5.0, 2.5]),
        (ShapeClass::DGt1, [500.0, 50.01, 25.01, 10.03, 5.05, 2.60]),
        (ShapeClass::LD, [367.88, 36.82, 18.45, 7.49, 3.93, 2.25]),
        (ShapeClass::LDGt0, [368.25, 37.16, 18.77, 7.73, 4.07, 2.25]),
        (ShapeClass::LN, [118.0, 14.97, 8.24, 3.87, 2.27, 1.42]),
    ];
    let twins = [(ShapeClass::E0, ShapeClass::LS), (ShapeClass::D, ShapeClass::U), (ShapeClass::LD, ShapeClass::LUS)];
    for (class, row) in table {
        for (a, want) in alphas.iter().zip(row) {
            // Entries printed without decimals only pin the integer part.
            let tol = if want >= 100.0 { 0.5 } else { 0.01 };
            let got = t_alpha(class, *a).unwrap();
            r.check(format!("{} alpha={a}", class.name()), within(got, want, tol), format!("{got:.4} vs {want}"));
            if let Some((_, twin)) = twins.iter().find(|(c, _)| *c == class) {
                let g2 = t_alpha(*twin, *a).unwrap();
                r.check(format!("{} alpha={a}", twin.name()), within(g2, want, tol), format!("{g2:.4} vs {want}"));
            }
        }
    }
    for gamma in [0.05, 0.1, 0.2] {
        let oracle = decreasing_density_oracle(1.0 / gamma);
        let closed = r_gamma(ShapeClass::D, gamma).unwrap().value;
        r.check(format!("oracle gamma={gamma}"), oracle <= closed + 1e-3, format!("{oracle:.6} vs {closed:.6}"));
    }
    runtime_check(&mut r, start, Duration::from_secs(60));
    r.finish(2, "improved thresholds")
}

/// Largest `R` such that every `A` meeting `R` has
/// `mean_A(e) >= |A ∩ R| / (alpha |R|)`, by enumerating both sets.
fn closed_ebh_oracle(es: &[f64], alpha: f64) -> usize {
    let k = es.len();
    let full = 1u32 << k;
    let means: Vec<f64> = (0..full)
        .map(|a| {
            let n = a.count_ones();
            if n == 0 {
                0.0
            } else {
                (0..k).filter(|i| a >> i & 1 == 1).map(|i| es[i]).sum::<f64>() / n as f64
            }
        })
        .collect();
    let mut best = 0;
    for rset in 1..full {
        let rs = rset.count_ones() as usize;
        if rs <= best {
            continue;
        }
        let ok = (1..full).all(|a| {
            let m = (a & rset).count_ones() as f64;
            m == 0.0 || means[a as usize] >= m / (alpha * rs as f64) * (1.0 - 1e-12)
        });
        if ok {
            best = rs;
        }
    }
    best
}

fn criterion_03_closed_ebh() -> Vec<String> {
    let start = Instant::now();
    let mut r = Report::default();
    let es = [60.0, 39.0, 11.0];
    let closed = closed_ebh(&es, 0.05).unwrap();
    let minad = ebh_minimally_adaptive(&es, 0.05).unwrap();
    r.check("worked example closed", closed.rejected.len() == 3, format!("{}", closed.rejected.len()));
    r.check("worked example minadapt", minad.rejected.len() == 2, format!("{}", minad.rejected.len()));

    let mut rng = rng_for(SEED, "acceptance/closed-chain", 0);
    let mut chain_bad = 0;
    for _ in 0..10_000 {
        let k = rng.random_range(2..=30);
        let es: Vec<f64> = (0..k)
            .map(|_| if rng.random_bool(0.3) { rng.random_range(0.0..120.0) } else { rng.random_range(0.0..3.0) })
            .collect();
        let alpha = [0.05, 0.1, 0.2][rng.random_range(0..3)];
        let c = closed_ebh(&es, alpha).unwrap();
        let m = ebh_minimally_adaptive(&es, alpha).unwrap();
        let p = ebh(&es, alpha).unwrap();
        if !(c.is_superset_of(&m) && m.is_superset_of(&p)) {
            chain_bad += 1;
        }
    }
    r.check("inclusion chain", chain_bad == 0, format!("{chain_bad} violations"));

    let mut rng = rng_for(SEED, "acceptance/closed-oracle", 0);
    let mut mismatch = 0;
    for _ in 0..200 {
        let k = rng.random_range(1..=12);
        let es: Vec<f64> = (0..k)
            .map(|_| if rng.random_bool(0.4) { rng.random_range(5.0..80.0) } else { rng.random_range(0.0..2.0) })
            .collect();
        if closed_ebh(&es, 0.05).unwrap().rejected.len() != closed_ebh_oracle(&es, 0.05) {
            mismatch += 1;
        }
    }
    r.check("exhaustive oracle", mismatch == 0, format!("{mismatch} of 200 differ"));
    runtime_check(&mut r, start, Duration::from_secs(120));
    r.finish(3, "closed e-BH")
}

fn criterion_04_ebh_fdr_dependence() -> Vec<String> {
    let mut r = Report::default();
    let scenarios = [
        ("independent", Dependence::Independent),
        ("toeplitz", Dependence::Toeplitz { rho: 0.8 }),
        ("negative", Dependence::NegativeEquicorrelated { rho: 0.8 }),
        ("duplicated", Dependence::Duplicated),
    ];
    for (name, dep) in scenarios {
        for mu in [1.0, 2.0, 3.0] {
            let res = sim::ebh_simulation(&EbhSimConfig::new(mu, dep), 500, SEED).unwrap();
            let bound = res.fdr_bound;
            for (proc_name, st) in [("e-BH", res.plain), ("Ge-BH", res.ge), ("De-BH", res.de), ("Ue-BH", res.ue)] {
                r.check(
                    format!("{proc_name} {name} mu={mu}"),
                    st.fdr.at_most(bound),
                    format!("{:.4} (se {:.4}) vs {bound}", st.fdr.mean, st.fdr.se),
                );
            }
            r.check(format!("nesting {name} mu={mu}"), res.nesting_violations == 0, format!("{}", res.nesting_violations));
        }
    }
    r.finish(4, "e-BH FDR under dependence")
}

fn criterion_05_ville_optional_stopping() -> Vec<String> {
    let mut r = Report::default();
    let alpha = 0.05;
    for process in NullProcess::ALL {
        let rep = sim::ville_battery(process, 10_000, 200, alpha, SEED).unwrap();
        r.check(
            format!("{process:?} crossing"),
            rep.crossing.at_most(alpha),
            format!("{:.4} (se {:.4})", rep.crossing.mean, rep.crossing.se),
        );
        for (rule, w) in sim::STOPPING_RULES.iter().zip(&rep.stopped_wealth) {
            r.check(format!("{process:?} {rule}"), w.at_most(1.0), format!("{:.4} (se {:.4})", w.mean, w.se));
        }
    }
    r.finish(5, "Ville and optional stopping")
}

fn criterion_06_adaptive_growth() -> Vec<String> {
    let mut r = Report::default();
    let checkpoints: Vec<usize> = (2000..=10_000).step_by(1000).collect();
    let rep = sim::adaptive_growth_study(100, 10_000, 0.5, &checkpoints, SEED).unwrap();
    for (t, l) in &rep.lambda_median {
        r.check(format!("lambda t={t}"), (0.30..=0.36).contains(l), format!("{l:.4}"));
    }
    let target = (4.0f64 / 3.0).ln();
    r.check(
        "growth",
        within(rep.trimmed_growth, target, 0.02),
        format!("{:.4} vs {target:.4}; optimum {:.4}", rep.trimmed_growth, rep.optimal_growth),
    );
    r.finish(6, "empirically adaptive betting")
}

fn criterion_07_universal_inference() -> Vec<String> {
    let mut r = Report::default();
    let (g, m) = sim::ui_null_means(100, 1000, SEED).unwrap();
    r.check("gaussian null mean", g.at_most(1.0), format!("{:.4} (se {:.4})", g.mean, g.se));
    r.check("mixture null mean", m.at_most(1.0), format!("{:.4} (se {:.4})", m.mean, m.se));

    let mut worst = 0.0f64;
    for d in 1..=50 {
        for alpha in [0.2, 0.1, 0.05, 0.01, 0.001, 1e-6] {
            let l = (1.0f64 / alpha).ln();
            let df = d as f64;
            let direct = 1.0 - ((4.0 * df * df + 8.0 * df * l).sqrt() - 2.0 * df) / (4.0 * l);
            worst = worst.max((universal::optimal_split_fraction(d, alpha).unwrap() - direct).abs());
        }
    }
    r.check("closed form", worst <= 1e-12, format!("max diff {worst:e}"));
    let big_d = universal::optimal_split_fraction(1_000_000, 0.05).unwrap();
    r.check("limit d", within(big_d, 0.5, 1e-3), format!("{big_d:.6}"));
    let small_a = universal::optimal_split_fraction(1, 1e-300).unwrap();
    r.check("limit alpha", small_a > 0.95 && small_a < 1.0, format!("{small_a:.6}"));
    let mut prev = 0.0;
    let mut mono = true;
    for a in [0.2, 1e-2, 1e-5, 1e-20, 1e-100, 1e-300] {
        let p = universal::optimal_split_fraction(1, a).unwrap();
        mono &= p > prev;
        prev = p;
    }
    r.check("monotone in alpha", mono, "");

    let n = 1000;
    for alpha in [0.1, 0.05] {
        let est = sim::split_radius_mc(n, 2, 0.5, alpha, 1000, SEED).unwrap();
        let closed = 4.0 / n as f64 * (1.0f64 / alpha).ln() + 8.0 / n as f64;
        r.check(format!("radius alpha={alpha}"), (est.mean / closed - 1.0).abs() <= 0.1, format!("{:.5} vs {closed:.5}", est.mean));
    }

    let mus: Vec<f64> = (0..5).map(|i| 0.25 * i as f64).collect();
    let rows = sim::mixture_power_study(100, 10, 40, &mus, 0.05, SEED).unwrap();
    for row in rows {
        r.check(
            format!("power mu={}", row.mu),
            row.emi_sui >= row.ui && row.dominance_violations == 0,
            format!("emi {:.3} split {:.3}", row.emi_sui, row.ui),
        );
    }
    r.finish(7, "universal inference")
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rule(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn go(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = rule(f, a, fa, m, fm);
        let (rm, frm, right) = rule(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        go(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) + go(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = rule(f, a, fa, b, fb);
    go(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// `int_0^1 f(p) dp`, substituting `p = exp(-s)` near zero and splitting at
/// the given discontinuities.
fn calibrator_integral(c: &CalibratorSpec, breaks: &[f64]) -> f64 {
    let s_max: f64 = 700.0;
    let lo = (-s_max).exp();
    let near_zero = |s: f64| c.eval((-s).exp()) * (-s).exp();
    let mut pts = vec![lo];
    pts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < 1.0));
    // Dyadic cuts in s keep the coarse first Simpson pass honest.
    pts.extend((0..10).map(|i| (-(2.0f64).powi(i)).exp()));
    pts.sort_by(f64::total_cmp);
    pts.push(1.0);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // Integrate each piece in s = -log p, which tames the singular ones.
        total += simpson(&near_zero, -b.ln(), -a.ln(), 1e-12);
    }
    // Below exp(-700) only the mixture calibrator, which behaves like
    // 1 / (p log(p)^2), leaves a visible tail: 1 / s_max.
    total + if matches!(c, CalibratorSpec::Mixture) { 1.0 / s_max } else { 0.0 }
}

fn criterion_08_calibration_identities() -> Vec<String> {
    let mut r = Report::default();
    let (k, alpha) = (10usize, 0.05);
    let ell: f64 = (1..=k).map(|j| 1.0 / j as f64).sum();
    let bhy_breaks: Vec<f64> = (1..=k).map(|j| j as f64 * alpha / (k as f64 * ell)).collect();
    let cals: Vec<(CalibratorSpec, Vec<f64>)> = vec![
        (CalibratorSpec::Power { kappa: 0.5 }, vec![]),
        (CalibratorSpec::Power { kappa: 0.1 }, vec![]),
        (CalibratorSpec::Power { kappa: 0.9 }, vec![]),
        (CalibratorSpec::Mixture, vec![]),
        (CalibratorSpec::Linear2, vec![]),
        (CalibratorSpec::Sqrtinv, vec![]),
        (CalibratorSpec::Neglog, vec![]),
        (CalibratorSpec::AllOrNothing { alpha }, vec![alpha]),
        (CalibratorSpec::BhyTruncation { k, alpha }, bhy_breaks),
    ];
    for (c, breaks) in &cals {
        let v = calibrator_integral(c, breaks);
        r.check(format!("integral {c:?}"), within(v, 1.0, 1e-6), format!("{v:.9}"));
    }
    let e = ekit::core::calibrate_p_to_e(PValue::new(0.01).unwrap(), &CalibratorSpec::Sqrtinv).unwrap().get();
    r.check("p to e", within(e, 9.0, 1e-12), format!("{e}"));
    let back = calibrate_e_to_p(EValue::new(e).unwrap()).get();
    r.check("e to p", within(back, 1.0 / 9.0, 1e-12), format!("{back}"));

    let mut rng = rng_for(SEED, "acceptance/bhy", 0);
    let mut differ = 0;
    for _ in 0..100 {
        let k = rng.random_range(1..=60);
        let alpha = [0.05, 0.1, 0.2][rng.random_range(0..3)];
        let ps: Vec<f64> = (0..k)
            .map(|_| if rng.random_bool(0.3) { rng.random_range(0.0..0.002) } else { rng.random::<f64>() })
            .collect();
        let cal = bhy_calibrator(k, alpha);
        let es: Vec<f64> = ps.iter().map(|p| cal.eval(*p)).collect();
        if bhy(&ps, alpha).unwrap().rejected != ebh(&es, alpha).unwrap().rejected {
            differ += 1;
        }
    }
    r.check("BHY equals calibrated e-BH", differ == 0, format!("{differ} of 100 differ"));
    r.finish(8, "calibration identities")
}

fn criterion_09_majority_vote() -> Vec<String> {
    let mut r = Report::default();
    let alpha = 0.1;
    let cov = sim::mv_coverage_sim(10_000, alpha, SEED).unwrap();
    let fmt = |e: &sim::Estimate| format!("{:.4} (se {:.4})", e.mean, e.se);
    r.check("C_M", cov.majority.at_least(1.0 - 2.0 * alpha), fmt(&cov.majority));
    r.check("C_U", cov.randomized_u.at_least(1.0 - alpha), fmt(&cov.randomized_u));
    r.check("weighted", cov.weighted.at_least(cov.weighted_bound), format!("{} vs {:.3}", fmt(&cov.weighted), cov.weighted_bound));
    r.check("lattice", cov.lattice_violations == 0, format!("{} violations", cov.lattice_violations));
    let mm = sim::momom_sim(210, 21, 70, 2000, SEED).unwrap();
    for (t, exceed) in &mm.deviation {
        let within_bound = 1.0 - exceed.mean;
        let bound = 1.0 - 4.0 * (-t).exp();
        r.check(
            format!("MoMoM t={t}"),
            within_bound >= bound - 3.0 * exceed.se,
            format!("{within_bound:.4} vs {bound:.4}"),
        );
    }
    r.finish(9, "majority vote")
}

fn criterion_10_risk_backtests() -> Vec<String> {
    let mut r = Report::default();
    for fam in LossFamily::ALL {
        for (name, spec, truth, z, low) in sim::backtest_cases(fam) {
            let null = sim::estat_mean(fam, &spec, truth, z, 200_000, SEED).unwrap();
            let alt = sim::estat_mean(fam, &spec, low, z, 200_000, SEED).unwrap();
            r.check(format!("{fam:?}/{name} null"), null.at_most(1.0), format!("{:.4} (se {:.4})", null.mean, null.se));
            r.check(format!("{fam:?}/{name} power"), alt.mean > 1.0, format!("{:.4}", alt.mean));
        }
    }

    // ES as min_z { z + E[(X - z)+] / (1 - beta) }, attained at a sample point.
    let mut rng = rng_for(SEED, "acceptance/es-min", 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=300);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let beta = rng.random_range(0.5..0.99);
        let min = xs
            .iter()
            .map(|z| z + xs.iter().map(|x| (x - z).max(0.0)).sum::<f64>() / n as f64 / (1.0 - beta))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((min - es_beta(&xs, beta).unwrap()).abs());
    }
    r.check("ES minimisation identity", worst <= 1e-9, format!("max diff {worst:e}"));

    let spec = EStatSpec::EsVar { beta: 0.9 };
    let rec = |x: f64, r: f64, z: f64| ForecastRecord { t: 0, x, r, z: Some(z) };
    let zero_zero = e_stat(&rec(1.0, 1.0, 1.0), &spec).unwrap().get();
    let pos_zero = e_stat(&rec(2.0, 1.0, 1.0), &spec).unwrap().get();
    r.check("es_var 0/0", zero_zero == 1.0, format!("{zero_zero}"));
    r.check("es_var 1/0", pos_zero == f64::INFINITY, format!("{pos_zero}"));

    let null = sim::es_backtest_rejections(200, 500, 1.0, 0.05, SEED).unwrap();
    r.check("sequential null", null.at_most(0.05), format!("{:.4}", null.mean));
    r.finish(10, "risk backtests")
}

fn main() {
    let criteria: [fn() -> Vec<String>; 10] = [
        criterion_01_sprt_table,
        criterion_02_improved_thresholds,
        criterion_03_closed_ebh,
        criterion_04_ebh_fdr_dependence,
        criterion_05_ville_optional_stopping,
        criterion_06_adaptive_growth,
        criterion_07_universal_inference,
        criterion_08_calibration_identities,
        criterion_09_majority_vote,
        criterion_10_risk_backtests,
    ];
    let unexpected: Vec<String> = criteria.iter().flat_map(|c| c()).collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures:");
        for u in &unexpected {
            eprintln!("  {u}");
        }
        std::process::exit(1);
    }
}
