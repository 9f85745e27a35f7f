//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

use std::sync::Mutex;
use std::time::Instant;

use pulsedephase::analysis::{
    find_peaks, pulses_to_cover, sweep_tau_s, SweepResult, SweepSpec, Window,
};
use pulsedephase::cumulant::{s_exponential, s_linear_boson, Cumulant, CumulantEngine, FnCumulant};
use pulsedephase::models::{linear_spectrum, quadratic_spectrum};
use pulsedephase::pulse::{
    coefficients, filter_oracle, intensity_curve, log_intensity, log_intensity_closed_exp,
    log_intensity_within, IrregularTrain, PulseTrain, TimeArg,
};
use pulsedephase::{
    CaldeiraLeggettDensity, ExponentialCorrelation, GaussianCouplingDensity, QuadraticSpinBoson,
    QuadratureConfig, ReservoirModel, SpectrumGrid, ThermalConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest `ln I` accepted as "≤ 0": rounding in the cancelling series.
const LN_I_NOISE: f64 = 1e-12;

/// Every `(label, t, ln I)` computed by the criteria, checked by the bounds suite.
static LOG_INTENSITIES: Mutex<Vec<(&'static str, f64, f64)>> = Mutex::new(Vec::new());
/// Every `(label, t, S)` computed by the criteria.
static CUMULANTS: Mutex<Vec<(&'static str, f64, f64)>> = Mutex::new(Vec::new());

fn record_li(label: &'static str, t: f64, li: f64) {
    LOG_INTENSITIES.lock().unwrap().push((label, t, li));
}

fn record_s(label: &'static str, t: f64, s: f64) {
    CUMULANTS.lock().unwrap().push((label, t, s));
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn reference_quadratic_model() -> ReservoirModel {
    ReservoirModel::Quadratic(QuadraticSpinBoson {
        density: GaussianCouplingDensity::from_strength(1.0 / 40.0, 0.4).unwrap(),
        thermal: ThermalConfig::new(1.0).unwrap(),
        quad: QuadratureConfig::default(),
    })
}

fn exp_t2(tau_c: f64) -> ExponentialCorrelation {
    ExponentialCorrelation::t2_normalized(tau_c).unwrap()
}

fn golden_coefficients() -> Outcome {
    let start = Instant::now();
    let c1 = coefficients(1);
    let c2 = coefficients(2);
    let elapsed = start.elapsed();
    let want1 = [
        (TimeArg::Fixed(1), 2),
        (TimeArg::Relative(1), 2),
        (TimeArg::Relative(0), -1),
    ];
    let want2 = [
        (TimeArg::Fixed(1), 6),
        (TimeArg::Fixed(2), -2),
        (TimeArg::Relative(1), -2),
        (TimeArg::Relative(2), 2),
        (TimeArg::Relative(0), 1),
    ];
    let ok1 = c1.len() == want1.len() && want1.iter().all(|&(a, c)| c1.get(a) == c);
    let ok2 = c2.len() == want2.len() && want2.iter().all(|&(a, c)| c2.get(a) == c);
    let fast = elapsed.as_secs_f64() < 1e-3;
    outcome(
        ok1 && ok2 && fast,
        format!(
            "N=1: {c1}; N=2: {c2}; {:.1} µs",
            elapsed.as_secs_f64() * 1e6
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let m = ExponentialCorrelation::new(1.0, 1.0).unwrap();
    let s = FnCumulant(move |t| s_exponential(t, &m));
    let quad = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for n in 0..=6usize {
        for _ in 0..20 {
            let tau: f64 = rng.gen_range(0.05..1.0);
            let t = n as f64 * tau + rng.gen_range(0.01..2.0);
            let train = PulseTrain::new(n, tau).unwrap();
            let series = log_intensity(t, &train, &s).unwrap();
            let oracle = filter_oracle(
                t,
                &IrregularTrain::from(&train),
                &|u| Ok(m.correlation(u)),
                &quad,
            )
            .unwrap();
            record_li("oracle", t, series);
            let tol = 1e-6 * series.abs() + 1e-10;
            let err = (series - oracle).abs();
            worst = worst.max(err / tol);
            if err > tol {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!("140 pairs, worst error/tolerance {worst:.2e}, failures {failures}"),
    )
}

fn closed_form() -> Outcome {
    let m = exp_t2(0.02);
    let s = FnCumulant(move |t| s_exponential(t, &m));
    let mut worst: f64 = 0.0;
    for n in [2usize, 4, 10, 40] {
        for tau in [0.1, 0.5] {
            let train = PulseTrain::new(n, tau).unwrap();
            let generic = log_intensity(train.duration(), &train, &s).unwrap();
            let closed = log_intensity_closed_exp(&train, &m).unwrap();
            record_li("closed form", train.duration(), generic);
            worst = worst.max((closed - generic).abs() / generic.abs());
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max relative difference {worst:.2e} (tolerance 1e-9)"),
    )
}

fn decay_ordering() -> Outcome {
    let m = exp_t2(0.02);
    let s = FnCumulant(move |t| s_exponential(t, &m));
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
    let mut at_one = Vec::new();
    for tau in [0.005, 0.1, 0.5] {
        let train = PulseTrain::new(pulses_to_cover(1.0, tau), tau).unwrap();
        let curve = intensity_curve(&train, &s, &grid).unwrap();
        for (&t, &l) in curve.times().iter().zip(curve.log_intensity()) {
            record_li("decay curves", t, l);
        }
        at_one.push(log_intensity_within(1.0, &train, &s).unwrap().abs());
    }
    let ordered = at_one[0] < at_one[1] && at_one[1] < at_one[2];
    let free_dev = (at_one[2] - 2.0).abs() / 2.0;
    outcome(
        ordered && free_dev <= 0.10,
        format!(
            "|ln I(1)| = {:.5} < {:.5} < {:.5}; τs=0.5 vs −2t deviation {:.2}% (limit 10%)",
            at_one[0],
            at_one[1],
            at_one[2],
            free_dev * 100.0
        ),
    )
}

fn exponential_sweep() -> Outcome {
    let m = exp_t2(0.02);
    let s = FnCumulant(move |t| s_exponential(t, &m));
    let spec = SweepSpec {
        window: Window::new(8.0, 10.0).unwrap(),
        samples: 201,
    };
    let grid = [0.01, 0.05, 0.1, 0.25, 0.5];
    let r = sweep_tau_s(&grid, &s, Some(&m), spec).unwrap();
    record_sweep("exponential sweep", &r, &s, spec);
    let taus: Vec<f64> = r.rows.iter().map(|x| x.tau_i.unwrap_or(f64::NAN)).collect();
    let decreasing = taus.windows(2).all(|w| w[1] < w[0]);
    let last = taus[taus.len() - 1];
    let asymptote = (last - 0.5).abs() / 0.5;
    outcome(
        decreasing && asymptote <= 0.05,
        format!(
            "τ_I = {:?}; strictly decreasing: {decreasing}; τ_I(0.5) = {last:.4} is {:.2}% from 0.5 (limit 5%)",
            taus.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>(),
            asymptote * 100.0
        ),
    )
}

fn record_sweep(
    label: &'static str,
    r: &SweepResult,
    s: &(impl Cumulant + ?Sized),
    spec: SweepSpec,
) {
    for row in &r.rows {
        let train = PulseTrain::new(row.n_pulses, row.tau_s).unwrap();
        for t in [0.0, spec.window.start, spec.window.end] {
            record_li(label, t, log_intensity_within(t, &train, s).unwrap());
        }
    }
}

fn spectrum_peaks() -> Outcome {
    let ReservoirModel::Quadratic(m) = reference_quadratic_model() else {
        unreachable!()
    };
    let omegas: Vec<f64> = (0..=400).map(|i| -4.0 + 0.02 * i as f64).collect();
    let grid = SpectrumGrid::sample(omegas, |w| {
        quadratic_spectrum(w, &m.density, &m.thermal, &m.quad)
    })
    .unwrap();
    let peaks = find_peaks(&grid);
    let j0 = quadratic_spectrum(0.0, &m.density, &m.thermal, &m.quad).unwrap();
    let targets = [-2.0, 0.0, 2.0];
    let located = peaks.len() == 3
        && peaks
            .iter()
            .zip(targets)
            .all(|(p, x)| (p.omega - x).abs() <= 0.1);
    let at: Vec<String> = peaks.iter().map(|p| format!("{:.3}", p.omega)).collect();
    outcome(
        located && j0 > 0.0,
        format!(
            "{} maxima at [{}]; J(0) = {j0:.6}",
            peaks.len(),
            at.join(", ")
        ),
    )
}

fn detailed_balance() -> Outcome {
    let ReservoirModel::Quadratic(m) = reference_quadratic_model() else {
        unreachable!()
    };
    let mut worst: f64 = 0.0;
    for w in [0.5, 1.0, 2.0] {
        let plus = quadratic_spectrum(w, &m.density, &m.thermal, &m.quad).unwrap();
        let minus = quadratic_spectrum(-w, &m.density, &m.thermal, &m.quad).unwrap();
        let want = (-m.thermal.beta * w).exp();
        worst = worst.max((minus / plus - want).abs() / want);
    }
    outcome(
        worst <= 1e-4,
        format!("max relative deviation {worst:.2e} (tolerance 1e-4)"),
    )
}

fn resonance_sweep() -> Outcome {
    let engine =
        CumulantEngine::preferred(reference_quadratic_model(), QuadratureConfig::default())
            .unwrap();
    let window = Window::trailing(45.0).unwrap();
    let s = engine.prepare(window.end).unwrap();
    for i in 0..=45 {
        let t = i as f64;
        record_s("quadratic", t, s.s(t).unwrap());
    }
    let spec = SweepSpec {
        window,
        samples: 201,
    };
    let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1).collect();
    let r = sweep_tau_s(&grid, &s, None, spec).unwrap();
    record_sweep("quadratic sweep", &r, &s, spec);
    // A row without decay on the window has an unbounded decay time.
    let tau_i = |x: f64| {
        r.row(x)
            .map(|row| row.tau_i.unwrap_or(f64::INFINITY))
            .unwrap()
    };
    let resonant = r
        .rows
        .iter()
        .filter(|row| row.tau_s >= 2.5 - 1e-9 && row.tau_s <= 3.5 + 1e-9)
        .map(|row| row.tau_i.unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    let at_15 = tau_i(1.5);
    let at_01 = tau_i(0.1);
    let no_decay = r.rows.iter().filter(|row| row.tau_i.is_none()).count();
    outcome(
        resonant > at_15 && at_01 > at_15,
        format!(
            "max τ_I on [2.5, 3.5] = {resonant:.4}, τ_I(1.5) = {at_15:.4}, τ_I(0.1) = {at_01:.4}; rows without decay: {no_decay}"
        ),
    )
}

fn linear_dichotomy() -> Outcome {
    let thermal = ThermalConfig::new(1.0).unwrap();
    let quad = QuadratureConfig::default();
    let mut ratios = Vec::new();
    let mut slope_err = f64::NAN;
    for n in [1u32, 2] {
        let d = CaldeiraLeggettDensity::new(1.0, n, 1.0).unwrap();
        let s = |t: f64| {
            let v = s_linear_boson(t, &d, &thermal, &quad).unwrap();
            record_s("linear", t, v);
            v
        };
        record_s(
            "linear",
            0.0,
            s_linear_boson(0.0, &d, &thermal, &quad).unwrap(),
        );
        let (s10, s1k) = (s(10.0), s(1e3));
        ratios.push((s1k / 1e3) / (s10 / 10.0));
        if n == 1 {
            let slope = (s(2e3) - s1k) / 1e3;
            let limit = linear_spectrum(0.0, &d, &thermal) / 2.0;
            slope_err = (slope - limit).abs() / limit;
        }
    }
    let separation = ratios[0] / ratios[1];
    outcome(
        separation >= 100.0 && slope_err <= 1e-3,
        format!(
            "S/t drop 10→10³/ωc: n=1 {:.4}, n=2 {:.4}, separation {separation:.1}× (need ≥100×); ohmic slope vs J(0)/2 {slope_err:.2e} (tolerance 1e-3)",
            ratios[0], ratios[1]
        ),
    )
}

fn physical_bounds() -> Outcome {
    let quad = QuadratureConfig::default();
    let thermal = ThermalConfig::new(1.0).unwrap();
    let models = [
        ReservoirModel::Exponential(ExponentialCorrelation::new(1.0, 1.0).unwrap()),
        ReservoirModel::Exponential(exp_t2(0.02)),
        reference_quadratic_model(),
        ReservoirModel::Linear(pulsedephase::LinearSpinBoson {
            density: CaldeiraLeggettDensity::new(1.0, 1, 1.0).unwrap(),
            thermal,
            quad,
        }),
        ReservoirModel::Linear(pulsedephase::LinearSpinBoson {
            density: CaldeiraLeggettDensity::new(1.0, 2, 1.0).unwrap(),
            thermal,
            quad,
        }),
    ];
    let mut s_zero_ok = true;
    let mut i0_ok = true;
    for m in models {
        let e = CumulantEngine::preferred(m, quad).unwrap();
        s_zero_ok &= e.s(0.0).unwrap() == 0.0;
        for train in [PulseTrain::free(), PulseTrain::new(3, 0.2).unwrap()] {
            i0_ok &= log_intensity_within(0.0, &train, &e).unwrap().exp() == 1.0;
        }
        for t in [0.1, 1.0, 5.0] {
            record_s("engines", t, e.s(t).unwrap());
        }
    }
    let lis = LOG_INTENSITIES.lock().unwrap();
    let ss = CUMULANTS.lock().unwrap();
    let bad_li: Vec<_> = lis
        .iter()
        .filter(|(_, _, l)| !(*l <= LN_I_NOISE && l.exp() > 0.0))
        .collect();
    let bad_s: Vec<_> = ss
        .iter()
        .filter(|(_, _, s)| s.is_nan() || *s < 0.0)
        .collect();
    let s0_ok = ss
        .iter()
        .filter(|(_, t, _)| *t == 0.0)
        .all(|(_, _, s)| *s == 0.0);
    let i_at_zero = lis
        .iter()
        .filter(|(_, t, _)| *t == 0.0)
        .all(|(_, _, l)| *l == 0.0);
    let pass = s_zero_ok && i0_ok && s0_ok && i_at_zero && bad_li.is_empty() && bad_s.is_empty();
    let mut detail = format!(
        "{} ln I samples, {} S samples; I out of (0, 1]: {}; S < 0: {}; S(0) = 0: {}; I(0) = 1: {}",
        lis.len(),
        ss.len(),
        bad_li.len(),
        bad_s.len(),
        s_zero_ok && s0_ok,
        i0_ok && i_at_zero
    );
    if let Some((label, t, l)) = bad_li.first() {
        detail.push_str(&format!("; first bad ln I: {label} t={t} ln I={l:e}"));
    }
    outcome(pass, detail)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "golden coefficients for one and two pulses",
            golden_coefficients,
        ),
        ("series equals filter-function oracle", oracle_equivalence),
        ("closed form for even trains", closed_form),
        ("decay ordering at t=1", decay_ordering),
        (
            "exponential sweep monotone with 0.5 asymptote",
            exponential_sweep,
        ),
        ("three spectral peaks", spectrum_peaks),
        ("detailed balance", detailed_balance),
        ("resonant recovery in quadratic sweep", resonance_sweep),
        ("ohmic/superohmic dichotomy", linear_dichotomy),
        ("physical bounds", physical_bounds),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{secs:.2}s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
