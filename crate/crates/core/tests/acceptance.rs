//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Default model kappa = tau = 1 on a 128 x 128 grid unless stated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use e3surf::ambient::{curvature_closed_form, AmbientVector, Chart, MetricDerivatives, ModelParams, NumericCurvature};
use e3surf::canonical::{
    clifford_torus, critical_radius, hopf_cylinder, hopf_torus, perturbed_torus, product_slice, CurveSpec,
    HopfTorusSpec,
};
use e3surf::cli::{cmd_verify, RunConfig};
use e3surf::surface::{geometry_field, GeometryField, Immersion};
use e3surf::verify::{
    check_kato, check_reverse_kato, convergence_study, fit_slope, run_check, CheckId, CheckReport, Derived,
    Tolerances,
};
use e3surf::willmore::{
    dense_radius_oracle, el_residual, flow_radius_family, gradient_check, random_smooth_field, willmore_energy,
    CriticalKind, RadiusFlowOptions,
};

const N: usize = 128;

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn model(k: f64, t: f64) -> ModelParams {
    ModelParams::new(k, t).unwrap()
}

fn unit() -> ModelParams {
    model(1.0, 1.0)
}

fn field(imm: &Immersion, n: usize) -> GeometryField {
    geometry_field(imm, &imm.grid(n, n).unwrap()).unwrap()
}

fn hopf(m: ModelParams, r: f64) -> Immersion {
    hopf_torus(&HopfTorusSpec::new(m, r).unwrap()).unwrap()
}

fn critical(m: ModelParams) -> Immersion {
    hopf(m, critical_radius(&m).unwrap().r)
}

fn perturbed() -> Immersion {
    perturbed_torus(&unit(), 0.6, 0.05, (2, 3)).unwrap()
}

fn rand_vec(rng: &mut ChaCha8Rng) -> AmbientVector {
    AmbientVector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// 1. Ambient curvature and Killing field against closed forms.
fn ambient_consistency() -> Outcome {
    let m = unit();
    let chart = Chart::bcv(m);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples: Vec<[AmbientVector; 4]> = (0..100)
        .map(|_| [rand_vec(&mut rng) * 0.9, rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng)])
        .collect();
    let (mut curv, mut xi_gap) = (0.0f64, 0.0f64);
    for [p, x, y, z] in &samples {
        let metric = chart.metric_at(p).unwrap();
        let xi = chart.killing_xi(p).unwrap();
        let closed = curvature_closed_form(&m, &metric, &xi, x, y, z);
        let numeric = chart.curvature_numeric(p, x, y, z).unwrap();
        curv = curv.max(metric.norm(&(numeric - closed)));
        let d = chart.covariant_derivative(p, x, |q| chart.killing_xi(q)).unwrap();
        xi_gap = xi_gap.max(metric.norm(&(d - metric.cross(chart.orientation(), x, &xi) * m.tau())));
    }
    ensure(curv <= 1e-6, format!("analytic-metric curvature gap {curv:.2e} > 1e-6"))?;
    ensure(xi_gap <= 1e-8, format!("Killing derivative gap {xi_gap:.2e} > 1e-8"))?;
    let steps = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let errs: Vec<f64> = steps
        .iter()
        .map(|&h| {
            let scheme = NumericCurvature {
                step: h,
                metric: MetricDerivatives::FiniteDifference { step: h },
            };
            samples
                .iter()
                .take(20)
                .map(|[p, x, y, z]| {
                    let metric = chart.metric_at(p).unwrap();
                    let xi = chart.killing_xi(p).unwrap();
                    let closed = curvature_closed_form(&m, &metric, &xi, x, y, z);
                    metric.norm(&(chart.curvature_numeric_with(p, x, y, z, scheme).unwrap() - closed))
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let slope = fit_slope(&steps, &errs);
    ensure(slope >= 1.8, format!("finite-difference fallback slope {slope:.2} < 1.8"))?;
    Ok(format!(
        "curvature gap {curv:.1e}, Killing gap {xi_gap:.1e}, fallback slope {slope:.2}"
    ))
}

/// 2. Constant invariants of Hopf tori, minimal Clifford torus.
fn model_surface_values() -> Outcome {
    let m = unit();
    let mut worst = [0.0f64; 5];
    for r in [0.3, FRAC_1_SQRT_2, 0.8] {
        let gf = field(&hopf(m, r), N);
        let t2 = m.tau().powi(2);
        let c = gf.max_abs(&gf.c);
        let ke = gf.ke.iter().map(|k| (k + t2).abs()).fold(0.0, f64::max);
        let kg = gf.max_abs(&gf.k_gauss).max(gf.max_abs(&gf.k_gauss_eq));
        let phi = (0..gf.len())
            .map(|k| (gf.norm_phi2[k] - 2.0 * gf.h[k] * gf.h[k] - 2.0 * t2).abs())
            .fold(0.0, f64::max);
        ensure(c <= 1e-10, format!("r={r}: |C| = {c:.2e}"))?;
        ensure(ke <= 1e-8, format!("r={r}: |Ke + tau^2| = {ke:.2e}"))?;
        ensure(kg <= 1e-8, format!("r={r}: |K| = {kg:.2e}"))?;
        ensure(phi <= 1e-8, format!("r={r}: |Phi|^2 gap {phi:.2e}"))?;
        for (w, v) in worst.iter_mut().zip([c, ke, kg, phi]) {
            *w = w.max(v);
        }
        if r == FRAC_1_SQRT_2 {
            let h = gf.max_abs(&gf.h);
            ensure(h <= 1e-10, format!("Clifford |H| = {h:.2e}"))?;
            worst[4] = h;
        }
    }
    Ok(format!(
        "max |C| {:.1e}, |Ke+tau^2| {:.1e}, |K| {:.1e}, |Phi|^2 gap {:.1e}, Clifford |H| {:.1e}",
        worst[0], worst[1], worst[2], worst[3], worst[4]
    ))
}

/// 3. Area and energy of the Clifford torus.
fn quadrature_anchor() -> Outcome {
    let e = willmore_energy(&field(&clifford_torus(&unit()).unwrap(), N));
    let target = 16.0 * PI * PI;
    let (ea, ew) = ((e.area / target - 1.0).abs(), (e.w / target - 1.0).abs());
    ensure(ea <= 1e-8 && ew <= 1e-8, format!("relative errors area {ea:.2e}, W {ew:.2e}"))?;
    Ok(format!("relative error area {ea:.1e}, W {ew:.1e}"))
}

/// Sub-residuals making up the identity suite, by check.
const SUITE: [(CheckId, &[&str]); 5] = [
    (
        CheckId::Structural,
        &[
            "unit_t",
            "integrability_t",
            "integrability_c",
            "div_t",
            "mean_curvature_identity",
            "gauss_curvature",
            "curvature_relation",
            "codazzi",
        ],
    ),
    (CheckId::Simons, &["simons"]),
    (CheckId::ChengYauDivergence, &["divergence"]),
    (CheckId::DivergenceLemma, &["divergence_a", "divergence_b", "divergence_c"]),
    (CheckId::DivergenceUv, &["divergence_u", "divergence_v"]),
];

fn suite_max(report: &CheckReport, subs: &[&str]) -> f64 {
    subs.iter()
        .map(|s| {
            let sub = report.sub(s).unwrap_or_else(|| panic!("missing sub residual {s}"));
            sub.max_abs.max(sub.integral.map_or(0.0, f64::abs))
        })
        .fold(0.0, f64::max)
}

/// 4. Identity suite on exact surfaces, order on the perturbed torus.
fn identity_suite() -> Outcome {
    let surfaces: Vec<(String, Immersion)> = vec![
        ("hopf 0.3".into(), hopf(unit(), 0.3)),
        ("hopf 0.6".into(), hopf(unit(), 0.6)),
        ("clifford".into(), clifford_torus(&unit()).unwrap()),
        ("hopf 0.8".into(), hopf(unit(), 0.8)),
        ("hopf 0.6, kappa 5".into(), hopf(model(5.0, 1.0), 0.6)),
        ("hopf 0.6, tau -1".into(), hopf(model(1.0, -1.0), 0.6)),
        ("slice".into(), product_slice(&model(1.0, 0.0), 0.0).unwrap()),
        ("slice z=1, kappa 2".into(), product_slice(&model(2.0, 0.0), 1.0).unwrap()),
    ];
    let mut worst = 0.0f64;
    for (name, imm) in &surfaces {
        let gf = field(imm, N);
        let d = Derived::new(&gf);
        let tol = Tolerances::for_field(&gf);
        for (id, subs) in SUITE {
            let r = suite_max(&run_check(id, &gf, &d, &tol), subs);
            ensure(r <= 1e-7, format!("{name}: {id} residual {r:.2e} > 1e-7"))?;
            worst = worst.max(r);
        }
    }
    let imm = perturbed();
    let mut min_slope = f64::INFINITY;
    for (id, subs) in SUITE {
        let rep = convergence_study(id, &[32, 64, 128, 256], |n| geometry_field(&imm, &imm.grid(n, n)?)).unwrap();
        for s in rep.subs.iter().filter(|s| subs.contains(&s.name)) {
            ensure(s.passed, format!("{id}/{}: slope {:.2} on {:?}", s.name, s.slope, s.residuals))?;
            if !s.exact {
                min_slope = min_slope.min(s.slope);
            }
        }
    }
    Ok(format!(
        "max residual on exact surfaces {worst:.1e}; smallest perturbed-torus slope {min_slope:.2}"
    ))
}

/// 5. Stationarity anchors.
fn euler_lagrange_anchors() -> Outcome {
    let m = unit();
    let cl = el_residual(&field(&clifford_torus(&m).unwrap(), N)).max_abs;
    let cr = critical_radius(&m).unwrap();
    let gf = field(&hopf(m, cr.r), N);
    let h = gf.h.iter().sum::<f64>() / gf.len() as f64;
    let target = ((2.0 * m.tau().powi(2) - m.kappa()) / 2.0).sqrt();
    let crit = el_residual(&gf).max_abs;
    let generic = el_residual(&field(&hopf(m, 0.6), N)).max_abs;
    ensure(cl <= 1e-8, format!("Clifford EL {cl:.2e}"))?;
    ensure((h - target).abs() <= 1e-8, format!("|H(r*) - target| = {:.2e}", (h - target).abs()))?;
    ensure(crit <= 1e-8, format!("critical torus EL {crit:.2e}"))?;
    ensure(generic >= 0.05, format!("r = 0.6 EL {generic:.3e} < 0.05"))?;
    Ok(format!(
        "EL Clifford {cl:.1e}, r* = {:.10} with |H - target| {:.1e} and EL {crit:.1e}, r = 0.6 EL {generic:.3}",
        cr.r,
        (h - target).abs()
    ))
}

/// 6. First variation against central differences of W.
fn gradient_validation() -> Outcome {
    let imm = perturbed();
    let grid = imm.grid(N, N).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let f = random_smooth_field(&grid, 100 + seed, 2);
        let gc = gradient_check(&imm, &grid, &f, 1e-4).unwrap();
        ensure(
            gc.relative_gap <= 1e-3,
            format!("seed {seed}: fd {:.6e} vs {:.6e}", gc.fd_derivative, gc.predicted),
        )?;
        worst = worst.max(gc.relative_gap);
    }
    Ok(format!("largest relative gap over 5 fields {worst:.1e}"))
}

/// 7. Equality cases of the integral inequalities.
fn equality_cases() -> Outcome {
    let m = unit();
    let mut notes = Vec::new();
    for (name, imm) in [("Clifford", clifford_torus(&m).unwrap()), ("critical", critical(m))] {
        let gf = field(&imm, N);
        let rep = run_check(CheckId::WillmoreInequality, &gf, &Derived::new(&gf), &Tolerances::for_field(&gf));
        let i1 = rep.value("i1").unwrap();
        ensure(i1.abs() <= 1e-7 * gf.area(), format!("{name}: |I1| = {i1:.2e}"))?;
        ensure(rep.passed && rep.equality == Some(true), format!("{name}: {rep:?}"))?;
        notes.push(format!("I1 {name} {:.1e}", i1 / gf.area()));
    }
    let mut worst = 0.0f64;
    for (k, t) in [(1.0, 1.0), (5.0, 1.0)] {
        for r in [0.3, 0.6, FRAC_1_SQRT_2, 0.8] {
            let gf = field(&hopf(model(k, t), r), N);
            let d = Derived::new(&gf);
            let tol = Tolerances::for_field(&gf);
            let rep = run_check(CheckId::ExtrinsicInequality, &gf, &d, &tol);
            let gap = rep.integral_value.unwrap().abs() / gf.area();
            ensure(gap <= 1e-7 && rep.equality == Some(true), format!("kappa {k} r {r}: LHS - RHS gap {gap:.2e}"))?;
            worst = worst.max(gap);
            if k == 5.0 {
                let rep = run_check(CheckId::ExtrinsicInequalityPositive, &gf, &d, &tol);
                let i2 = rep.value("i2").unwrap().abs() / gf.area();
                ensure(i2 <= 1e-7 && rep.passed, format!("r {r}: I2 / Area = {i2:.2e}"))?;
                worst = worst.max(i2);
            }
        }
    }
    notes.push(format!("constant-Ke inequalities worst gap/Area {worst:.1e}"));
    Ok(notes.join(", "))
}

/// 8. Kato defects.
fn inequality_defects() -> Outcome {
    let surfaces = vec![
        hopf(unit(), 0.3),
        hopf(unit(), 0.6),
        clifford_torus(&unit()).unwrap(),
        critical(unit()),
        hopf(model(5.0, 1.0), 0.6),
        perturbed(),
        perturbed_torus(&model(5.0, 1.0), 0.5, 0.1, (1, 2)).unwrap(),
        product_slice(&model(1.0, 0.0), 0.0).unwrap(),
        hopf_cylinder(&model(0.0, 0.5), &CurveSpec::Circle { radius: 1.0 }, 2.0 * PI).unwrap(),
    ];
    let mut kato_min = f64::INFINITY;
    let mut reverse_min = f64::INFINITY;
    for imm in &surfaces {
        let gf = field(imm, N);
        let d = Derived::new(&gf);
        let tol = Tolerances::for_field(&gf);
        let k = check_kato(&gf, &d, &tol);
        let min = k.value("min_defect").unwrap();
        ensure(min >= -1e-6, format!("{:?}: Kato defect {min:.2e}", gf.kind))?;
        kato_min = kato_min.min(min);
        if gf.kind.name().starts_with("hopf") || gf.kind.name() == "clifford" {
            let r = check_reverse_kato(&gf, &d, &tol);
            let rmin = r.value("min_defect").ok_or("reverse Kato not applicable on a Hopf torus")?;
            ensure(rmin >= -1e-8 && r.equality == Some(true), format!("reverse Kato {rmin:.2e}, {:?}", r.equality))?;
            reverse_min = reverse_min.min(rmin);
        }
    }
    Ok(format!(
        "min Kato defect {kato_min:.1e} over {} surfaces, min reverse defect {reverse_min:.1e} (equality on Hopf tori)",
        surfaces.len()
    ))
}

/// 9. Descent over the torus family against dense sampling.
fn optimization() -> Outcome {
    let m = unit();
    let flow = flow_radius_family(&m, 0.4, &RadiusFlowOptions::default()).map_err(|e| e.to_string())?;
    ensure(flow.state.converged(), "flow did not converge")?;
    ensure(flow.dw_dr_final.abs() <= 1e-8, format!("|dW/dr| = {:.2e}", flow.dw_dr_final.abs()))?;
    let w0 = flow.state.trajectory[0].energy;
    ensure(flow.state.is_monotone(1e-13 * w0), "energy increased along the trajectory")?;
    let oracle = dense_radius_oracle(&m, 10_000).map_err(|e| e.to_string())?;
    let nearest = oracle
        .iter()
        .map(|c| (c.r - flow.r_final).abs())
        .fold(f64::INFINITY, f64::min);
    ensure(nearest <= 1e-4, format!("nearest sampled critical radius {nearest:.2e} away"))?;
    let minima: Vec<String> = oracle
        .iter()
        .map(|c| format!("{:.5}{}", c.r, if c.kind == CriticalKind::Minimum { "(min)" } else { "(max)" }))
        .collect();
    Ok(format!(
        "r = {:.8} after {} steps, H = {:.10}, |H - 0| {:.2e}, |H - sqrt(0.5)| {:.2e}, oracle [{}] within {nearest:.1e}",
        flow.r_final,
        flow.state.trajectory.len() - 1,
        flow.h_final,
        flow.distance_to_minimal,
        flow.distance_to_critical.unwrap(),
        minima.join(", ")
    ))
}

/// 10. Byte-identical reports.
fn determinism() -> Outcome {
    let cfg = RunConfig::from_str_as(
        "checks = \"all\"\n[model]\nkappa = 1.0\ntau = 1.0\n[surface]\nkind = \"perturbed\"\n[grid]\nnu = 64\nnv = 64\n",
        false,
    )
    .map_err(|e| e.to_string())?;
    let a = cmd_verify(&cfg).map_err(|e| e.to_string())?;
    let b = cmd_verify(&cfg).map_err(|e| e.to_string())?;
    ensure(a.json == b.json, "JSON reports differ")?;
    Ok(format!("{} bytes identical", a.json.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("ambient consistency", ambient_consistency),
        ("model-surface values", model_surface_values),
        ("quadrature anchor", quadrature_anchor),
        ("identity suite", identity_suite),
        ("Euler-Lagrange anchors", euler_lagrange_anchors),
        ("gradient validation", gradient_validation),
        ("equality cases", equality_cases),
        ("inequality defects", inequality_defects),
        ("optimization", optimization),
        ("determinism", determinism),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({secs:.1}s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.1}s) {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
