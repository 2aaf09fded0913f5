//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails. Run with `--nocapture` to see the lines.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use hadamard_core::config::parse;
use hadamard_core::dift::{check_conditions, default_grid, eigen_samples, example, matrix_family_3x3, pencil_directions, solve_branch, EigenChart};
use hadamard_core::fem::assemble::assemble;
use hadamard_core::fem::eigs::{lowest_eigs, EigOptions};
use hadamard_core::fem::mesh::mesh_domain;
use hadamard_core::geometry::{normal_speed, DomainSpec, EdgeProfile, FamilyKind, PerturbFamily};
use hadamard_core::hadamard::{assemble_closed_form, assemble_quadrature, ball3d_closed_form, square_closed_form, PencilMatrices};
use hadamard_core::modes::{ball3d_second_eigenspace, square_eigenspace};
use hadamard_core::pencil::generalized_roots;
use hadamard_core::pipeline::{evaluate, Mode, ScenarioReport, Status};
use hadamard_core::quadrature::{integrate_sphere, Resolution};
use hadamard_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn line(o: &Outcome) {
    println!("{} {:<34} {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
}

fn run(json: &str, mode: Mode) -> Vec<ScenarioReport> {
    evaluate(&parse(json).expect("config parses"), mode, 1, false, Some(0)).expect("scenarios resolve")
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn both(r: &ScenarioReport) -> [&PencilMatrices; 2] {
    [r.closed_form.as_ref().unwrap(), r.quadrature.as_ref().unwrap()]
}

/// `-trace(B^{-1} A)` computed with a general dense inverse.
fn trace_oracle(p: &PencilMatrices) -> f64 {
    -(p.b.clone().try_inverse().expect("B invertible") * &p.a).trace()
}

/// Sum rule for one validated report: measured slope sum against the
/// independently computed trace, within the summed uncertainties.
fn sum_rule(r: &ScenarioReport) -> (bool, String) {
    let v = r.validation.as_ref().expect("validated");
    let measured: f64 = v.measured.iter().map(|m| m.slope).sum();
    let unc: f64 = v.measured.iter().map(|m| m.uncertainty).sum();
    let trace = trace_oracle(r.closed_form.as_ref().unwrap());
    let ok = (measured - trace).abs() <= unc.max(r.scenario.tolerances.abs);
    (ok, format!("{}: sum {measured:.6} vs {trace:.6} (±{unc:.1e})", r.scenario.id))
}

fn disk_cubic(all_sums: &mut Vec<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let reps = run(
        r#"{"scenarios": [{"id": "disk_cubic", "domain": {"kind": "unit_disk"},
            "family": {"name": "disk.holomorphic_poly", "terms": [{"power": 1, "coeff": 1.0}, {"power": 3, "coeff": 1.0}]},
            "eigenspace": {"type": "disk", "k": 1, "m": 1},
            "tolerances": {"abs": 0.0, "rel": 0.02},
            "t_grid": [-2e-3, -1e-3, 1e-3, 2e-3], "mesh_ladder": [16, 32, 64]}]}"#,
        Mode::Validate,
    );
    let elapsed = start.elapsed().as_secs_f64();
    let r = &reps[0];
    if r.status != Status::Pass && r.validation.is_none() {
        return Outcome {
            name: "disk-cubic-prediction-vs-fem",
            pass: false,
            detail: format!("{:?}", r.error),
        };
    }
    let pred = r.prediction.as_ref().unwrap();
    let v = r.validation.as_ref().unwrap();
    let lambda0 = 3.831705970207512f64.powi(2);
    let two_simple = pred.simple_slopes.len() == 2;
    let mut ok = two_simple && elapsed <= 120.0 && (r.lambda0 - lambda0).abs() < 1e-9;
    let mut detail = format!("{elapsed:.1}s;");
    for b in &v.branches {
        let rel = (b.measured - b.predicted).abs() / b.predicted.abs();
        ok &= b.root_simple && rel <= 0.02;
        write!(detail, " {:.5} vs {:.5} (rel {rel:.1e})", b.measured, b.predicted).unwrap();
    }
    all_sums.push(sum_rule(r));
    Outcome {
        name: "disk-cubic-prediction-vs-fem",
        pass: ok,
        detail,
    }
}

fn translations(all_sums: &mut Vec<(bool, String)>) -> Outcome {
    let reps = run(
        r#"{"scenarios": [
            {"id": "disk_translation", "domain": {"kind": "unit_disk"},
             "family": {"name": "translation", "direction": [0.6, -0.8]},
             "eigenspace": {"type": "disk", "k": 1, "m": 1}},
            {"id": "square_translation", "domain": {"kind": "square"},
             "family": {"name": "translation", "direction": [1.0, 0.3]},
             "eigenspace": {"type": "square", "s1": 1, "s2": 2}},
            {"id": "pair_translation", "domain": {"kind": "disjoint_pair", "base": {"kind": "unit_disk"}, "offset": [3.0, 0.0]},
             "family": {"name": "translation", "direction": [0.0, 1.0]},
             "eigenspace": {"type": "pair"}}]}"#,
        Mode::Validate,
    );
    let mut ok = true;
    let mut detail = String::new();
    for r in &reps {
        let Some(v) = r.validation.as_ref() else {
            return Outcome {
                name: "translation-zero-slope",
                pass: false,
                detail: format!("{}: {:?}", r.scenario.id, r.error),
            };
        };
        let a = both(r).iter().map(|p| max_abs(&p.a)).fold(0.0, f64::max);
        let s = v.measured.iter().map(|m| m.slope.abs()).fold(0.0, f64::max);
        ok &= a <= 1e-10 && s <= 1e-4 * r.lambda0;
        write!(detail, "{}: |A| {a:.1e} |slope| {s:.1e}; ", r.scenario.id).unwrap();
        all_sums.push(sum_rule(r));
    }
    Outcome {
        name: "translation-zero-slope",
        pass: ok,
        detail,
    }
}

fn dilation(all_sums: &mut Vec<(bool, String)>) -> Outcome {
    let reps = run(
        r#"{"scenarios": [{"id": "disk_dilation", "domain": {"kind": "unit_disk"},
            "family": {"name": "dilation", "rate": 1.0},
            "eigenspace": {"type": "disk", "k": 1, "m": 1}}]}"#,
        Mode::Validate,
    );
    let r = &reps[0];
    let Some(v) = r.validation.as_ref() else {
        return Outcome {
            name: "dilation-exact-law",
            pass: false,
            detail: format!("{:?}", r.error),
        };
    };
    let l0 = r.lambda0;
    // derivative of l0 / (1 + t)^2 at 0 by a high-order difference of the law itself
    let law = |t: f64| l0 / (1.0 + t).powi(2);
    let h = 1e-3;
    let exact = (8.0 * (law(h) - law(-h)) - (law(2.0 * h) - law(-2.0 * h))) / (12.0 * h);
    let mut ok = true;
    let mut detail = String::new();
    for p in both(r) {
        let d = max_abs(&(&p.a - DMatrix::identity(2, 2) * (2.0 * l0)));
        ok &= d <= 1e-8;
        write!(detail, "|A - 2λ0 I| {d:.1e}; ").unwrap();
    }
    let pred = r.prediction.as_ref().unwrap();
    let cluster = &pred.clusters[0];
    ok &= pred.clusters.len() == 1 && !cluster.simple && (cluster.slope - exact).abs() <= 1e-6 * l0;
    write!(detail, "informational {:.6} vs law {exact:.6}; ", cluster.slope).unwrap();
    for m in &v.measured {
        let rel = (m.slope - exact).abs() / exact.abs();
        ok &= rel <= 0.01;
        write!(detail, "fem {:.5} (rel {rel:.1e}) ", m.slope).unwrap();
    }
    all_sums.push(sum_rule(r));
    Outcome {
        name: "dilation-exact-law",
        pass: ok,
        detail,
    }
}

fn random_profile(rng: &mut ChaCha8Rng) -> EdgeProfile {
    EdgeProfile {
        cos: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        sin: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

fn square_closed_vs_quadrature() -> Outcome {
    let space = square_eigenspace(1, 2).unwrap();
    let res = Resolution::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut families: Vec<FamilyKind> = (0..10)
        .map(|_| FamilyKind::EdgeProfiles {
            bottom: random_profile(&mut rng),
            right: random_profile(&mut rng),
            top: random_profile(&mut rng),
            left: random_profile(&mut rng),
        })
        .collect();
    // degenerate controls: equal constants on every edge, and a lone constant edge
    let c = EdgeProfile::constant(1.0);
    families.push(FamilyKind::EdgeProfiles {
        bottom: c.clone(),
        right: c.clone(),
        top: c.clone(),
        left: c.clone(),
    });
    families.push(FamilyKind::EdgeProfiles {
        bottom: c,
        right: EdgeProfile::default(),
        top: EdgeProfile::default(),
        left: EdgeProfile::default(),
    });
    let mut worst = 0.0f64;
    let mut flags_ok = true;
    let mut simple = Vec::new();
    let mut offdiagonal = Vec::new();
    for kind in families {
        let speed = normal_speed(&DomainSpec::Square, &PerturbFamily::new(kind), &res).unwrap();
        let closed = square_closed_form(&space, &speed).unwrap();
        let quad = assemble_quadrature(&space, &speed).unwrap();
        worst = worst.max(closed.matrices.max_a_difference(&quad));
        // direct eigenvalue gap of the 2x2 quadrature matrix
        let a = &quad.a;
        let gap = ((a[(0, 0)] - a[(1, 1)]).powi(2) + 4.0 * a[(0, 1)].powi(2)).sqrt();
        let scale = max_abs(a).max(1.0);
        let distinct = gap > 1e-8 * scale;
        flags_ok &= (closed.condition_offdiagonal || closed.condition_diagonal) == distinct;
        flags_ok &= closed.condition_offdiagonal == (2.0 * a[(0, 1)].abs() > 1e-8 * scale);
        flags_ok &= closed.condition_diagonal == ((a[(0, 0)] - a[(1, 1)]).abs() > 1e-8 * scale);
        simple.push(distinct);
        offdiagonal.push(closed.condition_offdiagonal);
    }
    let random_simple = simple[..10].iter().all(|&s| s);
    let controls = !simple[10] && !offdiagonal[11];
    Outcome {
        name: "square-closed-form-vs-quadrature",
        pass: worst <= 1e-8 && flags_ok && random_simple && controls,
        detail: format!(
            "max |A_closed - A_quad| {worst:.1e}; flags consistent: {flags_ok}; random simple: {random_simple}; degenerate controls: {controls}"
        ),
    }
}

fn square_fem_baseline() -> Outcome {
    let levels: Vec<Vec<f64>> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let mesh = mesh_domain(&DomainSpec::Square, n).unwrap();
            let s = assemble(&mesh, &PerturbFamily::new(FamilyKind::Identity), 0.0).unwrap();
            lowest_eigs(&s.k, &s.m, 6, EigOptions::default()).unwrap().values
        })
        .collect();
    let exact = [2.0, 5.0, 5.0, 8.0, 10.0, 10.0];
    let mut ok = true;
    let mut min_order = f64::INFINITY;
    let mut worst_extrap = 0.0f64;
    for i in 0..6 {
        let order = ((levels[0][i] - levels[1][i]) / (levels[1][i] - levels[2][i])).log2();
        min_order = min_order.min(order);
        let extrap = (4.0 * levels[2][i] - levels[1][i]) / 3.0;
        worst_extrap = worst_extrap.max((extrap - exact[i]).abs() / exact[i]);
    }
    ok &= min_order >= 1.9 && worst_extrap <= 1e-3;
    Outcome {
        name: "square-fem-baseline",
        pass: ok,
        detail: format!("min order {min_order:.3}; extrapolated rel error {worst_extrap:.1e}"),
    }
}

/// First positive zero of `sin x / x^2 - cos x / x` by bisection.
fn j1_zero_oracle() -> f64 {
    let f = |x: f64| x.sin() / (x * x) - x.cos() / x;
    let (mut a, mut b) = (4.0, 5.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(a) * f(m) <= 0.0 {
            b = m
        } else {
            a = m
        }
    }
    0.5 * (a + b)
}

fn ball_assembly() -> Outcome {
    let space = ball3d_second_eigenspace();
    let res = Resolution::default();
    let quadratic = FamilyKind::QuadraticForm {
        matrix: [[0.0, 0.5, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]],
    };
    let speed = normal_speed(&DomainSpec::UnitBall3d, &PerturbFamily::new(quadratic), &res).unwrap();
    let closed = ball3d_closed_form(&space, &speed).unwrap();
    // trace constant from the Rellich identity: tau^2 * |S^2| / 3 = 2 lambda0
    let kappa = j1_zero_oracle();
    let tau2 = 3.0 * kappa * kappa / (2.0 * PI);
    let moment = integrate_sphere(|p| p[0] * p[0] * p[1] * p[1], res.sphere_polar, res.sphere_azimuth).unwrap();
    let target = tau2 * moment;
    let rem = &closed.remainder;
    let c21 = rem[(1, 0)];
    let mut others = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            if !((i, j) == (1, 0) || (i, j) == (0, 1)) {
                others = others.max(rem[(i, j)].abs());
            }
        }
    }
    let pair_ok = (c21 - target).abs() <= 1e-9 && (rem[(0, 1)] - target).abs() <= 1e-9 && others <= 1e-10;
    let analytic_ok = (moment - 4.0 * PI / 15.0).abs() <= 1e-12;
    let translation = FamilyKind::Translation {
        direction: vec![1.0, -2.0, 0.5],
    };
    let speed = normal_speed(&DomainSpec::UnitBall3d, &PerturbFamily::new(translation), &res).unwrap();
    let a_closed = assemble_closed_form(&space, &speed).unwrap();
    let a_quad = assemble_quadrature(&space, &speed).unwrap();
    let zero = max_abs(&a_closed.a).max(max_abs(&a_quad.a));
    Outcome {
        name: "ball-assembly",
        pass: pair_ok && analytic_ok && zero <= 1e-10,
        detail: format!("C21 {c21:.12} vs {target:.12}; other entries {others:.1e}; translation |A| {zero:.1e}"),
    }
}

fn disjoint_pair(all_sums: &mut Vec<(bool, String)>) -> Outcome {
    let reps = run(
        r#"{"scenarios": [{"id": "pair_dilations",
            "domain": {"kind": "disjoint_pair", "base": {"kind": "unit_disk"}, "offset": [3.0, 0.0]},
            "family": {"name": "pair.independent", "parts": [{"name": "dilation", "rate": 1.0}, {"name": "dilation", "rate": 0.5}]},
            "eigenspace": {"type": "pair"}, "tolerances": {"abs": 0.0, "rel": 0.02}}]}"#,
        Mode::Validate,
    );
    let r = &reps[0];
    let Some(v) = r.validation.as_ref() else {
        return Outcome {
            name: "disjoint-pair-dilations",
            pass: false,
            detail: format!("{:?}", r.error),
        };
    };
    let l0 = 2.404825557695773f64.powi(2);
    let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0 * l0, 2.0 * l0 * 0.5]));
    let mut ok = true;
    let mut detail = String::new();
    for p in both(r) {
        let d = max_abs(&(&p.a - &expected));
        ok &= d <= 1e-8;
        write!(detail, "|A - diag| {d:.1e}; ").unwrap();
    }
    let pred = r.prediction.as_ref().unwrap();
    ok &= pred.simple_slopes.len() == 2;
    for b in &v.branches {
        let rel = (b.measured - b.predicted).abs() / b.predicted.abs();
        ok &= b.root_simple && rel <= 0.02;
        write!(detail, "{:.5} vs {:.5} (rel {rel:.1e}) ", b.measured, b.predicted).unwrap();
    }
    all_sums.push(sum_rule(r));
    Outcome {
        name: "disjoint-pair-dilations",
        pass: ok,
        detail,
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

/// Roots of `det(A - sB)` by sign changes on a fine grid and bisection.
fn bisection_roots(a: &DMatrix<f64>, b: &DMatrix<f64>, lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let n = a.nrows();
    let chi = |s: f64| det((0..n).map(|i| (0..n).map(|j| a[(i, j)] - s * b[(i, j)]).collect()).collect());
    let mut roots = Vec::new();
    let h = (hi - lo) / steps as f64;
    for k in 0..steps {
        let (mut x0, mut x1) = (lo + k as f64 * h, lo + (k + 1) as f64 * h);
        let (f0, f1) = (chi(x0), chi(x1));
        if f0 == 0.0 {
            roots.push(x0);
            continue;
        }
        if f0 * f1 > 0.0 {
            continue;
        }
        let mut fa = f0;
        for _ in 0..100 {
            let m = 0.5 * (x0 + x1);
            let fm = chi(m);
            if fa * fm <= 0.0 {
                x1 = m;
            } else {
                x0 = m;
                fa = fm;
            }
        }
        roots.push(0.5 * (x0 + x1));
    }
    roots
}

fn pencil_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut count_ok = true;
    for _ in 0..100 {
        let n = rng.gen_range(2..=6);
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = &g * g.transpose() + DMatrix::identity(n, n) * 0.5;
        // separated roots keep every sign change visible on the grid
        let mut mu: Vec<f64> = Vec::new();
        while mu.len() < n {
            let x = rng.gen_range(-5.0..5.0);
            if mu.iter().all(|m: &f64| (m - x).abs() > 0.2) {
                mu.push(x);
            }
        }
        let q = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let l = b.clone().cholesky().unwrap().l();
        let a = &l * &q * DMatrix::from_diagonal(&DVector::from_vec(mu)) * q.transpose() * l.transpose();
        let a = 0.5 * (&a + a.transpose());
        let got = generalized_roots(&a, &b).unwrap().roots;
        let oracle = bisection_roots(&a, &b, -6.0, 6.0, 2400);
        count_ok &= oracle.len() == got.len();
        for (x, y) in got.iter().zip(&oracle) {
            worst = worst.max((x - y).abs());
        }
    }
    Outcome {
        name: "pencil-oracle-equivalence",
        pass: count_ok && worst <= 1e-9,
        detail: format!("100 instances, max root difference {worst:.1e}"),
    }
}

fn dense_distance(a: &DMatrix<f64>, lambda: f64) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|e| (e - lambda).abs())
        .fold(f64::INFINITY, f64::min)
}

fn dift_examples() -> Outcome {
    let mut worst = 0.0f64;
    let mut tangency = 0.0f64;
    let mut residual = 0.0f64;
    let mut span = 0.0f64;
    for name in ["dift.matrix_family_2x2", "dift.matrix_family_2x2_offdiag"] {
        let ex = example(name).unwrap();
        let chart = ex.chart.clone().unwrap();
        let b = solve_branch(&ex.problem, &ex.t_grid).unwrap();
        for s in eigen_samples(&chart, &b) {
            worst = worst.max(dense_distance(&chart.family.at(s.t), s.lambda));
            span = span.max(s.t.abs());
        }
        tangency = tangency.max(b.tangency);
        residual = b.residuals.iter().fold(residual, |m, &r| m.max(r));
    }
    let family = matrix_family_3x3();
    for dir in pencil_directions(&family, 1.0).unwrap() {
        let chart = EigenChart::new(family.clone(), 1.0, dir).unwrap();
        let b = solve_branch(&chart.problem("3x3"), &default_grid()).unwrap();
        for s in eigen_samples(&chart, &b) {
            worst = worst.max(dense_distance(&family.at(s.t), s.lambda));
        }
        tangency = tangency.max(b.tangency);
        residual = b.residuals.iter().fold(residual, |m, &r| m.max(r));
    }
    let rejected = matches!(
        check_conditions(&example("dift.equal_slopes").unwrap().problem),
        Err(Error::ConditionFailed { condition: 'd', .. })
    );
    Outcome {
        name: "dift-branches",
        pass: worst <= 1e-9 && tangency <= 1e-6 && rejected && span >= 0.1 && residual <= 1e-10,
        detail: format!(
            "max |λ - dense| {worst:.1e} over |t| <= {span}; tangency {tangency:.1e}; residual {residual:.1e}; equal slopes rejected: {rejected}"
        ),
    }
}

#[test]
fn acceptance() {
    let mut sums = Vec::new();
    let mut outcomes = vec![
        disk_cubic(&mut sums),
        translations(&mut sums),
        dilation(&mut sums),
        square_closed_vs_quadrature(),
        square_fem_baseline(),
        ball_assembly(),
        disjoint_pair(&mut sums),
        pencil_oracle(),
        dift_examples(),
    ];
    outcomes.push(Outcome {
        name: "sum-rule",
        pass: !sums.is_empty() && sums.iter().all(|(ok, _)| *ok),
        detail: sums.iter().map(|(_, d)| d.as_str()).collect::<Vec<_>>().join("; "),
    });
    println!();
    for o in &outcomes {
        line(o);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
