#![allow(clippy::needless_range_loop)]

mod common;

use common::{gapped, phi, regularizer, vector};
use proptest::prelude::*;
use sparsetopk::{jvp, relaxed_apply, vjp, JacobianPlan, OperatorSpec, PhiKind, Regularizer, Solver};
use sparsetopk_testkit::fd_jacobian;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    e
}

fn partition(x: &[f64], spec: &OperatorSpec<f64>) -> Vec<(usize, bool)> {
    let out = relaxed_apply(x, spec, Solver::Pav).unwrap();
    out.solution.blocks.iter().map(|b| (b.end, b.clamped)).collect()
}

/// The Jacobian jumps where blocks merge or clamp; finite differences are
/// only meaningful when no probe crosses such a point.
fn stable_partition(x: &[f64], spec: &OperatorSpec<f64>, h: f64) -> bool {
    let base = partition(x, spec);
    (0..x.len()).all(|j| {
        [h, -h].iter().all(|d| {
            let mut z = x.to_vec();
            z[j] += d;
            partition(&z, spec) == base
        })
    })
}

fn case() -> impl Strategy<Value = (Vec<f64>, OperatorSpec<f64>)> {
    (phi(), regularizer(), 0.0..1.0f64).prop_flat_map(|(phi, reg, frac)| {
        gapped(1..=10, 1e-2, phi.is_even()).prop_map(move |x| {
            let k = 1 + (frac * (x.len() - 1) as f64) as usize;
            (x, OperatorSpec::topk(phi, reg, k))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn products_match_finite_differences((x, spec) in case()) {
        let n = x.len();
        let out = relaxed_apply(&x, &spec, Solver::Pav).unwrap();
        let plan = JacobianPlan::new(&out);
        let h = 1e-6 * x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        prop_assume!(stable_partition(&x, &spec, h), "partition changes within one step");
        let fd = fd_jacobian(|z: &[f64]| Ok(relaxed_apply(z, &spec, Solver::Pav)?.y), &x, h).unwrap();
        let scale = fd.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
        for j in 0..n {
            let col = plan.jvp(&unit(n, j)).unwrap();
            let row = plan.vjp(&unit(n, j)).unwrap();
            for i in 0..n {
                prop_assert!((col[i] - fd[i][j]).abs() <= 1e-4 * scale, "J[{i}][{j}] = {} vs {}", col[i], fd[i][j]);
                prop_assert!((row[i] - fd[j][i]).abs() <= 1e-4 * scale, "J[{j}][{i}] = {} vs {}", row[i], fd[j][i]);
            }
        }
    }

    #[test]
    fn vjp_is_the_adjoint_of_jvp(
        (x, spec) in case(),
        g in vector(10..=10),
        t in vector(10..=10),
    ) {
        let n = x.len();
        let out = relaxed_apply(&x, &spec, Solver::Pav).unwrap();
        let lhs = dot(&g[..n], &jvp(&out, &t[..n]).unwrap());
        let rhs = dot(&vjp(&out, &g[..n]).unwrap(), &t[..n]);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn products_are_linear((x, spec) in case(), a in -3.0..3.0f64, g in vector(10..=10), t in vector(10..=10)) {
        let n = x.len();
        let out = relaxed_apply(&x, &spec, Solver::Pav).unwrap();
        let plan = JacobianPlan::new(&out);
        let mix: Vec<f64> = g[..n].iter().zip(&t[..n]).map(|(p, q)| a * p + q).collect();
        let lhs = plan.jvp(&mix).unwrap();
        let (jg, jt) = (plan.jvp(&g[..n]).unwrap(), plan.jvp(&t[..n]).unwrap());
        for i in 0..n {
            prop_assert!((lhs[i] - (a * jg[i] + jt[i])).abs() <= 1e-9 * (1.0 + lhs[i].abs()));
        }
    }

    #[test]
    fn identity_operators_conserve_mass((x, spec) in case().prop_filter("identity", |(_, s)| s.phi == PhiKind::Identity), t in vector(10..=10)) {
        // Σ y is constant on P(w), so every tangent maps to a zero-sum vector
        let out = relaxed_apply(&x, &spec, Solver::Pav).unwrap();
        let d = jvp(&out, &t[..x.len()]).unwrap();
        prop_assert!(d.iter().sum::<f64>().abs() <= 1e-10);
        let ones = vjp(&out, &vec![1.0; x.len()]).unwrap();
        prop_assert!(ones.iter().all(|v| v.abs() <= 1e-10), "{ones:?}");
    }
}

#[test]
fn clamped_coordinates_pass_tangents_through() {
    // |x_i| < λ clamps u_i to 0, so y_i = x_i / λ there
    let x = [0.2, -0.1, 4.0, 0.05];
    let spec = OperatorSpec::topk(PhiKind::Absolute, Regularizer::squared(2.0).unwrap(), 4);
    let out = relaxed_apply(&x, &spec, Solver::Pav).unwrap();
    let clamped: usize = out.solution.blocks.iter().filter(|b| b.clamped).map(|b| b.len()).sum();
    assert_eq!(clamped, 3);
    for j in [0, 1, 3] {
        let mut expect = vec![0.0; 4];
        expect[j] = 0.5;
        assert_eq!(vjp(&out, &unit(4, j)).unwrap(), expect);
        assert_eq!(jvp(&out, &unit(4, j)).unwrap(), expect);
    }
    assert_eq!(jvp(&out, &unit(4, 2)).unwrap(), vec![0.0; 4]);
}

#[test]
fn hard_outputs_have_zero_jacobian() {
    let spec = OperatorSpec::topk(PhiKind::Identity, Regularizer::squared(1e-13).unwrap(), 2);
    let out = relaxed_apply(&[0.5, 2.0, -1.0], &spec, Solver::Pav).unwrap();
    assert_eq!(jvp(&out, &[1.0, 1.0, 1.0]).unwrap(), vec![0.0; 3]);
    assert_eq!(vjp(&out, &[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 3]);
}
