use liquidation_core::linalg::{mul4, Mat4, IDENTITY4};
use liquidation_core::model::{matrix_l, sweep_assumption};
use liquidation_core::*;
use nalgebra::Matrix4;
use proptest::prelude::*;

fn expm_reference(l: &Mat4, tau: f64) -> Mat4 {
    let m = Matrix4::from_fn(|i, j| l[i][j] * tau).exp();
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

// Direct evaluation of the feedback coefficients from the unscaled rows;
// accurate only while the normalised gap stays well away from zero.
fn direct_coefficients(e: &EigenSystem, tau: f64) -> [f64; 6] {
    let s = e.s_row4(tau).unwrap();
    let g = e.g_vec(tau).unwrap();
    let v3 = g[3] / g[2];
    let v0 = 1.0 / (1.0 - v3 * s[2] / s[3]);
    let v1 = v3 * s[0] / s[3] - g[0] / g[2];
    let v2 = v3 * s[1] / s[3] - g[1] / g[2];
    [v0, v1, v2, v3, v0 * v1, v0 * v2]
}

fn param_tuple() -> impl Strategy<Value = ModelParams> {
    prop::array::uniform7(0.01f64..=100.0).prop_map(|xi| ModelParams::from_xi(xi, 10.0, 0.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigenvalues_bracket_resilience(p in param_tuple()) {
        let e = EigenSystem::new(&p).unwrap();
        let r2 = p.rho * p.rho;
        prop_assert!(e.nu1() * e.nu1() <= r2 * (1.0 + 1e-12));
        prop_assert!(e.nu3() * e.nu3() >= r2 * (1.0 - 1e-12));
        prop_assert!(e.nu1() < 0.0 && e.nu3() < 0.0);
    }

    #[test]
    fn eigenvectors_diagonalise_the_system(p in param_tuple()) {
        let e = EigenSystem::new(&p).unwrap();
        let u = e.matrix_u();
        let d = e.diagonal();
        let lu = mul4(e.matrix_l(), u);
        let scale = u.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
            * d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((lu[i][j] - u[i][j] * d[j]).abs() <= 1e-10 * scale);
            }
        }
        let id = mul4(u, e.matrix_u_inv());
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((id[i][j] - IDENTITY4[i][j]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn explicit_rows_match_reference_exponential(p in param_tuple(), frac in 0.0f64..=1.0) {
        let e = EigenSystem::new(&p).unwrap();
        let tau = frac * p.horizon.min(20.0 / e.nu3().abs());
        let reference = expm_reference(&matrix_l(&p), tau);
        let s = e.s_row4(tau).unwrap();
        let scale = reference[3].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for j in 0..4 {
            prop_assert!((s[j] - reference[3][j]).abs() <= 1e-8 * scale, "S4{} {} vs {}", j + 1, s[j], reference[3][j]);
        }
        let t = e.terminal_row();
        let g_ref: [f64; 4] = std::array::from_fn(|j| (0..4).map(|k| t[k] * reference[k][j]).sum());
        let g = e.g_vec(tau).unwrap();
        let gscale = g_ref.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for j in 0..4 {
            prop_assert!((g[j] - g_ref[j]).abs() <= 1e-8 * gscale);
        }
    }

    #[test]
    fn gains_match_direct_formula(p in param_tuple(), frac in 0.0f64..=1.0) {
        let e = EigenSystem::new(&p).unwrap();
        // Normalised gap ≥ e^{-12}, so the direct formula loses ≤ 6 digits.
        let tau = frac * p.horizon.min(12.0 / (e.nu3().abs() - e.nu1().abs()));
        let c = Coefficients::new(&p).unwrap().at(tau).unwrap();
        let d = direct_coefficients(&e, tau);
        let got = [c.v0, c.v1, c.v2, c.v3, c.x_gain, c.y_gain];
        for k in 0..6 {
            let tol = 1e-7 * d[k].abs().max(1e-3 * d[4].abs().max(d[5].abs()));
            prop_assert!((got[k] - d[k]).abs() <= tol, "k {} got {} want {}", k, got[k], d[k]);
        }
    }

    #[test]
    fn signal_weight_matches_definition(p in param_tuple(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let e = EigenSystem::new(&p).unwrap();
        let top = p.horizon.min(12.0 / (e.nu3().abs() - e.nu1().abs()));
        let (tau_t, tau_s) = (top * a.max(b), top * a.min(b));
        let coeffs = Coefficients::new(&p).unwrap();
        let got = coeffs.signal_weight(tau_t, &coeffs.gap(tau_t), tau_s);
        let d = direct_coefficients(&e, tau_t);
        let (st, gt) = (e.s_row4(tau_t).unwrap(), e.g_vec(tau_t).unwrap());
        let (ss, gs) = (e.s_row4(tau_s).unwrap(), e.g_vec(tau_s).unwrap());
        let want = d[0] * (d[3] * ss[2] / st[3] - gs[2] / gt[2]);
        prop_assert!((got - want).abs() <= 1e-7 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn gap_never_closes_on_random_tuples(p in param_tuple()) {
        let (ok, gap) = Coefficients::new(&p).unwrap().check_assumption(201).unwrap();
        prop_assert!(ok);
        prop_assert!(gap >= 1.0 - 1e-9);
    }
}

#[test]
fn weight_at_current_time_is_minus_one() {
    let c = Coefficients::new(&ModelParams::baseline()).unwrap();
    for tau in [0.0, 0.5, 3.0, 10.0] {
        let w = c.signal_weight(tau, &c.gap(tau), tau);
        assert!((w + 1.0).abs() < 1e-12, "{tau}: {w}");
    }
}

#[test]
fn long_horizons_keep_gains_finite() {
    let p = ModelParams {
        horizon: 400.0,
        ..ModelParams::baseline()
    };
    let c = Coefficients::new(&p).unwrap();
    for tau in [100.0, 250.0, 400.0] {
        let v = c.at(tau).unwrap();
        assert!(v.x_gain.is_finite() && v.y_gain.is_finite());
        // Far from the horizon the gains settle to their stationary values.
        let w = c.at(tau - 1.0).unwrap();
        assert!((v.x_gain - w.x_gain).abs() < 1e-9 * v.x_gain.abs());
    }
    assert!(EigenSystem::new(&p).unwrap().s_row4(400.0).is_err());
}

#[test]
fn sweep_is_reproducible_and_rejects_bad_boxes() {
    let a = sweep_assumption([0.0; 7], [100.0; 7], 50, 101, 9).unwrap();
    let b = sweep_assumption([0.0; 7], [100.0; 7], 50, 101, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.passed());
    assert_eq!(sweep_assumption([0.0; 7], [1.0; 7], 0, 101, 9).unwrap().samples, 0);
    assert!(sweep_assumption([2.0; 7], [1.0; 7], 5, 101, 9).is_err());
    assert!(sweep_assumption([-1.0; 7], [1.0; 7], 5, 101, 9).is_err());
}
