//! The built-in regression model battery.
//!
//! A fixed suite of models spanning the three solvability regimes, constrained
//! and unconstrained cones, quadratic and non-quadratic degrees, parametric
//! and callback coefficients. Integration tests and the acceptance suite
//! iterate over this battery so every invariant is exercised on every model.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cone::ConeSpec;
use crate::model::{
    BoundaryCoefficients, CallbackCoefficients, EpsEntry, HomogeneousModel, PowerLqFamily, Regime,
    RegimeParams,
};

/// A named battery model.
pub struct BatteryEntry {
    pub name: &'static str,
    pub model: HomogeneousModel,
}

fn case_i(delta: f64, l: f64) -> (Regime, RegimeParams) {
    (
        Regime::CaseI,
        RegimeParams {
            delta,
            l,
            ..Default::default()
        },
    )
}

fn power_lq(
    name: &'static str,
    p: f64,
    horizon: f64,
    cone: ConeSpec,
    family: PowerLqFamily,
    regime: Regime,
    regime_params: RegimeParams,
) -> BatteryEntry {
    let m = cone.dim();
    let n = family.c.len();
    BatteryEntry {
        name,
        model: HomogeneousModel {
            p,
            horizon,
            m,
            n,
            cone,
            coeffs: BoundaryCoefficients::PowerLq(family),
            regime,
            regime_params,
        },
    }
}

fn scalar_symmetric(a: f64, b: f64, c: f64, d: f64, q: f64, r: f64, g: f64, p: f64) -> PowerLqFamily {
    let mut fam = PowerLqFamily::symmetric(
        a,
        DVector::from_element(1, b),
        DVector::from_element(1, c),
        DMatrix::from_element(1, 1, d),
        q,
        DMatrix::from_element(1, 1, r),
        g,
        p,
    );
    fam.r_tilde = DMatrix::zeros(1, 1);
    fam
}

/// The regression battery: at least twelve models spanning CaseI/II/III,
/// all four cone variants, p ∈ {2, 2.5, 3}, and callback coefficients.
pub fn regression_battery() -> Vec<BatteryEntry> {
    let mut battery = Vec::new();

    // 1. Classical scalar LQ, unconstrained, p = 2.
    {
        let (regime, rp) = case_i(2.0, 1.0);
        battery.push(power_lq(
            "lq_scalar_unconstrained",
            2.0,
            1.0,
            ConeSpec::full(1),
            scalar_symmetric(0.1, 1.0, 0.2, 0.0, 1.0, 1.0, 1.0, 2.0),
            regime,
            rp,
        ));
    }

    // 2. Vector-control LQ, unconstrained, m = 2.
    {
        let (regime, rp) = case_i(4.0, 2.0);
        battery.push(power_lq(
            "lq_vector_unconstrained",
            2.0,
            1.0,
            ConeSpec::full(2),
            PowerLqFamily::symmetric(
                0.1,
                DVector::from_column_slice(&[1.0, 0.5]),
                DVector::from_element(1, 0.3),
                DMatrix::zeros(1, 2),
                1.0,
                DMatrix::identity(2, 2),
                1.0,
                2.0,
            ),
            regime,
            rp,
        ));
    }

    // 3. Cubic running cost, unconstrained.
    {
        let (regime, rp) = case_i(2.0, 3.0);
        battery.push(power_lq(
            "power_p3_unconstrained",
            3.0,
            1.0,
            ConeSpec::full(1),
            scalar_symmetric(0.2, 1.0, 0.1, 0.0, 1.0, 1.0, 1.0, 3.0),
            regime,
            rp,
        ));
    }

    // 4. Orthant-constrained scalar, negative uncontrolled drift.
    {
        let (regime, rp) = case_i(2.0, 2.0);
        battery.push(power_lq(
            "orthant_p2",
            2.0,
            1.0,
            ConeSpec::orthant(1),
            scalar_symmetric(-0.3, 1.0, 0.2, 0.0, 1.0, 1.0, 1.0, 2.0),
            regime,
            rp,
        ));
    }

    // 5. Orthant, p = 2.5, asymmetric drift/terminal weights, m = 2.
    {
        let (regime, rp) = case_i(4.0, 5.0);
        battery.push(power_lq(
            "orthant_p25_asymmetric",
            2.5,
            1.0,
            ConeSpec::orthant(2),
            PowerLqFamily {
                a_plus: 0.2.into(),
                a_minus: 0.4.into(),
                b_plus: DVector::from_column_slice(&[1.0, 0.3]),
                b_minus: DVector::from_column_slice(&[0.8, 0.5]),
                c: DVector::from_element(1, 0.1),
                d: DMatrix::zeros(1, 2),
                q: 0.8.into(),
                r: DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 1.2])),
                q_tilde: 0.0.into(),
                r_tilde: DMatrix::zeros(1, 2),
                g_plus: 1.0,
                g_minus: 2.0,
            },
            regime,
            rp,
        ));
    }

    // 6. Finitely generated cone in the plane.
    {
        let (regime, rp) = case_i(4.0, 2.0);
        battery.push(power_lq(
            "generated_cone_p2",
            2.0,
            1.0,
            ConeSpec::generated(vec![vec![1.0, 0.0], vec![1.0, 1.0]]),
            PowerLqFamily::symmetric(
                0.1,
                DVector::from_column_slice(&[0.8, 0.4]),
                DVector::from_element(1, 0.2),
                DMatrix::zeros(1, 2),
                1.0,
                DMatrix::identity(2, 2),
                1.0,
                2.0,
            ),
            regime,
            rp,
        ));
    }

    // 7. Single-ray cone under CaseII (bounded volatility, ε-dominated drift).
    battery.push(power_lq(
        "ray_case2",
        2.0,
        1.0,
        ConeSpec::ray(vec![1.0, 2.0]),
        PowerLqFamily::symmetric(
            0.1,
            DVector::from_column_slice(&[0.6, 0.3]),
            DVector::from_element(1, 0.3),
            DMatrix::zeros(1, 2),
            1.0,
            DMatrix::identity(2, 2),
            1.0,
            2.0,
        ),
        Regime::CaseII,
        RegimeParams {
            delta: 0.0,
            l: 1.0,
            eta: 0.0,
            eps_table: vec![
                EpsEntry { eps: 0.5, l_eps: 2.0 },
                EpsEntry { eps: 0.1, l_eps: 5.0 },
            ],
        },
    ));

    // 8. Callback coefficients: bounded nonlinear drift, constant volatility.
    {
        let coeffs = CallbackCoefficients {
            b_plus: Arc::new(|_t, v: &DVector<f64>| 0.5 * v.norm().sin()),
            b_minus: Arc::new(|_t, v: &DVector<f64>| -0.5 * v.norm().sin()),
            sigma_plus: Arc::new(|_t, _v| DVector::from_element(1, 0.3)),
            sigma_minus: Arc::new(|_t, _v| DVector::from_element(1, -0.3)),
            f_plus: Arc::new(|_t, v: &DVector<f64>| 1.0 + v.norm_squared()),
            f_minus: Arc::new(|_t, v: &DVector<f64>| 1.0 + v.norm_squared()),
            f_zero: Arc::new(|v: &DVector<f64>| v.norm_squared()),
            g_plus: 1.0,
            g_minus: 1.0,
        };
        battery.push(BatteryEntry {
            name: "callback_case2",
            model: HomogeneousModel {
                p: 2.0,
                horizon: 1.0,
                m: 1,
                n: 1,
                cone: ConeSpec::full(1),
                coeffs: BoundaryCoefficients::Callback(coeffs),
                regime: Regime::CaseII,
                regime_params: RegimeParams {
                    delta: 0.0,
                    l: 0.5,
                    eta: 0.0,
                    eps_table: vec![
                        EpsEntry { eps: 0.5, l_eps: 0.6 },
                        EpsEntry { eps: 0.01, l_eps: 0.6 },
                    ],
                },
            },
        });
    }

    // 9. CaseIII: control-dependent volatility, uniformly positive terminal.
    battery.push(power_lq(
        "case3_scalar",
        3.0,
        1.0,
        ConeSpec::full(1),
        scalar_symmetric(0.1, 0.4, 0.5, 1.0, 0.5, 1.0, 1.0, 3.0),
        Regime::CaseIII,
        RegimeParams {
            delta: 0.5,
            l: 2.0,
            eta: 0.5,
            eps_table: Vec::new(),
        },
    ));

    // 10. CaseIII with the mixed power cost term active.
    {
        let mut fam = scalar_symmetric(0.1, 0.3, 0.4, 0.8, 0.5, 1.0, 1.5, 3.0);
        fam.q_tilde = 0.5.into();
        fam.r_tilde = DMatrix::from_element(1, 1, 1.0);
        battery.push(power_lq(
            "case3_mixed_power",
            3.0,
            1.0,
            ConeSpec::full(1),
            fam,
            Regime::CaseIII,
            RegimeParams {
                delta: 0.5,
                l: 2.0,
                eta: 1.0,
                eps_table: Vec::new(),
            },
        ));
    }

    // 11. Zero driver: control-free dynamics, zero running cost.
    {
        let (regime, rp) = case_i(1.0, 1.0);
        battery.push(power_lq(
            "zero_driver",
            2.0,
            1.0,
            ConeSpec::orthant(1),
            scalar_symmetric(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0_f64.sqrt(), 2.0),
            regime,
            rp,
        ));
    }

    // 12. Pure drift: control-free, zero cost, exponential closed form.
    {
        let (regime, rp) = case_i(1.0, 1.0);
        battery.push(power_lq(
            "pure_drift",
            2.0,
            1.0,
            ConeSpec::full(1),
            scalar_symmetric(0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0),
            regime,
            rp,
        ));
    }

    // 13. Orthant instance whose unconstrained argmin is infeasible, so the
    // constraint binds at 0 on the plus branch.
    {
        let (regime, rp) = case_i(2.0, 2.0);
        battery.push(power_lq(
            "orthant_binding",
            2.0,
            1.0,
            ConeSpec::orthant(1),
            scalar_symmetric(0.5, 1.0, 0.1, 0.0, 1.0, 1.0, 1.0, 2.0),
            regime,
            rp,
        ));
    }

    // 14. Control-dependent volatility under CaseI (no closed-form fast path).
    {
        let (regime, rp) = case_i(2.0, 2.0);
        battery.push(power_lq(
            "lq_vol_control",
            2.0,
            1.0,
            ConeSpec::full(1),
            scalar_symmetric(0.1, 0.5, 0.2, 0.5, 1.0, 1.0, 1.0, 2.0),
            regime,
            rp,
        ));
    }

    battery
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SmallRng;

    #[test]
    fn battery_has_at_least_twelve_models() {
        assert!(regression_battery().len() >= 12);
    }

    #[test]
    fn all_models_validate() {
        for entry in regression_battery() {
            entry
                .model
                .validate()
                .unwrap_or_else(|e| panic!("{}: {e}", entry.name));
        }
    }

    #[test]
    fn all_regimes_covered() {
        let battery = regression_battery();
        for regime in [Regime::CaseI, Regime::CaseII, Regime::CaseIII] {
            assert!(
                battery.iter().any(|e| e.model.regime == regime),
                "no model declares {regime:?}"
            );
        }
    }

    #[test]
    fn all_cone_variants_covered() {
        let battery = regression_battery();
        let has = |f: fn(&ConeSpec) -> bool| battery.iter().any(|e| f(&e.model.cone));
        assert!(has(|c| matches!(c, ConeSpec::FullSpace { .. })));
        assert!(has(|c| matches!(c, ConeSpec::NonnegativeOrthant { .. })));
        assert!(has(|c| matches!(c, ConeSpec::SingleRay { .. })));
        assert!(has(|c| matches!(c, ConeSpec::FinitelyGenerated { .. })));
    }

    #[test]
    fn declared_regimes_pass_sampled_checks() {
        for entry in regression_battery() {
            let model = &entry.model;
            let mut rng = SmallRng::new(17);
            let mut grid = Vec::new();
            for &t in &[0.0, 0.5 * model.horizon, model.horizon] {
                for &scale in &[0.3, 1.0, 3.0] {
                    for _ in 0..20 {
                        grid.push((t, model.sample_cone_point(&mut rng, scale)));
                    }
                }
            }
            let diag = model.check_regime(&grid);
            assert!(
                diag.pass(),
                "{}: structural {:?}, {} violations (first: {:?})",
                entry.name,
                diag.structural_failures,
                diag.violations.len(),
                diag.violations.first().map(|v| &v.what)
            );
        }
    }
}
