//! Minimization of a black-box scalar objective over a cone.
//!
//! Projected gradient descent with central-difference gradients and Armijo
//! backtracking, multi-started from the origin, scaled cone generators and
//! random cone samples. A radial line search detects objectives that decrease
//! without bound along a ray, in which case the infimum is reported as
//! divergent instead of returning a finite lie.

use nalgebra::DVector;

use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::rng::SmallRng;

#[derive(Debug, Clone)]
pub struct MinimizerConfig {
    pub multistart_count: usize,
    pub max_iterations: usize,
    pub gradient_step_tolerance: f64,
    pub value_tolerance: f64,
    /// Cap on the control magnitude explored by the radial divergence scan.
    pub radial_search_max: f64,
    pub finite_difference_h: f64,
    /// Seed for the random multistart points.
    pub seed: u64,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            multistart_count: 8,
            max_iterations: 500,
            gradient_step_tolerance: 1e-9,
            value_tolerance: 1e-9,
            radial_search_max: 1e6,
            finite_difference_h: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimizeStatus {
    Converged,
    IterationCap,
    /// The objective decreases without bound along some ray of the cone.
    DivergentToMinusInfinity,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub argmin: DVector<f64>,
    pub value: f64,
    pub status: MinimizeStatus,
}

/// Minimizes `objective` over the cone. The origin is always a feasible start,
/// so the returned value never exceeds `objective(0)`.
pub fn minimize(
    cone: &ConeSpec,
    objective: &(dyn Fn(&DVector<f64>) -> f64 + Sync),
    config: &MinimizerConfig,
) -> Result<Minimum> {
    let m = cone.dim();
    let eval = |v: &DVector<f64>| -> Result<f64> {
        let y = objective(v);
        if y.is_nan() {
            return Err(Error::Numerical(format!("objective returned NaN at {v:?}")));
        }
        Ok(y)
    };

    let zero = DVector::zeros(m);
    let f0 = eval(&zero)?;

    // Directions used for both the divergence scan and multistart seeding.
    let mut rng = SmallRng::new(config.seed);
    let mut directions = cone.generator_directions();
    while directions.len() < config.multistart_count {
        let raw = DVector::from_fn(m, |_, _| rng.normal());
        let proj = cone.project(&raw)?;
        if proj.norm() > 1e-12 {
            directions.push(proj.normalize());
        } else if matches!(cone, ConeSpec::SingleRay { .. }) {
            break; // a ray has a single direction; don't spin forever
        }
    }

    // Radial divergence scan: along each direction, march radii geometrically
    // up to the cap; a persistently negative slope over the last decade means
    // the infimum is -inf.
    for dir in &directions {
        let mut r = 1.0;
        let mut prev = eval(&(dir * r))?;
        let mut diverging = prev < f0;
        while r * 10.0 <= config.radial_search_max {
            let r_next = r * 10.0;
            let val = eval(&(dir * r_next))?;
            diverging = val < prev;
            prev = val;
            r = r_next;
        }
        if diverging {
            let slope = (prev - eval(&(dir * (r / 10.0)))?) / (r - r / 10.0);
            if slope < -config.value_tolerance {
                return Ok(Minimum {
                    argmin: dir * r,
                    value: prev,
                    status: MinimizeStatus::DivergentToMinusInfinity,
                });
            }
        }
    }

    // Multistart projected gradient descent.
    let mut starts: Vec<DVector<f64>> = vec![zero.clone()];
    for dir in directions.iter().take(config.multistart_count) {
        starts.push(dir.clone());
    }
    for _ in 0..config.multistart_count.saturating_sub(starts.len()) {
        let raw = DVector::from_fn(m, |_, _| 2.0 * rng.normal());
        starts.push(cone.project(&raw)?);
    }

    let mut best: Option<(DVector<f64>, f64, bool)> = None;
    for start in &starts {
        let (x, fx, converged) = descend(cone, &eval, start, config)?;
        best = Some(match best {
            None => (x, fx, converged),
            Some((bx, bf, bc)) => {
                if better(&x, fx, &bx, bf, config.value_tolerance) {
                    (x, fx, converged)
                } else {
                    (bx, bf, bc || converged)
                }
            }
        });
    }
    let (mut argmin, mut value, converged) = best.expect("at least one start");
    if f0 < value {
        argmin = zero;
        value = f0;
    }
    Ok(Minimum {
        argmin,
        value,
        status: if converged {
            MinimizeStatus::Converged
        } else {
            MinimizeStatus::IterationCap
        },
    })
}

/// Tie-break: better value wins; among equal values (within tol) prefer the
/// smaller norm, then the lexicographically smaller point.
fn better(x: &DVector<f64>, fx: f64, y: &DVector<f64>, fy: f64, tol: f64) -> bool {
    if (fx - fy).abs() > tol {
        return fx < fy;
    }
    let (nx, ny) = (x.norm(), y.norm());
    if (nx - ny).abs() > 1e-12 {
        return nx < ny;
    }
    for i in 0..x.len() {
        if x[i] != y[i] {
            return x[i] < y[i];
        }
    }
    false
}

fn gradient(
    eval: &dyn Fn(&DVector<f64>) -> Result<f64>,
    x: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    let m = x.len();
    let mut g = DVector::zeros(m);
    let mut xp = x.clone();
    for i in 0..m {
        let step = h * (1.0 + x[i].abs());
        xp[i] = x[i] + step;
        let fp = eval(&xp)?;
        xp[i] = x[i] - step;
        let fm = eval(&xp)?;
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    Ok(g)
}

fn descend(
    cone: &ConeSpec,
    eval: &dyn Fn(&DVector<f64>) -> Result<f64>,
    start: &DVector<f64>,
    config: &MinimizerConfig,
) -> Result<(DVector<f64>, f64, bool)> {
    let mut x = start.clone();
    let mut fx = eval(&x)?;
    let mut alpha = 1.0f64;
    for _ in 0..config.max_iterations {
        let g = gradient(eval, &x, config.finite_difference_h)?;
        let mut accepted = false;
        let mut a = alpha;
        for _ in 0..60 {
            let cand = cone.project(&(&x - &g * a))?;
            let step = &cand - &x;
            if step.norm() <= config.gradient_step_tolerance * (1.0 + x.norm()) {
                // Stationary at this scale.
                return Ok((x, fx, true));
            }
            let fc = eval(&cand)?;
            if fc <= fx + 1e-4 * g.dot(&step) {
                x = cand;
                fx = fc;
                alpha = (a * 1.8).min(1e4);
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted {
            // No descent direction found at any step size.
            return Ok((x, fx, true));
        }
    }
    Ok((x, fx, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_cfg() -> MinimizerConfig {
        MinimizerConfig::default()
    }

    #[test]
    fn quadratic_minimum_at_origin() {
        let cone = ConeSpec::full(3);
        let min = minimize(&cone, &|v| v.norm_squared(), &default_cfg()).unwrap();
        assert_eq!(min.status, MinimizeStatus::Converged);
        assert!(min.value.abs() < 1e-12);
        assert!(min.argmin.norm() < 1e-6);
    }

    #[test]
    fn scalar_quadratic_with_linear_term() {
        // v^2 + 2v has its minimum at v = -1 with value -1.
        let cone = ConeSpec::full(1);
        let min = minimize(&cone, &|v| v[0] * v[0] + 2.0 * v[0], &default_cfg()).unwrap();
        assert_relative_eq!(min.argmin[0], -1.0, epsilon = 1e-5);
        assert_relative_eq!(min.value, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn unbounded_ray_is_flagged() {
        let cone = ConeSpec::orthant(1);
        let min = minimize(&cone, &|v| -v.norm(), &default_cfg()).unwrap();
        assert_eq!(min.status, MinimizeStatus::DivergentToMinusInfinity);
    }

    #[test]
    fn never_worse_than_origin() {
        let cone = ConeSpec::orthant(2);
        let cfg = default_cfg();
        // Strictly increasing away from 0 on the orthant.
        let min = minimize(&cone, &|v| v[0].powi(4) + (v[1] + 1.0).powi(2), &cfg).unwrap();
        let origin_val = 1.0;
        assert!(min.value <= origin_val + cfg.value_tolerance);
    }

    #[test]
    fn orthant_constraint_binds() {
        // Unconstrained minimum at (-1, -1); on the orthant the optimum is 0.
        let cone = ConeSpec::orthant(2);
        let min = minimize(
            &cone,
            &|v| (v[0] + 1.0).powi(2) + (v[1] + 1.0).powi(2),
            &default_cfg(),
        )
        .unwrap();
        assert!(min.argmin.norm() < 1e-6);
        assert_relative_eq!(min.value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn full_space_matches_brute_force_grid() {
        // Smooth strictly convex objective on m = 2.
        let cone = ConeSpec::full(2);
        let obj = |v: &DVector<f64>| {
            2.0 * (v[0] - 0.3).powi(2) + (v[1] + 0.7).powi(2) + 0.5 * v[0] * v[1]
        };
        let min = minimize(&cone, &obj, &default_cfg()).unwrap();
        let mut best = f64::INFINITY;
        let steps = 600;
        for i in 0..=steps {
            for j in 0..=steps {
                let v = DVector::from_column_slice(&[
                    -3.0 + 6.0 * i as f64 / steps as f64,
                    -3.0 + 6.0 * j as f64 / steps as f64,
                ]);
                best = best.min(obj(&v));
            }
        }
        assert!((min.value - best).abs() / best.abs() < 1e-3);
        assert!(min.value <= best + 1e-9);
    }

    #[test]
    fn ray_matches_line_search() {
        let d = vec![1.0, 2.0];
        let cone = ConeSpec::ray(d.clone());
        let obj = |v: &DVector<f64>| (v[0] - 2.0).powi(2) + (v[1] - 1.0).powi(2);
        let min = minimize(&cone, &obj, &default_cfg()).unwrap();
        // 1-D oracle over lambda >= 0.
        let dv = DVector::from_column_slice(&d);
        let mut best = f64::INFINITY;
        let mut best_l = 0.0;
        for k in 0..=100_000 {
            let l = 5.0 * k as f64 / 100_000.0;
            let val = obj(&(&dv * l));
            if val < best {
                best = val;
                best_l = l;
            }
        }
        assert!((min.value - best).abs() < 1e-6);
        assert!((min.argmin - dv * best_l).norm() < 1e-3);
    }

    #[test]
    fn nan_objective_is_an_error() {
        let cone = ConeSpec::full(1);
        assert!(minimize(&cone, &|_v| f64::NAN, &default_cfg()).is_err());
    }
}
