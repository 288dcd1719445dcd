//! Closed convex cones in ℝᵐ: membership tests and Euclidean projection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed convex cone `Γ ⊆ ℝᵐ`, given by one of several finite
/// representations. The origin belongs to every variant and membership is
/// invariant under positive scaling.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConeSpec {
    /// The whole space ℝᵐ (unconstrained control).
    FullSpace { m: usize },
    /// The nonnegative orthant ℝᵐ₊.
    NonnegativeOrthant { m: usize },
    /// The ray `{λd : λ ≥ 0}` spanned by a nonzero direction.
    SingleRay { direction: Vec<f64> },
    /// `{Dλ : λ ≥ 0}` for an m×k matrix of generator columns.
    FinitelyGenerated { generators: Vec<Vec<f64>> },
}

impl ConeSpec {
    pub fn full(m: usize) -> Self {
        ConeSpec::FullSpace { m }
    }

    pub fn orthant(m: usize) -> Self {
        ConeSpec::NonnegativeOrthant { m }
    }

    pub fn ray(direction: Vec<f64>) -> Self {
        ConeSpec::SingleRay { direction }
    }

    /// Build from generator columns (each of the same dimension).
    pub fn generated(generators: Vec<Vec<f64>>) -> Self {
        ConeSpec::FinitelyGenerated { generators }
    }

    /// Ambient dimension m.
    pub fn dim(&self) -> usize {
        match self {
            ConeSpec::FullSpace { m } | ConeSpec::NonnegativeOrthant { m } => *m,
            ConeSpec::SingleRay { direction } => direction.len(),
            ConeSpec::FinitelyGenerated { generators } => {
                generators.first().map_or(0, |g| g.len())
            }
        }
    }

    /// Validates the representation: nonzero generators, consistent dimensions.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConeSpec::FullSpace { m } | ConeSpec::NonnegativeOrthant { m } => {
                if *m == 0 {
                    return Err(Error::InvalidModel("cone dimension must be >= 1".into()));
                }
            }
            ConeSpec::SingleRay { direction } => {
                if direction.is_empty() || direction.iter().all(|x| *x == 0.0) {
                    return Err(Error::InvalidModel("ray direction must be nonzero".into()));
                }
            }
            ConeSpec::FinitelyGenerated { generators } => {
                if generators.is_empty() {
                    return Err(Error::InvalidModel("need at least one generator".into()));
                }
                let m = generators[0].len();
                for g in generators {
                    if g.len() != m {
                        return Err(Error::DimensionMismatch {
                            expected: m,
                            got: g.len(),
                        });
                    }
                    if g.iter().all(|x| *x == 0.0) {
                        return Err(Error::InvalidModel("generators must be nonzero".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// True iff the Euclidean distance from `v` to the cone is at most `tol`.
    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> Result<bool> {
        self.check_dim(v)?;
        let proj = self.project(v)?;
        Ok((v - proj).norm() <= tol)
    }

    /// Euclidean projection of `v` onto the cone.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v)?;
        Ok(match self {
            ConeSpec::FullSpace { .. } => v.clone(),
            ConeSpec::NonnegativeOrthant { .. } => v.map(|x| x.max(0.0)),
            ConeSpec::SingleRay { direction } => {
                let d = DVector::from_column_slice(direction);
                let lambda = (d.dot(v) / d.norm_squared()).max(0.0);
                d * lambda
            }
            ConeSpec::FinitelyGenerated { generators } => {
                let m = self.dim();
                let k = generators.len();
                let d = DMatrix::from_fn(m, k, |i, j| generators[j][i]);
                let lambda = nnls(&d, v);
                &d * lambda
            }
        })
    }

    /// A finite set of cone members spanning the representation; used for
    /// multistart seeding in the minimizer.
    pub fn generator_directions(&self) -> Vec<DVector<f64>> {
        let m = self.dim();
        match self {
            ConeSpec::FullSpace { .. } => {
                let mut dirs = Vec::with_capacity(2 * m);
                for i in 0..m {
                    let mut e = DVector::zeros(m);
                    e[i] = 1.0;
                    dirs.push(e.clone());
                    dirs.push(-e);
                }
                dirs
            }
            ConeSpec::NonnegativeOrthant { .. } => (0..m)
                .map(|i| {
                    let mut e = DVector::zeros(m);
                    e[i] = 1.0;
                    e
                })
                .collect(),
            ConeSpec::SingleRay { direction } => {
                let d = DVector::from_column_slice(direction);
                vec![d.normalize()]
            }
            ConeSpec::FinitelyGenerated { generators } => generators
                .iter()
                .map(|g| DVector::from_column_slice(g).normalize())
                .collect(),
        }
    }
}

/// Lawson-Hanson nonnegative least squares: minimizes `|D λ - v|` over `λ ≥ 0`.
fn nnls(d: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let k = d.ncols();
    let mut passive = vec![false; k];
    let mut lambda = DVector::zeros(k);
    let tol = 1e-12 * (1.0 + v.norm());

    for _ in 0..(10 * k + 50) {
        let residual = v - d * &lambda;
        let grad = d.transpose() * residual;
        // Most-violating free variable.
        let mut best = None;
        for j in 0..k {
            if !passive[j] && grad[j] > tol {
                match best {
                    Some((_, g)) if grad[j] <= g => {}
                    _ => best = Some((j, grad[j])),
                }
            }
        }
        let Some((enter, _)) = best else { break };
        passive[enter] = true;

        // Inner loop: solve the unconstrained LS on the passive set, clip back
        // any variable that went negative.
        loop {
            let active: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let sub = d.select_columns(active.iter());
            let sol = lstsq(&sub, v);
            if sol.iter().all(|&x| x > tol) {
                lambda.fill(0.0);
                for (idx, &j) in active.iter().enumerate() {
                    lambda[j] = sol[idx];
                }
                break;
            }
            // Step from lambda toward sol, stopping at the first zero crossing.
            let mut alpha = 1.0f64;
            for (idx, &j) in active.iter().enumerate() {
                if sol[idx] <= tol {
                    let denom = lambda[j] - sol[idx];
                    if denom > 0.0 {
                        alpha = alpha.min(lambda[j] / denom);
                    }
                }
            }
            for (idx, &j) in active.iter().enumerate() {
                lambda[j] += alpha * (sol[idx] - lambda[j]);
                if lambda[j] <= tol {
                    lambda[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    lambda
}

/// Least squares via normal equations with a small ridge fallback.
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let n = ata.nrows();
    match ata.clone().cholesky() {
        Some(ch) => ch.solve(&atb),
        None => {
            let ridge = &ata + DMatrix::identity(n, n) * 1e-12;
            ridge
                .cholesky()
                .map(|ch| ch.solve(&atb))
                .unwrap_or_else(|| DVector::zeros(n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vecd(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn origin_in_every_cone() {
        let cones = [
            ConeSpec::full(3),
            ConeSpec::orthant(2),
            ConeSpec::ray(vec![1.0, -2.0]),
            ConeSpec::generated(vec![vec![1.0, 1.0], vec![1.0, -1.0]]),
        ];
        for cone in &cones {
            let zero = DVector::zeros(cone.dim());
            assert!(cone.contains(&zero, 0.0).unwrap());
        }
    }

    #[test]
    fn orthant_membership() {
        let cone = ConeSpec::orthant(2);
        assert!(cone.contains(&vecd(&[1.0, 0.0]), 0.0).unwrap());
        assert!(!cone.contains(&vecd(&[1.0, -1e-3]), 1e-6).unwrap());
    }

    #[test]
    fn generated_membership_hand_oracle() {
        // (2, 0) = 1*(1,1) + 1*(1,-1), both weights nonnegative.
        let cone = ConeSpec::generated(vec![vec![1.0, 1.0], vec![1.0, -1.0]]);
        assert!(cone.contains(&vecd(&[2.0, 0.0]), 1e-9).unwrap());
        // (0, 1) = a(1,1)+b(1,-1) needs a+b=0, a-b=1 -> b<0, not in the cone.
        assert!(!cone.contains(&vecd(&[0.0, 1.0]), 1e-6).unwrap());
    }

    #[test]
    fn orthant_projection_is_componentwise_clip() {
        let cone = ConeSpec::orthant(3);
        let v = vecd(&[1.5, -2.0, 0.0]);
        let p = cone.project(&v).unwrap();
        assert_eq!(p, vecd(&[1.5, 0.0, 0.0]));
    }

    #[test]
    fn ray_projection_formula() {
        let cone = ConeSpec::ray(vec![3.0, 4.0]);
        let v = vecd(&[1.0, 0.0]);
        // max(d.v,0)/|d|^2 * d = 3/25 * (3,4)
        let p = cone.project(&v).unwrap();
        assert_relative_eq!(p[0], 9.0 / 25.0, epsilon = 1e-14);
        assert_relative_eq!(p[1], 12.0 / 25.0, epsilon = 1e-14);
        // Behind the ray projects to the origin.
        let back = cone.project(&vecd(&[-3.0, -4.0])).unwrap();
        assert_eq!(back.norm(), 0.0);
    }

    #[test]
    fn generated_projection_matches_grid_oracle() {
        let cone = ConeSpec::generated(vec![vec![1.0, 0.0], vec![1.0, 1.0]]);
        let v = vecd(&[-1.0, 2.0]);
        let p = cone.project(&v).unwrap();
        // Brute-force over nonnegative weights on a fine grid.
        let mut best = (f64::INFINITY, vecd(&[0.0, 0.0]));
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=steps {
                let a = 4.0 * i as f64 / steps as f64;
                let b = 4.0 * j as f64 / steps as f64;
                let w = vecd(&[a + b, b]);
                let dist = (&w - &v).norm();
                if dist < best.0 {
                    best = (dist, w);
                }
            }
        }
        assert!((p.clone() - best.1).norm() < 2e-2);
        assert!((&v - &p).norm() <= best.0 + 1e-9);
        // Idempotent.
        let pp = cone.project(&p).unwrap();
        assert!((pp - &p).norm() < 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let cone = ConeSpec::orthant(2);
        assert!(cone.contains(&vecd(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn projection_nonexpansive_sampled() {
        let cone = ConeSpec::generated(vec![vec![1.0, 0.5], vec![-0.2, 1.0]]);
        let mut state = 0x12345u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for _ in 0..200 {
            let u = vecd(&[4.0 * next(), 4.0 * next()]);
            let v = vecd(&[4.0 * next(), 4.0 * next()]);
            let pu = cone.project(&u).unwrap();
            let pv = cone.project(&v).unwrap();
            assert!((pu - pv).norm() <= (&u - &v).norm() + 1e-9);
        }
    }
}
