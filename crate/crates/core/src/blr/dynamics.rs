use nalgebra::{DMatrix, DVector};

use crate::error::{DaisError, Result};

use super::model::{annealed_posterior, BlrModel};

/// One leapfrog step on a Gaussian annealed density as an affine map:
/// `theta' = A theta + B v + c` and `v_hat = C theta + D v + e`.
#[derive(Clone, Debug)]
pub struct UpdateMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub c_vec: DVector<f64>,
    pub e_vec: DVector<f64>,
}

impl UpdateMatrices {
    pub fn apply(&self, theta: &DVector<f64>, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (
            &self.a * theta + &self.b * v + &self.c_vec,
            &self.c * theta + &self.d * v + &self.e_vec,
        )
    }

    /// The `2d x 2d` block matrix `[[A, B], [C, D]]` and the offset `[c; e]`.
    pub fn joint(&self) -> (DMatrix<f64>, DVector<f64>) {
        let d = self.a.nrows();
        let mut t = DMatrix::zeros(2 * d, 2 * d);
        t.view_mut((0, 0), (d, d)).copy_from(&self.a);
        t.view_mut((0, d), (d, d)).copy_from(&self.b);
        t.view_mut((d, 0), (d, d)).copy_from(&self.c);
        t.view_mut((d, d), (d, d)).copy_from(&self.d);
        let mut off = DVector::zeros(2 * d);
        off.rows_mut(0, d).copy_from(&self.c_vec);
        off.rows_mut(d, d).copy_from(&self.e_vec);
        (t, off)
    }
}

/// Update matrices for unit mass:
/// `A = D = I - eta^2/2 Lambda`, `B = eta I - eta^3/4 Lambda`, `C = -eta Lambda`,
/// `c = eta^2/2 Lambda mu`, `e = eta Lambda mu`, at the annealed `(mu, Lambda)`.
pub fn update_matrices(model: &BlrModel, beta: f64, eta: f64) -> Result<UpdateMatrices> {
    update_matrices_with_mass(model, beta, eta, &DVector::from_element(model.d(), 1.0))
}

/// Update matrices for a diagonal mass `M`, with `W = M^-1`:
/// `A = I - eta^2/2 W Lambda`, `B = eta W - eta^3/4 W Lambda W`,
/// `C = -eta Lambda`, `D = I - eta^2/2 Lambda W`, `c = eta^2/2 W h`, `e = eta h`.
pub fn update_matrices_with_mass(
    model: &BlrModel,
    beta: f64,
    eta: f64,
    mass: &DVector<f64>,
) -> Result<UpdateMatrices> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(DaisError::invalid(format!("step size must be >= 0, got {eta}")));
    }
    let dim = model.d();
    if mass.len() != dim || mass.iter().any(|m| !(*m > 0.0)) {
        return Err(DaisError::invalid("mass must be a positive d-vector"));
    }
    let g = annealed_posterior(model, beta)?;
    // h = Lambda mu is known directly, so no solve is needed.
    let h = model.lambda_p() * model.mu_p() + model.lld_shift() * beta;
    let lambda = &g.lambda;
    let w = mass.map(|m| 1.0 / m);
    let wl = DMatrix::from_fn(dim, dim, |i, j| w[i] * lambda[(i, j)]);
    let lw = DMatrix::from_fn(dim, dim, |i, j| lambda[(i, j)] * w[j]);
    let wlw = DMatrix::from_fn(dim, dim, |i, j| w[i] * lambda[(i, j)] * w[j]);
    let eye = DMatrix::<f64>::identity(dim, dim);
    let e2 = eta * eta;
    Ok(UpdateMatrices {
        a: &eye - wl * (0.5 * e2),
        b: DMatrix::from_diagonal(&w) * eta - wlw * (0.25 * e2 * eta),
        c: lambda * -eta,
        d: &eye - lw * (0.5 * e2),
        c_vec: h.component_mul(&w) * (0.5 * e2),
        e_vec: h * eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitStream;
    use crate::sampler::{leapfrog, TransitionConfig};
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};
    use rand::Rng;

    fn model3() -> BlrModel {
        let mut rng = SplitStream::new(17).rng();
        let x = DMatrix::from_fn(15, 3, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(15, |_, _| rng.random::<f64>());
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
        let lp = &a * a.transpose() + DMatrix::identity(3, 3);
        BlrModel::new(x, y, 0.5, dvector![0.1, -0.2, 0.3], lp).unwrap()
    }

    #[test]
    fn toy_matrices_by_hand() {
        let m = BlrModel::new(dmatrix![1.0], dvector![1.0], 1.0, dvector![0.0], dmatrix![1.0]).unwrap();
        let u = update_matrices(&m, 1.0, 0.1).unwrap();
        // Lambda = 2, Lambda mu = 1.
        assert_relative_eq!(u.a[(0, 0)], 1.0 - 0.01, epsilon = 1e-15);
        assert_relative_eq!(u.b[(0, 0)], 0.1 - 0.0005, epsilon = 1e-15);
        assert_relative_eq!(u.c[(0, 0)], -0.2, epsilon = 1e-15);
        assert_relative_eq!(u.c_vec[0], 0.005, epsilon = 1e-15);
        assert_relative_eq!(u.e_vec[0], 0.1, epsilon = 1e-15);
        let cfg = TransitionConfig::identity(0.0, 1).unwrap();
        let (t, v) = leapfrog(&dvector![0.0], &dvector![0.0], 0.1, 1.0, &m.target(), &cfg).unwrap();
        assert!((t[0] - 0.005).abs() < 1e-12 && (v[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn small_step_limit() {
        let m = model3();
        let u = update_matrices(&m, 0.5, 1e-9).unwrap();
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!((&u.a - &eye).amax() < 1e-15 && (&u.d - &eye).amax() < 1e-15);
        assert!(u.b.amax() < 2e-9 && u.c.amax() < 1e-7);
        assert!(u.c_vec.amax() < 1e-15 && u.e_vec.amax() < 1e-7);
    }

    #[test]
    fn annealed_mean_is_a_fixed_point() {
        let m = model3();
        let mu = annealed_posterior(&m, 0.4).unwrap().mu;
        let u = update_matrices(&m, 0.4, 0.3).unwrap();
        let (t, v) = u.apply(&mu, &DVector::zeros(3));
        assert!((t - &mu).amax() < 1e-12 && v.amax() < 1e-12);
    }

    #[test]
    fn matches_generic_leapfrog_with_mass() {
        let m = model3();
        let mass = dvector![0.5, 1.0, 3.0];
        let cfg = TransitionConfig::new(0.3, mass.clone()).unwrap();
        let target = m.target();
        let mut rng = SplitStream::new(5).rng();
        for _ in 0..50 {
            let beta: f64 = rng.random();
            let eta = 0.05 + 0.4 * rng.random::<f64>();
            let theta = DVector::from_fn(3, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let v = DVector::from_fn(3, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let u = update_matrices_with_mass(&m, beta, eta, &mass).unwrap();
            let (ta, va) = u.apply(&theta, &v);
            let (tl, vl) = leapfrog(&theta, &v, eta, beta, &target, &cfg).unwrap();
            assert!((ta - tl).amax() < 1e-12 && (va - vl).amax() < 1e-12);
        }
    }

    #[test]
    fn joint_form_agrees_with_blocks() {
        let m = model3();
        let u = update_matrices(&m, 0.8, 0.2).unwrap();
        let (t, off) = u.joint();
        let z = dvector![0.1, 0.2, 0.3, -1.0, 0.5, 0.0];
        let out = t * &z + off;
        let (a, b) = u.apply(&z.rows(0, 3).into_owned(), &z.rows(3, 3).into_owned());
        assert_relative_eq!(out.rows(0, 3).into_owned(), a, epsilon = 1e-14);
        assert_relative_eq!(out.rows(3, 3).into_owned(), b, epsilon = 1e-14);
    }
}
