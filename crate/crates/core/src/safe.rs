//! SAFE controller design: analytic linearization at the upright origin,
//! continuous-time LQR gain, saturated state-feedback law.
//!
//! The Riccati equation `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` is solved with the
//! matrix sign function of the Hamiltonian, then polished with Newton
//! (Kleinman) steps until the residual is at round-off level.

use nalgebra::{Complex, DMatrix, Matrix4, RowVector4, Vector4};

use crate::error::{Error, Result};
use crate::plant::{PlantParams, State};

/// Linear model `ẋ = A·x + B·u` with `u` the voltage deviation from neutral.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
}

impl LinearModel {
    pub fn controllability_matrix(&self) -> Matrix4<f64> {
        let mut c = Matrix4::zeros();
        let mut col = self.b;
        for j in 0..4 {
            c.set_column(j, &col);
            col = self.a * col;
        }
        c
    }

    pub fn controllability_rank(&self) -> usize {
        numerical_rank(&DMatrix::from_iterator(
            4,
            4,
            self.controllability_matrix().iter().copied(),
        ))
    }
}

/// State-feedback gain, volts per state unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafeGain {
    pub k: [f64; 4],
}

impl SafeGain {
    pub fn row(&self) -> RowVector4<f64> {
        RowVector4::from_row_slice(&self.k)
    }

    /// One line of four decimals.
    pub fn to_text(&self) -> String {
        let parts: Vec<String> = self.k.iter().map(|x| format!("{x:.17e}")).collect();
        parts.join(" ")
    }

    /// Parses four whitespace- or comma-separated numbers; `#` lines are comments.
    pub fn from_text(text: &str) -> Result<Self> {
        let values: Vec<f64> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .flat_map(|l| l.split(|c: char| c.is_whitespace() || c == ','))
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|e| Error::GainFormat(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        let k: [f64; 4] = values
            .try_into()
            .map_err(|v: Vec<f64>| Error::GainFormat(format!("expected 4 numbers, got {}", v.len())))?;
        if k.iter().any(|x| !x.is_finite()) {
            return Err(Error::GainFormat("non-finite gain entry".into()));
        }
        Ok(Self { k })
    }
}

/// Exact linearization of [`crate::plant::derivatives`] at the upright origin,
/// dead zone ignored (force = Cv·u).
pub fn linearize(params: &PlantParams) -> LinearModel {
    let (big_m, m, l, g) = (params.cart_mass, params.rod_mass, params.rod_length, params.gravity);
    let half_ml = 0.5 * m * l;
    let inertia = m * l * l / 3.0;
    let det = (big_m + m) * inertia - half_ml * half_ml;
    let gravity_torque = half_ml * g;

    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 1.0,                             0.0,                                 0.0,
        0.0, -inertia * params.cf / det,      -half_ml * gravity_torque / det,     0.0,
        0.0, 0.0,                             0.0,                                 1.0,
        0.0, half_ml * params.cf / det,       (big_m + m) * gravity_torque / det,  0.0,
    );
    let b = Vector4::new(0.0, inertia * params.cv / det, 0.0, -half_ml * params.cv / det);
    LinearModel { a, b }
}

/// Default LQR weights: diag(100, 1, 100, 1), R = 1.
pub fn default_weights() -> (Matrix4<f64>, f64) {
    (Matrix4::from_diagonal(&Vector4::new(100.0, 1.0, 100.0, 1.0)), 1.0)
}

pub fn design_gain(model: &LinearModel, q: &Matrix4<f64>, r: f64) -> Result<SafeGain> {
    solve_lqr(model, q, r).map(|sol| sol.gain)
}

/// Gain together with the Riccati solution it came from.
#[derive(Clone, Debug)]
pub struct LqrSolution {
    pub gain: SafeGain,
    pub riccati: DMatrix<f64>,
    /// Max-norm Riccati residual of `riccati`.
    pub residual: f64,
}

pub fn solve_lqr(model: &LinearModel, q: &Matrix4<f64>, r: f64) -> Result<LqrSolution> {
    if !(r > 0.0) {
        return Err(Error::InvalidParams(format!(
            "LQR input cost must be positive, got {r}"
        )));
    }
    let rank = model.controllability_rank();
    if rank < 4 {
        return Err(Error::Uncontrollable { rank, dim: 4 });
    }
    let a = to_dynamic(&model.a);
    let b = DMatrix::from_column_slice(4, 1, model.b.as_slice());
    let q = to_dynamic(q);
    let r = DMatrix::from_element(1, 1, r);
    let p = solve_care(&a, &b, &q, &r)?;
    let k = lqr_gain(&b, &r, &p)?;
    let residual = riccati_residual(&a, &b, &q, &r, &p);
    Ok(LqrSolution {
        gain: SafeGain {
            k: [k[(0, 0)], k[(0, 1)], k[(0, 2)], k[(0, 3)]],
        },
        riccati: p,
        residual,
    })
}

/// Closed-loop eigenvalues of `A − B·K`.
pub fn closed_loop_eigenvalues(model: &LinearModel, gain: &SafeGain) -> Vec<Complex<f64>> {
    let closed = model.a - model.b * gain.row();
    let mut eig: Vec<Complex<f64>> = closed.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    eig
}

pub fn is_stabilizing(model: &LinearModel, gain: &SafeGain) -> bool {
    closed_loop_eigenvalues(model, gain).iter().all(|z| z.re < 0.0)
}

/// Saturated feedback voltage `clamp(v_neutral − K·(state − target))`.
pub fn safe_action(gain: &SafeGain, state: &State, target: &State, params: &PlantParams) -> f64 {
    let e = (*state - *target).to_array();
    let u: f64 = gain.k.iter().zip(e).map(|(k, x)| k * x).sum();
    params.clamp_voltage(params.v_neutral - u)
}

/// Stabilizing solution of the continuous algebraic Riccati equation.
pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Riccati("R is singular".into()))?;
    let s = b * &r_inv * b.transpose();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let w = matrix_sign(h)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Riccati(e.to_string()))?;
    let mut p = symmetrize(&p);

    // Kleinman refinement
    let mut best = riccati_residual(a, b, q, r, &p);
    for _ in 0..20 {
        if best <= 1e-13 * (1.0 + p.amax()) {
            break;
        }
        let k = lqr_gain(b, r, &p)?;
        let closed = a - b * &k;
        let rhs = -(q + k.transpose() * r * &k);
        let next = symmetrize(&solve_lyapunov(&closed, &rhs)?);
        let res = riccati_residual(a, b, q, r, &next);
        if !(res < best) {
            break;
        }
        p = next;
        best = res;
    }
    if !best.is_finite() || best > 1e-8 {
        return Err(Error::Riccati(format!("residual {best:e} above 1e-8")));
    }
    Ok(p)
}

/// Max-norm of `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let r_inv = match r.clone().try_inverse() {
        Some(inv) => inv,
        None => return f64::INFINITY,
    };
    let res = a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q;
    res.amax()
}

fn lqr_gain(b: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Riccati("R is singular".into()))?;
    Ok(r_inv * b.transpose() * p)
}

/// Solves `AᵀX + XA = C` through the Kronecker form.
fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let vec_c = DMatrix::from_column_slice(n * n, 1, c.as_slice());
    let x = op
        .lu()
        .solve(&vec_c)
        .ok_or_else(|| Error::Riccati("singular Lyapunov operator".into()))?;
    Ok(DMatrix::from_column_slice(n, n, x.as_slice()))
}

/// Newton iteration for the matrix sign function with determinant scaling.
fn matrix_sign(mut z: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = z.nrows() as f64;
    for _ in 0..100 {
        let inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Riccati("Hamiltonian has eigenvalues on the imaginary axis".into()))?;
        let det = z.determinant().abs();
        let c = if det.is_finite() && det > 0.0 {
            det.powf(-1.0 / dim)
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm();
        let scale = next.norm();
        z = next;
        if !scale.is_finite() {
            break;
        }
        if change <= 1e-13 * scale {
            return Ok(z);
        }
    }
    Err(Error::Riccati("sign iteration did not converge".into()))
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.amax();
    let tol = max * 1e-10 * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

fn to_dynamic(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(4, 4, m.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_integrator_has_unit_gain() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let p = solve_care(&DMatrix::zeros(1, 1), &one, &one, &one).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
        let k = lqr_gain(&one, &one, &p).unwrap();
        assert!((k[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_unstable_plant() {
        // ẋ = x + u, Q = R = 1: P² − 2P − 1 = 0 → P = 1 + √2
        let one = DMatrix::from_element(1, 1, 1.0);
        let p = solve_care(&one, &one, &one, &one).unwrap();
        assert!((p[(0, 0)] - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn decoupled_pair_of_integrators() {
        // two independent ẋ = u channels embedded in a 4x4 block: K row = (1, 0) blocks
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::identity(2, 2);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::identity(2, 2);
        let p = solve_care(&a, &b, &q, &r).unwrap();
        assert!((p - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn kinematic_row() {
        let model = linearize(&PlantParams::default());
        assert_eq!(model.a.row(0), RowVector4::new(0.0, 1.0, 0.0, 0.0));
        assert_eq!(model.a.row(2), RowVector4::new(0.0, 0.0, 0.0, 1.0));
        assert_eq!(model.controllability_rank(), 4);
    }

    #[test]
    fn massless_rod_limit() {
        // m → 0: p̈ = (Cv·u − Cf·v)/M, θ̈ = 3g/(2l)·θ − 3/(2l)·p̈
        let params = PlantParams {
            rod_mass: 1e-9,
            ..PlantParams::default()
        };
        let model = linearize(&params);
        let (big_m, l, g, cv, cf) = (1.0, 0.25, 9.81, 4.0, 5.0);
        assert!((model.b[1] - cv / big_m).abs() < 1e-6);
        assert!((model.b[3] + 1.5 * cv / (l * big_m)).abs() < 1e-6);
        assert!((model.a[(1, 1)] + cf / big_m).abs() < 1e-6);
        assert!(model.a[(1, 2)].abs() < 1e-6);
        assert!((model.a[(3, 2)] - 1.5 * g / l).abs() < 1e-6);
        assert!((model.a[(3, 1)] - 1.5 * cf / (l * big_m)).abs() < 1e-6);
    }

    #[test]
    fn default_design_is_stabilizing() {
        let model = linearize(&PlantParams::default());
        let (q, r) = default_weights();
        let gain = design_gain(&model, &q, r).unwrap();
        let eig = closed_loop_eigenvalues(&model, &gain);
        assert_eq!(eig.len(), 4);
        assert!(eig.iter().all(|z| z.re < 0.0), "{eig:?}");
    }

    #[test]
    fn uncontrollable_pair_rejected() {
        let model = LinearModel {
            a: Matrix4::identity(),
            b: Vector4::new(1.0, 0.0, 0.0, 0.0),
        };
        let (q, r) = default_weights();
        assert!(matches!(
            design_gain(&model, &q, r),
            Err(Error::Uncontrollable { rank: 1, .. })
        ));
    }

    #[test]
    fn action_at_target_is_neutral() {
        let params = PlantParams::default();
        let gain = SafeGain {
            k: [-30.0, -20.0, -90.0, -10.0],
        };
        let target = State::new(0.01, 0.0, 0.0, 0.0);
        assert_eq!(safe_action(&gain, &target, &target, &params), params.v_neutral);
        let far = State::new(3.0, 0.0, 0.0, 0.0);
        assert_eq!(safe_action(&gain, &far, &target, &params), params.v_max);
        assert_eq!(safe_action(&gain, &(-far), &target, &params), params.v_min);
        // linear region
        let eps = 1e-3;
        let near = State::new(target.p + eps, 0.0, 0.0, 0.0);
        let v = safe_action(&gain, &near, &target, &params);
        assert!((v - (params.v_neutral - eps * gain.k[0])).abs() < 1e-12);
    }

    #[test]
    fn gain_text_roundtrip() {
        let gain = SafeGain {
            k: [-31.622776601683793, -29.1, -101.25, 1.0 / 3.0],
        };
        let parsed = SafeGain::from_text(&format!("# header\n{}\n", gain.to_text())).unwrap();
        assert_eq!(parsed, gain);
        assert_eq!(SafeGain::from_text("1, 2, 3, 4").unwrap().k, [1.0, 2.0, 3.0, 4.0]);
        assert!(SafeGain::from_text("1 2 3").is_err());
        assert!(SafeGain::from_text("1 2 x 4").is_err());
    }
}
