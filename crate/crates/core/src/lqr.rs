//! Continuous-time LQR baselines.
//!
//! `solve_care` finds the stabilizing solution of
//! `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` with Newton–Kleinman iteration. The initial
//! stabilizing gain comes from the Bass shift: for `β` above the spectral
//! abscissa of `A`, solving `(A+βI)X + X(A+βI)ᵀ = 2BBᵀ` and setting
//! `K₀ = BᵀX⁻¹` places every closed-loop eigenvalue on `Re λ = −β`. If the
//! seed cannot be built the matrix sign function of the Hamiltonian is used
//! instead, followed by the same Newton polish.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::controller::{default_ranges, ControllerKind, ControllerSpec, GainRange, Ranges};
use crate::error::Error;
use crate::plant::PlantModel;

pub const RESIDUAL_TOL: f64 = 1e-9;
const NEWTON_MAX_ITERS: usize = 60;
const SIGN_MAX_ITERS: usize = 100;

fn lqr_err(msg: impl Into<String>) -> Error {
    Error::Lqr(msg.into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LqrProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CareMethod {
    NewtonKleinman,
    SignFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Closed-loop eigenvalues of `A − BK` as (re, im).
    pub eigenvalues: Vec<(f64, f64)>,
    pub residual: f64,
    pub method: CareMethod,
    pub iterations: usize,
}

impl LqrProblem {
    /// Single-input problem with diagonal state weight.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q_diag: &[f64], r: f64) -> LqrProblem {
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(q_diag));
        LqrProblem { a, b, q, r: DMatrix::from_element(1, 1, r) }
    }

    fn check(&self) -> Result<(), Error> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        if self.a.ncols() != n || self.b.nrows() != n || self.q.shape() != (n, n) || self.r.shape() != (m, m) {
            return Err(lqr_err("inconsistent LQR matrix dimensions"));
        }
        let all = [&self.a, &self.b, &self.q, &self.r];
        if all.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return Err(lqr_err("LQR matrices must be finite"));
        }
        let qs = (&self.q - self.q.transpose()).norm();
        if qs > 1e-12 * self.q.norm().max(1.0) {
            return Err(lqr_err("Q must be symmetric"));
        }
        let qmin = self.q.clone().symmetric_eigenvalues().min();
        if qmin < -1e-12 * self.q.norm().max(1.0) {
            return Err(lqr_err("Q must be positive semidefinite"));
        }
        let rmin = self.r.clone().symmetric_eigenvalues().min();
        if !(rmin > 0.0) {
            return Err(lqr_err("R must be positive definite"));
        }
        Ok(())
    }
}

/// Solves `FᵀX + XF = C` through the Kronecker form; fine for n ≤ 8.
pub fn solve_lyapunov(f: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = f.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let ft = f.transpose();
    // vec(FᵀX) = (I ⊗ Fᵀ) vec X, vec(XF) = (Fᵀ ⊗ I) vec X for column-major vec.
    let big = eye.kronecker(&ft) + ft.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, c.as_slice());
    let sol = big.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Some(symmetrize(&x))
}

fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

fn eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    m.clone().complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().fold(f64::NEG_INFINITY, |acc, (re, _)| acc.max(*re))
}

fn residual(p: &LqrProblem, x: &DMatrix<f64>, rinv: &DMatrix<f64>) -> f64 {
    let atp = p.a.transpose() * x;
    let pbrbp = x * &p.b * rinv * p.b.transpose() * x;
    let res = &atp + atp.transpose() - &pbrbp + &p.q;
    let scale = p.q.norm() + 2.0 * atp.norm() + pbrbp.norm();
    res.norm() / scale.max(f64::MIN_POSITIVE)
}

fn bass_seed(p: &LqrProblem) -> Option<DMatrix<f64>> {
    let n = p.a.nrows();
    let m = p.b.ncols();
    if spectral_abscissa(&p.a) < 0.0 {
        return Some(DMatrix::zeros(m, n));
    }
    let beta = p.a.abs().row_sum().max() + 1.0;
    let shifted = &p.a + DMatrix::identity(n, n) * beta;
    // solve_lyapunov takes Fᵀ X + X F; here F = (A+βI)ᵀ.
    let x = solve_lyapunov(&shifted.transpose(), &(&p.b * p.b.transpose() * 2.0))?;
    let k = p.b.transpose() * x.try_inverse()?;
    let ok = k.iter().all(|v| v.is_finite()) && spectral_abscissa(&(&p.a - &p.b * &k)) < 0.0;
    ok.then_some(k)
}

/// Newton–Kleinman from a stabilizing gain; returns (P, K, iterations).
fn newton(p: &LqrProblem, rinv: &DMatrix<f64>, mut k: DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>, usize)> {
    let mut last: Option<DMatrix<f64>> = None;
    for it in 1..=NEWTON_MAX_ITERS {
        let ak = &p.a - &p.b * &k;
        let rhs = -(&p.q + k.transpose() * &p.r * &k);
        let x = solve_lyapunov(&ak, &rhs)?;
        let k_next = rinv * p.b.transpose() * &x;
        let dk = (&k_next - &k).norm();
        k = k_next;
        if let Some(prev) = &last {
            let dx = (&x - prev).norm();
            if dx <= 1e-15 * x.norm().max(1.0) || dk <= 1e-15 * k.norm().max(1.0) {
                return Some((x, k, it));
            }
        }
        last = Some(x);
    }
    let x = last?;
    Some((x, k, NEWTON_MAX_ITERS))
}

/// Stable invariant subspace of the Hamiltonian via the scaled sign iteration.
fn sign_function_solution(p: &LqrProblem, rinv: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = p.a.nrows();
    let g = &p.b * rinv * p.b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&p.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&p.q));
    h.view_mut((n, n), (n, n)).copy_from(&(-p.a.transpose()));
    let mut z = h;
    for _ in 0..SIGN_MAX_ITERS {
        let zi = z.clone().try_inverse()?;
        let det = z.determinant().abs();
        let c = if det.is_normal() { libm::pow(det, 1.0 / (2 * n) as f64) } else { 1.0 };
        let next = (&z / c + zi * c) * 0.5;
        let delta = (&next - &z).norm();
        z = next;
        if delta <= 1e-13 * z.norm() {
            break;
        }
    }
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let x = lhs.svd(true, true).solve(&rhs, 1e-14).ok()?;
    Some(symmetrize(&x))
}

/// Stabilizing CARE solution with validation of residual, symmetry, PSD and stability.
pub fn solve_care(p: &LqrProblem) -> Result<CareSolution, Error> {
    p.check()?;
    let rinv = p.r.clone().try_inverse().ok_or_else(|| lqr_err("R is singular"))?;

    let mut attempt =
        bass_seed(p).and_then(|k0| newton(p, &rinv, k0)).map(|(x, k, it)| (x, k, it, CareMethod::NewtonKleinman));
    let acceptable = |x: &DMatrix<f64>, k: &DMatrix<f64>| {
        residual(p, x, &rinv) <= RESIDUAL_TOL && spectral_abscissa(&(&p.a - &p.b * k)) < 0.0
    };
    if !matches!(&attempt, Some((x, k, _, _)) if acceptable(x, k)) {
        attempt = sign_function_solution(p, &rinv).map(|x| {
            let k = &rinv * p.b.transpose() * &x;
            if spectral_abscissa(&(&p.a - &p.b * &k)) < 0.0 {
                if let Some((x2, k2, it)) = newton(p, &rinv, k.clone()) {
                    return (x2, k2, it, CareMethod::SignFunction);
                }
            }
            (x, k, 0, CareMethod::SignFunction)
        });
    }
    let (x, k, iterations, method) =
        attempt.ok_or_else(|| lqr_err("Riccati iteration failed; (A, B) may not be stabilizable"))?;

    let res = residual(p, &x, &rinv);
    if !(res <= RESIDUAL_TOL) {
        return Err(lqr_err(format!("Riccati residual {res:e} above tolerance; problem may be unstabilizable")));
    }
    let acl = &p.a - &p.b * &k;
    let eigs = eigenvalues(&acl);
    if !eigs.iter().all(|(re, _)| *re < 0.0) {
        return Err(lqr_err("no stabilizing solution: closed loop has eigenvalues in the right half plane"));
    }
    let pmin = x.clone().symmetric_eigenvalues().min();
    if pmin < -1e-10 * x.norm().max(1.0) {
        return Err(lqr_err("Riccati solution is not positive semidefinite"));
    }
    Ok(CareSolution { p: x, k, eigenvalues: eigs, residual: res, method, iterations })
}

/// Audit record for the `lqr` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqrReport {
    pub plant: String,
    pub state_order: Vec<String>,
    pub q_diag: Vec<f64>,
    pub r: f64,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub k: Vec<f64>,
    pub closed_loop_eigenvalues: Vec<[f64; 2]>,
    pub residual: f64,
    pub method: CareMethod,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Linearizes `plant`, reorders into its feedback-gain order, and solves.
///
/// `q_diag` is given in feedback order (for the double pendulum: θ1, θ2, θ̇1, θ̇2).
pub fn lqr_gains(plant: &PlantModel, q_diag: &[f64], r: f64) -> Result<(ControllerSpec, LqrReport), Error> {
    let fb = plant.feedback_indices();
    if q_diag.len() != fb.len() {
        return Err(Error::Config(format!("Q needs {} diagonal entries for {}", fb.len(), plant.id())));
    }
    let (a, b) = plant.linearize();
    let n = fb.len();
    let ap = DMatrix::from_fn(n, n, |i, j| a[(fb[i], fb[j])]);
    let bp = DMatrix::from_fn(n, 1, |i, _| b[fb[i]]);
    let problem = LqrProblem::new(ap.clone(), bp.clone(), q_diag, r);
    let sol = solve_care(&problem)?;
    let k: Vec<f64> = sol.k.row(0).iter().copied().collect();

    let mut ranges: Ranges = default_ranges(ControllerKind::FSF, plant.id())?;
    for (j, kj) in k.iter().enumerate() {
        let name = format!("K{}", j + 1);
        let base = ranges.get(&name).copied().unwrap_or(GainRange::new(*kj, *kj + 1.0));
        ranges.insert(name, GainRange::new(base.min.min(*kj), base.max.max(*kj)));
    }
    let gains = k.iter().enumerate().map(|(j, v)| (format!("K{}", j + 1), *v)).collect();
    let spec = ControllerSpec { kind: ControllerKind::FSF, gains, ranges };
    let names = plant.state_names();
    let report = LqrReport {
        plant: plant.id().as_str().to_string(),
        state_order: fb.iter().map(|&i| names[i].to_string()).collect(),
        q_diag: q_diag.to_vec(),
        r,
        a: rows(&ap),
        b: bp.iter().copied().collect(),
        p: rows(&sol.p),
        k,
        closed_loop_eigenvalues: sol.eigenvalues.iter().map(|(re, im)| [*re, *im]).collect(),
        residual: sol.residual,
        method: sol.method,
    };
    Ok((spec, report))
}
