//! Closed-form analysis: Bellman solutions, generalized λ-operators,
//! stationary distributions, projected-objective evaluation and the ODE
//! limit points the stochastic algorithms converge to.
//!
//! Everything here is an exact (direct linear algebra) counterpart of the
//! sampled recursions in `learner`/`harness`, so simulation output can be
//! checked against analytic values.

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm_inf, Matrix};
use crate::mdp::{DiscountSpec, FeatureMap, InducedChain, LambdaSpec};
use crate::scalar::{real, Scalar};

/// Exact value function of the target chain.
#[derive(Debug, Clone)]
pub struct BellmanSolution<T> {
    pub v: Vec<T>,
}

/// Affine generalized Bellman operator T^(λ) v = r_λ + P_λ v.
#[derive(Debug, Clone)]
pub struct LambdaOperator<T> {
    pub p_lambda: Matrix<T>,
    pub r_lambda: Vec<T>,
}

impl<T: Scalar> LambdaOperator<T> {
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let mut out = self.p_lambda.mul_vec(v);
        for (o, &r) in out.iter_mut().zip(&self.r_lambda) {
            *o += r;
        }
        out
    }
}

/// Stationary distribution of a behavior chain.
#[derive(Debug, Clone)]
pub struct StationaryDist<T> {
    pub xi: Vec<T>,
}

/// The matrices G = Φᵀ Ξ (P_λ − I) Φ, b = Φᵀ Ξ r_λ, H = Φᵀ Ξ Φ that
/// define both the mean dynamics and the limit equations.
#[derive(Debug, Clone)]
pub struct LimitMatrices<T> {
    pub g: Matrix<T>,
    pub b: Vec<T>,
    pub h: Matrix<T>,
}

impl<T: Scalar> LimitMatrices<T> {
    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

/// Solution of the limit (stationarity) equations. For the variant with
/// per-agent auxiliary vectors `ws` holds one entry per agent; for the
/// fully mixed variant it holds the single shared vector.
#[derive(Debug, Clone)]
pub struct LimitPoint<T> {
    pub theta: Vec<T>,
    pub ws: Vec<Vec<T>>,
}

/// One-step expected reward per state under the chain's own policy:
/// r(s) = Σ_s' P(s,s') r_exp(s,s').
pub fn expected_rewards<T: Scalar>(chain: &InducedChain<T>) -> Vec<T> {
    let m = chain.states();
    (0..m)
        .map(|s| dot(chain.p.row(s), chain.r_exp.row(s)))
        .collect()
}

fn p_gamma<T: Scalar>(chain: &InducedChain<T>, disc: &DiscountSpec<T>) -> Matrix<T> {
    let m = chain.states();
    Matrix::from_fn(m, m, |s, s2| chain.p[(s, s2)] * disc.gamma(s2))
}

/// Solves v = r + PΓv for the target chain.
pub fn solve_value<T: Scalar>(
    target: &InducedChain<T>,
    disc: &DiscountSpec<T>,
) -> Result<BellmanSolution<T>> {
    let m = target.states();
    if disc.len() != m {
        return Err(Error::DimensionMismatch("discount vector length".into()));
    }
    let r_pi = expected_rewards(target);
    let pg = p_gamma(target, disc);
    let mut a = Matrix::identity(m).sub(&pg);
    let v = linalg::solve(&mut a, &r_pi)
        .map_err(|_| Error::Singular("I - PΓ is singular".into()))?;
    Ok(BellmanSolution { v })
}

/// Builds the λ-weighted operator in closed form:
/// P_λ = I − (I − PΓΛ)⁻¹(I − PΓ), r_λ = (I − PΓΛ)⁻¹ r.
pub fn lambda_operator<T: Scalar>(
    target: &InducedChain<T>,
    disc: &DiscountSpec<T>,
    lam: &LambdaSpec<T>,
) -> Result<LambdaOperator<T>> {
    let m = target.states();
    if disc.len() != m || lam.len() != m {
        return Err(Error::DimensionMismatch("discount/lambda vector length".into()));
    }
    let pg = p_gamma(target, disc);
    let pgl = Matrix::from_fn(m, m, |s, s2| pg[(s, s2)] * lam.lambda(s2));
    let a = Matrix::identity(m).sub(&pgl);
    let lu = linalg::LuFactor::new(&a)
        .map_err(|_| Error::Singular("I - PΓΛ is singular".into()))?;
    let i_minus_pg = Matrix::identity(m).sub(&pg);
    let inv_times = lu.solve_matrix(&i_minus_pg);
    let p_lambda = Matrix::identity(m).sub(&inv_times);
    let r_lambda = lu.solve(&expected_rewards(target));
    Ok(LambdaOperator { p_lambda, r_lambda })
}

/// Unique positive normalized left eigenvector of an irreducible chain.
pub fn stationary_dist<T: Scalar>(behavior: &InducedChain<T>) -> Result<StationaryDist<T>> {
    if !behavior.is_irreducible() {
        return Err(Error::ReducibleChain);
    }
    let xi = linalg::stationary_left_vector(&behavior.p)?;
    if xi.iter().any(|&x| x <= T::zero()) {
        return Err(Error::ReducibleChain);
    }
    Ok(StationaryDist { xi })
}

fn scale_rows<T: Scalar>(m: &Matrix<T>, weights: &[T]) -> Matrix<T> {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| weights[i] * m[(i, j)])
}

/// Computes G, b, H for one agent from its stationary weights and the
/// target-chain λ-operator.
pub fn limit_matrices<T: Scalar>(
    phi: &FeatureMap<T>,
    xi: &StationaryDist<T>,
    op: &LambdaOperator<T>,
) -> Result<LimitMatrices<T>> {
    let m = phi.states();
    if xi.xi.len() != m || op.p_lambda.rows() != m {
        return Err(Error::DimensionMismatch("state count mismatch".into()));
    }
    let p_minus_i = op.p_lambda.sub(&Matrix::identity(m));
    let weighted = scale_rows(&p_minus_i, &xi.xi);
    let g = phi.matrix().transpose().matmul(&weighted).matmul(phi.matrix());
    let xr: Vec<T> = xi.xi.iter().zip(&op.r_lambda).map(|(&x, &r)| x * r).collect();
    let b = phi.matrix().transpose().mul_vec(&xr);
    let h_raw = phi
        .matrix()
        .transpose()
        .matmul(&scale_rows(phi.matrix(), &xi.xi));
    // symmetrize against rounding
    let h = h_raw.add(&h_raw.transpose()).scale(real(0.5));
    Ok(LimitMatrices { g, b, h })
}

fn check_weights<T: Scalar>(n: usize, psi_bar: &[T], q: &[T]) -> Result<()> {
    if psi_bar.len() != n || q.len() != n {
        return Err(Error::DimensionMismatch("weight vector length".into()));
    }
    if psi_bar.iter().any(|&x| x <= T::zero()) || q.iter().any(|&x| x <= T::zero()) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    let sum: T = psi_bar.iter().copied().sum();
    if (sum - T::one()).abs() > real(1e-6) {
        return Err(Error::InvalidArgument(format!(
            "psi-bar must sum to 1 (got {sum})"
        )));
    }
    Ok(())
}

/// ψ̄_i q_i - weighted sums of the per-agent matrices.
pub fn aggregate_matrices<T: Scalar>(
    per_agent: &[LimitMatrices<T>],
    psi_bar: &[T],
    q: &[T],
) -> Result<LimitMatrices<T>> {
    if per_agent.is_empty() {
        return Err(Error::InvalidArgument("no agents".into()));
    }
    check_weights(per_agent.len(), psi_bar, q)?;
    let p = per_agent[0].dim();
    let mut g = Matrix::zeros(p, p);
    let mut b = vec![T::zero(); p];
    let mut h = Matrix::zeros(p, p);
    for ((lm, &psi), &qi) in per_agent.iter().zip(psi_bar).zip(q) {
        if lm.dim() != p {
            return Err(Error::DimensionMismatch("feature dimension mismatch".into()));
        }
        let w = psi * qi;
        g = g.add(&lm.g.scale(w));
        h = h.add(&lm.h.scale(w));
        for (acc, &x) in b.iter_mut().zip(&lm.b) {
            *acc += w * x;
        }
    }
    Ok(LimitMatrices { g, b, h })
}

/// Per-agent system reduced to an orthonormal basis of span{φ(S)}.
/// When Φ has full column rank the basis is square and this is just an
/// orthogonal change of coordinates.
struct Reduced<T> {
    g: Matrix<T>,
    b: Vec<T>,
    h_lu: linalg::LuFactor<T>,
}

fn span_basis_from_h<T: Scalar>(h: &Matrix<T>) -> Matrix<T> {
    // column space of H = ΦᵀΞΦ equals span{φ(S)} since Ξ is positive
    linalg::row_space_basis(h)
}

fn reduce<T: Scalar>(lm: &LimitMatrices<T>, basis: &Matrix<T>) -> Result<Reduced<T>> {
    let bt = basis.transpose();
    let g = bt.matmul(&lm.g).matmul(basis);
    let b = bt.mul_vec(&lm.b);
    let h = bt.matmul(&lm.h).matmul(basis);
    let h_lu = linalg::LuFactor::new(&h)
        .map_err(|_| Error::Singular("H is singular on span{φ(S)}".into()))?;
    Ok(Reduced { g, b, h_lu })
}

/// Solves the per-agent-auxiliary limit equations
/// Σ ψ̄_i q_i G_iᵀ w̄_i = 0 with G_i θ̄ + b_i − H_i w̄_i = 0.
pub fn limit_point_d1<T: Scalar>(
    per_agent: &[LimitMatrices<T>],
    psi_bar: &[T],
    q: &[T],
) -> Result<LimitPoint<T>> {
    if per_agent.is_empty() {
        return Err(Error::InvalidArgument("no agents".into()));
    }
    check_weights(per_agent.len(), psi_bar, q)?;
    let p = per_agent[0].dim();
    let basis = span_basis_from_h(&per_agent[0].h);
    let r = basis.cols();
    let reduced: Vec<Reduced<T>> = per_agent
        .iter()
        .map(|lm| reduce(lm, &basis))
        .collect::<Result<_>>()?;

    // Σ ψq G̃ᵀ H̃⁻¹ (G̃ t + b̃) = 0
    let mut system = Matrix::zeros(r, r);
    let mut rhs = vec![T::zero(); r];
    for ((red, &psi), &qi) in reduced.iter().zip(psi_bar).zip(q) {
        let w = psi * qi;
        let hinv_g = red.h_lu.solve_matrix(&red.g);
        let hinv_b = red.h_lu.solve(&red.b);
        let gt = red.g.transpose();
        system = system.add(&gt.matmul(&hinv_g).scale(w));
        let gb = gt.mul_vec(&hinv_b);
        for (acc, &x) in rhs.iter_mut().zip(&gb) {
            *acc -= w * x;
        }
    }
    let t = linalg::solve(&system, &rhs)
        .map_err(|e| Error::DegenerateLimit(format!("aggregated system: {e}")))?;
    let theta = basis.mul_vec(&t);
    let ws = reduced
        .iter()
        .map(|red| {
            let mut v = red.g.mul_vec(&t);
            for (x, &bi) in v.iter_mut().zip(&red.b) {
                *x += bi;
            }
            basis.mul_vec(&red.h_lu.solve(&v))
        })
        .collect();
    debug_assert_eq!(theta.len(), p);
    Ok(LimitPoint { theta, ws })
}

/// Solves Ḡ θ̄ + b̄ − H̄ w̄ = 0 with Ḡᵀ w̄ = 0 for the fully mixed variant.
pub fn limit_point_d2<T: Scalar>(agg: &LimitMatrices<T>) -> Result<LimitPoint<T>> {
    let basis = span_basis_from_h(&agg.h);
    let red = reduce(agg, &basis)?;
    let hinv_g = red.h_lu.solve_matrix(&red.g);
    let hinv_b = red.h_lu.solve(&red.b);
    let gt = red.g.transpose();
    let system = gt.matmul(&hinv_g);
    let rhs: Vec<T> = gt.mul_vec(&hinv_b).iter().map(|&x| -x).collect();
    let t = linalg::solve(&system, &rhs)
        .map_err(|e| Error::DegenerateLimit(format!("GᵀH⁻¹G system: {e}")))?;
    let theta = basis.mul_vec(&t);
    let mut v = red.g.mul_vec(&t);
    for (x, &bi) in v.iter_mut().zip(&red.b) {
        *x += bi;
    }
    let w = basis.mul_vec(&red.h_lu.solve(&v));
    Ok(LimitPoint { theta, ws: vec![w] })
}

/// Weighted projected-residual objective
/// J(θ) = Σ ψ̄_i q_i (G_i θ + b_i)ᵀ H_i⁻¹ (G_i θ + b_i).
pub fn objective<T: Scalar>(
    theta: &[T],
    per_agent: &[LimitMatrices<T>],
    psi_bar: &[T],
    q: &[T],
) -> Result<T> {
    check_weights(per_agent.len(), psi_bar, q)?;
    let basis = span_basis_from_h(&per_agent[0].h);
    let mut total = T::zero();
    for ((lm, &psi), &qi) in per_agent.iter().zip(psi_bar).zip(q) {
        let red = reduce(lm, &basis)?;
        let mut v = basis.transpose().mul_vec(&lm.g.mul_vec(theta));
        for (x, &bi) in v.iter_mut().zip(&red.b) {
            *x += bi;
        }
        let x = red.h_lu.solve(&v);
        total += psi * qi * dot(&v, &x);
    }
    Ok(total)
}

/// Gradient of `objective`: ∇J = 2 Σ ψ̄_i q_i G_iᵀ H_i⁻¹ (G_i θ + b_i).
pub fn gradient<T: Scalar>(
    theta: &[T],
    per_agent: &[LimitMatrices<T>],
    psi_bar: &[T],
    q: &[T],
) -> Result<Vec<T>> {
    check_weights(per_agent.len(), psi_bar, q)?;
    let basis = span_basis_from_h(&per_agent[0].h);
    let p = per_agent[0].dim();
    let mut grad = vec![T::zero(); p];
    for ((lm, &psi), &qi) in per_agent.iter().zip(psi_bar).zip(q) {
        let red = reduce(lm, &basis)?;
        let mut v = basis.transpose().mul_vec(&lm.g.mul_vec(theta));
        for (x, &bi) in v.iter_mut().zip(&red.b) {
            *x += bi;
        }
        let x = red.h_lu.solve(&v);
        // Gᵀ B x back in full coordinates
        let gtbx = lm.g.transpose().mul_vec(&basis.mul_vec(&x));
        let w = real::<T>(2.0) * psi * qi;
        for (gacc, &gx) in grad.iter_mut().zip(&gtbx) {
            *gacc += w * gx;
        }
    }
    Ok(grad)
}

/// Mean θ-direction of the GTD2 recursion at frozen (θ, w): −Gᵀw.
pub fn mean_gtd2_theta<T: Scalar>(lm: &LimitMatrices<T>, w: &[T]) -> Vec<T> {
    lm.g.transpose().mul_vec(w).iter().map(|&x| -x).collect()
}

/// Mean w-direction at frozen (θ, w): Gθ + b − Hw.
pub fn mean_w_update<T: Scalar>(lm: &LimitMatrices<T>, theta: &[T], w: &[T]) -> Vec<T> {
    let mut v = lm.g.mul_vec(theta);
    let hw = lm.h.mul_vec(w);
    for ((x, &bi), &h) in v.iter_mut().zip(&lm.b).zip(&hw) {
        *x += bi;
        *x -= h;
    }
    v
}

/// Mean θ-direction of the TDC recursion at frozen (θ, w):
/// Gθ + b − (G + H)ᵀ w.
pub fn mean_tdc_theta<T: Scalar>(lm: &LimitMatrices<T>, theta: &[T], w: &[T]) -> Vec<T> {
    let mut v = lm.g.mul_vec(theta);
    let c = lm.g.add(&lm.h).transpose().mul_vec(w);
    for ((x, &bi), &cx) in v.iter_mut().zip(&lm.b).zip(&c) {
        *x += bi;
        *x -= cx;
    }
    v
}

/// Right-hand side of the single-time-scale mean ODE with per-agent
/// auxiliary variables: θ̇ = −Σ ψ̄_i q_i G_iᵀ w_i, ẇ_i = G_i θ + b_i − H_i w_i.
pub fn ode_field_d1<T: Scalar>(
    per_agent: &[LimitMatrices<T>],
    psi_bar: &[T],
    q: &[T],
    theta: &[T],
    ws: &[Vec<T>],
) -> (Vec<T>, Vec<Vec<T>>) {
    let p = theta.len();
    let mut dtheta = vec![T::zero(); p];
    let mut dws = Vec::with_capacity(per_agent.len());
    for (((lm, w), &psi), &qi) in per_agent.iter().zip(ws).zip(psi_bar).zip(q) {
        let gt_w = lm.g.transpose().mul_vec(w);
        let c = psi * qi;
        for (d, &x) in dtheta.iter_mut().zip(&gt_w) {
            *d -= c * x;
        }
        dws.push(mean_w_update(lm, theta, w));
    }
    (dtheta, dws)
}

/// Weighted quadratic distance to a limit point, the Lyapunov function of
/// the single-time-scale mean ODE.
pub fn lyapunov_d1<T: Scalar>(
    point: &LimitPoint<T>,
    psi_bar: &[T],
    q: &[T],
    theta: &[T],
    ws: &[Vec<T>],
) -> T {
    let half = real::<T>(0.5);
    let dt = linalg::sub_vec(theta, &point.theta);
    let mut v = half * dot(&dt, &dt);
    for ((w, wbar), (&psi, &qi)) in ws.iter().zip(&point.ws).zip(psi_bar.iter().zip(q)) {
        let dw = linalg::sub_vec(w, wbar);
        v += half * psi * qi * dot(&dw, &dw);
    }
    v
}

/// Empirical mean of Σ_i ψ_i² over realized rows of backward mixing
/// products: the predicted steady-state variance ratio versus a single
/// agent.
pub fn covariance_factor<T: Scalar>(psi_samples: &[Vec<T>]) -> Result<T> {
    if psi_samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    let tol = real::<T>(1e-6);
    let mut acc = T::zero();
    for row in psi_samples {
        if row.iter().any(|&x| x < -tol) {
            return Err(Error::InvalidArgument("negative entry in ψ row".into()));
        }
        let sum: T = row.iter().copied().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!("ψ row sums to {sum}, not 1")));
        }
        acc += row.iter().map(|&x| x * x).sum::<T>();
    }
    Ok(acc / real(psi_samples.len() as f64))
}

/// Residuals of a claimed limit point against its defining equations;
/// used by tests and the CLI to certify solver output.
pub fn limit_residual_d1<T: Scalar>(
    point: &LimitPoint<T>,
    per_agent: &[LimitMatrices<T>],
    psi_bar: &[T],
    q: &[T],
) -> T {
    let p = point.theta.len();
    let mut first = vec![T::zero(); p];
    let mut worst = T::zero();
    for (((lm, w), &psi), &qi) in per_agent.iter().zip(&point.ws).zip(psi_bar).zip(q) {
        let gt_w = lm.g.transpose().mul_vec(w);
        for (f, &x) in first.iter_mut().zip(&gt_w) {
            *f += psi * qi * x;
        }
        let res = mean_w_update(lm, &point.theta, w);
        let r = norm_inf(&res);
        if r > worst {
            worst = r;
        }
    }
    let r1 = norm_inf(&first);
    if r1 > worst {
        worst = r1;
    }
    worst
}

pub fn limit_residual_d2<T: Scalar>(point: &LimitPoint<T>, agg: &LimitMatrices<T>) -> T {
    let w = &point.ws[0];
    let res1 = mean_w_update(agg, &point.theta, w);
    let res2 = agg.g.transpose().mul_vec(w);
    let r1 = norm_inf(&res1);
    let r2 = norm_inf(&res2);
    if r1 > r2 {
        r1
    } else {
        r2
    }
}
