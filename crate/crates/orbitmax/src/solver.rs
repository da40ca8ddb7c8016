//! Dual maximum-entropy solver: minimize f_A(Y) = ⟨Y,A⟩ + E_F(Y) over the
//! feasible subspace V_L intersected with a ball ‖Y‖ ≤ R, by the
//! central-cut ellipsoid method driven by the analytic first-order oracle,
//! followed by a Newton polish of the best iterate.
//!
//! The minimizer Y° parametrizes the maximum-entropy density
//! ν°(X) ∝ e^{−⟨Y°,X⟩} on the orbit of F with prescribed mean A.
//!
//! # Certification
//!
//! Two independent exit certificates, either of which bounds the additive
//! gap by ε:
//!
//! * gradient: ‖∇f(Y)‖ ≤ ε/(4R) implies f(Y) − f* ≤ ‖∇f‖·2R ≤ ε/2 by
//!   convexity over the diameter-2R ball;
//! * volume: after k = ⌈2m(m+1)·ln(V/ε)⌉ central cuts (m = dim V_L ≥ 2)
//!   the best query satisfies f_best − f* ≤ V·e^{−k/(2m(m+1))} ≤ ε, where
//!   V = 2R(‖A‖+‖F‖) bounds the objective range over the ball (the
//!   log-integral term is 1-Lipschitz in ⟨·,F⟩).
//!
//! One-dimensional subspaces use derivative bisection with the same
//! Lipschitz-style certificate; zero-dimensional ones are solved exactly by
//! Y = 0. [`predicted_iterations`] exposes the worst-case iteration count
//! that the main loop never exceeds.

use crate::geometry::{bounding_radius, membership, MembershipStatus};
use crate::hc_oracle;
use crate::lie_core::{affine_equalities, AffineConstraintSet, CartanVector, GroupSpec};
use crate::linalg::solve_spd;
use crate::{Error, Result};

/// A fully specified dual problem: group, orbit label F, target mean A,
/// optional interior-margin hint, and the target additive accuracy.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub spec: GroupSpec,
    pub f: CartanVector,
    pub a: CartanVector,
    /// Lower bound on the distance from A to the orbit-polytope boundary.
    /// When absent (or larger than the true margin) the exact Chebyshev
    /// margin computed by `membership` is used instead.
    pub eta: Option<f64>,
    pub epsilon: f64,
}

impl ProblemInstance {
    pub fn new(
        spec: GroupSpec,
        f: CartanVector,
        a: CartanVector,
        eta: Option<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        let n = spec.coord_len();
        if f.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: f.len() });
        }
        if a.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: a.len() });
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if let Some(e) = eta {
            if !(e > 0.0) {
                return Err(Error::InvalidInput("eta must be positive when supplied".into()));
            }
        }
        Ok(ProblemInstance { spec, f, a, eta, epsilon })
    }
}

/// Result of the dual solve.
#[derive(Clone, Debug)]
pub struct DualSolution {
    /// Minimizer restricted to V_L (pinned coordinates are exactly zero).
    pub y_opt: CartanVector,
    pub f_value: f64,
    pub grad_norm: f64,
    /// Ellipsoid/bisection iterations (cuts), excluding the polish phase.
    pub iterations: usize,
    pub r_used: f64,
    /// (iteration, best f so far, gradient norm at that iterate).
    pub trace: Vec<(usize, f64, f64)>,
}

/// Parameters of the reconstructed density ν°(X) = e^{−⟨Y°,X⟩ − log_partition}.
#[derive(Clone, Debug)]
pub struct DensityReport {
    pub y_opt: CartanVector,
    pub log_partition: f64,
    /// Achieved mean m(Y°) = −∇E_F(Y°) in Cartan coordinates.
    pub mean: CartanVector,
    /// ‖m(Y°) − A‖ within V_L (the pinned components agree by construction).
    pub mean_deviation: f64,
}

/// Worst-case iteration count for the main loop at subspace dimension m:
/// the volume bound ⌈2m(m+1)·ln(V/ε)⌉ for m ≥ 2, the bisection count
/// ⌈log₂(V/ε)⌉ for m = 1, and 0 for a point domain, with V = 2R(‖A‖+‖F‖)
/// and the ratio clamped to at least e.
pub fn predicted_iterations(m: usize, r: f64, norm_a: f64, norm_f: f64, epsilon: f64) -> usize {
    if m == 0 {
        return 0;
    }
    let v = 2.0 * r * (norm_a + norm_f);
    let ratio = (v / epsilon).max(std::f64::consts::E);
    if m == 1 {
        ratio.log2().ceil() as usize
    } else {
        let m = m as f64;
        (2.0 * m * (m + 1.0) * ratio.ln()).ceil() as usize
    }
}

/// First-order oracle of the dual objective: value ⟨Y,A⟩ + E_F(Y) and the
/// gradient A + ∇E_F(Y) projected onto V_L (returned in full coordinates).
/// Y must itself lie in V_L.
pub fn dual_objective(inst: &ProblemInstance, y: &CartanVector) -> Result<(f64, CartanVector)> {
    if y.len() != inst.spec.coord_len() {
        return Err(Error::LengthMismatch { expected: inst.spec.coord_len(), got: y.len() });
    }
    let eq = affine_equalities(&inst.spec, &inst.f)?;
    let off: f64 = eq
        .fixed_directions
        .iter()
        .map(|d| d.dot(y).abs())
        .fold(0.0, f64::max);
    if off > 1e-9 * y.norm().max(1.0) {
        return Err(Error::InvalidInput(
            "dual vector has a component along a pinned direction (not in V_L)".into(),
        ));
    }
    let oracle = hc_oracle::log_integral(&inst.spec, &inst.f, y)?;
    let value = y.dot(&inst.a) + oracle.log_value;
    let full: Vec<f64> = inst
        .a
        .coords()
        .iter()
        .zip(oracle.gradient.coords())
        .map(|(a, g)| a + g)
        .collect();
    let vl = eq.project_coords(&CartanVector::raw(full));
    let mut proj = vec![0.0; inst.spec.coord_len()];
    for (b, &c) in eq.vl_basis.iter().zip(&vl) {
        for (p, &bc) in proj.iter_mut().zip(b.coords()) {
            *p += c * bc;
        }
    }
    Ok((value, CartanVector::raw(proj)))
}

/// Oracle evaluations in the V_L coordinate frame.
struct VlOracle<'a> {
    inst: &'a ProblemInstance,
    eq: &'a AffineConstraintSet,
}

impl VlOracle<'_> {
    fn y_of(&self, x: &[f64]) -> CartanVector {
        let mut y = vec![0.0; self.inst.spec.coord_len()];
        for (b, &c) in self.eq.vl_basis.iter().zip(x) {
            for (yj, &bj) in y.iter_mut().zip(b.coords()) {
                *yj += c * bj;
            }
        }
        CartanVector::raw(y)
    }

    /// (f, ∇f in V_L coordinates, ‖∇f‖) at the V_L point x.
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
        let y = self.y_of(x);
        let oracle = hc_oracle::log_integral(&self.inst.spec, &self.inst.f, &y)?;
        let value = y.dot(&self.inst.a) + oracle.log_value;
        let full: Vec<f64> = self
            .inst
            .a
            .coords()
            .iter()
            .zip(oracle.gradient.coords())
            .map(|(a, g)| a + g)
            .collect();
        let grad = self.eq.project_coords(&CartanVector::raw(full));
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        Ok((value, grad, norm))
    }
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Solve the dual program. Errors: `IntegrationOnly` for the disconnected
/// O(2n) family, `Infeasible` when A is not interior to the orbit polytope,
/// `RankCapExceeded` past the vertex-enumeration cap.
pub fn solve(inst: &ProblemInstance) -> Result<DualSolution> {
    if inst.spec.integration_only() {
        return Err(Error::IntegrationOnly);
    }
    let eq = affine_equalities(&inst.spec, &inst.f)?;
    let m = eq.vl_dim();
    let report = membership(&inst.spec, &inst.f, &inst.a)?;

    if m == 0 {
        // The orbit polytope is the single point F; feasibility means A = F
        // and the flat density (Y = 0) is exactly optimal.
        return match report.status {
            MembershipStatus::Outside => Err(Error::Infeasible {
                reason: format!(
                    "orbit polytope is a point and A misses it by {:.3e}",
                    report.margin
                ),
            }),
            _ => Ok(DualSolution {
                y_opt: CartanVector::raw(vec![0.0; inst.spec.coord_len()]),
                f_value: 0.0,
                grad_norm: 0.0,
                iterations: 0,
                r_used: 0.0,
                trace: Vec::new(),
            }),
        };
    }
    if report.status != MembershipStatus::Interior {
        return Err(Error::Infeasible {
            reason: format!(
                "target mean is {} (margin {:.3e}); the dual needs an interior point",
                report.status.as_str(),
                report.margin
            ),
        });
    }
    let eta = match inst.eta {
        Some(e) => e.min(report.margin),
        None => report.margin,
    };
    let r = bounding_radius(inst.spec.dim(), eta, inst.f.norm())?.radius;
    let oracle = VlOracle { inst, eq: &eq };
    let (norm_a, norm_f) = (inst.a.norm(), inst.f.norm());
    let eps = inst.epsilon;
    let k_pred = predicted_iterations(m, r, norm_a, norm_f, eps);
    let grad_exit = eps / (4.0 * r);

    // Y = 0 is always feasible with f = 0 exactly; seed the best-seen state
    // with it so the solver never returns anything worse.
    let mut best_x = vec![0.0; m];
    let mut best_f = 0.0f64;
    let mut best_g = f64::INFINITY;
    let mut trace = Vec::new();
    let mut iterations = 0usize;

    if m == 1 {
        // Derivative bisection on the single V_L coordinate. The optimum is
        // strictly inside [−R, R] by the bounding-radius guarantee, so the
        // derivative brackets a sign change.
        let lipschitz = norm_a + norm_f;
        let (mut lo, mut hi) = (-r, r);
        while (hi - lo) * lipschitz > eps && iterations < k_pred {
            let t = 0.5 * (lo + hi);
            iterations += 1;
            match oracle.eval(&[t]) {
                Ok((f, g, gn)) => {
                    if f < best_f {
                        best_f = f;
                        best_x = vec![t];
                        best_g = gn;
                    }
                    trace.push((iterations, best_f, gn));
                    if gn <= grad_exit {
                        best_f = f;
                        best_x = vec![t];
                        best_g = gn;
                        break;
                    }
                    if g[0] < 0.0 {
                        lo = t;
                    } else {
                        hi = t;
                    }
                }
                Err(Error::NumericOverflow { .. }) => {
                    // Refused evaluation: the optimum is not here; shrink
                    // toward the origin, which always evaluates cleanly.
                    if t < 0.0 {
                        lo = t;
                    } else {
                        hi = t;
                    }
                }
                Err(e) => return Err(e),
            }
        }
    } else {
        // Central-cut ellipsoid (x, P) starting from the ball itself.
        let mut x = vec![0.0f64; m];
        let mut p = vec![0.0f64; m * m];
        for i in 0..m {
            p[i * m + i] = r * r;
        }
        let mf = m as f64;
        let shrink = mf * mf / (mf * mf - 1.0);
        for it in 1..=k_pred {
            iterations = it;
            let g: Vec<f64> = if vec_norm(&x) > r {
                x.clone() // ball cut: discard the half-space beyond the box
            } else {
                match oracle.eval(&x) {
                    Ok((f, g, gn)) => {
                        if f < best_f {
                            best_f = f;
                            best_x = x.clone();
                            best_g = gn;
                        }
                        trace.push((it, best_f, gn));
                        if gn <= grad_exit {
                            best_f = f;
                            best_x = x.clone();
                            best_g = gn;
                            break;
                        }
                        g
                    }
                    // Overflow guard: treat the iterate as out of bounds and
                    // cut with the norm surrogate, keeping the ellipsoid
                    // sound (the optimum evaluates cleanly, so it is never
                    // on the far side of this cut).
                    Err(Error::NumericOverflow { .. }) => x.clone(),
                    Err(e) => return Err(e),
                }
            };
            let gn = vec_norm(&g);
            if gn == 0.0 {
                break; // exact stationary point (handled above when evaluated)
            }
            let mut pg = vec![0.0f64; m];
            for i in 0..m {
                for j in 0..m {
                    pg[i] += p[i * m + j] * g[j];
                }
            }
            let s: f64 = g.iter().zip(&pg).map(|(a, b)| a * b).sum();
            if s <= 0.0 {
                repair(&mut p, m, r);
                continue;
            }
            let root = s.sqrt();
            for i in 0..m {
                x[i] -= pg[i] / ((mf + 1.0) * root);
            }
            for i in 0..m {
                for j in 0..m {
                    p[i * m + j] = shrink * (p[i * m + j] - 2.0 / (mf + 1.0) * pg[i] * pg[j] / s);
                }
            }
            if it % 50 == 0 {
                repair(&mut p, m, r);
            }
        }
    }

    // Newton polish from the best iterate: analytic gradients, finite-
    // difference Hessian, ball trust region. Only ever replaces the best
    // point when the objective strictly improves.
    let polish_target = grad_exit.min(1e-7);
    polish(&oracle, r, polish_target, &mut best_x, &mut best_f, &mut best_g);

    if !best_g.is_finite() {
        // The loop never evaluated (degenerate V ≤ ε case): grade Y = 0.
        let (f0, _, g0) = oracle.eval(&best_x)?;
        best_f = f0.min(best_f);
        best_g = g0;
    }

    Ok(DualSolution {
        y_opt: oracle.y_of(&best_x),
        f_value: best_f,
        grad_norm: best_g,
        iterations,
        r_used: r,
        trace,
    })
}

/// Density parameters at the solved dual point, with the achieved-mean
/// diagnostic m(Y°) = −∇E_F(Y°).
pub fn density_report(inst: &ProblemInstance, sol: &DualSolution) -> Result<DensityReport> {
    let oracle = hc_oracle::log_integral(&inst.spec, &inst.f, &sol.y_opt)?;
    let mean: Vec<f64> = oracle.gradient.coords().iter().map(|g| -g).collect();
    let eq = affine_equalities(&inst.spec, &inst.f)?;
    let diff: Vec<f64> =
        mean.iter().zip(inst.a.coords()).map(|(m, a)| m - a).collect();
    let dev = vec_norm(&eq.project_coords(&CartanVector::raw(diff)));
    Ok(DensityReport {
        y_opt: sol.y_opt.clone(),
        log_partition: oracle.log_value,
        mean: CartanVector::raw(mean),
        mean_deviation: dev,
    })
}

/// Re-symmetrize and floor the ellipsoid matrix: eigenvalues below
/// 1e−24·R² are lifted so roundoff can never collapse or flip the shape.
fn repair(p: &mut [f64], m: usize, r: f64) {
    for i in 0..m {
        for j in (i + 1)..m {
            let avg = 0.5 * (p[i * m + j] + p[j * m + i]);
            p[i * m + j] = avg;
            p[j * m + i] = avg;
        }
    }
    let (vals, vecs) = sym_eig(p, m);
    let floor = 1e-24 * r * r;
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for (k, &v) in vals.iter().enumerate() {
                acc += v.max(floor) * vecs[i * m + k] * vecs[j * m + k];
            }
            p[i * m + j] = acc;
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix: returns
/// (eigenvalues, eigenvectors as columns of a row-major matrix).
fn sym_eig(a: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut w = a.to_vec();
    let mut v = vec![0.0f64; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    for _ in 0..60 {
        let mut off = 0.0f64;
        for i in 0..m {
            for j in (i + 1)..m {
                off = off.max(w[i * m + j].abs());
            }
        }
        let scale = (0..m).map(|i| w[i * m + i].abs()).fold(0.0f64, f64::max);
        if off <= 1e-15 * scale.max(1e-300) {
            break;
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let apq = w[i * m + j];
                if apq == 0.0 {
                    continue;
                }
                let theta = (w[j * m + j] - w[i * m + i]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let wik = w[i * m + k];
                    let wjk = w[j * m + k];
                    w[i * m + k] = c * wik - s * wjk;
                    w[j * m + k] = s * wik + c * wjk;
                }
                for k in 0..m {
                    let wki = w[k * m + i];
                    let wkj = w[k * m + j];
                    w[k * m + i] = c * wki - s * wkj;
                    w[k * m + j] = s * wki + c * wkj;
                }
                for k in 0..m {
                    let vki = v[k * m + i];
                    let vkj = v[k * m + j];
                    v[k * m + i] = c * vki - s * vkj;
                    v[k * m + j] = s * vki + c * vkj;
                }
            }
        }
    }
    let vals = (0..m).map(|i| w[i * m + i]).collect();
    (vals, v)
}

fn polish(
    oracle: &VlOracle<'_>,
    r: f64,
    target: f64,
    best_x: &mut Vec<f64>,
    best_f: &mut f64,
    best_g: &mut f64,
) {
    let m = best_x.len();
    let mut x = best_x.clone();
    for _ in 0..25 {
        let (f0, g0, gn0) = match oracle.eval(&x) {
            Ok(v) => v,
            Err(_) => return,
        };
        if f0 < *best_f || (f0 == *best_f && gn0 < *best_g) {
            *best_f = f0;
            *best_x = x.clone();
            *best_g = gn0;
        }
        if gn0 <= target {
            return;
        }
        // Central-difference Hessian of the analytic gradient.
        let h = 1e-6 * vec_norm(&x).max(1.0);
        let mut hess = vec![0.0f64; m * m];
        for j in 0..m {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let gp = match oracle.eval(&xp) {
                Ok((_, g, _)) => g,
                Err(_) => return,
            };
            let gm = match oracle.eval(&xm) {
                Ok((_, g, _)) => g,
                Err(_) => return,
            };
            for i in 0..m {
                hess[i * m + j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let avg = 0.5 * (hess[i * m + j] + hess[j * m + i]);
                hess[i * m + j] = avg;
                hess[j * m + i] = avg;
            }
        }
        let rhs: Vec<f64> = g0.iter().map(|g| -g).collect();
        let mut improved = false;
        let mut damping = 0.0f64;
        for _ in 0..6 {
            let mut hd = hess.clone();
            if damping > 0.0 {
                for i in 0..m {
                    hd[i * m + i] += damping;
                }
            }
            let step = solve_spd(m, &hd, &rhs);
            let mut cand: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let cn = vec_norm(&cand);
            if cn > r {
                for c in cand.iter_mut() {
                    *c *= r / cn * (1.0 - 1e-12);
                }
            }
            match oracle.eval(&cand) {
                Ok((fc, _, _)) if fc < f0 => {
                    x = cand;
                    improved = true;
                    break;
                }
                _ => {
                    let scale = (0..m)
                        .map(|i| hess[i * m + i].abs())
                        .fold(0.0f64, f64::max)
                        .max(1e-12);
                    damping = if damping == 0.0 { 1e-6 * scale } else { damping * 100.0 };
                }
            }
        }
        if !improved {
            return;
        }
    }
}
