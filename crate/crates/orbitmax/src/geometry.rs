//! Orbit polytope geometry: Kostant projection, membership with
//! certificates, Chebyshev margins, and the dual-domain bounding radius.
//!
//! The horizontal (torus) projection of an adjoint orbit is the convex hull
//! of the Weyl orbit of F — a permutohedron for the unitary families and a
//! signed analogue for the others. Everything here works with that polytope
//! in Cartan coordinates:
//!
//! * [`kostant_project`] — orthogonal projection of an algebra element onto
//!   the Cartan subalgebra, in coordinates.
//! * [`membership`] — exact in/on/out classification of a target mean A
//!   against hull(Weyl orbit of F), decided by a phase-1 simplex over the
//!   enumerated vertices, with convex-weight certificates for feasible
//!   points and separating functionals (via a min-norm-point computation)
//!   for infeasible ones.
//! * [`bounding_radius`] / [`balancedness_bound`] — the closed-form bounds
//!   used to restrict the dual search to a ball and to lower-bound orbit
//!   ball masses.
//!
//! # Margins
//!
//! The reported margin of a feasible point is the Chebyshev distance to the
//! polytope boundary *within the affine span* V_L of the polytope (the span
//! is lower-dimensional whenever trace-like coordinates are pinned). It is
//! computed exactly: every supporting halfspace normal of these orbit
//! polytopes lies in {0,±1}^rank after V_L projection (subset-sum facets for
//! type A, signed analogues for B/C, parity facets for D), and for *any*
//! direction d the slack (h(d) − ⟨d,A⟩)/‖d_∥‖ upper-bounds the inscribed
//! radius with equality at the nearest facet normal — so the minimum over
//! the full sign-pattern grid is the exact margin, no LP discretization
//! involved. Support values h(d) come from sorted alignment, not vertex
//! enumeration.

use crate::lie_core::{
    affine_equalities, algebra_residual, inner_product, weyl_orbit, CartanVector, Family,
    GroupSpec, WeylType, WEYL_ENUMERATION_CAP,
};
use crate::linalg::{solve_spd, CMat};
use crate::{Error, Result};

/// Absolute-plus-relative tolerance for membership decisions: affine
/// equality violations, LP feasibility, and the interior/boundary split.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Classification of a point against the orbit polytope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MembershipStatus {
    Interior,
    Boundary,
    Outside,
}

impl MembershipStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MembershipStatus::Interior => "interior",
            MembershipStatus::Boundary => "boundary",
            MembershipStatus::Outside => "outside",
        }
    }
}

/// Proof object accompanying a membership verdict.
#[derive(Clone, Debug)]
pub enum Certificate {
    /// Sparse convex weights (index into `weyl_orbit(spec, F)`, weight):
    /// nonnegative, summing to 1, reproducing A. At most vl_dim + 1 entries.
    Weights(Vec<(usize, f64)>),
    /// Separating functional c with ⟨c,A⟩ > max over the orbit of ⟨c,·⟩.
    Separator(CartanVector),
}

#[derive(Clone, Debug)]
pub struct MembershipReport {
    pub status: MembershipStatus,
    /// Euclidean distance to the polytope boundary within the affine span
    /// (feasible points), or to the polytope itself (outside points).
    pub margin: f64,
    pub certificate: Certificate,
}

/// Ball radius within which the dual optimum is guaranteed to lie, with the
/// inputs that produced it.
#[derive(Clone, Copy, Debug)]
pub struct BoundingBox {
    pub radius: f64,
    pub eta: f64,
    pub d: usize,
    pub norm_f: f64,
}

/// R = (2d/η)·ln(8√d·‖F‖/η): any dual optimum for a target mean η-interior
/// to the orbit polytope has norm below R.
pub fn bounding_radius(d: usize, eta: f64, norm_f: f64) -> Result<BoundingBox> {
    if d < 1 {
        return Err(Error::InvalidInput("group dimension must be at least 1".into()));
    }
    if !(eta > 0.0) || !(norm_f > 0.0) {
        return Err(Error::InvalidInput("eta and ‖F‖ must be positive".into()));
    }
    let arg = 8.0 * (d as f64).sqrt() * norm_f / eta;
    if arg <= 1.0 {
        return Err(Error::InvalidInput(
            "bounding radius needs 8·√d·‖F‖/η > 1; shrink eta or rescale F".into(),
        ));
    }
    Ok(BoundingBox { radius: (2.0 * d as f64 / eta) * arg.ln(), eta, d, norm_f })
}

/// d·ln(4√d·‖F‖/δ): −log of the guaranteed Haar mass of a δ-ball around any
/// orbit point.
pub fn balancedness_bound(d: usize, delta: f64, norm_f: f64) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidInput("group dimension must be at least 1".into()));
    }
    if !(delta > 0.0) || !(norm_f > 0.0) {
        return Err(Error::InvalidInput("delta and ‖F‖ must be positive".into()));
    }
    Ok(d as f64 * (4.0 * (d as f64).sqrt() * norm_f / delta).ln())
}

/// Orthogonal projection of an algebra element onto the Cartan subalgebra,
/// in Cartan coordinates: coordinate j is ⟨X, H_j⟩ against the orthonormal
/// basis, so ⟨π(X), H⟩ = ⟨X, H⟩ for every Cartan H by construction.
pub fn kostant_project(spec: &GroupSpec, x: &CMat) -> Result<CartanVector> {
    let residual = algebra_residual(spec, x);
    let tol = 1e-12 * x.frobenius_norm().max(1.0) * spec.matrix_size() as f64;
    if residual > tol {
        return Err(Error::NotInAlgebra { residual });
    }
    let mut coords: Vec<f64> =
        (0..spec.coord_len()).map(|j| inner_product(x, &spec.cartan_basis_matrix(j))).collect();
    if spec.family() == Family::SU {
        // The trace component of X is zero up to roundoff; remove the drift
        // so the coordinates are exactly zero-sum.
        let mean = coords.iter().sum::<f64>() / coords.len() as f64;
        for c in coords.iter_mut() {
            *c -= mean;
        }
    }
    spec.cartan(coords)
}

/// Orbit point maximizing ⟨d, ·⟩, by sorted alignment.
///
/// Type A pairs sorted d with sorted F (rearrangement inequality). Types
/// B/C pair sorted |d| with sorted |F| and give every slot the sign of d.
/// Type D does the same, then repairs the sign parity when F has no zero
/// coordinate and the unconstrained optimum lands in the wrong coset: the
/// cheapest repair flips a slot where d vanishes (free) or else the aligned
/// pair of smallest |d|·|F| product, which is optimal because the sorted
/// alignment simultaneously maximizes the sum and minimizes the smallest
/// aligned product.
pub fn support_point(spec: &GroupSpec, f: &CartanVector, d: &[f64]) -> Vec<f64> {
    let n = d.len();
    debug_assert_eq!(n, f.len());
    let fc = f.coords();
    let mut out = vec![0.0; n];
    match spec.weyl_type() {
        WeylType::A => {
            let mut slots: Vec<usize> = (0..n).collect();
            slots.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
            let mut fs = fc.to_vec();
            fs.sort_by(f64::total_cmp);
            for (k, &slot) in slots.iter().enumerate() {
                out[slot] = fs[k];
            }
        }
        WeylType::BC | WeylType::D => {
            let mut slots: Vec<usize> = (0..n).collect();
            slots.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
            let mut fs: Vec<f64> = fc.iter().map(|c| c.abs()).collect();
            fs.sort_by(f64::total_cmp);
            for (k, &slot) in slots.iter().enumerate() {
                out[slot] = if d[slot] < 0.0 { -fs[k] } else { fs[k] };
            }
            if spec.weyl_type() == WeylType::D && fc.iter().all(|&c| c != 0.0) {
                let parity_f = fc.iter().filter(|&&c| c < 0.0).count() % 2;
                let parity_w = out.iter().filter(|&&c| c < 0.0).count() % 2;
                if parity_f != parity_w {
                    // Flip a free slot if one exists, else the cheapest pair.
                    let slot = slots
                        .iter()
                        .copied()
                        .find(|&s| d[s] == 0.0)
                        .unwrap_or(slots[0]);
                    out[slot] = -out[slot];
                }
            }
        }
    }
    out
}

/// h_{hull(orbit F)}(d) = max over the Weyl orbit of ⟨d, ·⟩.
pub fn support_value(spec: &GroupSpec, f: &CartanVector, d: &[f64]) -> f64 {
    let p = support_point(spec, f, d);
    p.iter().zip(d).map(|(a, b)| a * b).sum()
}

/// Type-A majorization fast path: A lies in the permutohedron of F exactly
/// when the totals agree and every sorted-descending partial sum of A is
/// dominated by F's. Tolerance is relative to the coordinate scale.
pub fn majorized_by(a: &[f64], f: &[f64]) -> bool {
    if a.len() != f.len() {
        return false;
    }
    let scale = a
        .iter()
        .chain(f)
        .fold(1.0f64, |m, &x| m.max(x.abs()));
    let tol = MEMBERSHIP_TOL * scale;
    let mut sa = a.to_vec();
    let mut sf = f.to_vec();
    sa.sort_by(|x, y| y.total_cmp(x));
    sf.sort_by(|x, y| y.total_cmp(x));
    let (mut pa, mut pf) = (0.0, 0.0);
    for k in 0..a.len() {
        pa += sa[k];
        pf += sf[k];
        if pa > pf + tol {
            return false;
        }
    }
    (pa - pf).abs() <= tol
}

/// Classify A against hull(weyl_orbit(F)).
pub fn membership(spec: &GroupSpec, f: &CartanVector, a: &CartanVector) -> Result<MembershipReport> {
    let n = spec.coord_len();
    if f.len() != n || a.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: f.len().min(a.len()) });
    }
    if spec.rank() > WEYL_ENUMERATION_CAP {
        return Err(Error::RankCapExceeded { rank: spec.rank(), cap: WEYL_ENUMERATION_CAP });
    }
    let scale = f.norm().max(a.norm()).max(1.0);
    let eq = affine_equalities(spec, f)?;

    // A point off the affine span is outside no matter what; the violated
    // equality direction is itself a separating functional.
    let mut worst = (0.0f64, None);
    for (dir, &val) in eq.fixed_directions.iter().zip(&eq.fixed_values) {
        let gap = dir.dot(a) - val;
        if gap.abs() > worst.0 {
            worst = (gap.abs(), Some((dir.clone(), gap)));
        }
    }
    if worst.0 > MEMBERSHIP_TOL * scale {
        let (dir, gap) = worst.1.expect("violation recorded");
        let c: Vec<f64> = dir.coords().iter().map(|&x| x * gap.signum()).collect();
        return Ok(MembershipReport {
            status: MembershipStatus::Outside,
            margin: worst.0,
            certificate: Certificate::Separator(CartanVector::raw(c)),
        });
    }

    if eq.vl_dim() == 0 {
        // The polytope is the single point F: A matched every equality, so
        // it sits on (and at) that point. Report it as boundary — a point
        // has no interior to carry a positive margin.
        return Ok(MembershipReport {
            status: MembershipStatus::Boundary,
            margin: 0.0,
            certificate: Certificate::Weights(vec![(0, 1.0)]),
        });
    }

    let orbit = weyl_orbit(spec, f)?;
    let m = eq.vl_dim() + 1;
    let cols: Vec<Vec<f64>> = orbit
        .iter()
        .map(|w| {
            let mut col = eq.project_coords(w);
            col.push(1.0);
            col
        })
        .collect();
    let mut rhs = eq.project_coords(a);
    rhs.push(1.0);

    match hull_weights(m, &cols, &rhs, scale) {
        Some(weights) => {
            let margin = chebyshev_margin(spec, f, a, &eq).max(0.0);
            let status = if margin > MEMBERSHIP_TOL * scale {
                MembershipStatus::Interior
            } else {
                MembershipStatus::Boundary
            };
            Ok(MembershipReport { status, margin, certificate: Certificate::Weights(weights) })
        }
        None => {
            let (nearest, distance) = min_norm_point(spec, f, a);
            let c: Vec<f64> =
                a.coords().iter().zip(&nearest).map(|(ai, pi)| ai - pi).collect();
            Ok(MembershipReport {
                status: MembershipStatus::Outside,
                margin: distance,
                certificate: Certificate::Separator(CartanVector::raw(c)),
            })
        }
    }
}

/// Exact inscribed-ball radius of the polytope around A within V_L: the
/// minimum support slack over the {0,±1}^n direction grid (a superset of
/// all facet normals — see the module docs). Can come out a hair negative
/// for boundary points; callers clamp.
fn chebyshev_margin(
    spec: &GroupSpec,
    f: &CartanVector,
    a: &CartanVector,
    eq: &crate::lie_core::AffineConstraintSet,
) -> f64 {
    let n = spec.coord_len();
    let mut digits = vec![0u8; n];
    let mut best = f64::INFINITY;
    let mut d = vec![0.0f64; n];
    loop {
        // Advance the ternary counter; digits encode {0 → 0, 1 → +1, 2 → −1}.
        let mut i = 0;
        loop {
            if i == n {
                return if best.is_finite() { best } else { 0.0 };
            }
            digits[i] += 1;
            if digits[i] < 3 {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        for (dst, &dig) in d.iter_mut().zip(&digits) {
            *dst = match dig {
                0 => 0.0,
                1 => 1.0,
                _ => -1.0,
            };
        }
        // Slack per unit length of the V_L component; directions entirely
        // inside the fixed span carry no facet.
        let proj = eq.project_coords(&CartanVector::raw(d.clone()));
        let norm = proj.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let slack = support_value(spec, f, &d)
            - d.iter().zip(a.coords()).map(|(x, y)| x * y).sum::<f64>();
        best = best.min(slack / norm);
    }
}

/// Phase-1 simplex over the orbit columns: find convex weights reproducing
/// the target, or decide none exist. Revised form with a dense basis
/// inverse — the column count can be large (full Weyl orbits) but the row
/// count is only vl_dim + 1.
fn hull_weights(
    m: usize,
    cols: &[Vec<f64>],
    rhs: &[f64],
    scale: f64,
) -> Option<Vec<(usize, f64)>> {
    let k = cols.len();
    // Row signs make the right side nonnegative so the artificial basis is
    // feasible.
    let row_sign: Vec<f64> =
        rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let col_entry = |j: usize, i: usize| row_sign[i] * cols[j][i];
    let mut xb: Vec<f64> = rhs.iter().zip(&row_sign).map(|(&b, &s)| s * b).collect();
    let mut basis: Vec<usize> = (k..k + m).collect(); // artificials
    let mut in_basis = vec![false; k];
    let mut binv = vec![0.0f64; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let pivot_tol = 1e-11 * scale.max(1.0);
    let mut bland = false;
    let mut stall = 0usize;
    let max_iter = 200 + 40 * (m + k.min(10_000));

    for _ in 0..max_iter {
        // Simplex multipliers y = c_B · B⁻¹ (artificial cost 1, real cost 0).
        let mut y = vec![0.0f64; m];
        for (r, &b) in basis.iter().enumerate() {
            if b >= k {
                for i in 0..m {
                    y[i] += binv[r * m + i];
                }
            }
        }
        let objective: f64 =
            basis.iter().zip(&xb).filter(|(&b, _)| b >= k).map(|(_, &x)| x).sum();
        if objective <= MEMBERSHIP_TOL * scale {
            // Feasible: collect the real basic columns as weights.
            let mut weights: Vec<(usize, f64)> = basis
                .iter()
                .zip(&xb)
                .filter(|(&b, &x)| b < k && x > 1e-15)
                .map(|(&b, &x)| (b, x))
                .collect();
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            if total > 0.0 {
                for (_, w) in weights.iter_mut() {
                    *w /= total;
                }
            }
            weights.sort_by_key(|&(j, _)| j);
            return Some(weights);
        }

        // Price the real columns: reduced cost = 0 − yᵀa_j.
        let mut enter: Option<(usize, f64)> = None;
        for j in 0..k {
            if in_basis[j] {
                continue;
            }
            let mut red = 0.0;
            for i in 0..m {
                red -= y[i] * col_entry(j, i);
            }
            if red < -pivot_tol {
                if bland {
                    enter = Some((j, red));
                    break;
                }
                if enter.map_or(true, |(_, best)| red < best) {
                    enter = Some((j, red));
                }
            }
        }
        let (e, _) = match enter {
            Some(p) => p,
            // No improving column while artificials remain positive.
            None => return None,
        };

        // Direction d = B⁻¹ a_e and the ratio test.
        let mut dir = vec![0.0f64; m];
        for (r, drow) in dir.iter_mut().enumerate() {
            for i in 0..m {
                *drow += binv[r * m + i] * col_entry(e, i);
            }
        }
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if dir[r] > 1e-11 {
                let ratio = xb[r] / dir[r];
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - 1e-14 || (ratio < lratio + 1e-14 && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let (r, ratio) = match leave {
            Some(p) => p,
            None => return None, // numerically stuck; report infeasible
        };
        if ratio < 1e-14 {
            stall += 1;
            if stall > 2 * (m + 10) {
                bland = true;
            }
        } else {
            stall = 0;
        }

        // Pivot: scale row r, eliminate elsewhere, swap basis.
        let piv = dir[r];
        for i in 0..m {
            binv[r * m + i] /= piv;
        }
        xb[r] /= piv;
        for rr in 0..m {
            if rr != r && dir[rr].abs() > 0.0 {
                let factor = dir[rr];
                for i in 0..m {
                    binv[rr * m + i] -= factor * binv[r * m + i];
                }
                xb[rr] -= factor * xb[r];
                if xb[rr] < 0.0 && xb[rr] > -1e-12 {
                    xb[rr] = 0.0;
                }
            }
        }
        if basis[r] < k {
            in_basis[basis[r]] = false;
        }
        basis[r] = e;
        in_basis[e] = true;
    }
    // Iteration cap exhausted without a verdict — treat as infeasible only
    // if real progress is impossible; conservative choice is infeasible.
    None
}

/// Nearest point of the orbit polytope to A, by the min-norm-point method:
/// maintain a small affinely independent corral of vertices, alternate
/// exact affine minimization with support-function (sorted-alignment) calls
/// that pull in one new vertex per major cycle. Wolfe's classic scheme; the
/// linear oracle needs no vertex enumeration, so this works at any rank.
fn min_norm_point(spec: &GroupSpec, f: &CartanVector, a: &CartanVector) -> (Vec<f64>, f64) {
    let n = a.len();
    let ac = a.coords();
    let shift = |w: &[f64]| -> Vec<f64> { w.iter().zip(ac).map(|(x, y)| x - y).collect() };
    let first = shift(&support_point(spec, f, ac));
    let mut corral: Vec<Vec<f64>> = vec![first.clone()];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut x = first;

    let norm2 = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
    for _ in 0..500 {
        let xx = norm2(&x);
        // Linear oracle: vertex minimizing ⟨x, v⟩ over the shifted polytope.
        let neg_x: Vec<f64> = x.iter().map(|c| -c).collect();
        let v_new = shift(&support_point(spec, f, &neg_x));
        let along: f64 = x.iter().zip(&v_new).map(|(p, q)| p * q).sum();
        if xx - along <= 1e-10 * xx.max(1e-18) {
            break; // x is the projection of the origin within tolerance
        }
        if corral.iter().any(|s| {
            s.iter().zip(&v_new).map(|(p, q)| (p - q).abs()).fold(0.0f64, f64::max) < 1e-14
        }) {
            break; // oracle returned a known vertex: numerical fixed point
        }
        corral.push(v_new);
        lambda.push(0.0);

        // Minor cycles: affine minimization, clipped back to the simplex.
        for _ in 0..100 {
            let alpha = affine_minimizer(&corral);
            if alpha.iter().all(|&c| c >= -1e-12) {
                lambda = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, &al) in lambda.iter().zip(&alpha) {
                if al < *l {
                    let t = l / (l - al);
                    if al < 0.0 {
                        theta = theta.min(t);
                    }
                }
            }
            for (l, &al) in lambda.iter_mut().zip(&alpha) {
                *l += theta * (al - *l);
            }
            let keep: Vec<usize> =
                (0..corral.len()).filter(|&i| lambda[i] > 1e-13).collect();
            if keep.len() == corral.len() {
                // θ clipped nothing out (roundoff); accept the clip as-is.
                break;
            }
            corral = keep.iter().map(|&i| corral[i].clone()).collect();
            lambda = keep.iter().map(|&i| lambda[i]).collect();
            let total: f64 = lambda.iter().sum();
            for l in lambda.iter_mut() {
                *l /= total;
            }
        }
        x = vec![0.0; n];
        for (s, &l) in corral.iter().zip(&lambda) {
            for (xi, si) in x.iter_mut().zip(s) {
                *xi += l * si;
            }
        }
    }
    let distance = norm2(&x).sqrt();
    let nearest: Vec<f64> = x.iter().zip(ac).map(|(xi, ai)| xi + ai).collect();
    (nearest, distance)
}

/// Minimizer of ‖Σ αᵢ sᵢ‖ over affine weights (Σα = 1): α ∝ (G + εI)⁻¹·1
/// with G the Gram matrix, normalized; the tiny ridge keeps the solve alive
/// when the corral degenerates.
fn affine_minimizer(s: &[Vec<f64>]) -> Vec<f64> {
    let k = s.len();
    let mut g = vec![0.0f64; k * k];
    let mut diag_max = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = s[i].iter().zip(&s[j]).map(|(a, b)| a * b).sum();
            g[i * k + j] = dot;
            if i == j {
                diag_max = diag_max.max(dot.abs());
            }
        }
    }
    let ridge = 1e-12 * diag_max.max(1e-30);
    for i in 0..k {
        g[i * k + i] += ridge;
    }
    let z = solve_spd(k, &g, &vec![1.0; k]);
    let total: f64 = z.iter().sum();
    z.iter().map(|&c| c / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_core::cartan_embed;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn spec(family: Family, n: usize) -> GroupSpec {
        GroupSpec::new(family, n).expect("valid spec")
    }

    fn cv(spec: &GroupSpec, coords: &[f64]) -> CartanVector {
        spec.cartan(coords.to_vec()).expect("valid coordinates")
    }

    fn random_coords(spec: &GroupSpec, rng: &mut impl FnMut() -> f64) -> Vec<f64> {
        let mut c: Vec<f64> = (0..spec.coord_len()).map(|_| 4.0 * rng() - 2.0).collect();
        if spec.family() == Family::SU {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            for x in c.iter_mut() {
                *x -= mean;
            }
        }
        c
    }

    const FAMILIES: [(Family, usize); 6] = [
        (Family::U, 3),
        (Family::SU, 3),
        (Family::SOodd, 3),
        (Family::SOeven, 3),
        (Family::Oeven, 3),
        (Family::USp, 3),
    ];

    #[test]
    fn projection_inverts_embedding() {
        let mut rng = lcg(5);
        for (fam, n) in FAMILIES {
            let s = spec(fam, n);
            for _ in 0..5 {
                let v = cv(&s, &random_coords(&s, &mut rng));
                let x = cartan_embed(&s, &v).unwrap();
                let back = kostant_project(&s, &x).unwrap();
                for (orig, rec) in v.coords().iter().zip(back.coords()) {
                    assert!(
                        (orig - rec).abs() < 1e-12,
                        "{fam:?}: embed/project roundtrip drifted: {orig} vs {rec}"
                    );
                }
            }
        }
    }

    #[test]
    fn offdiagonal_elements_project_to_zero() {
        let s = spec(Family::U, 2);
        let mut x = CMat::zeros(2);
        x[(0, 1)] = num_complex::Complex64::new(0.4, 0.7);
        x[(1, 0)] = num_complex::Complex64::new(-0.4, 0.7);
        let p = kostant_project(&s, &x).unwrap();
        assert_eq!(p.coords(), &[0.0, 0.0], "off-diagonal skew-Hermitian has no Cartan part");
    }

    #[test]
    fn projection_rejects_non_algebra_input() {
        let s = spec(Family::U, 2);
        let mut x = CMat::zeros(2);
        x[(0, 0)] = num_complex::Complex64::new(1.0, 0.0); // Hermitian, not skew
        assert!(matches!(kostant_project(&s, &x), Err(Error::NotInAlgebra { .. })));
    }

    #[test]
    fn support_values_match_enumerated_orbits() {
        let mut rng = lcg(17);
        for (fam, n) in FAMILIES {
            let s = spec(fam, n);
            for _ in 0..20 {
                let f = cv(&s, &random_coords(&s, &mut rng));
                let d: Vec<f64> = (0..n).map(|_| 4.0 * rng() - 2.0).collect();
                let orbit = weyl_orbit(&s, &f).unwrap();
                let brute = orbit
                    .iter()
                    .map(|w| w.coords().iter().zip(&d).map(|(a, b)| a * b).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                let fast = support_value(&s, &f, &d);
                assert!(
                    (brute - fast).abs() < 1e-10 * (1.0 + brute.abs()),
                    "{fam:?} support mismatch: sorted {fast} vs enumerated {brute}"
                );
            }
        }
    }

    #[test]
    fn support_handles_type_d_parity() {
        // Orbit of (1,2) in so(4): {(1,2),(2,1),(−1,−2),(−2,−1)}.
        let s = spec(Family::SOeven, 2);
        let f = cv(&s, &[1.0, 2.0]);
        assert_eq!(support_value(&s, &f, &[1.0, 1.0]), 3.0);
        assert_eq!(support_value(&s, &f, &[1.0, -1.0]), 1.0, "parity repair must engage");
        assert_eq!(support_value(&s, &f, &[0.0, 1.0]), 2.0);
    }

    #[test]
    fn membership_frozen_segment_example() {
        let s = spec(Family::U, 2);
        let f = cv(&s, &[1.0, 0.0]);
        let r = membership(&s, &f, &cv(&s, &[0.5, 0.5])).unwrap();
        assert_eq!(r.status, MembershipStatus::Interior);
        assert!(
            (r.margin - 0.5f64.sqrt()).abs() < 1e-9,
            "segment midpoint margin: got {}, want {}",
            r.margin,
            0.5f64.sqrt()
        );
        match &r.certificate {
            Certificate::Weights(w) => {
                let total: f64 = w.iter().map(|(_, x)| x).sum();
                assert!((total - 1.0).abs() < 1e-9, "weights must sum to 1");
            }
            other => panic!("expected weights certificate, got {other:?}"),
        }

        // A vertex is on the boundary with zero margin.
        let r = membership(&s, &f, &f).unwrap();
        assert_eq!(r.status, MembershipStatus::Boundary);
        assert!(r.margin.abs() < 1e-9, "vertex margin should vanish, got {}", r.margin);

        // Equality-violating target: trace differs.
        let r = membership(&s, &f, &cv(&s, &[0.6, 0.6])).unwrap();
        assert_eq!(r.status, MembershipStatus::Outside);
        assert!(matches!(r.certificate, Certificate::Separator(_)));

        // On-span but majorization-violating target.
        let r = membership(&s, &f, &cv(&s, &[1.2, -0.2])).unwrap();
        assert_eq!(r.status, MembershipStatus::Outside);
    }

    #[test]
    fn interior_certificates_reconstruct_target() {
        let mut rng = lcg(29);
        for (fam, n) in FAMILIES {
            let s = spec(fam, n);
            for _ in 0..5 {
                let f = cv(&s, &random_coords(&s, &mut rng));
                let orbit = weyl_orbit(&s, &f).unwrap();
                // Random convex combination spread over the whole orbit is
                // interior unless the polytope is degenerate.
                let raw: Vec<f64> = (0..orbit.len()).map(|_| rng() + 0.05).collect();
                let total: f64 = raw.iter().sum();
                let mut target = vec![0.0; n];
                for (w, &c) in orbit.iter().zip(&raw) {
                    for (t, &x) in target.iter_mut().zip(w.coords()) {
                        *t += x * c / total;
                    }
                }
                let a = CartanVector::raw(target.clone());
                let r = membership(&s, &f, &a).unwrap();
                assert_ne!(
                    r.status,
                    MembershipStatus::Outside,
                    "{fam:?}: convex combination classified outside"
                );
                if let Certificate::Weights(w) = &r.certificate {
                    let mut rebuilt = vec![0.0; n];
                    let mut total = 0.0;
                    for &(idx, wt) in w {
                        assert!(wt >= 0.0, "negative certificate weight");
                        total += wt;
                        for (t, &x) in rebuilt.iter_mut().zip(orbit[idx].coords()) {
                            *t += wt * x;
                        }
                    }
                    assert!((total - 1.0).abs() < 1e-9, "{fam:?}: weights sum {total}");
                    for (got, want) in rebuilt.iter().zip(&target) {
                        assert!(
                            (got - want).abs() < 1e-8,
                            "{fam:?}: certificate rebuilds {got}, target {want}"
                        );
                    }
                } else {
                    panic!("{fam:?}: feasible point must carry weights");
                }
            }
        }
    }

    #[test]
    fn outside_certificates_separate() {
        let mut rng = lcg(31);
        for (fam, n) in FAMILIES {
            let s = spec(fam, n);
            for _ in 0..5 {
                let f = cv(&s, &random_coords(&s, &mut rng));
                let orbit = weyl_orbit(&s, &f).unwrap();
                // Push past a vertex, away from the orbit centroid; the
                // centroid direction keeps the target on the affine span.
                let mut centroid = vec![0.0; n];
                for w in &orbit {
                    for (c, &x) in centroid.iter_mut().zip(w.coords()) {
                        *c += x / orbit.len() as f64;
                    }
                }
                let vertex = orbit[0].coords();
                let target: Vec<f64> = vertex
                    .iter()
                    .zip(&centroid)
                    .map(|(v, c)| c + 1.7 * (v - c))
                    .collect();
                let a = CartanVector::raw(target.clone());
                let r = membership(&s, &f, &a).unwrap();
                if r.status != MembershipStatus::Outside {
                    // A degenerate orbit (e.g. centroid == vertex) can keep
                    // the scaled point inside; skip those draws.
                    continue;
                }
                assert!(r.margin > 0.0, "{fam:?}: outside margin must be positive");
                let c = match &r.certificate {
                    Certificate::Separator(c) => c,
                    other => panic!("{fam:?}: outside must carry separator, got {other:?}"),
                };
                let h = support_value(&s, &f, c.coords());
                let ca: f64 = c.coords().iter().zip(&target).map(|(x, y)| x * y).sum();
                assert!(
                    ca > h + r.margin * (1.0 - 1e-9) * c.norm(),
                    "{fam:?}: separator inequality fails: ⟨c,A⟩ = {ca}, h = {h}, margin = {}",
                    r.margin
                );
            }
        }
    }

    #[test]
    fn outside_distance_matches_hand_geometry() {
        // Nearest point of the so(4) orbit parallelogram of (1,2) to (3,3)
        // is (1.5, 1.5) on the edge between (1,2) and (2,1).
        let s = spec(Family::SOeven, 2);
        let f = cv(&s, &[1.0, 2.0]);
        let r = membership(&s, &f, &cv(&s, &[3.0, 3.0])).unwrap();
        assert_eq!(r.status, MembershipStatus::Outside);
        let want = (1.5f64 * 1.5 * 2.0).sqrt();
        assert!(
            (r.margin - want).abs() < 1e-9,
            "distance to parallelogram: got {}, want {want}",
            r.margin
        );
    }

    #[test]
    fn majorization_agrees_with_lp() {
        let mut rng = lcg(43);
        let u3 = spec(Family::U, 3);
        let mut checked_inside = 0usize;
        for _ in 0..200 {
            let f = random_coords(&u3, &mut rng);
            // Half the draws share F's total (candidates for feasibility),
            // half are free (usually violating the trace equality).
            let mut a = random_coords(&u3, &mut rng);
            if rng() < 0.5 {
                let shift = (f.iter().sum::<f64>() - a.iter().sum::<f64>()) / 3.0;
                for c in a.iter_mut() {
                    *c += shift;
                }
            }
            let fast = majorized_by(&a, &f);
            let lp = membership(&u3, &cv(&u3, &f), &CartanVector::raw(a.clone())).unwrap();
            let lp_inside = lp.status != MembershipStatus::Outside;
            assert_eq!(
                fast, lp_inside,
                "majorization vs LP disagree: A = {a:?}, F = {f:?}"
            );
            checked_inside += usize::from(lp_inside);
        }
        assert!(checked_inside > 10, "test draws never landed inside; not exercising both sides");
    }

    #[test]
    fn rank_one_margin_is_distance_to_endpoints() {
        let s = spec(Family::SOodd, 1);
        let f = cv(&s, &[2.0]);
        let r = membership(&s, &f, &cv(&s, &[0.5])).unwrap();
        assert_eq!(r.status, MembershipStatus::Interior);
        assert!((r.margin - 1.5).abs() < 1e-10, "interval margin: got {}", r.margin);
    }

    #[test]
    fn point_polytope_reports_boundary() {
        // U(1): the orbit of any F is the single point F.
        let s = spec(Family::U, 1);
        let f = cv(&s, &[0.7]);
        let r = membership(&s, &f, &f).unwrap();
        assert_eq!(r.status, MembershipStatus::Boundary);
        assert_eq!(r.margin, 0.0);
        let r = membership(&s, &f, &cv(&s, &[0.8])).unwrap();
        assert_eq!(r.status, MembershipStatus::Outside);
    }

    #[test]
    fn bounding_radius_matches_closed_form() {
        let b = bounding_radius(4, 0.5, 1.0).unwrap();
        assert!(
            (b.radius - 16.0 * 32.0f64.ln()).abs() < 1e-12,
            "frozen bounding radius: got {}",
            b.radius
        );
        assert_eq!((b.eta, b.d, b.norm_f), (0.5, 4, 1.0));
        // Halving eta strictly increases R.
        let tighter = bounding_radius(4, 0.25, 1.0).unwrap();
        assert!(tighter.radius > b.radius);
        // d = 1 with eta = 8‖F‖/e makes the log term exactly 1.
        let e = core::f64::consts::E;
        let unit = bounding_radius(1, 8.0 / e, 1.0).unwrap();
        assert!((unit.radius - 2.0 / (8.0 / e)).abs() < 1e-12);
        // Degenerate inputs refuse.
        assert!(bounding_radius(0, 0.5, 1.0).is_err());
        assert!(bounding_radius(4, -1.0, 1.0).is_err());
        assert!(bounding_radius(4, 0.5, 0.0).is_err());
        assert!(bounding_radius(1, 100.0, 1.0).is_err(), "log argument below 1 must refuse");
    }

    #[test]
    fn balancedness_matches_closed_form() {
        let b = balancedness_bound(4, 1.0, 1.0).unwrap();
        assert!((b - 4.0 * 8.0f64.ln()).abs() < 1e-12, "frozen balancedness: got {b}");
        let doubled = balancedness_bound(4, 1.0, 2.0).unwrap();
        assert!(
            (doubled - b - 4.0 * 2.0f64.ln()).abs() < 1e-12,
            "doubling ‖F‖ must add d·ln 2"
        );
        assert!(balancedness_bound(4, 0.0, 1.0).is_err());
    }

    #[test]
    fn kostant_containment_for_conjugated_orbit_points() {
        // Deterministic rotations exercise the containment property without
        // pulling in the Haar sampler (mc_validate covers the random case).
        let s = spec(Family::U, 3);
        let f = cv(&s, &[1.0, 0.5, -0.25]);
        let x = cartan_embed(&s, &f).unwrap();
        for k in 0..25 {
            let t = 0.1 + 0.23 * k as f64;
            // Givens-style unitary mixing coordinates 0 and 1, then 1 and 2.
            let mut g = CMat::identity(3);
            g[(0, 0)] = num_complex::Complex64::new(t.cos(), 0.0);
            g[(0, 1)] = num_complex::Complex64::new(-t.sin(), 0.0);
            g[(1, 0)] = num_complex::Complex64::new(t.sin(), 0.0);
            g[(1, 1)] = num_complex::Complex64::new(t.cos(), 0.0);
            let mut h = CMat::identity(3);
            let u = 0.7 * t;
            h[(1, 1)] = num_complex::Complex64::new(u.cos(), 0.0);
            h[(1, 2)] = num_complex::Complex64::new(0.0, u.sin());
            h[(2, 1)] = num_complex::Complex64::new(0.0, u.sin());
            h[(2, 2)] = num_complex::Complex64::new(u.cos(), 0.0);
            let rot = g.mul(&h);
            let moved = crate::lie_core::adjoint_apply(&s, &rot, &x).unwrap();
            let proj = kostant_project(&s, &moved).unwrap();
            let r = membership(&s, &f, &proj).unwrap();
            assert_ne!(
                r.status,
                MembershipStatus::Outside,
                "conjugated projection left the polytope at k = {k}"
            );
        }
    }
}
