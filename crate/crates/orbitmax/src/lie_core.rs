//! Group and algebra plumbing for the five supported classical families.
//!
//! | family   | group      | dim        | rank | N (matrix side) | Weyl group            |
//! |----------|------------|------------|------|-----------------|-----------------------|
//! | `U`      | U(n)       | n²         | n    | n               | Aₙ₋₁ (permutations)   |
//! | `SU`     | SU(n)      | n² − 1     | n−1  | n               | Aₙ₋₁                  |
//! | `SOeven` | SO(2n)     | n(2n−1)    | n    | 2n              | Dₙ (even sign flips)  |
//! | `SOodd`  | SO(2n+1)   | n(2n+1)    | n    | 2n+1            | Bₙ (signed perms)     |
//! | `Oeven`  | O(2n)      | n(2n−1)    | n    | 2n              | Bₙ (integration only) |
//! | `USp`    | USp(n)     | n(2n+1)    | n    | 2n              | Cₙ (signed perms)     |
//!
//! Cartan elements are stored as real coordinate vectors in the orthonormal
//! basis {H_j} of each family:
//!
//! * U/SU: H_j = i·E_{jj} (SU coordinates are n-vectors constrained to sum
//!   to zero, which keeps the determinant formulas uniform across families);
//! * SO(2n), SO(2n+1), O(2n): H_j = (E_{2j-1,2j} − E_{2j,2j-1})/√2, with one
//!   trailing zero row/column in the odd case;
//! * USp(n): H_j = i·(E_{jj} − E_{n+j,n+j})/√2 in the complex 2n×2n
//!   realization with symplectic form J = [[0, −I], [I, 0]].
//!
//! Orthonormality is with respect to the Ad-invariant inner product
//! ⟨X,Y⟩ = −Re Tr(XY), so coordinate Euclidean norms equal algebra norms and
//! every projection is a plain dot product against embedded basis elements.

use crate::linalg::CMat;
use crate::{Error, Result};
use num_complex::Complex64;

/// Weyl-orbit enumeration cap: rank above this means orbit lists (and the
/// operations built on them) are refused, since |orbit| can reach 8!·2⁸ ≈ 10⁷
/// already at rank 8. Formula-based operations remain available at any rank.
pub const WEYL_ENUMERATION_CAP: usize = 8;

/// Relative tolerance for "is this matrix in the group" residuals.
pub const GROUP_RESIDUAL_TOL: f64 = 1e-10;

/// One of the supported classical families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Family {
    U,
    SU,
    SOeven,
    SOodd,
    Oeven,
    USp,
}

/// Weyl-group type of a family, as an action on Cartan coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeylType {
    /// Permutations only.
    A,
    /// Permutations with arbitrary sign flips (types B and C act identically
    /// on coordinates).
    BC,
    /// Permutations with an even number of sign flips.
    D,
}

/// A validated (family, n) pair together with its derived metadata.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupSpec {
    family: Family,
    n: usize,
}

impl GroupSpec {
    /// Validate and build a group spec. SOeven requires n ≥ 2: SO(2) is a
    /// circle, its "orbit" formulas degenerate, and the Weyl group D₁ is
    /// trivial while the orbit is not — the family is rejected outright.
    pub fn new(family: Family, n: usize) -> Result<GroupSpec> {
        if n == 0 {
            return Err(Error::BadSize);
        }
        if family == Family::SOeven && n < 2 {
            return Err(Error::DegenerateFamily);
        }
        Ok(GroupSpec { family, n })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Real dimension of the group manifold.
    pub fn dim(&self) -> usize {
        let n = self.n;
        match self.family {
            Family::U => n * n,
            Family::SU => n * n - 1,
            Family::SOeven | Family::Oeven => n * (2 * n - 1), // N(N-1)/2 with N = 2n
            Family::SOodd => n * (2 * n + 1),                  // N(N-1)/2 with N = 2n+1
            Family::USp => n * (2 * n + 1),
        }
    }

    /// Dimension of the Cartan subalgebra (number of independent coordinates;
    /// SU coordinates are stored as n-vectors but live in the zero-sum
    /// hyperplane of dimension n − 1).
    pub fn rank(&self) -> usize {
        match self.family {
            Family::SU => self.n - 1,
            _ => self.n,
        }
    }

    /// Length of coordinate vectors as stored (n for every family; equals
    /// rank except for SU).
    pub fn coord_len(&self) -> usize {
        self.n
    }

    /// Side of the defining matrix representation.
    pub fn matrix_size(&self) -> usize {
        match self.family {
            Family::U | Family::SU => self.n,
            Family::SOeven | Family::Oeven | Family::USp => 2 * self.n,
            Family::SOodd => 2 * self.n + 1,
        }
    }

    /// How the Weyl group acts on coordinates.
    pub fn weyl_type(&self) -> WeylType {
        match self.family {
            Family::U | Family::SU => WeylType::A,
            Family::SOodd | Family::Oeven | Family::USp => WeylType::BC,
            Family::SOeven => WeylType::D,
        }
    }

    /// O(2n) supports integration but not the maximum-entropy solve (the
    /// duality argument needs a connected group).
    pub fn integration_only(&self) -> bool {
        self.family == Family::Oeven
    }

    /// True when matrix entries are real (orthogonal families).
    pub fn is_real_family(&self) -> bool {
        matches!(self.family, Family::SOeven | Family::SOodd | Family::Oeven)
    }

    /// Validate a coordinate slice and wrap it as a CartanVector.
    pub fn cartan(&self, coords: Vec<f64>) -> Result<CartanVector> {
        if coords.len() != self.coord_len() {
            return Err(Error::LengthMismatch { expected: self.coord_len(), got: coords.len() });
        }
        if self.family == Family::SU {
            let sum: f64 = coords.iter().sum();
            let scale = coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if sum.abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::SuSumNonzero { sum });
            }
        }
        Ok(CartanVector { coords })
    }

    /// The j-th orthonormal Cartan basis element in the defining
    /// representation (0-based j < n).
    pub fn cartan_basis_matrix(&self, j: usize) -> CMat {
        assert!(j < self.n, "basis index out of range");
        let nn = self.matrix_size();
        let mut m = CMat::zeros(nn);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self.family {
            Family::U | Family::SU => {
                m[(j, j)] = Complex64::new(0.0, 1.0);
            }
            Family::SOeven | Family::SOodd | Family::Oeven => {
                m[(2 * j, 2 * j + 1)] = Complex64::new(s, 0.0);
                m[(2 * j + 1, 2 * j)] = Complex64::new(-s, 0.0);
            }
            Family::USp => {
                m[(j, j)] = Complex64::new(0.0, s);
                m[(self.n + j, self.n + j)] = Complex64::new(0.0, -s);
            }
        }
        m
    }
}

/// Real coordinates in the orthonormal Cartan basis. Construct through
/// [`GroupSpec::cartan`] so length and the SU zero-sum invariant are checked.
#[derive(Clone, Debug, PartialEq)]
pub struct CartanVector {
    coords: Vec<f64>,
}

impl CartanVector {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Euclidean norm; equals the algebra norm of the embedded element
    /// because the basis is orthonormal.
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &CartanVector) -> f64 {
        assert_eq!(self.len(), other.len(), "coordinate length mismatch");
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    /// Construct without validation — for internal use where the invariants
    /// are maintained by construction (e.g. Weyl images of a valid vector).
    pub(crate) fn raw(coords: Vec<f64>) -> CartanVector {
        CartanVector { coords }
    }
}

/// Σ_j v_j H_j in the family's matrix realization. The embedding is an
/// isometry: ‖result‖ = ‖v‖₂.
pub fn cartan_embed(spec: &GroupSpec, v: &CartanVector) -> Result<CMat> {
    if v.len() != spec.coord_len() {
        return Err(Error::LengthMismatch { expected: spec.coord_len(), got: v.len() });
    }
    let nn = spec.matrix_size();
    let mut m = CMat::zeros(nn);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for (j, &c) in v.coords().iter().enumerate() {
        match spec.family() {
            Family::U | Family::SU => {
                m[(j, j)] = Complex64::new(0.0, c);
            }
            Family::SOeven | Family::SOodd | Family::Oeven => {
                m[(2 * j, 2 * j + 1)] = Complex64::new(c * s, 0.0);
                m[(2 * j + 1, 2 * j)] = Complex64::new(-c * s, 0.0);
            }
            Family::USp => {
                m[(j, j)] = Complex64::new(0.0, c * s);
                m[(spec.n() + j, spec.n() + j)] = Complex64::new(0.0, -c * s);
            }
        }
    }
    Ok(m)
}

/// The Ad-invariant inner product ⟨X,Y⟩ = −Re Tr(XY), positive definite on
/// each algebra.
pub fn inner_product(x: &CMat, y: &CMat) -> f64 {
    -x.re_trace_product(y)
}

/// How far `g` is from the group: the max of the unitarity residual
/// ‖g*g − I‖, the realness residual for orthogonal families, and the
/// symplectic-form residual ‖gᵀJg − J‖ for USp.
pub fn group_residual(spec: &GroupSpec, g: &CMat) -> f64 {
    let nn = spec.matrix_size();
    if g.n != nn {
        return f64::INFINITY;
    }
    let unitarity = g.adjoint().mul(g).sub(&CMat::identity(nn)).frobenius_norm();
    let mut residual = unitarity;
    if spec.is_real_family() {
        residual = residual.max(g.max_abs_im());
    }
    if spec.family() == Family::USp {
        let j = symplectic_form(spec.n());
        let gt = transpose(g);
        residual = residual.max(gt.mul(&j).mul(g).sub(&j).frobenius_norm());
    }
    residual
}

/// The symplectic form J = [[0, −I], [I, 0]] used by the USp realization.
pub fn symplectic_form(n: usize) -> CMat {
    let mut j = CMat::zeros(2 * n);
    for i in 0..n {
        j[(i, n + i)] = Complex64::new(-1.0, 0.0);
        j[(n + i, i)] = Complex64::new(1.0, 0.0);
    }
    j
}

fn transpose(m: &CMat) -> CMat {
    let n = m.n;
    let mut out = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[(j, i)] = m[(i, j)];
        }
    }
    out
}

/// Residual of `x` against the algebra: skew-Hermitian part (all families;
/// for real matrices skew-Hermitian = skew-symmetric), realness for SO/O,
/// tracelessness for SU, and the J-compatibility XᵀJ + JX = 0 for USp.
pub fn algebra_residual(spec: &GroupSpec, x: &CMat) -> f64 {
    let nn = spec.matrix_size();
    if x.n != nn {
        return f64::INFINITY;
    }
    let mut skew = 0.0f64;
    for i in 0..nn {
        for j in 0..nn {
            let v = x[(i, j)] + x[(j, i)].conj();
            skew = skew.max(v.norm());
        }
    }
    let mut residual = skew;
    if spec.is_real_family() {
        residual = residual.max(x.max_abs_im());
    }
    if spec.family() == Family::SU {
        residual = residual.max(x.trace().norm());
    }
    if spec.family() == Family::USp {
        let j = symplectic_form(spec.n());
        let anti = transpose(x).mul(&j).sub(&j.mul(x).scale(Complex64::new(-1.0, 0.0)));
        residual = residual.max(anti.frobenius_norm());
    }
    residual
}

/// Ad_g X = g X g⁻¹ (= g X g* on a compact group). Checks that `g` is in
/// the group and `x` in the algebra before acting.
pub fn adjoint_apply(spec: &GroupSpec, g: &CMat, x: &CMat) -> Result<CMat> {
    let tol = GROUP_RESIDUAL_TOL * spec.matrix_size() as f64;
    let g_res = group_residual(spec, g);
    if g_res > tol {
        return Err(Error::NotInGroup { residual: g_res });
    }
    let x_res = algebra_residual(spec, x);
    if x_res > 1e-12 * x.frobenius_norm().max(1.0) * spec.matrix_size() as f64 {
        return Err(Error::NotInAlgebra { residual: x_res });
    }
    Ok(g.mul(x).mul(&g.adjoint()))
}

/// Affine equalities satisfied by every point of the orbit of F, plus an
/// orthonormal basis of the complementary feasible subspace V_L in which the
/// dual search runs.
///
/// The equalities correspond to ideal components of the algebra on which F
/// vanishes: the center of u(n) (always a constraint — the trace is constant
/// on the orbit), and whole simple components when F has no part there. The
/// only supported family whose algebra splits into several simple components
/// is SOeven with n = 2 (so(4) ≅ su(2) ⊕ su(2), with component directions
/// (1,1)/√2 and (1,−1)/√2 in Cartan coordinates).
#[derive(Clone, Debug)]
pub struct AffineConstraintSet {
    /// Orthonormal coordinate directions along which ⟨d, ·⟩ is constant on
    /// the orbit, paired with the constant values ⟨d, F⟩.
    pub fixed_directions: Vec<CartanVector>,
    pub fixed_values: Vec<f64>,
    /// For the U family: the pinned center coordinate (1/n)·Σ_j F_j.
    pub fixed_center: Option<f64>,
    /// Orthonormal basis of V_L (directions with no constraint). For SU this
    /// spans the zero-sum hyperplane, so basis vectors are n-long but there
    /// are at most n − 1 of them.
    pub vl_basis: Vec<CartanVector>,
}

impl AffineConstraintSet {
    /// Dimension of the feasible subspace.
    pub fn vl_dim(&self) -> usize {
        self.vl_basis.len()
    }

    /// Largest violation |⟨d, v⟩ − value| over the fixed directions.
    pub fn violation(&self, v: &CartanVector) -> f64 {
        self.fixed_directions
            .iter()
            .zip(&self.fixed_values)
            .map(|(d, &val)| (d.dot(v) - val).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinates of the V_L component of `v` in the `vl_basis` frame.
    pub fn project_coords(&self, v: &CartanVector) -> Vec<f64> {
        self.vl_basis.iter().map(|b| b.dot(v)).collect()
    }
}

/// Orthonormal basis of the zero-sum hyperplane in R^n: the k-th vector is
/// (1,…,1,−k,0,…,0)/√(k(k+1)) with k ones.
fn zero_sum_basis(n: usize) -> Vec<CartanVector> {
    (1..n)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            let mut v = vec![0.0; n];
            for item in v.iter_mut().take(k) {
                *item = 1.0 / norm;
            }
            v[k] = -(k as f64) / norm;
            CartanVector::raw(v)
        })
        .collect()
}

/// Compute the maximal affine equalities of the orbit of F and the feasible
/// subspace V_L. See [`AffineConstraintSet`].
pub fn affine_equalities(spec: &GroupSpec, f: &CartanVector) -> Result<AffineConstraintSet> {
    if f.len() != spec.coord_len() {
        return Err(Error::LengthMismatch { expected: spec.coord_len(), got: f.len() });
    }
    let n = spec.n();
    let tol = 1e-12 * f.norm().max(1.0);
    let mut fixed_directions = Vec::new();
    let mut fixed_values = Vec::new();
    let mut fixed_center = None;
    let mut vl_basis = Vec::new();

    match spec.family() {
        Family::U => {
            // The center direction (1,…,1)/√n is always pinned; the traceless
            // part is free iff F has a nonzero traceless part.
            let center = CartanVector::raw(vec![1.0 / (n as f64).sqrt(); n]);
            let center_value = center.dot(f);
            fixed_center = Some(f.coords().iter().sum::<f64>() / n as f64);
            fixed_values.push(center_value);
            fixed_directions.push(center);
            let mean = f.coords().iter().sum::<f64>() / n as f64;
            let traceless_norm =
                f.coords().iter().map(|c| (c - mean) * (c - mean)).sum::<f64>().sqrt();
            if traceless_norm > tol {
                vl_basis = zero_sum_basis(n);
            } else {
                // F is central: the orbit is the single point F.
                for d in zero_sum_basis(n) {
                    fixed_values.push(d.dot(f));
                    fixed_directions.push(d);
                }
            }
        }
        Family::SOeven if n == 2 => {
            // so(4) ≅ su(2) ⊕ su(2): pin each component whose F-part is 0.
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for dir in [CartanVector::raw(vec![s, s]), CartanVector::raw(vec![s, -s])] {
                let value = dir.dot(f);
                if value.abs() <= tol {
                    fixed_values.push(0.0);
                    fixed_directions.push(dir);
                } else {
                    vl_basis.push(dir);
                }
            }
        }
        _ => {
            // Simple algebras: no equalities unless F = 0, in which case the
            // orbit is {0} and everything is pinned. The natural basis of the
            // coordinate space is the standard one (zero-sum basis for SU).
            let basis: Vec<CartanVector> = if spec.family() == Family::SU {
                zero_sum_basis(n)
            } else {
                (0..n)
                    .map(|j| {
                        let mut v = vec![0.0; n];
                        v[j] = 1.0;
                        CartanVector::raw(v)
                    })
                    .collect()
            };
            if f.norm() > tol {
                vl_basis = basis;
            } else {
                for d in basis {
                    fixed_values.push(0.0);
                    fixed_directions.push(d);
                }
            }
        }
    }

    Ok(AffineConstraintSet { fixed_directions, fixed_values, fixed_center, vl_basis })
}

/// Apply a Weyl element given as a permutation plus sign flips:
/// result[i] = sign_i · v[perm[i]]. Validates that the flips are allowed for
/// the family (none for type A, an even number for type D).
pub fn weyl_apply(
    spec: &GroupSpec,
    perm: &[usize],
    flips: &[bool],
    v: &CartanVector,
) -> Result<CartanVector> {
    let n = spec.coord_len();
    if perm.len() != n || flips.len() != n || v.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: perm.len() });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidInput("not a permutation".into()));
        }
        seen[p] = true;
    }
    let flip_count = flips.iter().filter(|&&b| b).count();
    match spec.weyl_type() {
        WeylType::A if flip_count > 0 => {
            return Err(Error::InvalidInput("type-A Weyl group has no sign flips".into()));
        }
        WeylType::D if flip_count % 2 != 0 => {
            return Err(Error::InvalidInput(
                "type-D Weyl group allows only an even number of sign flips".into(),
            ));
        }
        _ => {}
    }
    let coords = (0..n)
        .map(|i| {
            let c = v.coords()[perm[i]];
            if flips[i] {
                -c
            } else {
                c
            }
        })
        .collect();
    Ok(CartanVector::raw(coords))
}

/// Enumerate the Weyl orbit of F as a deduplicated list of coordinate
/// vectors. Refused above rank [`WEYL_ENUMERATION_CAP`].
///
/// Duplicates are avoided by construction rather than filtered: distinct
/// multiset permutations come from the lexicographic next-permutation walk,
/// and sign patterns are applied only to nonzero entries (type D: with the
/// parity matched to F when F has no zero coordinate).
pub fn weyl_orbit(spec: &GroupSpec, f: &CartanVector) -> Result<Vec<CartanVector>> {
    if f.len() != spec.coord_len() {
        return Err(Error::LengthMismatch { expected: spec.coord_len(), got: f.len() });
    }
    if spec.rank() > WEYL_ENUMERATION_CAP {
        return Err(Error::RankCapExceeded { rank: spec.rank(), cap: WEYL_ENUMERATION_CAP });
    }
    let n = spec.coord_len();
    match spec.weyl_type() {
        WeylType::A => {
            let mut base = f.coords().to_vec();
            base.sort_by(f64::total_cmp);
            let mut out = Vec::new();
            loop {
                out.push(CartanVector::raw(base.clone()));
                if !next_permutation(&mut base) {
                    break;
                }
            }
            Ok(out)
        }
        WeylType::BC | WeylType::D => {
            let mut base: Vec<f64> = f.coords().iter().map(|c| c.abs()).collect();
            base.sort_by(f64::total_cmp);
            let nonzero: Vec<usize> = (0..n).collect();
            let negatives = f.coords().iter().filter(|&&c| c < 0.0).count();
            let has_zero = f.coords().iter().any(|&c| c == 0.0);
            let parity_constrained = spec.weyl_type() == WeylType::D && !has_zero;
            let mut out = Vec::new();
            loop {
                // Sign patterns over the nonzero entries of this permutation.
                let nz: Vec<usize> =
                    nonzero.iter().copied().filter(|&i| base[i] != 0.0).collect();
                for mask in 0..(1u32 << nz.len()) {
                    if parity_constrained && (mask.count_ones() as usize) % 2 != negatives % 2 {
                        continue;
                    }
                    let mut v = base.clone();
                    for (bit, &i) in nz.iter().enumerate() {
                        if mask >> bit & 1 == 1 {
                            v[i] = -v[i];
                        }
                    }
                    out.push(CartanVector::raw(v));
                }
                if !next_permutation(&mut base) {
                    break;
                }
            }
            Ok(out)
        }
    }
}

/// Lexicographic next permutation over a totally ordered f64 slice; returns
/// false (leaving the slice sorted ascending) after the last permutation.
/// Skips duplicate arrangements of repeated values by construction.
fn next_permutation(v: &mut [f64]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1].total_cmp(&v[i]).is_ge() {
        i -= 1;
    }
    if i == 0 {
        v.sort_by(f64::total_cmp);
        return false;
    }
    let mut j = v.len() - 1;
    while v[j].total_cmp(&v[i - 1]).is_le() {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
