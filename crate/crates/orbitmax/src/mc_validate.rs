//! Monte-Carlo counterparts of the analytic machinery: Haar sampling for
//! every supported family and brute-force estimators for orbital integrals,
//! orbit means, and ball masses.
//!
//! Everything here is validation plumbing — slow, simple, and independent
//! of the determinantal code paths, so agreement between the two is
//! meaningful evidence. Estimators report the delta-method standard error
//! and the convention throughout the crate is that an analytic/MC
//! comparison *passes* iff |analytic − mean| ≤ 3·stderr.
//!
//! # Determinism
//!
//! Sampling is counter-based: sample i of a run seeded with s draws from a
//! ChaCha8 stream keyed by s with stream index i. Estimates are therefore
//! bit-identical across runs (and would stay so under parallel generation,
//! since no stream depends on another).
//!
//! # Weyl averaging
//!
//! The pushforward of the orbit measure under the Cartan projection is
//! Weyl-invariant (conjugating by a normalizer representative preserves both
//! the Cartan subalgebra and its orthocomplement, so the projection
//! intertwines with the reflection action). The integral and orbit-mean
//! estimators therefore replace each sample's weight by its average over the
//! full Weyl group whenever the group has at most [`WEYL_AVERAGE_CAP`]
//! elements. This is a Rao–Blackwellization: unbiased, never
//! variance-increasing, and in practice it flattens the heavy tail of the
//! importance weights enough that the delta-method standard error is
//! trustworthy at moderate sample sizes.
//!
//! # Samplers
//!
//! All samplers reduce to Gram–Schmidt on Gaussian matrices with positive
//! real normalization, which picks the canonical QR factor and hence the
//! invariant distribution:
//!
//! * U(n): complex Ginibre → MGS.
//! * SU(n): U(n) sample × e^{−i·arg(det)/n}.
//! * SO(m): real Ginibre → MGS, then a last-column flip if det = −1.
//! * O(2n): SO(2n) sample, then a fixed reflection with probability ½.
//! * USp(n): quaternionic MGS in the 2n×2n complex embedding — each new
//!   column is orthogonalized against all previous columns *and* their
//!   images under the antiunitary J-conjugation x ↦ J·x̄, and the partner
//!   column J·c̄ is placed in the second block, which enforces gᵀJg = J
//!   exactly by construction.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::kostant_project;
use crate::lie_core::{cartan_embed, inner_product, CartanVector, Family, GroupSpec};
use crate::linalg::{mgs_columns, CMat};
use crate::{Error, Result};

/// Scalar Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Coordinate-wise Monte-Carlo estimate of a Cartan vector, with the
/// effective sample size of the importance weights.
#[derive(Clone, Debug)]
pub struct McVectorEstimate {
    pub mean: CartanVector,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub effective_samples: f64,
    /// Set when the effective sample size drops below 100 — the estimate is
    /// then dominated by a handful of draws and the stderr is unreliable.
    pub low_ess: bool,
}

/// Largest Weyl group the estimators will average over per sample; covers
/// every family up to rank 4 (hyperoctahedral B₄ has 384 elements).
pub const WEYL_AVERAGE_CAP: usize = 384;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// All Weyl group elements as (permutation, signs) acting on coordinates by
/// v[j] ↦ signs[j]·v[perm[j]], or None when the group order exceeds
/// [`WEYL_AVERAGE_CAP`]. Enumerating elements (not orbit points) keeps the
/// average uniform over the group regardless of stabilizers.
fn weyl_elements(spec: &GroupSpec) -> Option<Vec<(Vec<usize>, Vec<f64>)>> {
    use crate::lie_core::WeylType;
    let n = spec.coord_len();
    let factorial: usize = (1..=n).product();
    let order = match spec.weyl_type() {
        WeylType::A => factorial,
        WeylType::BC => factorial << n,
        WeylType::D => factorial << (n - 1),
    };
    if order > WEYL_AVERAGE_CAP {
        return None;
    }
    // Heap's algorithm over index permutations.
    let mut perms = Vec::with_capacity(factorial);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    perms.push(idx.clone());
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                idx.swap(0, i);
            } else {
                idx.swap(c[i], i);
            }
            perms.push(idx.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let mut out = Vec::with_capacity(order);
    for perm in perms {
        match spec.weyl_type() {
            WeylType::A => out.push((perm, vec![1.0; n])),
            WeylType::BC | WeylType::D => {
                let even_only = spec.weyl_type() == WeylType::D;
                for mask in 0..(1u32 << n) {
                    if even_only && mask.count_ones() % 2 == 1 {
                        continue;
                    }
                    let signs = (0..n)
                        .map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 })
                        .collect();
                    out.push((perm.clone(), signs));
                }
            }
        }
    }
    debug_assert_eq!(out.len(), order);
    Some(out)
}

/// Log of the Weyl-averaged weight (1/|W|)·Σ_w e^{−⟨Y, w·p⟩} for a sampled
/// projection p, stable under large exponents. Exactly 0 when Y = 0.
fn averaged_log_weight(elements: &[(Vec<usize>, Vec<f64>)], y: &[f64], p: &[f64]) -> f64 {
    let mut exponents = Vec::with_capacity(elements.len());
    let mut m = f64::NEG_INFINITY;
    for (perm, signs) in elements {
        let mut dot = 0.0;
        for j in 0..y.len() {
            dot += y[j] * signs[j] * p[perm[j]];
        }
        let u = -dot;
        m = m.max(u);
        exponents.push(u);
    }
    let total: f64 = exponents.iter().map(|&u| (u - m).exp()).sum();
    m + (total / elements.len() as f64).ln()
}

/// Standard normal pair by Box–Muller on 53-bit uniforms (offset keeps the
/// log argument strictly inside (0,1)).
fn gauss_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let scale = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) * scale;
    let u2 = ((rng.next_u64() >> 11) as f64 + 0.5) * scale;
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    (r * t.cos(), r * t.sin())
}

fn complex_ginibre(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let mut m = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let (re, im) = gauss_pair(rng);
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    m
}

fn real_ginibre(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let mut m = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let (re, _) = gauss_pair(rng);
            m[(i, j)] = Complex64::new(re, 0.0);
        }
    }
    m
}

/// Determinant by partial-pivot elimination; the matrices here are tiny and
/// unitary, so conditioning is never an issue.
fn complex_det(m: &CMat) -> Complex64 {
    let n = m.n;
    let mut a = m.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm())).unwrap();
        if a[(piv, k)].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != k {
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            det = -det;
        }
        det *= a[(k, k)];
        for i in k + 1..n {
            let factor = a[(i, k)] / a[(k, k)];
            for j in k..n {
                let akj = a[(k, j)];
                a[(i, j)] -= factor * akj;
            }
        }
    }
    det
}

fn haar_with(spec: &GroupSpec, rng: &mut ChaCha8Rng) -> CMat {
    let nn = spec.matrix_size();
    match spec.family() {
        Family::U | Family::SU => {
            let mut g = complex_ginibre(nn, rng);
            mgs_columns(&mut g);
            if spec.family() == Family::SU {
                let phase = -complex_det(&g).arg() / nn as f64;
                let rot = Complex64::new(phase.cos(), phase.sin());
                for v in g.a.iter_mut() {
                    *v *= rot;
                }
            }
            g
        }
        Family::SOodd | Family::SOeven | Family::Oeven => {
            let mut g = real_ginibre(nn, rng);
            mgs_columns(&mut g);
            // MGS keeps real input exactly real, so det is real ±1; flip the
            // last column to land in SO when needed.
            let flip_to_so = complex_det(&g).re < 0.0;
            let reflect = spec.family() == Family::Oeven && rng.next_u64() & 1 == 1;
            if flip_to_so != reflect {
                for i in 0..nn {
                    g[(i, nn - 1)] = -g[(i, nn - 1)];
                }
            }
            g
        }
        Family::USp => {
            let n = spec.n();
            // J·conj(x) for J = [[0, −I], [I, 0]]: top half −conj(bottom),
            // bottom half conj(top).
            let j_conj = |x: &[Complex64]| -> Vec<Complex64> {
                let mut y = vec![Complex64::new(0.0, 0.0); 2 * n];
                for r in 0..n {
                    y[r] = -x[n + r].conj();
                    y[n + r] = x[r].conj();
                }
                y
            };
            let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(2 * n);
            for _ in 0..n {
                let mut v: Vec<Complex64> = (0..2 * n)
                    .map(|_| {
                        let (re, im) = gauss_pair(rng);
                        Complex64::new(re, im)
                    })
                    .collect();
                // Two orthogonalization passes for orthogonality well below
                // the group-residual budget.
                for _ in 0..2 {
                    for c in &cols {
                        let dot: Complex64 =
                            c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                        for (vi, ci) in v.iter_mut().zip(c) {
                            *vi -= dot * ci;
                        }
                    }
                }
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                assert!(norm > 1e-12, "rank-deficient Gaussian draw");
                for vi in v.iter_mut() {
                    *vi /= norm;
                }
                let partner = j_conj(&v);
                cols.push(v);
                cols.push(partner);
            }
            // Columns interleave (c_k, J·c̄_k); the embedding wants the
            // J-partners in the second block.
            let mut g = CMat::zeros(2 * n);
            for k in 0..n {
                for i in 0..2 * n {
                    g[(i, k)] = cols[2 * k][i];
                    g[(i, n + k)] = cols[2 * k + 1][i];
                }
            }
            g
        }
    }
}

/// One Haar-distributed group element for the given seed (sample i of a
/// seeded run is `haar_sample` with the same seed and stream index i; this
/// entry point uses stream 0).
pub fn haar_sample(spec: &GroupSpec, seed: u64) -> CMat {
    let g = haar_with(spec, &mut stream_rng(seed, 0));
    debug_assert!(
        crate::lie_core::group_residual(spec, &g) <= 1e-10 * spec.matrix_size() as f64,
        "sampler produced a matrix off the group"
    );
    g
}

fn conjugate(g: &CMat, x: &CMat) -> CMat {
    g.mul(x).mul(&g.adjoint())
}

fn check_lengths(spec: &GroupSpec, vs: &[&CartanVector]) -> Result<()> {
    for v in vs {
        if v.len() != spec.coord_len() {
            return Err(Error::LengthMismatch { expected: spec.coord_len(), got: v.len() });
        }
    }
    Ok(())
}

/// Estimate log ∫ e^{−⟨Y, Ad_g F⟩} dg by streaming log-sum-exp over Haar
/// samples, with the delta-method standard error on the log scale. Weights
/// are Weyl-averaged at low rank (see the module notes). Exact (mean 0,
/// stderr 0) at Y = 0 because every weight is exactly 1.
pub fn mc_log_integral(
    spec: &GroupSpec,
    f: &CartanVector,
    y: &CartanVector,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_lengths(spec, &[f, y])?;
    if n_samples < 2 {
        return Err(Error::InvalidInput("need at least 2 samples for a standard error".into()));
    }
    let fmat = cartan_embed(spec, f)?;
    let ymat = cartan_embed(spec, y)?;
    let elements = weyl_elements(spec);
    let mut m = f64::NEG_INFINITY;
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for i in 0..n_samples {
        let g = haar_with(spec, &mut stream_rng(seed, i as u64));
        let x = conjugate(&g, &fmat);
        let l = match &elements {
            Some(els) => averaged_log_weight(els, y.coords(), kostant_project(spec, &x)?.coords()),
            None => -inner_product(&ymat, &x),
        };
        if l > m {
            if m.is_finite() {
                let shrink = (m - l).exp();
                s1 *= shrink;
                s2 *= shrink * shrink;
            }
            m = l;
        }
        let w = (l - m).exp();
        s1 += w;
        s2 += w * w;
    }
    let n = n_samples as f64;
    let var = ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean: m + (s1 / n).ln(),
        stderr: var.sqrt() * n.sqrt() / s1,
        n_samples,
        seed,
    })
}

/// Importance-weighted orbit mean under ν_Y ∝ e^{−⟨Y,·⟩}: the ratio
/// estimator Σ w·π(Ad_g F) / Σ w over Haar samples, where π is the Kostant
/// projection. Matches −∇E_F(Y) in expectation. At low rank each sample
/// contributes its Weyl-averaged weight and the matching conditional mean of
/// its orbit images (see the module notes).
pub fn mc_orbit_mean(
    spec: &GroupSpec,
    f: &CartanVector,
    y: &CartanVector,
    n_samples: usize,
    seed: u64,
) -> Result<McVectorEstimate> {
    check_lengths(spec, &[f, y])?;
    if n_samples < 2 {
        return Err(Error::InvalidInput("need at least 2 samples for a standard error".into()));
    }
    let fmat = cartan_embed(spec, f)?;
    let ymat = cartan_embed(spec, y)?;
    let elements = weyl_elements(spec);
    let len = spec.coord_len();
    let mut logs = Vec::with_capacity(n_samples);
    let mut projs = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let g = haar_with(spec, &mut stream_rng(seed, i as u64));
        let x = conjugate(&g, &fmat);
        let p = kostant_project(spec, &x)?;
        match &elements {
            Some(els) => {
                // Per-sample exponents over the Weyl orbit of p, then the
                // log-average weight and the weight-conditional mean image.
                let mut exponents = Vec::with_capacity(els.len());
                let mut m = f64::NEG_INFINITY;
                for (perm, signs) in els {
                    let mut dot = 0.0;
                    for j in 0..len {
                        dot += y.coords()[j] * signs[j] * p.coords()[perm[j]];
                    }
                    m = m.max(-dot);
                    exponents.push(-dot);
                }
                let mut total = 0.0;
                let mut cond = vec![0.0f64; len];
                for ((perm, signs), &u) in els.iter().zip(&exponents) {
                    let w = (u - m).exp();
                    total += w;
                    for j in 0..len {
                        cond[j] += w * signs[j] * p.coords()[perm[j]];
                    }
                }
                for c in cond.iter_mut() {
                    *c /= total;
                }
                logs.push(m + (total / els.len() as f64).ln());
                projs.push(CartanVector::raw(cond));
            }
            None => {
                logs.push(-inner_product(&ymat, &x));
                projs.push(p);
            }
        }
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    let total_sq: f64 = weights.iter().map(|w| w * w).sum();
    let mut mean = vec![0.0f64; len];
    for (w, p) in weights.iter().zip(&projs) {
        for (acc, &c) in mean.iter_mut().zip(p.coords()) {
            *acc += w * c;
        }
    }
    for c in mean.iter_mut() {
        *c /= total;
    }
    let n = n_samples as f64;
    let stderr: Vec<f64> = (0..len)
        .map(|j| {
            let ss: f64 = weights
                .iter()
                .zip(&projs)
                .map(|(w, p)| {
                    let u = w * (p.coords()[j] - mean[j]);
                    u * u
                })
                .sum();
            (ss / (n - 1.0)).sqrt() * n.sqrt() / total
        })
        .collect();
    let ess = total * total / total_sq;
    Ok(McVectorEstimate {
        mean: CartanVector::raw(mean),
        stderr,
        n_samples,
        seed,
        effective_samples: ess,
        low_ess: ess < 100.0,
    })
}

/// Cartan projections of `count` Haar-random orbit points, one per stream
/// index, in stream order.
pub fn sample_orbit_projections(
    spec: &GroupSpec,
    f: &CartanVector,
    count: usize,
    seed: u64,
) -> Result<Vec<CartanVector>> {
    check_lengths(spec, &[f])?;
    let fmat = cartan_embed(spec, f)?;
    (0..count)
        .map(|i| {
            let g = haar_with(spec, &mut stream_rng(seed, i as u64));
            kostant_project(spec, &conjugate(&g, &fmat))
        })
        .collect()
}

/// Haar mass of the closed δ-ball around an orbit point X0: the fraction of
/// sampled orbit points within Frobenius distance δ. Binomial standard
/// error.
pub fn mc_ball_mass(
    spec: &GroupSpec,
    f: &CartanVector,
    x0: &CMat,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_lengths(spec, &[f])?;
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("ball radius must be positive".into()));
    }
    if n_samples < 2 {
        return Err(Error::InvalidInput("need at least 2 samples for a standard error".into()));
    }
    let residual = crate::lie_core::algebra_residual(spec, x0);
    if residual > 1e-10 * x0.frobenius_norm().max(1.0) * spec.matrix_size() as f64 {
        return Err(Error::NotInAlgebra { residual });
    }
    let fmat = cartan_embed(spec, f)?;
    let mut hits = 0usize;
    for i in 0..n_samples {
        let g = haar_with(spec, &mut stream_rng(seed, i as u64));
        if conjugate(&g, &fmat).sub(x0).frobenius_norm() <= delta {
            hits += 1;
        }
    }
    let p = hits as f64 / n_samples as f64;
    Ok(McEstimate {
        mean: p,
        stderr: (p * (1.0 - p) / n_samples as f64).sqrt(),
        n_samples,
        seed,
    })
}
