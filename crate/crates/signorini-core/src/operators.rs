//! Convex Bellman operators F(M) = max_g (tr(L_g M) + c_g) over a finite
//! family of symmetric uniformly elliptic matrices, the Pucci extremal
//! operators bounding them, and the plane-preserving change of variables
//! that removes the pivot member's mixed normal entries.

use alloc::vec::Vec;

use crate::linalg::{gram, mat_mul, mat_transpose, SymMat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorError {
    InvalidFamily(&'static str),
    InvalidEllipticity(&'static str),
    NonMonotoneAfterTransform,
}

impl OperatorError {
    pub fn kind(&self) -> &'static str {
        match self {
            OperatorError::InvalidFamily(_) => "invalid-family",
            OperatorError::InvalidEllipticity(_) => "invalid-ellipticity",
            OperatorError::NonMonotoneAfterTransform => "non-monotone-after-transform",
        }
    }

    pub fn message(&self) -> &'static str {
        match self {
            OperatorError::InvalidFamily(m) => m,
            OperatorError::InvalidEllipticity(m) => m,
            OperatorError::NonMonotoneAfterTransform => {
                "transformed family loses diagonal dominance"
            }
        }
    }
}

impl core::fmt::Display for OperatorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

/// One member of the family: tr(matrix . D^2 u) + c.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearOperator {
    pub matrix: SymMat,
    pub c: f64,
}

/// Validated family. Construction enforces:
/// - every member symmetric with eigenvalues in [lambda, Lambda],
/// - every member diagonally dominant (monotone stencil requirement),
/// - F(0) = 0 by subtracting max_g c_g from every constant.
#[derive(Clone, Debug, PartialEq)]
pub struct BellmanFamily {
    members: Vec<LinearOperator>,
    pub lambda: f64,
    pub big_lambda: f64,
}

/// Slack used when checking eigenvalue bounds at construction.
const EIG_TOL: f64 = 1e-9;

impl BellmanFamily {
    pub fn new(
        mut members: Vec<LinearOperator>,
        lambda: f64,
        big_lambda: f64,
    ) -> Result<Self, OperatorError> {
        if members.is_empty() {
            return Err(OperatorError::InvalidFamily("family must be nonempty"));
        }
        if !(lambda > 0.0) || !(big_lambda >= lambda) {
            return Err(OperatorError::InvalidEllipticity(
                "need 0 < lambda <= Lambda",
            ));
        }
        let n = members[0].matrix.n;
        for m in &members {
            if m.matrix.n != n {
                return Err(OperatorError::InvalidFamily("mixed member dimensions"));
            }
            if !m.c.is_finite() {
                return Err(OperatorError::InvalidFamily("non-finite constant"));
            }
            for i in 0..n {
                for j in 0..n {
                    if !m.matrix.a[i][j].is_finite() {
                        return Err(OperatorError::InvalidFamily("non-finite entry"));
                    }
                }
            }
            let ev = m.matrix.eigenvalues();
            if ev[0] < lambda - EIG_TOL || ev[n - 1] > big_lambda + EIG_TOL {
                return Err(OperatorError::InvalidEllipticity(
                    "member eigenvalues outside [lambda, Lambda]",
                ));
            }
            if m.matrix.diagonal_dominance_margin() < -1e-12 {
                return Err(OperatorError::InvalidFamily(
                    "member is not diagonally dominant",
                ));
            }
        }
        let cmax = members.iter().fold(f64::NEG_INFINITY, |m, op| m.max(op.c));
        for op in &mut members {
            op.c -= cmax;
        }
        Ok(BellmanFamily {
            members,
            lambda,
            big_lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.members[0].matrix.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn members(&self) -> &[LinearOperator] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &LinearOperator {
        &self.members[i]
    }
}

/// F(H) = max over members of tr(L H) + c.
pub fn bellman_apply(family: &BellmanFamily, h: &SymMat) -> f64 {
    debug_assert_eq!(family.n(), h.n);
    let mut best = f64::NEG_INFINITY;
    for m in family.members() {
        let v = m.matrix.trace_product(h) + m.c;
        if v > best {
            best = v;
        }
    }
    best
}

/// Index attaining the max in `bellman_apply`; ties resolve to the lowest
/// index so sweeps stay deterministic.
pub fn select_policy(family: &BellmanFamily, h: &SymMat) -> usize {
    debug_assert_eq!(family.n(), h.n);
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, m) in family.members().iter().enumerate() {
        let v = m.matrix.trace_product(h) + m.c;
        if v > best {
            best = v;
            arg = i;
        }
    }
    arg
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremal {
    Minus,
    Plus,
}

/// Pucci extremal operators over {M : lambda I <= M <= Lambda I}:
/// minus: lambda * sum(e_i > 0) + Lambda * sum(e_i < 0),
/// plus: the same with lambda and Lambda exchanged.
pub fn pucci_extremal(h: &SymMat, lambda: f64, big_lambda: f64, which: Extremal) -> f64 {
    let ev = h.eigenvalues();
    let (pos_w, neg_w) = match which {
        Extremal::Minus => (lambda, big_lambda),
        Extremal::Plus => (big_lambda, lambda),
    };
    let mut s = 0.0;
    for &e in ev[..h.n].iter() {
        if e > 0.0 {
            s += pos_w * e;
        } else if e < 0.0 {
            s += neg_w * e;
        }
    }
    s
}

/// Result of the plane-preserving shear y = A x with
/// A = [[Id, -a_bar], [0, 1]] chosen so the transformed pivot
/// A L A^T has zero (i,n) entries.
#[derive(Clone, Debug)]
pub struct NormalizationResult {
    pub family: BellmanFamily,
    /// Shear matrix, padded to 3x3.
    pub a_matrix: [[f64; 3]; 3],
    /// The n-1 shear coefficients.
    pub a_bar: [f64; 2],
    /// Ellipticity envelope (lambda / |A^{-1}|^2, Lambda |A|^2) valid for
    /// every transformed member.
    pub envelope: (f64, f64),
}

/// Conjugates every member by the shear that zeroes the pivot's mixed
/// normal entries: a_bar_i = pivot_in / pivot_nn. The plane {x_n = 0} is
/// mapped to itself (last row of A is (0,...,0,1)).
pub fn normalize_family(
    family: &BellmanFamily,
    pivot_index: usize,
) -> Result<NormalizationResult, OperatorError> {
    if pivot_index >= family.len() {
        return Err(OperatorError::InvalidFamily("pivot index out of range"));
    }
    let n = family.n();
    let pivot = family.member(pivot_index).matrix;
    let pnn = pivot.a[n - 1][n - 1];
    debug_assert!(pnn > 0.0, "ellipticity gives a positive pivot corner");

    let mut a_bar = [0.0f64; 2];
    let mut a = [[0.0; 3]; 3];
    for i in 0..n {
        a[i][i] = 1.0;
    }
    for i in 0..(n - 1) {
        a_bar[i] = pivot.a[i][n - 1] / pnn;
        a[i][n - 1] = -a_bar[i];
    }
    let at = mat_transpose(n, &a);

    let g = gram(n, &a);
    let gev = g.eigenvalues();
    let envelope = (family.lambda * gev[0], family.big_lambda * gev[n - 1]);

    let mut transformed = Vec::with_capacity(family.len());
    for m in family.members() {
        let ala = mat_mul(n, &mat_mul(n, &a, &m.matrix.a), &at);
        let mut sm = SymMat::zero(n);
        for i in 0..n {
            for j in 0..n {
                sm.a[i][j] = 0.5 * (ala[i][j] + ala[j][i]);
            }
        }
        transformed.push(LinearOperator { matrix: sm, c: m.c });
    }

    let family = BellmanFamily::new(transformed, envelope.0, envelope.1).map_err(|e| match e {
        OperatorError::InvalidFamily(_) => OperatorError::NonMonotoneAfterTransform,
        other => other,
    })?;
    Ok(NormalizationResult {
        family,
        a_matrix: a,
        a_bar,
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym2(a: f64, b: f64, d: f64) -> SymMat {
        let (m, _) = SymMat::from_row_major(2, &[a, b, b, d]);
        m
    }

    fn laplacian(n: usize) -> BellmanFamily {
        BellmanFamily::new(
            alloc::vec![LinearOperator {
                matrix: SymMat::identity(n),
                c: 0.0
            }],
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn bellman_reduces_to_laplacian_for_identity() {
        let fam = laplacian(2);
        let h = sym2(3.0, 0.7, -1.0);
        assert_eq!(bellman_apply(&fam, &h), 2.0);
    }

    #[test]
    fn bellman_two_member_examples() {
        let fam = BellmanFamily::new(
            alloc::vec![
                LinearOperator {
                    matrix: SymMat::identity(2),
                    c: 0.0
                },
                LinearOperator {
                    matrix: sym2(2.0, 0.0, 1.0),
                    c: 0.0
                },
            ],
            1.0,
            2.0,
        )
        .unwrap();
        let h1 = sym2(-1.0, 0.0, 3.0);
        assert_eq!(bellman_apply(&fam, &h1), 2.0);
        assert_eq!(select_policy(&fam, &h1), 0);
        let h2 = sym2(1.0, 0.0, -1.0);
        assert_eq!(bellman_apply(&fam, &h2), 1.0);
        assert_eq!(select_policy(&fam, &h2), 1);
    }

    #[test]
    fn constants_are_normalized_to_zero_max() {
        let fam = BellmanFamily::new(
            alloc::vec![
                LinearOperator {
                    matrix: SymMat::identity(2),
                    c: 3.0
                },
                LinearOperator {
                    matrix: sym2(2.0, 0.0, 1.0),
                    c: 1.0
                },
            ],
            1.0,
            2.0,
        )
        .unwrap();
        assert_eq!(fam.member(0).c, 0.0);
        assert_eq!(fam.member(1).c, -2.0);
        assert_eq!(bellman_apply(&fam, &SymMat::zero(2)), 0.0);
    }

    #[test]
    fn select_policy_breaks_ties_low() {
        let fam = BellmanFamily::new(
            alloc::vec![
                LinearOperator {
                    matrix: SymMat::identity(2),
                    c: 0.0
                },
                LinearOperator {
                    matrix: SymMat::identity(2),
                    c: 0.0
                },
            ],
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(select_policy(&fam, &sym2(1.0, 0.2, 0.5)), 0);
    }

    #[test]
    fn family_validation_rejects_bad_input() {
        let err = BellmanFamily::new(alloc::vec![], 1.0, 2.0).unwrap_err();
        assert_eq!(err.kind(), "invalid-family");
        // eigenvalues {0.5, 1.5} outside [1, 2]
        let err = BellmanFamily::new(
            alloc::vec![LinearOperator {
                matrix: sym2(1.0, 0.5, 1.0),
                c: 0.0
            }],
            1.0,
            2.0,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "invalid-ellipticity");
        // diagonally non-dominant but elliptic: [[1, 0.8], [0.8, 0.7]] has
        // eigenvalues ~{0.03, 1.67}; fails the ellipticity window first, so
        // widen it to expose the dominance check.
        let err = BellmanFamily::new(
            alloc::vec![LinearOperator {
                matrix: sym2(1.0, 0.8, 0.7),
                c: 0.0
            }],
            0.02,
            2.0,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "invalid-family");
    }

    #[test]
    fn pucci_closed_form_examples() {
        let h = sym2(1.0, 0.0, -1.0);
        assert_eq!(pucci_extremal(&h, 1.0, 2.0, Extremal::Minus), -1.0);
        assert_eq!(pucci_extremal(&h, 1.0, 2.0, Extremal::Plus), 1.0);
        let id = SymMat::identity(2);
        assert_eq!(pucci_extremal(&id, 1.0, 2.0, Extremal::Minus), 2.0);
        assert_eq!(pucci_extremal(&id, 1.0, 2.0, Extremal::Plus), 4.0);
    }

    fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMat {
        let mut m = SymMat::zero(n);
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(-scale..scale);
                m.a[i][j] = v;
                m.a[j][i] = v;
            }
        }
        m
    }

    /// Random admissible matrix lambda I <= M <= Lambda I via a random
    /// rotation of a random diagonal.
    fn random_admissible(rng: &mut ChaCha8Rng, n: usize, lambda: f64, big: f64) -> SymMat {
        let mut d = [[0.0; 3]; 3];
        for i in 0..n {
            d[i][i] = rng.random_range(lambda..=big);
        }
        let mut rot = [[0.0; 3]; 3];
        for i in 0..3 {
            rot[i][i] = 1.0;
        }
        let pairs: &[(usize, usize)] = if n == 2 {
            &[(0, 1)]
        } else {
            &[(0, 1), (0, 2), (1, 2)]
        };
        for &(p, q) in pairs {
            let t = rng.random_range(0.0..core::f64::consts::TAU);
            let (s, c) = t.sin_cos();
            let mut g = [[0.0; 3]; 3];
            for i in 0..3 {
                g[i][i] = 1.0;
            }
            g[p][p] = c;
            g[q][q] = c;
            g[p][q] = -s;
            g[q][p] = s;
            rot = mat_mul(3, &rot, &g);
        }
        let rd = mat_mul(n, &rot, &d);
        let m = mat_mul(n, &rd, &mat_transpose(n, &rot));
        let mut sm = SymMat::zero(n);
        for i in 0..n {
            for j in 0..n {
                sm.a[i][j] = 0.5 * (m[i][j] + m[j][i]);
            }
        }
        sm
    }

    #[test]
    fn pucci_sandwich_and_superadditivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..300 {
            let n = if trial % 2 == 0 { 2 } else { 3 };
            let h = random_sym(&mut rng, n, 3.0);
            let k = random_sym(&mut rng, n, 3.0);
            let (la, bl) = (0.5, 2.5);
            let m = random_admissible(&mut rng, n, la, bl);
            let tr = m.trace_product(&h);
            let lo = pucci_extremal(&h, la, bl, Extremal::Minus);
            let hi = pucci_extremal(&h, la, bl, Extremal::Plus);
            assert!(lo <= tr + 1e-10 && tr <= hi + 1e-10);
            let mut hk = SymMat::zero(n);
            for i in 0..n {
                for j in 0..n {
                    hk.a[i][j] = h.a[i][j] + k.a[i][j];
                }
            }
            let lo_k = pucci_extremal(&k, la, bl, Extremal::Minus);
            let hi_k = pucci_extremal(&k, la, bl, Extremal::Plus);
            let lo_hk = pucci_extremal(&hk, la, bl, Extremal::Minus);
            assert!(lo + lo_k <= lo_hk + 1e-10);
            assert!(lo_hk <= lo + hi_k + 1e-10);
        }
    }

    /// The minimum of tr(M H) over the admissible set, sampled with the
    /// extreme diagonals in H's own eigenbasis plus random rotations,
    /// matches the eigenvalue formula.
    #[test]
    fn pucci_randomized_minimization_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = if trial % 2 == 0 { 2 } else { 3 };
            let h = random_sym(&mut rng, n, 2.0);
            let (la, bl) = (1.0, 2.0);
            let (_, vecs) = h.eigen_decomposition();
            let mut best = f64::INFINITY;
            // corner matrices V diag(la/bl choices) V^T
            for mask in 0..(1usize << n) {
                let mut d = [[0.0; 3]; 3];
                for i in 0..n {
                    d[i][i] = if mask & (1 << i) != 0 { bl } else { la };
                }
                let vd = mat_mul(n, &vecs, &d);
                let m = mat_mul(n, &vd, &mat_transpose(n, &vecs));
                let mut sm = SymMat::zero(n);
                for i in 0..n {
                    for j in 0..n {
                        sm.a[i][j] = m[i][j];
                    }
                }
                best = best.min(sm.trace_product(&h));
            }
            for _ in 0..200 {
                let m = random_admissible(&mut rng, n, la, bl);
                best = best.min(m.trace_product(&h));
            }
            let formula = pucci_extremal(&h, la, bl, Extremal::Minus);
            assert!(
                (best - formula).abs() <= 1e-6,
                "sampled min {best} vs formula {formula}"
            );
        }
    }

    #[test]
    fn normalization_worked_example() {
        let fam = BellmanFamily::new(
            alloc::vec![LinearOperator {
                matrix: sym2(1.0, 0.5, 1.0),
                c: 0.0
            }],
            0.5,
            1.5,
        )
        .unwrap();
        let res = normalize_family(&fam, 0).unwrap();
        assert!((res.a_bar[0] - 0.5).abs() < 1e-15);
        assert_eq!(res.a_matrix[0][1], -0.5);
        assert_eq!(res.a_matrix[1][0], 0.0);
        assert_eq!(res.a_matrix[1][1], 1.0);
        let p = res.family.member(0).matrix;
        assert!((p.a[0][0] - 0.75).abs() < 1e-15);
        assert!(p.a[0][1].abs() < 1e-15);
        assert!((p.a[1][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalization_random_families_zero_pivot_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut done = 0;
        while done < 20 {
            let n = if done % 2 == 0 { 2 } else { 3 };
            // diagonally dominant random member with nonzero mixed entries
            let mut m = SymMat::identity(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = rng.random_range(-0.3..0.3);
                    m.a[i][j] = v;
                    m.a[j][i] = v;
                }
                m.a[i][i] = 1.0 + rng.random_range(0.0..0.5);
            }
            let ev = m.eigenvalues();
            let fam = match BellmanFamily::new(
                alloc::vec![LinearOperator { matrix: m, c: 0.0 }],
                ev[0],
                ev[n - 1],
            ) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let res = match normalize_family(&fam, 0) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let p = res.family.member(0).matrix;
            for i in 0..(n - 1) {
                assert!(p.a[i][n - 1].abs() <= 1e-12);
            }
            let pe = p.eigenvalues();
            assert!(pe[0] >= res.envelope.0 - 1e-9);
            assert!(pe[n - 1] <= res.envelope.1 + 1e-9);
            // last row of A is (0,...,0,1): the plane maps to itself
            for j in 0..(n - 1) {
                assert_eq!(res.a_matrix[n - 1][j], 0.0);
            }
            assert_eq!(res.a_matrix[n - 1][n - 1], 1.0);
            done += 1;
        }
    }

    #[test]
    fn normalization_identity_for_diagonal_pivot() {
        let fam = BellmanFamily::new(
            alloc::vec![
                LinearOperator {
                    matrix: SymMat::identity(2),
                    c: 0.0
                },
                LinearOperator {
                    matrix: sym2(2.0, 0.3, 1.0),
                    c: 0.0
                },
            ],
            0.8,
            2.2,
        )
        .unwrap();
        let res = normalize_family(&fam, 0).unwrap();
        assert_eq!(res.a_bar[0], 0.0);
        assert_eq!(res.family.member(1).matrix, fam.member(1).matrix);
    }
}
