//! Eigenbasis of the Dirichlet Laplacian on (0,1), modal states with
//! Sobolev-scale norms, projections, and the dipole-moment operator.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;

use crate::config::Tolerances;
use crate::error::Error;
use crate::quad::gauss_legendre_01;
use crate::{s, Result, Scalar};

/// Truncated eigenbasis: λ_j = (jπ)², φ_j = √2 sin(jπx), 1 ≤ j ≤ j_max,
/// plus a Gauss–Legendre rule on (0,1) for spatial inner products.
#[derive(Debug, Clone)]
pub struct EigenBasis<S> {
    j_max: usize,
    lambda: Vec<S>,
    quad_nodes: Vec<S>,
    quad_weights: Vec<S>,
}

impl<S: Scalar> EigenBasis<S> {
    /// Default quadrature order 4·j_max.
    pub fn new(j_max: usize) -> Self {
        Self::with_quadrature_order(j_max, 4 * j_max)
    }

    pub fn with_quadrature_order(j_max: usize, order: usize) -> Self {
        assert!(j_max >= 1, "j_max must be positive");
        let order = order.max(2 * j_max);
        let pi2 = S::pi() * S::pi();
        let lambda = (1..=j_max)
            .map(|j| s::<S>((j * j) as f64) * pi2)
            .collect();
        let (quad_nodes, quad_weights) = gauss_legendre_01(order);
        Self {
            j_max,
            lambda,
            quad_nodes,
            quad_weights,
        }
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    /// λ_j for a 1-based mode index.
    pub fn lambda(&self, j: usize) -> S {
        self.lambda[j - 1]
    }

    pub fn lambdas(&self) -> &[S] {
        &self.lambda
    }

    /// φ_j(x) = √2 sin(jπx).
    pub fn eigenfunction(&self, j: usize, x: S) -> S {
        s::<S>(std::f64::consts::SQRT_2) * (s::<S>(j as f64) * S::pi() * x).sin()
    }

    pub fn quadrature(&self) -> (&[S], &[S]) {
        (&self.quad_nodes, &self.quad_weights)
    }

    /// max_{j,k} |⟨φ_j, φ_k⟩_quad − δ_{jk}| — quadrature sanity diagnostic.
    pub fn orthonormality_defect(&self) -> S {
        let mut worst = S::zero();
        for j in 1..=self.j_max {
            for k in j..=self.j_max {
                let mut acc = S::zero();
                for (&x, &w) in self.quad_nodes.iter().zip(&self.quad_weights) {
                    acc += w * self.eigenfunction(j, x) * self.eigenfunction(k, x);
                }
                let target = if j == k { S::one() } else { S::zero() };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }

    /// Free evolution of modal coefficients: c_j ↦ c_j e^{−iλ_j t}.
    pub fn free_flow(&self, state: &ModalState<S>, t: S) -> ModalState<S> {
        let coeffs = state
            .coeffs
            .iter()
            .zip(&self.lambda)
            .map(|(&c, &l)| c * Complex::new(S::zero(), -l * t).exp())
            .collect();
        ModalState { coeffs }
    }

    /// The free mode trajectory ψ_j(t) = φ_j e^{−iλ_j t} as a modal state.
    pub fn psi_mode(&self, j: usize, t: S) -> ModalState<S> {
        let mut st = ModalState::zero(self.j_max);
        st.coeffs[j - 1] = Complex::new(S::zero(), -self.lambda(j) * t).exp();
        st
    }
}

/// Complex coefficient vector on the truncated eigenbasis.
///
/// Mode j (1-based) lives at `coeffs[j-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState<S> {
    pub coeffs: Vec<Complex<S>>,
}

impl<S: Scalar> ModalState<S> {
    pub fn new(coeffs: Vec<Complex<S>>) -> Self {
        Self { coeffs }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            coeffs: vec![Complex::new(S::zero(), S::zero()); dim],
        }
    }

    /// Unit vector e_j (1-based mode index).
    pub fn basis_vector(dim: usize, j: usize) -> Self {
        let mut st = Self::zero(dim);
        st.coeffs[j - 1] = Complex::new(S::one(), S::zero());
        st
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// ⟨self, other⟩ = Σ_j c_j · conj(d_j).
    pub fn inner(&self, other: &Self) -> Complex<S> {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a * b.conj())
            .fold(Complex::new(S::zero(), S::zero()), |acc, z| acc + z)
    }

    /// Weighted sequence norm (Σ_j |j^s c_j|²)^{1/2}.
    ///
    /// Negative `s` is admitted: report machinery evaluates the scale at
    /// every order appearing in the simultaneous estimates.
    pub fn hs_norm(&self, sob: f64) -> S {
        let mut acc = S::zero();
        for (i, c) in self.coeffs.iter().enumerate() {
            let w: S = s(((i + 1) as f64).powf(sob));
            acc += w * w * c.norm_sqr();
        }
        acc.sqrt()
    }

    pub fn norm(&self) -> S {
        self.hs_norm(0.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, a: S) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * a).collect(),
        }
    }

    pub fn scale_complex(&self, a: Complex<S>) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * a).collect(),
        }
    }

    /// P_J: keep coefficients on J, zero the rest.
    pub fn project(&self, j_set: &ProjectionSet) -> Self {
        let mut out = Self::zero(self.dim());
        for &j in j_set.indices() {
            if j <= self.dim() {
                out.coeffs[j - 1] = self.coeffs[j - 1];
            }
        }
        out
    }

    /// (I − P_J).
    pub fn project_complement(&self, j_set: &ProjectionSet) -> Self {
        let mut out = self.clone();
        for &j in j_set.indices() {
            if j <= self.dim() {
                out.coeffs[j - 1] = Complex::new(S::zero(), S::zero());
            }
        }
        out
    }

    /// Π_ψ(ξ) = ξ − Re⟨ξ, ψ⟩ψ, the tangential projection at a sphere point.
    pub fn project_tangent(&self, psi: &Self, cfg: &Tolerances) -> Result<Self> {
        let dev = (psi.norm() - S::one()).abs();
        if dev > s(cfg.sphere_tol) {
            return Err(Error::NotOnSphere {
                deviation: dev.to_f64().unwrap_or(f64::NAN),
                tol: cfg.sphere_tol,
            });
        }
        let re = self.inner(psi).re;
        Ok(self.sub(&psi.scale(re)))
    }
}

/// Nonempty sorted subset J of {1, …, j_max}: the controlled mode set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionSet {
    indices: Vec<usize>,
    j_max: usize,
}

impl ProjectionSet {
    pub fn new(mut indices: Vec<usize>, j_max: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::Parse("projection set must be nonempty".into()));
        }
        if indices[0] < 1 || *indices.last().unwrap() > j_max {
            return Err(Error::Dimension {
                expected: j_max,
                got: *indices.last().unwrap(),
            });
        }
        Ok(Self { indices, j_max })
    }

    /// The contiguous range {1, …, upper}.
    pub fn range(upper: usize, j_max: usize) -> Result<Self> {
        Self::new((1..=upper).collect(), j_max)
    }

    pub fn full(j_max: usize) -> Self {
        Self {
            indices: (1..=j_max).collect(),
            j_max,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Coupling profile μ: either an exact polynomial (boundary derivatives
/// computed symbolically) or a custom evaluator with analytically supplied
/// odd-derivative boundary values.
pub enum MuSpec<S> {
    /// Coefficients c_0 + c_1 x + c_2 x² + …
    Poly(Vec<S>),
    /// Arbitrary smooth evaluator. `odd_boundary[n]` holds
    /// (μ^{(2n+1)}(0), μ^{(2n+1)}(1)); supply at least p+1 entries so the
    /// hypothesis check and the asymptotic diagnostic stay exact.
    Custom {
        eval: Box<dyn Fn(S) -> S + Send + Sync>,
        odd_boundary: Vec<(S, S)>,
    },
}

impl<S: Scalar> MuSpec<S> {
    /// μ(x) = x.
    pub fn linear() -> Self {
        Self::Poly(vec![S::zero(), S::one()])
    }

    /// μ(x) = x².
    pub fn quadratic() -> Self {
        Self::Poly(vec![S::zero(), S::zero(), S::one()])
    }

    /// μ ≡ 1.
    pub fn one() -> Self {
        Self::Poly(vec![S::one()])
    }

    pub fn eval(&self, x: S) -> S {
        match self {
            Self::Poly(c) => {
                let mut acc = S::zero();
                for &ci in c.iter().rev() {
                    acc = acc * x + ci;
                }
                acc
            }
            Self::Custom { eval, .. } => eval(x),
        }
    }

    /// μ^{(order)} at the boundary point (0 or 1); `None` if unavailable.
    fn derivative_at_boundary(&self, order: usize, right: bool) -> Option<S> {
        match self {
            Self::Poly(c) => {
                // Differentiate the coefficient list `order` times, evaluate.
                let mut d: Vec<S> = c.clone();
                for _ in 0..order {
                    d = d
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(i, &ci)| ci * s(i as f64))
                        .collect();
                }
                let x = if right { S::one() } else { S::zero() };
                let mut acc = S::zero();
                for &ci in d.iter().rev() {
                    acc = acc * x + ci;
                }
                Some(acc)
            }
            Self::Custom { odd_boundary, .. } => {
                if order % 2 == 0 {
                    return None;
                }
                let n = (order - 1) / 2;
                odd_boundary
                    .get(n)
                    .map(|&(l, r)| if right { r } else { l })
            }
        }
    }
}

/// Multiplication-by-μ data on the truncated basis.
#[derive(Debug, Clone)]
pub struct DipoleOperator<S> {
    /// ⟨μφ_j, φ_k⟩, real symmetric.
    pub matrix: DMatrix<S>,
    /// First row b_j = ⟨μφ₁, φ_j⟩.
    pub b: Vec<S>,
    /// Regularity exponent of the decay hypothesis.
    pub p: usize,
    /// min_{j ∈ J} j^{2p+3} |b_j|, when positive.
    pub decay_constant: Option<S>,
    /// Large-j prediction for b_j from the boundary derivatives of μ, for
    /// diagnostics; `None` when boundary data is unavailable.
    pub asymptotic_b: Option<Vec<S>>,
}

impl<S: Scalar> DipoleOperator<S> {
    /// b_j for a 1-based mode index.
    pub fn b_coeff(&self, j: usize) -> S {
        self.b[j - 1]
    }

    /// Apply the symmetric matrix to a modal state.
    pub fn apply(&self, state: &ModalState<S>) -> ModalState<S> {
        let n = state.dim();
        let mut out = ModalState::zero(n);
        for j in 0..n {
            let mut acc = Complex::new(S::zero(), S::zero());
            for k in 0..n {
                acc += state.coeffs[k] * self.matrix[(j, k)];
            }
            out.coeffs[j] = acc;
        }
        out
    }
}

/// Build the dipole operator by Gauss quadrature and check the decay
/// hypothesis min_{j ∈ J} j^{2p+3}|b_j| > decay_floor.
///
/// For p ≥ 1 the odd-derivative boundary hypothesis
/// μ^{(2n+1)}(0) = μ^{(2n+1)}(1) = 0, n < p, is checked exactly when the
/// boundary derivatives are available.
pub fn build_dipole<S: Scalar>(
    mu: &MuSpec<S>,
    basis: &EigenBasis<S>,
    p: usize,
    j_set: &ProjectionSet,
    cfg: &Tolerances,
) -> Result<DipoleOperator<S>> {
    let n = basis.j_max();
    if j_set.j_max() != n {
        return Err(Error::Dimension {
            expected: n,
            got: j_set.j_max(),
        });
    }

    for order in (1..2 * p).step_by(2) {
        for right in [false, true] {
            if let Some(v) = mu.derivative_at_boundary(order, right) {
                if v.abs() > s(1e-12) {
                    return Err(Error::MuBoundaryCondition {
                        order,
                        value: v.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
    }

    let (nodes, weights) = basis.quadrature();
    let mu_vals: Vec<S> = nodes.iter().map(|&x| mu.eval(x)).collect();
    let phi: Vec<Vec<S>> = (1..=n)
        .map(|j| nodes.iter().map(|&x| basis.eigenfunction(j, x)).collect())
        .collect();

    let mut matrix = DMatrix::<S>::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let mut acc = S::zero();
            for q in 0..nodes.len() {
                acc += weights[q] * mu_vals[q] * phi[j][q] * phi[k][q];
            }
            matrix[(j, k)] = acc;
            matrix[(k, j)] = acc;
        }
    }
    let b: Vec<S> = (0..n).map(|k| matrix[(0, k)]).collect();

    let mut min_product = S::max_value().unwrap();
    let mut worst_j = 0usize;
    for &j in j_set.indices() {
        let prod = s::<S>((j as f64).powi(2 * p as i32 + 3)) * b[j - 1].abs();
        if prod < min_product {
            min_product = prod;
            worst_j = j;
        }
    }
    if min_product <= s(cfg.decay_floor) {
        return Err(Error::DecayViolation {
            min_product: min_product.to_f64().unwrap_or(f64::NAN),
            floor: cfg.decay_floor,
            worst_j,
        });
    }

    // Asymptotic tail prediction from repeated integration by parts:
    // b_j ≈ (−1)^p · 2(2p+2)/(π^{2p+2} j^{2p+3}) · ((−1)^{j+1} μ^{(2p+1)}(1) − μ^{(2p+1)}(0)).
    let asymptotic_b = match (
        mu.derivative_at_boundary(2 * p + 1, false),
        mu.derivative_at_boundary(2 * p + 1, true),
    ) {
        (Some(d0), Some(d1)) => {
            let sign = if p % 2 == 0 { S::one() } else { -S::one() };
            let pref = sign * s::<S>(2.0 * (2.0 * p as f64 + 2.0))
                / S::pi().powi(2 * p as i32 + 2);
            Some(
                (1..=n)
                    .map(|j| {
                        let alt = if j % 2 == 0 { -d1 } else { d1 };
                        pref * (alt - d0) / s((j as f64).powi(2 * p as i32 + 3))
                    })
                    .collect(),
            )
        }
        _ => None,
    };

    Ok(DipoleOperator {
        matrix,
        b,
        p,
        decay_constant: Some(min_product),
        asymptotic_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn lambdas_are_squared_multiples_of_pi_squared() {
        let basis = EigenBasis::<f64>::new(8);
        for j in 1..=8 {
            assert_abs_diff_eq!(
                basis.lambda(j),
                (j * j) as f64 * std::f64::consts::PI.powi(2),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn quadrature_orthonormality() {
        let basis = EigenBasis::<f64>::new(16);
        assert!(basis.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn hs_norm_unit_vectors() {
        let e1 = ModalState::<f64>::basis_vector(8, 1);
        let e2 = ModalState::<f64>::basis_vector(8, 2);
        assert_abs_diff_eq!(e1.hs_norm(2.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e2.hs_norm(3.0), 8.0, epsilon = 1e-13);
    }

    #[test]
    fn projection_keeps_and_kills() {
        let mut st = ModalState::<f64>::zero(4);
        st.coeffs[0] = Complex::new(1.0, 0.0);
        st.coeffs[1] = Complex::new(0.0, 1.0);
        let j2 = ProjectionSet::new(vec![2], 4).unwrap();
        let pr = st.project(&j2);
        assert_eq!(pr.coeffs[0], Complex::new(0.0, 0.0));
        assert_eq!(pr.coeffs[1], Complex::new(0.0, 1.0));
        // Idempotence.
        assert_eq!(pr.project(&j2), pr);
        // Full range is identity.
        let full = ProjectionSet::full(4);
        assert_eq!(st.project(&full), st);
    }

    #[test]
    fn tangent_projection_basics() {
        let psi = ModalState::<f64>::basis_vector(3, 1);
        let res = psi.project_tangent(&psi, &cfg()).unwrap();
        assert!(res.norm() < 1e-15);
        let ipsi = psi.scale_complex(Complex::new(0.0, 1.0));
        let res = ipsi.project_tangent(&psi, &cfg()).unwrap();
        assert!((res.sub(&ipsi)).norm() < 1e-15);
        // Off-sphere input rejected.
        let bad = psi.scale(2.0);
        assert!(matches!(
            ipsi.project_tangent(&bad, &cfg()),
            Err(Error::NotOnSphere { .. })
        ));
    }

    #[test]
    fn dipole_x2_matches_closed_forms() {
        // ⟨x²φ₁,φ₁⟩ = 1/3 − 1/(2π²); ⟨x²φ₁,φ_j⟩ = (−1)^{j−1}·8j/(π²(j²−1)²).
        let basis = EigenBasis::<f64>::new(48);
        let j_all = ProjectionSet::full(48);
        let dip = build_dipole(&MuSpec::quadratic(), &basis, 0, &j_all, &cfg()).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert_abs_diff_eq!(dip.b_coeff(1), 1.0 / 3.0 - 1.0 / (2.0 * pi2), epsilon = 1e-12);
        for j in 2..=48usize {
            let jf = j as f64;
            let want =
                (-1.0f64).powi(j as i32 - 1) * 8.0 * jf / (pi2 * (jf * jf - 1.0).powi(2));
            assert_abs_diff_eq!(dip.b_coeff(j), want, epsilon = 1e-10);
        }
        // Symmetry of the full matrix.
        let m = &dip.matrix;
        let mut worst: f64 = 0.0;
        for j in 0..48 {
            for k in 0..48 {
                worst = worst.max((m[(j, k)] - m[(k, j)]).abs());
            }
        }
        assert!(worst <= 1e-12);
    }

    #[test]
    fn dipole_x_even_modes_only() {
        let basis = EigenBasis::<f64>::new(16);
        let cfg = cfg();
        // Odd j ≥ 3 have b_j = 0 → violation.
        let j_odd = ProjectionSet::new(vec![1, 3, 5], 16).unwrap();
        assert!(matches!(
            build_dipole(&MuSpec::linear(), &basis, 0, &j_odd, &cfg),
            Err(Error::DecayViolation { .. })
        ));
        // Even modes carry b_j = −8j/(π²(j²−1)²).
        let j_even = ProjectionSet::new(vec![2, 4, 6, 8], 16).unwrap();
        let dip = build_dipole(&MuSpec::linear(), &basis, 0, &j_even, &cfg).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        for j in [2usize, 4, 6, 8] {
            let jf = j as f64;
            let want = -8.0 * jf / (pi2 * (jf * jf - 1.0).powi(2));
            assert_abs_diff_eq!(dip.b_coeff(j), want, epsilon = 1e-11);
        }
        // b₁ = ⟨xφ₁,φ₁⟩ = 1/2.
        assert_abs_diff_eq!(dip.b_coeff(1), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn dipole_constant_mu_is_identity() {
        let basis = EigenBasis::<f64>::new(12);
        let cfg = cfg();
        let j1 = ProjectionSet::new(vec![1], 12).unwrap();
        let dip = build_dipole(&MuSpec::one(), &basis, 0, &j1, &cfg).unwrap();
        for j in 0..12 {
            for k in 0..12 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dip.matrix[(j, k)], want, epsilon = 1e-10);
            }
        }
        // Any J reaching j ≥ 2 violates decay.
        let j2 = ProjectionSet::new(vec![1, 2], 12).unwrap();
        assert!(matches!(
            build_dipole(&MuSpec::one(), &basis, 0, &j2, &cfg),
            Err(Error::DecayViolation { .. })
        ));
    }

    #[test]
    fn asymptotic_prediction_tracks_x2_tail() {
        let basis = EigenBasis::<f64>::new(48);
        let j_all = ProjectionSet::full(48);
        let dip = build_dipole(&MuSpec::quadratic(), &basis, 0, &j_all, &cfg()).unwrap();
        let asym = dip.asymptotic_b.as_ref().unwrap();
        // Relative agreement improves with j; check the far tail.
        for j in 30..48 {
            let rel = ((dip.b[j] - asym[j]) / dip.b[j]).abs();
            assert!(rel < 0.01, "mode {}: rel err {}", j + 1, rel);
        }
    }
}
