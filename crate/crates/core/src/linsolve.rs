//! Crank–Nicolson operators and their direct factorizations.
//!
//! With the lexicographic node order the five-point operators are banded
//! with half-bandwidth `Nx − 1`, so the LU factors are confined to the band
//! (plus the extra `Nx − 1` super-diagonals row interchanges can create).
//! Both `M₋` and `M₋*` are factorized once at assembly and reused for every
//! time step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{check_finite, Error, Result};
use crate::mesh::{laplacian_2d, Field, Grid2D};
use crate::sparse::CsrMatrix;

/// Default relative threshold for keeping the diagonal entry as pivot.
pub const DEFAULT_PIVOT_THRESHOLD: f64 = 0.1;

/// Sign of the reaction term in the generator `A = (a+ib)Δ_h ± pI`.
///
/// The PDE `∂t y − (a+ib)Δy + p y = f` written as `∂t y = A y + f` needs
/// `A = (a+ib)Δ_h − pI`; that is the default and the one the manufactured
/// solution converges to. `Plus` keeps the opposite sign for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReactionSign {
    #[default]
    Minus,
    Plus,
}

/// Constant coefficients of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnParams {
    /// Diffusion, must be positive.
    pub a: f64,
    /// Dispersion.
    pub b: f64,
    /// Reaction coefficient.
    pub p: Complex64,
    pub reaction_sign: ReactionSign,
}

impl CnParams {
    pub fn new(a: f64, b: f64, p: Complex64) -> Self {
        Self {
            a,
            b,
            p,
            reaction_sign: ReactionSign::Minus,
        }
    }

    /// Coefficients with `(a, −b, conj p)`, whose generator is `A*`.
    pub fn adjoint(&self) -> Self {
        Self {
            b: -self.b,
            p: self.p.conj(),
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::param("a", format!("must be positive, got {}", self.a)));
        }
        if !self.b.is_finite() {
            return Err(Error::param("b", "must be finite"));
        }
        if !(self.p.re.is_finite() && self.p.im.is_finite()) {
            return Err(Error::param("p", "must be finite"));
        }
        Ok(())
    }

    fn signed_p(&self) -> Complex64 {
        match self.reaction_sign {
            ReactionSign::Minus => -self.p,
            ReactionSign::Plus => self.p,
        }
    }
}

/// Banded LU factorization with threshold partial pivoting.
///
/// Row `k` of `U` occupies columns `k..=k+ku+kl`; the multipliers of step `k`
/// are kept separately and the row interchanges are replayed in order during
/// the solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    n: usize,
    kl: usize,
    /// Stored width of `U`: one more than the largest nonzero offset, at most `ku + kl + 1`.
    uw: usize,
    /// `n × uw` upper factor, row-major, column `k + d` at offset `d`.
    upper: Vec<Complex64>,
    /// `n × kl` multipliers, row-major.
    lower: Vec<Complex64>,
    pivots: Vec<usize>,
    threshold: f64,
}

impl Factorization {
    /// Factorizes a square matrix. On a zero pivot the failing column is
    /// returned as `Err(column)`.
    pub fn new(matrix: &CsrMatrix<Complex64>, threshold: f64) -> core::result::Result<Self, usize> {
        assert_eq!(matrix.nrows(), matrix.ncols(), "matrix must be square");
        assert!(threshold > 0.0 && threshold <= 1.0);
        let n = matrix.nrows();
        let (kl, ku) = matrix.bandwidth();
        // working band: row i holds columns i−kl ..= i+ku+kl
        let width = 2 * kl + ku + 1;
        let mut band = vec![Complex64::new(0.0, 0.0); n * width];
        for (r, c, v) in matrix.iter() {
            band[r * width + (c + kl - r)] = v;
        }
        let at = |i: usize, j: usize| i * width + (j + kl - i);

        let uw = ku + kl + 1;
        let mut upper = vec![Complex64::new(0.0, 0.0); n * uw];
        let mut lower = vec![Complex64::new(0.0, 0.0); n * kl];
        let mut pivots = Vec::with_capacity(n);

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku + kl).min(n - 1);

            let mut best = k;
            let mut best_abs = band[at(k, k)].norm();
            for i in k + 1..=last_row {
                let v = band[at(i, k)].norm();
                if v > best_abs {
                    best = i;
                    best_abs = v;
                }
            }
            if best_abs == 0.0 || !best_abs.is_finite() {
                return Err(k);
            }
            let pivot_row = if band[at(k, k)].norm() >= threshold * best_abs {
                k
            } else {
                best
            };
            pivots.push(pivot_row);
            if pivot_row != k {
                for j in k..=last_col {
                    band.swap(at(k, j), at(pivot_row, j));
                }
            }

            let pivot = band[at(k, k)];
            for i in k + 1..=last_row {
                let factor = band[at(i, k)] / pivot;
                lower[k * kl + (i - k - 1)] = factor;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=last_col {
                    let ukj = band[at(k, j)];
                    band[at(i, j)] -= factor * ukj;
                }
            }
            for j in k..=last_col {
                upper[k * uw + (j - k)] = band[at(k, j)];
            }
        }

        // rows never reach the pivot fill columns when no interchange happens
        let used = (0..n)
            .filter_map(|k| {
                upper[k * uw..(k + 1) * uw]
                    .iter()
                    .rposition(|v| *v != Complex64::new(0.0, 0.0))
            })
            .max()
            .map_or(1, |d| d + 1);
        let upper = if used < uw {
            upper
                .chunks_exact(uw)
                .flat_map(|row| row[..used].iter().copied())
                .collect()
        } else {
            upper
        };

        Ok(Self {
            n,
            kl,
            uw: used,
            upper,
            lower,
            pivots,
            threshold,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries (both triangles).
    pub fn fill_size(&self) -> usize {
        self.upper.len() + self.lower.len()
    }

    pub fn pivot_strategy(&self) -> String {
        format!(
            "banded threshold partial pivoting (threshold {}, lowest index on ties)",
            self.threshold
        )
    }

    /// Number of steps where a row interchange happened.
    pub fn interchanges(&self) -> usize {
        self.pivots.iter().enumerate().filter(|(k, &p)| *k != p).count()
    }

    /// Overwrites `x` (holding the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        let (n, kl, uw) = (self.n, self.kl, self.uw);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == Complex64::new(0.0, 0.0) {
                continue;
            }
            let len = kl.min(n - 1 - k);
            let lower = &self.lower[k * kl..k * kl + len];
            for (xi, l) in x[k + 1..k + 1 + len].iter_mut().zip(lower) {
                *xi -= l * xk;
            }
        }
        for k in (0..n).rev() {
            let len = (uw - 1).min(n - 1 - k);
            let row = &self.upper[k * uw..k * uw + 1 + len];
            let mut acc = x[k];
            for (u, xj) in row[1..].iter().zip(&x[k + 1..k + 1 + len]) {
                acc -= u * xj;
            }
            x[k] = acc / row[0];
        }
    }

    /// Solves with a finite right-hand side of matching length.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Field> {
        if rhs.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: rhs.len(),
            });
        }
        check_finite(rhs)?;
        let mut x = Field::from_vec(rhs.to_vec());
        self.solve_in_place(&mut x);
        Ok(x)
    }
}

/// Assembled `A`, `M± = I ± (Δt/2)A` and the factorizations of `M₋`, `M₋*`.
#[derive(Debug, Clone)]
pub struct CnOperators {
    params: CnParams,
    dt: f64,
    generator: CsrMatrix<Complex64>,
    m_minus: CsrMatrix<Complex64>,
    m_plus: CsrMatrix<Complex64>,
    m_minus_h: CsrMatrix<Complex64>,
    m_plus_h: CsrMatrix<Complex64>,
    fact: Factorization,
    fact_h: Factorization,
}

/// `M₋ = I − (Δt/2)A`, `M₊ = I + (Δt/2)A` from a given generator.
fn cn_pair(generator: &CsrMatrix<Complex64>, dt: f64) -> (CsrMatrix<Complex64>, CsrMatrix<Complex64>) {
    let eye = CsrMatrix::<Complex64>::identity(generator.nrows());
    let half = Complex64::new(0.5 * dt, 0.0);
    let one = Complex64::new(1.0, 0.0);
    (
        eye.linear_combination(one, generator, -half),
        eye.linear_combination(one, generator, half),
    )
}

impl CnOperators {
    /// Assembles the Crank–Nicolson operators for `grid` and factorizes `M₋`
    /// and `M₋*` eagerly.
    pub fn assemble(grid: &Grid2D, params: CnParams) -> Result<Self> {
        Self::assemble_with_threshold(grid, params, DEFAULT_PIVOT_THRESHOLD)
    }

    pub fn assemble_with_threshold(grid: &Grid2D, params: CnParams, threshold: f64) -> Result<Self> {
        params.validate()?;
        let dt = grid.dt();
        let generator = Self::generator(grid, &params);
        let (m_minus, m_plus) = cn_pair(&generator, dt);
        let m_minus_h = m_minus.conj_transpose();
        let m_plus_h = m_plus.conj_transpose();
        let singular = |pivot| Error::Singular {
            pivot,
            a: params.a,
            b: params.b,
            p: params.p,
            dt,
        };
        let fact = Factorization::new(&m_minus, threshold).map_err(singular)?;
        let fact_h = Factorization::new(&m_minus_h, threshold).map_err(singular)?;
        Ok(Self {
            params,
            dt,
            generator,
            m_minus,
            m_plus,
            m_minus_h,
            m_plus_h,
            fact,
            fact_h,
        })
    }

    /// `A = (a + ib)Δ_h ∓ pI` (sign per [`ReactionSign`]).
    pub fn generator(grid: &Grid2D, params: &CnParams) -> CsrMatrix<Complex64> {
        let diffusion = Complex64::new(params.a, params.b);
        laplacian_2d(grid)
            .to_complex()
            .linear_combination(diffusion, &CsrMatrix::identity(grid.m()), params.signed_p())
    }

    pub fn params(&self) -> &CnParams {
        &self.params
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }
    pub fn a(&self) -> &CsrMatrix<Complex64> {
        &self.generator
    }
    pub fn m_minus(&self) -> &CsrMatrix<Complex64> {
        &self.m_minus
    }
    pub fn m_plus(&self) -> &CsrMatrix<Complex64> {
        &self.m_plus
    }
    pub fn m_minus_h(&self) -> &CsrMatrix<Complex64> {
        &self.m_minus_h
    }
    pub fn m_plus_h(&self) -> &CsrMatrix<Complex64> {
        &self.m_plus_h
    }
    pub fn factorization(&self) -> &Factorization {
        &self.fact
    }
    pub fn factorization_h(&self) -> &Factorization {
        &self.fact_h
    }

    /// Solves `M₋ x = rhs`.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Field> {
        self.fact.solve(rhs)
    }

    /// Solves `M₋* x = rhs`.
    pub fn solve_hermitian(&self, rhs: &[Complex64]) -> Result<Field> {
        self.fact_h.solve(rhs)
    }
}
