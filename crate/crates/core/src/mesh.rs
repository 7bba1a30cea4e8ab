//! Uniform tensor grids, interior-node fields, discrete Dirichlet Laplacians
//! and the mass-lumped inner products used throughout the crate.
//!
//! Interior node `(i, j)` with `i ∈ [1, Nx−1]`, `j ∈ [1, Ny−1]` has flat index
//! `k = (j−1)(Nx−1) + (i−1)`: the x index varies fastest. With this ordering
//! the 2-D Laplacian is the Kronecker sum `I_y ⊗ Δx + Δy ⊗ I_x`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use num_complex::Complex64;

use crate::error::{check_finite, Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    lx: f64,
    ly: f64,
    t_final: f64,
    nx: usize,
    ny: usize,
    nt: usize,
}

impl Grid2D {
    /// Grid on `(0,lx)×(0,ly)×(0,t_final)` with `nx`, `ny` cells per axis and
    /// `nt` time steps.
    pub fn new(lx: f64, ly: f64, t_final: f64, nx: usize, ny: usize, nt: usize) -> Result<Self> {
        for (name, v) in [("Lx", lx), ("Ly", ly), ("T", t_final)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, "must be finite and positive"));
            }
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid("Nx and Ny must be at least 2 (no interior nodes)"));
        }
        if nt < 1 {
            return Err(Error::InvalidGrid("Nt must be at least 1"));
        }
        Ok(Self {
            lx,
            ly,
            t_final,
            nx,
            ny,
            nt,
        })
    }

    /// Unit square, unit final time.
    pub fn unit(nx: usize, ny: usize, nt: usize) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, nx, ny, nt)
    }

    /// Same spatial/temporal extent with different resolution.
    pub fn with_resolution(&self, nx: usize, ny: usize, nt: usize) -> Result<Self> {
        Self::new(self.lx, self.ly, self.t_final, nx, ny, nt)
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }
    /// Interior nodes per row (`Nx − 1`).
    pub fn mx(&self) -> usize {
        self.nx - 1
    }
    /// Interior nodes per column (`Ny − 1`).
    pub fn my(&self) -> usize {
        self.ny - 1
    }
    /// Number of interior nodes.
    pub fn m(&self) -> usize {
        self.mx() * self.my()
    }
    /// Area weight of one interior node.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Flat index of interior node `(i, j)` (1-based node indices).
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..self.nx).contains(&i) && (1..self.ny).contains(&j));
        (j - 1) * self.mx() + (i - 1)
    }

    /// Node indices `(i, j)` of flat index `k`.
    pub fn node(&self, k: usize) -> (usize, usize) {
        debug_assert!(k < self.m());
        (k % self.mx() + 1, k / self.mx() + 1)
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.node(k);
        (i as f64 * self.dx(), j as f64 * self.dy())
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Samples `f(x, y)` at every interior node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> Complex64) -> Field {
        Field(
            (0..self.m())
                .map(|k| {
                    let (x, y) = self.coords(k);
                    f(x, y)
                })
                .collect(),
        )
    }

    /// Samples `f(x, y, t)` at `t = tⁿ` for `n = 0..Nt−1`.
    pub fn sample_space_time(&self, f: impl Fn(f64, f64, f64) -> Complex64) -> SpaceTimeField {
        SpaceTimeField::from_levels(
            (0..self.nt)
                .map(|n| {
                    let t = self.time(n);
                    self.sample(|x, y| f(x, y, t))
                })
                .collect(),
        )
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.m())
    }

    pub fn zeros_space_time(&self) -> SpaceTimeField {
        SpaceTimeField::zeros(self.nt, self.m())
    }

    pub(crate) fn check_field(&self, field: &[Complex64]) -> Result<()> {
        if field.len() != self.m() {
            return Err(Error::LengthMismatch {
                expected: self.m(),
                found: field.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_space_time(&self, field: &SpaceTimeField) -> Result<()> {
        if field.nt() != self.nt {
            return Err(Error::LengthMismatch {
                expected: self.nt,
                found: field.nt(),
            });
        }
        field.levels().iter().try_for_each(|level| self.check_field(level))
    }

    /// `⟨x, y⟩_h = Re(x*y)·dx·dy`.
    pub fn inner_h(&self, x: &[Complex64], y: &[Complex64]) -> Result<f64> {
        self.check_field(x)?;
        self.check_field(y)?;
        Ok(re_dot(x, y) * self.cell_area())
    }

    pub fn norm_h(&self, x: &[Complex64]) -> Result<f64> {
        Ok(libm::sqrt(self.inner_h(x, x)?))
    }

    /// Complex sesquilinear form `Σ conj(x)·y·dx·dy`.
    pub fn pairing_h(&self, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
        self.check_field(x)?;
        self.check_field(y)?;
        Ok(dot(x, y) * self.cell_area())
    }

    /// `⟨⟨X, Y⟩⟩_{h,t} = Σ_{n<Nt} ⟨Xⁿ, Yⁿ⟩_h Δt` (left rectangle rule).
    pub fn inner_ht(&self, x: &SpaceTimeField, y: &SpaceTimeField) -> Result<f64> {
        self.check_space_time(x)?;
        self.check_space_time(y)?;
        Ok(x.re_dot(y) * self.cell_area() * self.dt())
    }

    pub fn norm_ht(&self, x: &SpaceTimeField) -> Result<f64> {
        Ok(libm::sqrt(self.inner_ht(x, x)?))
    }
}

/// Re Σ conj(xₖ)·yₖ.
pub(crate) fn re_dot(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

/// Σ conj(xₖ)·yₖ.
pub(crate) fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Complex values on the interior nodes of a grid, in flat order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field(pub Vec<Complex64>);

impl Field {
    pub fn zeros(m: usize) -> Self {
        Field(vec![Complex64::new(0.0, 0.0); m])
    }

    pub fn from_vec(values: Vec<Complex64>) -> Self {
        Field(values)
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    /// Fails on the first non-finite entry.
    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.0)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: Complex64, other: &[Complex64]) {
        assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: Complex64) {
        self.0.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: Complex64) -> Field {
        Field(self.0.iter().map(|v| v * alpha).collect())
    }

    pub fn sub(&self, other: &[Complex64]) -> Field {
        assert_eq!(self.len(), other.len());
        Field(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Deref for Field {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

impl From<Vec<Complex64>> for Field {
    fn from(values: Vec<Complex64>) -> Self {
        Field(values)
    }
}

/// `Nt` fields, one per left endpoint `tⁿ`, `n = 0..Nt−1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpaceTimeField {
    levels: Vec<Field>,
}

impl SpaceTimeField {
    pub fn zeros(nt: usize, m: usize) -> Self {
        Self {
            levels: vec![Field::zeros(m); nt],
        }
    }

    pub fn from_levels(levels: Vec<Field>) -> Self {
        Self { levels }
    }

    pub fn nt(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Field] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [Field] {
        &mut self.levels
    }

    pub fn level(&self, n: usize) -> &Field {
        &self.levels[n]
    }

    pub fn into_levels(self) -> Vec<Field> {
        self.levels
    }

    pub fn check_finite(&self) -> Result<()> {
        let mut offset = 0;
        for level in &self.levels {
            check_finite(level).map_err(|e| match e {
                Error::NonFinite { index } => Error::NonFinite { index: offset + index },
                other => other,
            })?;
            offset += level.len();
        }
        Ok(())
    }

    pub fn axpy(&mut self, alpha: Complex64, other: &SpaceTimeField) {
        assert_eq!(self.nt(), other.nt());
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.axpy(alpha, b);
        }
    }

    pub fn scale(&mut self, alpha: Complex64) {
        self.levels.iter_mut().for_each(|l| l.scale(alpha));
    }

    /// Unweighted `Re Σₙ Σₖ conj(Xⁿₖ)·Yⁿₖ`.
    pub(crate) fn re_dot(&self, other: &SpaceTimeField) -> f64 {
        self.levels.iter().zip(&other.levels).map(|(a, b)| re_dot(a, b)).sum()
    }
}

/// `(1/h²)·tridiag(1, −2, 1)` of size `N − 1`.
pub fn laplacian_1d(n: usize, h: f64) -> Result<CsrMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidGrid("1-D Laplacian needs N >= 2"));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", "must be finite and positive"));
    }
    let size = n - 1;
    let w = 1.0 / (h * h);
    let mut triplets = Vec::with_capacity(3 * size);
    for r in 0..size {
        if r > 0 {
            triplets.push((r, r - 1, w));
        }
        triplets.push((r, r, -2.0 * w));
        if r + 1 < size {
            triplets.push((r, r + 1, w));
        }
    }
    Ok(CsrMatrix::from_triplets(size, size, &triplets))
}

/// Five-point Dirichlet Laplacian `I_y ⊗ Δx + Δy ⊗ I_x` on the interior nodes.
pub fn laplacian_2d(grid: &Grid2D) -> CsrMatrix<f64> {
    let lap_x = laplacian_1d(grid.nx(), grid.dx()).expect("grid validated");
    let lap_y = laplacian_1d(grid.ny(), grid.dy()).expect("grid validated");
    let eye_x = CsrMatrix::identity(grid.mx());
    let eye_y = CsrMatrix::identity(grid.my());
    eye_y.kron(&lap_x).linear_combination(1.0, &lap_y.kron(&eye_x), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn build_grid_spacings() {
        let g = Grid2D::unit(4, 4, 2).unwrap();
        assert_eq!((g.dx(), g.dy(), g.dt(), g.m()), (0.25, 0.25, 0.5, 9));

        let g = Grid2D::unit(100, 100, 70).unwrap();
        assert_eq!(g.m(), 9801);
        assert_eq!(g.dt(), 1.0 / 70.0);
    }

    #[test]
    fn build_grid_rejects_degenerate_input() {
        assert!(matches!(Grid2D::unit(1, 4, 2), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid2D::unit(4, 1, 2), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid2D::unit(4, 4, 0), Err(Error::InvalidGrid(_))));
        assert!(Grid2D::new(0.0, 1.0, 1.0, 4, 4, 2).is_err());
        assert!(Grid2D::new(1.0, -1.0, 1.0, 4, 4, 2).is_err());
        assert!(Grid2D::new(1.0, 1.0, f64::NAN, 4, 4, 2).is_err());
    }

    #[test]
    fn index_map_round_trips() {
        let g = Grid2D::new(2.0, 1.0, 1.0, 7, 5, 1).unwrap();
        for k in 0..g.m() {
            let (i, j) = g.node(k);
            assert_eq!(g.index(i, j), k);
        }
        assert_eq!(g.index(1, 1), 0);
        assert_eq!(g.index(2, 1), 1);
        assert_eq!(g.index(1, 2), g.mx());
        assert_eq!(g.coords(g.index(3, 2)), (3.0 * 2.0 / 7.0, 2.0 / 5.0));
    }

    #[test]
    fn laplacian_1d_instances() {
        let l = laplacian_1d(4, 0.25).unwrap();
        assert_eq!(l.nrows(), 3);
        assert_eq!(
            l.to_dense(),
            vec![vec![-32.0, 16.0, 0.0], vec![16.0, -32.0, 16.0], vec![0.0, 16.0, -32.0]]
        );
        assert_eq!(laplacian_1d(2, 0.5).unwrap().to_dense(), vec![vec![-8.0]]);
        assert!(laplacian_1d(1, 0.5).is_err());
        assert!(laplacian_1d(4, 0.0).is_err());
    }

    #[test]
    fn laplacian_2d_diagonal_and_stencil() {
        let g = Grid2D::new(1.0, 2.0, 1.0, 4, 4, 1).unwrap();
        let l = laplacian_2d(&g);
        assert_eq!((l.nrows(), l.ncols()), (9, 9));
        let diag = -2.0 / (g.dx() * g.dx()) - 2.0 / (g.dy() * g.dy());
        for k in 0..9 {
            assert_eq!(l.get(k, k), diag);
            assert!(l.row(k).0.len() <= 5);
        }
        assert!(l.is_symmetric());
        // x-neighbour and y-neighbour weights
        assert_eq!(l.get(0, 1), 1.0 / (g.dx() * g.dx()));
        assert_eq!(l.get(0, 3), 1.0 / (g.dy() * g.dy()));
        // no wrap-around between rows of the grid
        assert_eq!(l.get(2, 3), 0.0);
    }

    #[test]
    fn inner_h_instances() {
        let g = Grid2D::unit(4, 4, 2).unwrap();
        let ones = Field(vec![c(1.0, 0.0); 9]);
        assert_eq!(g.inner_h(&ones, &ones).unwrap(), 0.5625);

        let x = g.sample(|x, y| c(x - y, x * y + 0.3));
        let ix = x.scaled(Complex64::i());
        assert_eq!(g.inner_h(&x, &ix).unwrap(), 0.0);

        assert!(matches!(
            g.inner_h(&ones, &Field::zeros(4)),
            Err(Error::LengthMismatch { expected: 9, found: 4 })
        ));
    }

    #[test]
    fn inner_ht_instances() {
        let g = Grid2D::unit(4, 4, 2).unwrap();
        let ones = SpaceTimeField::from_levels(vec![Field(vec![c(1.0, 0.0); 9]); 2]);
        assert_eq!(g.inner_ht(&ones, &ones).unwrap(), 0.5625);

        let level = g.sample(|x, y| c(x, -y));
        let mut single = g.zeros_space_time();
        single.levels_mut()[1] = level.clone();
        let expected = g.inner_h(&level, &level).unwrap() * g.dt();
        assert!((g.inner_ht(&single, &single).unwrap() - expected).abs() < 1e-15);

        let short = SpaceTimeField::zeros(1, 9);
        assert!(g.inner_ht(&ones, &short).is_err());
        let narrow = SpaceTimeField::zeros(2, 8);
        assert!(g.inner_ht(&ones, &narrow).is_err());
    }

    #[test]
    fn space_time_non_finite_reports_flat_index() {
        let mut x = SpaceTimeField::zeros(3, 4);
        x.levels_mut()[2][1] = c(f64::INFINITY, 0.0);
        assert_eq!(x.check_finite(), Err(Error::NonFinite { index: 9 }));
    }
}
