//! Crank–Nicolson forward solver and the time-reversed adjoint recursion.
//!
//! Forward: `M₋ yⁿ⁺¹ = M₊ yⁿ + Δt Fⁿ`, where the effective forcing `Fⁿ` is
//! `fⁿ` (left rule) or `(fⁿ + fⁿ⁺¹)/2` (trapezoid, with `f^{Nt} := f^{Nt−1}`).
//!
//! Adjoint: `φ^{Nt}` given, `M₋* φⁿ = M₊* φⁿ⁺¹` for `n = Nt−1, …, 0`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{check_finite, Error, Result};
use crate::linsolve::CnOperators;
use crate::mesh::{Field, Grid2D, SpaceTimeField};

/// Time quadrature of the forcing in the forward step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForcingRule {
    #[default]
    Left,
    Trapezoid,
}

impl ForcingRule {
    /// Weights `w` with `Fᵏ = Σₙ w(k, n) fⁿ`, listed as `(n, w)` pairs for step `k`.
    pub(crate) fn step_weights(self, k: usize, nt: usize) -> [(usize, f64); 2] {
        match self {
            ForcingRule::Left => [(k, 1.0), (k, 0.0)],
            ForcingRule::Trapezoid if k + 1 < nt => [(k, 0.5), (k + 1, 0.5)],
            // f^{Nt} := f^{Nt−1}
            ForcingRule::Trapezoid => [(k, 0.5), (k, 0.5)],
        }
    }
}

impl core::str::FromStr for ForcingRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(ForcingRule::Left),
            "trapezoid" => Ok(ForcingRule::Trapezoid),
            other => Err(Error::Unknown {
                kind: "forcing rule",
                value: other.into(),
            }),
        }
    }
}

/// States `y⁰ … y^{Nt}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Field>,
}

impl Trajectory {
    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn state(&self, n: usize) -> &Field {
        &self.states[n]
    }

    /// Number of time steps (`states().len() − 1`).
    pub fn nt(&self) -> usize {
        self.states.len() - 1
    }

    /// The final state `y^{Nt}`, i.e. the input–output map applied to the forcing.
    pub fn observe(&self) -> Field {
        self.states[self.nt()].clone()
    }

    pub fn final_state(&self) -> &Field {
        &self.states[self.nt()]
    }
}

/// Adjoint states `φ⁰ … φ^{Nt}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    states: Vec<Field>,
}

impl AdjointTrajectory {
    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn state(&self, n: usize) -> &Field {
        &self.states[n]
    }

    pub fn nt(&self) -> usize {
        self.states.len() - 1
    }
}

fn check_ops(grid: &Grid2D, ops: &CnOperators) -> Result<()> {
    if ops.dim() != grid.m() {
        return Err(Error::LengthMismatch {
            expected: grid.m(),
            found: ops.dim(),
        });
    }
    if ops.dt() != grid.dt() {
        return Err(Error::param("dt", "operators were assembled for a different time step"));
    }
    Ok(())
}

/// Runs the forward recursion for all `Nt` steps, storing every level.
pub fn forward(
    grid: &Grid2D,
    ops: &CnOperators,
    y0: &Field,
    forcing: &SpaceTimeField,
    rule: ForcingRule,
) -> Result<Trajectory> {
    check_ops(grid, ops)?;
    grid.check_field(y0)?;
    grid.check_space_time(forcing)?;
    check_finite(y0)?;
    forcing.check_finite()?;
    Ok(forward_with(grid, ops, y0, rule, |n| forcing.level(n)))
}

/// Forward recursion with forcing level `n` produced on demand.
pub(crate) fn forward_with<'a>(
    grid: &Grid2D,
    ops: &CnOperators,
    y0: &Field,
    rule: ForcingRule,
    level: impl Fn(usize) -> &'a [Complex64],
) -> Trajectory {
    forward_scaled(grid, ops, y0, rule, |n, out: &mut [Complex64], w| {
        for (o, f) in out.iter_mut().zip(level(n)) {
            *o += f * w;
        }
    })
}

/// Forward recursion where `add_forcing(n, rhs, w)` adds `w·fⁿ` into `rhs`.
pub(crate) fn forward_scaled(
    grid: &Grid2D,
    ops: &CnOperators,
    y0: &Field,
    rule: ForcingRule,
    add_forcing: impl Fn(usize, &mut [Complex64], f64),
) -> Trajectory {
    let nt = grid.nt();
    let dt = grid.dt();
    let mut states = Vec::with_capacity(nt + 1);
    states.push(y0.clone());
    for k in 0..nt {
        let mut rhs = ops.m_plus().mul_vec(&states[k]);
        for (n, w) in rule.step_weights(k, nt) {
            if w != 0.0 {
                add_forcing(n, &mut rhs, w * dt);
            }
        }
        ops.factorization().solve_in_place(&mut rhs);
        states.push(Field::from_vec(rhs));
    }
    Trajectory { states }
}

/// Runs the adjoint recursion backwards from `φ^{Nt} = terminal`.
pub fn adjoint(grid: &Grid2D, ops: &CnOperators, terminal: &Field) -> Result<AdjointTrajectory> {
    check_ops(grid, ops)?;
    grid.check_field(terminal)?;
    check_finite(terminal)?;
    let nt = grid.nt();
    let mut states = alloc::vec![Field::default(); nt + 1];
    states[nt] = terminal.clone();
    for n in (0..nt).rev() {
        let mut rhs = ops.m_plus_h().mul_vec(&states[n + 1]);
        ops.factorization_h().solve_in_place(&mut rhs);
        states[n] = Field::from_vec(rhs);
    }
    Ok(AdjointTrajectory { states })
}
