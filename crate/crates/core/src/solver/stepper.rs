//! θ-scheme propagation, forward (`∂ₜu = 𝒜u`) and adjoint (`−∂ₛv = 𝒜ᵀv`).

use std::cell::RefCell;

use super::assembly::assemble;
use super::grid::SpaceTimeGrid;
use super::linalg::{bicgstab, Csr, ThomasFactor};
use crate::operator::CoefficientField;
use crate::Result;

enum Implicit {
    Thomas(ThomasFactor),
    Krylov(Csr),
}

pub(crate) struct Diagnostics {
    pub max_peclet: f64,
    pub upwind_nodes: usize,
    pub potential_zero: bool,
}

/// Matrices of one operator on one grid, assembled lazily and cached for
/// autonomous fields.
pub(crate) struct Propagator<'a> {
    field: &'a CoefficientField,
    grid: &'a SpaceTimeGrid,
    pub theta: f64,
    tol: f64,
    max_iter: usize,
    transpose: bool,
    autonomous: bool,
    last: RefCell<Option<(usize, Csr)>>,
    implicit_cache: RefCell<Option<(usize, std::rc::Rc<Implicit>)>>,
    pub diag: RefCell<Diagnostics>,
}

impl<'a> Propagator<'a> {
    pub fn new(
        field: &'a CoefficientField,
        grid: &'a SpaceTimeGrid,
        theta: f64,
        tol: f64,
        max_iter: usize,
        transpose: bool,
    ) -> Self {
        Self {
            field,
            grid,
            theta,
            tol,
            max_iter,
            transpose,
            autonomous: field.is_autonomous(),
            last: RefCell::new(None),
            implicit_cache: RefCell::new(None),
            diag: RefCell::new(Diagnostics {
                max_peclet: 0.0,
                upwind_nodes: 0,
                potential_zero: true,
            }),
        }
    }

    fn key(&self, n: usize) -> usize {
        if self.autonomous {
            0
        } else {
            n
        }
    }

    /// `A(sₙ)` (or its transpose for the adjoint).
    fn operator(&self, n: usize) -> Csr {
        let key = self.key(n);
        if let Some((k, a)) = self.last.borrow().as_ref() {
            if *k == key {
                return a.clone();
            }
        }
        let asm = assemble(self.field, self.grid, self.grid.time(n));
        {
            let mut d = self.diag.borrow_mut();
            d.max_peclet = d.max_peclet.max(asm.max_peclet);
            d.upwind_nodes = d.upwind_nodes.max(asm.upwind_nodes);
            d.potential_zero &= asm.potential_zero;
        }
        let a = if self.transpose {
            asm.matrix.transpose()
        } else {
            asm.matrix
        };
        *self.last.borrow_mut() = Some((key, a.clone()));
        a
    }

    fn implicit(&self, n: usize) -> Result<std::rc::Rc<Implicit>> {
        let key = self.key(n);
        if let Some((k, imp)) = self.implicit_cache.borrow().as_ref() {
            if *k == key {
                return Ok(imp.clone());
            }
        }
        let m = self.operator(n).shifted(1.0, -self.theta * self.grid.ds());
        let imp = match (self.grid.dim, m.bands()) {
            (1, Some(t)) => Implicit::Thomas(t.factor()?),
            _ => Implicit::Krylov(m),
        };
        let imp = std::rc::Rc::new(imp);
        *self.implicit_cache.borrow_mut() = Some((key, imp.clone()));
        Ok(imp)
    }

    fn explicit(&self, n: usize, u: &[f64]) -> Vec<f64> {
        if self.theta == 1.0 {
            return u.to_vec();
        }
        let au = self.operator(n).mul(u);
        let c = (1.0 - self.theta) * self.grid.ds();
        u.iter().zip(au).map(|(ui, ai)| ui + c * ai).collect()
    }

    fn solve(&self, n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
        match self.implicit(n)?.as_ref() {
            Implicit::Thomas(f) => Ok(f.solve(rhs)),
            Implicit::Krylov(m) => bicgstab(m, rhs, rhs, self.tol, self.max_iter),
        }
    }

    /// Forward step from time node `n` to `n+1`.
    pub fn forward_step(&self, n: usize, u: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.explicit(n, u);
        self.solve(n + 1, &rhs)
    }

    /// Adjoint step from time node `n+1` back to `n`: the exact transpose of
    /// [`Self::forward_step`].
    pub fn backward_step(&self, n: usize, v: &[f64]) -> Result<Vec<f64>> {
        let w = self.solve(n + 1, v)?;
        Ok(self.explicit(n, &w))
    }

    /// Largest cell Péclet number over `k` sample times.
    pub fn scan_peclet(&self, k: usize) -> f64 {
        let steps = self.grid.steps;
        let times: Vec<usize> = if self.autonomous {
            vec![0]
        } else {
            (0..k).map(|i| i * steps / (k - 1).max(1)).collect()
        };
        times
            .into_iter()
            .map(|n| assemble(self.field, self.grid, self.grid.time(n)).max_peclet)
            .fold(0.0, f64::max)
    }
}
