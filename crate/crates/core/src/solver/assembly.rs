//! Finite-difference matrix of `𝒜(s) = Tr(Q D²) + F·∇ − V` on the interior
//! nodes with homogeneous Dirichlet data.

use super::grid::SpaceTimeGrid;
use super::linalg::Csr;
use crate::operator::CoefficientField;
use crate::par;

pub(crate) struct Assembled {
    pub matrix: Csr,
    pub max_peclet: f64,
    pub upwind_nodes: usize,
    pub potential_zero: bool,
}

/// Interior layout: `m = nodes − 2` unknowns per axis.
pub(crate) fn interior_size(grid: &SpaceTimeGrid) -> usize {
    (grid.nodes - 2).pow(grid.dim as u32)
}

fn interior_axes(grid: &SpaceTimeGrid, k: usize) -> Vec<usize> {
    let m = grid.nodes - 2;
    match grid.dim {
        1 => vec![k],
        _ => vec![k / m, k % m],
    }
}

fn interior_flat(grid: &SpaceTimeGrid, idx: &[usize]) -> usize {
    let m = grid.nodes - 2;
    idx.iter().fold(0, |acc, &i| acc * m + i)
}

/// Full-grid flat index of interior unknown `k`.
pub(crate) fn to_full(grid: &SpaceTimeGrid, k: usize) -> usize {
    let idx: Vec<usize> = interior_axes(grid, k).iter().map(|i| i + 1).collect();
    grid.flat_index(&idx)
}

pub(crate) fn restrict(grid: &SpaceTimeGrid, full: &[f64]) -> Vec<f64> {
    (0..interior_size(grid))
        .map(|k| full[to_full(grid, k)])
        .collect()
}

pub(crate) fn extend(grid: &SpaceTimeGrid, interior: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; grid.n_nodes()];
    for (k, v) in interior.iter().enumerate() {
        full[to_full(grid, k)] = *v;
    }
    full
}

pub(crate) fn assemble(field: &CoefficientField, grid: &SpaceTimeGrid, s: f64) -> Assembled {
    let d = grid.dim;
    let m = grid.nodes - 2;
    let h = grid.dx();
    let h2 = h * h;
    let n = interior_size(grid);
    let rows = par::map_range(n, |k| {
        let idx = interior_axes(grid, k);
        let x: Vec<f64> = idx.iter().map(|&i| grid.coord(i + 1)).collect();
        let q = field.diffusion(s, &x);
        let f = field.drift(s, &x);
        let v = field.potential(s, &x);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(1 + 2 * d + 4 * d * (d - 1) / 2);
        let mut diag = -v;
        let mut max_pe: f64 = 0.0;
        let mut upwind = false;
        let neighbour = |axis: usize, step: isize| -> Option<usize> {
            let j = idx[axis] as isize + step;
            (j >= 0 && (j as usize) < m).then(|| {
                let mut id = idx.clone();
                id[axis] = j as usize;
                interior_flat(grid, &id)
            })
        };
        for a in 0..d {
            let qa = q[(a, a)];
            let fa = f[a];
            let pe = fa.abs() * h / (2.0 * qa);
            max_pe = max_pe.max(pe);
            let (mut lo, mut hi) = (qa / h2, qa / h2);
            diag -= 2.0 * qa / h2;
            if pe > 1.0 {
                upwind = true;
                if fa > 0.0 {
                    hi += fa / h;
                } else {
                    lo -= fa / h;
                }
                diag -= fa.abs() / h;
            } else {
                hi += fa / (2.0 * h);
                lo -= fa / (2.0 * h);
            }
            if let Some(j) = neighbour(a, 1) {
                row.push((j, hi));
            }
            if let Some(j) = neighbour(a, -1) {
                row.push((j, lo));
            }
        }
        for a in 0..d {
            for b in (a + 1)..d {
                let c = 2.0 * q[(a, b)] / (4.0 * h2);
                if c == 0.0 {
                    continue;
                }
                for (sa, sb, sign) in [(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)] {
                    let ia = idx[a] as isize + sa;
                    let ib = idx[b] as isize + sb;
                    if ia >= 0 && (ia as usize) < m && ib >= 0 && (ib as usize) < m {
                        let mut id = idx.clone();
                        id[a] = ia as usize;
                        id[b] = ib as usize;
                        row.push((interior_flat(grid, &id), sign * c));
                    }
                }
            }
        }
        row.push((k, diag));
        (row, max_pe, upwind, v == 0.0)
    });
    let mut max_peclet: f64 = 0.0;
    let mut upwind_nodes = 0;
    let mut potential_zero = true;
    let mut mat_rows = Vec::with_capacity(n);
    for (row, pe, up, vz) in rows {
        max_peclet = max_peclet.max(pe);
        upwind_nodes += up as usize;
        potential_zero &= vz;
        mat_rows.push(row);
    }
    Assembled {
        matrix: Csr::from_rows(mat_rows),
        max_peclet,
        upwind_nodes,
        potential_zero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_stencil_in_one_dimension() {
        let grid = SpaceTimeGrid::new(1, 1.0, 5, 0.0, 1.0, 2).unwrap();
        let a = assemble(&CoefficientField::laplacian(1), &grid, 0.0);
        assert_eq!(a.matrix.n, 3);
        assert_eq!(
            a.matrix.row(1).collect::<Vec<_>>(),
            vec![(0, 4.0), (1, -8.0), (2, 4.0)]
        );
        assert!(a.potential_zero);
    }

    #[test]
    fn quadratics_are_reproduced_in_two_dimensions() {
        let grid = SpaceTimeGrid::new(2, 2.0, 9, 0.0, 1.0, 2).unwrap();
        let c = crate::operator::CustomCoefficients::parse(
            2,
            &["2".into(), "0.5".into(), "0.5".into(), "1".into()],
            &["x1".into(), "-1".into()],
            "0.25",
        )
        .unwrap();
        let field = CoefficientField::new(c, 0.5).unwrap();
        let a = assemble(&field, &grid, 0.0);
        // u = x1² + x1 x2 is reproduced exactly by the stencils; rows next
        // to the boundary see the Dirichlet zeros and are skipped.
        let u: Vec<f64> = (0..interior_size(&grid))
            .map(|k| {
                let p = grid.point(to_full(&grid, k));
                p[0] * p[0] + p[0] * p[1]
            })
            .collect();
        let au = a.matrix.mul(&u);
        for k in 0..u.len() {
            let full = to_full(&grid, k);
            let idx = grid.multi_index(full);
            if idx.iter().any(|i| !(2..=6).contains(i)) {
                continue;
            }
            let p = grid.point(full);
            let exact = 4.0 + 1.0 + p[0] * (2.0 * p[0] + p[1]) - p[0] - 0.25 * u[k];
            assert!((au[k] - exact).abs() < 1e-10, "{} vs {exact}", au[k]);
        }
    }
}
