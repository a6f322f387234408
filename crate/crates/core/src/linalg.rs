//! Small dense linear algebra over any [`FieldOps`] field: reduced row echelon
//! form, rank and null spaces. Used for the GF(q²) computations on the
//! Hermitian side; the 6-dimensional GF(q) model has its own fixed-size kernel
//! in [`crate::geometry`].

use crate::gf::FieldOps;

/// Brings `rows` into reduced row echelon form in place, drops zero rows and
/// returns the pivot columns.
pub fn rref<F: FieldOps>(f: &F, rows: &mut Vec<Vec<F::Elem>>) -> Vec<usize> {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !f.is_zero(rows[i][c])) else {
            continue;
        };
        rows.swap(r, p);
        let inv = f.inv(rows[r][c]).expect("pivot is non-zero");
        for x in rows[r].iter_mut() {
            *x = f.mul(*x, inv);
        }
        for i in 0..rows.len() {
            if i != r && !f.is_zero(rows[i][c]) {
                let factor = rows[i][c];
                for j in 0..ncols {
                    let t = f.mul(factor, rows[r][j]);
                    rows[i][j] = f.sub(rows[i][j], t);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    pivots
}

pub fn rank<F: FieldOps>(f: &F, rows: &[Vec<F::Elem>]) -> usize {
    let mut m = rows.to_vec();
    rref(f, &mut m).len()
}

/// Basis (in reduced echelon form) of `{x : M x = 0}` where `M` has the given
/// rows and `ncols` columns.
pub fn null_space<F: FieldOps>(f: &F, rows: &[Vec<F::Elem>], ncols: usize) -> Vec<Vec<F::Elem>> {
    let mut m = rows.to_vec();
    let pivots = rref(f, &mut m);
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![f.zero(); ncols];
        v[free] = f.one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = f.sub(f.zero(), m[r][free]);
        }
        basis.push(v);
    }
    rref(f, &mut basis);
    basis
}
