//! Sparse LU factorization of the simplex basis with a product-form eta
//! file between refactorizations. Pivot order follows Markowitz counts with
//! a magnitude guard; bases arising from the layered-DAG models are close
//! to triangular, so fill-in stays small.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum LuError {
    #[error("singular basis at elimination step {step}")]
    Singular { step: usize },
}

struct Eta<S> {
    /// Basis position whose column was replaced.
    pos: usize,
    /// Sparse `w = B^-1 a_q`, by basis position, excluding `pos`.
    entries: Vec<(usize, S)>,
    pivot: S,
}

pub struct LuFactors<S> {
    m: usize,
    /// Pivot sequence `(row, position, pivot value)`.
    seq: Vec<(usize, usize, S)>,
    /// Per step: elimination multipliers `(row, mult)`.
    l_ops: Vec<Vec<(usize, S)>>,
    /// Per step: pivot-row off-diagonals `(position, value)`.
    u_rows: Vec<Vec<(usize, S)>>,
    etas: Vec<Eta<S>>,
}

impl<S: Scalar> LuFactors<S> {
    /// Factorize the basis given column-wise (`cols[p]` is sparse by row).
    pub fn factorize(m: usize, cols: &[Vec<(usize, S)>]) -> Result<Self, LuError> {
        assert_eq!(cols.len(), m);
        let mut rows: Vec<BTreeMap<usize, S>> = vec![BTreeMap::new(); m];
        for (p, col) in cols.iter().enumerate() {
            for (r, v) in col {
                if !v.is_zero() {
                    let slot = rows[*r].entry(p).or_insert_with(S::zero);
                    *slot = slot.clone() + v.clone();
                }
            }
        }
        for row in rows.iter_mut() {
            row.retain(|_, v| !v.is_zero());
        }
        let mut col_active = vec![true; m];
        let mut row_active = vec![true; m];
        let mut row_of_col: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (r, row) in rows.iter().enumerate() {
            for (&p, _) in row {
                row_of_col[p].push(r);
            }
        }
        // live-entry count per active column, maintained through elimination;
        // singleton columns pivot without fill, so they get a fast queue
        let mut col_count: Vec<usize> = row_of_col.iter().map(Vec::len).collect();
        let mut singletons: std::collections::VecDeque<usize> = (0..m)
            .filter(|&p| col_count[p] == 1)
            .collect();

        let mut seq = Vec::with_capacity(m);
        let mut l_ops = Vec::with_capacity(m);
        let mut u_rows = Vec::with_capacity(m);

        for step in 0..m {
            let c_k = loop {
                match singletons.pop_front() {
                    Some(p) => {
                        if col_active[p] && col_count[p] == 1 {
                            break p;
                        }
                    }
                    None => {
                        // no singleton: scan for the minimum-count column
                        let mut best: Option<(usize, usize)> = None;
                        for p in 0..m {
                            if !col_active[p] {
                                continue;
                            }
                            if col_count[p] == 0 {
                                return Err(LuError::Singular { step });
                            }
                            match best {
                                Some((c, _)) if col_count[p] >= c => {}
                                _ => best = Some((col_count[p], p)),
                            }
                        }
                        break best.ok_or(LuError::Singular { step })?.1;
                    }
                }
            };
            // drop stale entries; cancel-then-refill leaves duplicates too
            row_of_col[c_k].retain(|&r| row_active[r] && rows[r].contains_key(&c_k));
            row_of_col[c_k].sort_unstable();
            row_of_col[c_k].dedup();
            debug_assert_eq!(row_of_col[c_k].len(), col_count[c_k]);
            if row_of_col[c_k].is_empty() {
                return Err(LuError::Singular { step });
            }
            // pivot row: smallest row count among entries of acceptable
            // magnitude (relative to the column's largest entry)
            let col_rows = &row_of_col[c_k];
            let r_k = if S::EXACT {
                *col_rows
                    .iter()
                    .min_by_key(|&&r| (rows[r].len(), r))
                    .expect("column has entries")
            } else {
                let col_max = col_rows
                    .iter()
                    .map(|&r| rows[r][&c_k].to_f64().abs())
                    .fold(0.0f64, f64::max);
                let floor = col_max * 1e-2;
                col_rows
                    .iter()
                    .filter(|&&r| rows[r][&c_k].to_f64().abs() >= floor)
                    .min_by_key(|&&r| (rows[r].len(), r))
                    .copied()
                    .unwrap_or_else(|| {
                        *col_rows
                            .iter()
                            .min_by_key(|&&r| (rows[r].len(), r))
                            .expect("column has entries")
                    })
            };
            let pivot_val = rows[r_k][&c_k].clone();
            if pivot_val.is_zero() {
                return Err(LuError::Singular { step });
            }
            let mut pivot_row: Vec<(usize, S)> = rows[r_k]
                .iter()
                .filter(|&(&p, _)| p != c_k)
                .map(|(&p, v)| (p, v.clone()))
                .collect();
            pivot_row.sort_by_key(|&(p, _)| p);

            let mut ops = Vec::new();
            let victims: Vec<usize> = row_of_col[c_k]
                .iter()
                .copied()
                .filter(|&r| r != r_k)
                .collect();
            for r in victims {
                let mult = rows[r].remove(&c_k).expect("entry tracked in column list") / pivot_val.clone();
                for (p, v) in &pivot_row {
                    let mut filled = false;
                    let now_zero = {
                        let slot = rows[r].entry(*p).or_insert_with(|| {
                            filled = true;
                            S::zero()
                        });
                        *slot = slot.clone() - mult.clone() * v.clone();
                        slot.is_zero()
                    };
                    if filled {
                        row_of_col[*p].push(r);
                        col_count[*p] += 1;
                    }
                    if now_zero {
                        rows[r].remove(p);
                        col_count[*p] -= 1;
                        if col_count[*p] == 1 {
                            singletons.push_back(*p);
                        }
                    }
                }
                ops.push((r, mult));
            }
            row_active[r_k] = false;
            col_active[c_k] = false;
            // retiring the pivot row removes one live entry from each of its
            // remaining columns
            for (p, _) in &pivot_row {
                col_count[*p] -= 1;
                if col_count[*p] == 1 {
                    singletons.push_back(*p);
                }
            }
            rows[r_k].clear();
            seq.push((r_k, c_k, pivot_val));
            l_ops.push(ops);
            u_rows.push(pivot_row);
        }
        Ok(Self { m, seq, l_ops, u_rows, etas: Vec::new() })
    }

    /// Record a basis change: position `pos` replaced by a column whose
    /// `B^-1`-image is `w` (dense, by position).
    pub fn push_eta(&mut self, pos: usize, w: &[S]) {
        let entries: Vec<(usize, S)> = w
            .iter()
            .enumerate()
            .filter(|&(p, v)| p != pos && !v.is_zero())
            .map(|(p, v)| (p, v.clone()))
            .collect();
        self.etas.push(Eta { pos, entries, pivot: w[pos].clone() });
    }

    /// Solve `B z = v`; `v` is indexed by row, `z` by basis position.
    /// `work` and `t` are scratch of length `m`.
    pub fn ftran(&self, v: &[S], z: &mut [S], work: &mut [S], t: &mut [S]) {
        work.clone_from_slice(v);
        for (k, (r_k, _, _)) in self.seq.iter().enumerate() {
            let tk = work[*r_k].clone();
            if !tk.is_zero() {
                for (row, mult) in &self.l_ops[k] {
                    work[*row] = work[*row].clone() - mult.clone() * tk.clone();
                }
            }
            t[k] = tk;
        }
        for k in (0..self.m).rev() {
            let (_, p_k, pivot) = &self.seq[k];
            let mut acc = t[k].clone();
            for (p_j, u) in &self.u_rows[k] {
                if !z[*p_j].is_zero() {
                    acc = acc - u.clone() * z[*p_j].clone();
                }
            }
            z[*p_k] = acc / pivot.clone();
        }
        for eta in &self.etas {
            let zp = z[eta.pos].clone() / eta.pivot.clone();
            if !zp.is_zero() {
                for (p, w) in &eta.entries {
                    z[*p] = z[*p].clone() - w.clone() * zp.clone();
                }
            }
            z[eta.pos] = zp;
        }
    }

    /// Solve `B^T y = c`; `c` is indexed by basis position, `y` by row.
    /// `acc` and `t` are scratch of length `m`.
    pub fn btran(&self, c: &[S], y: &mut [S], acc: &mut [S], t: &mut [S]) {
        acc.clone_from_slice(c);
        for eta in self.etas.iter().rev() {
            let mut sum = acc[eta.pos].clone();
            for (p, w) in &eta.entries {
                if !acc[*p].is_zero() {
                    sum = sum - w.clone() * acc[*p].clone();
                }
            }
            acc[eta.pos] = sum / eta.pivot.clone();
        }
        for (k, (_, p_k, pivot)) in self.seq.iter().enumerate() {
            let zk = acc[*p_k].clone() / pivot.clone();
            if !zk.is_zero() {
                for (p_j, u) in &self.u_rows[k] {
                    acc[*p_j] = acc[*p_j].clone() - u.clone() * zk.clone();
                }
            }
            t[k] = zk;
        }
        for k in (0..self.m).rev() {
            let (r_k, _, _) = &self.seq[k];
            let mut sum = t[k].clone();
            for (row, mult) in &self.l_ops[k] {
                if !y[*row].is_zero() {
                    sum = sum - mult.clone() * y[*row].clone();
                }
            }
            y[*r_k] = sum;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_mul(cols: &[Vec<(usize, f64)>], z: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (p, col) in cols.iter().enumerate() {
            for (r, v) in col {
                out[*r] += v * z[p];
            }
        }
        out
    }

    fn dense_mul_t(cols: &[Vec<(usize, f64)>], y: &[f64]) -> Vec<f64> {
        cols.iter()
            .map(|col| col.iter().map(|(r, v)| v * y[*r]).sum())
            .collect()
    }

    fn random_sparse_basis(m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<(usize, f64)>> {
        // diagonal plus a few off-diagonals keeps it nonsingular w.h.p.
        (0..m)
            .map(|p| {
                let mut col = vec![(p, rng.gen_range(1.0..3.0))];
                for _ in 0..rng.gen_range(0..3) {
                    let r = rng.gen_range(0..m);
                    if r != p {
                        col.push((r, rng.gen_range(-1.0..1.0)));
                    }
                }
                col
            })
            .collect()
    }

    #[test]
    fn ftran_btran_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let m = rng.gen_range(1..30);
            let cols = random_sparse_basis(m, &mut rng);
            let lu = match LuFactors::factorize(m, &cols) {
                Ok(lu) => lu,
                Err(_) => continue,
            };
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut z = vec![0.0; m];
            let mut w1 = vec![0.0; m];
            let mut w2 = vec![0.0; m];
            lu.ftran(&v, &mut z, &mut w1, &mut w2);
            let back = dense_mul(&cols, &z, m);
            for (a, b) in back.iter().zip(&v) {
                assert!((a - b).abs() < 1e-8, "ftran residual too large");
            }
            let mut y = vec![0.0; m];
            lu.btran(&v, &mut y, &mut w1, &mut w2);
            let back = dense_mul_t(&cols, &y);
            for (a, b) in back.iter().zip(&v) {
                assert!((a - b).abs() < 1e-8, "btran residual too large");
            }
        }
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 12;
        let mut cols = random_sparse_basis(m, &mut rng);
        let mut lu = LuFactors::factorize(m, &cols).unwrap();
        let mut w1 = vec![0.0; m];
        let mut w2 = vec![0.0; m];
        for _ in 0..5 {
            // replace a random position with a fresh column
            let pos = rng.gen_range(0..m);
            let newcol: Vec<(usize, f64)> = vec![
                (pos, rng.gen_range(1.0..2.0)),
                (rng.gen_range(0..m), rng.gen_range(-1.0..1.0)),
            ];
            let mut dense = vec![0.0; m];
            for (r, v) in &newcol {
                dense[*r] += v;
            }
            let mut w = vec![0.0; m];
            lu.ftran(&dense, &mut w, &mut w1, &mut w2);
            if w[pos].abs() < 1e-9 {
                continue;
            }
            lu.push_eta(pos, &w);
            cols[pos] = newcol;

            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut z = vec![0.0; m];
            lu.ftran(&v, &mut z, &mut w1, &mut w2);
            let back = dense_mul(&cols, &z, m);
            for (a, b) in back.iter().zip(&v) {
                assert!((a - b).abs() < 1e-7);
            }
            let mut y = vec![0.0; m];
            lu.btran(&v, &mut y, &mut w1, &mut w2);
            let back = dense_mul_t(&cols, &y);
            for (a, b) in back.iter().zip(&v) {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn singular_basis_detected() {
        let cols: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0)], vec![(0, 2.0)]];
        assert!(matches!(LuFactors::factorize(2, &cols), Err(LuError::Singular { .. })));
    }
}
