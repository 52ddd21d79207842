//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Singleton columns and rows are eliminated first without fill; whatever
//! remains is factored densely with partial pivoting. Columns are indexed by
//! basis position, rows by constraint index.

const SINGULAR_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;

/// One elementary elimination step.
#[derive(Debug, Clone)]
struct Pivot {
    row: usize,
    col: usize,
    value: f64,
    /// Multipliers applied to other rows: `(row, l)`.
    lower: Vec<(usize, f64)>,
    /// Entries of the pivot row in later pivot columns: `(col, u)`.
    upper: Vec<(usize, f64)>,
}

/// Elementary column transformation from one basis change.
#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries of the entering column in position space.
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Factor {
    m: usize,
    pivots: Vec<Pivot>,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

/// The basis matrix is numerically singular.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Singular;

impl Factor {
    /// Factors the `m x m` matrix whose column `k` is `cols[k]`.
    pub(crate) fn new(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<Factor, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut row_lists: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut col_count = vec![0usize; m];
        let mut row_count = vec![0usize; m];
        for (k, col) in cols.iter().enumerate() {
            for &(i, _) in col {
                row_lists[i].push(k);
                col_count[k] += 1;
                row_count[i] += 1;
            }
        }
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut pivots: Vec<Pivot> = Vec::with_capacity(m);

        // Singleton elimination. Values of the remaining submatrix never
        // change here: column singletons touch no other row and row
        // singletons only clear entries in their own column.
        let mut col_stack: Vec<usize> = (0..m).filter(|&k| col_count[k] == 1).collect();
        let mut row_stack: Vec<usize> = (0..m).filter(|&i| row_count[i] == 1).collect();
        loop {
            if let Some(k) = col_stack.pop() {
                if col_done[k] || col_count[k] != 1 {
                    continue;
                }
                let (r, v) = cols[k]
                    .iter()
                    .copied()
                    .find(|&(i, _)| !row_done[i])
                    .expect("column count out of sync");
                if v.abs() < SINGULAR_TOL {
                    continue;
                }
                let upper: Vec<(usize, f64)> = row_lists[r]
                    .iter()
                    .filter(|&&c| c != k && !col_done[c])
                    .map(|&c| (c, value_at(&cols[c], r)))
                    .collect();
                row_done[r] = true;
                col_done[k] = true;
                for &c in &row_lists[r] {
                    if !col_done[c] {
                        col_count[c] -= 1;
                        if col_count[c] == 1 {
                            col_stack.push(c);
                        }
                    }
                }
                for &(i, _) in &cols[k] {
                    if !row_done[i] {
                        row_count[i] -= 1;
                    }
                }
                pivots.push(Pivot {
                    row: r,
                    col: k,
                    value: v,
                    lower: Vec::new(),
                    upper,
                });
                continue;
            }
            if let Some(r) = row_stack.pop() {
                if row_done[r] || row_count[r] != 1 {
                    continue;
                }
                let k = *row_lists[r]
                    .iter()
                    .find(|&&c| !col_done[c])
                    .expect("row count out of sync");
                let v = value_at(&cols[k], r);
                if v.abs() < SINGULAR_TOL {
                    continue;
                }
                let lower: Vec<(usize, f64)> = cols[k]
                    .iter()
                    .filter(|&&(i, _)| i != r && !row_done[i])
                    .map(|&(i, a)| (i, a / v))
                    .collect();
                row_done[r] = true;
                col_done[k] = true;
                for &(i, _) in &cols[k] {
                    if !row_done[i] {
                        row_count[i] -= 1;
                        if row_count[i] == 1 {
                            row_stack.push(i);
                        }
                    }
                }
                pivots.push(Pivot {
                    row: r,
                    col: k,
                    value: v,
                    lower,
                    upper: Vec::new(),
                });
                continue;
            }
            break;
        }

        // Markowitz elimination on what remains.
        let krows: Vec<usize> = (0..m).filter(|&i| !row_done[i]).collect();
        let kcols: Vec<usize> = (0..m).filter(|&k| !col_done[k]).collect();
        if krows.len() != kcols.len() {
            return Err(Singular);
        }
        if !krows.is_empty() {
            kernel(m, cols, &krows, &kcols, &row_done, &mut pivots)?;
        }
        Ok(Factor {
            m,
            pivots,
            etas: Vec::new(),
            eta_nnz: 0,
        })
    }

    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub(crate) fn update_nnz(&self) -> usize {
        self.eta_nnz
    }

    /// Solves `B x = a` in place: `a` is indexed by row on entry and by
    /// basis position on exit.
    pub(crate) fn ftran(&self, a: &mut Vec<f64>) {
        for p in &self.pivots {
            let v = a[p.row];
            if v != 0.0 {
                for &(i, l) in &p.lower {
                    a[i] -= l * v;
                }
            }
        }
        let mut x = vec![0.0; self.m];
        for p in self.pivots.iter().rev() {
            let mut s = a[p.row];
            for &(c, u) in &p.upper {
                s -= u * x[c];
            }
            x[p.col] = s / p.value;
        }
        for e in &self.etas {
            let xr = x[e.pos] / e.pivot;
            if xr != 0.0 {
                for &(i, w) in &e.entries {
                    x[i] -= w * xr;
                }
            }
            x[e.pos] = xr;
        }
        *a = x;
    }

    /// Solves `B^T y = c` in place: `c` is indexed by basis position on entry
    /// and by row on exit.
    pub(crate) fn btran(&self, c: &mut Vec<f64>) {
        for e in self.etas.iter().rev() {
            let mut s = c[e.pos];
            for &(i, w) in &e.entries {
                s -= w * c[i];
            }
            c[e.pos] = s / e.pivot;
        }
        let mut z = vec![0.0; self.m];
        for p in &self.pivots {
            let zr = c[p.col] / p.value;
            z[p.row] = zr;
            if zr != 0.0 {
                for &(col, u) in &p.upper {
                    c[col] -= u * zr;
                }
            }
        }
        for p in self.pivots.iter().rev() {
            let mut s = z[p.row];
            for &(i, l) in &p.lower {
                s -= l * z[i];
            }
            z[p.row] = s;
        }
        *c = z;
    }

    /// Records that the column with FTRAN image `w` replaced position `pos`.
    pub(crate) fn update(&mut self, pos: usize, w: &[f64]) {
        let entries: Vec<(usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v.abs() > DROP_TOL)
            .map(|(i, &v)| (i, v))
            .collect();
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot: w[pos],
            entries,
        });
    }
}

/// Sparse Gaussian elimination with Markowitz pivot choice and threshold
/// partial pivoting on the submatrix `krows x kcols`.
fn kernel(
    m: usize,
    cols: &[Vec<(usize, f64)>],
    krows: &[usize],
    kcols: &[usize],
    row_done: &[bool],
    pivots: &mut Vec<Pivot>,
) -> Result<(), Singular> {
    const THRESHOLD: f64 = 0.1;
    const SEARCH_COLS: usize = 4;
    let mut in_kernel_col = vec![false; m];
    for &k in kcols {
        in_kernel_col[k] = true;
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_cnt = vec![0usize; m];
    for &k in kcols {
        for &(i, v) in &cols[k] {
            if !row_done[i] && v != 0.0 {
                rows[i].push((k, v));
                col_rows[k].push(i);
                col_cnt[k] += 1;
            }
        }
    }
    let mut row_active = vec![false; m];
    for &i in krows {
        row_active[i] = true;
    }
    let mut col_active = in_kernel_col;
    let mut work = vec![0.0; m];
    let mut mark = vec![false; m];
    let mut remaining: Vec<usize> = kcols.to_vec();

    for _ in 0..kcols.len() {
        // Candidate columns with the fewest entries.
        remaining.retain(|&k| col_active[k]);
        let mut cand: Vec<usize> = Vec::with_capacity(SEARCH_COLS + 1);
        for &k in &remaining {
            let key = (col_cnt[k], k);
            if cand.len() == SEARCH_COLS && key >= (col_cnt[cand[SEARCH_COLS - 1]], cand[SEARCH_COLS - 1]) {
                continue;
            }
            let at = cand.partition_point(|&c| (col_cnt[c], c) < key);
            cand.insert(at, k);
            cand.truncate(SEARCH_COLS);
        }
        let mut best: Option<(usize, usize, f64, usize)> = None;
        for &k in &cand {
            col_rows[k].retain(|&i| row_active[i]);
            col_rows[k].sort_unstable();
            col_rows[k].dedup();
            let entries: Vec<(usize, f64)> = col_rows[k]
                .iter()
                .map(|&i| (i, value_at(&rows[i], k)))
                .filter(|&(_, v)| v != 0.0)
                .collect();
            let cmax = entries.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
            if cmax < SINGULAR_TOL {
                continue;
            }
            for &(i, v) in &entries {
                if v.abs() < THRESHOLD * cmax {
                    continue;
                }
                let cost = (rows[i].len() - 1) * (entries.len() - 1);
                if best.is_none_or(|(_, _, bv, bc)| cost < bc || (cost == bc && v.abs() > bv.abs())) {
                    best = Some((i, k, v, cost));
                }
            }
        }
        let Some((p, k, pv, _)) = best else {
            return Err(Singular);
        };

        let prow: Vec<(usize, f64)> = rows[p].iter().copied().filter(|&(c, _)| c != k).collect();
        let mut lower = Vec::new();
        let others: Vec<usize> = col_rows[k].iter().copied().filter(|&i| i != p).collect();
        for i in others {
            let a = value_at(&rows[i], k);
            if a == 0.0 {
                continue;
            }
            let l = a / pv;
            lower.push((i, l));
            // Scatter row i, subtract l * pivot row, gather.
            let mut row = std::mem::take(&mut rows[i]);
            row.retain(|&(c, _)| c != k);
            for &(c, v) in &row {
                work[c] = v;
                mark[c] = true;
            }
            for &(c, v) in &prow {
                if !mark[c] {
                    mark[c] = true;
                    work[c] = 0.0;
                    row.push((c, 0.0));
                    col_rows[c].push(i);
                    col_cnt[c] += 1;
                }
                work[c] -= l * v;
            }
            row.retain_mut(|e| {
                let v = work[e.0];
                mark[e.0] = false;
                if v.abs() <= DROP_TOL {
                    col_cnt[e.0] -= 1;
                    false
                } else {
                    e.1 = v;
                    true
                }
            });
            rows[i] = row;
            col_cnt[k] -= 1;
        }
        for &(c, _) in &prow {
            col_cnt[c] -= 1;
        }
        row_active[p] = false;
        col_active[k] = false;
        pivots.push(Pivot {
            row: p,
            col: k,
            value: pv,
            lower,
            upper: prow,
        });
    }
    Ok(())
}

fn value_at(col: &[(usize, f64)], row: usize) -> f64 {
    col.iter().find(|&&(i, _)| i == row).map_or(0.0, |&(_, v)| v)
}
