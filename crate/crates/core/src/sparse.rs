//! Sparse symmetric positive definite solves: nested-dissection ordering on
//! lattice coordinates and a supernodal left-looking Cholesky factorization.

use std::sync::Arc;

use thiserror::Error;

const NONE: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Pattern of a symmetric matrix in compressed-column form, both triangles stored,
/// row indices sorted within each column.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPattern {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
}

impl SymPattern {
    /// Builds the pattern from per-column row lists (need not be sorted).
    pub fn from_columns(mut columns: Vec<Vec<usize>>) -> Self {
        let n = columns.len();
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowind = Vec::new();
        colptr.push(0);
        for col in columns.iter_mut() {
            col.sort_unstable();
            col.dedup();
            rowind.extend_from_slice(col);
            colptr.push(rowind.len());
        }
        SymPattern { n, colptr, rowind }
    }

    pub fn nnz(&self) -> usize {
        self.rowind.len()
    }

    /// Position of entry `(row, col)` in the value array.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.colptr[col];
        let hi = self.colptr[col + 1];
        self.rowind[lo..hi].binary_search(&row).ok().map(|p| lo + p)
    }

    pub fn matvec(&self, values: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (j, yj) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            // symmetric, so column j doubles as row j
            for p in self.colptr[j]..self.colptr[j + 1] {
                acc += values[p] * x[self.rowind[p]];
            }
            *yj = acc;
        }
        y
    }
}

/// Orders items with integer lattice coordinates by recursive coordinate bisection,
/// placing each separating lattice line after the two halves it splits.
/// Valid for graphs whose edges join items at most one lattice step apart.
pub fn nested_dissection(coords: &[[i64; 2]]) -> Vec<usize> {
    let mut items: Vec<usize> = (0..coords.len()).collect();
    let mut out = Vec::with_capacity(coords.len());
    dissect(&mut items, coords, &mut out);
    out
}

fn dissect(items: &mut [usize], coords: &[[i64; 2]], out: &mut Vec<usize>) {
    if items.len() <= 24 {
        items.sort_unstable_by_key(|&i| (coords[i][1], coords[i][0], i));
        out.extend_from_slice(items);
        return;
    }
    let extent = |axis: usize| {
        let lo = items.iter().map(|&i| coords[i][axis]).min().unwrap();
        let hi = items.iter().map(|&i| coords[i][axis]).max().unwrap();
        hi - lo
    };
    let first = if extent(0) >= extent(1) { 0 } else { 1 };
    for axis in [first, 1 - first] {
        items.sort_unstable_by_key(|&i| (coords[i][axis], coords[i][1 - axis], i));
        let mid = coords[items[items.len() / 2]][axis];
        let lo_end = items.partition_point(|&i| coords[i][axis] < mid);
        let hi_start = items.partition_point(|&i| coords[i][axis] <= mid);
        if lo_end == 0 || hi_start == items.len() {
            continue;
        }
        let sep: Vec<usize> = items[lo_end..hi_start].to_vec();
        let (left, rest) = items.split_at_mut(lo_end);
        let right = &mut rest[hi_start - lo_end..];
        dissect(left, coords, out);
        dissect(right, coords, out);
        out.extend_from_slice(&sep);
        return;
    }
    items.sort_unstable_by_key(|&i| (coords[i][1], coords[i][0], i));
    out.extend_from_slice(items);
}

/// Symbolic analysis: permuted lower structure, elimination tree and supernodes.
#[derive(Debug, Clone)]
pub struct Symbolic {
    pub n: usize,
    /// `perm[new] = old`.
    pub perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    /// Index into the source value array for each permuted lower entry.
    lsrc: Vec<usize>,
    sup_ptr: Vec<usize>,
    sup_of: Vec<usize>,
    row_ptr: Vec<usize>,
    rows: Vec<usize>,
    val_ptr: Vec<usize>,
}

impl Symbolic {
    pub fn analyze(pattern: &SymPattern, perm: Vec<usize>) -> Self {
        let n = pattern.n;
        assert_eq!(perm.len(), n, "permutation length");
        let mut iperm = vec![NONE; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // lower triangle of the permuted matrix, column by column
        let mut counts = vec![0usize; n + 1];
        for old_c in 0..n {
            let c = iperm[old_c];
            for p in pattern.colptr[old_c]..pattern.colptr[old_c + 1] {
                let r = iperm[pattern.rowind[p]];
                if r >= c {
                    counts[c + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let lp = counts.clone();
        let mut fill = counts;
        let mut li = vec![0usize; lp[n]];
        let mut lsrc = vec![0usize; lp[n]];
        for old_c in 0..n {
            let c = iperm[old_c];
            for p in pattern.colptr[old_c]..pattern.colptr[old_c + 1] {
                let r = iperm[pattern.rowind[p]];
                if r >= c {
                    li[fill[c]] = r;
                    lsrc[fill[c]] = p;
                    fill[c] += 1;
                }
            }
        }
        for c in 0..n {
            let mut pairs: Vec<(usize, usize)> = (lp[c]..lp[c + 1]).map(|p| (li[p], lsrc[p])).collect();
            pairs.sort_unstable();
            for (k, (r, s)) in pairs.into_iter().enumerate() {
                li[lp[c] + k] = r;
                lsrc[lp[c] + k] = s;
            }
        }

        // row-wise view of the strict lower part: for row k, columns j < k
        let mut up = vec![0usize; n + 1];
        for c in 0..n {
            for &r in &li[lp[c]..lp[c + 1]] {
                if r > c {
                    up[r + 1] += 1;
                }
            }
        }
        for j in 0..n {
            up[j + 1] += up[j];
        }
        let mut ufill = up.clone();
        let mut ui = vec![0usize; up[n]];
        for c in 0..n {
            for &r in &li[lp[c]..lp[c + 1]] {
                if r > c {
                    ui[ufill[r]] = c;
                    ufill[r] += 1;
                }
            }
        }

        // elimination tree
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &start in &ui[up[k]..up[k + 1]] {
                let mut i = start;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        // column counts by walking each row subtree
        let mut colcount = vec![1usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            flag[k] = k;
            for &start in &ui[up[k]..up[k + 1]] {
                let mut i = start;
                while flag[i] != k {
                    flag[i] = k;
                    colcount[i] += 1;
                    i = parent[i];
                }
            }
        }

        // fundamental supernodes
        let mut nchild = vec![0usize; n];
        for j in 0..n {
            if parent[j] != NONE {
                nchild[parent[j]] += 1;
            }
        }
        let mut sup_ptr = vec![0usize];
        for j in 1..n {
            let merge = parent[j - 1] == j && colcount[j - 1] == colcount[j] + 1 && nchild[j] == 1;
            if !merge {
                sup_ptr.push(j);
            }
        }
        sup_ptr.push(n);
        let ns = sup_ptr.len() - 1;
        let mut sup_of = vec![0usize; n];
        for s in 0..ns {
            for j in sup_ptr[s]..sup_ptr[s + 1] {
                sup_of[j] = s;
            }
        }

        // row structure of each supernode from its own columns and its children
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); ns];
        for s in 0..ns {
            let last = sup_ptr[s + 1] - 1;
            if parent[last] != NONE {
                children[sup_of[parent[last]]].push(s);
            }
        }
        let mut row_ptr = vec![0usize];
        let mut rows: Vec<usize> = Vec::new();
        let mut mark = vec![NONE; n];
        for s in 0..ns {
            let (f, l1) = (sup_ptr[s], sup_ptr[s + 1]);
            let mut extra = Vec::new();
            for j in f..l1 {
                mark[j] = s;
            }
            for c in f..l1 {
                for &r in &li[lp[c]..lp[c + 1]] {
                    if mark[r] != s {
                        mark[r] = s;
                        extra.push(r);
                    }
                }
            }
            for &ch in &children[s] {
                for &r in &rows[row_ptr[ch]..row_ptr[ch + 1]] {
                    if r >= l1 && mark[r] != s {
                        mark[r] = s;
                        extra.push(r);
                    }
                }
            }
            extra.sort_unstable();
            rows.extend(f..l1);
            rows.extend_from_slice(&extra);
            row_ptr.push(rows.len());
            debug_assert_eq!(row_ptr[s + 1] - row_ptr[s], colcount[f]);
        }
        let mut val_ptr = vec![0usize];
        for s in 0..ns {
            let m = row_ptr[s + 1] - row_ptr[s];
            let w = sup_ptr[s + 1] - sup_ptr[s];
            val_ptr.push(val_ptr[s] + m * w);
        }

        Symbolic { n, perm, lp, li, lsrc, sup_ptr, sup_of, row_ptr, rows, val_ptr }
    }

    /// Number of stored entries in the factor.
    pub fn factor_nnz(&self) -> usize {
        *self.val_ptr.last().unwrap()
    }

    pub fn supernode_count(&self) -> usize {
        self.sup_ptr.len() - 1
    }
}

/// Lower-triangular factor `L` with `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Factor {
    sym: Arc<Symbolic>,
    values: Vec<f64>,
}

/// Factors the matrix whose entries are `values` on the pattern used for `sym`.
pub fn cholesky(sym: &Arc<Symbolic>, values: &[f64]) -> Result<Factor, SparseError> {
    let s = sym.as_ref();
    let n = s.n;
    let ns = s.supernode_count();
    let mut vals = vec![0.0; s.factor_nnz()];
    let mut relpos = vec![0usize; n];
    let mut head = vec![NONE; ns];
    let mut next_link = vec![NONE; ns];
    let mut link_ptr = vec![0usize; ns];
    let mut tmp: Vec<f64> = Vec::new();

    for j_sup in 0..ns {
        let (f, l1) = (s.sup_ptr[j_sup], s.sup_ptr[j_sup + 1]);
        let w = l1 - f;
        let jrows = &s.rows[s.row_ptr[j_sup]..s.row_ptr[j_sup + 1]];
        let m = jrows.len();
        for (p, &r) in jrows.iter().enumerate() {
            relpos[r] = p;
        }
        let (done, rest) = vals.split_at_mut(s.val_ptr[j_sup]);
        let panel = &mut rest[..m * w];
        for c in f..l1 {
            for p in s.lp[c]..s.lp[c + 1] {
                panel[(c - f) * m + relpos[s.li[p]]] += values[s.lsrc[p]];
            }
        }

        let mut k_sup = head[j_sup];
        head[j_sup] = NONE;
        while k_sup != NONE {
            let k_next = next_link[k_sup];
            let krows = &s.rows[s.row_ptr[k_sup]..s.row_ptr[k_sup + 1]];
            let mk = krows.len();
            let wk = s.sup_ptr[k_sup + 1] - s.sup_ptr[k_sup];
            let kvals = &done[s.val_ptr[k_sup]..s.val_ptr[k_sup] + mk * wk];
            let a = link_ptr[k_sup];
            let mut b = a;
            while b < mk && krows[b] < l1 {
                b += 1;
            }
            let tm = mk - a;
            let tw = b - a;
            tmp.clear();
            tmp.resize(tm * tw, 0.0);
            for c in 0..wk {
                let col = &kvals[c * mk + a..(c + 1) * mk];
                for jj in 0..tw {
                    let ljc = col[jj];
                    if ljc == 0.0 {
                        continue;
                    }
                    let t = &mut tmp[jj * tm + jj..(jj + 1) * tm];
                    for (ti, &li) in t.iter_mut().zip(&col[jj..]) {
                        *ti += li * ljc;
                    }
                }
            }
            for jj in 0..tw {
                let base = (krows[a + jj] - f) * m;
                let t = &tmp[jj * tm..(jj + 1) * tm];
                for ii in jj..tm {
                    panel[base + relpos[krows[a + ii]]] -= t[ii];
                }
            }
            if b < mk {
                link_ptr[k_sup] = b;
                let target = s.sup_of[krows[b]];
                next_link[k_sup] = head[target];
                head[target] = k_sup;
            }
            k_sup = k_next;
        }

        for j in 0..w {
            let (before, after) = panel.split_at_mut(j * m);
            let colj = &mut after[..m];
            for c in 0..j {
                let colc = &before[c * m..(c + 1) * m];
                let ljc = colc[j];
                if ljc != 0.0 {
                    for (x, &y) in colj[j..].iter_mut().zip(&colc[j..]) {
                        *x -= y * ljc;
                    }
                }
            }
            let d = colj[j];
            if !(d > 0.0) || !d.is_finite() {
                return Err(SparseError::NotPositiveDefinite { column: f + j, pivot: d });
            }
            let sq = d.sqrt();
            colj[j] = sq;
            let inv = 1.0 / sq;
            for x in colj[j + 1..].iter_mut() {
                *x *= inv;
            }
        }

        if m > w {
            link_ptr[j_sup] = w;
            let target = s.sup_of[jrows[w]];
            next_link[j_sup] = head[target];
            head[target] = j_sup;
        }
    }
    Ok(Factor { sym: Arc::clone(sym), values: vals })
}

impl Factor {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SparseError> {
        let s = self.sym.as_ref();
        if b.len() != s.n {
            return Err(SparseError::Dimension { expected: s.n, got: b.len() });
        }
        let mut y: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        let ns = s.supernode_count();
        for j_sup in 0..ns {
            let f = s.sup_ptr[j_sup];
            let w = s.sup_ptr[j_sup + 1] - f;
            let rows = &s.rows[s.row_ptr[j_sup]..s.row_ptr[j_sup + 1]];
            let m = rows.len();
            let panel = &self.values[s.val_ptr[j_sup]..s.val_ptr[j_sup] + m * w];
            for j in 0..w {
                let col = &panel[j * m..(j + 1) * m];
                let yj = y[f + j] / col[j];
                y[f + j] = yj;
                for i in j + 1..m {
                    y[rows[i]] -= col[i] * yj;
                }
            }
        }
        for j_sup in (0..ns).rev() {
            let f = s.sup_ptr[j_sup];
            let w = s.sup_ptr[j_sup + 1] - f;
            let rows = &s.rows[s.row_ptr[j_sup]..s.row_ptr[j_sup + 1]];
            let m = rows.len();
            let panel = &self.values[s.val_ptr[j_sup]..s.val_ptr[j_sup] + m * w];
            for j in (0..w).rev() {
                let col = &panel[j * m..(j + 1) * m];
                let mut acc = y[f + j];
                for i in j + 1..m {
                    acc -= col[i] * y[rows[i]];
                }
                y[f + j] = acc / col[j];
            }
        }
        let mut x = vec![0.0; s.n];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}
