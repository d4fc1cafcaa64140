//! The block-circulant APM CSS construction: check matrices, parent matrices,
//! code parameters, Tanner-graph girth, and logical bases.
//!
//! Both check matrices are `3 x 12` grids of `P x P` permutation-matrix
//! blocks. A permutation block for the map `f` carries the entry
//! `(f(x), x) = 1`, i.e. column `x` maps to row `f(x)`; this convention is
//! fixed project-wide. Transposed blocks appear in the Z matrix.

use crate::apm::Apm;
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec, SparseGf2Matrix};
use serde::{Deserialize, Serialize};

/// Active block rows retained from the parent matrices.
pub const ACTIVE_ROWS: usize = 3;
/// Block columns (six `F` blocks followed by six `G` blocks).
pub const BLOCK_COLS: usize = 12;

/// The twelve-APM recipe for one code instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeSpec {
    p: u64,
    f: [Apm; 6],
    g: [Apm; 6],
}

#[derive(Serialize, Deserialize)]
struct CoeffPair {
    a: u64,
    b: u64,
}

#[derive(Serialize, Deserialize)]
struct CodeSpecRepr {
    #[serde(rename = "P")]
    p: u64,
    f: Vec<CoeffPair>,
    g: Vec<CoeffPair>,
}

impl Serialize for CodeSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CodeSpecRepr {
            p: self.p,
            f: self.f.iter().map(|m| CoeffPair { a: m.a(), b: m.b() }).collect(),
            g: self.g.iter().map(|m| CoeffPair { a: m.a(), b: m.b() }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CodeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CodeSpecRepr::deserialize(d)?;
        let to_pairs = |v: &[CoeffPair]| v.iter().map(|c| (c.a, c.b)).collect::<Vec<_>>();
        CodeSpec::new(repr.p, &to_pairs(&repr.f), &to_pairs(&repr.g))
            .map_err(serde::de::Error::custom)
    }
}

impl CodeSpec {
    pub fn new(p: u64, f: &[(u64, u64)], g: &[(u64, u64)]) -> Result<CodeSpec> {
        if f.len() != 6 || g.len() != 6 {
            return Err(Error::BadConfig(format!(
                "expected 6 F and 6 G maps, got {} and {}",
                f.len(),
                g.len()
            )));
        }
        let build = |coeffs: &[(u64, u64)]| -> Result<[Apm; 6]> {
            let v: Vec<Apm> = coeffs
                .iter()
                .map(|&(a, b)| Apm::new(a, b, p))
                .collect::<Result<_>>()?;
            Ok(v.try_into().unwrap())
        };
        Ok(CodeSpec {
            p,
            f: build(f)?,
            g: build(g)?,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn f(&self) -> &[Apm; 6] {
        &self.f
    }

    pub fn g(&self) -> &[Apm; 6] {
        &self.g
    }

    /// All twelve maps, `F_0..F_5` then `G_0..G_5`.
    pub fn maps(&self) -> [Apm; 12] {
        let mut out = [Apm::identity(self.p); 12];
        out[..6].copy_from_slice(&self.f);
        out[6..].copy_from_slice(&self.g);
        out
    }

    /// The modulus of the column factor in the `3 x (P/3)` CRT layout.
    pub fn column_modulus(&self) -> Result<u64> {
        if self.p % 3 != 0 || (self.p / 3) % 3 == 0 {
            return Err(Error::BadFactorization { m: 3, l: self.p / 3 });
        }
        Ok(self.p / 3)
    }

    /// CRT reductions of the twelve maps modulo `P/3`.
    pub fn column_components(&self) -> Result<Vec<Apm>> {
        let l = self.column_modulus()?;
        self.maps()
            .iter()
            .map(|m| m.crt_split(3, l).map(|(_, col)| col))
            .collect()
    }

    /// Number of data qubits `n = 12 P`.
    pub fn num_qubits(&self) -> usize {
        BLOCK_COLS * self.p as usize
    }
}

/// A realized CSS code: sparse check matrices plus logical bases.
#[derive(Clone, Debug)]
pub struct CssCode {
    h_x: SparseGf2Matrix,
    h_z: SparseGf2Matrix,
    n: usize,
    k: usize,
    logical_x: BitMatrix,
    logical_z: BitMatrix,
    d_upper: Option<u32>,
}

impl CssCode {
    /// Builds a CSS code from arbitrary orthogonal check matrices and derives
    /// the paired logical bases.
    pub fn from_matrices(h_x: SparseGf2Matrix, h_z: SparseGf2Matrix) -> Result<CssCode> {
        if h_x.cols() != h_z.cols() {
            return Err(Error::DimensionMismatch(format!(
                "h_x has {} columns, h_z has {}",
                h_x.cols(),
                h_z.cols()
            )));
        }
        // exact GF(2) orthogonality
        let zb = h_z.to_bitmatrix();
        for (xi, xrow) in h_x.iter_rows().enumerate() {
            let xv = BitVec::from_ones(h_x.cols(), &xrow.iter().map(|&c| c as usize).collect::<Vec<_>>());
            for zi in 0..h_z.rows() {
                if xv.dot(&zb.row_vec(zi)) {
                    return Err(Error::NotOrthogonal { x_row: xi, z_row: zi });
                }
            }
        }
        Self::from_orthogonal(h_x, h_z)
    }

    fn from_orthogonal(h_x: SparseGf2Matrix, h_z: SparseGf2Matrix) -> Result<CssCode> {
        let n = h_x.cols();
        let (logical_x, logical_z, k) = logical_basis_of(&h_x, &h_z)?;
        Ok(CssCode {
            h_x,
            h_z,
            n,
            k,
            logical_x,
            logical_z,
            d_upper: None,
        })
    }

    pub fn h_x(&self) -> &SparseGf2Matrix {
        &self.h_x
    }

    pub fn h_z(&self) -> &SparseGf2Matrix {
        &self.h_z
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `k x n` matrix of X-logical representatives.
    pub fn logical_x(&self) -> &BitMatrix {
        &self.logical_x
    }

    /// `k x n` matrix of Z-logical representatives, symplectically paired so
    /// that `logical_x * logical_z^T = I`.
    pub fn logical_z(&self) -> &BitMatrix {
        &self.logical_z
    }

    pub fn d_upper(&self) -> Option<u32> {
        self.d_upper
    }

    pub fn set_d_upper(&mut self, d: Option<u32>) {
        self.d_upper = d;
    }
}

/// Builds the truncated (3 block-row) check matrices for `spec`, validates CSS
/// orthogonality blockwise, and derives parameters and logical bases.
pub fn build_check_matrices(spec: &CodeSpec) -> Result<CssCode> {
    check_block_orthogonality(spec)?;
    let (h_x, h_z) = check_matrices_sparse(spec, ACTIVE_ROWS);
    CssCode::from_orthogonal(h_x, h_z)
}

/// The full `6 x 12` parent matrices; the first three block rows equal the
/// truncated matrices.
pub fn build_parent_matrices(spec: &CodeSpec) -> (SparseGf2Matrix, SparseGf2Matrix) {
    check_matrices_sparse(spec, 6)
}

fn check_matrices_sparse(spec: &CodeSpec, block_rows: usize) -> (SparseGf2Matrix, SparseGf2Matrix) {
    let p = spec.p() as usize;
    let n = BLOCK_COLS * p;
    let mut hx_rows = Vec::with_capacity(block_rows * p);
    let mut hz_rows = Vec::with_capacity(block_rows * p);
    for rb in 0..block_rows {
        for rr in 0..p as u64 {
            let mut xrow = Vec::with_capacity(BLOCK_COLS);
            let mut zrow = Vec::with_capacity(BLOCK_COLS);
            for cb in 0..BLOCK_COLS {
                // H_X block (rb, cb): F_{cb-rb} for cb<6, else G_{cb-6-rb};
                // row rr of P(f) has its 1 at column f^{-1}(rr)
                let xf = if cb < 6 {
                    spec.f[(cb + 6 - rb % 6) % 6]
                } else {
                    spec.g[(cb - 6 + 6 - rb % 6) % 6]
                };
                xrow.push((cb * p) as u32 + xf.inverse().eval_unchecked(rr) as u32);
                // H_Z block (rb, cb): G^T_{rb-cb} for cb<6, else F^T_{rb-(cb-6)};
                // row rr of P(g)^T has its 1 at column g(rr)
                let zf = if cb < 6 {
                    spec.g[(rb + 6 - cb % 6) % 6]
                } else {
                    spec.f[(rb + 6 - (cb - 6) % 6) % 6]
                };
                zrow.push((cb * p) as u32 + zf.eval_unchecked(rr) as u32);
            }
            xrow.sort_unstable();
            zrow.sort_unstable();
            hx_rows.push(xrow);
            hz_rows.push(zrow);
        }
    }
    (
        SparseGf2Matrix::from_rows(hx_rows, n).expect("by construction"),
        SparseGf2Matrix::from_rows(hz_rows, n).expect("by construction"),
    )
}

/// Blockwise orthogonality: for block rows `(r, r')` the product reduces to a
/// GF(2) sum of composed permutation matrices over the sector `t = r' - r`;
/// it vanishes iff every composition appears an even number of times.
fn check_block_orthogonality(spec: &CodeSpec) -> Result<()> {
    for x_block in 0..ACTIVE_ROWS {
        for z_block in 0..ACTIVE_ROWS {
            let t = (z_block + 6 - x_block) % 6;
            if !sector_cancels(spec, t)? {
                return Err(Error::CssOrthogonality { x_block, z_block });
            }
        }
    }
    Ok(())
}

/// Whether the sector-`t` sum of `P(f_d g_e) + P(g_e f_d)` over `d+e = t`
/// cancels over GF(2).
pub fn sector_cancels(spec: &CodeSpec, t: usize) -> Result<bool> {
    let mut counts: std::collections::HashMap<Apm, usize> = std::collections::HashMap::new();
    for d in 0..6 {
        let e = (t + 6 - d) % 6;
        let fg = spec.f[d].compose(&spec.g[e])?;
        let gf = spec.g[e].compose(&spec.f[d])?;
        *counts.entry(fg).or_insert(0) += 1;
        *counts.entry(gf).or_insert(0) += 1;
    }
    Ok(counts.values().all(|c| c % 2 == 0))
}

/// X-logicals in `ker(h_z)` modulo `rowspace(h_x)` and Z-logicals in
/// `ker(h_x)` modulo `rowspace(h_z)`, symplectically paired.
pub fn logical_basis(code: &CssCode) -> (BitMatrix, BitMatrix) {
    (code.logical_x.clone(), code.logical_z.clone())
}

fn logical_basis_of(
    h_x: &SparseGf2Matrix,
    h_z: &SparseGf2Matrix,
) -> Result<(BitMatrix, BitMatrix, usize)> {
    let n = h_x.cols();
    let bx = h_x.to_bitmatrix();
    let bz = h_z.to_bitmatrix();
    let rank_x = bx.rank();
    let rank_z = bz.rank();
    if rank_x + rank_z > n {
        return Err(Error::RankInconsistency(format!(
            "rank_x {rank_x} + rank_z {rank_z} exceeds n {n}"
        )));
    }
    let k = n - rank_x - rank_z;

    let pick_logicals = |kernel_of: &BitMatrix, stabilizers: &BitMatrix, rank_stab: usize| {
        // reduce kernel vectors against the stabilizer row space; vectors with
        // nonzero residue are logicals, and adding each accepted residue keeps
        // the picks independent
        let ker = kernel_of.kernel_basis();
        let mut elim = stabilizers.clone();
        let mut elim_rows: Vec<BitVec> = Vec::new();
        {
            let pivots = elim.row_reduce();
            for (i, _c) in pivots.iter().enumerate() {
                elim_rows.push(elim.row_vec(i));
            }
            debug_assert_eq!(elim_rows.len(), rank_stab);
        }
        let mut pivot_cols: Vec<usize> = elim_rows
            .iter()
            .map(|r| r.iter_ones().next().unwrap())
            .collect();
        let mut logicals: Vec<BitVec> = Vec::new();
        for i in 0..ker.rows() {
            let mut v = ker.row_vec(i);
            let mut j = 0;
            while j < elim_rows.len() {
                if v.get(pivot_cols[j]) {
                    v.xor_assign(&elim_rows[j]);
                }
                j += 1;
            }
            if !v.is_zero() {
                let pc = v.iter_ones().next().unwrap();
                logicals.push(ker.row_vec(i));
                elim_rows.push(v);
                pivot_cols.push(pc);
            }
        }
        logicals
    };

    let lx = pick_logicals(&bz, &bx, rank_x);
    let lz = pick_logicals(&bx, &bz, rank_z);
    if lx.len() != k || lz.len() != k {
        return Err(Error::RankInconsistency(format!(
            "found {} X / {} Z logicals, expected k = {k}",
            lx.len(),
            lz.len()
        )));
    }
    if k == 0 {
        return Ok((BitMatrix::zeros(0, n), BitMatrix::zeros(0, n), 0));
    }
    let lx = BitMatrix::from_rows(&lx);
    let lz = BitMatrix::from_rows(&lz);
    // symplectic pairing: with M = Lx Lz^T, replace Lz by (M^-1)^T Lz so that
    // Lx Lz'^T = I
    let m = lx.mul_transpose(&lz);
    let minv = m
        .inverse()
        .map_err(|_| Error::RankInconsistency("pairing matrix is singular".into()))?;
    let mut lz_paired_rows = Vec::with_capacity(k);
    for i in 0..k {
        let mut acc = BitVec::zeros(n);
        for j in 0..k {
            // ((M^-1)^T)_{ij} = (M^-1)_{ji}
            if minv.get(j, i) {
                acc.xor_assign(&lz.row_vec(j));
            }
        }
        lz_paired_rows.push(acc);
    }
    let lz = BitMatrix::from_rows(&lz_paired_rows);
    debug_assert_eq!(lx.mul_transpose(&lz), BitMatrix::identity(k));
    Ok((lx, lz, k))
}

/// Shortest cycle length in the bipartite Tanner graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Girth {
    Finite(u32),
    /// The Tanner graph is a forest.
    Infinite,
}

/// Shortest-cycle search by BFS from every vertex (checks and bits).
pub fn tanner_girth(m: &SparseGf2Matrix) -> Girth {
    let nch = m.rows();
    let nbit = m.cols();
    let nv = nch + nbit;
    let t = m.transpose();
    let neigh = |v: usize, out: &mut Vec<usize>| {
        out.clear();
        if v < nch {
            out.extend(m.row(v).iter().map(|&c| nch + c as usize));
        } else {
            out.extend(t.row(v - nch).iter().map(|&r| r as usize));
        }
    };
    let mut best: Option<u32> = None;
    let mut dist = vec![u32::MAX; nv];
    let mut parent = vec![usize::MAX; nv];
    let mut queue = std::collections::VecDeque::new();
    let mut nb = Vec::new();
    for root in 0..nv {
        if best == Some(4) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        queue.clear();
        dist[root] = 0;
        parent[root] = usize::MAX;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            if let Some(b) = best {
                if dist[u] >= b / 2 {
                    break;
                }
            }
            neigh(u, &mut nb);
            for i in 0..nb.len() {
                let w = nb[i];
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = u;
                    queue.push_back(w);
                } else if parent[u] != w && parent[w] != u {
                    let c = dist[u] + dist[w] + 1;
                    if best.map_or(true, |b| c < b) {
                        best = Some(c);
                    }
                }
            }
        }
    }
    match best {
        Some(b) => Girth::Finite(b),
        None => Girth::Infinite,
    }
}
