//! Exact arithmetic and group theory for affine permutations of `Z_P`.
//!
//! An [`Apm`] is the map `x -> a*x + b (mod P)` with `gcd(a, P) = 1`. These
//! maps form the affine group of `Z_P`; the code constructions in this crate
//! are built from twelve of them, and the move compiler relies on the orbit
//! and commutation structure worked out here.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Affine permutation `x -> a*x + b (mod modulus)` in canonical form:
/// `0 <= a, b < modulus` and `gcd(a, modulus) = 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Apm {
    a: u64,
    b: u64,
    modulus: u64,
}

impl std::fmt::Debug for Apm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}x+{} mod {})", self.a, self.b, self.modulus)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Modular inverse by extended Euclid; `None` when `gcd(a, m) != 1`.
fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

fn euler_phi(mut n: u64) -> u64 {
    let mut phi = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            phi -= phi / p;
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        phi -= phi / n;
    }
    phi
}

impl Apm {
    /// Canonicalizes the coefficients into `[0, modulus)` and checks invertibility.
    pub fn new(a: u64, b: u64, modulus: u64) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::BadConfig("modulus must be positive".into()));
        }
        let a = a % modulus;
        let b = b % modulus;
        if gcd(a.max(1), modulus) != 1 && !(modulus == 1) {
            return Err(Error::NotInvertible { a, modulus });
        }
        // a % 1 == 0 is the canonical identity coefficient on Z_1.
        if modulus > 1 && gcd(a, modulus) != 1 {
            return Err(Error::NotInvertible { a, modulus });
        }
        Ok(Apm { a, b, modulus })
    }

    pub fn identity(modulus: u64) -> Self {
        Apm {
            a: 1 % modulus.max(1),
            b: 0,
            modulus,
        }
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.modulus)
    }

    /// `a*x + b (mod P)`; `x` must lie in `[0, P)`.
    pub fn evaluate(&self, x: u64) -> Result<u64> {
        if x >= self.modulus {
            return Err(Error::OutOfRange {
                x,
                modulus: self.modulus,
            });
        }
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: u64) -> u64 {
        ((self.a as u128 * x as u128 + self.b as u128) % self.modulus as u128) as u64
    }

    /// Composition `self ∘ g`, i.e. `x -> self(g(x))`.
    pub fn compose(&self, g: &Apm) -> Result<Apm> {
        if self.modulus != g.modulus {
            return Err(Error::ModulusMismatch(self.modulus, g.modulus));
        }
        let m = self.modulus as u128;
        let a = (self.a as u128 * g.a as u128) % m;
        let b = (self.a as u128 * g.b as u128 + self.b as u128) % m;
        Ok(Apm {
            a: a as u64,
            b: b as u64,
            modulus: self.modulus,
        })
    }

    pub fn inverse(&self) -> Apm {
        let ai = mod_inverse(self.a, self.modulus).expect("type invariant: a invertible");
        let m = self.modulus as u128;
        let b = (m - (ai as u128 * self.b as u128) % m) % m;
        Apm {
            a: ai,
            b: b as u64,
            modulus: self.modulus,
        }
    }

    /// Offset condition `(a_f - 1) b_g = (a_g - 1) b_f (mod M)`, equivalent to
    /// `f ∘ g = g ∘ f`.
    pub fn commutes(&self, g: &Apm) -> Result<bool> {
        if self.modulus != g.modulus {
            return Err(Error::ModulusMismatch(self.modulus, g.modulus));
        }
        let m = self.modulus as u128;
        let lhs = ((self.a as u128 + m - 1) % m) * (g.b as u128) % m;
        let rhs = ((g.a as u128 + m - 1) % m) * (self.b as u128) % m;
        Ok(lhs == rhs)
    }

    /// `self^e` for signed exponents (negative powers use the inverse).
    pub fn pow(&self, e: i64) -> Apm {
        let mut base = if e < 0 { self.inverse() } else { *self };
        let mut e = e.unsigned_abs();
        let mut acc = Apm::identity(self.modulus);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base).unwrap();
            }
            base = base.compose(&base).unwrap();
            e >>= 1;
        }
        acc
    }

    /// Cycle decomposition of the permutation.
    pub fn orbit_decomposition(&self) -> OrbitDecomposition {
        let p = self.modulus as usize;
        let mut seen = vec![false; p];
        let mut orbits = Vec::new();
        let mut representatives = Vec::new();
        for start in 0..p as u64 {
            if seen[start as usize] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start as usize] = true;
            let mut x = self.eval_unchecked(start);
            while x != start {
                seen[x as usize] = true;
                cycle.push(x);
                x = self.eval_unchecked(x);
            }
            representatives.push(start);
            orbits.push(cycle);
        }
        OrbitDecomposition {
            orbits,
            representatives,
        }
    }

    /// Smallest `t >= 1` with `self^t = identity`; capped at `P * phi(P)` which
    /// bounds the order of any element of `Aff(Z_P)`.
    pub fn order(&self) -> u64 {
        let cap = self.modulus.saturating_mul(euler_phi(self.modulus)).max(1);
        let mut cur = *self;
        for t in 1..=cap {
            if cur.is_identity() {
                return t;
            }
            cur = self.compose(&cur).unwrap();
        }
        unreachable!("element order exceeds |Aff(Z_P)|")
    }

    /// Splits into the two CRT components modulo `m` and `l`.
    pub fn crt_split(&self, m: u64, l: u64) -> Result<(Apm, Apm)> {
        if m * l != self.modulus || gcd(m, l) != 1 || m == 0 || l == 0 {
            return Err(Error::BadFactorization { m, l });
        }
        Ok((
            Apm::new(self.a % m, self.b % m, m)?,
            Apm::new(self.a % l, self.b % l, l)?,
        ))
    }

    /// Inverse of [`Apm::crt_split`]: the unique map on `Z_{m*l}` reducing to
    /// `fm` mod `m` and `fl` mod `l`.
    pub fn crt_combine(fm: &Apm, fl: &Apm) -> Result<Apm> {
        let (m, l) = (fm.modulus, fl.modulus);
        if gcd(m, l) != 1 {
            return Err(Error::BadFactorization { m, l });
        }
        let p = m * l;
        let li = mod_inverse(l % m, m).expect("coprime") as u128;
        let mi = mod_inverse(m % l, l).expect("coprime") as u128;
        let combine = |rm: u64, rl: u64| -> u64 {
            let t = (rm as u128 * li % m as u128) * l as u128 + (rl as u128 * mi % l as u128) * m as u128;
            (t % p as u128) as u64
        };
        Apm::new(combine(fm.a, fl.a), combine(fm.b, fl.b), p)
    }
}

/// Cycle structure of one APM: the cycles partition `{0, .., P-1}`.
#[derive(Clone, Debug)]
pub struct OrbitDecomposition {
    orbits: Vec<Vec<u64>>,
    representatives: Vec<u64>,
}

impl OrbitDecomposition {
    pub fn orbits(&self) -> &[Vec<u64>] {
        &self.orbits
    }

    pub fn representatives(&self) -> &[u64] {
        &self.representatives
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.orbits.iter().map(|o| o.len()).collect()
    }
}

/// A finite subgroup of `Aff(Z_P)`, stored as its sorted element list.
#[derive(Clone, Debug)]
pub struct ApmGroup {
    modulus: u64,
    generators: Vec<Apm>,
    elements: Vec<Apm>,
}

impl ApmGroup {
    /// Smallest closed set containing the generators, the identity and all
    /// inverses. Errors out once more than `cap` elements are found.
    pub fn closure(generators: &[Apm], cap: usize) -> Result<ApmGroup> {
        let modulus = match generators.first() {
            Some(g) => g.modulus(),
            None => 1,
        };
        for g in generators {
            if g.modulus() != modulus {
                return Err(Error::ModulusMismatch(modulus, g.modulus()));
            }
        }
        let mut gens = generators.to_vec();
        gens.extend(generators.iter().map(Apm::inverse));
        let mut seen: HashSet<Apm> = HashSet::new();
        seen.insert(Apm::identity(modulus));
        let mut frontier = vec![Apm::identity(modulus)];
        while let Some(h) = frontier.pop() {
            for g in &gens {
                let e = g.compose(&h).unwrap();
                if seen.insert(e) {
                    if seen.len() > cap {
                        return Err(Error::ClosureCap(cap));
                    }
                    frontier.push(e);
                }
            }
        }
        let mut elements: Vec<Apm> = seen.into_iter().collect();
        elements.sort();
        Ok(ApmGroup {
            modulus,
            generators: generators.to_vec(),
            elements,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Apm] {
        &self.elements
    }

    pub fn generators(&self) -> &[Apm] {
        &self.generators
    }

    pub fn contains(&self, f: &Apm) -> bool {
        self.elements.binary_search(f).is_ok()
    }

    pub fn is_abelian(&self) -> bool {
        self.elements.iter().enumerate().all(|(i, f)| {
            self.elements[i + 1..]
                .iter()
                .all(|g| f.commutes(g).unwrap())
        })
    }

    /// Elements of this group commuting with `f`.
    pub fn centralizer(&self, f: &Apm) -> Vec<Apm> {
        self.elements
            .iter()
            .filter(|g| g.commutes(f).unwrap())
            .copied()
            .collect()
    }

    /// Full centralizer of `f` inside `Aff(Z_P)` (not restricted to `self`).
    pub fn affine_centralizer(f: &Apm) -> Vec<Apm> {
        let p = f.modulus();
        let mut out = Vec::new();
        for a in 0..p {
            if gcd(a.max(1), p) != 1 && p > 1 {
                continue;
            }
            for b in 0..p {
                let g = Apm { a, b, modulus: p };
                if g.commutes(f).unwrap() {
                    out.push(g);
                }
            }
        }
        out
    }
}

/// An abelian subgroup together with its invariant-factor decomposition
/// `B = Z_{n_1} x ... x Z_{n_r}`.
#[derive(Clone, Debug)]
pub struct AbelianStructure {
    subgroup: ApmGroup,
    invariant_factors: Vec<u64>,
    cyclic_generators: Vec<Apm>,
}

impl AbelianStructure {
    pub fn subgroup(&self) -> &ApmGroup {
        &self.subgroup
    }

    pub fn invariant_factors(&self) -> &[u64] {
        &self.invariant_factors
    }

    pub fn cyclic_generators(&self) -> &[Apm] {
        &self.cyclic_generators
    }

    pub fn rank(&self) -> usize {
        self.invariant_factors.len()
    }

    /// Exponent vector of `f` in the generator basis, if `f` is a member.
    pub fn exponents_of(&self, f: &Apm) -> Option<Vec<u64>> {
        let mut out = None;
        self.for_each_exponent(|exps, el| {
            if el == *f && out.is_none() {
                out = Some(exps.to_vec());
            }
        });
        out
    }

    fn for_each_exponent(&self, mut visit: impl FnMut(&[u64], Apm)) {
        let r = self.invariant_factors.len();
        let mut exps = vec![0u64; r];
        let total: u64 = self.invariant_factors.iter().product::<u64>().max(1);
        let mut current = Apm::identity(self.subgroup.modulus());
        // mixed-radix count; keep partial products so each step is one compose
        let mut partials = vec![current; r + 1];
        visit(&exps, current);
        for _ in 1..total {
            let mut i = r;
            loop {
                i -= 1;
                exps[i] += 1;
                if exps[i] < self.invariant_factors[i] {
                    break;
                }
                exps[i] = 0;
            }
            // recompute partial products from digit i
            for j in i..r {
                let g = self.cyclic_generators[j].pow(exps[j] as i64);
                partials[j + 1] = partials[j].compose(&g).unwrap();
            }
            current = partials[r];
            visit(&exps, current);
        }
    }
}

/// A maximum-cardinality abelian subgroup of `group`, found by greedily
/// closing commuting subsets seeded from every element, with lexicographic
/// `(a, b)` ordering breaking ties among equal-size maxima.
pub fn max_abelian_subgroup(group: &ApmGroup) -> AbelianStructure {
    let els = group.elements();
    let mut best: Option<Vec<Apm>> = None;
    for seed in els {
        let mut sub = ApmGroup::closure(&[*seed], els.len()).unwrap();
        loop {
            let mut grew = false;
            for h in els {
                if sub.contains(h) {
                    continue;
                }
                if sub.elements().iter().all(|x| x.commutes(h).unwrap()) {
                    let mut gens = sub.generators().to_vec();
                    gens.push(*h);
                    sub = ApmGroup::closure(&gens, els.len()).unwrap();
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        let cand = sub.elements().to_vec();
        let better = match &best {
            None => true,
            Some(b) => cand.len() > b.len() || (cand.len() == b.len() && cand < *b),
        };
        if better {
            best = Some(cand);
        }
    }
    let elements = best.unwrap_or_else(|| vec![Apm::identity(group.modulus())]);
    let (invariant_factors, cyclic_generators) = invariant_factor_decomposition(&elements);
    let subgroup = ApmGroup::closure(&cyclic_generators, elements.len().max(1)).unwrap();
    debug_assert_eq!(subgroup.order(), elements.len());
    AbelianStructure {
        subgroup,
        invariant_factors,
        cyclic_generators,
    }
}

/// Builds the [`AbelianStructure`] of a group already known to be abelian.
pub fn abelian_structure(group: &ApmGroup) -> Result<AbelianStructure> {
    if !group.is_abelian() {
        return Err(Error::BadConfig("group is not abelian".into()));
    }
    let (invariant_factors, cyclic_generators) = invariant_factor_decomposition(group.elements());
    Ok(AbelianStructure {
        subgroup: group.clone(),
        invariant_factors,
        cyclic_generators,
    })
}

/// Cayley-table view of a small abelian group, used for the quotient recursion.
struct Table {
    mul: Vec<Vec<u16>>,
    orders: Vec<u32>,
    id: u16,
}

impl Table {
    fn from_elements<T: Clone + Ord>(els: &[T], compose: impl Fn(&T, &T) -> T) -> Table {
        let n = els.len();
        let index = |x: &T| els.binary_search(x).expect("closed") as u16;
        let mut mul = vec![vec![0u16; n]; n];
        for i in 0..n {
            for j in 0..n {
                mul[i][j] = index(&compose(&els[i], &els[j]));
            }
        }
        let id = (0..n as u16)
            .find(|&i| (0..n as u16).all(|j| mul[i as usize][j as usize] == j))
            .expect("identity");
        let mut orders = vec![0u32; n];
        for i in 0..n {
            let mut cur = i as u16;
            let mut t = 1;
            while cur != id {
                cur = mul[cur as usize][i];
                t += 1;
            }
            orders[i] = t;
        }
        Table { mul, orders, id }
    }

    fn n(&self) -> usize {
        self.mul.len()
    }

    fn pow(&self, x: u16, e: u64) -> u16 {
        let mut acc = self.id;
        for _ in 0..e {
            acc = self.mul[acc as usize][x as usize];
        }
        acc
    }

    fn inverse(&self, x: u16) -> u16 {
        (0..self.n() as u16)
            .find(|&y| self.mul[x as usize][y as usize] == self.id)
            .unwrap()
    }

    /// Invariant factors and generator indices (max-order extraction plus
    /// quotient recursion; generators are lifted back with the usual
    /// `h -> h * g1^{-t/m}` correction so that orders are exact).
    fn invariant_factors(&self) -> (Vec<u64>, Vec<u16>) {
        if self.n() == 1 {
            return (vec![], vec![]);
        }
        let g1 = (0..self.n() as u16)
            .max_by_key(|&i| (self.orders[i as usize], std::cmp::Reverse(i)))
            .unwrap();
        let n1 = self.orders[g1 as usize] as u64;
        let mut cyc = vec![self.id];
        let mut cur = g1;
        while cur != self.id {
            cyc.push(cur);
            cur = self.mul[cur as usize][g1 as usize];
        }
        if cyc.len() == self.n() {
            return (vec![n1], vec![g1]);
        }
        // quotient by <g1>: canonical coset representative = minimal index
        let in_cyc = {
            let mut v = vec![false; self.n()];
            for &c in &cyc {
                v[c as usize] = true;
            }
            v
        };
        let _ = in_cyc;
        let coset_rep = |x: u16| -> u16 {
            cyc.iter()
                .map(|&h| self.mul[h as usize][x as usize])
                .min()
                .unwrap()
        };
        let mut reps: Vec<u16> = (0..self.n() as u16).map(coset_rep).collect();
        reps.sort_unstable();
        reps.dedup();
        let qels: Vec<u16> = reps.clone();
        let qtable = Table::from_elements(&qels, |x, y| {
            coset_rep(self.mul[*x as usize][*y as usize])
        });
        let (qfactors, qgens) = qtable.invariant_factors();
        let mut factors = vec![n1];
        let mut gens = vec![g1];
        for (m, qg) in qfactors.iter().zip(qgens) {
            let mut h = qels[qg as usize];
            let hm = self.pow(h, *m);
            // hm lies in <g1>; find t with g1^t = hm, then cancel g1^{t/m}
            let t = cyc.iter().position(|&c| c == hm).expect("hm in <g1>") as u64;
            debug_assert_eq!(t % m, 0, "lifting correction must divide evenly");
            let corr = self.pow(self.inverse(g1), t / m);
            h = self.mul[h as usize][corr as usize];
            debug_assert_eq!(self.pow(h, *m), self.id);
            factors.push(*m);
            gens.push(h);
        }
        (factors, gens)
    }
}

fn invariant_factor_decomposition(elements: &[Apm]) -> (Vec<u64>, Vec<Apm>) {
    let mut els = elements.to_vec();
    els.sort();
    let table = Table::from_elements(&els, |x: &Apm, y: &Apm| x.compose(y).unwrap());
    let (factors, gen_idx) = table.invariant_factors();
    let gens = gen_idx.into_iter().map(|i| els[i as usize]).collect();
    (factors, gens)
}

/// The relabeling `sigma(e_1, .., e_r) = g_1^{e_1} ... g_r^{e_r} (0)` from
/// exponent vectors onto `Z_M`, valid when the subgroup acts regularly.
#[derive(Clone, Debug)]
pub struct ExponentRelabeling {
    factors: Vec<u64>,
    /// mixed-radix index (row-major in exponent digits) -> point of Z_M
    forward: Vec<u64>,
    /// point of Z_M -> mixed-radix index
    backward: Vec<usize>,
}

impl ExponentRelabeling {
    pub fn factors(&self) -> &[u64] {
        &self.factors
    }

    /// `sigma(e)`; exponent digits in the same order as `factors`.
    pub fn apply(&self, exponents: &[u64]) -> u64 {
        self.forward[self.radix_index(exponents)]
    }

    pub fn radix_index(&self, exponents: &[u64]) -> usize {
        let mut idx = 0usize;
        for (e, n) in exponents.iter().zip(&self.factors) {
            idx = idx * (*n as usize) + *e as usize;
        }
        idx
    }

    pub fn exponents_of_point(&self, x: u64) -> Vec<u64> {
        let mut idx = self.backward[x as usize];
        let mut out = vec![0u64; self.factors.len()];
        for i in (0..self.factors.len()).rev() {
            out[i] = (idx % self.factors[i] as usize) as u64;
            idx /= self.factors[i] as usize;
        }
        out
    }

    pub fn point_of_index(&self, idx: usize) -> u64 {
        self.forward[idx]
    }
}

/// Verifies regularity (the orbit of 0 has size `|B| = M`) and returns the
/// bijection; a non-regular action signals that the rigid-shift layout is
/// impossible for this subgroup.
pub fn exponent_relabeling(structure: &AbelianStructure) -> Result<ExponentRelabeling> {
    let m = structure.subgroup().modulus();
    let order = structure.subgroup().order();
    if order as u64 != m {
        return Err(Error::NotRegular { order, modulus: m });
    }
    let mut forward = vec![u64::MAX; order];
    let mut backward = vec![usize::MAX; order];
    let mut seen = 0usize;
    structure.for_each_exponent(|exps, el| {
        let mut idx = 0usize;
        for (e, n) in exps.iter().zip(structure.invariant_factors()) {
            idx = idx * (*n as usize) + *e as usize;
        }
        let x = el.eval_unchecked(0);
        forward[idx] = x;
        if backward[x as usize] == usize::MAX {
            backward[x as usize] = idx;
            seen += 1;
        }
    });
    if seen != order || forward.iter().any(|&x| x == u64::MAX) {
        return Err(Error::NotRegular { order, modulus: m });
    }
    Ok(ExponentRelabeling {
        factors: structure.invariant_factors().to_vec(),
        forward,
        backward,
    })
}
