//! Multiple-choice multidimensional knapsack solvers.
//!
//! [`RestrictedRange`] optimizes over a value-independent family of
//! allocations: a few users get fixed demands from a fixed universe, the rest
//! get integer multiples of a per-cell unit vector. [`dp_exact_2d`] is the
//! exact-fit integer DP used by the bi-criteria FPTAS.

use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::{ceil_div, int, Epsilon, Rational, ValueScale};

/// Default cap on the number of DP states summed over all range cells.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MdkpEntry {
    pub coords: Vec<Rational>,
    pub value: Rational,
}

/// Users with nonnegative `m`-dimensional demands and a capacity vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MdkpInstance {
    capacity: Vec<Rational>,
    users: Vec<Vec<MdkpEntry>>,
}

fn le(a: &[Rational], b: &[Rational]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn add_into(acc: &mut [Rational], x: &[Rational]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

impl MdkpInstance {
    /// Validates dimensions and signs; a zero entry is appended to any user
    /// without one.
    pub fn new(capacity: Vec<Rational>, users: Vec<Vec<MdkpEntry>>) -> Result<Self> {
        let m = capacity.len();
        if m == 0 || capacity.iter().any(|c| c.is_negative()) {
            return Err(Error::InvalidInput("capacity must be a nonempty nonnegative vector".into()));
        }
        let mut out = Vec::with_capacity(users.len());
        for (k, mut entries) in users.into_iter().enumerate() {
            for e in &entries {
                if e.coords.len() != m || e.coords.iter().any(|x| x.is_negative()) || e.value.is_negative() {
                    return Err(Error::InvalidInput(format!("user {k}: bad entry")));
                }
            }
            if !entries.iter().any(|e| e.coords.iter().all(Zero::is_zero)) {
                entries.push(MdkpEntry {
                    coords: vec![Rational::zero(); m],
                    value: Rational::zero(),
                });
            }
            out.push(entries);
        }
        Ok(MdkpInstance { capacity, users: out })
    }

    pub fn capacity(&self) -> &[Rational] {
        &self.capacity
    }

    pub fn users(&self) -> &[Vec<MdkpEntry>] {
        &self.users
    }

    pub fn n(&self) -> usize {
        self.users.len()
    }

    pub fn dims(&self) -> usize {
        self.capacity.len()
    }

    /// Best value among user `k`'s entries dominated componentwise by `x`.
    pub fn extended_value(&self, k: usize, x: &[Rational]) -> Rational {
        self.users[k]
            .iter()
            .filter(|e| le(&e.coords, x))
            .map(|e| &e.value)
            .max()
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Lowest-index entry attaining [`Self::extended_value`].
    pub fn best_entry(&self, k: usize, x: &[Rational]) -> usize {
        let mut best: Option<(usize, &Rational)> = None;
        for (i, e) in self.users[k].iter().enumerate() {
            if le(&e.coords, x) && best.is_none_or(|(_, v)| e.value > *v) {
                best = Some((i, &e.value));
            }
        }
        best.map(|b| b.0).expect("zero entry always qualifies")
    }

    /// Sorted, deduplicated list of all declared coordinate vectors.
    pub fn universe(&self) -> Vec<Vec<Rational>> {
        let mut u: Vec<Vec<Rational>> = self.users.iter().flatten().map(|e| e.coords.clone()).collect();
        u.sort();
        u.dedup();
        u
    }

    fn value_scale(&self) -> ValueScale {
        ValueScale::new(self.users.iter().flatten().map(|e| &e.value))
    }
}

/// Unit vector `(c - sum_fixed) / (n - n_fixed)^2`; `None` when every user
/// is fixed.
pub fn unit_vector(fixed_sum: &[Rational], c: &[Rational], n: usize, n_fixed: usize) -> Result<Option<Vec<Rational>>> {
    if !le(fixed_sum, c) {
        return Err(Error::Infeasible("fixed demands exceed the capacity".into()));
    }
    if n_fixed >= n {
        return Ok(None);
    }
    let free = (n - n_fixed) as i64;
    let denom = int(free * free);
    Ok(Some(c.iter().zip(fixed_sum).map(|(ci, fi)| (ci - fi) / &denom).collect()))
}

/// One cell of the range: users in `fixed_users` receive the universe
/// vectors `fixed`, everyone else receives `r_k * unit` with
/// `sum_k r_k <= units` in each dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RangeCell {
    pub fixed_users: Vec<usize>,
    pub fixed: Vec<usize>,
    pub unit: Option<Vec<Rational>>,
    pub units: u32,
}

impl RangeCell {
    fn free_users(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|k| !self.fixed_users.contains(k)).collect()
    }
}

/// Chosen element of the range.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RangeSolution {
    pub welfare: Rational,
    pub cell: usize,
    /// Per user: the allocated `m`-vector.
    pub bundles: Vec<Vec<Rational>>,
    /// Per user: unit counts for free users, `None` for fixed ones.
    pub units: Vec<Option<Vec<u32>>>,
    /// Per user: best declared entry dominated by the bundle.
    pub entries: Vec<usize>,
}

/// Value-independent restricted range over a fixed universe of demand
/// vectors.
#[derive(Clone, Debug)]
pub struct RestrictedRange {
    n: usize,
    capacity: Vec<Rational>,
    universe: Vec<Vec<Rational>>,
    cells: Vec<RangeCell>,
    states: u128,
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Odometer step over `base`-ary digits, last digit fastest. Returns `false`
/// after the final combination.
fn advance(idx: &mut [usize], base: usize) -> bool {
    for p in (0..idx.len()).rev() {
        idx[p] += 1;
        if idx[p] < base {
            return true;
        }
        idx[p] = 0;
    }
    false
}

fn pow_u128(base: u128, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base))
}

/// Values on the integer scale of one optimization call.
struct Scaled {
    values: Vec<Vec<i128>>,
    fixed: Vec<Vec<i128>>,
}

/// Per-user DP options in one cell: unit counts, their flattened state
/// offset, and scaled value.
struct CellOption {
    r: Vec<u32>,
    offset: usize,
    value: i128,
}

impl RestrictedRange {
    /// Enumerates every cell with at most `m / eps` fixed users. Fails with
    /// `BudgetExceeded` when the DP state count over all cells passes `budget`.
    pub fn new(n: usize, capacity: Vec<Rational>, universe: Vec<Vec<Rational>>, eps: &Epsilon, budget: u128) -> Result<Self> {
        let m = capacity.len();
        let mut universe = universe;
        universe.push(vec![Rational::zero(); m]);
        universe.sort();
        universe.dedup();
        if universe.iter().any(|u| u.len() != m || u.iter().any(|x| x.is_negative())) {
            return Err(Error::InvalidInput("universe vectors must be nonnegative with the capacity's dimension".into()));
        }
        let max_fixed = (m * eps.q() as usize).min(n);
        let mut cells = Vec::new();
        let mut states: u128 = 0;
        for size in 0..=max_fixed {
            let free = (n - size) as u128;
            let per_cell = if size == n {
                1
            } else {
                free.saturating_mul(pow_u128(free * free + 1, m))
            };
            for users in subsets_of_size(n, size) {
                let mut idx = vec![0usize; size];
                loop {
                    let mut sum = vec![Rational::zero(); m];
                    for &i in &idx {
                        add_into(&mut sum, &universe[i]);
                    }
                    if le(&sum, &capacity) {
                        states = states.saturating_add(per_cell);
                        if states > budget {
                            return Err(Error::BudgetExceeded { needed: states, budget });
                        }
                        let unit = unit_vector(&sum, &capacity, n, size)?;
                        cells.push(RangeCell {
                            fixed_users: users.clone(),
                            fixed: idx.clone(),
                            unit,
                            units: ((n - size) * (n - size)) as u32,
                        });
                    }
                    if !advance(&mut idx, universe.len()) {
                        break;
                    }
                }
            }
        }
        Ok(RestrictedRange {
            n,
            capacity,
            universe,
            cells,
            states,
        })
    }

    pub fn cells(&self) -> &[RangeCell] {
        &self.cells
    }

    pub fn universe(&self) -> &[Vec<Rational>] {
        &self.universe
    }

    pub fn capacity(&self) -> &[Rational] {
        &self.capacity
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total DP states over all cells.
    pub fn state_count(&self) -> u128 {
        self.states
    }

    fn check(&self, inst: &MdkpInstance) -> Result<()> {
        if inst.n() != self.n || inst.capacity() != self.capacity.as_slice() {
            return Err(Error::InvalidInput("instance does not match the range".into()));
        }
        Ok(())
    }

    fn options(&self, inst: &MdkpInstance, vals: &Scaled, cell: &RangeCell, k: usize) -> Vec<CellOption> {
        let unit = cell.unit.as_ref().expect("free users need a unit vector");
        let radix = cell.units as usize + 1;
        // smallest unit counts covering each entry, or None when out of reach
        let need: Vec<Option<Vec<u32>>> = inst.users()[k]
            .iter()
            .map(|e| {
                e.coords
                    .iter()
                    .zip(unit)
                    .map(|(x, b)| {
                        if x.is_zero() {
                            Some(0)
                        } else if b.is_zero() {
                            None
                        } else {
                            ceil_div(x, b).to_u32().filter(|&v| v <= cell.units)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut out: Vec<CellOption> = Vec::new();
        for r in need.iter().flatten() {
            if out.iter().any(|o| &o.r == r) {
                continue;
            }
            let value = need
                .iter()
                .zip(&vals.values[k])
                .filter(|(n, _)| n.as_ref().is_some_and(|n| n.iter().zip(r).all(|(a, b)| a <= b)))
                .map(|(_, &v)| v)
                .max()
                .unwrap_or(0);
            let offset = r.iter().fold(0usize, |acc, &ri| acc * radix + ri as usize);
            out.push(CellOption { r: r.clone(), offset, value });
        }
        out.sort_by(|a, b| a.r.cmp(&b.r));
        out
    }

    /// Suffix tables: `tables[j][s]` is the best value of free users
    /// `j..` with remaining units `s`.
    fn cell_tables(&self, opts: &[Vec<CellOption>], units: u32, m: usize) -> Vec<Vec<i128>> {
        let radix = units as usize + 1;
        let size = radix.pow(m as u32);
        let mut tables = vec![vec![0i128; size]; opts.len() + 1];
        for j in (0..opts.len()).rev() {
            let (head, tail) = tables.split_at_mut(j + 1);
            let next = &tail[0];
            let cur = &mut head[j];
            let mut digits = vec![0u32; m];
            for s in 0..size {
                if s > 0 {
                    for d in digits.iter_mut().rev() {
                        *d += 1;
                        if *d <= units {
                            break;
                        }
                        *d = 0;
                    }
                }
                let mut best = i128::MIN;
                for o in &opts[j] {
                    if o.r.iter().zip(&digits).all(|(a, b)| a <= b) {
                        let v = o.value + next[s - o.offset];
                        if v > best {
                            best = v;
                        }
                    }
                }
                cur[s] = best;
            }
        }
        tables
    }

    /// Scaled entry values and, per user, the extended value of every
    /// universe vector.
    fn scaled(&self, inst: &MdkpInstance) -> Result<Scaled> {
        let scale = inst.value_scale();
        let mut values = Vec::with_capacity(self.n);
        let mut fixed = Vec::with_capacity(self.n);
        for k in 0..self.n {
            values.push(inst.users()[k].iter().map(|e| scale.units(&e.value)).collect::<Result<Vec<_>>>()?);
            fixed.push(
                self.universe
                    .iter()
                    .map(|u| scale.units(&inst.extended_value(k, u)))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(Scaled { values, fixed })
    }

    fn cell_welfare(&self, inst: &MdkpInstance, vals: &Scaled, cell: &RangeCell) -> i128 {
        let fixed: i128 = cell.fixed_users.iter().zip(&cell.fixed).map(|(&k, &i)| vals.fixed[k][i]).sum();
        if cell.unit.is_none() {
            return fixed;
        }
        let free = cell.free_users(self.n);
        let opts: Vec<Vec<CellOption>> = free.iter().map(|&k| self.options(inst, vals, cell, k)).collect();
        let tables = self.cell_tables(&opts, cell.units, self.capacity.len());
        fixed + tables[0][tables[0].len() - 1]
    }

    fn reconstruct(&self, inst: &MdkpInstance, vals: &Scaled, index: usize) -> Result<RangeSolution> {
        let cell = &self.cells[index];
        let m = self.capacity.len();
        let mut bundles = vec![Vec::new(); self.n];
        let mut units = vec![None; self.n];
        for (&k, &i) in cell.fixed_users.iter().zip(&cell.fixed) {
            bundles[k] = self.universe[i].clone();
        }
        if let Some(unit) = &cell.unit {
            let free = cell.free_users(self.n);
            let opts: Vec<Vec<CellOption>> = free.iter().map(|&k| self.options(inst, vals, cell, k)).collect();
            let tables = self.cell_tables(&opts, cell.units, m);
            let radix = cell.units as usize + 1;
            let mut s = tables[0].len() - 1;
            let mut rem = vec![cell.units; m];
            for (j, &k) in free.iter().enumerate() {
                let target = tables[j][s];
                let o = opts[j]
                    .iter()
                    .find(|o| o.r.iter().zip(&rem).all(|(a, b)| a <= b) && o.value + tables[j + 1][s - o.offset] == target)
                    .expect("optimal option exists");
                s -= o.offset;
                for (x, y) in rem.iter_mut().zip(&o.r) {
                    *x -= y;
                }
                debug_assert_eq!(s, rem.iter().fold(0usize, |acc, &x| acc * radix + x as usize));
                bundles[k] = o.r.iter().zip(unit).map(|(&ri, b)| int(ri as i64) * b).collect();
                units[k] = Some(o.r.clone());
            }
        }
        let entries = (0..self.n).map(|k| inst.best_entry(k, &bundles[k])).collect();
        let welfare = (0..self.n).fold(Rational::zero(), |acc, k| acc + inst.extended_value(k, &bundles[k]));
        Ok(RangeSolution {
            welfare,
            cell: index,
            bundles,
            units,
            entries,
        })
    }

    /// Welfare-maximizing element of the range; ties go to the earliest cell
    /// and, within it, to lexicographically smallest unit vectors.
    pub fn optimize(&self, inst: &MdkpInstance) -> Result<RangeSolution> {
        self.optimize_with(inst, true)
    }

    pub fn optimize_with(&self, inst: &MdkpInstance, parallel: bool) -> Result<RangeSolution> {
        self.check(inst)?;
        let vals = self.scaled(inst)?;
        let best = if parallel {
            self.cells
                .par_iter()
                .enumerate()
                .map(|(i, c)| (self.cell_welfare(inst, &vals, c), i))
                .reduce(|| (i128::MIN, usize::MAX), better)
        } else {
            self.cells
                .iter()
                .enumerate()
                .map(|(i, c)| (self.cell_welfare(inst, &vals, c), i))
                .fold((i128::MIN, usize::MAX), better)
        };
        if best.1 == usize::MAX {
            return Err(Error::EmptyRange);
        }
        self.reconstruct(inst, &vals, best.1)
    }
}

fn better(a: (i128, usize), b: (i128, usize)) -> (i128, usize) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Convenience wrapper: range over the instance's own universe.
pub fn optimize_restricted_range(inst: &MdkpInstance, eps: &Epsilon) -> Result<RangeSolution> {
    RestrictedRange::new(inst.n(), inst.capacity().to_vec(), inst.universe(), eps, DEFAULT_BUDGET)?.optimize(inst)
}

/// An option of the exact-fit DP: integer demand and integer value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FitOption {
    pub demand: (usize, usize),
    pub value: i128,
}

/// Exact-fit table over user prefixes and capacity pairs.
#[derive(Clone, Debug)]
pub struct DpTable {
    n: usize,
    c1: usize,
    c2: usize,
    values: Vec<i128>,
    parent: Vec<u8>,
    options: Vec<Vec<FitOption>>,
}

const UNREACHABLE: i128 = i128::MIN;

impl DpTable {
    fn idx(&self, k: usize, a: usize, b: usize) -> usize {
        (k * (self.c1 + 1) + a) * (self.c2 + 1) + b
    }

    pub fn users(&self) -> usize {
        self.n
    }

    pub fn caps(&self) -> (usize, usize) {
        (self.c1, self.c2)
    }

    /// Best value of a choice from the first `k` users whose demands sum to
    /// exactly `(a, b)`, or `None` if no choice fits exactly.
    pub fn value(&self, k: usize, a: usize, b: usize) -> Option<i128> {
        if k > self.n || a > self.c1 || b > self.c2 {
            return None;
        }
        let v = self.values[self.idx(k, a, b)];
        (v != UNREACHABLE).then_some(v)
    }

    /// All reachable `(a, b, value)` cells of the full table.
    pub fn reachable(&self) -> Vec<(usize, usize, i128)> {
        let mut out = Vec::new();
        for a in 0..=self.c1 {
            for b in 0..=self.c2 {
                if let Some(v) = self.value(self.n, a, b) {
                    out.push((a, b, v));
                }
            }
        }
        out
    }
}

/// Multiple-choice exact-fit DP: each user contributes nothing or one of its
/// options. Ties prefer skipping, then the lowest option index.
pub fn dp_exact_2d(users: &[Vec<FitOption>], c1: usize, c2: usize) -> Result<DpTable> {
    if users.iter().any(|u| u.len() > u8::MAX as usize - 1) {
        return Err(Error::InvalidInput("too many options for one user".into()));
    }
    let n = users.len();
    let layer = (c1 + 1) * (c2 + 1);
    let mut values = vec![UNREACHABLE; (n + 1) * layer];
    let mut parent = vec![0u8; (n + 1) * layer];
    values[0] = 0;
    for k in 1..=n {
        let (prev, cur) = values.split_at_mut(k * layer);
        let prev = &prev[(k - 1) * layer..];
        let cur = &mut cur[..layer];
        let par = &mut parent[k * layer..(k + 1) * layer];
        cur.copy_from_slice(prev);
        for (oi, o) in users[k - 1].iter().enumerate() {
            let (da, db) = o.demand;
            if da > c1 || db > c2 {
                continue;
            }
            for a in da..=c1 {
                for b in db..=c2 {
                    let from = prev[(a - da) * (c2 + 1) + (b - db)];
                    if from == UNREACHABLE {
                        continue;
                    }
                    let v = from + o.value;
                    let i = a * (c2 + 1) + b;
                    if v > cur[i] {
                        cur[i] = v;
                        par[i] = (oi + 1) as u8;
                    }
                }
            }
        }
    }
    Ok(DpTable {
        n,
        c1,
        c2,
        values,
        parent,
        options: users.to_vec(),
    })
}

/// Per user: the chosen option index, or `None` for no demand.
pub fn extract_choices(table: &DpTable, a: usize, b: usize) -> Result<Vec<Option<usize>>> {
    if a > table.c1 || b > table.c2 || table.value(table.n, a, b).is_none() {
        return Err(Error::NoExactFit(a, b));
    }
    let mut out = vec![None; table.n];
    let (mut a, mut b) = (a, b);
    for k in (1..=table.n).rev() {
        let p = table.parent[table.idx(k, a, b)];
        if p > 0 {
            let oi = p as usize - 1;
            let (da, db) = table.options[k - 1][oi].demand;
            a -= da;
            b -= db;
            out[k - 1] = Some(oi);
        }
    }
    debug_assert_eq!((a, b), (0, 0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    fn opt(a: usize, b: usize, v: i128) -> FitOption {
        FitOption { demand: (a, b), value: v }
    }

    #[test]
    fn exact_fit_examples() {
        let t = dp_exact_2d(&[vec![opt(2, 1, 7)]], 3, 3).unwrap();
        assert_eq!(t.value(1, 2, 1), Some(7));
        assert_eq!(t.value(1, 1, 1), None);
        let t = dp_exact_2d(&[vec![opt(1, 1, 5)], vec![opt(2, 1, 4)]], 4, 4).unwrap();
        assert_eq!(t.value(2, 3, 2), Some(9));
        for k in 0..=2 {
            assert_eq!(t.value(k, 0, 0), Some(0));
        }
        assert_eq!(extract_choices(&t, 3, 2).unwrap(), vec![Some(0), Some(0)]);
        assert_eq!(extract_choices(&t, 0, 0).unwrap(), vec![None, None]);
        assert_eq!(extract_choices(&t, 4, 4), Err(Error::NoExactFit(4, 4)));
    }

    #[test]
    fn unit_vector_examples() {
        let c = vec![int(10), int(10)];
        assert_eq!(unit_vector(&[int(2), int(2)], &c, 4, 2).unwrap(), Some(vec![int(2), int(2)]));
        assert_eq!(
            unit_vector(&[int(0), int(0)], &[int(1), int(1)], 2, 0).unwrap(),
            Some(vec![rat(1, 4), rat(1, 4)])
        );
        assert_eq!(unit_vector(&[int(2), int(3)], &[int(6), int(3)], 3, 1).unwrap(), Some(vec![int(1), int(0)]));
        assert_eq!(unit_vector(&[int(1), int(1)], &c, 2, 2).unwrap(), None);
        assert!(unit_vector(&[int(11), int(0)], &c, 3, 1).is_err());
    }

    fn entry(coords: &[i64], v: i64) -> MdkpEntry {
        MdkpEntry {
            coords: coords.iter().map(|&x| int(x)).collect(),
            value: int(v),
        }
    }

    #[test]
    fn single_user_gets_best_feasible_demand() {
        let inst = MdkpInstance::new(vec![int(5)], vec![vec![entry(&[3], 4), entry(&[5], 9), entry(&[6], 20)]]).unwrap();
        let sol = optimize_restricted_range(&inst, &Epsilon::new(4).unwrap()).unwrap();
        assert_eq!(sol.welfare, int(9));
        assert_eq!(sol.entries[0], 1);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let users = vec![
            vec![entry(&[2, 1], 5), entry(&[1, 3], 6)],
            vec![entry(&[3, 3], 7)],
            vec![entry(&[1, 1], 2), entry(&[4, 0], 4)],
        ];
        let inst = MdkpInstance::new(vec![int(5), int(4)], users).unwrap();
        let range = RestrictedRange::new(3, inst.capacity().to_vec(), inst.universe(), &Epsilon::new(4).unwrap(), DEFAULT_BUDGET).unwrap();
        let a = range.optimize_with(&inst, true).unwrap();
        let b = range.optimize_with(&inst, false).unwrap();
        assert_eq!(a, b);
        let mut total = vec![int(0), int(0)];
        for bundle in &a.bundles {
            add_into(&mut total, bundle);
        }
        assert!(le(&total, inst.capacity()));
    }

    #[test]
    fn budget_is_enforced() {
        let inst = MdkpInstance::new(vec![int(5), int(5), int(5)], vec![vec![entry(&[1, 1, 1], 1)]; 6]).unwrap();
        let r = RestrictedRange::new(6, inst.capacity().to_vec(), inst.universe(), &Epsilon::new(4).unwrap(), 1000);
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }
}
