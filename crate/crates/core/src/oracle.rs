//! Brute-force references: the exact optimum by full enumeration, the
//! optimum of a linear multiple-choice knapsack, and the optimum over an
//! explicitly materialized restricted range.

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdkp::{MdkpInstance, RangeSolution, RestrictedRange};
use crate::model::{Allocation, Instance};
use crate::num::{int, Rational, ValueScale};

/// Default cap on the number of enumerated combinations.
pub const DEFAULT_CAP: u128 = 20_000_000;

fn combinations(sizes: impl IntoIterator<Item = usize>) -> u128 {
    sizes.into_iter().fold(1u128, |acc, s| acc.saturating_mul(s as u128))
}

/// Integer image of an instance: demands and capacity on a common
/// denominator, values on another.
struct Scaled {
    demands: Vec<Vec<(i128, i128)>>,
    values: Vec<Vec<i128>>,
    capacity: i128,
    value_scale: ValueScale,
}

fn scaled(instance: &Instance) -> Result<Scaled> {
    let mut coords: Vec<&Rational> = vec![instance.capacity()];
    for u in instance.users() {
        for e in u.entries() {
            coords.push(&e.demand.re);
            coords.push(&e.demand.im);
        }
    }
    let ds = ValueScale::new(coords);
    let value_scale = ValueScale::new(instance.users().iter().flat_map(|u| u.entries().iter().map(|e| &e.value)));
    let mut demands = Vec::new();
    let mut values = Vec::new();
    for u in instance.users() {
        let mut d = Vec::new();
        let mut v = Vec::new();
        for e in u.entries() {
            d.push((ds.units(&e.demand.re)?, ds.units(&e.demand.im)?));
            v.push(value_scale.units(&e.value)?);
        }
        demands.push(d);
        values.push(v);
    }
    let capacity = ds.units(instance.capacity())?;
    // keep squared sums comfortably inside i128
    let bound = capacity.checked_mul(instance.n().max(1) as i128 + 1).ok_or(Error::Overflow("demands"))?;
    if bound > (1i128 << 55) {
        return Err(Error::Overflow("demands"));
    }
    Ok(Scaled {
        demands,
        values,
        capacity,
        value_scale,
    })
}

/// `(num/den)^2 * cap^2` as an integer pair for the test
/// `den^2 * |sum|^2 <= num^2 * cap^2`.
fn beta_parts(beta: &Rational) -> Result<(i128, i128)> {
    let n = beta.numer().to_i128().ok_or(Error::Overflow("beta"))?;
    let d = beta.denom().to_i128().ok_or(Error::Overflow("beta"))?;
    if n > (1 << 20) || d > (1 << 20) {
        return Err(Error::Overflow("beta"));
    }
    Ok((n * n, d * d))
}

/// Best choices in lexicographic order among combinations whose first
/// user's choice is `first`.
fn best_in_chunk(s: &Scaled, first: usize, bound: i128, den2: i128) -> Option<(i128, Vec<usize>)> {
    let n = s.demands.len();
    let mut idx = vec![0usize; n];
    idx[0] = first;
    let mut best: Option<(i128, Vec<usize>)> = None;
    loop {
        let (mut re, mut im, mut val) = (0i128, 0i128, 0i128);
        for (k, &i) in idx.iter().enumerate() {
            let (a, b) = s.demands[k][i];
            re += a;
            im += b;
            val += s.values[k][i];
        }
        if den2 * (re * re + im * im) <= bound && best.as_ref().is_none_or(|b| val > b.0) {
            best = Some((val, idx.clone()));
        }
        let mut p = n;
        loop {
            if p == 1 {
                return best;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < s.demands[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// Exact maximum welfare over all per-user entry choices with
/// `|sum| <= beta * C`. Ties go to the lexicographically first choice vector.
pub fn brute_force_opt(instance: &Instance, beta: &Rational) -> Result<(Rational, Allocation)> {
    brute_force_opt_capped(instance, beta, DEFAULT_CAP)
}

pub fn brute_force_opt_capped(instance: &Instance, beta: &Rational, cap: u128) -> Result<(Rational, Allocation)> {
    let needed = combinations(instance.users().iter().map(|u| u.entries().len()));
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    if instance.n() == 0 {
        return Ok((Rational::zero(), Allocation::zero(instance)));
    }
    let s = scaled(instance)?;
    let (num2, den2) = beta_parts(beta)?;
    let bound = num2 * s.capacity * s.capacity;
    let chunks: Vec<Option<(i128, Vec<usize>)>> = (0..s.demands[0].len())
        .into_par_iter()
        .map(|first| best_in_chunk(&s, first, bound, den2))
        .collect();
    let mut best: Option<(i128, Vec<usize>)> = None;
    for c in chunks.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| c.0 > b.0) {
            best = Some(c);
        }
    }
    let (val, choice) = best.expect("the all-zero allocation is feasible");
    let alloc = Allocation::from_entries(instance, &choice)?;
    Ok((s.value_scale.to_rational(val), alloc))
}

/// Exact optimum of a linear multiple-choice knapsack: one entry per user,
/// componentwise sum within capacity. Returns the welfare and entry indices.
pub fn brute_force_mdkp(inst: &MdkpInstance, cap: u128) -> Result<(Rational, Vec<usize>)> {
    let needed = combinations(inst.users().iter().map(Vec::len));
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let n = inst.n();
    let mut idx = vec![0usize; n];
    let mut best: Option<(Rational, Vec<usize>)> = None;
    loop {
        let mut sum = vec![Rational::zero(); inst.dims()];
        let mut val = Rational::zero();
        for (k, &i) in idx.iter().enumerate() {
            let e = &inst.users()[k][i];
            for (s, x) in sum.iter_mut().zip(&e.coords) {
                *s += x;
            }
            val += &e.value;
        }
        let fits = sum.iter().zip(inst.capacity()).all(|(s, c)| s <= c);
        if fits && best.as_ref().is_none_or(|b| val > b.0) {
            best = Some((val, idx.clone()));
        }
        let mut p = n;
        loop {
            if p == 0 {
                return Ok(best.expect("the all-zero choice fits"));
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < inst.users()[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// Vectors `r` in `[0, units]^m` in lexicographic order.
fn unit_vectors(m: usize, units: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=units).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Optimum over the range by materializing every element: each cell, then
/// every assignment of unit vectors to free users with per-dimension sums
/// within the unit budget. Same tie-break as the DP.
pub fn brute_force_range_opt(range: &RestrictedRange, inst: &MdkpInstance, cap: u128) -> Result<RangeSolution> {
    if range.cells().is_empty() {
        return Err(Error::EmptyRange);
    }
    let n = range.n();
    let m = range.capacity().len();
    let mut needed: u128 = 0;
    for cell in range.cells() {
        let free = n - cell.fixed_users.len();
        let per_user = (cell.units as u128 + 1).pow(m as u32);
        needed = needed.saturating_add(per_user.saturating_pow(free as u32));
    }
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let mut best: Option<RangeSolution> = None;
    for (ci, cell) in range.cells().iter().enumerate() {
        let mut bundles: Vec<Vec<Rational>> = vec![Vec::new(); n];
        let mut fixed_val = Rational::zero();
        for (&k, &i) in cell.fixed_users.iter().zip(&cell.fixed) {
            bundles[k] = range.universe()[i].clone();
            fixed_val += inst.extended_value(k, &bundles[k]);
        }
        let free: Vec<usize> = (0..n).filter(|k| !cell.fixed_users.contains(k)).collect();
        let unit = cell.unit.clone().unwrap_or_default();
        let vecs = unit_vectors(m, cell.units);
        let mut idx = vec![0usize; free.len()];
        loop {
            let mut ok = true;
            for d in 0..m {
                let s: u32 = idx.iter().map(|&i| vecs[i][d]).sum();
                if s > cell.units {
                    ok = false;
                    break;
                }
            }
            if ok {
                let mut val = fixed_val.clone();
                let mut b = bundles.clone();
                for (j, &k) in free.iter().enumerate() {
                    b[k] = vecs[idx[j]].iter().zip(&unit).map(|(&r, u)| int(r as i64) * u).collect();
                    val += inst.extended_value(k, &b[k]);
                }
                if best.as_ref().is_none_or(|s| val > s.welfare) {
                    let mut units = vec![None; n];
                    for (j, &k) in free.iter().enumerate() {
                        units[k] = Some(vecs[idx[j]].clone());
                    }
                    let entries = (0..n).map(|k| inst.best_entry(k, &b[k])).collect();
                    best = Some(RangeSolution {
                        welfare: val,
                        cell: ci,
                        bundles: b,
                        units,
                        entries,
                    });
                }
            }
            let mut p = free.len();
            let mut done = true;
            while p > 0 {
                p -= 1;
                idx[p] += 1;
                if idx[p] < vecs.len() {
                    done = false;
                    break;
                }
                idx[p] = 0;
            }
            if done {
                break;
            }
        }
    }
    best.ok_or(Error::EmptyRange)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DemandSet;

    fn fixture() -> Instance {
        let users = vec![
            DemandSet::from_ints(1, &[(3, 4, 10)]).unwrap(),
            DemandSet::from_ints(2, &[(4, 3, 10)]).unwrap(),
            DemandSet::from_ints(3, &[(5, 0, 12)]).unwrap(),
        ];
        Instance::new(int(5), users).unwrap()
    }

    #[test]
    fn three_user_fixture() {
        let inst = fixture();
        let (opt, a) = brute_force_opt(&inst, &int(1)).unwrap();
        assert_eq!(opt, int(12));
        assert_eq!(a.entry_indices().unwrap(), vec![1, 1, 0]);
        let (opt2, _) = brute_force_opt(&inst, &int(2)).unwrap();
        assert_eq!(opt2, int(22));
    }

    #[test]
    fn empty_instance() {
        let inst = Instance::new(int(5), vec![]).unwrap();
        let (opt, a) = brute_force_opt(&inst, &int(1)).unwrap();
        assert_eq!(opt, int(0));
        assert!(a.choices().is_empty());
    }

    #[test]
    fn cap_is_enforced() {
        let inst = fixture();
        assert!(matches!(
            brute_force_opt_capped(&inst, &int(1), 4),
            Err(Error::CapExceeded { needed: 8, cap: 4 })
        ));
    }
}
