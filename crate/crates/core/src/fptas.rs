//! Bi-criteria FPTAS: demands are rounded onto an `L`-grid, the total
//! projections per quadrant are guessed, and each guess is solved exactly by
//! an integer DP. Capacity may be exceeded by a factor of at most `1 + 3 eps`
//! while welfare is at least the exact optimum.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdkp::{dp_exact_2d, extract_choices, FitOption};
use crate::model::{extended_value, Allocation, ComplexDemand, Instance, Quadrant};
use crate::num::{ceil_div, floor_div, int, Epsilon, Rational, ValueScale};

/// Cap on DP table cells per quadrant.
const MAX_TABLE: usize = 50_000_000;

/// Grid of the rounding: unit `L` and the guess ranges in units of `L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundingContext {
    capacity: Rational,
    n: usize,
    eps: Epsilon,
    p: Rational,
    l: Rational,
    a_plus: usize,
    a_minus: usize,
    b: usize,
    bound: i128,
}

/// A guessed tuple `(xi_plus, xi_minus, zeta_plus, zeta_minus)` in units of `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GuessTuple {
    pub xi_plus: usize,
    pub xi_minus: usize,
    pub zeta_plus: usize,
    pub zeta_minus: usize,
}

fn to_usize(x: BigInt, what: &'static str) -> Result<usize> {
    x.to_usize().ok_or(Error::Overflow(what))
}

impl RoundingContext {
    /// `L = eps C / (n (P + 1))` with grids up to `C(1+P)`, `C P` and `C`.
    pub fn new(capacity: &Rational, n: usize, eps: &Epsilon, p: &Rational) -> Result<Self> {
        if p < &Rational::one() {
            return Err(Error::InvalidInput("P must be at least 1".into()));
        }
        if !capacity.is_positive() {
            return Err(Error::InvalidInput("capacity must be positive".into()));
        }
        let n_eff = n.max(1);
        let l = eps.value() * capacity / (int(n_eff as i64) * (p + Rational::one()));
        let a_plus = to_usize(ceil_div(&(capacity * (Rational::one() + p)), &l), "grid")?;
        let a_minus = to_usize(ceil_div(&(capacity * p), &l), "grid")?;
        let b = to_usize(ceil_div(capacity, &l), "grid")?;
        let r = (Rational::one() + int(2) * eps.value()) * capacity / &l;
        let bound = (&r * &r).floor().to_integer().to_i128().ok_or(Error::Overflow("grid"))?;
        Ok(RoundingContext {
            capacity: capacity.clone(),
            n,
            eps: *eps,
            p: p.clone(),
            l,
            a_plus,
            a_minus,
            b,
            bound,
        })
    }

    pub fn for_instance(instance: &Instance, eps: &Epsilon, p: &Rational) -> Result<Self> {
        Self::new(instance.capacity(), instance.n(), eps, p)
    }

    pub fn unit(&self) -> &Rational {
        &self.l
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    pub fn eps(&self) -> Epsilon {
        self.eps
    }

    /// Largest index of the `A+`, `A-` and `B` grids.
    pub fn grid_sizes(&self) -> (usize, usize, usize) {
        (self.a_plus, self.a_minus, self.b)
    }

    /// Rounded demand in units of `L`: real part signed, imaginary part
    /// nonnegative.
    pub fn round_units(&self, d: &ComplexDemand) -> (i64, i64) {
        let (re, im) = round_units(d, &self.l);
        (re.to_i64().expect("bounded by the grid"), im.to_i64().expect("bounded by the grid"))
    }

    /// Exact admission test of a guess.
    pub fn admits(&self, g: GuessTuple) -> bool {
        let dx = g.xi_plus as i128 - g.xi_minus as i128;
        let dy = (g.zeta_plus + g.zeta_minus) as i128;
        g.xi_plus <= self.a_plus
            && g.xi_minus <= self.a_minus
            && g.zeta_plus <= self.b
            && g.zeta_minus <= self.b
            && dx * dx + dy * dy <= self.bound
    }

    /// Same test on arbitrary rational projections.
    pub fn admits_values(&self, xi_plus: &Rational, xi_minus: &Rational, zeta_plus: &Rational, zeta_minus: &Rational) -> bool {
        let dx = xi_plus - xi_minus;
        let dy = zeta_plus + zeta_minus;
        let r = (Rational::one() + int(2) * self.eps.value()) * &self.capacity;
        &dx * &dx + &dy * &dy <= &r * &r
    }

    /// Largest `zeta` sum admitted for a real-axis difference, if any.
    fn zeta_limit(&self, xi_plus: usize, xi_minus: usize) -> Option<usize> {
        let dx = xi_plus as i128 - xi_minus as i128;
        let rem = self.bound - dx * dx;
        if rem < 0 {
            return None;
        }
        Some(isqrt(rem) as usize)
    }

    /// Exact number of admitted guess tuples.
    pub fn admitted_guesses(&self) -> u128 {
        let bb = self.b as u128;
        let pairs_within = |s: u128| -> u128 {
            if s <= bb {
                (s + 1) * (s + 2) / 2
            } else if s <= 2 * bb {
                let t = 2 * bb - s;
                (bb + 1) * (bb + 1) - t * (t + 1) / 2
            } else {
                (bb + 1) * (bb + 1)
            }
        };
        let mut total = 0u128;
        for xp in 0..=self.a_plus {
            for xm in 0..=self.a_minus {
                if let Some(s) = self.zeta_limit(xp, xm) {
                    total += pairs_within(s as u128);
                }
            }
        }
        total
    }

    /// The guess count bound `n^4 P^6 / eps^4` with constant 1.
    pub fn guess_bound(&self) -> Rational {
        let n = int(self.n.max(1) as i64);
        let q = int(self.eps.q() as i64);
        let p = &self.p;
        let n2 = &n * &n;
        let p3 = p * p * p;
        let q2 = &q * &q;
        &n2 * &n2 * &p3 * &p3 * &q2 * &q2
    }

    /// Guess tuple of an allocation's rounded demands, split by quadrant.
    pub fn tuple_of(&self, instance: &Instance, a: &Allocation) -> Option<GuessTuple> {
        let (mut xp, mut xm, mut zp, mut zm) = (0i64, 0i64, 0i64, 0i64);
        for k in 0..instance.n() {
            let d = a.demand_of(instance, k);
            let (re, im) = self.round_units(&d);
            if instance.users()[k].quadrant() == Quadrant::NonNegativeRe {
                xp += re;
                zp += im;
            } else {
                xm -= re;
                zm += im;
            }
        }
        let g = GuessTuple {
            xi_plus: usize::try_from(xp).ok()?,
            xi_minus: usize::try_from(xm).ok()?,
            zeta_plus: usize::try_from(zp).ok()?,
            zeta_minus: usize::try_from(zm).ok()?,
        };
        Some(g)
    }
}

fn isqrt(x: i128) -> i128 {
    let mut s = (x as f64).sqrt() as i128;
    while s * s > x {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= x {
        s += 1;
    }
    s
}

fn round_units(d: &ComplexDemand, l: &Rational) -> (BigInt, BigInt) {
    let re = if d.re.is_negative() {
        floor_div(&d.re, l)
    } else {
        ceil_div(&d.re, l)
    };
    (re, ceil_div(&d.im, l))
}

/// Rounds up in magnitude onto the `L`-grid: ceiling on both axes for
/// nonnegative real part, floor on the real axis otherwise.
pub fn round_demand(d: &ComplexDemand, l: &Rational) -> ComplexDemand {
    let (re, im) = round_units(d, l);
    ComplexDemand::new(Rational::from_integer(re) * l, Rational::from_integer(im) * l)
}

/// `true` when rounding every chosen demand keeps the total within
/// `(1 + 2 eps) C`.
pub fn rounded_feasibility_check(instance: &Instance, a: &Allocation, ctx: &RoundingContext) -> bool {
    let total: ComplexDemand = (0..instance.n())
        .map(|k| round_demand(&a.demand_of(instance, k), ctx.unit()))
        .fold(ComplexDemand::zero(), |acc, d| &acc + &d);
    let r = (Rational::one() + int(2) * ctx.eps.value()) * instance.capacity();
    total.norm_sq() <= &r * &r
}

/// Result of the bi-criteria solver.
#[derive(Clone, Debug, PartialEq)]
pub struct FptasSolution {
    pub allocation: Allocation,
    pub welfare: Rational,
    pub tuple: GuessTuple,
    /// Number of admitted guess tuples.
    pub guesses: u128,
}

fn users_in(instance: &Instance, q: Quadrant) -> Vec<usize> {
    (0..instance.n()).filter(|&k| instance.users()[k].quadrant() == q).collect()
}

/// DP options of one user: rounded nonzero entries, reflected to the first
/// quadrant, with entry indices.
fn entry_options(instance: &Instance, ctx: &RoundingContext, scale: &ValueScale, k: usize) -> Result<(Vec<FitOption>, Vec<usize>)> {
    let mut opts = Vec::new();
    let mut idx = Vec::new();
    for (i, e) in instance.users()[k].entries().iter().enumerate() {
        if e.demand.is_zero() {
            continue;
        }
        let (re, im) = ctx.round_units(&e.demand);
        opts.push(FitOption {
            demand: (re.unsigned_abs() as usize, im as usize),
            value: scale.units(&e.value)?,
        });
        idx.push(i);
    }
    Ok((opts, idx))
}

fn check_table(a: usize, b: usize, n: usize) -> Result<()> {
    let cells = (a + 1).saturating_mul(b + 1).saturating_mul(n + 1);
    if cells > MAX_TABLE {
        return Err(Error::BudgetExceeded {
            needed: cells as u128,
            budget: MAX_TABLE as u128,
        });
    }
    Ok(())
}

/// Best `(value, tuple)`; ties to the lexicographically smaller tuple.
fn better(a: Option<(i128, GuessTuple)>, b: Option<(i128, GuessTuple)>) -> Option<(i128, GuessTuple)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

/// Bi-criteria FPTAS over the users' declared entries. Each quadrant's
/// rounded entries go through the exact-fit DP; every admitted pair of
/// reachable projections is a candidate and the best one is returned with
/// the chosen entries themselves.
pub fn solve_bifptas(instance: &Instance, eps: &Epsilon, p: &Rational) -> Result<FptasSolution> {
    let ctx = RoundingContext::for_instance(instance, eps, p)?;
    solve_with_context(instance, &ctx)
}

pub fn solve_with_context(instance: &Instance, ctx: &RoundingContext) -> Result<FptasSolution> {
    let scale = ValueScale::new(instance.users().iter().flat_map(|u| u.entries().iter().map(|e| &e.value)));
    let plus = users_in(instance, Quadrant::NonNegativeRe);
    let minus = users_in(instance, Quadrant::NegativeRe);
    let (ap, am, b) = ctx.grid_sizes();
    check_table(ap, b, plus.len())?;
    check_table(am, b, minus.len())?;
    let build = |users: &[usize]| -> Result<(Vec<Vec<FitOption>>, Vec<Vec<usize>>)> {
        let mut o = Vec::new();
        let mut ix = Vec::new();
        for &k in users {
            let (opts, idx) = entry_options(instance, ctx, &scale, k)?;
            o.push(opts);
            ix.push(idx);
        }
        Ok((o, ix))
    };
    let (opts_p, idx_p) = build(&plus)?;
    let (opts_m, idx_m) = build(&minus)?;
    let table_p = dp_exact_2d(&opts_p, ap, b)?;
    let table_m = dp_exact_2d(&opts_m, am, b)?;
    let reach_p = table_p.reachable();
    let reach_m = table_m.reachable();
    let best = reach_p
        .par_iter()
        .map(|&(xp, zp, vp)| {
            let mut best = None;
            for &(xm, zm, vm) in &reach_m {
                let g = GuessTuple {
                    xi_plus: xp,
                    xi_minus: xm,
                    zeta_plus: zp,
                    zeta_minus: zm,
                };
                if ctx.admits(g) {
                    best = better(best, Some((vp + vm, g)));
                }
            }
            best
        })
        .reduce(|| None, better);
    let (_, tuple) = best.expect("the empty choice is admitted");
    let mut entries: Vec<usize> = instance.users().iter().map(|u| u.zero_index()).collect();
    for (choices, users, idx) in [
        (extract_choices(&table_p, tuple.xi_plus, tuple.zeta_plus)?, &plus, &idx_p),
        (extract_choices(&table_m, tuple.xi_minus, tuple.zeta_minus)?, &minus, &idx_m),
    ] {
        for (j, c) in choices.into_iter().enumerate() {
            if let Some(o) = c {
                entries[users[j]] = idx[j][o];
            }
        }
    }
    let allocation = Allocation::from_entries(instance, &entries)?;
    let welfare = crate::model::welfare(instance, &allocation);
    Ok(FptasSolution {
        allocation,
        welfare,
        tuple,
        guesses: ctx.admitted_guesses(),
    })
}

/// Value-independent range of grid allocations: every user receives a grid
/// point of its quadrant, and the per-quadrant projection totals form an
/// admitted guess. Depends only on `(C, n, P, eps)` and the users' quadrants.
#[derive(Clone, Debug)]
pub struct GridRange {
    ctx: RoundingContext,
}

/// Chosen element of the grid range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSolution {
    pub welfare: Rational,
    pub tuple: GuessTuple,
    pub bundles: Vec<ComplexDemand>,
}

/// Per-quadrant table: `best[j][a][b]` is the best value of the first `j`
/// users with rounded totals at most `(a, b)`.
struct QuadrantTable {
    users: Vec<usize>,
    options: Vec<Vec<((usize, usize), i128)>>,
    best: Vec<Vec<i128>>,
    width: usize,
}

impl QuadrantTable {
    fn build(instance: &Instance, ctx: &RoundingContext, scale: &ValueScale, users: Vec<usize>, a_max: usize, b_max: usize) -> Result<Self> {
        let width = b_max + 1;
        let size = (a_max + 1) * width;
        let l = ctx.unit();
        let mut options = Vec::new();
        for &k in &users {
            let user = &instance.users()[k];
            let mut opts: Vec<((usize, usize), i128)> = Vec::new();
            for e in user.entries() {
                if e.demand.is_zero() {
                    continue;
                }
                let (re, im) = ctx.round_units(&e.demand);
                let r = (re.unsigned_abs() as usize, im as usize);
                if r.0 > a_max || r.1 > b_max || opts.iter().any(|o| o.0 == r) {
                    continue;
                }
                let point = ComplexDemand::new(int(re) * l, int(im) * l);
                opts.push((r, scale.units(&extended_value(user, &point))?));
            }
            opts.sort();
            options.push(opts);
        }
        let mut best = vec![vec![0i128; size]];
        for opts in &options {
            let prev = best.last().expect("base layer");
            let mut cur = prev.clone();
            for &((ra, rb), v) in opts {
                for a in ra..=a_max {
                    for b in rb..=b_max {
                        let cand = v + prev[(a - ra) * width + (b - rb)];
                        if cand > cur[a * width + b] {
                            cur[a * width + b] = cand;
                        }
                    }
                }
            }
            best.push(cur);
        }
        Ok(QuadrantTable {
            users,
            options,
            best,
            width,
        })
    }

    /// Best value with totals exactly `(a, b)`: padding absorbs any slack,
    /// so this is the `<=` table, except that an empty quadrant only reaches
    /// the origin.
    fn value(&self, a: usize, b: usize) -> Option<i128> {
        if self.users.is_empty() && (a, b) != (0, 0) {
            return None;
        }
        Some(self.best[self.users.len()][a * self.width + b])
    }

    /// Per-user rounded totals of a lexicographically first optimal choice,
    /// with the slack added to the first user.
    fn bundles(&self, a: usize, b: usize) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.users.len()];
        let (mut ca, mut cb) = (a, b);
        for j in (1..=self.users.len()).rev() {
            let here = self.best[j][ca * self.width + cb];
            if here == self.best[j - 1][ca * self.width + cb] {
                continue;
            }
            let &((ra, rb), _) = self.options[j - 1]
                .iter()
                .find(|&&((ra, rb), v)| ra <= ca && rb <= cb && v + self.best[j - 1][(ca - ra) * self.width + (cb - rb)] == here)
                .expect("optimal option exists");
            out[j - 1] = (ra, rb);
            ca -= ra;
            cb -= rb;
        }
        if let Some(first) = out.first_mut() {
            first.0 += ca;
            first.1 += cb;
        }
        out
    }
}

impl GridRange {
    pub fn new(ctx: RoundingContext) -> Self {
        GridRange { ctx }
    }

    pub fn context(&self) -> &RoundingContext {
        &self.ctx
    }

    /// Welfare-maximizing grid allocation; ties go to the lexicographically
    /// smallest guess tuple.
    pub fn optimize(&self, instance: &Instance) -> Result<GridSolution> {
        let ctx = &self.ctx;
        if instance.n() != ctx.n || instance.capacity() != &ctx.capacity {
            return Err(Error::InvalidInput("instance does not match the grid range".into()));
        }
        let scale = ValueScale::new(instance.users().iter().flat_map(|u| u.entries().iter().map(|e| &e.value)));
        let (ap, am, b) = ctx.grid_sizes();
        let plus = users_in(instance, Quadrant::NonNegativeRe);
        let minus = users_in(instance, Quadrant::NegativeRe);
        check_table(ap, b, plus.len())?;
        check_table(am, b, minus.len())?;
        let tp = QuadrantTable::build(instance, ctx, &scale, plus, ap, b)?;
        let tm = QuadrantTable::build(instance, ctx, &scale, minus, am, b)?;
        let best = (0..=ap)
            .into_par_iter()
            .map(|xp| {
                let mut best = None;
                for xm in 0..=am {
                    let Some(s) = ctx.zeta_limit(xp, xm) else { continue };
                    for zp in 0..=b.min(s) {
                        let Some(vp) = tp.value(xp, zp) else { continue };
                        let top = b.min(s - zp);
                        let Some(vm) = tm.value(xm, top) else {
                            // empty second quadrant: only zeta_minus = 0
                            if let Some(v0) = tm.value(xm, 0) {
                                let g = GuessTuple { xi_plus: xp, xi_minus: xm, zeta_plus: zp, zeta_minus: 0 };
                                best = better(best, Some((vp + v0, g)));
                            }
                            continue;
                        };
                        // smallest zeta_minus reaching the monotone maximum
                        let (mut lo, mut hi) = (0usize, top);
                        while lo < hi {
                            let mid = (lo + hi) / 2;
                            if tm.value(xm, mid) == Some(vm) {
                                hi = mid;
                            } else {
                                lo = mid + 1;
                            }
                        }
                        let g = GuessTuple { xi_plus: xp, xi_minus: xm, zeta_plus: zp, zeta_minus: lo };
                        best = better(best, Some((vp + vm, g)));
                    }
                }
                best
            })
            .reduce(|| None, better);
        let (_, tuple) = best.expect("the origin is admitted");
        let l = ctx.unit();
        let mut bundles = vec![ComplexDemand::zero(); instance.n()];
        for (j, (ra, rb)) in tp.bundles(tuple.xi_plus, tuple.zeta_plus).into_iter().enumerate() {
            bundles[tp.users[j]] = ComplexDemand::new(int(ra as i64) * l, int(rb as i64) * l);
        }
        for (j, (ra, rb)) in tm.bundles(tuple.xi_minus, tuple.zeta_minus).into_iter().enumerate() {
            bundles[tm.users[j]] = ComplexDemand::new(-int(ra as i64) * l, int(rb as i64) * l);
        }
        let welfare = (0..instance.n()).fold(Rational::zero(), |acc, k| acc + extended_value(&instance.users()[k], &bundles[k]));
        Ok(GridSolution { welfare, tuple, bundles })
    }
}
