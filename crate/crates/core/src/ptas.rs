//! Polygon-guessing PTAS for first-quadrant instances, the witness
//! construction that bounds its loss, and the value-independent range used
//! by the truthful variant.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{candidate_points, inside_circle, slack_widths, Polygon};
use crate::mdkp::{MdkpEntry, MdkpInstance, RangeSolution, RestrictedRange, DEFAULT_BUDGET};
use crate::model::{rotate_point, user_value, Allocation, Choice, ComplexDemand, DemandSet, Instance};
use crate::num::{from_f64, int, to_f64, Epsilon, Rational, ValueScale};

/// Default cap on completions enumerated per guess by the brute-force backend.
pub const DEFAULT_GUESS_CAP: u128 = 5_000_000;

/// How the completion of a guess is optimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Enumerate every choice of the unguessed users.
    BruteForce { cap: u128 },
    /// Project onto the polygon's outer normals and optimize over the
    /// restricted multidimensional range.
    RestrictedRange { budget: u128, side_cap: Option<usize> },
}

impl Backend {
    pub fn brute_force() -> Self {
        Backend::BruteForce { cap: DEFAULT_GUESS_CAP }
    }

    /// Restricted-range backend with polygons coarsened to four outer edges.
    pub fn restricted_range() -> Self {
        Backend::RestrictedRange {
            budget: DEFAULT_BUDGET,
            side_cap: Some(4),
        }
    }
}

/// A guessed set: users and the nonzero entries they are fixed to.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Guess {
    pub users: Vec<usize>,
    pub entries: Vec<usize>,
}

impl Guess {
    pub fn demand_sum(&self, instance: &Instance) -> ComplexDemand {
        self.users
            .iter()
            .zip(&self.entries)
            .map(|(&k, &i)| &instance.users()[k].entries()[i].demand)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PtasSolution {
    pub allocation: Allocation,
    pub welfare: Rational,
    pub guess: Guess,
    /// Number of guesses evaluated.
    pub guesses: usize,
}

fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Every guess of at most `max_size` users with nonzero entries whose sum
/// fits in the circle; ordered by size, then users, then entries.
pub fn enumerate_guesses(instance: &Instance, max_size: usize) -> Vec<Guess> {
    let n = instance.n();
    let nonzero: Vec<Vec<usize>> = instance
        .users()
        .iter()
        .map(|u| (0..u.entries().len()).filter(|&i| !u.entries()[i].demand.is_zero()).collect())
        .collect();
    let mut out = Vec::new();
    for size in 0..=max_size.min(n) {
        let mut sets = Vec::new();
        subsets(n, size, 0, &mut Vec::new(), &mut sets);
        for users in sets {
            if users.iter().any(|&k| nonzero[k].is_empty()) {
                continue;
            }
            let mut idx = vec![0usize; size];
            loop {
                let g = Guess {
                    users: users.clone(),
                    entries: idx.iter().zip(&users).map(|(&j, &k)| nonzero[k][j]).collect(),
                };
                if inside_circle(&g.demand_sum(instance), instance.capacity()) {
                    out.push(g);
                }
                let mut p = size;
                let mut more = false;
                while p > 0 {
                    p -= 1;
                    idx[p] += 1;
                    if idx[p] < nonzero[users[p]].len() {
                        more = true;
                        break;
                    }
                    idx[p] = 0;
                }
                if !more {
                    break;
                }
            }
        }
    }
    out
}

/// Binary64 demands and integer values, prepared once per instance.
struct Prepared {
    demands: Vec<Vec<[f64; 2]>>,
    values: Vec<Vec<i128>>,
    scale: ValueScale,
}

impl Prepared {
    fn new(instance: &Instance) -> Result<Self> {
        let scale = ValueScale::new(instance.users().iter().flat_map(|u| u.entries().iter().map(|e| &e.value)));
        let mut demands = Vec::new();
        let mut values = Vec::new();
        for u in instance.users() {
            demands.push(u.entries().iter().map(|e| e.demand.to_f64()).collect());
            values.push(u.entries().iter().map(|e| scale.units(&e.value)).collect::<Result<Vec<_>>>()?);
        }
        Ok(Prepared { demands, values, scale })
    }
}

fn exact_total(instance: &Instance, choice: &[usize]) -> ComplexDemand {
    choice
        .iter()
        .enumerate()
        .map(|(k, &i)| &instance.users()[k].entries()[i].demand)
        .sum()
}

fn guess_polygon(instance: &Instance, guess: &Guess, eps: &Epsilon, side_cap: Option<usize>) -> Result<Polygon> {
    let p = Polygon::build(&guess.demand_sum(instance), instance.capacity(), eps)?;
    Ok(match side_cap {
        Some(cap) => p.coarsened(cap),
        None => p,
    })
}

/// Best completion of `guess` whose total lies in the guess's polygon and,
/// exactly, in the circle. Returns scaled welfare and one entry per user.
fn complete_brute_force(instance: &Instance, prep: &Prepared, guess: &Guess, eps: &Epsilon, cap: u128) -> Result<Option<(i128, Vec<usize>)>> {
    let n = instance.n();
    let poly = guess_polygon(instance, guess, eps, None)?;
    let mut choice: Vec<usize> = instance.users().iter().map(DemandSet::zero_index).collect();
    let mut base = [0.0f64; 2];
    let mut base_val = 0i128;
    for (&k, &i) in guess.users.iter().zip(&guess.entries) {
        choice[k] = i;
        base[0] += prep.demands[k][i][0];
        base[1] += prep.demands[k][i][1];
        base_val += prep.values[k][i];
    }
    let free: Vec<usize> = (0..n).filter(|k| !guess.users.contains(k)).collect();
    let needed = free
        .iter()
        .fold(1u128, |acc, &k| acc.saturating_mul(prep.demands[k].len() as u128));
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let mut idx = vec![0usize; free.len()];
    let mut best: Option<(i128, Vec<usize>)> = None;
    loop {
        let mut x = base;
        let mut val = base_val;
        for (j, &k) in free.iter().enumerate() {
            let d = prep.demands[k][idx[j]];
            x[0] += d[0];
            x[1] += d[1];
            val += prep.values[k][idx[j]];
        }
        if best.as_ref().is_none_or(|b| val > b.0) && poly.contains(x) {
            for (j, &k) in free.iter().enumerate() {
                choice[k] = idx[j];
            }
            if inside_circle(&exact_total(instance, &choice), instance.capacity()) {
                best = Some((val, choice.clone()));
            }
        }
        let mut p = free.len();
        let mut more = false;
        while p > 0 {
            p -= 1;
            idx[p] += 1;
            if idx[p] < prep.demands[free[p]].len() {
                more = true;
                break;
            }
            idx[p] = 0;
        }
        if !more {
            return Ok(best);
        }
    }
}

/// Bits of the integer grid that projected coordinates are rounded to.
const PROJECTION_BITS: i32 = 30;

/// Projections onto a polygon's outer normals, measured in integer multiples
/// of `C / 2^30`. Demands round up and capacities round down, so a packing
/// on the grid is a packing of the true projections.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    pub normals: Vec<[f64; 2]>,
    offsets: Vec<f64>,
    unit: f64,
}

impl Projector {
    pub fn new(poly: &Polygon, capacity: &Rational) -> Self {
        let edges = poly.outer_edges();
        Projector {
            normals: edges.iter().map(|e| e.normal).collect(),
            offsets: edges.iter().map(|e| e.offset.max(0.0)).collect(),
            unit: to_f64(capacity) * 2f64.powi(-PROJECTION_BITS),
        }
    }

    fn dot(n: &[f64; 2], p: [f64; 2]) -> f64 {
        (n[0] * p[0] + n[1] * p[1]).max(0.0)
    }

    /// Grid coordinates of a point, rounded up.
    pub fn coords(&self, p: [f64; 2]) -> Vec<Rational> {
        self.normals
            .iter()
            .map(|n| int((Self::dot(n, p) / self.unit).ceil() as i64))
            .collect()
    }

    /// Edge offsets rounded down, minus the rounded-up projection of
    /// `reserved`, clamped at zero.
    pub fn capacity(&self, reserved: [f64; 2]) -> Vec<Rational> {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, &o)| {
                let c = (o / self.unit).floor() as i64 - (Self::dot(n, reserved) / self.unit).ceil() as i64;
                int(c.max(0))
            })
            .collect()
    }
}

fn complete_restricted(
    instance: &Instance,
    prep: &Prepared,
    guess: &Guess,
    eps: &Epsilon,
    budget: u128,
    side_cap: Option<usize>,
) -> Result<Option<(i128, Vec<usize>)>> {
    let n = instance.n();
    let poly = guess_polygon(instance, guess, eps, side_cap)?;
    let proj = Projector::new(&poly, instance.capacity());
    let capacity = proj.capacity(guess.demand_sum(instance).to_f64());
    let mut choice: Vec<usize> = instance.users().iter().map(DemandSet::zero_index).collect();
    let mut val = 0i128;
    for (&k, &i) in guess.users.iter().zip(&guess.entries) {
        choice[k] = i;
        val += prep.values[k][i];
    }
    let free: Vec<usize> = (0..n).filter(|k| !guess.users.contains(k)).collect();
    if !free.is_empty() && !proj.normals.is_empty() {
        let users: Vec<Vec<MdkpEntry>> = free
            .iter()
            .map(|&k| {
                prep.demands[k]
                    .iter()
                    .zip(instance.users()[k].entries())
                    .map(|(&d, e)| MdkpEntry {
                        coords: proj.coords(d),
                        value: e.value.clone(),
                    })
                    .collect()
            })
            .collect();
        let inst = MdkpInstance::new(capacity.clone(), users)?;
        let range = RestrictedRange::new(free.len(), capacity, inst.universe(), eps, budget)?;
        let sol = range.optimize_with(&inst, false)?;
        for (j, &k) in free.iter().enumerate() {
            choice[k] = sol.entries[j];
            val += prep.values[k][sol.entries[j]];
        }
    }
    if inside_circle(&exact_total(instance, &choice), instance.capacity()) {
        Ok(Some((val, choice)))
    } else {
        Ok(None)
    }
}

fn check_first_quadrant(instance: &Instance) -> Result<()> {
    if instance.is_first_quadrant() {
        Ok(())
    } else {
        Err(Error::InvalidInput("the polygon PTAS needs first-quadrant demands".into()))
    }
}

/// Guesses every set of at most `1/eps` users with their demands, completes
/// each within the guess's polygon, and returns the best.
pub fn solve_ptas(instance: &Instance, eps: &Epsilon, backend: Backend) -> Result<PtasSolution> {
    check_first_quadrant(instance)?;
    let prep = Prepared::new(instance)?;
    let guesses = enumerate_guesses(instance, eps.q() as usize);
    let results: Vec<Option<(i128, Vec<usize>)>> = guesses
        .par_iter()
        .map(|g| match backend {
            Backend::BruteForce { cap } => complete_brute_force(instance, &prep, g, eps, cap),
            Backend::RestrictedRange { budget, side_cap } => complete_restricted(instance, &prep, g, eps, budget, side_cap),
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(i128, usize, Vec<usize>)> = None;
    for (gi, r) in results.into_iter().enumerate() {
        if let Some((v, c)) = r {
            if best.as_ref().is_none_or(|b| v > b.0) {
                best = Some((v, gi, c));
            }
        }
    }
    let (v, gi, choice) = best.ok_or_else(|| Error::Infeasible("no guess admits a completion".into()))?;
    Ok(PtasSolution {
        allocation: Allocation::from_entries(instance, &choice)?,
        welfare: prep.scale.to_rational(v),
        guess: guesses[gi].clone(),
        guesses: guesses.len(),
    })
}

/// Optimum of the polygon-constrained problem for a single guess.
pub fn solve_guess(instance: &Instance, guess: &Guess, eps: &Epsilon, backend: Backend) -> Result<Option<(Rational, Allocation)>> {
    check_first_quadrant(instance)?;
    let prep = Prepared::new(instance)?;
    let r = match backend {
        Backend::BruteForce { cap } => complete_brute_force(instance, &prep, guess, eps, cap)?,
        Backend::RestrictedRange { budget, side_cap } => complete_restricted(instance, &prep, guess, eps, budget, side_cap)?,
    };
    r.map(|(v, c)| Ok((prep.scale.to_rational(v), Allocation::from_entries(instance, &c)?)))
        .transpose()
}

/// Axis along which small demands are batched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Re,
    Im,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub axis: Axis,
    /// Groups of indices into the input slice.
    pub groups: Vec<Vec<usize>>,
}

/// Splits small demands into between `1/eps - 1` and `4/eps` groups, each
/// within `eps` times the slack along the chosen axis. Every demand must be
/// within `eps/4` of the slack on both axes, and the demands must fill at
/// least half the slack along one axis.
pub fn partition_small(items: &[ComplexDemand], w_r: f64, w_i: f64, eps: &Epsilon) -> Result<Partition> {
    let q = eps.q() as usize;
    let e = eps.value();
    let (wr, wi) = (from_f64(w_r), from_f64(w_i));
    let quarter = &e / int(4);
    if items.iter().any(|d| d.re > &quarter * &wr || d.im > &quarter * &wi) {
        return Err(Error::PreconditionViolated("a demand is not small relative to the slack".into()));
    }
    let sum_r: Rational = items.iter().map(|d| &d.re).sum();
    let sum_i: Rational = items.iter().map(|d| &d.im).sum();
    let half = int(1) / int(2);
    let (axis, w) = if sum_r >= &half * &wr {
        (Axis::Re, wr)
    } else if sum_i >= &half * &wi {
        (Axis::Im, wi)
    } else {
        return Err(Error::PreconditionViolated("small demands cover less than half the slack".into()));
    };
    let limit = &e * &half * &w;
    let coord = |d: &ComplexDemand| match axis {
        Axis::Re => d.re.clone(),
        Axis::Im => d.im.clone(),
    };
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    let mut cur_sum = Rational::zero();
    for (i, d) in items.iter().enumerate() {
        let x = coord(d);
        if !cur.is_empty() && &cur_sum + &x > limit {
            groups.push(std::mem::take(&mut cur));
            cur_sum = Rational::zero();
        }
        cur.push(i);
        cur_sum += x;
    }
    if !cur.is_empty() {
        groups.push(cur);
    }
    if groups.len() >= 2 {
        let last = groups.pop().expect("two groups");
        groups.last_mut().expect("one group").extend(last);
    }
    let h = groups.len();
    if h + 1 < q || h >= 4 * q {
        return Err(Error::PreconditionViolated(format!("{h} groups outside [{}, {})", q - 1, 4 * q)));
    }
    Ok(Partition { axis, groups })
}

/// Which branch of the witness construction produced the result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessCase {
    /// The allocation already lies in the guessed set's polygon.
    Contained,
    /// Too many large demands: the set was truncated.
    Truncated,
    /// Small demands were batched into this many groups.
    Grouped(usize),
}

/// A guessed set together with an allocation inside its polygon whose
/// welfare is close to the input allocation's.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    /// Guessed users in the order they were added.
    pub t_users: Vec<usize>,
    pub allocation: Allocation,
    /// Users whose demand was dropped.
    pub removed: Vec<usize>,
    pub case: WitnessCase,
}

/// Turns a feasible allocation into a set of at most `1/eps` users and an
/// allocation lying in that set's polygon, losing at most an `O(eps)`
/// fraction of the welfare.
pub fn construct_witness(instance: &Instance, a: &Allocation, eps: &Epsilon) -> Result<Witness> {
    check_first_quadrant(instance)?;
    let c = instance.capacity();
    if !inside_circle(a.total(), c) {
        return Err(Error::Infeasible("allocation exceeds the capacity".into()));
    }
    let q = eps.q() as usize;
    let n = instance.n();
    let demands: Vec<ComplexDemand> = (0..n).map(|k| a.demand_of(instance, k)).collect();
    let s: Vec<usize> = (0..n).filter(|&k| !demands[k].is_zero()).collect();
    let quarter = eps.value() / int(4);
    let sum_of = |set: &[usize]| -> ComplexDemand { set.iter().map(|&k| &demands[k]).sum() };
    let mut t: Vec<usize> = Vec::new();
    loop {
        let (wr, wi) = slack_widths(&sum_of(&t), c)?;
        let (tr, ti) = (&quarter * from_f64(wr), &quarter * from_f64(wi));
        let added: Vec<usize> = s
            .iter()
            .copied()
            .filter(|k| !t.contains(k) && (demands[*k].re > tr || demands[*k].im > ti))
            .collect();
        t.extend(&added);
        if t.len() >= q || added.is_empty() || t.len() == s.len() {
            break;
        }
    }
    let rest: Vec<usize> = s.iter().copied().filter(|k| !t.contains(k)).collect();
    let d_t = sum_of(&t);
    if t.len() <= q && (rest.is_empty() || Polygon::build(&d_t, c, eps)?.contains_demand(a.total())) {
        return Ok(Witness {
            t_users: t,
            allocation: a.clone(),
            removed: Vec::new(),
            case: WitnessCase::Contained,
        });
    }
    let (groups, case) = if t.len() >= q {
        t.truncate(q);
        let v1: Vec<usize> = s.iter().copied().filter(|k| !t.contains(k)).collect();
        (vec![v1], WitnessCase::Truncated)
    } else {
        let (wr, wi) = slack_widths(&d_t, c)?;
        let items: Vec<ComplexDemand> = rest.iter().map(|&k| demands[k].clone()).collect();
        let groups = match partition_small(&items, wr, wi, eps) {
            Ok(p) => p.groups.into_iter().map(|g| g.into_iter().map(|i| rest[i]).collect()).collect(),
            Err(_) => vec![rest.clone()],
        };
        let h = groups.len();
        (groups, WitnessCase::Grouped(h))
    };
    let value = |k: usize| user_value(instance, a, k);
    let k_hat = t.iter().copied().min_by(|&x, &y| value(x).cmp(&value(y)).then(x.cmp(&y)));
    let group_values: Vec<Rational> = groups.iter().map(|g| g.iter().map(|&k| value(k)).sum()).collect();
    let j_hat = (0..groups.len())
        .min_by(|&x, &y| group_values[x].cmp(&group_values[y]).then(x.cmp(&y)))
        .expect("at least one group");
    let removed = match k_hat {
        Some(k) if value(k) < group_values[j_hat] => {
            t.retain(|&x| x != k);
            vec![k]
        }
        _ => groups[j_hat].clone(),
    };
    let mut choices = a.choices().to_vec();
    for &k in &removed {
        choices[k] = Choice::Entry(instance.users()[k].zero_index());
    }
    Ok(Witness {
        t_users: t,
        allocation: Allocation::new(instance, choices)?,
        removed,
        case,
    })
}

/// `eps * 2 / (1 + 2 cot^2(delta / 2))`, rounded down to the form `1/q`.
pub fn refined_epsilon(eps: &Epsilon, delta: f64) -> Result<Epsilon> {
    if !(delta > 0.0 && delta < FRAC_PI_2) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, pi/2), got {delta}")));
    }
    let cot = 1.0 / (delta / 2.0).tan();
    Epsilon::floor_of(eps.as_f64() * 2.0 / (1.0 + 2.0 * cot * cot))
}

/// Parameters of the truthful range.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthfulParams {
    pub eps: Epsilon,
    /// Angular margin: every universe demand has argument at most `pi/2 - delta`.
    pub delta: f64,
    /// Optional cap on the outer edges of every polygon.
    pub side_cap: Option<usize>,
    /// Optional cap on the guessed set size, below `1/eps'`.
    pub max_guess: Option<usize>,
    /// Cap on DP states summed over all cells.
    pub budget: u128,
}

impl TruthfulParams {
    pub fn new(eps: Epsilon, delta: f64) -> Self {
        TruthfulParams {
            eps,
            delta,
            side_cap: None,
            max_guess: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// One guessed aggregate: the polygon built on `z` with the dummy demand
/// `z - d_t` reserved.
#[derive(Clone, Debug)]
pub struct TruthfulCell {
    pub d_t: ComplexDemand,
    pub z: ComplexDemand,
    pub proj: Projector,
    range: RestrictedRange,
}

impl TruthfulCell {
    pub fn range(&self) -> &RestrictedRange {
        &self.range
    }
}

/// Chosen element of the truthful range.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthfulSolution {
    pub welfare: Rational,
    pub cell: usize,
    pub inner: RangeSolution,
    pub allocation: Allocation,
}

/// The truthful range over a fixed demand universe. Demands are rotated by
/// `delta / 2` so every aggregate has slack on both axes, then projected on
/// the outer normals of each cell's polygon.
#[derive(Clone, Debug)]
pub struct TruthfulRange {
    capacity: Rational,
    n: usize,
    angle: f64,
    eps_prime: Epsilon,
    cells: Vec<TruthfulCell>,
    states: u128,
}

/// Rotates `d` by `angle`, rounds to exact rationals and pulls the result
/// back inside the circle when rounding pushed it out.
fn rotate_exact(d: &ComplexDemand, angle: f64, c: &Rational) -> ComplexDemand {
    let [mut x, mut y] = rotate_point(d.to_f64(), angle);
    x = x.max(0.0);
    y = y.max(0.0);
    loop {
        let p = ComplexDemand::new(from_f64(x), from_f64(y));
        if inside_circle(&p, c) {
            return p;
        }
        x *= 1.0 - 1e-15;
        y *= 1.0 - 1e-15;
    }
}

fn multisets(k: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for m in &frontier {
            let start = m.last().copied().unwrap_or(0);
            for i in start..k {
                let mut x = m.clone();
                x.push(i);
                next.push(x);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

impl TruthfulRange {
    /// Builds the range for `n` users over `universe`. The range depends
    /// only on the universe, never on values.
    pub fn build(capacity: &Rational, n: usize, universe: &[ComplexDemand], params: &TruthfulParams) -> Result<Self> {
        let eps_prime = refined_epsilon(&params.eps, params.delta)?;
        let limit = FRAC_PI_2 - params.delta + 1e-12;
        for d in universe {
            if d.re.is_negative() || d.im.is_negative() || (!d.is_zero() && d.arg() > limit) {
                return Err(Error::PreconditionViolated(format!("{d} has argument above pi/2 - delta")));
            }
        }
        let angle = params.delta / 2.0;
        let mut points: Vec<ComplexDemand> = universe
            .iter()
            .filter(|d| !d.is_zero())
            .map(|d| rotate_exact(d, angle, capacity))
            .collect();
        points.sort();
        points.dedup();
        let mut coords_universe = points.clone();
        coords_universe.push(ComplexDemand::zero());
        let max_len = (eps_prime.q() as usize)
            .min(n)
            .min(params.max_guess.unwrap_or(usize::MAX));
        let mut seen: HashSet<(ComplexDemand, ComplexDemand)> = HashSet::new();
        let mut keys: Vec<(ComplexDemand, ComplexDemand)> = Vec::new();
        let mut sums: HashSet<ComplexDemand> = HashSet::new();
        for m in multisets(points.len(), max_len) {
            let d_t: ComplexDemand = m.iter().map(|&i| &points[i]).sum();
            if !inside_circle(&d_t, capacity) || !sums.insert(d_t.clone()) {
                continue;
            }
            for z in candidate_points(&d_t, capacity, &eps_prime)? {
                if seen.insert((d_t.clone(), z.clone())) {
                    keys.push((d_t.clone(), z));
                }
            }
        }
        let mut cells = Vec::with_capacity(keys.len());
        let mut states: u128 = 0;
        for (d_t, z) in keys {
            let mut poly = Polygon::build(&z, capacity, &eps_prime)?;
            if let Some(cap) = params.side_cap {
                poly = poly.coarsened(cap);
            }
            let proj = Projector::new(&poly, capacity);
            let cap_vec = proj.capacity((&z - &d_t).to_f64());
            let universe_coords: Vec<Vec<Rational>> = coords_universe.iter().map(|p| proj.coords(p.to_f64())).collect();
            let remaining = params.budget.saturating_sub(states);
            let range = RestrictedRange::new(n, cap_vec, universe_coords, &eps_prime, remaining).map_err(|e| match e {
                Error::BudgetExceeded { needed, .. } => Error::BudgetExceeded {
                    needed: states.saturating_add(needed),
                    budget: params.budget,
                },
                other => other,
            })?;
            states += range.state_count();
            cells.push(TruthfulCell { d_t, z, proj, range });
        }
        Ok(TruthfulRange {
            capacity: capacity.clone(),
            n,
            angle,
            eps_prime,
            cells,
            states,
        })
    }

    pub fn cells(&self) -> &[TruthfulCell] {
        &self.cells
    }

    pub fn eps_prime(&self) -> Epsilon {
        self.eps_prime
    }

    pub fn state_count(&self) -> u128 {
        self.states
    }

    fn rotated(&self, user: &DemandSet) -> Result<Vec<[f64; 2]>> {
        user.entries()
            .iter()
            .map(|e| {
                let d = &e.demand;
                if d.re.is_negative() || (!d.is_zero() && d.arg() + self.angle > FRAC_PI_2 + 1e-12) {
                    return Err(Error::PreconditionViolated(format!(
                        "user {}: {d} leaves the first quadrant when rotated",
                        user.user_id()
                    )));
                }
                Ok(rotate_exact(d, self.angle, &self.capacity).to_f64())
            })
            .collect()
    }

    fn mdkp_instance(&self, cell: &TruthfulCell, instance: &Instance, rotated: &[Vec<[f64; 2]>]) -> Result<MdkpInstance> {
        let users = instance
            .users()
            .iter()
            .zip(rotated)
            .map(|(u, r)| {
                u.entries()
                    .iter()
                    .zip(r)
                    .map(|(e, &p)| MdkpEntry {
                        coords: cell.proj.coords(p),
                        value: e.value.clone(),
                    })
                    .collect()
            })
            .collect();
        MdkpInstance::new(cell.range.capacity().to_vec(), users)
    }

    /// Welfare-maximizing element for the declared instance; ties go to
    /// the earliest cell.
    pub fn optimize(&self, instance: &Instance) -> Result<TruthfulSolution> {
        if instance.n() != self.n || instance.capacity() != &self.capacity {
            return Err(Error::InvalidInput("instance does not match the range".into()));
        }
        let rotated: Vec<Vec<[f64; 2]>> = instance.users().iter().map(|u| self.rotated(u)).collect::<Result<_>>()?;
        let sols: Vec<RangeSolution> = self
            .cells
            .par_iter()
            .map(|cell| {
                let inst = self.mdkp_instance(cell, instance, &rotated)?;
                cell.range.optimize_with(&inst, false)
            })
            .collect::<Result<_>>()?;
        let mut best: Option<usize> = None;
        for (i, s) in sols.iter().enumerate() {
            if best.is_none_or(|b| s.welfare > sols[b].welfare) {
                best = Some(i);
            }
        }
        let cell = best.ok_or(Error::EmptyRange)?;
        let inner = sols.into_iter().nth(cell).expect("index in range");
        let allocation = Allocation::from_entries(instance, &inner.entries)?;
        if !inside_circle(allocation.total(), &self.capacity) {
            return Err(Error::Infeasible(format!("rounding pushed {} outside the circle", allocation.total())));
        }
        Ok(TruthfulSolution {
            welfare: inner.welfare.clone(),
            cell,
            inner,
            allocation,
        })
    }

    /// Value `user` assigns to bundle `coords` of cell `cell`: the best
    /// entry whose projections fit componentwise.
    pub fn bundle_value(&self, user: &DemandSet, cell: usize, coords: &[Rational]) -> Result<Rational> {
        let proj = &self.cells[cell].proj;
        let rotated = self.rotated(user)?;
        Ok(user
            .entries()
            .iter()
            .zip(rotated)
            .filter(|(_, p)| proj.coords(*p).iter().zip(coords).all(|(x, y)| x <= y))
            .map(|(e, _)| e.value.clone())
            .max()
            .unwrap_or_else(Rational::zero))
    }
}

/// Builds the range on the instance's own demand universe and optimizes.
pub fn solve_truthful_ptas(instance: &Instance, params: &TruthfulParams) -> Result<(TruthfulRange, TruthfulSolution)> {
    let range = TruthfulRange::build(instance.capacity(), instance.n(), &instance.demand_universe(), params)?;
    let sol = range.optimize(instance)?;
    Ok((range, sol))
}
