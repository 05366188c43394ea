//! Exact domain types: complex demands, multi-minded demand sets, instances
//! and allocations, plus the dominance order and welfare evaluation.

use std::fmt;
use std::ops::{Add, Sub};

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::num::{format_rational, int, to_f64, Rational};

/// A complex power demand: `re` is active power, `im` reactive power.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ComplexDemand {
    pub re: Rational,
    pub im: Rational,
}

impl ComplexDemand {
    pub fn new(re: Rational, im: Rational) -> Self {
        ComplexDemand { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        ComplexDemand::new(int(re), int(im))
    }

    pub fn zero() -> Self {
        ComplexDemand::new(Rational::zero(), Rational::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// `|d|^2`, exact.
    pub fn norm_sq(&self) -> Rational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [to_f64(&self.re), to_f64(&self.im)]
    }

    /// Argument in `[0, pi]` for demands with `im >= 0`.
    pub fn arg(&self) -> f64 {
        let [x, y] = self.to_f64();
        y.atan2(x)
    }

    /// Componentwise `<=` (used for first-quadrant vectors).
    pub fn le_componentwise(&self, other: &ComplexDemand) -> bool {
        self.re <= other.re && self.im <= other.im
    }
}

impl Add for &ComplexDemand {
    type Output = ComplexDemand;
    fn add(self, rhs: &ComplexDemand) -> ComplexDemand {
        ComplexDemand::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Sub for &ComplexDemand {
    type Output = ComplexDemand;
    fn sub(self, rhs: &ComplexDemand) -> ComplexDemand {
        ComplexDemand::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl<'a> std::iter::Sum<&'a ComplexDemand> for ComplexDemand {
    fn sum<I: Iterator<Item = &'a ComplexDemand>>(iter: I) -> Self {
        let mut acc = ComplexDemand::zero();
        for d in iter {
            acc.re += &d.re;
            acc.im += &d.im;
        }
        acc
    }
}

impl std::iter::Sum<ComplexDemand> for ComplexDemand {
    fn sum<I: Iterator<Item = ComplexDemand>>(iter: I) -> Self {
        let mut acc = ComplexDemand::zero();
        for d in iter {
            acc.re += d.re;
            acc.im += d.im;
        }
        acc
    }
}

impl fmt::Display for ComplexDemand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", format_rational(&self.re), format_rational(&self.im))
    }
}

// Sign class used by the dominance order: non-negative or negative.
fn sign_class(x: &Rational) -> bool {
    !x.is_negative()
}

/// Dominance order `d ⪯ f`: `f` is at least as large as `d` in magnitude on
/// both axes, with matching sign classes. The zero demand is below everything.
pub fn prec_leq(d: &ComplexDemand, f: &ComplexDemand) -> bool {
    if d.is_zero() {
        return true;
    }
    sign_class(&d.re) == sign_class(&f.re)
        && sign_class(&d.im) == sign_class(&f.im)
        && f.re.abs() >= d.re.abs()
        && f.im.abs() >= d.im.abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quadrant {
    NonNegativeRe,
    NegativeRe,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DemandEntry {
    pub demand: ComplexDemand,
    pub value: Rational,
}

impl DemandEntry {
    pub fn new(demand: ComplexDemand, value: Rational) -> Self {
        DemandEntry { demand, value }
    }
}

/// A multi-minded bidder: a finite set of alternative demands with values.
/// The zero demand (value 0) is always present.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DemandSet {
    user_id: u32,
    entries: Vec<DemandEntry>,
    quadrant: Quadrant,
    auto_zero: bool,
}

impl DemandSet {
    /// Builds a demand set, inferring the quadrant from the nonzero entries.
    pub fn new(user_id: u32, entries: Vec<DemandEntry>) -> Result<Self> {
        let quadrant = entries
            .iter()
            .find(|e| !e.demand.is_zero())
            .map(|e| {
                if e.demand.re.is_negative() {
                    Quadrant::NegativeRe
                } else {
                    Quadrant::NonNegativeRe
                }
            })
            .unwrap_or(Quadrant::NonNegativeRe);
        Self::with_quadrant(user_id, entries, quadrant)
    }

    pub fn with_quadrant(user_id: u32, mut entries: Vec<DemandEntry>, quadrant: Quadrant) -> Result<Self> {
        let mut has_zero = false;
        for e in &entries {
            if e.value.is_negative() {
                return Err(Error::InvalidInput(format!("user {user_id}: negative value")));
            }
            if e.demand.im.is_negative() {
                return Err(Error::InvalidInput(format!(
                    "user {user_id}: demand {} has negative imaginary part",
                    e.demand
                )));
            }
            if e.demand.is_zero() {
                if !e.value.is_zero() {
                    return Err(Error::InvalidInput(format!("user {user_id}: zero demand must have value 0")));
                }
                has_zero = true;
                continue;
            }
            let q = if e.demand.re.is_negative() {
                Quadrant::NegativeRe
            } else {
                Quadrant::NonNegativeRe
            };
            if q != quadrant {
                return Err(Error::InvalidInput(format!(
                    "user {user_id}: demand set mixes quadrants"
                )));
            }
        }
        if !has_zero {
            entries.push(DemandEntry::new(ComplexDemand::zero(), Rational::zero()));
        }
        Ok(DemandSet {
            user_id,
            entries,
            quadrant,
            auto_zero: !has_zero,
        })
    }

    /// Convenience constructor from integer `(re, im, value)` triples.
    pub fn from_ints(user_id: u32, triples: &[(i64, i64, i64)]) -> Result<Self> {
        Self::new(
            user_id,
            triples
                .iter()
                .map(|&(re, im, v)| DemandEntry::new(ComplexDemand::from_ints(re, im), int(v)))
                .collect(),
        )
    }

    pub fn user_id(&self) -> u32 {
        self.user_id
    }

    pub fn entries(&self) -> &[DemandEntry] {
        &self.entries
    }

    pub fn quadrant(&self) -> Quadrant {
        self.quadrant
    }

    /// Entries as declared, without the automatically inserted zero.
    pub fn declared_entries(&self) -> &[DemandEntry] {
        if self.auto_zero {
            &self.entries[..self.entries.len() - 1]
        } else {
            &self.entries
        }
    }

    /// Index of a zero entry.
    pub fn zero_index(&self) -> usize {
        self.entries
            .iter()
            .position(|e| e.demand.is_zero())
            .expect("zero entry present")
    }

    /// Same demands with every value replaced by zero.
    pub fn with_zero_values(&self) -> DemandSet {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.value = Rational::zero();
        }
        out
    }

    pub fn max_value(&self) -> Rational {
        self.entries.iter().map(|e| e.value.clone()).max().unwrap_or_else(Rational::zero)
    }
}

/// Value of the best declared entry dominated by `d`.
pub fn extended_value(user: &DemandSet, d: &ComplexDemand) -> Rational {
    user.entries
        .iter()
        .filter(|e| prec_leq(&e.demand, d))
        .map(|e| &e.value)
        .max()
        .cloned()
        .unwrap_or_else(Rational::zero)
}

/// Index of the best declared entry dominated by `d` (lowest index on ties).
pub fn best_dominated_entry(user: &DemandSet, d: &ComplexDemand) -> usize {
    let mut best: Option<(usize, &Rational)> = None;
    for (i, e) in user.entries.iter().enumerate() {
        if prec_leq(&e.demand, d) && best.is_none_or(|(_, v)| e.value > *v) {
            best = Some((i, &e.value));
        }
    }
    best.map(|(i, _)| i).unwrap_or_else(|| user.zero_index())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    capacity: Rational,
    users: Vec<DemandSet>,
    phi: f64,
    theta: f64,
}

impl Instance {
    pub fn new(capacity: Rational, users: Vec<DemandSet>) -> Result<Self> {
        if !capacity.is_positive() {
            return Err(Error::InvalidInput("capacity must be positive".into()));
        }
        let c2 = &capacity * &capacity;
        let mut phi: f64 = 0.0;
        for u in &users {
            for e in u.entries() {
                if e.demand.norm_sq() > c2 {
                    return Err(Error::InvalidInput(format!(
                        "user {}: demand {} exceeds capacity",
                        u.user_id(),
                        e.demand
                    )));
                }
                if !e.demand.is_zero() {
                    phi = phi.max(e.demand.arg());
                }
            }
        }
        let theta = (phi - std::f64::consts::FRAC_PI_2).max(0.0);
        Ok(Instance {
            capacity,
            users,
            phi,
            theta,
        })
    }

    pub fn capacity(&self) -> &Rational {
        &self.capacity
    }

    pub fn users(&self) -> &[DemandSet] {
        &self.users
    }

    pub fn n(&self) -> usize {
        self.users.len()
    }

    /// Largest argument over all declared demands, in radians.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `max(phi - pi/2, 0)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_first_quadrant(&self) -> bool {
        self.users.iter().all(|u| u.quadrant() == Quadrant::NonNegativeRe)
    }

    /// Copy with user `k`'s declaration replaced.
    pub fn with_user(&self, k: usize, user: DemandSet) -> Result<Instance> {
        let mut users = self.users.clone();
        users[k] = user;
        Instance::new(self.capacity.clone(), users)
    }

    /// Sorted, deduplicated set of all declared demands (including zero).
    pub fn demand_universe(&self) -> Vec<ComplexDemand> {
        let mut u: Vec<ComplexDemand> = self
            .users
            .iter()
            .flat_map(|s| s.entries().iter().map(|e| e.demand.clone()))
            .collect();
        u.sort();
        u.dedup();
        u
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Choice {
    /// Index into the user's demand set.
    Entry(usize),
    /// An arbitrary demand point (grid and range allocations).
    Point(ComplexDemand),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Allocation {
    choices: Vec<Choice>,
    total: ComplexDemand,
}

impl Allocation {
    pub fn new(instance: &Instance, choices: Vec<Choice>) -> Result<Self> {
        if choices.len() != instance.n() {
            return Err(Error::InvalidInput(format!(
                "allocation has {} choices for {} users",
                choices.len(),
                instance.n()
            )));
        }
        for (k, c) in choices.iter().enumerate() {
            if let Choice::Entry(i) = c {
                if *i >= instance.users()[k].entries().len() {
                    return Err(Error::InvalidInput(format!("user {k}: entry {i} out of range")));
                }
            }
        }
        let total = choices
            .iter()
            .enumerate()
            .map(|(k, c)| choice_demand(instance, k, c))
            .fold(ComplexDemand::zero(), |acc, d| &acc + &d);
        Ok(Allocation { choices, total })
    }

    pub fn from_entries(instance: &Instance, entries: &[usize]) -> Result<Self> {
        Self::new(instance, entries.iter().map(|&i| Choice::Entry(i)).collect())
    }

    pub fn zero(instance: &Instance) -> Self {
        let choices = instance
            .users()
            .iter()
            .map(|u| Choice::Entry(u.zero_index()))
            .collect();
        Allocation {
            choices,
            total: ComplexDemand::zero(),
        }
    }

    pub fn choices(&self) -> &[Choice] {
        &self.choices
    }

    pub fn total(&self) -> &ComplexDemand {
        &self.total
    }

    pub fn demand_of(&self, instance: &Instance, k: usize) -> ComplexDemand {
        choice_demand(instance, k, &self.choices[k])
    }

    /// Entry indices, when every choice is an entry.
    pub fn entry_indices(&self) -> Option<Vec<usize>> {
        self.choices
            .iter()
            .map(|c| match c {
                Choice::Entry(i) => Some(*i),
                Choice::Point(_) => None,
            })
            .collect()
    }
}

fn choice_demand(instance: &Instance, k: usize, c: &Choice) -> ComplexDemand {
    match c {
        Choice::Entry(i) => instance.users()[k].entries()[*i].demand.clone(),
        Choice::Point(p) => p.clone(),
    }
}

/// Exact test `|total|^2 <= beta^2 C^2`.
pub fn feasible(a: &Allocation, capacity: &Rational, beta: &Rational) -> bool {
    within(a.total(), capacity, beta)
}

pub fn within(total: &ComplexDemand, capacity: &Rational, beta: &Rational) -> bool {
    let bound = beta * capacity;
    total.norm_sq() <= &bound * &bound
}

/// Squared violation ratio `|total|^2 / C^2`.
pub fn violation_squared(total: &ComplexDemand, capacity: &Rational) -> Rational {
    total.norm_sq() / (capacity * capacity)
}

pub fn user_value(instance: &Instance, a: &Allocation, k: usize) -> Rational {
    let user = &instance.users()[k];
    match &a.choices()[k] {
        Choice::Entry(i) => user.entries()[*i].value.clone(),
        Choice::Point(p) => extended_value(user, p),
    }
}

/// Social welfare of an allocation.
pub fn welfare(instance: &Instance, a: &Allocation) -> Rational {
    (0..instance.n()).fold(Rational::zero(), |acc, k| acc + user_value(instance, a, k))
}

/// Demands rotated in binary64, for geometric use. Exact feasibility is
/// always checked on `originals`.
#[derive(Clone, Debug)]
pub struct RotatedView {
    pub angle: f64,
    pub originals: Vec<Vec<ComplexDemand>>,
    pub rotated: Vec<Vec<[f64; 2]>>,
}

pub fn rotate_point(p: [f64; 2], angle: f64) -> [f64; 2] {
    if angle == 0.0 {
        return p;
    }
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

pub fn rotate(instance: &Instance, angle: f64) -> RotatedView {
    let originals: Vec<Vec<ComplexDemand>> = instance
        .users()
        .iter()
        .map(|u| u.entries().iter().map(|e| e.demand.clone()).collect())
        .collect();
    let rotated = originals
        .iter()
        .map(|ds| ds.iter().map(|d| rotate_point(d.to_f64(), angle)).collect())
        .collect();
    RotatedView {
        angle,
        originals,
        rotated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;
    use proptest::prelude::*;

    fn d(re: i64, im: i64) -> ComplexDemand {
        ComplexDemand::from_ints(re, im)
    }

    #[test]
    fn dominance_examples() {
        assert!(prec_leq(&d(1, 2), &d(2, 3)));
        assert!(!prec_leq(&d(-1, 2), &d(2, 3)));
        assert!(prec_leq(&d(0, 0), &d(-5, 1)));
        assert!(!prec_leq(&d(1, 1), &d(0, 0)));
    }

    #[test]
    fn extended_value_examples() {
        let u = DemandSet::from_ints(1, &[(0, 0, 0), (1, 1, 5)]).unwrap();
        assert_eq!(extended_value(&u, &d(2, 2)), int(5));
        assert_eq!(extended_value(&u, &d(1, 0)), int(0));
        let u = DemandSet::from_ints(1, &[(0, 0, 0), (1, 1, 5), (2, 1, 7)]).unwrap();
        // brute force: entries dominated by (2,3) are all three; max value 7
        let brute = u
            .entries()
            .iter()
            .filter(|e| e.demand.re <= int(2) && e.demand.im <= int(3))
            .map(|e| e.value.clone())
            .max()
            .unwrap();
        assert_eq!(extended_value(&u, &d(2, 3)), brute);
        assert_eq!(brute, int(7));
    }

    #[test]
    fn zero_is_inserted_once() {
        let u = DemandSet::from_ints(3, &[(1, 1, 5)]).unwrap();
        assert_eq!(u.entries().len(), 2);
        assert_eq!(u.declared_entries().len(), 1);
        let u = DemandSet::from_ints(3, &[(0, 0, 0), (1, 1, 5)]).unwrap();
        assert_eq!(u.entries().len(), 2);
        assert_eq!(u.declared_entries().len(), 2);
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(DemandSet::from_ints(1, &[(1, 1, 5), (-1, 1, 3)]).is_err());
        assert!(DemandSet::from_ints(1, &[(1, -1, 5)]).is_err());
        assert!(DemandSet::from_ints(1, &[(0, 0, 2)]).is_err());
        assert!(DemandSet::from_ints(1, &[(1, 0, -2)]).is_err());
        let u = DemandSet::from_ints(1, &[(6, 0, 1)]).unwrap();
        assert!(Instance::new(int(5), vec![u]).is_err());
    }

    #[test]
    fn feasibility_on_the_circle() {
        let u = DemandSet::from_ints(1, &[(3, 4, 1)]).unwrap();
        let v = DemandSet::from_ints(2, &[(1, 0, 1)]).unwrap();
        let inst = Instance::new(int(5), vec![u, v]).unwrap();
        let one = int(1);
        let a = Allocation::from_entries(&inst, &[0, 1]).unwrap();
        assert!(feasible(&a, inst.capacity(), &one));
        let b = Allocation::from_entries(&inst, &[0, 0]).unwrap();
        assert!(!feasible(&b, inst.capacity(), &one));
    }

    #[test]
    fn exact_comparison_near_the_bound() {
        // (7,7): 98 > 49 * 1.96 = 96.04
        let u = DemandSet::from_ints(1, &[(3, 4, 1)]).unwrap();
        let v = DemandSet::from_ints(2, &[(4, 3, 1)]).unwrap();
        let inst = Instance::new(int(5), vec![u, v]).unwrap();
        let a = Allocation::from_entries(&inst, &[0, 0]).unwrap();
        assert!(!feasible(&a, inst.capacity(), &rat(7, 5)));
        assert!(feasible(&a, inst.capacity(), &rat(2, 1)));
    }

    #[test]
    fn welfare_examples() {
        let u = DemandSet::from_ints(1, &[(1, 1, 12)]).unwrap();
        let v = DemandSet::from_ints(2, &[(1, 2, 5), (2, 2, 6)]).unwrap();
        let inst = Instance::new(int(5), vec![u, v]).unwrap();
        assert_eq!(welfare(&inst, &Allocation::zero(&inst)), int(0));
        let a = Allocation::from_entries(&inst, &[0, 2]).unwrap();
        assert_eq!(welfare(&inst, &a), int(12));
        let g = Allocation::new(
            &inst,
            vec![Choice::Point(d(1, 1)), Choice::Point(d(3, 2))],
        )
        .unwrap();
        assert_eq!(
            welfare(&inst, &g),
            extended_value(&inst.users()[0], &d(1, 1)) + extended_value(&inst.users()[1], &d(3, 2))
        );
        assert_eq!(welfare(&inst, &g), int(18));
    }

    #[test]
    fn rotation_examples() {
        let u = DemandSet::from_ints(1, &[(1, 0, 1), (3, 4, 2)]).unwrap();
        let inst = Instance::new(int(5), vec![u]).unwrap();
        let id = rotate(&inst, 0.0);
        assert_eq!(id.rotated[0][0], [1.0, 0.0]);
        let q = rotate(&inst, std::f64::consts::FRAC_PI_2);
        assert!((q.rotated[0][0][0]).abs() < 1e-12 && (q.rotated[0][0][1] - 1.0).abs() < 1e-12);
        let r = rotate(&inst, 0.3);
        let [x, y] = r.rotated[0][1];
        assert!(((x * x + y * y).sqrt() - 5.0).abs() < 1e-12);
    }

    fn arb_demand() -> impl Strategy<Value = ComplexDemand> {
        (-6i64..=6, 0i64..=6, 1i64..=3).prop_map(|(re, im, den)| {
            ComplexDemand::new(rat(re, den), rat(im, den))
        })
    }

    proptest! {
        #[test]
        fn dominance_is_a_partial_order(a in arb_demand(), b in arb_demand(), c in arb_demand()) {
            prop_assert!(prec_leq(&a, &a));
            if prec_leq(&a, &b) && prec_leq(&b, &c) {
                prop_assert!(prec_leq(&a, &c));
            }
            if !a.is_zero() && !b.is_zero() && prec_leq(&a, &b) && prec_leq(&b, &a) {
                prop_assert_eq!(&a, &b);
            }
        }

        #[test]
        fn extended_value_is_monotone(
            entries in proptest::collection::vec((0i64..=5, 0i64..=5, 0i64..=9), 1..4),
            x in (0i64..=6, 0i64..=6), dx in (0i64..=3, 0i64..=3),
        ) {
            let u = DemandSet::from_ints(0, &entries.iter().map(|&(a, b, v)| {
                if a == 0 && b == 0 { (0, 0, 0) } else { (a, b, v) }
            }).collect::<Vec<_>>()).unwrap();
            let lo = d(x.0, x.1);
            let hi = d(x.0 + dx.0, x.1 + dx.1);
            if prec_leq(&lo, &hi) {
                prop_assert!(extended_value(&u, &lo) <= extended_value(&u, &hi));
            }
        }

        #[test]
        fn welfare_is_additive(vals in proptest::collection::vec(1i64..50, 1..5)) {
            let users: Vec<_> = vals.iter().enumerate()
                .map(|(k, &v)| DemandSet::from_ints(k as u32, &[(1, 0, v)]).unwrap())
                .collect();
            let inst = Instance::new(int(100), users).unwrap();
            let a = Allocation::from_entries(&inst, &vec![0; vals.len()]).unwrap();
            let expect: i64 = vals.iter().sum();
            prop_assert_eq!(welfare(&inst, &a), int(expect));
        }
    }
}
