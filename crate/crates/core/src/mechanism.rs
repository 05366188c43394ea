//! Maximal-in-range mechanisms with Clarke-pivot VCG payments, and an
//! exhaustive misreport audit.

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fptas::{GridRange, RoundingContext};
use crate::mdkp::{MdkpEntry, MdkpInstance, RestrictedRange, DEFAULT_BUDGET};
use crate::model::{best_dominated_entry, extended_value, prec_leq, Allocation, ComplexDemand, DemandEntry, DemandSet, Instance, Quadrant};
use crate::num::{int, rat, Epsilon, Rational};
use crate::oracle::brute_force_opt;
use crate::ptas::{TruthfulParams, TruthfulRange};

/// What a user receives from a range element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Bundle {
    /// A complex demand; valued by the best dominated entry.
    Point(ComplexDemand),
    /// A vector in the projected space of range cell `cell`.
    Coords { cell: usize, coords: Vec<Rational> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RangeOutcome {
    /// Declared entries served, one per user.
    pub allocation: Allocation,
    pub bundles: Vec<Bundle>,
    /// Declared welfare of the bundles.
    pub welfare: Rational,
}

/// An optimizer over a fixed, declaration-independent range.
pub trait RangeOptimizer: Sync {
    fn name(&self) -> &str;

    fn optimize(&self, instance: &Instance) -> Result<RangeOutcome>;

    /// Value of `bundle` to a user whose demands are `user`.
    fn bundle_value(&self, user: &DemandSet, bundle: &Bundle) -> Result<Rational>;
}

fn point_value(user: &DemandSet, bundle: &Bundle) -> Result<Rational> {
    match bundle {
        Bundle::Point(p) => Ok(extended_value(user, p)),
        Bundle::Coords { .. } => Err(Error::InvalidInput("expected a point bundle".into())),
    }
}

/// The bi-criteria grid range; capacity may be exceeded by `1 + 2 eps`.
pub struct FptasMechanism {
    range: GridRange,
}

impl FptasMechanism {
    pub fn new(capacity: &Rational, n: usize, eps: &Epsilon, p: &Rational) -> Result<Self> {
        Ok(FptasMechanism {
            range: GridRange::new(RoundingContext::new(capacity, n, eps, p)?),
        })
    }
}

impl RangeOptimizer for FptasMechanism {
    fn name(&self) -> &str {
        "fptas"
    }

    fn optimize(&self, instance: &Instance) -> Result<RangeOutcome> {
        let sol = self.range.optimize(instance)?;
        let entries: Vec<usize> = instance
            .users()
            .iter()
            .zip(&sol.bundles)
            .map(|(u, b)| best_dominated_entry(u, b))
            .collect();
        Ok(RangeOutcome {
            allocation: Allocation::from_entries(instance, &entries)?,
            bundles: sol.bundles.into_iter().map(Bundle::Point).collect(),
            welfare: sol.welfare,
        })
    }

    fn bundle_value(&self, user: &DemandSet, bundle: &Bundle) -> Result<Rational> {
        point_value(user, bundle)
    }
}

/// The truthful polygon range over a fixed demand universe.
pub struct TruthfulPtasMechanism {
    range: TruthfulRange,
}

impl TruthfulPtasMechanism {
    pub fn new(capacity: &Rational, n: usize, universe: &[ComplexDemand], params: &TruthfulParams) -> Result<Self> {
        Ok(TruthfulPtasMechanism {
            range: TruthfulRange::build(capacity, n, universe, params)?,
        })
    }

    pub fn range(&self) -> &TruthfulRange {
        &self.range
    }
}

impl RangeOptimizer for TruthfulPtasMechanism {
    fn name(&self) -> &str {
        "truthful-ptas"
    }

    fn optimize(&self, instance: &Instance) -> Result<RangeOutcome> {
        let sol = self.range.optimize(instance)?;
        let bundles = sol
            .inner
            .bundles
            .iter()
            .map(|c| Bundle::Coords {
                cell: sol.cell,
                coords: c.clone(),
            })
            .collect();
        Ok(RangeOutcome {
            allocation: sol.allocation,
            bundles,
            welfare: sol.welfare,
        })
    }

    fn bundle_value(&self, user: &DemandSet, bundle: &Bundle) -> Result<Rational> {
        match bundle {
            Bundle::Coords { cell, coords } => self.range.bundle_value(user, *cell, coords),
            Bundle::Point(_) => Err(Error::InvalidInput("expected a projected bundle".into())),
        }
    }
}

/// Restricted range on the real and imaginary axes separately, each with
/// capacity `7C/10`, so every element fits in the circle.
pub struct MdkpMechanism {
    range: RestrictedRange,
}

fn axis_coords(d: &ComplexDemand) -> Vec<Rational> {
    vec![d.re.clone(), d.im.clone()]
}

impl MdkpMechanism {
    pub fn new(capacity: &Rational, n: usize, universe: &[ComplexDemand], eps: &Epsilon) -> Result<Self> {
        if universe.iter().any(|d| d.re.is_negative() || d.im.is_negative()) {
            return Err(Error::PreconditionViolated("axis mechanism needs first-quadrant demands".into()));
        }
        let side = capacity * rat(7, 10);
        let range = RestrictedRange::new(
            n,
            vec![side.clone(), side],
            universe.iter().map(axis_coords).collect(),
            eps,
            DEFAULT_BUDGET,
        )?;
        Ok(MdkpMechanism { range })
    }
}

impl RangeOptimizer for MdkpMechanism {
    fn name(&self) -> &str {
        "mdkp"
    }

    fn optimize(&self, instance: &Instance) -> Result<RangeOutcome> {
        if !instance.is_first_quadrant() {
            return Err(Error::PreconditionViolated("axis mechanism needs first-quadrant demands".into()));
        }
        let users = instance
            .users()
            .iter()
            .map(|u| {
                u.entries()
                    .iter()
                    .map(|e| MdkpEntry {
                        coords: axis_coords(&e.demand),
                        value: e.value.clone(),
                    })
                    .collect()
            })
            .collect();
        let inst = MdkpInstance::new(self.range.capacity().to_vec(), users)?;
        let sol = self.range.optimize(&inst)?;
        Ok(RangeOutcome {
            allocation: Allocation::from_entries(instance, &sol.entries)?,
            bundles: sol
                .bundles
                .iter()
                .map(|c| Bundle::Coords {
                    cell: sol.cell,
                    coords: c.clone(),
                })
                .collect(),
            welfare: sol.welfare,
        })
    }

    fn bundle_value(&self, user: &DemandSet, bundle: &Bundle) -> Result<Rational> {
        match bundle {
            Bundle::Coords { coords, .. } => Ok(user
                .entries()
                .iter()
                .filter(|e| e.demand.re <= coords[0] && e.demand.im <= coords[1])
                .map(|e| e.value.clone())
                .max()
                .unwrap_or_else(Rational::zero)),
            Bundle::Point(_) => Err(Error::InvalidInput("expected an axis bundle".into())),
        }
    }
}

/// The exact optimum over all feasible allocations.
pub struct OracleMechanism;

impl RangeOptimizer for OracleMechanism {
    fn name(&self) -> &str {
        "oracle"
    }

    fn optimize(&self, instance: &Instance) -> Result<RangeOutcome> {
        let (w, a) = brute_force_opt(instance, &int(1))?;
        let bundles = (0..instance.n()).map(|k| Bundle::Point(a.demand_of(instance, k))).collect();
        Ok(RangeOutcome {
            allocation: a,
            bundles,
            welfare: w,
        })
    }

    fn bundle_value(&self, user: &DemandSet, bundle: &Bundle) -> Result<Rational> {
        point_value(user, bundle)
    }
}

/// Deliberately not maximal-in-range: user 0 is shut out whenever it
/// declares a value above 5. Exists to exercise the audit.
pub struct ExcludingOptimizer;

impl RangeOptimizer for ExcludingOptimizer {
    fn name(&self) -> &str {
        "excluding"
    }

    fn optimize(&self, instance: &Instance) -> Result<RangeOutcome> {
        let mut users = instance.users().to_vec();
        if users.first().is_some_and(|u| u.max_value() > int(5)) {
            users[0] = users[0].with_zero_values();
        }
        let reduced = Instance::new(instance.capacity().clone(), users)?;
        let out = OracleMechanism.optimize(&reduced)?;
        let welfare = instance
            .users()
            .iter()
            .zip(&out.bundles)
            .map(|(u, b)| point_value(u, b))
            .sum::<Result<Rational>>()?;
        let entries: Vec<usize> = instance
            .users()
            .iter()
            .zip(&out.bundles)
            .map(|(u, b)| match b {
                Bundle::Point(p) => best_dominated_entry(u, p),
                Bundle::Coords { .. } => u.zero_index(),
            })
            .collect();
        Ok(RangeOutcome {
            allocation: Allocation::from_entries(instance, &entries)?,
            bundles: out.bundles,
            welfare,
        })
    }

    fn bundle_value(&self, user: &DemandSet, bundle: &Bundle) -> Result<Rational> {
        point_value(user, bundle)
    }
}

/// Outcome plus Clarke-pivot payments.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismOutcome {
    pub outcome: RangeOutcome,
    pub payments: Vec<Rational>,
    /// Declared value of each user's bundle.
    pub values: Vec<Rational>,
}

/// Welfare of the range optimum with user `k`'s values zeroed.
pub fn pivot_welfare(opt: &dyn RangeOptimizer, instance: &Instance, k: usize) -> Result<Rational> {
    let without = instance.with_user(k, instance.users()[k].with_zero_values())?;
    Ok(opt.optimize(&without)?.welfare)
}

fn bundle_values(opt: &dyn RangeOptimizer, instance: &Instance, out: &RangeOutcome) -> Result<Vec<Rational>> {
    instance
        .users()
        .iter()
        .zip(&out.bundles)
        .map(|(u, b)| opt.bundle_value(u, b))
        .collect()
}

/// Runs the range optimizer and charges each user the welfare loss it
/// imposes on the others.
pub fn run_mechanism(opt: &dyn RangeOptimizer, instance: &Instance) -> Result<MechanismOutcome> {
    let outcome = opt.optimize(instance)?;
    let values = bundle_values(opt, instance, &outcome)?;
    let total: Rational = values.iter().sum();
    let payments = (0..instance.n())
        .map(|k| Ok(pivot_welfare(opt, instance, k)? - (&total - &values[k])))
        .collect::<Result<Vec<_>>>()?;
    Ok(MechanismOutcome {
        outcome,
        payments,
        values,
    })
}

/// Misreport families tried by the audit.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditOptions {
    /// Values tried for each reported entry.
    pub value_grid: Vec<Rational>,
    /// Largest number of true entries kept in a report.
    pub max_subset: usize,
    /// Also report single demands inflated to dominating universe points.
    pub inflate: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            value_grid: (0..=10).map(int).collect(),
            max_subset: 2,
            inflate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub user: usize,
    pub report: DemandSet,
    pub truthful_utility: Rational,
    pub misreport_utility: Rational,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct AuditReport {
    pub misreports: usize,
    pub violations: Vec<Violation>,
    /// Users charged a negative payment under truthful reports.
    pub negative_payments: Vec<usize>,
    /// Users with negative utility under truthful reports.
    pub individual_rationality: Vec<usize>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.negative_payments.is_empty() && self.individual_rationality.is_empty()
    }
}

fn value_assignments(grid: &[Rational], len: usize) -> Vec<Vec<Rational>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                grid.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    out
}

fn index_subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for i in 0..n {
        let more: Vec<Vec<usize>> = out
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| {
                let mut t = s.clone();
                t.push(i);
                t
            })
            .collect();
        out.extend(more);
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

fn entry_value_nonzero(v: &Rational, d: &ComplexDemand) -> Rational {
    if d.is_zero() {
        Rational::zero()
    } else {
        v.clone()
    }
}

/// Reports for one user: subsets of the true demands with values from the
/// grid, and single true demands inflated to dominating universe points.
pub fn misreports(user: &DemandSet, universe: &[ComplexDemand], options: &AuditOptions) -> Result<Vec<DemandSet>> {
    let quadrant = user.quadrant();
    let truth: Vec<&DemandEntry> = user.declared_entries().iter().filter(|e| !e.demand.is_zero()).collect();
    let mut out = Vec::new();
    for subset in index_subsets(truth.len(), options.max_subset) {
        for values in value_assignments(&options.value_grid, subset.len()) {
            let entries = subset
                .iter()
                .zip(&values)
                .map(|(&i, v)| DemandEntry::new(truth[i].demand.clone(), v.clone()))
                .collect();
            out.push(DemandSet::with_quadrant(user.user_id(), entries, quadrant)?);
        }
    }
    if options.inflate {
        let top = options.value_grid.iter().max().cloned().unwrap_or_else(Rational::zero);
        for e in &truth {
            for u in universe {
                if *u == e.demand || !prec_leq(&e.demand, u) || !same_quadrant(u, quadrant) {
                    continue;
                }
                for v in [e.value.clone(), top.clone()] {
                    let entry = DemandEntry::new(u.clone(), entry_value_nonzero(&v, u));
                    out.push(DemandSet::with_quadrant(user.user_id(), vec![entry], quadrant)?);
                }
            }
        }
    }
    out.dedup();
    Ok(out)
}

fn same_quadrant(d: &ComplexDemand, q: Quadrant) -> bool {
    d.is_zero() || (d.re.is_negative() == (q == Quadrant::NegativeRe))
}

/// Tries every misreport of every user against truthful reporting, with
/// utilities measured by the true valuation. Also checks payments are
/// nonnegative and truthful utilities are not.
pub fn audit_truthfulness(opt: &dyn RangeOptimizer, instance: &Instance, options: &AuditOptions) -> Result<AuditReport> {
    let truthful = run_mechanism(opt, instance)?;
    let universe = instance.demand_universe();
    let mut report = AuditReport::default();
    for k in 0..instance.n() {
        let true_user = &instance.users()[k];
        let utility = &truthful.values[k] - &truthful.payments[k];
        if truthful.payments[k].is_negative() {
            report.negative_payments.push(k);
        }
        if utility.is_negative() {
            report.individual_rationality.push(k);
        }
        let pivot = pivot_welfare(opt, instance, k)?;
        let reports = misreports(true_user, &universe, options)?;
        report.misreports += reports.len();
        let found: Vec<Option<Violation>> = reports
            .into_par_iter()
            .map(|r| {
                let lied = instance.with_user(k, r.clone())?;
                let out = opt.optimize(&lied)?;
                let others: Rational = (0..instance.n())
                    .filter(|&j| j != k)
                    .map(|j| opt.bundle_value(&instance.users()[j], &out.bundles[j]))
                    .sum::<Result<Rational>>()?;
                let gain = opt.bundle_value(true_user, &out.bundles[k])? - (&pivot - others);
                Ok((gain > utility).then(|| Violation {
                    user: k,
                    report: r,
                    truthful_utility: utility.clone(),
                    misreport_utility: gain,
                }))
            })
            .collect::<Result<_>>()?;
        report.violations.extend(found.into_iter().flatten());
    }
    Ok(report)
}

/// Ratio of the mechanism's welfare to the exact optimum (1 when the
/// optimum is 0).
pub fn social_efficiency_ratio(opt: &dyn RangeOptimizer, instance: &Instance) -> Result<Rational> {
    let (best, _) = brute_force_opt(instance, &int(1))?;
    let got = opt.optimize(instance)?.welfare;
    Ok(if best.is_zero() { int(1) } else { got / best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Instance {
        let users = vec![
            DemandSet::from_ints(1, &[(3, 4, 10)]).unwrap(),
            DemandSet::from_ints(2, &[(4, 3, 10)]).unwrap(),
            DemandSet::from_ints(3, &[(5, 0, 12)]).unwrap(),
        ];
        Instance::new(int(5), users).unwrap()
    }

    #[test]
    fn oracle_payments_are_clarke_pivots() {
        let inst = fixture();
        let out = run_mechanism(&OracleMechanism, &inst).unwrap();
        assert_eq!(out.outcome.welfare, int(12));
        // the winner pays the best welfare of the others
        assert_eq!(out.payments, vec![int(0), int(0), int(10)]);
    }

    #[test]
    fn oracle_is_truthful_and_excluding_is_not() {
        let inst = fixture();
        let opts = AuditOptions::default();
        assert!(audit_truthfulness(&OracleMechanism, &inst, &opts).unwrap().passed());
        let users = vec![
            DemandSet::from_ints(1, &[(3, 0, 8)]).unwrap(),
            DemandSet::from_ints(2, &[(3, 0, 4)]).unwrap(),
        ];
        let inst = Instance::new(int(4), users).unwrap();
        let report = audit_truthfulness(&ExcludingOptimizer, &inst, &opts).unwrap();
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn misreport_families() {
        let u = DemandSet::from_ints(1, &[(1, 0, 3), (0, 1, 2)]).unwrap();
        let opts = AuditOptions {
            value_grid: vec![int(0), int(1)],
            max_subset: 2,
            inflate: false,
        };
        // empty, two singletons with two values, one pair with four
        assert_eq!(misreports(&u, &[], &opts).unwrap().len(), 1 + 4 + 4);
    }
}
