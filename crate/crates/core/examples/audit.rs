//! Exhaustive misreport audit: maximal-in-range mechanisms pass, an
//! optimizer that shuts out a high bidder does not.

use ckp::mechanism::{audit_truthfulness, AuditOptions, ExcludingOptimizer, FptasMechanism, MdkpMechanism, OracleMechanism, RangeOptimizer};
use ckp::model::{DemandSet, Instance};
use ckp::num::{int, Epsilon};

fn main() -> ckp::Result<()> {
    let users = vec![
        DemandSet::from_ints(1, &[(3, 0, 8)])?,
        DemandSet::from_ints(2, &[(3, 0, 4), (1, 1, 2)])?,
    ];
    let inst = Instance::new(int(4), users)?;
    let eps = Epsilon::new(4)?;
    let mechs: Vec<Box<dyn RangeOptimizer>> = vec![
        Box::new(OracleMechanism),
        Box::new(FptasMechanism::new(inst.capacity(), inst.n(), &eps, &int(1))?),
        Box::new(MdkpMechanism::new(inst.capacity(), inst.n(), &inst.demand_universe(), &eps)?),
        Box::new(ExcludingOptimizer),
    ];
    let options = AuditOptions::default();
    for mech in &mechs {
        let r = audit_truthfulness(mech.as_ref(), &inst, &options)?;
        println!(
            "{:>10}: {} misreports, {} violations, passed {}",
            mech.name(),
            r.misreports,
            r.violations.len(),
            r.passed()
        );
        if let Some(v) = r.violations.first() {
            println!("            user {} gains {} -> {}", v.user, v.truthful_utility, v.misreport_utility);
        }
    }
    Ok(())
}
