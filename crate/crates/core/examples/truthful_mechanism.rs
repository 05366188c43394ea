//! Maximal-in-range allocation with VCG payments for the grid-range and the
//! polygon-range mechanisms.

use ckp::gen::{generate, GenParams};
use ckp::mechanism::{run_mechanism, FptasMechanism, RangeOptimizer, TruthfulPtasMechanism};
use ckp::model::Instance;
use ckp::num::{format_rational, int, Epsilon};
use ckp::ptas::TruthfulParams;

fn show(mech: &dyn RangeOptimizer, inst: &Instance) -> ckp::Result<()> {
    let out = run_mechanism(mech, inst)?;
    println!("{}: welfare {}", mech.name(), format_rational(&out.outcome.welfare));
    for k in 0..inst.n() {
        println!(
            "  user {}: value {}, payment {}",
            inst.users()[k].user_id(),
            format_rational(&out.values[k]),
            format_rational(&out.payments[k])
        );
    }
    Ok(())
}

fn main() -> ckp::Result<()> {
    let mut p = GenParams::new(2, 2, 20.0, 5);
    p.magnitude = (0.2, 0.6);
    p.values = (1, 10);
    let inst = generate(&p)?;
    show(&FptasMechanism::new(inst.capacity(), inst.n(), &Epsilon::new(4)?, &int(1))?, &inst)?;
    let mut params = TruthfulParams::new(Epsilon::new(2)?, 1.2);
    params.side_cap = Some(3);
    params.max_guess = Some(1);
    let mech = TruthfulPtasMechanism::new(inst.capacity(), inst.n(), &inst.demand_universe(), &params)?;
    println!("refined eps = 1/{}, {} cells", mech.range().eps_prime().q(), mech.range().cells().len());
    show(&mech, &inst)
}
