//! Bi-criteria scheme on wide-angle demands: at least the optimum welfare,
//! capacity exceeded by at most a factor 1 + 3 eps.

use ckp::fptas::{solve_bifptas, RoundingContext};
use ckp::gen::{generate, GenParams};
use ckp::model::violation_squared;
use ckp::num::{format_rational, int, Epsilon};
use ckp::oracle::brute_force_opt;

fn main() -> ckp::Result<()> {
    let inst = generate(&GenParams::new(6, 3, 150.0, 7))?;
    let p = int(inst.theta().tan().ceil().max(1.0) as i64);
    let (opt, _) = brute_force_opt(&inst, &int(1))?;
    println!("theta = {:.1} deg, P = {}, optimum {}", inst.theta().to_degrees(), p, format_rational(&opt));
    for q in [4, 10] {
        let eps = Epsilon::new(q)?;
        let ctx = RoundingContext::for_instance(&inst, &eps, &p)?;
        let sol = solve_bifptas(&inst, &eps, &p)?;
        println!(
            "eps = 1/{q}: unit {}, {} guesses, welfare {}, |total|^2/C^2 = {}",
            format_rational(ctx.unit()),
            sol.guesses,
            format_rational(&sol.welfare),
            format_rational(&violation_squared(sol.allocation.total(), inst.capacity()))
        );
    }
    Ok(())
}
