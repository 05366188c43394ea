//! Polygon-guessing approximation scheme on a random first-quadrant instance,
//! with both completion backends.

use ckp::gen::{generate, GenParams};
use ckp::model::violation_squared;
use ckp::num::{format_rational, int, Epsilon};
use ckp::oracle::brute_force_opt;
use ckp::ptas::{construct_witness, solve_ptas, Backend};

fn main() -> ckp::Result<()> {
    let mut p = GenParams::new(5, 2, 90.0, 42);
    p.magnitude = (0.05, 0.4);
    let inst = generate(&p)?;
    let eps = Epsilon::new(4)?;
    let (opt, best) = brute_force_opt(&inst, &int(1))?;
    println!("optimum {}", format_rational(&opt));
    for backend in [Backend::brute_force(), Backend::restricted_range()] {
        let sol = solve_ptas(&inst, &eps, backend)?;
        println!(
            "{backend:?}: welfare {} over {} guesses, |total|^2/C^2 = {}",
            format_rational(&sol.welfare),
            sol.guesses,
            format_rational(&violation_squared(sol.allocation.total(), inst.capacity()))
        );
    }
    let w = construct_witness(&inst, &best, &eps)?;
    println!("witness of the optimum: case {:?}, guessed users {:?}, dropped {:?}", w.case, w.t_users, w.removed);
    Ok(())
}
