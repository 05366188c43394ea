//! The inscribed polygon of a guessed demand sum and its candidate points.

use ckp::geometry::{candidate_points, Polygon};
use ckp::model::ComplexDemand;
use ckp::num::{int, rat, Epsilon};

fn main() -> ckp::Result<()> {
    let c = int(10);
    let eps = Epsilon::new(4)?;
    let d_t = ComplexDemand::new(rat(7, 2), int(2));
    let poly = Polygon::build(&d_t, &c, &eps)?;
    println!("guess {d_t}, levels {:?}", poly.levels());
    println!("{} sides (bound {})", poly.sides(), 18 * eps.q() + 3);
    for (v, k) in poly.vertices().iter().zip(poly.kinds()) {
        println!("  {:?} ({:.4}, {:.4})", k, v[0], v[1]);
    }
    println!("{} outer edges", poly.outer_edges().len());
    let coarse = poly.coarsened(4);
    println!("coarsened to {} sides", coarse.sides());
    for z in candidate_points(&d_t, &c, &eps)? {
        println!("candidate {z}");
    }
    Ok(())
}
