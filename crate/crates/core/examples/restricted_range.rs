//! Value-independent restricted range for a two-dimensional knapsack, and
//! the exact-fit table it relies on.

use ckp::mdkp::{dp_exact_2d, extract_choices, FitOption, MdkpEntry, MdkpInstance, RestrictedRange, DEFAULT_BUDGET};
use ckp::num::{format_rational, int, Epsilon};
use ckp::oracle::brute_force_mdkp;

fn entry(coords: &[i64], v: i64) -> MdkpEntry {
    MdkpEntry {
        coords: coords.iter().map(|&x| int(x)).collect(),
        value: int(v),
    }
}

fn main() -> ckp::Result<()> {
    let users = vec![
        vec![entry(&[2, 1], 5), entry(&[1, 3], 6)],
        vec![entry(&[3, 3], 7)],
        vec![entry(&[1, 1], 2), entry(&[4, 0], 4)],
    ];
    let inst = MdkpInstance::new(vec![int(5), int(4)], users)?;
    let eps = Epsilon::new(4)?;
    let range = RestrictedRange::new(inst.n(), inst.capacity().to_vec(), inst.universe(), &eps, DEFAULT_BUDGET)?;
    let sol = range.optimize(&inst)?;
    let (opt, _) = brute_force_mdkp(&inst, 1_000_000)?;
    println!("{} cells, {} DP states", range.cells().len(), range.state_count());
    println!("range optimum {} in cell {}, exact optimum {}", format_rational(&sol.welfare), sol.cell, format_rational(&opt));
    for (k, b) in sol.bundles.iter().enumerate() {
        let b: Vec<String> = b.iter().map(format_rational).collect();
        println!("  user {k}: bundle ({}), entry {}", b.join(", "), sol.entries[k]);
    }

    let options = vec![
        vec![FitOption { demand: (1, 1), value: 5 }],
        vec![FitOption { demand: (2, 1), value: 4 }, FitOption { demand: (0, 2), value: 3 }],
    ];
    let table = dp_exact_2d(&options, 4, 4)?;
    for (a, b, v) in table.reachable() {
        println!("exact fit ({a}, {b}): value {v}, choices {:?}", extract_choices(&table, a, b)?);
    }
    Ok(())
}
