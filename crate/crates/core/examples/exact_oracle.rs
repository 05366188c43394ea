//! Exhaustive optimum of a small instance, with and without capacity
//! augmentation.

use ckp::model::{DemandSet, Instance};
use ckp::num::{format_rational, int};
use ckp::oracle::brute_force_opt;

fn main() -> ckp::Result<()> {
    let users = vec![
        DemandSet::from_ints(1, &[(3, 4, 10)])?,
        DemandSet::from_ints(2, &[(4, 3, 10)])?,
        DemandSet::from_ints(3, &[(5, 0, 12)])?,
    ];
    let inst = Instance::new(int(5), users)?;
    for beta in [int(1), int(2)] {
        let (opt, a) = brute_force_opt(&inst, &beta)?;
        println!(
            "beta = {}: welfare {}, entries {:?}, total {}",
            format_rational(&beta),
            format_rational(&opt),
            a.entry_indices().unwrap_or_default(),
            a.total()
        );
    }
    Ok(())
}
