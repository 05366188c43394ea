//! Seeded random instances. The stream is ChaCha8, so a seed gives the same
//! instance on every platform.

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::{InstanceFile, Metadata};
use crate::model::{ComplexDemand, DemandEntry, DemandSet, Instance, Quadrant};
use crate::num::{int, rat, to_f64, Rational};

/// Coordinates are multiples of `1 / COORD_DENOM`.
pub const COORD_DENOM: i64 = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub n: usize,
    /// Nonzero demands per user.
    pub k: usize,
    /// Largest argument, in degrees, in `[0, 180)`.
    pub phi_max_deg: f64,
    pub seed: u64,
    pub capacity: Rational,
    /// Demand magnitudes are drawn from `[lo, hi] * C`.
    pub magnitude: (f64, f64),
    /// Values are integers drawn uniformly from this inclusive range.
    pub values: (u32, u32),
}

impl GenParams {
    pub fn new(n: usize, k: usize, phi_max_deg: f64, seed: u64) -> Self {
        GenParams {
            n,
            k,
            phi_max_deg,
            seed,
            capacity: int(10),
            magnitude: (0.1, 0.7),
            values: (1, 100),
        }
    }
}

fn round_coord(x: f64) -> Rational {
    rat((x * COORD_DENOM as f64).round() as i64, COORD_DENOM)
}

fn draw_demand(rng: &mut ChaCha8Rng, p: &GenParams, lo_deg: f64, hi_deg: f64, quadrant: Quadrant) -> ComplexDemand {
    let c = to_f64(&p.capacity);
    let c2 = &p.capacity * &p.capacity;
    let phi = p.phi_max_deg.to_radians();
    loop {
        let a = rng.gen_range(lo_deg..=hi_deg).to_radians();
        let r = c * rng.gen_range(p.magnitude.0..=p.magnitude.1);
        let d = ComplexDemand::new(round_coord(r * a.cos()), round_coord(r * a.sin()));
        let ok_quadrant = match quadrant {
            Quadrant::NonNegativeRe => !d.re.is_negative(),
            Quadrant::NegativeRe => d.re.is_negative(),
        };
        if !d.is_zero() && !d.im.is_negative() && ok_quadrant && d.norm_sq() <= c2 && d.arg() <= phi + 1e-12 {
            return d;
        }
    }
}

pub fn generate(p: &GenParams) -> Result<Instance> {
    if !(0.0..180.0).contains(&p.phi_max_deg) {
        return Err(Error::InvalidInput(format!("phi_max_deg must lie in [0, 180), got {}", p.phi_max_deg)));
    }
    if p.k == 0 || !p.capacity.is_positive() {
        return Err(Error::InvalidInput("need at least one demand per user and a positive capacity".into()));
    }
    let (lo, hi) = p.magnitude;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidInput("magnitude bounds must satisfy 0 < lo <= hi <= 1".into()));
    }
    if p.values.0 == 0 || p.values.0 > p.values.1 {
        return Err(Error::InvalidInput("value range must satisfy 1 <= lo <= hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut users = Vec::with_capacity(p.n);
    for id in 0..p.n {
        let negative = p.phi_max_deg > 90.0 && rng.gen_bool((p.phi_max_deg - 90.0) / p.phi_max_deg);
        let (quadrant, lo_deg, hi_deg) = if negative {
            (Quadrant::NegativeRe, 90.0, p.phi_max_deg)
        } else {
            (Quadrant::NonNegativeRe, 0.0, p.phi_max_deg.min(90.0))
        };
        let mut entries: Vec<DemandEntry> = Vec::with_capacity(p.k);
        while entries.len() < p.k {
            let d = draw_demand(&mut rng, p, lo_deg, hi_deg, quadrant);
            let v = int(rng.gen_range(p.values.0..=p.values.1) as i64);
            if entries.iter().all(|e| e.demand != d) {
                entries.push(DemandEntry::new(d, v));
            }
        }
        users.push(DemandSet::with_quadrant(id as u32 + 1, entries, quadrant)?);
    }
    Instance::new(p.capacity.clone(), users)
}

/// Generated instance as a file, with the parameters recorded.
pub fn generate_file(p: &GenParams) -> Result<InstanceFile> {
    let inst = generate(p)?;
    Ok(InstanceFile::from_instance(
        &inst,
        Some(Metadata {
            phi_max_deg: Some(p.phi_max_deg),
            seed: Some(p.seed),
            tan_theta: Some(inst.theta().tan()),
        }),
    ))
}
