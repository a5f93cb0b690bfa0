//! Deterministic Gompertz-Makeham period life tables used as test fixtures.
//!
//! The senescent hazard is `c * exp(c * (x - M_t))`, whose death density has
//! its mode at `M_t`. `M_t` advances by a non-negative random step each year,
//! so the modal age of the generated tables never moves backwards. Noise on
//! the infant, child and young-adult hazards adds period variation without
//! touching old-age mortality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lifetable::{
    deaths_from_q, rebuild_death_grid, DeathGrid, LifeTableRecord, HMD_AGES, RADIX,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticProfile {
    pub first_year: i32,
    pub infant_q0: f64,
    pub infant_decline: f64,
    pub child_hazard: f64,
    pub child_decline: f64,
    pub background: f64,
    pub background_decline: f64,
    pub hump: f64,
    pub gompertz_slope: f64,
    pub modal_age_start: f64,
    pub modal_drift: f64,
    pub noise: f64,
}

impl SyntheticProfile {
    pub fn female() -> Self {
        Self {
            first_year: 1921,
            infant_q0: 0.06,
            infant_decline: 0.035,
            child_hazard: 0.006,
            child_decline: 0.04,
            background: 0.0025,
            background_decline: 0.015,
            hump: 0.0004,
            gompertz_slope: 0.105,
            modal_age_start: 77.0,
            modal_drift: 0.14,
            noise: 0.08,
        }
    }

    pub fn male() -> Self {
        Self {
            first_year: 1921,
            infant_q0: 0.075,
            infant_decline: 0.033,
            child_hazard: 0.007,
            child_decline: 0.035,
            background: 0.003,
            background_decline: 0.012,
            hump: 0.0015,
            gompertz_slope: 0.095,
            modal_age_start: 73.0,
            modal_drift: 0.13,
            noise: 0.1,
        }
    }
}

/// Synthetic female-like grid over `n_years` (from 1921) with 111 ages.
pub fn synthetic_grid(n_years: usize, seed: u64) -> DeathGrid {
    synthetic_grid_with(&SyntheticProfile::female(), n_years, seed)
}

pub fn synthetic_grid_with(profile: &SyntheticProfile, n_years: usize, seed: u64) -> DeathGrid {
    assert!(n_years >= 2, "synthetic grid needs at least two years");
    let records = synthetic_records(profile, n_years, seed);
    rebuild_death_grid(&records, RADIX)
        .expect("synthetic records are valid by construction")
        .grid
}

/// Synthetic period life-table records, one year per row block.
pub fn synthetic_records(
    profile: &SyntheticProfile,
    n_years: usize,
    seed: u64,
) -> Vec<LifeTableRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_years * HMD_AGES);
    let mut modal_age = profile.modal_age_start;
    let c = profile.gompertz_slope;
    for t in 0..n_years {
        if t > 0 {
            modal_age += profile.modal_drift * 2.0 * rng.random::<f64>();
        }
        let year_shock = gaussian(&mut rng);
        let tf = t as f64;

        let mut q = vec![0.0; HMD_AGES];
        q[0] = (profile.infant_q0
            * (-profile.infant_decline * tf + profile.noise * year_shock).exp())
        .min(0.5);
        let child = profile.child_hazard * (-profile.child_decline * tf).exp();
        let background = profile.background * (-profile.background_decline * tf).exp();
        for (x, qx) in q.iter_mut().enumerate().take(HMD_AGES - 1).skip(1) {
            let age = x as f64;
            let shock = (profile.noise * (year_shock + 0.5 * gaussian(&mut rng))).exp();
            let young = child * (-0.5 * (age - 1.0)).exp()
                + profile.hump * (-((age - 21.0) / 7.0).powi(2)).exp();
            let senescent = c * (c * (age - modal_age)).exp();
            let hazard = young * shock + background + senescent;
            *qx = 1.0 - (-hazard).exp();
        }
        q[HMD_AGES - 1] = 1.0;

        let deaths = deaths_from_q(&q, RADIX);
        let mut alive = RADIX;
        for (x, (&qx, &dx)) in q.iter().zip(&deaths).enumerate() {
            records.push(LifeTableRecord {
                year: profile.first_year + t as i32,
                age: x,
                qx: Some(qx),
                lx: Some(alive),
                dx_reported: Some(dx),
            });
            alive -= dx;
        }
    }
    records
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
