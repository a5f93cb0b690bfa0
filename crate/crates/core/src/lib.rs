//! Forecasting the age distribution of life-table death counts with
//! compositional principal components, benchmark mortality models,
//! forecast evaluation and temporary annuity pricing.

pub mod annuity;
pub mod coda;
pub mod coda_forecast;
pub mod comparators;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod forecast;
pub mod lifetable;
pub mod methods;
pub mod resample;
pub mod synthetic;
pub mod univariate;

pub use error::{Error, Result};
pub use lifetable::{DeathGrid, LifeTableRecord};
