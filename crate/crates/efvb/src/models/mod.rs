//! Shipped state space models.

pub mod skellam;
pub mod sv;

use std::sync::Arc;

use crate::error::Error;
use crate::model::{Registry, StateSpaceModel};

/// Register the models shipped with the crate under their config names.
pub fn register_defaults(reg: &mut Registry) {
    reg.register(
        "sv",
        Arc::new(|_data, options| {
            let mut model = sv::SvModel::default();
            if let Some(a) = options.get_f64("prior_alpha") {
                model.alpha = a;
            }
            if let Some(b) = options.get_f64("prior_beta") {
                model.beta = b;
            }
            Ok(Arc::new(model))
        }),
    );
    reg.register(
        "skellam",
        Arc::new(|data, options| {
            let spec = skellam::SkellamSpec::from_options(options)?;
            let model = match data {
                Some(y) => skellam::SkellamModel::for_data(spec, y)?,
                None => skellam::SkellamModel::for_simulation(spec)?,
            };
            if model.dim_obs() == 0 {
                return Err(Error::Config("skellam needs n_assets >= 1".into()));
            }
            Ok(Arc::new(model))
        }),
    );
}
