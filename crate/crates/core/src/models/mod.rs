//! Plant models.

pub mod ecm;
pub mod pack;
pub mod perturb;
pub mod reference;
pub mod spmet;
pub mod toy;

pub use ecm::{EcmModel, EcmParams, EcmState, SocStatus, VoltageOutput};
pub use pack::{OutputFamily, PackModel, PackParams, PairMode};
pub use perturb::{perturb_params, perturb_params_stream, vary_rc_links};
pub use spmet::{DefaultPotentials, ElectrolyteRegion, Potentials, SpmetModel, SpmetParams, SpmetState};
pub use toy::LinearPlant;
