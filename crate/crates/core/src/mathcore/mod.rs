//! Vector primitives and shaping functions.

mod disc;
mod shaping;
mod vec2;

pub use disc::{min_enclosing_disc, Disc};
pub use shaping::{
    bump, bump_deriv, kappa, saturate, smooth_sat, smooth_sat_deriv, smooth_sat_eps_max,
    smooth_sat_knots,
};
pub(crate) use shaping::{
    bump_deriv_unchecked, bump_unchecked, check_eps_s, saturate_unchecked,
    smooth_sat_deriv_unchecked, smooth_sat_unchecked,
};
pub use vec2::Vec2;
