//! Baseband physical layer: power split between the digital and analog
//! streams, I/Q superposition, the AWGN channel, and the matching receivers.

mod channel;
mod modulation;
mod power;
mod receiver;

pub use channel::{awgn_channel, ChannelConfig, Received};
pub use modulation::{
    modulate_analog, modulate_hybrid, normalization_factor, qam_llr, qam_modulate, Modulation,
    SymbolFrame,
};
pub use power::{db_to_linear, linear_to_db, plan_power, PowerPlan};
pub use receiver::{compute_llr, mmse_denoise};

pub type Complex<T> = num_complex::Complex<T>;
