//! Session lifecycle: configuration, the randomness, query and answer
//! phases, decoding, and the two transports.

pub mod config;
pub mod demo;
pub mod net;
pub mod session;
pub mod wire;

pub use config::{parse_config, PartyConfig, SessionConfig, Transport};
pub use demo::{demo, demo_config, DemoReport, DEMO_NAMES};
pub use net::run_networked;
pub use session::{run_in_memory, run_session, Prepared, SessionTranscript};
pub use wire::{decode_msg, encode_msg, Envelope, Message, Phase};
