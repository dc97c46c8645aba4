pub mod error;
pub mod linalg;
pub mod quantum;
pub mod tomography;
pub mod wavepacket;
pub mod model;
pub mod optimize;
pub mod fit;
pub mod mle;
pub mod accidentals;
pub mod ablation;
pub mod io;
pub mod cli;

pub use error::{Error, Result};
