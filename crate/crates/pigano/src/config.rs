//! Optional TOML defaults for command-line flags.
//!
//! Every key mirrors a long flag with `-` replaced by `_`; flags given on
//! the command line win. Example:
//!
//! ```toml
//! problem = "darcy"
//! samples = 100
//! seed = 7
//! model = "gano"
//! pooling = "max"
//! lr = [1e-3, 5e-4]
//! ratio = [0.1, 0.2]
//! epochs = 2000
//! width = 64
//! batch_size = 20
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{format_err, io_err, Result};

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: Option<String>,
    pub variation: Option<String>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub interior: Option<usize>,
    pub boundary: Option<Vec<usize>>,
    pub fixed_bc: Option<bool>,
    pub eval_points: Option<usize>,
    pub walks: Option<usize>,
    pub model: Option<String>,
    pub pooling: Option<String>,
    pub fusion: Option<String>,
    pub geo_input: Option<String>,
    pub width: Option<usize>,
    pub lr: Option<Vec<f64>>,
    pub ratio: Option<Vec<f64>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| format_err(path, e.to_string()))
    }
}
