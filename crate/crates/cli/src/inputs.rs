use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use renyi_core::channels::{Povm, QuantumChannel};
use renyi_core::reldiff::RelDiffInstance;
use renyi_core::states::{DensityOperator, Ensemble};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// `(rho, sigma, N)` on disk.
#[derive(Serialize, Deserialize)]
pub struct InstanceDoc {
    pub rho: DensityOperator,
    pub sigma: DensityOperator,
    pub channel: QuantumChannel,
}

impl InstanceDoc {
    pub fn instance(&self) -> Result<RelDiffInstance, String> {
        RelDiffInstance::new(&self.rho, &self.sigma, self.channel.clone()).map_err(|e| e.to_string())
    }
}

#[derive(Deserialize)]
pub struct JointConvexityDoc {
    pub rhos: Ensemble,
    pub sigmas: Ensemble,
}

#[derive(Deserialize)]
pub struct HolevoDoc {
    pub ensemble: Ensemble,
    pub povm: Povm,
}

#[derive(Deserialize)]
pub struct DiscordDoc {
    pub state: DensityOperator,
    pub povm: Povm,
}
