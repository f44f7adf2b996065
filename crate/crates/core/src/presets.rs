//! Embedded input documents for the systems and parameters discussed with the
//! method: four spin-1/2 blocks, four spin-7/2 blocks, the twelve-site
//! two-shell lattice and the phosphorus-in-silicon rate estimate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::BlockSystem;
use crate::dynamics::ProtocolConfig;
use crate::error::{domain, Error, Result};
use crate::lattice::{dnsp_rates, DnspParameters, LatticeModel, LOW_LOSS_FACTOR};
use crate::theory::RateBudget;
use crate::HalfInt;

/// A block system together with the protocol to run on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDocument {
    pub system: BlockSystem,
    pub protocol: ProtocolConfig,
}

impl SimulationDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SimulationDocument = serde_json::from_str(text)?;
        doc.protocol.validate()?;
        Ok(doc)
    }
}

fn default_factor() -> f64 {
    LOW_LOSS_FACTOR
}

/// Physical parameters for the rate estimate and low-loss budget, all
/// frequencies in one unit (Hz in the embedded preset).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesDocument {
    pub dnsp: DnspParameters,
    pub gamma_n: f64,
    /// Number of spins in the squeezed ensemble.
    pub n: usize,
    #[serde(rename = "twice_s")]
    pub s: HalfInt,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

impl RatesDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn budget(&self) -> Result<RateBudget> {
        let rates = dnsp_rates(&self.dnsp)?;
        Ok(RateBudget { lambda_h: rates.lambda_h, lambda_o: rates.lambda_o, gamma_n: self.gamma_n, n: self.n, s: self.s })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    FourHalf,
    Fig2,
    Fig3,
    Silicon,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::FourHalf, Preset::Fig2, Preset::Fig3, Preset::Silicon];

    pub fn name(self) -> &'static str {
        match self {
            Preset::FourHalf => "four-half",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Silicon => "silicon",
        }
    }

    /// The embedded JSON document.
    pub fn document(self) -> &'static str {
        match self {
            Preset::FourHalf => include_str!("../presets/four-half.json"),
            Preset::Fig2 => include_str!("../presets/fig2.json"),
            Preset::Fig3 => include_str!("../presets/fig3.json"),
            Preset::Silicon => include_str!("../presets/silicon.json"),
        }
    }

    pub fn simulation(self) -> Result<SimulationDocument> {
        match self {
            Preset::FourHalf | Preset::Fig2 => SimulationDocument::from_json(self.document()),
            _ => domain(format!("preset {self} does not describe a block system")),
        }
    }

    pub fn lattice(self) -> Result<LatticeModel> {
        match self {
            Preset::Fig3 => LatticeModel::from_json(self.document()),
            _ => domain(format!("preset {self} does not describe a lattice")),
        }
    }

    pub fn rates(self) -> Result<RatesDocument> {
        match self {
            Preset::Silicon => RatesDocument::from_json(self.document()),
            _ => domain(format!("preset {self} does not describe rate parameters")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown preset {s:?}")))
    }
}
