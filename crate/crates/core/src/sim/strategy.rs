use serde::{Deserialize, Serialize};

use crate::model::{Conduct, PublicSignal};

/// A deterministic public strategy: the chosen conduct depends only on the
/// epoch index and the sequence of public signals observed so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    AlwaysConform,
    AlwaysLate,
    DefaultAtEpoch {
        epoch: u64,
    },
    /// Conforms while the public history is free of defaults, then stays
    /// out of the market.
    #[default]
    GrimConform,
    /// Conforms everywhere except for a single epoch.
    DeviateOnce {
        epoch: u64,
        conduct: Conduct,
    },
}

impl Strategy {
    /// `None` means the agent stays out of the market this epoch.
    pub fn choose(&self, epoch: u64, history: &[PublicSignal]) -> Option<Conduct> {
        match *self {
            Strategy::AlwaysConform => Some(Conduct::Conform),
            Strategy::AlwaysLate => Some(Conduct::Late),
            Strategy::DefaultAtEpoch { epoch: k } if epoch == k => Some(Conduct::Default),
            Strategy::DefaultAtEpoch { .. } => Some(Conduct::Conform),
            Strategy::GrimConform if history.iter().any(PublicSignal::has_default) => None,
            Strategy::GrimConform => Some(Conduct::Conform),
            Strategy::DeviateOnce { epoch: k, conduct } if epoch == k => Some(conduct),
            Strategy::DeviateOnce { .. } => Some(Conduct::Conform),
        }
    }
}
