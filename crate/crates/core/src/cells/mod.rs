//! Recurrent cell families: discrete gated cells and continuous-time liquid cells.

pub mod discrete;
pub mod liquid;
pub mod wiring;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use discrete::{gru_step, lstm_step, rnn_step, CellState, GruParams, LstmParams, RnnParams};
pub use liquid::{cfc_step, ltc_rhs, ltc_step_fused, ssm_step, CfcParams, LtcParams, SsmParams, TAU_FLOOR};
pub use wiring::{build_ncp_wiring, ApplyWiring, LiquidMasks, NcpFanouts, NcpSizes, NcpWiring};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Rnn,
    Lstm,
    Gru,
    Ltc,
    Cfc,
    Ssm,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Rnn,
        Family::Lstm,
        Family::Gru,
        Family::Ltc,
        Family::Cfc,
        Family::Ssm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Rnn => "rnn",
            Family::Lstm => "lstm",
            Family::Gru => "gru",
            Family::Ltc => "ltc",
            Family::Cfc => "cfc",
            Family::Ssm => "ssm",
        }
    }

    /// Families integrated by an ODE solver between samples.
    pub fn is_continuous(self) -> bool {
        matches!(self, Family::Ltc | Family::Ssm)
    }

    pub fn supports_wiring(self) -> bool {
        matches!(self, Family::Ltc | Family::Cfc)
    }

    /// Trainable scalars in one recurrent layer with `n` units and `m` inputs,
    /// excluding the output projection.
    pub fn block_param_count(self, n: usize, m: usize) -> usize {
        match self {
            Family::Rnn => n * m + n * n + n,
            Family::Lstm => 4 * (n * (n + m) + n),
            Family::Gru | Family::Cfc => 3 * (n * (n + m) + n),
            Family::Ltc => n * n + n * m + 3 * n,
            // A, B and the scalar input projection
            Family::Ssm => n * n + n + m,
        }
    }

    /// Output projection size; the state-space readout `C` has no bias.
    pub fn head_param_count(self, n: usize, o: usize) -> usize {
        match self {
            Family::Ssm => o * n,
            _ => o * n + o,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown cell family '{s}' (expected one of rnn, lstm, gru, ltc, cfc, ssm)"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_counts() {
        assert_eq!(Family::Lstm.block_param_count(64, 23), 22528);
        assert_eq!(Family::Gru.block_param_count(32, 1), 3264);
    }

    #[test]
    fn gru_is_three_quarters_of_lstm() {
        for n in 1..=10 {
            for m in 1..=10 {
                let lstm = Family::Lstm.block_param_count(n, m);
                let gru = Family::Gru.block_param_count(n, m);
                assert_eq!(4 * gru, 3 * lstm);
                assert!(gru < lstm);
            }
        }
    }

    #[test]
    fn ltc_smaller_than_lstm_at_reference_dims() {
        let ltc = Family::Ltc.block_param_count(64, 23) + Family::Ltc.head_param_count(64, 17);
        let lstm = Family::Lstm.block_param_count(64, 23) + Family::Lstm.head_param_count(64, 17);
        assert_eq!(ltc, 6865);
        assert!(ltc < lstm);
    }

    #[test]
    fn family_round_trips_through_text() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("lstmx".parse::<Family>().is_err());
    }
}
