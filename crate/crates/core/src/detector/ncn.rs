//! Network-coding check node combining.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::soft_xor;

/// Which soft information a pending packet combines with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NcnCase {
    /// Every packet of the previous round failed: buffers are added inside
    /// the XOR branch.
    AllFail,
    /// Fresh packets, no buffered information.
    AllSuccess,
    /// Some packets of the previous round failed: the current and buffered
    /// XOR branches are combined separately.
    PartialFail,
}

impl std::str::FromStr for NcnCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "allfail" | "case1" => Ok(NcnCase::AllFail),
            "allsuccess" | "case2" => Ok(NcnCase::AllSuccess),
            "partialfail" | "case3" => Ok(NcnCase::PartialFail),
            _ => Err(Error::Invalid(format!("unknown NCN case {s:?}"))),
        }
    }
}

/// Terms of one coded branch seen from packet `t_α`: the partner packet
/// `t_β` and the pair `w = {t_α, t_β}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Branch {
    pub i_partner: f64,
    pub f_partner: f64,
    pub i_pair: f64,
    pub f_pair: f64,
}

impl Branch {
    fn combine(&self, case: NcnCase) -> f64 {
        match case {
            NcnCase::AllSuccess => soft_xor(self.i_partner, self.i_pair),
            NcnCase::AllFail => soft_xor(self.i_partner + self.f_partner, self.i_pair + self.f_pair),
            NcnCase::PartialFail => {
                soft_xor(self.i_partner, self.i_pair) + soft_xor(self.f_partner, self.f_pair)
            }
        }
    }
}

/// NCN output toward the LDPC variable of packet `t_α` at one bit position:
/// direct evidence plus one XOR branch per pair containing `t_α`.
pub fn ncn_update(case: NcnCase, i_direct: f64, f_direct: f64, branches: &[Branch]) -> f64 {
    let direct = match case {
        NcnCase::AllSuccess => i_direct,
        NcnCase::AllFail | NcnCase::PartialFail => i_direct + f_direct,
    };
    direct + branches.iter().map(|b| b.combine(case)).sum::<f64>()
}
