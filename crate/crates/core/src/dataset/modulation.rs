use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The eleven modulation classes, in label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Psk8,
    Qam16,
    Qam64,
    Cpfsk,
    Gfsk,
    Pam4,
    Wbfm,
    AmSsb,
    AmDsb,
}

impl Modulation {
    pub const ALL: [Modulation; 11] = [
        Modulation::Bpsk,
        Modulation::Qpsk,
        Modulation::Psk8,
        Modulation::Qam16,
        Modulation::Qam64,
        Modulation::Cpfsk,
        Modulation::Gfsk,
        Modulation::Pam4,
        Modulation::Wbfm,
        Modulation::AmSsb,
        Modulation::AmDsb,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "BPSK",
            Modulation::Qpsk => "QPSK",
            Modulation::Psk8 => "8PSK",
            Modulation::Qam16 => "QAM16",
            Modulation::Qam64 => "QAM64",
            Modulation::Cpfsk => "CPFSK",
            Modulation::Gfsk => "GFSK",
            Modulation::Pam4 => "PAM4",
            Modulation::Wbfm => "WBFM",
            Modulation::AmSsb => "AM-SSB",
            Modulation::AmDsb => "AM-DSB",
        }
    }

    /// Pulse-shaped linear (constellation) schemes.
    pub fn is_linear(self) -> bool {
        matches!(
            self,
            Modulation::Bpsk
                | Modulation::Qpsk
                | Modulation::Psk8
                | Modulation::Qam16
                | Modulation::Qam64
                | Modulation::Pam4
        )
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown modulation `{s}`")))
    }
}
