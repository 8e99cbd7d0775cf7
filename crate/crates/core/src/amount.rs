//! Exact zatoshi amounts.
//!
//! Every value in the crate is an integer count of zatoshi. Decimal coin
//! strings only appear at I/O boundaries, through [`Amount::parse_coins`]
//! and the [`fmt::Display`] impl.

use std::fmt;
use std::ops;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Zatoshi per coin.
pub const COIN: u64 = 100_000_000;

/// Maximum number of coins that can ever exist.
pub const MAX_COINS: u64 = 21_000_000;

/// Number of fractional digits a coin string may carry.
pub const DECIMALS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseAmountError {
    #[error("empty amount string")]
    Empty,
    #[error("malformed amount string {0:?}")]
    Malformed(String),
    #[error("amount {0:?} has more than 8 fractional digits")]
    TooPrecise(String),
    #[error("amount {0:?} exceeds the coin cap")]
    OverCap(String),
}

/// A non-negative amount of zatoshi, bounded by the 21M coin cap.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Amount(u64);

impl Amount {
    pub const ZERO: Amount = Amount(0);
    pub const MAX: Amount = Amount(MAX_COINS * COIN);

    /// Builds an amount from zatoshi, rejecting values above the cap.
    pub const fn from_zat(zat: u64) -> Option<Amount> {
        if zat > MAX_COINS * COIN {
            None
        } else {
            Some(Amount(zat))
        }
    }

    /// Builds an amount from zatoshi; panics above the cap. Meant for constants.
    pub const fn zat(zat: u64) -> Amount {
        match Amount::from_zat(zat) {
            Some(a) => a,
            None => panic!("amount exceeds coin cap"),
        }
    }

    pub const fn as_zat(self) -> u64 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_add(rhs.0).and_then(Amount::from_zat)
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }

    /// Parses a decimal coin string such as `"3479.51898254"` or `"0.0001"`.
    ///
    /// Accepts an integer part, a fractional part, or both, with at most
    /// eight fractional digits. Signs, exponents and whitespace are rejected.
    pub fn parse_coins(s: &str) -> Result<Amount, ParseAmountError> {
        if s.is_empty() {
            return Err(ParseAmountError::Empty);
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => {
                if f.is_empty() {
                    return Err(ParseAmountError::Malformed(s.to_owned()));
                }
                (i, f)
            }
            None => (s, ""),
        };
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty()) || !all_digits(int_part) || !all_digits(frac_part) {
            return Err(ParseAmountError::Malformed(s.to_owned()));
        }
        if frac_part.len() > DECIMALS {
            return Err(ParseAmountError::TooPrecise(s.to_owned()));
        }

        let int_digits = int_part.trim_start_matches('0');
        // 21e6 has 8 digits; anything longer is over the cap regardless of value.
        if int_digits.len() > 8 {
            return Err(ParseAmountError::OverCap(s.to_owned()));
        }
        let coins: u64 = if int_digits.is_empty() { 0 } else { int_digits.parse().expect("digits") };
        let mut frac: u64 = 0;
        for (i, b) in frac_part.bytes().enumerate() {
            frac += u64::from(b - b'0') * 10u64.pow((DECIMALS - 1 - i) as u32);
        }
        coins
            .checked_mul(COIN)
            .and_then(|z| z.checked_add(frac))
            .and_then(Amount::from_zat)
            .ok_or_else(|| ParseAmountError::OverCap(s.to_owned()))
    }

    /// Whole coins, fractional part dropped.
    pub const fn whole_coins(self) -> u64 {
        self.0 / COIN
    }
}

/// Renders as a coin string with trailing fractional zeros trimmed.
impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / COIN;
        let frac = self.0 % COIN;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            let digits = format!("{frac:08}");
            write!(f, "{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl FromStr for Amount {
    type Err = ParseAmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Amount::parse_coins(s)
    }
}

impl ops::Add for Amount {
    type Output = Amount;

    fn add(self, rhs: Amount) -> Amount {
        self.checked_add(rhs).expect("amount addition over coin cap")
    }
}

impl ops::Sub for Amount {
    type Output = Amount;

    fn sub(self, rhs: Amount) -> Amount {
        self.checked_sub(rhs).expect("amount subtraction underflow")
    }
}

impl std::iter::Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |a, b| a + b)
    }
}

/// Renders a signed zatoshi value as a coin string.
pub fn format_signed_zat(zat: i64) -> String {
    let abs = Amount(zat.unsigned_abs());
    if zat < 0 {
        format!("-{abs}")
    } else {
        abs.to_string()
    }
}
