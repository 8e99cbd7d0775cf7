use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

/// An exact non-negative ratio, used for every reported percentage.
///
/// A zero denominator means "undefined"; it renders and compares as zero.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl Ratio {
    pub const fn new(num: u128, den: u128) -> Ratio {
        Ratio { num, den }
    }

    pub fn is_defined(&self) -> bool {
        self.den != 0
    }

    pub fn to_f64(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    pub fn percent_f64(self) -> f64 {
        self.to_f64() * 100.0
    }

    /// Percentage rounded half-up to `places` decimals, computed in integers.
    pub fn percent_string(self, places: u32) -> String {
        Ratio::new(self.num * 100, self.den).decimal_string(places)
    }

    /// The ratio itself rounded half-up to `places` decimals, e.g. `"1.000"`.
    pub fn decimal_string(self, places: u32) -> String {
        if self.den == 0 {
            return format!("{:.*}", places as usize, 0.0);
        }
        let scale = 10u128.pow(places);
        let scaled = (self.num * scale * 2 + self.den) / (self.den * 2);
        let whole = scaled / scale;
        if places == 0 {
            whole.to_string()
        } else {
            format!("{whole}.{:0width$}", scaled % scale, width = places as usize)
        }
    }

    /// The usual one-decimal rendering, e.g. `"31.5"`.
    pub fn percent_1dp(self) -> String {
        self.percent_string(1)
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        let a = if self.den == 0 { Ratio::new(0, 1) } else { *self };
        let b = if other.den == 0 { Ratio::new(0, 1) } else { *other };
        (a.num * b.den).cmp(&(b.num * a.den))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.percent_1dp())
    }
}
