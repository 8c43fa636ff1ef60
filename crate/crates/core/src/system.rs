//! Index layout shared by every module.
//!
//! Serving entities are the `U` unicast users followed by the `M` multicast
//! groups (`e < U` is unicast user `e`, `e = U + m` is group `m`). Receiving
//! users are the `U` unicast users followed by all multicast users flattened
//! group by group.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precoder {
    Mr,
    Zf,
}

impl fmt::Display for Precoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precoder::Mr => "mr",
            Precoder::Zf => "zf",
        })
    }
}

impl FromStr for Precoder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mr" => Ok(Precoder::Mr),
            "zf" => Ok(Precoder::Zf),
            other => Err(format!("unknown precoder `{other}` (expected mr or zf)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserKind {
    Unicast,
    Multicast,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims {
    pub n_aps: usize,
    pub antennas: usize,
    pub n_unicast: usize,
    group_sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl Dims {
    pub fn new(n_aps: usize, antennas: usize, n_unicast: usize, group_sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(group_sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &k in group_sizes {
            acc += k;
            offsets.push(acc);
        }
        Dims {
            n_aps,
            antennas,
            n_unicast,
            group_sizes: group_sizes.to_vec(),
            offsets,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// `U + M`.
    pub fn n_entities(&self) -> usize {
        self.n_unicast + self.n_groups()
    }

    /// Total multicast users `K_M`.
    pub fn n_mc_users(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// `U + K_M`.
    pub fn n_users(&self) -> usize {
        self.n_unicast + self.n_mc_users()
    }

    /// Flat multicast index of member `k` of group `m`.
    pub fn mc_index(&self, m: usize, k: usize) -> usize {
        debug_assert!(k < self.group_sizes[m]);
        self.offsets[m] + k
    }

    /// Flat multicast indices of group `m`.
    pub fn group_range(&self, m: usize) -> std::ops::Range<usize> {
        self.offsets[m]..self.offsets[m + 1]
    }

    pub fn group_of_mc(&self, mk: usize) -> usize {
        match self.offsets.binary_search(&mk) {
            Ok(pos) => {
                // mk starts group `pos`; skip empty groups
                let mut g = pos;
                while self.group_sizes[g] == 0 {
                    g += 1;
                }
                g
            }
            Err(pos) => pos - 1,
        }
    }

    /// Serving entity of receiving user `i`.
    pub fn entity_of_user(&self, i: usize) -> usize {
        if i < self.n_unicast {
            i
        } else {
            self.n_unicast + self.group_of_mc(i - self.n_unicast)
        }
    }

    pub fn user_kind(&self, i: usize) -> UserKind {
        if i < self.n_unicast {
            UserKind::Unicast
        } else {
            UserKind::Multicast
        }
    }

    /// Receiving users served by entity `e`.
    pub fn users_of_entity(&self, e: usize) -> std::ops::Range<usize> {
        if e < self.n_unicast {
            e..e + 1
        } else {
            let r = self.group_range(e - self.n_unicast);
            r.start + self.n_unicast..r.end + self.n_unicast
        }
    }

    /// Human-readable label: `"1"` for unicast user 1, `"2_1"` for the first
    /// member of multicast group 2 (both 1-based).
    pub fn user_label(&self, i: usize) -> String {
        if i < self.n_unicast {
            format!("{}", i + 1)
        } else {
            let mk = i - self.n_unicast;
            let m = self.group_of_mc(mk);
            format!("{}_{}", m + 1, mk - self.offsets[m] + 1)
        }
    }
}
