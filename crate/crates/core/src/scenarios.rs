//! Canned network configurations and random mean-gain draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkConfig;

/// Mean user-relay gains of the eight-user, five-relay reference network.
pub const TABLE_ONE_UR: [[f64; 5]; 8] = [
    [0.2, 0.8, 1.3, 1.0, 0.5],
    [0.8, 1.4, 1.2, 1.1, 1.0],
    [0.8, 0.6, 1.4, 0.2, 0.1],
    [1.3, 1.1, 0.7, 0.5, 0.3],
    [0.3, 0.5, 0.7, 1.2, 1.4],
    [0.5, 0.6, 0.9, 1.0, 1.1],
    [0.8, 0.7, 0.6, 0.9, 0.4],
    [1.3, 1.0, 0.7, 0.6, 0.4],
];

pub const TABLE_ONE_RB: [f64; 5] = [1.2, 0.6, 0.5, 1.3, 0.7];

/// The reference network with `alpha = 0.5`, `tau = 3`, `N_0 = 1`.
pub fn table_one() -> NetworkConfig {
    NetworkConfig::new(TABLE_ONE_UR.iter().map(|r| r.to_vec()).collect(), TABLE_ONE_RB.to_vec())
        .expect("reference gains are valid")
}

/// Recipe for drawing mean gains uniformly at random. The first
/// `fortunate_users` users draw from `fortunate_range`, the rest from
/// `ur_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainDraw {
    pub num_users: usize,
    pub num_relays: usize,
    pub seed: u64,
    pub ur_range: (f64, f64),
    pub rb_range: (f64, f64),
    #[serde(default)]
    pub fortunate_users: usize,
    #[serde(default = "unit_range")]
    pub fortunate_range: (f64, f64),
}

fn unit_range() -> (f64, f64) {
    (1.5, 2.0)
}

impl GainDraw {
    pub fn uniform(num_users: usize, num_relays: usize, range: (f64, f64), seed: u64) -> Self {
        Self {
            num_users,
            num_relays,
            seed,
            ur_range: range,
            rb_range: range,
            fortunate_users: 0,
            fortunate_range: unit_range(),
        }
    }

    pub fn draw(&self) -> Result<NetworkConfig> {
        for (lo, hi) in [self.ur_range, self.rb_range, self.fortunate_range] {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::InvalidConfig(format!("bad gain range ({lo}, {hi})")));
            }
        }
        if self.fortunate_users > self.num_users {
            return Err(Error::InvalidConfig("more fortunate users than users".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let ur = (0..self.num_users)
            .map(|u| {
                let (lo, hi) = if u < self.fortunate_users { self.fortunate_range } else { self.ur_range };
                (0..self.num_relays).map(|_| rng.random_range(lo..hi)).collect()
            })
            .collect();
        let (lo, hi) = self.rb_range;
        let rb = (0..self.num_relays).map(|_| rng.random_range(lo..hi)).collect();
        NetworkConfig::new(ur, rb)
    }
}

/// Eight users, six relays, four users near the relays.
pub fn split_population(seed: u64) -> GainDraw {
    GainDraw {
        num_users: 8,
        num_relays: 6,
        seed,
        ur_range: (0.5, 1.0),
        rb_range: (1.5, 2.0),
        fortunate_users: 4,
        fortunate_range: (1.5, 2.0),
    }
}

/// Every link with unit mean gain.
pub fn homogeneous(num_users: usize, num_relays: usize) -> NetworkConfig {
    NetworkConfig::symmetric(num_users, num_relays, 1.0).expect("positive sizes")
}

/// Evenly spaced SNR grid in dB, both ends included.
pub fn snr_grid(lo_db: f64, hi_db: f64, step_db: f64) -> Vec<f64> {
    let n = ((hi_db - lo_db) / step_db + 1e-9).floor() as usize;
    (0..=n).map(|i| lo_db + i as f64 * step_db).collect()
}
