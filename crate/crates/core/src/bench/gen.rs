// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Synthetic benchmark tables.
//!
//! Values come from SplitMix64 used as a counter-based generator: draw
//! `i` of a stream with seed `s` is `mix(s + (i + 1) * 0x9E3779B97F4A7C15)`
//! where `mix` is the SplitMix64 finalizer. A worker's stream seed is
//! `seed ^ rank`; row `i` takes draws `2i` (key) and `2i + 1` (value).
//! A draw `x` maps to `[0, n)` as `(x * n) >> 64` in 128-bit arithmetic.
//! Any implementation following these rules reproduces the same tables.

use crate::table::{Column, Table};

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Values are drawn from `[0, VALUE_DOMAIN)`.
pub const VALUE_DOMAIN: u64 = 1_000_000;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw `i` of the stream seeded with `seed`.
pub fn draw(seed: u64, i: u64) -> u64 {
    mix64(seed.wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn bounded(x: u64, n: u64) -> u64 {
    ((x as u128 * n as u128) >> 64) as u64
}

/// Key domain size `ceil(total_rows * unique_fraction)`, at least 1.
pub fn key_domain(total_rows: u64, unique_fraction: f64) -> u64 {
    ((total_rows as f64 * unique_fraction).ceil() as u64).max(1)
}

/// Seed of the second relation of a join, so the two sides differ.
pub fn relation_seed(seed: u64, relation: u64) -> u64 {
    seed.wrapping_add(relation.wrapping_mul(GOLDEN_GAMMA))
}

/// Rows held by `rank` when `total` rows are spread over `world_size`
/// workers; the first `total % world_size` ranks take one extra.
pub fn rows_for_rank(total: u64, world_size: usize, rank: usize) -> u64 {
    let w = world_size as u64;
    total / w + u64::from((rank as u64) < total % w)
}

/// Two Int64 columns `key` and `value`, no nulls. Keys are uniform over a
/// domain sized from the job's total row count so that duplicates span
/// workers.
pub fn gen_table(rows: u64, total_rows: u64, unique_fraction: f64, seed: u64, rank: usize) -> Table {
    let stream = seed ^ rank as u64;
    let domain = key_domain(total_rows, unique_fraction);
    let mut keys = Vec::with_capacity(rows as usize);
    let mut values = Vec::with_capacity(rows as usize);
    for i in 0..rows {
        keys.push(bounded(draw(stream, 2 * i), domain) as i64);
        values.push(bounded(draw(stream, 2 * i + 1), VALUE_DOMAIN) as i64);
    }
    Table::from_columns(vec![
        ("key", Column::from_i64(keys)),
        ("value", Column::from_i64(values)),
    ])
    .expect("two equal-length columns")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference() {
        // first outputs of the reference SplitMix64 seeded with 0
        assert_eq!(draw(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(draw(0, 1), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(draw(0, 2), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn bounded_stays_in_range() {
        assert_eq!(bounded(0, 10), 0);
        assert_eq!(bounded(u64::MAX, 10), 9);
        assert_eq!(bounded(1 << 63, 10), 5);
    }

    #[test]
    fn rank_shares_cover_total() {
        for total in [0u64, 1, 7, 100] {
            for w in 1..6 {
                assert_eq!((0..w).map(|r| rows_for_rank(total, w, r)).sum::<u64>(), total);
            }
        }
    }
}
