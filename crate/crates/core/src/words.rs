//! Height profiles of spin configurations read as lattice paths.
//!
//! Each site is a step: ↑ ascends, ↓ descends and a spin-1 zero is flat.
//! For example ↑↓↑↑↓↓ draws `/\//\\`.

use crate::state::site_charge2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightProfile {
    /// Heights `h_0 = 0, h_1, …, h_L`.
    pub heights: Vec<i64>,
    /// Largest height along the path, `h_0` included.
    pub max_height: i64,
    /// Path closes at zero and never dips below it.
    pub is_matched: bool,
}

pub fn motzkin_height_profile(local_dim: usize, digits: &[usize]) -> HeightProfile {
    let unit = local_dim as i64 - 1;
    let mut heights = Vec::with_capacity(digits.len() + 1);
    let mut h = 0i64;
    heights.push(h);
    for &d in digits {
        h += site_charge2(local_dim, d) / unit;
        heights.push(h);
    }
    let max_height = heights.iter().copied().max().unwrap_or(0);
    let is_matched = h == 0 && heights.iter().all(|&x| x >= 0);
    HeightProfile { heights, max_height, is_matched }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_profile() {
        // ↑↓↑↑↓↓
        let p = motzkin_height_profile(2, &[0, 1, 0, 0, 1, 1]);
        assert_eq!(p.heights, vec![0, 1, 0, 1, 2, 1, 0]);
        assert_eq!(p.max_height, 2);
        assert!(p.is_matched);
    }

    #[test]
    fn flat_spin_one_path() {
        let p = motzkin_height_profile(3, &[1, 1, 1, 1]);
        assert_eq!(p.heights, vec![0; 5]);
        assert_eq!(p.max_height, 0);
        assert!(p.is_matched);
    }

    #[test]
    fn unmatched_paths() {
        assert!(!motzkin_height_profile(2, &[1, 0]).is_matched);
        assert!(!motzkin_height_profile(2, &[0, 0, 0]).is_matched);
        let p = motzkin_height_profile(3, &[0, 1, 2, 2, 0]);
        assert_eq!(p.heights, vec![0, 1, 1, 0, -1, 0]);
        assert!(!p.is_matched);
        assert_eq!(p.max_height, 1);
    }
}
