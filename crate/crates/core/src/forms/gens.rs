//! Anticommuting generators `dζ_j`, `dζ̄_j`, `dz̄_j`, `dw_j` encoded as bits.

use crate::algebra::Family;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiffFamily {
    DZeta,
    DZetaBar,
    DZBar,
    DW,
}

impl DiffFamily {
    pub const ALL: [DiffFamily; 4] = [
        DiffFamily::DZeta,
        DiffFamily::DZetaBar,
        DiffFamily::DZBar,
        DiffFamily::DW,
    ];

    fn block(self) -> usize {
        self as usize
    }

    /// Variable family differentiated by this generator family.
    pub fn variable_family(self) -> Family {
        match self {
            DiffFamily::DZeta => Family::Zeta,
            DiffFamily::DZetaBar => Family::ZetaBar,
            DiffFamily::DZBar => Family::ZBar,
            DiffFamily::DW => Family::W,
        }
    }

    pub fn of_variable_family(f: Family) -> Option<DiffFamily> {
        match f {
            Family::Zeta => Some(DiffFamily::DZeta),
            Family::ZetaBar => Some(DiffFamily::DZetaBar),
            Family::ZBar => Some(DiffFamily::DZBar),
            Family::W => Some(DiffFamily::DW),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            DiffFamily::DZeta => "dζ",
            DiffFamily::DZetaBar => "dζ̄",
            DiffFamily::DZBar => "dz̄",
            DiffFamily::DW => "dw",
        }
    }

    pub fn ascii(self) -> &'static str {
        match self {
            DiffFamily::DZeta => "dzeta",
            DiffFamily::DZetaBar => "dZeta",
            DiffFamily::DZBar => "dZ",
            DiffFamily::DW => "dw",
        }
    }

    pub fn from_ascii(s: &str) -> Option<DiffFamily> {
        DiffFamily::ALL.into_iter().find(|f| f.ascii() == s)
    }
}

/// Bit layout of generator masks for a fixed `N`: the four families occupy
/// consecutive blocks of `N+1` bits, so sorting by bit index realizes the
/// order `dζ < dζ̄ < dz̄ < dw`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GenLayout {
    pub n: usize,
}

impl GenLayout {
    pub fn new(n: usize) -> Self {
        assert!(4 * (n + 1) <= 64, "generator masks support N ≤ 15");
        Self { n }
    }

    pub fn bit(&self, fam: DiffFamily, j: usize) -> u64 {
        assert!(j <= self.n);
        1u64 << (fam.block() * (self.n + 1) + j)
    }

    pub fn family_mask(&self, fam: DiffFamily) -> u64 {
        let ones = (1u64 << (self.n + 1)) - 1;
        ones << (fam.block() * (self.n + 1))
    }

    pub fn degree(&self, mask: u64, fam: DiffFamily) -> u32 {
        (mask & self.family_mask(fam)).count_ones()
    }

    /// `(family, index)` of a single bit position.
    pub fn decode(&self, pos: u32) -> (DiffFamily, usize) {
        let m = self.n + 1;
        let p = pos as usize;
        (DiffFamily::ALL[p / m], p % m)
    }

    pub fn names(&self, mask: u64) -> Vec<(DiffFamily, usize)> {
        bits(mask).map(|p| self.decode(p)).collect()
    }
}

/// Bit positions of a mask in increasing order.
pub fn bits(mask: u64) -> impl Iterator<Item = u32> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let p = m.trailing_zeros();
            m &= m - 1;
            Some(p)
        }
    })
}

/// Sign of `e_a ∧ e_b` relative to the sorted product, or `None` if the
/// masks overlap.
pub fn wedge_sign(a: u64, b: u64) -> Option<i32> {
    if a & b != 0 {
        return None;
    }
    let mut inversions = 0u32;
    for p in bits(b) {
        inversions += (a >> p).count_ones();
    }
    Some(if inversions.is_multiple_of(2) { 1 } else { -1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signs() {
        assert_eq!(wedge_sign(0b10, 0b01), Some(-1));
        assert_eq!(wedge_sign(0b01, 0b10), Some(1));
        assert_eq!(wedge_sign(0b101, 0b010), Some(-1));
        assert_eq!(wedge_sign(0b110, 0b001), Some(1));
        assert_eq!(wedge_sign(0b1, 0b1), None);
    }
}
