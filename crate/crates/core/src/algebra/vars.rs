//! The fixed variable universe for a projective dimension `N`.
//!
//! Variables come in the families ζ, ζ̄, z, z̄, w, w̄ (each indexed `0..=N`)
//! and the parametrization variables t, t̄ (indexed `0..=1`). The adjoined
//! unit `2πi` is not a variable; monomials carry its exponent separately.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Zeta,
    ZetaBar,
    Z,
    ZBar,
    W,
    WBar,
    T,
    TBar,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Zeta,
        Family::ZetaBar,
        Family::Z,
        Family::ZBar,
        Family::W,
        Family::WBar,
        Family::T,
        Family::TBar,
    ];

    pub fn conj(self) -> Family {
        match self {
            Family::Zeta => Family::ZetaBar,
            Family::ZetaBar => Family::Zeta,
            Family::Z => Family::ZBar,
            Family::ZBar => Family::Z,
            Family::W => Family::WBar,
            Family::WBar => Family::W,
            Family::T => Family::TBar,
            Family::TBar => Family::T,
        }
    }

    pub fn is_antiholomorphic(self) -> bool {
        matches!(
            self,
            Family::ZetaBar | Family::ZBar | Family::WBar | Family::TBar
        )
    }

    /// The holomorphic family this one belongs to (ζ̄ ↦ ζ, ...).
    pub fn holomorphic(self) -> Family {
        if self.is_antiholomorphic() {
            self.conj()
        } else {
            self
        }
    }

    /// Name used by the parser and printer.
    pub fn prefix(self) -> &'static str {
        match self {
            Family::Zeta => "zeta",
            Family::ZetaBar => "Zeta",
            Family::Z => "z",
            Family::ZBar => "Z",
            Family::W => "w",
            Family::WBar => "W",
            Family::T => "t",
            Family::TBar => "T",
        }
    }

    pub fn from_prefix(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.prefix() == s)
    }
}

/// A single variable `family_index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub family: Family,
    index: u8,
}

impl Var {
    pub fn new(family: Family, index: usize) -> Self {
        assert!(index < 64, "variable index {index} out of range");
        Self {
            family,
            index: index as u8,
        }
    }
    pub fn index(self) -> usize {
        self.index as usize
    }
    pub fn zeta(i: usize) -> Self {
        Self::new(Family::Zeta, i)
    }
    pub fn zeta_bar(i: usize) -> Self {
        Self::new(Family::ZetaBar, i)
    }
    pub fn z(i: usize) -> Self {
        Self::new(Family::Z, i)
    }
    pub fn z_bar(i: usize) -> Self {
        Self::new(Family::ZBar, i)
    }
    pub fn w(i: usize) -> Self {
        Self::new(Family::W, i)
    }
    pub fn t(i: usize) -> Self {
        Self::new(Family::T, i)
    }
    pub fn conj(self) -> Self {
        Self {
            family: self.family.conj(),
            index: self.index,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family.prefix(), self.index)
    }
}

/// The projective dimension `N` fixing the index range of every family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Universe {
    pub n: usize,
}

impl Universe {
    pub const fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn family_len(&self, fam: Family) -> usize {
        match fam {
            Family::T | Family::TBar => 2,
            _ => self.n + 1,
        }
    }

    pub fn contains(&self, v: Var) -> bool {
        v.index() < self.family_len(v.family)
    }

    pub fn vars(&self, fam: Family) -> impl Iterator<Item = Var> {
        (0..self.family_len(fam)).map(move |i| Var::new(fam, i))
    }
}
