/// Product space of N two-level atoms and a Fock ladder cut at `n_max`.
///
/// Basis index `n · 2^N + bits`: bit k set means atom k is excited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Space {
    pub n_atoms: usize,
    pub n_max: usize,
}

impl Space {
    pub fn new(n_atoms: usize, n_max: usize) -> Self {
        Self { n_atoms, n_max }
    }

    pub fn atom_dim(&self) -> usize {
        1 << self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.atom_dim() * (self.n_max + 1)
    }

    #[inline]
    pub fn index(&self, photons: usize, bits: usize) -> usize {
        (photons << self.n_atoms) | bits
    }

    #[inline]
    pub fn photons(&self, i: usize) -> usize {
        i >> self.n_atoms
    }

    #[inline]
    pub fn bits(&self, i: usize) -> usize {
        i & (self.atom_dim() - 1)
    }

    /// â, truncated: â|0⟩ = 0.
    pub fn annihilate(&self) -> Monomial {
        Monomial::from_fn(self.dim(), |i| {
            let n = self.photons(i);
            (n > 0).then(|| (self.index(n - 1, self.bits(i)), (n as f64).sqrt()))
        })
    }

    /// σ_k¹² = |1⟩⟨2| on atom k.
    pub fn lower(&self, k: usize) -> Monomial {
        Monomial::from_fn(self.dim(), |i| {
            (i & (1 << k) != 0).then(|| (i & !(1 << k), 1.0))
        })
    }

    /// σ_k²¹ = |2⟩⟨1| on atom k.
    pub fn raise(&self, k: usize) -> Monomial {
        Monomial::from_fn(self.dim(), |i| {
            (i & (1 << k) == 0).then(|| (i | (1 << k), 1.0))
        })
    }

    /// σ_k²² on atom k.
    pub fn excited(&self, k: usize) -> Monomial {
        Monomial::from_fn(self.dim(), |i| (i & (1 << k) != 0).then_some((i, 1.0)))
    }

    pub fn identity(&self) -> Monomial {
        Monomial::from_fn(self.dim(), |i| Some((i, 1.0)))
    }
}

/// Real operator with at most one non-zero entry per column, stored as
/// column → (row, value). Every ladder and projector operator of the model is
/// of this form, and so are their products.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    map: Vec<Option<(usize, f64)>>,
}

impl Monomial {
    fn from_fn(dim: usize, f: impl Fn(usize) -> Option<(usize, f64)>) -> Self {
        Self {
            map: (0..dim).map(f).collect(),
        }
    }

    /// Non-zero entries as (row, col, value).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.map
            .iter()
            .enumerate()
            .filter_map(|(c, e)| e.map(|(r, v)| (r, c, v)))
    }

    /// `self · rhs` (apply `rhs` first).
    pub fn then(&self, rhs: &Monomial) -> Monomial {
        Monomial {
            map: rhs
                .map
                .iter()
                .map(|e| e.and_then(|(mid, v)| self.map[mid].map(|(r, w)| (r, v * w))))
                .collect(),
        }
    }

    /// Hermitian adjoint; requires distinct target rows, which holds for all
    /// operators built here.
    pub fn adjoint(&self) -> Monomial {
        let mut map = vec![None; self.map.len()];
        for (r, c, v) in self.entries() {
            debug_assert!(map[r].is_none());
            map[r] = Some((c, v));
        }
        Monomial { map }
    }
}

/// Product of several monomials, leftmost factor applied last.
pub fn product(factors: &[&Monomial]) -> Monomial {
    let (last, rest) = factors.split_last().expect("at least one factor");
    rest.iter()
        .rev()
        .fold((*last).clone(), |acc, f| f.then(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let s = Space::new(3, 5);
        assert_eq!(s.dim(), 48);
        let i = s.index(4, 0b101);
        assert_eq!((s.photons(i), s.bits(i)), (4, 0b101));
    }

    #[test]
    fn canonical_commutators() {
        let s = Space::new(2, 6);
        let a = s.annihilate();
        let ad = a.adjoint();
        // [â, â†] = 1 away from the cutoff
        for i in 0..s.dim() {
            if s.photons(i) < s.n_max {
                let aad = a.then(&ad).map[i].unwrap().1;
                let ada = ad.then(&a).map[i].map_or(0.0, |e| e.1);
                assert!((aad - ada - 1.0).abs() < 1e-12);
            }
        }
        // σ²¹σ¹² = σ²², σ¹²σ¹² = 0
        assert_eq!(s.raise(1).then(&s.lower(1)), s.excited(1));
        assert!(s.lower(0).then(&s.lower(0)).entries().next().is_none());
    }

    #[test]
    fn product_order() {
        let s = Space::new(1, 3);
        let a = s.annihilate();
        let ad = a.adjoint();
        // â†â is the number operator
        for (r, c, v) in product(&[&ad, &a]).entries() {
            assert_eq!(r, c);
            assert!((v - s.photons(c) as f64).abs() < 1e-12);
        }
    }
}
