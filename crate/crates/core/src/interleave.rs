//! Bit interleavers π_{t,j}.

use rand::seq::SliceRandom;

use crate::seed;

/// A permutation with `interleaved[i] = original[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn identity(n: usize) -> Self {
        Interleaver {
            perm: (0..n).collect(),
        }
    }

    pub fn from_permutation(perm: Vec<usize>) -> Self {
        debug_assert!({
            let mut s = perm.clone();
            s.sort_unstable();
            s.iter().enumerate().all(|(i, &v)| i == v)
        });
        Interleaver { perm }
    }

    /// Pseudo-random permutation for packet slot `t` of user `j`.
    pub fn seeded(n: usize, master: u64, packet: usize, user: usize) -> Self {
        let mut rng = seed::stream(master, &[seed::Purpose::Interleaver as u64, packet as u64, user as u64]);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        Interleaver { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn interleave<T: Copy>(&self, original: &[T], out: &mut [T]) {
        for (o, &p) in out.iter_mut().zip(&self.perm) {
            *o = original[p];
        }
    }

    pub fn deinterleave<T: Copy>(&self, interleaved: &[T], out: &mut [T]) {
        for (&x, &p) in interleaved.iter().zip(&self.perm) {
            out[p] = x;
        }
    }

    pub fn interleaved<T: Copy + Default>(&self, original: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); original.len()];
        self.interleave(original, &mut out);
        out
    }

    pub fn deinterleaved<T: Copy + Default>(&self, interleaved: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); interleaved.len()];
        self.deinterleave(interleaved, &mut out);
        out
    }
}

/// One interleaver per `(user, packet slot)`, indexed `[user][packet]`.
pub fn interleaver_bank(n: usize, users: usize, packets: usize, master: u64) -> Vec<Vec<Interleaver>> {
    (0..users)
        .map(|j| (0..packets).map(|t| Interleaver::seeded(n, master, t, j)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn inverse_pair(seed in any::<u64>(), vals in proptest::collection::vec(-5.0f64..5.0, 1..64)) {
            let p = Interleaver::seeded(vals.len(), seed, 1, 2);
            prop_assert_eq!(p.deinterleaved(&p.interleaved(&vals)), vals.clone());
            prop_assert_eq!(p.interleaved(&p.deinterleaved(&vals)), vals);
        }
    }

    #[test]
    fn identity_passthrough() {
        let p = Interleaver::identity(4);
        assert_eq!(p.interleaved(&[1, 2, 3, 4]), vec![1, 2, 3, 4]);
        let a = Interleaver::seeded(64, 7, 0, 0);
        assert_ne!(a, Interleaver::seeded(64, 7, 1, 0));
        assert_eq!(a, Interleaver::seeded(64, 7, 0, 0));
    }
}
