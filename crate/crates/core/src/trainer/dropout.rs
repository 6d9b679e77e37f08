use rand::Rng;

use crate::corpus::Vocabulary;
use crate::lattice::Lattice;

/// Reads each multi-character word occurrence as `<OOV>` with probability
/// `rate`. Single characters and the lattice topology are kept; both
/// directions see the same decision for an occurrence.
pub fn apply_iv_word_dropout<R: Rng + ?Sized>(lattice: &Lattice, rate: f64, rng: &mut R) -> Lattice {
    if rate <= 0.0 {
        return lattice.clone();
    }
    lattice.map_words(|_, len, word| {
        if len > 1 && (rate >= 1.0 || rng.random::<f64>() < rate) {
            Vocabulary::OOV
        } else {
            word
        }
    })
}
