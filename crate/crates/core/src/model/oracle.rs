//! Exhaustive enumeration over all sequences of a given length. Only usable
//! for desk-scale models; the guard keeps it below 10^7 states.

use super::energy::energy_encoded;
use super::topology::EncodedSeq;
use super::Model;
use crate::error::{Error, Result};

pub const ORACLE_GUARD: f64 = 1e7;

fn state_count(model: &Model, len: usize) -> Result<usize> {
    let t = &model.topology;
    let log10: f64 = (0..t.voices()).map(|i| len as f64 * (t.alphabet(i).len() as f64).log10()).sum();
    if log10 > ORACLE_GUARD.log10() + 1e-12 {
        return Err(Error::TooLarge(10f64.powf(log10)));
    }
    Ok((0..t.voices()).map(|i| t.alphabet(i).len().pow(len as u32)).product())
}

/// Mixed-radix index of a state: cell `(i, j)` is digit `i * len + j`
/// (least significant first) with radix `|A_i|`.
pub fn state_index(model: &Model, enc: &EncodedSeq) -> usize {
    let t = &model.topology;
    let mut idx = 0;
    for i in (0..enc.voices).rev() {
        let radix = t.alphabet(i).len();
        for j in (0..enc.len).rev() {
            idx = idx * radix + enc.get(i, j) as usize;
        }
    }
    idx
}

fn for_each_state(model: &Model, len: usize, mut f: impl FnMut(usize, &EncodedSeq)) -> Result<()> {
    let t = &model.topology;
    let total = state_count(model, len)?;
    let n = t.voices();
    let mut enc = EncodedSeq { voices: n, len, cells: vec![0; n * len] };
    let radix: Vec<u16> = (0..n * len).map(|c| t.alphabet(c / len.max(1)).len() as u16).collect();
    for idx in 0..total {
        f(idx, &enc);
        // increment the mixed-radix counter
        for (cell, r) in enc.cells.iter_mut().zip(&radix) {
            *cell += 1;
            if *cell < *r {
                break;
            }
            *cell = 0;
        }
    }
    Ok(())
}

/// `Z(θ) = Σ_s exp(-E(s, θ))` over all sequences of length `len`.
pub fn exact_partition_oracle(model: &Model, len: usize) -> Result<f64> {
    let mut z = 0.0;
    for_each_state(model, len, |_, enc| z += (-energy_encoded(enc, model)).exp())?;
    Ok(z)
}

/// Exact `P(s | θ)` for every state, indexed by [`state_index`].
pub fn exact_distribution(model: &Model, len: usize) -> Result<Vec<f64>> {
    let mut w = Vec::new();
    for_each_state(model, len, |idx, enc| {
        debug_assert_eq!(idx, state_index(model, enc));
        w.push(-energy_encoded(enc, model));
    })?;
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in w.iter_mut() {
        *v = (*v - max).exp();
        z += *v;
    }
    w.iter_mut().for_each(|v| *v /= z);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Topology;
    use crate::symbol::Symbol;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn alpha3() -> Vec<Symbol> {
        vec![Symbol::Pitch(60), Symbol::Pitch(62), Symbol::Pitch(64)]
    }

    #[test]
    fn zero_model_counts_sequences() {
        let m = Model::zeros(Topology::new(1, 0, vec![alpha3()], None).unwrap());
        assert_eq!(exact_partition_oracle(&m, 2).unwrap(), 9.0);
        let m = Model::zeros(Topology::new(1, 1, vec![alpha3(); 2], None).unwrap());
        assert_eq!(exact_partition_oracle(&m, 3).unwrap(), 729.0);
    }

    #[test]
    fn random_model_probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Model::zeros(Topology::new(1, 1, vec![alpha3(); 2], None).unwrap());
        m.theta.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let z = exact_partition_oracle(&m, 3).unwrap();
        let mut total = 0.0;
        for_each_state(&m, 3, |_, enc| total += (-energy_encoded(enc, &m)).exp() / z).unwrap();
        assert!((total - 1.0).abs() < 1e-9);
        let p = exact_distribution(&m, 3).unwrap();
        assert_eq!(p.len(), 729);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn guard_rejects_large_enumerations() {
        let m = Model::zeros(Topology::new(1, 1, vec![alpha3(); 4], None).unwrap());
        assert!(matches!(exact_partition_oracle(&m, 4), Err(Error::TooLarge(_))));
    }
}
