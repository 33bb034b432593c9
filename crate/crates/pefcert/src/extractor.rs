//! Minimal seeded Toeplitz hashing, provided as plumbing for end-to-end
//! demos that turn certified min-entropy into near-uniform bits. This is a
//! plain two-universal hash over GF(2); composing it with an entropy
//! certificate is the caller's responsibility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Applies the Toeplitz matrix built from `seed_bits` to `input`, producing
/// `output_len` bits. Requires `seed_bits.len() == input.len() + output_len - 1`.
pub fn toeplitz_hash(input: &[bool], output_len: usize, seed_bits: &[bool]) -> Result<Vec<bool>> {
    if output_len == 0 || input.is_empty() {
        return Err(Error::InvalidParameter("empty input or output".into()));
    }
    let needed = input.len() + output_len - 1;
    if seed_bits.len() != needed {
        return Err(Error::InvalidParameter(format!(
            "Toeplitz seed needs {needed} bits, got {}",
            seed_bits.len()
        )));
    }
    let n = input.len();
    let mut out = vec![false; output_len];
    for (i, bit) in out.iter_mut().enumerate() {
        let mut acc = false;
        for (j, &inp) in input.iter().enumerate() {
            // T[i][j] = seed[i - j + n - 1]
            if inp && seed_bits[i + (n - 1) - j] {
                acc = !acc;
            }
        }
        *bit = acc;
    }
    Ok(out)
}

/// Convenience wrapper expanding a 64-bit seed into the Toeplitz diagonal
/// with a deterministic stream cipher.
pub fn seeded_toeplitz_hash(input: &[bool], output_len: usize, seed: u64) -> Result<Vec<bool>> {
    if output_len == 0 || input.is_empty() {
        return Err(Error::InvalidParameter("empty input or output".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seed_bits: Vec<bool> = (0..input.len() + output_len - 1).map(|_| rng.gen()).collect();
    toeplitz_hash(input, output_len, &seed_bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_the_seed() {
        let input: Vec<bool> = (0..128).map(|i| i % 3 == 0).collect();
        let a = seeded_toeplitz_hash(&input, 32, 7).unwrap();
        let b = seeded_toeplitz_hash(&input, 32, 7).unwrap();
        assert_eq!(a, b);
        let c = seeded_toeplitz_hash(&input, 32, 8).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.len(), 32);
    }

    #[test]
    fn linear_over_gf2() {
        let seed: Vec<bool> = (0..96 + 16 - 1).map(|i| (i * 7) % 5 < 2).collect();
        let x: Vec<bool> = (0..96).map(|i| i % 2 == 0).collect();
        let y: Vec<bool> = (0..96).map(|i| i % 5 == 0).collect();
        let xy: Vec<bool> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        let hx = toeplitz_hash(&x, 16, &seed).unwrap();
        let hy = toeplitz_hash(&y, 16, &seed).unwrap();
        let hxy = toeplitz_hash(&xy, 16, &seed).unwrap();
        for i in 0..16 {
            assert_eq!(hxy[i], hx[i] ^ hy[i]);
        }
    }

    #[test]
    fn rejects_wrong_seed_length() {
        let input = vec![true; 10];
        assert!(toeplitz_hash(&input, 4, &vec![false; 10]).is_err());
        assert!(toeplitz_hash(&[], 4, &[]).is_err());
    }
}
