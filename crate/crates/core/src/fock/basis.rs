/// Hilbert-space dimension of `modes` modes truncated at `cutoff` photons each.
pub fn basis_dim(modes: usize, cutoff: usize) -> usize {
    (cutoff + 1).pow(modes as u32)
}

/// Flat basis index of a photon-number tuple (mode 0 slowest).
pub fn basis_index(digits: &[usize], cutoff: usize) -> usize {
    digits.iter().fold(0, |acc, &n| {
        debug_assert!(n <= cutoff);
        acc * (cutoff + 1) + n
    })
}

/// Photon-number tuple of a flat basis index.
pub fn basis_digits(mut index: usize, modes: usize, cutoff: usize) -> Vec<usize> {
    let base = cutoff + 1;
    let mut digits = vec![0; modes];
    for slot in digits.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
    digits
}

/// Stride of `mode` in the flat index.
pub(crate) fn stride(mode: usize, modes: usize, cutoff: usize) -> usize {
    (cutoff + 1).pow((modes - 1 - mode) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for i in 0..basis_dim(3, 2) {
            let d = basis_digits(i, 3, 2);
            assert_eq!(basis_index(&d, 2), i);
        }
    }

    #[test]
    fn mode_zero_is_slowest() {
        assert_eq!(basis_index(&[1, 0], 1), 2);
        assert_eq!(basis_index(&[0, 1], 1), 1);
        assert_eq!(basis_digits(5, 2, 2), vec![1, 2]);
        assert_eq!(stride(0, 2, 2), 3);
    }
}
