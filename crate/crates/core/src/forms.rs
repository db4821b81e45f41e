//! Index bookkeeping for wedge products of N-adapted co-frame factors `e^α`.

use crate::expr::Signomial;

/// Sorts a sequence of co-frame labels, returning the permutation sign, or
/// `None` when a label repeats (the wedge product vanishes).
pub fn sort_with_sign(seq: &[u8]) -> Option<(f64, Vec<u8>)> {
    let mut v = seq.to_vec();
    let mut sign = 1.0;
    // insertion sort, counting transpositions
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((sign, v))
}

/// `e^I ∧ e^J` for sorted index sets.
pub fn wedge(a: &[u8], b: &[u8]) -> Option<(f64, Vec<u8>)> {
    if a.iter().any(|x| b.contains(x)) {
        return None;
    }
    let mut seq = Vec::with_capacity(a.len() + b.len());
    seq.extend_from_slice(a);
    seq.extend_from_slice(b);
    sort_with_sign(&seq)
}

/// `e^β ∧ e^I` for a single label `β`.
pub fn wedge_left(beta: u8, set: &[u8]) -> Option<(f64, Vec<u8>)> {
    if set.contains(&beta) {
        return None;
    }
    let pos = set.iter().filter(|&&x| x < beta).count();
    let mut v = Vec::with_capacity(set.len() + 1);
    v.extend_from_slice(&set[..pos]);
    v.push(beta);
    v.extend_from_slice(&set[pos..]);
    let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, v))
}

/// Interior product `ι(e_β)` on a sorted index set: the sign and the remaining
/// set, or `None` when `β` is absent.
pub fn contract(beta: u8, set: &[u8]) -> Option<(f64, Vec<u8>)> {
    let pos = set.iter().position(|&x| x == beta)?;
    let mut v = set.to_vec();
    v.remove(pos);
    let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, v))
}

/// Expansion of `d(e^I)` in a nonholonomic frame with structure coefficients
/// `w^γ_{μν}` (`[e_μ, e_ν] = w^γ_{μν} e_γ`), using `d e^γ = −Σ_{μ<ν} w^γ_{μν} e^μ∧e^ν`.
/// Returns `(J, coefficient)` pairs with repeated `J` already merged.
pub fn basis_differential<W>(set: &[u8], dim: usize, w: W) -> Vec<(Vec<u8>, Signomial)>
where
    W: Fn(usize, usize, usize) -> Signomial,
{
    let mut out: std::collections::BTreeMap<Vec<u8>, Signomial> = Default::default();
    for (k, &gamma) in set.iter().enumerate() {
        let pos_sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for mu in 0..dim {
            for nu in (mu + 1)..dim {
                let coeff = w(gamma as usize, mu, nu);
                if coeff.is_zero() {
                    continue;
                }
                let mut seq: Vec<u8> = set[..k].to_vec();
                seq.push(mu as u8);
                seq.push(nu as u8);
                seq.extend_from_slice(&set[k + 1..]);
                if let Some((s, sorted)) = sort_with_sign(&seq) {
                    let term = coeff.scale_re(-pos_sign * s);
                    let slot = out.entry(sorted).or_insert_with(|| Signomial::zero(coeff.dim()));
                    *slot = slot.add(&term);
                }
            }
        }
    }
    out.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wedge_signs() {
        assert_eq!(wedge(&[1], &[0]), Some((-1.0, vec![0, 1])));
        assert_eq!(wedge(&[0], &[1]), Some((1.0, vec![0, 1])));
        assert_eq!(wedge(&[0, 2], &[1]), Some((-1.0, vec![0, 1, 2])));
        assert_eq!(wedge(&[0, 1], &[1]), None);
        assert_eq!(wedge_left(1, &[0, 2]), Some((-1.0, vec![0, 1, 2])));
        assert_eq!(wedge_left(3, &[0, 2]), Some((1.0, vec![0, 2, 3])));
    }

    #[test]
    fn contraction_signs() {
        assert_eq!(contract(0, &[0, 1]), Some((1.0, vec![1])));
        assert_eq!(contract(1, &[0, 1]), Some((-1.0, vec![0])));
        assert_eq!(contract(2, &[0, 1]), None);
    }

    #[test]
    fn contraction_is_left_inverse_of_wedge_up_to_count() {
        // ι(e_β)(e^β ∧ e^I) = e^I when β ∉ I
        let set = [0u8, 2, 3];
        let (s1, w) = wedge_left(1, &set).unwrap();
        let (s2, back) = contract(1, &w).unwrap();
        assert_eq!(back, set.to_vec());
        assert_eq!(s1 * s2, 1.0);
    }
}
