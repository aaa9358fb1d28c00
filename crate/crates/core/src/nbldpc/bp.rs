//! Flooding belief propagation over GF(B) with Walsh–Hadamard check updates.
//!
//! A check-to-variable message is the distribution of
//! `-H_ai^{-1} sum_{j != i} H_aj q_j`. Relabelling each incoming vector by
//! its coefficient turns the sum into a plain GF addition, i.e. an XOR
//! convolution, which the WHT diagonalizes.

use crate::error::{Error, Result};
use crate::gf::{wht_in_place, FieldElement, FieldSpec};

use super::ParityCheckMatrix;

/// Floor applied to every message entry before normalization.
pub const PROB_FLOOR: f64 = 1e-30;

/// Clamps at [`PROB_FLOOR`] and rescales to unit sum. Returns `false` when
/// the input had no usable mass and was replaced by the uniform vector.
fn normalize(v: &mut [f64]) -> bool {
    let mut sum = 0.0;
    let mut has_mass = false;
    for x in v.iter_mut() {
        if *x > PROB_FLOOR && x.is_finite() {
            has_mass = true;
        } else {
            *x = PROB_FLOOR;
        }
        sum += *x;
    }
    if !has_mass {
        v.fill(1.0 / v.len() as f64);
        return false;
    }
    let inv = 1.0 / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
    true
}

/// `dst[coeff * q] = src[q]`: moves a symbol distribution into the domain of
/// the scaled symbol.
fn scatter_scaled(field: &FieldSpec, coeff: FieldElement, src: &[f64], dst: &mut [f64]) {
    for (q, &p) in src.iter().enumerate() {
        dst[field.mul(coeff, FieldElement(q as u16)).index()] = p;
    }
}

/// `dst[q] = src[coeff * q]`.
fn gather_scaled(field: &FieldSpec, coeff: FieldElement, src: &[f64], dst: &mut [f64]) {
    for (q, d) in dst.iter_mut().enumerate() {
        *d = src[field.mul(coeff, FieldElement(q as u16)).index()];
    }
}

/// Scratch space for one check of degree up to `d`.
#[derive(Debug, Default, Clone)]
struct CheckScratch {
    spectra: Vec<f64>,
    suffix: Vec<f64>,
    prefix: Vec<f64>,
    work: Vec<f64>,
}

/// Computes all outgoing messages of a check node. `incoming[j]` and
/// `outgoing[j]` are laid out contiguously with stride `B`. Returns the
/// number of outgoing messages that underflowed.
fn update_check(
    field: &FieldSpec,
    coeffs: &[FieldElement],
    incoming: &[f64],
    outgoing: &mut [f64],
    scratch: &mut CheckScratch,
) -> usize {
    let b = field.size();
    let d = coeffs.len();
    let CheckScratch {
        spectra,
        suffix,
        prefix,
        work,
    } = scratch;
    spectra.resize(d * b, 0.0);
    suffix.resize((d + 1) * b, 0.0);
    prefix.resize(b, 0.0);
    work.resize(b, 0.0);

    for j in 0..d {
        let spec = &mut spectra[j * b..(j + 1) * b];
        scatter_scaled(field, coeffs[j], &incoming[j * b..(j + 1) * b], spec);
        wht_in_place(spec).expect("field size is a power of two");
    }
    suffix[d * b..].fill(1.0);
    for j in (0..d).rev() {
        let (head, tail) = suffix.split_at_mut((j + 1) * b);
        let cur = &mut head[j * b..];
        for ((c, &n), &s) in cur
            .iter_mut()
            .zip(&tail[..b])
            .zip(&spectra[j * b..(j + 1) * b])
        {
            *c = n * s;
        }
    }
    prefix.fill(1.0);
    let inv_b = 1.0 / b as f64;
    let mut underflows = 0;
    for i in 0..d {
        for ((w, &p), &s) in work
            .iter_mut()
            .zip(prefix.iter())
            .zip(&suffix[(i + 1) * b..(i + 2) * b])
        {
            *w = p * s;
        }
        wht_in_place(work).expect("field size is a power of two");
        let out = &mut outgoing[i * b..(i + 1) * b];
        // The other symbols sum to s; the check needs coeff_i * q_i = s.
        gather_scaled(field, coeffs[i], work, out);
        for v in out.iter_mut() {
            *v *= inv_b;
        }
        if !normalize(out) {
            underflows += 1;
        }
        for (p, &s) in prefix.iter_mut().zip(&spectra[i * b..(i + 1) * b]) {
            *p *= s;
        }
    }
    underflows
}

fn check_inputs(field: &FieldSpec, coeffs: &[FieldElement], incoming: &[&[f64]]) -> Result<()> {
    if coeffs.len() != incoming.len() {
        return Err(Error::dim("check messages", coeffs.len(), incoming.len()));
    }
    for (c, m) in coeffs.iter().zip(incoming) {
        if c.is_zero() || c.index() >= field.size() {
            return Err(Error::Field(format!(
                "invalid check coefficient {}",
                c.value()
            )));
        }
        if m.len() != field.size() {
            return Err(Error::dim("message length", field.size(), m.len()));
        }
    }
    Ok(())
}

/// All outgoing messages of one check with coefficients `coeffs` and
/// incoming variable-to-check messages `incoming`.
pub fn check_node_update(
    field: &FieldSpec,
    coeffs: &[FieldElement],
    incoming: &[&[f64]],
) -> Result<Vec<Vec<f64>>> {
    check_inputs(field, coeffs, incoming)?;
    let b = field.size();
    let flat: Vec<f64> = incoming.iter().flat_map(|m| m.iter().copied()).collect();
    let mut out = vec![0.0; flat.len()];
    update_check(field, coeffs, &flat, &mut out, &mut CheckScratch::default());
    Ok(out.chunks(b).map(<[f64]>::to_vec).collect())
}

/// The single message towards a variable with coefficient `target`, given
/// the coefficients and messages of the other neighbours of the check.
pub fn check_to_variable(
    field: &FieldSpec,
    others: &[FieldElement],
    incoming: &[&[f64]],
    target: FieldElement,
) -> Result<Vec<f64>> {
    check_inputs(field, others, incoming)?;
    if target.is_zero() || target.index() >= field.size() {
        return Err(Error::Field(format!(
            "invalid target coefficient {}",
            target.value()
        )));
    }
    let b = field.size();
    let mut coeffs = others.to_vec();
    coeffs.push(target);
    let mut flat: Vec<f64> = incoming.iter().flat_map(|m| m.iter().copied()).collect();
    flat.resize(flat.len() + b, 1.0 / b as f64);
    let mut out = vec![0.0; flat.len()];
    update_check(
        field,
        &coeffs,
        &flat,
        &mut out,
        &mut CheckScratch::default(),
    );
    Ok(out[others.len() * b..].to_vec())
}

/// Message buffers reusable across decodes of the same code.
#[derive(Debug, Default, Clone)]
pub struct BpWorkspace {
    var_to_check: Vec<f64>,
    check_to_var: Vec<f64>,
    priors: Vec<f64>,
    coeffs: Vec<FieldElement>,
    scratch: CheckScratch,
    /// Messages replaced by the uniform vector in the last decode.
    pub underflows: usize,
}

impl BpWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Runs `iterations` flooding rounds and returns the per-variable beliefs,
/// flattened `L x B`.
pub fn siso_decode(h: &ParityCheckMatrix, priors: &[f64], iterations: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; priors.len()];
    siso_decode_into(h, priors, iterations, &mut out, &mut BpWorkspace::new())?;
    Ok(out)
}

/// [`siso_decode`] writing into `out` and reusing `ws`.
pub fn siso_decode_into(
    h: &ParityCheckMatrix,
    priors: &[f64],
    iterations: usize,
    out: &mut [f64],
    ws: &mut BpWorkspace,
) -> Result<()> {
    let b = h.field().size();
    let l = h.num_cols();
    if priors.len() != l * b {
        return Err(Error::dim("priors", l * b, priors.len()));
    }
    if out.len() != l * b {
        return Err(Error::dim("beliefs", l * b, out.len()));
    }
    out.copy_from_slice(priors);
    ws.underflows = 0;
    if iterations == 0 {
        for sec in out.chunks_mut(b) {
            let s: f64 = sec.iter().sum();
            if s > 0.0 && s.is_finite() {
                sec.iter_mut().for_each(|v| *v /= s);
            } else {
                sec.fill(1.0 / b as f64);
            }
        }
        return Ok(());
    }

    let edges = h.num_edges();
    ws.priors.clear();
    ws.priors.extend_from_slice(priors);
    for sec in ws.priors.chunks_mut(b) {
        if !normalize(sec) {
            ws.underflows += 1;
        }
    }
    ws.var_to_check.resize(edges * b, 0.0);
    ws.check_to_var.resize(edges * b, 0.0);
    for (a, row) in h.rows().iter().enumerate() {
        let off = h.row_offset(a);
        for (k, e) in row.iter().enumerate() {
            ws.var_to_check[(off + k) * b..(off + k + 1) * b]
                .copy_from_slice(&ws.priors[e.col * b..(e.col + 1) * b]);
        }
    }

    for it in 0..iterations {
        if it > 0 {
            update_variables(h, ws);
        }
        for (a, row) in h.rows().iter().enumerate() {
            let off = h.row_offset(a);
            let d = row.len();
            ws.coeffs.clear();
            ws.coeffs.extend(row.iter().map(|e| e.coeff));
            ws.underflows += update_check(
                h.field(),
                &ws.coeffs,
                &ws.var_to_check[off * b..(off + d) * b],
                &mut ws.check_to_var[off * b..(off + d) * b],
                &mut ws.scratch,
            );
        }
    }

    for i in 0..l {
        let belief = &mut out[i * b..(i + 1) * b];
        belief.copy_from_slice(&ws.priors[i * b..(i + 1) * b]);
        for &e in h.var_edges(i) {
            for (x, &m) in belief.iter_mut().zip(&ws.check_to_var[e * b..(e + 1) * b]) {
                *x *= m;
            }
        }
        if !normalize(belief) {
            ws.underflows += 1;
        }
    }
    if ws.underflows > 0 {
        log::debug!("belief propagation: {} messages underflowed", ws.underflows);
    }
    Ok(())
}

fn update_variables(h: &ParityCheckMatrix, ws: &mut BpWorkspace) {
    let b = h.field().size();
    for i in 0..h.num_cols() {
        let prior = &ws.priors[i * b..(i + 1) * b];
        let var_edges = h.var_edges(i);
        for &e in var_edges {
            let msg = &mut ws.var_to_check[e * b..(e + 1) * b];
            msg.copy_from_slice(prior);
            for &other in var_edges.iter().filter(|&&o| o != e) {
                for (x, &m) in msg
                    .iter_mut()
                    .zip(&ws.check_to_var[other * b..(other + 1) * b])
                {
                    *x *= m;
                }
            }
            if !normalize(msg) {
                ws.underflows += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nbldpc::{generate_code, Entry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random_prob(b: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v: Vec<f64> = (0..b).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    }

    // Direct enumeration of all assignments of the other symbols.
    fn brute_force(
        f: &FieldSpec,
        others: &[FieldElement],
        incoming: &[Vec<f64>],
        target: FieldElement,
    ) -> Vec<f64> {
        let b = f.size();
        let d = others.len();
        let mut out = vec![0.0; b];
        let total = b.pow(d as u32);
        for code in 0..total {
            let mut rest = code;
            let mut sum = FieldElement::ZERO;
            let mut prob = 1.0;
            for j in 0..d {
                let q = rest % b;
                rest /= b;
                sum = f.add(sum, f.mul(others[j], FieldElement(q as u16)));
                prob *= incoming[j][q];
            }
            // target * q = -sum = sum
            let q = f.div(sum, target).unwrap();
            out[q.index()] += prob;
        }
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= s);
        out
    }

    #[test]
    fn wht_check_matches_enumeration() {
        let f = FieldSpec::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..1000 {
            let degree = 2 + case % 3; // check degree 2..=4
            let others: Vec<FieldElement> = (0..degree - 1)
                .map(|_| FieldElement(rng.random_range(1..4)))
                .collect();
            let target = FieldElement(rng.random_range(1..4));
            let incoming: Vec<Vec<f64>> =
                (0..degree - 1).map(|_| random_prob(4, &mut rng)).collect();
            let refs: Vec<&[f64]> = incoming.iter().map(Vec::as_slice).collect();
            let fast = check_to_variable(&f, &others, &refs, target).unwrap();
            let slow = brute_force(&f, &others, &incoming, target);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "case {case}: {fast:?} vs {slow:?}");
            }
        }
    }

    #[test]
    fn all_outgoing_agree_with_single() {
        let f = FieldSpec::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<FieldElement> = (0..4)
            .map(|_| FieldElement(rng.random_range(1..8)))
            .collect();
        let incoming: Vec<Vec<f64>> = (0..4).map(|_| random_prob(8, &mut rng)).collect();
        let refs: Vec<&[f64]> = incoming.iter().map(Vec::as_slice).collect();
        let all = check_node_update(&f, &coeffs, &refs).unwrap();
        for i in 0..4 {
            let mut oc = coeffs.clone();
            oc.remove(i);
            let mut oi = refs.clone();
            oi.remove(i);
            let single = check_to_variable(&f, &oc, &oi, coeffs[i]).unwrap();
            for (a, b) in all[i].iter().zip(&single) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn check_message_examples() {
        let f = FieldSpec::new(8).unwrap();
        let mut onehot = vec![0.0; 256];
        onehot[0x37] = 1.0;
        let out =
            check_to_variable(&f, &[FieldElement::ONE], &[&onehot], FieldElement::ONE).unwrap();
        assert!((out[0x37] - 1.0).abs() < 1e-12);
        assert!(out.iter().enumerate().all(|(q, &p)| q == 0x37 || p < 1e-20));

        let uniform = vec![1.0 / 256.0; 256];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let other = random_prob(256, &mut rng);
        let out = check_to_variable(
            &f,
            &[FieldElement(3), FieldElement(200)],
            &[&other, &uniform],
            FieldElement(17),
        )
        .unwrap();
        assert!(out.iter().all(|&p| (p - 1.0 / 256.0).abs() < 1e-14));
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = FieldSpec::new(2).unwrap();
        let m = [0.25; 4];
        assert!(check_to_variable(&f, &[FieldElement(0)], &[&m], FieldElement::ONE).is_err());
        assert!(check_to_variable(&f, &[FieldElement(1)], &[&m[..3]], FieldElement::ONE).is_err());
        assert!(check_to_variable(&f, &[FieldElement(1)], &[], FieldElement::ONE).is_err());
    }

    #[test]
    fn zero_iterations_normalizes() {
        let h = generate_code(6, 4, 4, 2, 1).unwrap();
        let priors: Vec<f64> = (0..24).map(|k| (k % 5) as f64 + 1.0).collect();
        let out = siso_decode(&h, &priors, 0).unwrap();
        for (sec_in, sec_out) in priors.chunks(4).zip(out.chunks(4)) {
            let s: f64 = sec_in.iter().sum();
            for (a, b) in sec_in.iter().zip(sec_out) {
                assert!((a / s - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tree_code_gives_exact_marginals() {
        // One check over three variables is a tree; one round is exact.
        let f = Arc::new(FieldSpec::new(2).unwrap());
        let e = |col, c| Entry {
            col,
            coeff: FieldElement(c),
        };
        let h = ParityCheckMatrix::from_rows(f.clone(), 3, vec![vec![e(0, 1), e(1, 2), e(2, 3)]])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let priors: Vec<f64> = (0..3).flat_map(|_| random_prob(4, &mut rng)).collect();
            let mut exact = vec![0.0; 12];
            for code in 0..64usize {
                let w: Vec<FieldElement> = (0..3)
                    .map(|k| FieldElement(((code >> (2 * k)) & 3) as u16))
                    .collect();
                if !h.is_codeword(&w).unwrap() {
                    continue;
                }
                let p: f64 = (0..3).map(|k| priors[k * 4 + w[k].index()]).product();
                for k in 0..3 {
                    exact[k * 4 + w[k].index()] += p;
                }
            }
            for sec in exact.chunks_mut(4) {
                let s: f64 = sec.iter().sum();
                sec.iter_mut().for_each(|x| *x /= s);
            }
            for iters in 1..4 {
                let out = siso_decode(&h, &priors, iters).unwrap();
                for (a, b) in out.iter().zip(&exact) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn one_hot_codeword_is_fixed_point() {
        let h = generate_code(40, 32, 16, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let info: Vec<FieldElement> = (0..32)
            .map(|_| FieldElement(rng.random_range(0..16)))
            .collect();
        let cw = h.encode(&info).unwrap();
        let mut priors = vec![0.0; 40 * 16];
        for (i, s) in cw.symbols().iter().enumerate() {
            priors[i * 16 + s.index()] = 1.0;
        }
        for iters in [1, 2, 5] {
            let out = siso_decode(&h, &priors, iters).unwrap();
            for (a, b) in out.iter().zip(&priors) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beliefs_stay_on_simplex() {
        let h = generate_code(30, 24, 8, 2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let priors: Vec<f64> = (0..30).flat_map(|_| random_prob(8, &mut rng)).collect();
        let out = siso_decode(&h, &priors, 4).unwrap();
        for sec in out.chunks(8) {
            assert!(sec.iter().all(|&p| p >= 0.0));
            assert!((sec.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extreme_priors_do_not_produce_nan() {
        let h = generate_code(20, 16, 16, 2, 4).unwrap();
        let mut priors = vec![0.0; 20 * 16];
        // Contradicting one-hot priors on a non-codeword.
        for i in 0..20 {
            priors[i * 16 + (i * 7) % 16] = 1.0;
        }
        let out = siso_decode(&h, &priors, 3).unwrap();
        assert!(out.iter().all(|p| p.is_finite()));
        for sec in out.chunks(16) {
            assert!((sec.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
