//! Sparse regression inner code: code parameters, the sensing dictionary,
//! one-hot-per-section messages and quantization.

mod dictionary;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gf::FieldElement;
use crate::nbldpc::OuterCodeword;

pub use dictionary::{Dictionary, Ensemble, OpScratch};

use num_complex::Complex64;

/// Static parameters of an SR-LDPC code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    /// Number of sections L.
    pub sections: usize,
    /// Section size B, a power of two.
    pub section_size: usize,
    /// Information sections L_inf.
    pub info_sections: usize,
    /// Complex channel uses n.
    pub channel_uses: usize,
    /// Power per section P; nonzeros of the message vector equal sqrt(nP).
    pub power: f64,
}

impl CodeSpec {
    pub fn new(
        sections: usize,
        section_size: usize,
        info_sections: usize,
        channel_uses: usize,
        power: f64,
    ) -> Result<Self> {
        let spec = CodeSpec {
            sections,
            section_size,
            info_sections,
            channel_uses,
            power,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit total power: P = 1/L.
    pub fn with_unit_power(
        sections: usize,
        section_size: usize,
        info_sections: usize,
        channel_uses: usize,
    ) -> Result<Self> {
        Self::new(
            sections,
            section_size,
            info_sections,
            channel_uses,
            1.0 / sections as f64,
        )
    }

    /// L = 766, B = 256, L_inf = 736, n = 3675, P = 1/L.
    pub fn reference() -> Self {
        Self::with_unit_power(766, 256, 736, 3675).expect("reference parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.sections == 0 || self.channel_uses == 0 {
            return bad(format!(
                "need L, n >= 1, got L={}, n={}",
                self.sections, self.channel_uses
            ));
        }
        if !self.section_size.is_power_of_two()
            || self.section_size < 2
            || self.section_size > 1 << crate::gf::MAX_BITS
        {
            return bad(format!(
                "section size {} must be a power of two in 2..=1024",
                self.section_size
            ));
        }
        if self.info_sections == 0 || self.info_sections > self.sections {
            return bad(format!(
                "L_inf={} outside 1..=L={}",
                self.info_sections, self.sections
            ));
        }
        if self.channel_uses > self.total_columns() {
            return bad(format!(
                "n={} exceeds N={}",
                self.channel_uses,
                self.total_columns()
            ));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return bad(format!("power {} must be positive", self.power));
        }
        Ok(())
    }

    /// N = L B.
    #[inline]
    pub fn total_columns(&self) -> usize {
        self.sections * self.section_size
    }

    #[inline]
    pub fn bits_per_section(&self) -> usize {
        self.section_size.trailing_zeros() as usize
    }

    /// δ = N / n.
    #[inline]
    pub fn delta(&self) -> f64 {
        self.total_columns() as f64 / self.channel_uses as f64
    }

    /// Value of every nonzero entry, sqrt(nP).
    #[inline]
    pub fn amplitude(&self) -> f64 {
        (self.channel_uses as f64 * self.power).sqrt()
    }

    /// Total transmit power LP.
    #[inline]
    pub fn total_power(&self) -> f64 {
        self.sections as f64 * self.power
    }

    pub fn rate_inner(&self) -> f64 {
        (self.sections * self.bits_per_section()) as f64 / self.channel_uses as f64
    }

    pub fn rate_outer(&self) -> f64 {
        self.info_sections as f64 / self.sections as f64
    }

    /// Information bits per channel use.
    pub fn rate(&self) -> f64 {
        self.rate_inner() * self.rate_outer()
    }

    /// Information bits per block.
    pub fn info_bits(&self) -> usize {
        self.info_sections * self.bits_per_section()
    }

    /// SNR = LP / σ².
    pub fn snr(&self, sigma2: f64) -> f64 {
        self.total_power() / sigma2
    }

    /// Noise variance for a given Eb/N0 in dB, with Eb/N0 = SNR / R.
    pub fn sigma2_for_ebn0_db(&self, ebn0_db: f64) -> f64 {
        self.total_power() / (10f64.powf(ebn0_db / 10.0) * self.rate())
    }

    pub fn ebn0_db_for_sigma2(&self, sigma2: f64) -> f64 {
        10.0 * (self.snr(sigma2) / self.rate()).log10()
    }

    /// Short stable digest of the parameters, used to tag derived tables.
    pub fn fingerprint(&self) -> String {
        let text = format!(
            "L={} B={} Linf={} n={} P={:e}",
            self.sections, self.section_size, self.info_sections, self.channel_uses, self.power
        );
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A message vector with one nonzero per section, stored by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseMessage {
    indices: Vec<usize>,
}

impl SparseMessage {
    pub fn new(indices: Vec<usize>, section_size: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= section_size) {
            return Err(Error::InvalidParameter(format!(
                "section index {bad} outside [0, {section_size})"
            )));
        }
        Ok(SparseMessage { indices })
    }

    /// Symbol q of section ℓ selects column q of that section.
    pub fn from_codeword(cw: &OuterCodeword) -> Self {
        SparseMessage {
            indices: cw.symbols().iter().map(|s| s.index()).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn sections(&self) -> usize {
        self.indices.len()
    }

    pub fn symbols(&self) -> Vec<FieldElement> {
        self.indices
            .iter()
            .map(|&i| FieldElement(i as u16))
            .collect()
    }

    /// Dense vector with value `amplitude` at each selected position.
    pub fn to_dense(&self, section_size: usize, amplitude: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.indices.len() * section_size];
        for (l, &i) in self.indices.iter().enumerate() {
            x[l * section_size + i] = amplitude;
        }
        x
    }

    pub fn to_dense_complex(&self, section_size: usize, amplitude: f64) -> Vec<Complex64> {
        self.to_dense(section_size, amplitude)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect()
    }

    /// Number of sections whose index differs.
    pub fn section_errors(&self, other: &SparseMessage) -> usize {
        self.indices
            .iter()
            .zip(&other.indices)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Per-section argmax; ties go to the lowest index.
pub fn quantize(r: &[f64], section_size: usize) -> SparseMessage {
    let indices = r
        .chunks(section_size)
        .map(|sec| {
            let mut best = 0;
            for (i, &v) in sec.iter().enumerate().skip(1) {
                if v > sec[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    SparseMessage { indices }
}

/// Maps an outer codeword to its message vector and the transmitted
/// signal z = A x.
pub fn encode_message(
    spec: &CodeSpec,
    dict: &Dictionary,
    cw: &OuterCodeword,
) -> Result<(SparseMessage, Vec<Complex64>)> {
    if cw.len() != spec.sections {
        return Err(Error::dim("codeword sections", spec.sections, cw.len()));
    }
    if cw.symbols().iter().any(|s| s.index() >= spec.section_size) {
        return Err(Error::InvalidParameter(
            "codeword symbol exceeds section size".into(),
        ));
    }
    let msg = SparseMessage::from_codeword(cw);
    let z = dict.forward(&msg.to_dense_complex(spec.section_size, spec.amplitude()))?;
    Ok((msg, z))
}

/// Groups a bit sequence (values 0/1, most significant bit first) into
/// symbols of `bits_per_symbol` bits.
pub fn bits_to_symbols(bits: &[u8], bits_per_symbol: usize) -> Result<Vec<FieldElement>> {
    if bits_per_symbol == 0 || bits.len() % bits_per_symbol != 0 {
        return Err(Error::InvalidParameter(format!(
            "{} bits do not split into {bits_per_symbol}-bit symbols",
            bits.len()
        )));
    }
    bits.chunks(bits_per_symbol)
        .map(|chunk| {
            chunk
                .iter()
                .try_fold(0u16, |acc, &b| match b {
                    0 | 1 => Ok((acc << 1) | b as u16),
                    _ => Err(Error::InvalidParameter(format!("bit value {b}"))),
                })
                .map(FieldElement)
        })
        .collect()
}

pub fn symbols_to_bits(symbols: &[FieldElement], bits_per_symbol: usize) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| {
            (0..bits_per_symbol)
                .rev()
                .map(move |k| ((s.value() >> k) & 1) as u8)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nbldpc::generate_code;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_rates() {
        let s = CodeSpec::reference();
        assert_eq!(s.total_columns(), 196_096);
        assert!((s.rate_inner() - 766.0 * 8.0 / 3675.0).abs() < 1e-12);
        assert!((s.rate() - 1.6022).abs() < 1e-3);
        assert!((s.total_power() - 1.0).abs() < 1e-12);
        assert_eq!(s.info_bits(), 5888);
        let sigma2 = s.sigma2_for_ebn0_db(1.0);
        assert!((s.ebn0_db_for_sigma2(sigma2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(CodeSpec::new(4, 6, 2, 8, 0.25).is_err());
        assert!(CodeSpec::new(4, 4, 5, 8, 0.25).is_err());
        assert!(CodeSpec::new(4, 4, 2, 17, 0.25).is_err());
        assert!(CodeSpec::new(4, 4, 2, 8, 0.0).is_err());
        assert!(CodeSpec::new(4, 4, 2, 8, 0.25).is_ok());
        assert_ne!(
            CodeSpec::new(4, 4, 2, 8, 0.25).unwrap().fingerprint(),
            CodeSpec::new(4, 4, 2, 9, 0.25).unwrap().fingerprint()
        );
    }

    #[test]
    fn quantize_examples() {
        let m = SparseMessage::new(vec![3, 0, 2], 4).unwrap();
        assert_eq!(quantize(&m.to_dense(4, 2.0), 4), m);
        assert_eq!(quantize(&[0.5; 8], 4).indices(), &[0, 0]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let idx: Vec<usize> = (0..10).map(|_| rng.random_range(0..16)).collect();
            let m = SparseMessage::new(idx, 16).unwrap();
            let amp = 1.7;
            let noisy: Vec<f64> = m
                .to_dense(16, amp)
                .into_iter()
                .map(|v| v + rng.random_range(-0.49..0.49) * amp)
                .collect();
            assert_eq!(quantize(&noisy, 16), m);
        }
    }

    #[test]
    fn bit_packing() {
        let syms = bits_to_symbols(&[1, 0, 1, 1, 0, 0, 0, 1], 4).unwrap();
        assert_eq!(syms, vec![FieldElement(0b1011), FieldElement(0b0001)]);
        assert_eq!(symbols_to_bits(&syms, 4), vec![1, 0, 1, 1, 0, 0, 0, 1]);
        assert!(bits_to_symbols(&[1, 0, 1], 2).is_err());
        assert!(bits_to_symbols(&[2, 0], 2).is_err());
    }

    #[test]
    fn encode_all_zero_and_single_section() {
        let spec = CodeSpec::with_unit_power(4, 4, 2, 8).unwrap();
        let h = generate_code(4, 2, 4, 2, 0).unwrap();
        let dict = Dictionary::new(&spec, Ensemble::SignedDft, 3).unwrap();
        let cw = h.encode(&[FieldElement::ZERO; 2]).unwrap();
        let (x, _) = encode_message(&spec, &dict, &cw).unwrap();
        assert_eq!(x.indices(), &[0, 0, 0, 0]);
        let dense = x.to_dense(4, spec.amplitude());
        assert_eq!(dense.iter().filter(|&&v| v != 0.0).count(), 4);
        let l2: f64 = dense.iter().map(|v| v * v).sum();
        assert!((l2 - 8.0 * 0.25 * 4.0).abs() < 1e-12);

        let one = CodeSpec::with_unit_power(1, 8, 1, 4).unwrap();
        let dict = Dictionary::new(&one, Ensemble::SignedDft, 5).unwrap();
        let mut e = vec![Complex64::new(0.0, 0.0); 8];
        e[5] = Complex64::new(one.amplitude(), 0.0);
        let z = dict.forward(&e).unwrap();
        let col = dict.column(5);
        for (a, b) in z.iter().zip(&col) {
            assert!((a - b * one.amplitude()).norm() < 1e-12);
        }
    }

    #[test]
    fn reference_energy_concentrates() {
        let spec = CodeSpec::reference();
        let h = generate_code(766, 736, 256, 2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..3 {
            let dict = Dictionary::new(&spec, Ensemble::SignedDft, seed).unwrap();
            let info: Vec<FieldElement> = (0..736)
                .map(|_| FieldElement(rng.random_range(0..256)))
                .collect();
            let cw = h.encode(&info).unwrap();
            let (_, z) = encode_message(&spec, &dict, &cw).unwrap();
            let energy: f64 = z.iter().map(|v| v.norm_sqr()).sum();
            let ratio = energy / (spec.channel_uses as f64 * spec.total_power());
            assert!((0.9..=1.1).contains(&ratio), "ratio {ratio}");
        }
    }
}
