//! The LEARNING controller: a 4-4-2-1 sigmoid perceptron whose 33 parameters
//! are stored as a 1056-bit genome of Q24.8 words.
//!
//! Genome layout, one 32-bit word per parameter, most significant bit first:
//!
//! ```text
//! words  0..16  W1 (4×4, row-major, row = hidden-1 neuron)
//! words 16..20  b1
//! words 20..28  W2 (2×4, row-major, row = hidden-2 neuron)
//! words 28..30  b2
//! words 30..32  W3 (1×2)
//! word  32      b3
//! ```
//!
//! Inputs are raw physical values (m, m/s, rad, rad/s); every neuron,
//! including the output, is a logistic sigmoid.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fixed::{fixed_to_real, real_to_fixed};
use crate::plant::State;

pub const INPUTS: usize = 4;
pub const HIDDEN1: usize = 4;
pub const HIDDEN2: usize = 2;

pub const PARAM_COUNT: usize = (INPUTS * HIDDEN1 + HIDDEN1) + (HIDDEN1 * HIDDEN2 + HIDDEN2) + (HIDDEN2 + 1);
pub const GENOME_WORDS: usize = 33;
pub const WORD_BITS: usize = 32;
pub const GENOME_BITS: usize = GENOME_WORDS * WORD_BITS;
pub const GENOME_BYTES: usize = GENOME_WORDS * 4;
pub const GENOME_HEX_CHARS: usize = GENOME_BYTES * 2;

const _: () = assert!(PARAM_COUNT == GENOME_WORDS);
const _: () = assert!(GENOME_BITS == 1056);

/// Controller output voltage span.
pub const VOLTAGE_SPAN: f64 = 5.0;

/// Fixed-length bit string of 33 Q24.8 words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Genome {
    words: [u32; GENOME_WORDS],
}

impl Default for Genome {
    fn default() -> Self {
        Self {
            words: [0; GENOME_WORDS],
        }
    }
}

impl Genome {
    pub const fn from_words(words: [u32; GENOME_WORDS]) -> Self {
        Self { words }
    }

    pub fn words(&self) -> &[u32; GENOME_WORDS] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u32; GENOME_WORDS] {
        &mut self.words
    }

    /// Bit `i` of the string; bit 0 is the most significant bit of word 0.
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < GENOME_BITS);
        self.words[i / WORD_BITS] >> (WORD_BITS - 1 - i % WORD_BITS) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < GENOME_BITS);
        self.words[i / WORD_BITS] ^= 1 << (WORD_BITS - 1 - i % WORD_BITS);
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.len() != GENOME_BITS {
            return Err(Error::GenomeLength {
                expected: GENOME_BITS,
                found: bits.len(),
            });
        }
        let mut g = Genome::default();
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            g.flip(i);
        }
        Ok(g)
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..GENOME_BITS).map(|i| self.bit(i)).collect()
    }

    pub fn hamming(&self, other: &Genome) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// 132 bytes, big-endian words.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_be_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != GENOME_BYTES {
            return Err(Error::GenomeLength {
                expected: GENOME_BITS,
                found: bytes.len() * 8,
            });
        }
        let mut words = [0u32; GENOME_WORDS];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks_exact(4)) {
            *w = u32::from_be_bytes(chunk.try_into().unwrap());
        }
        Ok(Self { words })
    }

    /// 264 lowercase hex characters.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(GENOME_HEX_CHARS);
        for w in &self.words {
            write!(s, "{w:08x}").unwrap();
        }
        s
    }

    /// Parses hex text; whitespace and `#` comment lines are ignored.
    pub fn from_hex(text: &str) -> Result<Self> {
        let digits: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(|l| l.chars().filter(|c| !c.is_whitespace()))
            .collect();
        if digits.len() != GENOME_HEX_CHARS {
            return Err(Error::GenomeLength {
                expected: GENOME_BITS,
                found: digits.len() * 4,
            });
        }
        let bytes = hex::decode(&digits).map_err(|e| Error::GenomeFormat(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    /// Loads either format: a file of exactly 132 bytes is binary, anything else hex text.
    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() == GENOME_BYTES {
            return Self::from_bytes(&bytes);
        }
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::GenomeFormat(format!("{} is neither binary nor hex", path.display())))?;
        Self::from_hex(&text)
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Hex text preceded by optional `#` header lines.
    pub fn write_hex(&self, path: impl AsRef<Path>, header: &[String]) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for line in header {
            writeln!(text, "# {line}").unwrap();
        }
        writeln!(text, "{}", self.to_hex()).unwrap();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Real-valued network parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MlpParams {
    pub w1: [[f64; INPUTS]; HIDDEN1],
    pub b1: [f64; HIDDEN1],
    pub w2: [[f64; HIDDEN1]; HIDDEN2],
    pub b2: [f64; HIDDEN2],
    pub w3: [f64; HIDDEN2],
    pub b3: f64,
}

impl MlpParams {
    /// Parameters in genome order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(PARAM_COUNT);
        self.w1.iter().for_each(|row| out.extend_from_slice(row));
        out.extend_from_slice(&self.b1);
        self.w2.iter().for_each(|row| out.extend_from_slice(row));
        out.extend_from_slice(&self.b2);
        out.extend_from_slice(&self.w3);
        out.push(self.b3);
        out
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != PARAM_COUNT {
            return Err(Error::GenomeFormat(format!(
                "expected {PARAM_COUNT} parameters, got {}",
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        let mut next = || it.next().unwrap();
        let mut p = MlpParams::default();
        p.w1.iter_mut().flatten().for_each(|x| *x = next());
        p.b1.iter_mut().for_each(|x| *x = next());
        p.w2.iter_mut().flatten().for_each(|x| *x = next());
        p.b2.iter_mut().for_each(|x| *x = next());
        p.w3.iter_mut().for_each(|x| *x = next());
        p.b3 = next();
        Ok(p)
    }
}

pub fn decode_genome(g: &Genome) -> MlpParams {
    let values: Vec<f64> = g.words.iter().map(|&w| fixed_to_real(w)).collect();
    MlpParams::from_slice(&values).expect("genome word count matches parameter count")
}

/// Inverse of [`decode_genome`]; values are rounded to Q24.8.
pub fn encode_params(params: &MlpParams) -> Genome {
    let mut words = [0u32; GENOME_WORDS];
    for (w, x) in words.iter_mut().zip(params.to_vec()) {
        *w = real_to_fixed(x);
    }
    Genome { words }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Network activation in [0, 1] (strictly inside unless a sigmoid saturates in f64).
pub fn forward(params: &MlpParams, input: &State) -> f64 {
    let x = input.to_array();
    let h1: [f64; HIDDEN1] = std::array::from_fn(|i| {
        let z: f64 = params.w1[i].iter().zip(&x).map(|(w, x)| w * x).sum();
        sigmoid(z + params.b1[i])
    });
    let h2: [f64; HIDDEN2] = std::array::from_fn(|j| {
        let z: f64 = params.w2[j].iter().zip(&h1).map(|(w, h)| w * h).sum();
        sigmoid(z + params.b2[j])
    });
    let z: f64 = params.w3.iter().zip(&h2).map(|(w, h)| w * h).sum();
    sigmoid(z + params.b3)
}

/// Affine map from activation to motor command, `5·a`.
pub fn output_to_voltage(activation: f64) -> f64 {
    VOLTAGE_SPAN * activation
}
