//! Boolean circuits over {XOR, AND, NOT, const} with a canonical, injective,
//! fixed-size byte encoding. A function's encoding doubles as its identity.
//!
//! Layout: `input_bits: u16 | gate_count: u16 | output_count: u16`, then each
//! gate as an opcode byte followed by its operand wires (`u16` each), then the
//! output wires; all little-endian, zero-padded to the size bound.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_CIRCUIT_BYTES: usize = 48;
const HEADER_BYTES: usize = 6;

const OP_XOR: u8 = 1;
const OP_AND: u8 = 2;
const OP_NOT: u8 = 3;
const OP_CONST0: u8 = 4;
const OP_CONST1: u8 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Xor(u16, u16),
    And(u16, u16),
    Not(u16),
    Const(bool),
}

/// Wires `0..input_bits` are inputs; gate `g` drives wire `input_bits + g`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Circuit {
    input_bits: usize,
    gates: Vec<Gate>,
    outputs: Vec<u16>,
}

impl Circuit {
    pub fn new(input_bits: usize, gates: Vec<Gate>, outputs: Vec<u16>) -> Result<Self> {
        let wires = input_bits + gates.len();
        if wires > u16::MAX as usize || outputs.len() > u16::MAX as usize {
            return Err(Error::Parameter("circuit too large for 16-bit wire indices".into()));
        }
        for (g, gate) in gates.iter().enumerate() {
            let limit = (input_bits + g) as u16;
            let ok = match *gate {
                Gate::Xor(a, b) | Gate::And(a, b) => a < limit && b < limit,
                Gate::Not(a) => a < limit,
                Gate::Const(_) => true,
            };
            if !ok {
                return Err(Error::Parameter(format!("gate {g} reads a wire that is not yet driven")));
            }
        }
        if let Some(&w) = outputs.iter().find(|&&w| w as usize >= wires) {
            return Err(Error::Parameter(format!("output wire {w} does not exist")));
        }
        Ok(Self { input_bits, gates, outputs })
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn output_bits(&self) -> usize {
        self.outputs.len()
    }

    pub fn eval(&self, m: &BitString) -> Result<BitString> {
        if m.len() != self.input_bits {
            return Err(Error::InputLength { expected: self.input_bits, got: m.len() });
        }
        let mut wires = m.bits();
        for gate in &self.gates {
            let v = match *gate {
                Gate::Xor(a, b) => wires[a as usize] ^ wires[b as usize],
                Gate::And(a, b) => wires[a as usize] & wires[b as usize],
                Gate::Not(a) => !wires[a as usize],
                Gate::Const(c) => c,
            };
            wires.push(v);
        }
        Ok(BitString::from_bits(&self.outputs.iter().map(|&w| wires[w as usize]).collect::<Vec<_>>()))
    }

    /// Unpadded canonical encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + 5 * self.gates.len() + 2 * self.outputs.len());
        for v in [self.input_bits, self.gates.len(), self.outputs.len()] {
            out.extend((v as u16).to_le_bytes());
        }
        for gate in &self.gates {
            match *gate {
                Gate::Xor(a, b) | Gate::And(a, b) => {
                    out.push(if matches!(gate, Gate::Xor(..)) { OP_XOR } else { OP_AND });
                    out.extend(a.to_le_bytes());
                    out.extend(b.to_le_bytes());
                }
                Gate::Not(a) => {
                    out.push(OP_NOT);
                    out.extend(a.to_le_bytes());
                }
                Gate::Const(c) => out.push(if c { OP_CONST1 } else { OP_CONST0 }),
            }
        }
        for w in &self.outputs {
            out.extend(w.to_le_bytes());
        }
        out
    }

    /// Inverse of [`Circuit::encode`] on a padded buffer; padding must be zero.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let u16_at = |pos: &mut usize| -> Result<u16> {
            let b = bytes.get(*pos..*pos + 2).ok_or_else(|| Error::Decode("truncated circuit".into()))?;
            *pos += 2;
            Ok(u16::from_le_bytes([b[0], b[1]]))
        };
        let input_bits = u16_at(&mut pos)? as usize;
        let gate_count = u16_at(&mut pos)? as usize;
        let output_count = u16_at(&mut pos)? as usize;
        let mut gates = Vec::with_capacity(gate_count.min(bytes.len()));
        for _ in 0..gate_count {
            let op = *bytes.get(pos).ok_or_else(|| Error::Decode("truncated circuit".into()))?;
            pos += 1;
            gates.push(match op {
                OP_XOR => Gate::Xor(u16_at(&mut pos)?, u16_at(&mut pos)?),
                OP_AND => Gate::And(u16_at(&mut pos)?, u16_at(&mut pos)?),
                OP_NOT => Gate::Not(u16_at(&mut pos)?),
                OP_CONST0 => Gate::Const(false),
                OP_CONST1 => Gate::Const(true),
                other => return Err(Error::Decode(format!("unknown gate opcode {other}"))),
            });
        }
        let outputs = (0..output_count).map(|_| u16_at(&mut pos)).collect::<Result<Vec<_>>>()?;
        if bytes[pos..].iter().any(|&b| b != 0) {
            return Err(Error::Decode("nonzero bytes after the circuit".into()));
        }
        Circuit::new(input_bits, gates, outputs).map_err(|e| Error::Decode(e.to_string()))
    }

    pub fn constant(input_bits: usize, value: bool) -> Self {
        Circuit::new(input_bits, vec![Gate::Const(value)], vec![input_bits as u16]).expect("valid")
    }

    pub fn bit(input_bits: usize, i: usize) -> Self {
        Circuit::new(input_bits, vec![], vec![i as u16]).expect("valid")
    }

    pub fn identity(input_bits: usize) -> Self {
        Circuit::new(input_bits, vec![], (0..input_bits as u16).collect()).expect("valid")
    }

    pub fn parity(input_bits: usize) -> Self {
        if input_bits < 2 {
            return if input_bits == 1 { Self::bit(1, 0) } else { Self::constant(0, false) };
        }
        let mut gates = vec![Gate::Xor(0, 1)];
        for i in 2..input_bits {
            gates.push(Gate::Xor((input_bits + gates.len() - 1) as u16, i as u16));
        }
        let out = (input_bits + gates.len() - 1) as u16;
        Circuit::new(input_bits, gates, vec![out]).expect("valid")
    }

    pub fn and(input_bits: usize, i: usize, j: usize) -> Self {
        Circuit::new(input_bits, vec![Gate::And(i as u16, j as u16)], vec![input_bits as u16]).expect("valid")
    }

    pub fn xor(input_bits: usize, i: usize, j: usize) -> Self {
        Circuit::new(input_bits, vec![Gate::Xor(i as u16, j as u16)], vec![input_bits as u16]).expect("valid")
    }

    /// `a | b = !(!a & !b)`.
    pub fn or(input_bits: usize, i: usize, j: usize) -> Self {
        let n = input_bits as u16;
        Circuit::new(
            input_bits,
            vec![Gate::Not(i as u16), Gate::Not(j as u16), Gate::And(n, n + 1), Gate::Not(n + 2)],
            vec![n + 3],
        )
        .expect("valid")
    }
}

/// A circuit together with the byte bound `Q` it is padded to.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunctionDesc {
    circuit: Circuit,
    max_bytes: usize,
}

impl FunctionDesc {
    pub fn new(circuit: Circuit, max_bytes: usize) -> Result<Self> {
        let size = circuit.encode().len();
        if size > max_bytes {
            return Err(Error::Oversize { size, max: max_bytes });
        }
        Ok(Self { circuit, max_bytes })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn max_bytes(&self) -> usize {
        self.max_bytes
    }

    pub fn input_bits(&self) -> usize {
        self.circuit.input_bits
    }

    pub fn eval(&self, m: &BitString) -> Result<BitString> {
        self.circuit.eval(m)
    }

    /// Exactly `max_bytes` bytes.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.circuit.encode();
        out.resize(self.max_bytes, 0);
        out
    }

    /// The encoding read as an `8 * max_bytes`-bit identity.
    pub fn identity(&self) -> BitString {
        BitString::from_bytes(&self.encode(), 8 * self.max_bytes).expect("full bytes")
    }

    pub fn from_identity(id: &BitString) -> Result<Self> {
        if id.len() % 8 != 0 {
            return Err(Error::Decode(format!("identity of {} bits is not whole bytes", id.len())));
        }
        let circuit = Circuit::decode(id.as_bytes())?;
        Ok(Self { circuit, max_bytes: id.len() / 8 })
    }
}

impl Serialize for FunctionDesc {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::hexser::serialize(&self.encode(), s)
    }
}

impl<'de> Deserialize<'de> for FunctionDesc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bytes = crate::hexser::deserialize(d)?;
        let circuit = Circuit::decode(&bytes).map_err(serde::de::Error::custom)?;
        Ok(Self { circuit, max_bytes: bytes.len() })
    }
}

/// Eight small functions on `input_bits >= 2` bits, used as a test family.
pub fn standard_family(input_bits: usize, max_bytes: usize) -> Result<Vec<(&'static str, FunctionDesc)>> {
    if input_bits < 2 {
        return Err(Error::Parameter("the standard family needs at least 2 input bits".into()));
    }
    let last = input_bits - 1;
    [
        ("const0", Circuit::constant(input_bits, false)),
        ("const1", Circuit::constant(input_bits, true)),
        ("parity", Circuit::parity(input_bits)),
        ("first_bit", Circuit::bit(input_bits, 0)),
        ("last_bit", Circuit::bit(input_bits, last)),
        ("and01", Circuit::and(input_bits, 0, 1)),
        ("or01", Circuit::or(input_bits, 0, 1)),
        ("xor_ends", Circuit::xor(input_bits, 0, last)),
    ]
    .into_iter()
    .map(|(name, c)| Ok((name, FunctionDesc::new(c, max_bytes)?)))
    .collect()
}
