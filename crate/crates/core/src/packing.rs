//! Bit-exact packing of sub-byte codes into bytes, the offline weight
//! reordering transform, and index extraction for table lookup.
//!
//! Byte layout is little-endian within a byte (bit 0 = LSB). For 2-bit
//! codes, logical value `j` of each group of four occupies bits
//! `[2j, 2j+2)` of its byte; this is the natural layout used by schemes A
//! and B and by every activation matrix. Schemes C and D store each weight
//! byte rotated left by 2 bits so that after masking, the weight field
//! already sits at bits `[2, 4)` and combines with the activation field
//! through a single OR, with no shift in the inner loop. The rotation is
//! applied once, offline.
//!
//! The four schemes differ only in the mask/shift sequence used to extract
//! lookup indices, never in the indices themselves:
//!
//! * A: natural layout, one index per pass (weight field needs a shift)
//! * B: natural layout, two indices per pass via wide `0x33` masks
//! * C: rotated weights, one index per pass, no weight shift
//! * D: rotated weights, two indices per pass via wide `0xCC`/`0x33` masks
//!
//! 4-bit codes pack two per byte (value `j` at bits `[4j, 4j+4)`). 3-bit
//! codes are not byte-aligned and use a loose container of one code per
//! byte in the low 3 bits.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::quant::CodeTensor;

/// Packing/unpacking strategy identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PackScheme {
    A,
    B,
    C,
    D,
}

impl PackScheme {
    pub const ALL: [PackScheme; 4] = [PackScheme::A, PackScheme::B, PackScheme::C, PackScheme::D];

    pub fn id(self) -> u8 {
        match self {
            PackScheme::A => 0,
            PackScheme::B => 1,
            PackScheme::C => 2,
            PackScheme::D => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(PackScheme::A),
            1 => Ok(PackScheme::B),
            2 => Ok(PackScheme::C),
            3 => Ok(PackScheme::D),
            _ => Err(Error::InvalidHeader(format!("unknown scheme id {id}"))),
        }
    }

    pub fn letter(self) -> char {
        match self {
            PackScheme::A => 'a',
            PackScheme::B => 'b',
            PackScheme::C => 'c',
            PackScheme::D => 'd',
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(PackScheme::A),
            "b" | "B" => Ok(PackScheme::B),
            "c" | "C" => Ok(PackScheme::C),
            "d" | "D" => Ok(PackScheme::D),
            _ => Err(Error::InvalidHeader(format!("unknown scheme {s:?}"))),
        }
    }

    /// C and D store weight bytes rotated left by 2 bits.
    pub fn rotated_weights(self) -> bool {
        matches!(self, PackScheme::C | PackScheme::D)
    }
}

/// Which GEMM operand a packed matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandRole {
    Weight,
    Activation,
}

impl OperandRole {
    pub fn id(self) -> u8 {
        match self {
            OperandRole::Weight => 0,
            OperandRole::Activation => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(OperandRole::Weight),
            1 => Ok(OperandRole::Activation),
            _ => Err(Error::InvalidHeader(format!("unknown role id {id}"))),
        }
    }
}

/// Number of codes stored per byte for a bit width. 3-bit codes use a
/// loose one-per-byte container because they are not byte-aligned.
pub fn values_per_byte(bits: u8) -> Result<usize> {
    match bits {
        2 => Ok(4),
        3 => Ok(1),
        4 => Ok(2),
        other => Err(Error::UnsupportedBits(other)),
    }
}

/// Row-major matrix of sub-byte codes packed into bytes.
///
/// Columns are padded up to a multiple of the values-per-byte count;
/// padding positions hold `pad_code`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedMatrix {
    role: OperandRole,
    scheme: PackScheme,
    bits: u8,
    rows: usize,
    cols: usize,
    pad_code: u8,
    data: Vec<u8>,
}

impl PackedMatrix {
    pub fn role(&self) -> OperandRole {
        self.role
    }

    pub fn scheme(&self) -> PackScheme {
        self.scheme
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Logical (unpadded) column count.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pad_code(&self) -> u8 {
        self.pad_code
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn row_stride_bytes(&self) -> usize {
        let vpb = values_per_byte(self.bits).expect("validated at construction");
        self.cols.div_ceil(vpb)
    }

    pub fn row_bytes(&self, r: usize) -> &[u8] {
        let stride = self.row_stride_bytes();
        &self.data[r * stride..(r + 1) * stride]
    }

    /// Whether the stored bytes use the rotated weight layout.
    pub fn rotated_layout(&self) -> bool {
        self.role == OperandRole::Weight && self.scheme.rotated_weights()
    }

    /// Whether any padding positions exist.
    pub fn has_padding(&self) -> bool {
        let vpb = values_per_byte(self.bits).expect("validated at construction");
        !self.cols.is_multiple_of(vpb)
    }

    /// Decodes the logical code at (r, c), undoing any layout rotation.
    pub fn code_at(&self, r: usize, c: usize) -> u8 {
        let vpb = values_per_byte(self.bits).expect("validated at construction");
        let byte = self.row_bytes(r)[c / vpb];
        let byte = if self.rotated_layout() {
            byte.rotate_right(2)
        } else {
            byte
        };
        let lane = c % vpb;
        match self.bits {
            2 => (byte >> (2 * lane)) & 0x3,
            3 => byte & 0x7,
            4 => (byte >> (4 * lane)) & 0xF,
            _ => unreachable!(),
        }
    }

    /// Relabels the scheme within the same byte-layout family (A<->B,
    /// C<->D). The stored bytes are identical across each pair; the label
    /// selects the unpack strategy a kernel will use.
    pub fn with_kernel_scheme(mut self, scheme: PackScheme) -> Result<Self> {
        if self.role == OperandRole::Weight
            && scheme.rotated_weights() != self.scheme.rotated_weights()
        {
            return Err(Error::SchemeMismatch {
                kernel: scheme.letter(),
                packed: self.scheme.letter(),
            });
        }
        self.scheme = scheme;
        Ok(self)
    }

    /// Serializes as six little-endian u32 header fields (role, scheme,
    /// bits, rows, cols, pad_code) followed by the raw data bytes.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for field in [
            u32::from(self.role.id()),
            u32::from(self.scheme.id()),
            u32::from(self.bits),
            u32::try_from(self.rows).map_err(|_| Error::InvalidHeader("rows exceed u32".into()))?,
            u32::try_from(self.cols).map_err(|_| Error::InvalidHeader("cols exceed u32".into()))?,
            u32::from(self.pad_code),
        ] {
            w.write_all(&field.to_le_bytes())?;
        }
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header)?;
        let field = |i: usize| {
            u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().expect("4-byte slice"))
        };
        let role = OperandRole::from_id(
            u8::try_from(field(0)).map_err(|_| Error::InvalidHeader("role field".into()))?,
        )?;
        let scheme = PackScheme::from_id(
            u8::try_from(field(1)).map_err(|_| Error::InvalidHeader("scheme field".into()))?,
        )?;
        let bits = u8::try_from(field(2)).map_err(|_| Error::InvalidHeader("bits field".into()))?;
        let vpb = values_per_byte(bits)?;
        let rows = field(3) as usize;
        let cols = field(4) as usize;
        let pad_code =
            u8::try_from(field(5)).map_err(|_| Error::InvalidHeader("pad code field".into()))?;
        if u16::from(pad_code) >= (1u16 << bits) {
            return Err(Error::InvalidHeader(format!(
                "pad code {pad_code} outside {bits}-bit range"
            )));
        }
        let mut data = vec![0u8; rows * cols.div_ceil(vpb)];
        r.read_exact(&mut data)?;
        Ok(Self {
            role,
            scheme,
            bits,
            rows,
            cols,
            pad_code,
            data,
        })
    }
}

/// Packs a code tensor under a scheme. Weight matrices packed under C or D
/// get the rotated byte layout (2-bit only); activations are always stored
/// in the natural layout regardless of the scheme label.
///
/// Ragged column counts require a pad code; pass the zero-valued code of
/// the operand's value map so padded positions vanish from dot products.
pub fn pack(
    c: &CodeTensor,
    scheme: PackScheme,
    role: OperandRole,
    pad_code: Option<u8>,
) -> Result<PackedMatrix> {
    let bits = c.bits();
    let vpb = values_per_byte(bits)?;
    if role == OperandRole::Weight && scheme.rotated_weights() && bits != 2 {
        return Err(Error::UnsupportedScheme {
            scheme: scheme.letter(),
            bits,
            role: "weight",
        });
    }
    let pad = if c.cols().is_multiple_of(vpb) {
        pad_code.unwrap_or(0)
    } else {
        pad_code.ok_or(Error::PaddingRequired {
            cols: c.cols(),
            values_per_byte: vpb,
        })?
    };
    if u16::from(pad) >= (1u16 << bits) {
        return Err(Error::CodeOutOfRange {
            index: 0,
            code: i64::from(pad),
            bits,
        });
    }

    let stride = c.cols().div_ceil(vpb);
    let rotate = role == OperandRole::Weight && scheme.rotated_weights();
    let mut data = Vec::with_capacity(c.rows() * stride);
    for r in 0..c.rows() {
        for byte_idx in 0..stride {
            let mut byte = 0u8;
            for lane in 0..vpb {
                let col = byte_idx * vpb + lane;
                let code = if col < c.cols() { c.get(r, col) } else { pad };
                byte |= match bits {
                    2 => code << (2 * lane),
                    3 => code,
                    4 => code << (4 * lane),
                    _ => unreachable!(),
                };
            }
            data.push(if rotate { byte.rotate_left(2) } else { byte });
        }
    }
    Ok(PackedMatrix {
        role,
        scheme,
        bits,
        rows: c.rows(),
        cols: c.cols(),
        pad_code: pad,
        data,
    })
}

/// Exact inverse of [`pack`]; padding columns are dropped.
pub fn unpack(m: &PackedMatrix) -> Result<CodeTensor> {
    let mut codes = Vec::with_capacity(m.rows() * m.cols());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            codes.push(m.code_at(r, c));
        }
    }
    CodeTensor::new(m.rows(), m.cols(), m.bits(), codes)
}

/// Rotates a natural-layout packed weight matrix into the scheme C layout.
/// This is the offline reordering that removes the in-loop weight shift.
pub fn reorder_weights_offline(m: &PackedMatrix) -> Result<PackedMatrix> {
    if m.role != OperandRole::Weight {
        return Err(Error::WrongRole { expected: "weight" });
    }
    if m.bits != 2 {
        return Err(Error::UnsupportedScheme {
            scheme: PackScheme::C.letter(),
            bits: m.bits,
            role: "weight",
        });
    }
    if m.scheme.rotated_weights() {
        return Err(Error::SchemeMismatch {
            kernel: PackScheme::C.letter(),
            packed: m.scheme.letter(),
        });
    }
    Ok(PackedMatrix {
        role: m.role,
        scheme: PackScheme::C,
        bits: m.bits,
        rows: m.rows,
        cols: m.cols,
        pad_code: m.pad_code,
        data: m.data.iter().map(|b| b.rotate_left(2)).collect(),
    })
}

/// Packs a weight matrix (reduction rows x output columns) for the GEMM
/// kernels: transposed so each output column's codes are contiguous, then
/// packed under the scheme (rotated layout for C/D).
pub fn pack_gemm_weights(
    w: &CodeTensor,
    scheme: PackScheme,
    pad_code: Option<u8>,
) -> Result<PackedMatrix> {
    pack(&w.transpose(), scheme, OperandRole::Weight, pad_code)
}

/// Extracts the four 4-bit lookup indices `(w_j << 2) | a_j` from one
/// weight byte (in the scheme's layout) and one natural activation byte.
///
/// The schemes run genuinely different mask/shift sequences but always
/// produce identical indices; the mirrored AVX2 kernels run the same
/// sequences on 32 bytes at a time.
pub fn gather_indices_lut16(w_byte: u8, a_byte: u8, scheme: PackScheme) -> [u8; 4] {
    match scheme {
        // Natural layout, one index per pass. The weight field must be
        // shifted up to bits [2, 4) after masking.
        PackScheme::A => {
            let mut idx = [0u8; 4];
            for (j, slot) in idx.iter_mut().enumerate() {
                let w = ((w_byte >> (2 * j)) & 0x3) << 2;
                let a = (a_byte >> (2 * j)) & 0x3;
                *slot = w | a;
            }
            idx
        }
        // Natural layout, two indices per pass: wide 0x33 masks keep lanes
        // j and j+2 in one byte, low nibble and high nibble.
        PackScheme::B => {
            let mut idx = [0u8; 4];
            for pass in 0..2 {
                let wm = (w_byte >> (2 * pass)) & 0x33;
                let am = (a_byte >> (2 * pass)) & 0x33;
                let combined = (wm << 2) | am;
                idx[pass] = combined & 0xF;
                idx[pass + 2] = combined >> 4;
            }
            idx
        }
        // Rotated layout: the masked weight field is already at bits
        // [2, 4), so no weight shift for lanes 0..3 (lane 3 wraps).
        PackScheme::C => {
            let mut idx = [0u8; 4];
            for (j, slot) in idx.iter_mut().enumerate() {
                let w = if j < 3 {
                    (w_byte >> (2 * j)) & 0xC
                } else {
                    (w_byte << 2) & 0xC
                };
                let a = (a_byte >> (2 * j)) & 0x3;
                *slot = w | a;
            }
            idx
        }
        // Rotated layout and two indices per pass: a byte rotation aligns
        // both weight fields, then one OR combines with the activations.
        PackScheme::D => {
            let mut idx = [0u8; 4];
            for pass in 0..2 {
                let wrot = if pass == 0 {
                    w_byte
                } else {
                    w_byte.rotate_right(2)
                };
                let wm = wrot & 0xCC;
                let am = (a_byte >> (2 * pass)) & 0x33;
                let combined = wm | am;
                idx[pass] = combined & 0xF;
                idx[pass + 2] = combined >> 4;
            }
            idx
        }
    }
}

/// Concatenates a natural weight byte and a natural activation byte into a
/// 16-bit index for the 65,536-entry table.
pub fn gather_index_lut65k(w_byte: u8, a_byte: u8) -> u16 {
    (u16::from(w_byte) << 8) | u16::from(a_byte)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor2(rows: usize, cols: usize, codes: Vec<u8>) -> CodeTensor {
        CodeTensor::new(rows, cols, 2, codes).unwrap()
    }

    #[test]
    fn natural_byte_layout() {
        let c = tensor2(1, 4, vec![1, 2, 3, 0]);
        let m = pack(&c, PackScheme::A, OperandRole::Activation, None).unwrap();
        assert_eq!(m.data(), &[0x39]);
        let m = pack(&c, PackScheme::B, OperandRole::Weight, None).unwrap();
        assert_eq!(m.data(), &[0x39]);
    }

    #[test]
    fn zero_codes_pack_to_zero_under_every_scheme() {
        let c = tensor2(1, 4, vec![0; 4]);
        for scheme in PackScheme::ALL {
            for role in [OperandRole::Weight, OperandRole::Activation] {
                let m = pack(&c, scheme, role, None).unwrap();
                assert_eq!(m.data(), &[0x00], "scheme {scheme:?} role {role:?}");
            }
        }
    }

    #[test]
    fn scheme_c_weight_byte_is_rotated() {
        let c = tensor2(1, 4, vec![1, 2, 3, 0]);
        let m = pack(&c, PackScheme::C, OperandRole::Weight, None).unwrap();
        // oracle: 8-bit rotate-left of the natural byte
        assert_eq!(m.data(), &[0x39u8.rotate_left(2)]);
        assert_eq!(m.data(), &[0xE4]);
        // activations stay natural even under scheme C
        let a = pack(&c, PackScheme::C, OperandRole::Activation, None).unwrap();
        assert_eq!(a.data(), &[0x39]);
    }

    #[test]
    fn unpack_inverts_known_bytes() {
        let c = tensor2(1, 4, vec![1, 2, 3, 0]);
        for scheme in [PackScheme::A, PackScheme::C] {
            let m = pack(&c, scheme, OperandRole::Weight, None).unwrap();
            assert_eq!(unpack(&m).unwrap(), c, "scheme {scheme:?}");
        }
    }

    #[test]
    fn reorder_weights_matches_rotation_oracle() {
        for codes in [[0u8, 0, 0, 0], [3, 3, 3, 3], [1, 2, 3, 0]] {
            let c = tensor2(1, 4, codes.to_vec());
            let natural = pack(&c, PackScheme::A, OperandRole::Weight, None).unwrap();
            let reordered = reorder_weights_offline(&natural).unwrap();
            assert_eq!(reordered.scheme(), PackScheme::C);
            let expected: Vec<u8> = natural.data().iter().map(|b| b.rotate_left(2)).collect();
            assert_eq!(reordered.data(), expected.as_slice());
            assert_eq!(unpack(&reordered).unwrap(), c);
        }
        // 0x00 and 0xFF are fixed points of the rotation
        assert_eq!(0x00u8.rotate_left(2), 0x00);
        assert_eq!(0xFFu8.rotate_left(2), 0xFF);
    }

    #[test]
    fn reorder_rejects_activations_and_rotated_input() {
        let c = tensor2(1, 4, vec![1, 2, 3, 0]);
        let act = pack(&c, PackScheme::A, OperandRole::Activation, None).unwrap();
        assert!(matches!(
            reorder_weights_offline(&act),
            Err(Error::WrongRole { .. })
        ));
        let rotated = pack(&c, PackScheme::C, OperandRole::Weight, None).unwrap();
        assert!(reorder_weights_offline(&rotated).is_err());
    }

    #[test]
    fn gather_known_indices() {
        // w codes [0,0,0,0], a codes [3,3,3,3] -> indices [3,3,3,3]
        let a_byte = 0xFF;
        for scheme in PackScheme::ALL {
            assert_eq!(gather_indices_lut16(0x00, a_byte, scheme), [3, 3, 3, 3]);
        }
        // w codes [1,2,3,0], a codes [0,1,2,3] -> (w<<2)|a = [4,9,14,3]
        let w_nat = 0x39;
        let a = 0xE4; // codes [0,1,2,3]
        assert_eq!(gather_indices_lut16(w_nat, a, PackScheme::A), [4, 9, 14, 3]);
        assert_eq!(gather_indices_lut16(w_nat, a, PackScheme::B), [4, 9, 14, 3]);
        let w_rot = w_nat.rotate_left(2);
        assert_eq!(gather_indices_lut16(w_rot, a, PackScheme::C), [4, 9, 14, 3]);
        assert_eq!(gather_indices_lut16(w_rot, a, PackScheme::D), [4, 9, 14, 3]);
    }

    #[test]
    fn gather_agrees_across_schemes_exhaustively() {
        for w in 0..=255u8 {
            let w_rot = w.rotate_left(2);
            for a in 0..=255u8 {
                let expect: Vec<u8> = (0..4)
                    .map(|j| (((w >> (2 * j)) & 3) << 2) | ((a >> (2 * j)) & 3))
                    .collect();
                assert_eq!(gather_indices_lut16(w, a, PackScheme::A), expect[..]);
                assert_eq!(gather_indices_lut16(w, a, PackScheme::B), expect[..]);
                assert_eq!(gather_indices_lut16(w_rot, a, PackScheme::C), expect[..]);
                assert_eq!(gather_indices_lut16(w_rot, a, PackScheme::D), expect[..]);
            }
        }
    }

    #[test]
    fn lut65k_index_concatenates_bytes() {
        assert_eq!(gather_index_lut65k(0x00, 0x00), 0);
        assert_eq!(gather_index_lut65k(0x39, 0x1B), 0x391B);
        assert_eq!(gather_index_lut65k(0x39, 0x1B), 14619);
        assert_eq!(gather_index_lut65k(0xFF, 0xFF), 65535);
    }

    #[test]
    fn ragged_pack_requires_pad_code() {
        let c = tensor2(1, 6, vec![1, 2, 3, 0, 1, 2]);
        assert!(matches!(
            pack(&c, PackScheme::A, OperandRole::Activation, None),
            Err(Error::PaddingRequired { .. })
        ));
        let m = pack(&c, PackScheme::A, OperandRole::Activation, Some(2)).unwrap();
        assert_eq!(m.row_stride_bytes(), 2);
        assert!(m.has_padding());
        // padding lanes hold the pad code
        assert_eq!((m.data()[1] >> 4) & 3, 2);
        assert_eq!(m.data()[1] >> 6, 2);
        assert_eq!(unpack(&m).unwrap(), c);
    }

    #[test]
    fn four_bit_packing_is_nibble_aligned() {
        let c = CodeTensor::new(1, 4, 4, vec![0xA, 0x1, 0xF, 0x0]).unwrap();
        let m = pack(&c, PackScheme::A, OperandRole::Weight, None).unwrap();
        assert_eq!(m.data(), &[0x1A, 0x0F]);
        assert_eq!(unpack(&m).unwrap(), c);
        // rotated schemes are undefined for 4-bit weights
        assert!(matches!(
            pack(&c, PackScheme::C, OperandRole::Weight, None),
            Err(Error::UnsupportedScheme { .. })
        ));
    }

    #[test]
    fn three_bit_uses_loose_container() {
        let c = CodeTensor::new(1, 3, 3, vec![5, 7, 0]).unwrap();
        let m = pack(&c, PackScheme::A, OperandRole::Activation, None).unwrap();
        assert_eq!(m.data(), &[5, 7, 0]);
        assert_eq!(unpack(&m).unwrap(), c);
    }

    #[test]
    fn serialization_roundtrip_and_header_layout() {
        let c = tensor2(2, 6, vec![1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0]);
        let m = pack(&c, PackScheme::D, OperandRole::Weight, Some(0)).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        // six little-endian u32 fields then the raw bytes
        assert_eq!(buf.len(), 24 + m.data().len());
        assert_eq!(&buf[0..4], &[0, 0, 0, 0]); // role weight = 0
        assert_eq!(&buf[4..8], &[3, 0, 0, 0]); // scheme d = 3
        assert_eq!(&buf[8..12], &[2, 0, 0, 0]); // bits
        assert_eq!(&buf[12..16], &[2, 0, 0, 0]); // rows
        assert_eq!(&buf[16..20], &[6, 0, 0, 0]); // cols
        assert_eq!(&buf[20..24], &[0, 0, 0, 0]); // pad code
        let back = PackedMatrix::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn read_rejects_malformed_headers() {
        let mut buf = Vec::new();
        tensor_packed().write_to(&mut buf).unwrap();
        // corrupt the scheme id
        buf[4] = 9;
        assert!(PackedMatrix::read_from(&mut buf.as_slice()).is_err());
        // truncated data section
        let mut buf2 = Vec::new();
        tensor_packed().write_to(&mut buf2).unwrap();
        buf2.pop();
        assert!(PackedMatrix::read_from(&mut buf2.as_slice()).is_err());
    }

    fn tensor_packed() -> PackedMatrix {
        pack(
            &tensor2(1, 4, vec![1, 2, 3, 0]),
            PackScheme::A,
            OperandRole::Weight,
            None,
        )
        .unwrap()
    }

    proptest! {
        // pack/unpack is the identity for every scheme, role, bit width
        // and ragged column count.
        #[test]
        fn pack_unpack_roundtrip(
            rows in 1usize..6,
            cols in 1usize..20,
            bits in prop_oneof![Just(2u8), Just(3u8), Just(4u8)],
            scheme_id in 0u8..4,
            weight in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let scheme = PackScheme::from_id(scheme_id).unwrap();
            let role = if weight { OperandRole::Weight } else { OperandRole::Activation };
            // rotated layouts only exist for 2-bit weights
            prop_assume!(!(weight && scheme.rotated_weights() && bits != 2));
            let max = (1u16 << bits) as u64;
            let codes: Vec<u8> = (0..rows * cols)
                .map(|i| {
                    let h = seed
                        .wrapping_mul(0x9E3779B97F4A7C15)
                        .wrapping_add((i as u64).wrapping_mul(0x2545F4914F6CDD1D));
                    ((h >> 33) % max) as u8
                })
                .collect();
            let c = CodeTensor::new(rows, cols, bits, codes).unwrap();
            let m = pack(&c, scheme, role, Some(0)).unwrap();
            prop_assert_eq!(unpack(&m).unwrap(), c);
        }

        // Scheme C/D weight bytes are always the per-byte rotation of the
        // natural bytes, and index extraction decomposes correctly.
        #[test]
        fn rotation_and_index_decomposition(w in any::<u8>(), a in any::<u8>()) {
            let c = CodeTensor::new(1, 4, 2, vec![w & 3, (w >> 2) & 3, (w >> 4) & 3, w >> 6]).unwrap();
            let natural = pack(&c, PackScheme::B, OperandRole::Weight, None).unwrap();
            let rotated = pack(&c, PackScheme::D, OperandRole::Weight, None).unwrap();
            prop_assert_eq!(rotated.data()[0], natural.data()[0].rotate_left(2));

            for scheme in PackScheme::ALL {
                let wb = if scheme.rotated_weights() { rotated.data()[0] } else { natural.data()[0] };
                let idx = gather_indices_lut16(wb, a, scheme);
                for (j, &i) in idx.iter().enumerate() {
                    prop_assert_eq!(i >> 2, (w >> (2 * j)) & 3);
                    prop_assert_eq!(i & 3, (a >> (2 * j)) & 3);
                }
            }
        }
    }
}
