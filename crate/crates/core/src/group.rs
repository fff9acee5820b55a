//! Prime-order multiplicative group arithmetic and canonical serialization.
//!
//! All protocol values live in the order-`q` subgroup of `Z_p^*` for primes
//! `p`, `q` with `q | p - 1`, exponents in the field `Z_q`. Two named
//! configurations ship as constants:
//!
//! * `standard` - a 256-bit prime `q` subgroup of a 2048-bit prime modulus,
//! * `test-tiny` - `p = 23`, `q = 11`, `g = 2`, small enough for exhaustive
//!   oracles and hand-checked vectors.
//!
//! Serialization is fixed-width big-endian: scalars are `ceil(bits(q)/8)`
//! bytes, elements `ceil(bits(p)/8)` bytes. Decoding always validates range
//! and subgroup membership. Challenges are derived as
//! `SHA-256(len(tag) || tag || len(f_1) || f_1 || ...) mod q` with all length
//! prefixes 32-bit big-endian.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand_core::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// 2048-bit prime modulus of the `standard` group, `p = 2qc + 1`.
const STANDARD_P: &str = "abc7373377067f09ef82dad0e4fd90d778d661abbb037c9245185291a153a85f9c18d7150c45495cc3752aef71370cd0cb5f4a7f10f30c0d21e0ca0c235e60a8c6f71426954802881994be7a3a58e873ca67cdc5db40c9e9fa9b57dc6867cf85de5396289344114c85a7d7c5b9a592faf6f1082a2f6ae6579fe335b48b418896c8aca1a429ca7a99b0b2250a2bbf901af1790b28f31409df083baac7f2682580a33977ae0a454164ce6bbc51c6d4277abde0ed2b6462a00e4f91baa133fc2c9acc7635e2479556c67f7a2c306b9210f30fad79440cad6c0febc0695ad5a400c360e53c12444f5133c4ea5526f106d7e84dca7af84f6aa84c1adbceea9989f7df";
/// 256-bit prime order of the `standard` subgroup.
const STANDARD_Q: &str = "81d2041db3d8de28e7cdb43a216df66d0eb067e879d57791ec765af49221a60b";
/// Generator of the order-`q` subgroup, `g = 2^((p-1)/q) mod p`.
const STANDARD_G: &str = "334384f22ca30f4e0d7e7109dde73998152b66884366f8e19925e7a3085964f9fb36612d74ed895209c0a454cf6ffc30666ba587103c796eefb8f9f4f519f440c2007869006db7f68e036cb090555a77c5e494493cff7cb88758f27a6306425615ca0c519b12777e53d6c3506fcc6c05f2f24b0746143747d0665a0c4f2cd0aa6dd45251a96ba5b7abab4f8224e6cdc673724ba704d49caf6b02c3939d72ce8001c1b130c68ac4c36ea8f21ca20bec6b0991817eed94f12b1cd530dbee5f4492a67b88a130b61f75292b84ace9b0c87ec1d9459869f0cc1510a6ee79f74e175479eaa757ec1c44f89cdbf08a5c5d4b4fea461a37c0edd5f253b8f958e017ca2c";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("malformed encoding: {0}")]
    MalformedEncoding(String),
    #[error("element is not a member of the order-q subgroup")]
    NotInGroup,
    #[error("scalar out of range [0, q)")]
    ScalarOutOfRange,
    #[error("invalid group parameters: {0}")]
    InvalidParams(String),
}

/// An exponent in `Z_q`, always reduced to `[0, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scalar(BigUint);

/// A member of the order-`q` subgroup of `Z_p^*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupElement(BigUint);

impl Scalar {
    pub fn to_biguint(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Unpadded lowercase hex, for JSON transcripts.
    pub fn to_hex(&self) -> String {
        self.0.to_str_radix(16)
    }
}

impl GroupElement {
    pub fn to_biguint(&self) -> &BigUint {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_one()
    }

    pub fn to_hex(&self) -> String {
        self.0.to_str_radix(16)
    }
}

/// `a^-1 mod m` for `gcd(a, m) = 1` (always true here: m is prime and a is
/// a group member or nonzero scalar).
fn mod_inverse(a: &BigUint, m: &BigUint) -> BigUint {
    use num_bigint::BigInt;
    use num_integer::Integer;
    let ext = BigInt::from(a.clone()).extended_gcd(&BigInt::from(m.clone()));
    debug_assert!(ext.gcd.is_one());
    let m_signed = BigInt::from(m.clone());
    let x = ((ext.x % &m_signed) + &m_signed) % m_signed;
    x.to_biguint().expect("reduced to [0, m)")
}

fn hex_to_biguint(s: &str) -> Result<BigUint, GroupError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(GroupError::MalformedEncoding(format!(
            "bad hex string {s:?}"
        )));
    }
    BigUint::parse_bytes(s.as_bytes(), 16)
        .ok_or_else(|| GroupError::MalformedEncoding(format!("bad hex string {s:?}")))
}

// Serde carries values as unpadded hex. Deserialization is *unchecked*:
// anything arriving over the wire must be revalidated against a `Group`
// (see `Group::check_element` / `Group::check_scalar`) before use.
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        hex_to_biguint(&s)
            .map(Scalar)
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        hex_to_biguint(&s)
            .map(GroupElement)
            .map_err(serde::de::Error::custom)
    }
}

/// Group descriptor: modulus, subgroup order, generator, and the canonical
/// encoding widths derived from them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    name: String,
    p: BigUint,
    q: BigUint,
    g: BigUint,
    g_inv: BigUint,
    elem_width: usize,
    scalar_width: usize,
}

/// JSON form of a group parameter file: hex fields `p`, `q`, `g` plus
/// `name`. Also embedded in board transcript headers so an auditor can
/// reconstruct the exact group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDescriptor {
    pub name: String,
    pub p: String,
    pub q: String,
    pub g: String,
}

impl Group {
    fn from_parts(name: &str, p: BigUint, q: BigUint, g: BigUint) -> Result<Group, GroupError> {
        let group = Group {
            name: name.to_string(),
            elem_width: (p.bits() as usize).div_ceil(8),
            scalar_width: (q.bits() as usize).div_ceil(8),
            g_inv: BigUint::zero(),
            p,
            q,
            g,
        };
        group.validate()?;
        Ok(Group {
            g_inv: mod_inverse(&group.g, &group.p),
            ..group
        })
    }

    /// The hand-checkable configuration: p = 23, q = 11, g = 2.
    pub fn test_tiny() -> Group {
        Group::from_parts(
            "test-tiny",
            BigUint::from(23u32),
            BigUint::from(11u32),
            BigUint::from(2u32),
        )
        .expect("built-in parameters are valid")
    }

    /// The production-sized configuration: 256-bit q, 2048-bit p.
    pub fn standard() -> Group {
        Group::from_parts(
            "standard",
            BigUint::parse_bytes(STANDARD_P.as_bytes(), 16).expect("const"),
            BigUint::parse_bytes(STANDARD_Q.as_bytes(), 16).expect("const"),
            BigUint::parse_bytes(STANDARD_G.as_bytes(), 16).expect("const"),
        )
        .expect("built-in parameters are valid")
    }

    /// Looks up one of the named built-in configurations.
    pub fn by_name(name: &str) -> Option<Group> {
        match name {
            "test-tiny" => Some(Group::test_tiny()),
            "standard" => Some(Group::standard()),
            _ => None,
        }
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        GroupDescriptor {
            name: self.name.clone(),
            p: self.p.to_str_radix(16),
            q: self.q.to_str_radix(16),
            g: self.g.to_str_radix(16),
        }
    }

    pub fn from_descriptor(d: &GroupDescriptor) -> Result<Group, GroupError> {
        Group::from_parts(
            &d.name,
            hex_to_biguint(&d.p)?,
            hex_to_biguint(&d.q)?,
            hex_to_biguint(&d.g)?,
        )
    }

    pub fn from_json(s: &str) -> Result<Group, GroupError> {
        let d: GroupDescriptor = serde_json::from_str(s)
            .map_err(|e| GroupError::MalformedEncoding(format!("group json: {e}")))?;
        Group::from_descriptor(&d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.descriptor()).expect("group json serializes")
    }

    /// Structural checks: q divides p-1, g generates an order-q subgroup.
    /// Primality of the built-in p and q is asserted by the test suite, not
    /// re-proved on every load.
    fn validate(&self) -> Result<(), GroupError> {
        let one = BigUint::one();
        if self.p <= BigUint::from(3u32) || self.q < BigUint::from(2u32) || self.q >= self.p {
            return Err(GroupError::InvalidParams("p/q sizes".into()));
        }
        if (&self.p - &one) % &self.q != BigUint::zero() {
            return Err(GroupError::InvalidParams("q does not divide p-1".into()));
        }
        if self.g <= one || self.g >= self.p {
            return Err(GroupError::InvalidParams("g out of range".into()));
        }
        if self.g.modpow(&self.q, &self.p) != one {
            return Err(GroupError::InvalidParams("g^q != 1".into()));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn element_width(&self) -> usize {
        self.elem_width
    }

    pub fn scalar_width(&self) -> usize {
        self.scalar_width
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    pub fn generator(&self) -> GroupElement {
        GroupElement(self.g.clone())
    }

    /// `g^-1`, cached at construction.
    pub fn generator_inv(&self) -> GroupElement {
        GroupElement(self.g_inv.clone())
    }

    /// `a / g` via the cached generator inverse; one modular multiplication
    /// instead of a gcd inversion. The verifier equations divide by `g`
    /// constantly.
    pub fn div_by_g(&self, a: &GroupElement) -> GroupElement {
        GroupElement(&a.0 * &self.g_inv % &self.p)
    }

    // ----- sampling -----

    /// Uniform scalar in `[0, q)`. Draws 16 bytes beyond the scalar width so
    /// the mod-q reduction bias is below 2^-128.
    pub fn random_scalar(&self, rng: &mut dyn RngCore) -> Scalar {
        let mut buf = vec![0u8; self.scalar_width + 16];
        rng.fill_bytes(&mut buf);
        Scalar(BigUint::from_bytes_be(&buf) % &self.q)
    }

    /// Uniform scalar in `Z_q^*`: rejection-resamples zero.
    pub fn random_nonzero_scalar(&self, rng: &mut dyn RngCore) -> Scalar {
        loop {
            let s = self.random_scalar(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    // ----- group operations -----

    pub fn exp(&self, base: &GroupElement, k: &Scalar) -> GroupElement {
        GroupElement(base.0.modpow(&k.0, &self.p))
    }

    /// `g^k` for the group generator.
    pub fn g_pow(&self, k: &Scalar) -> GroupElement {
        GroupElement(self.g.modpow(&k.0, &self.p))
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement(&a.0 * &b.0 % &self.p)
    }

    pub fn div(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        self.mul(a, &self.inv(b))
    }

    /// Multiplicative inverse via extended GCD; orders of magnitude cheaper
    /// than a Fermat exponentiation at 2048 bits.
    pub fn inv(&self, a: &GroupElement) -> GroupElement {
        GroupElement(mod_inverse(&a.0, &self.p))
    }

    pub fn is_member(&self, value: &BigUint) -> bool {
        !value.is_zero() && *value < self.p && value.modpow(&self.q, &self.p).is_one()
    }

    /// Revalidates a deserialized element (subgroup membership).
    pub fn check_element(&self, e: &GroupElement) -> Result<(), GroupError> {
        if self.is_member(&e.0) {
            Ok(())
        } else {
            Err(GroupError::NotInGroup)
        }
    }

    /// Revalidates a deserialized scalar (range).
    pub fn check_scalar(&self, s: &Scalar) -> Result<(), GroupError> {
        if s.0 < self.q {
            Ok(())
        } else {
            Err(GroupError::ScalarOutOfRange)
        }
    }

    // ----- scalar field arithmetic -----

    pub fn scalar_from_u64(&self, v: u64) -> Scalar {
        Scalar(BigUint::from(v) % &self.q)
    }

    pub fn scalar_zero(&self) -> Scalar {
        Scalar(BigUint::zero())
    }

    pub fn scalar_one(&self) -> Scalar {
        Scalar(BigUint::one() % &self.q)
    }

    pub fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn scalar_sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &self.q - &b.0) % &self.q)
    }

    pub fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar(&a.0 * &b.0 % &self.q)
    }

    pub fn scalar_neg(&self, a: &Scalar) -> Scalar {
        Scalar((&self.q - &a.0) % &self.q)
    }

    /// Multiplicative inverse in `Z_q`; `None` for zero.
    pub fn scalar_inv(&self, a: &Scalar) -> Option<Scalar> {
        if a.0.is_zero() {
            return None;
        }
        Some(Scalar(mod_inverse(&a.0, &self.q)))
    }

    // ----- canonical serialization -----

    fn to_fixed_be(value: &BigUint, width: usize) -> Vec<u8> {
        let raw = value.to_bytes_be();
        let mut out = vec![0u8; width];
        out[width - raw.len()..].copy_from_slice(&raw);
        out
    }

    /// Fixed-width big-endian encoding, `element_width` bytes.
    pub fn encode_element(&self, e: &GroupElement) -> Vec<u8> {
        Self::to_fixed_be(&e.0, self.elem_width)
    }

    /// Fixed-width big-endian encoding, `scalar_width` bytes.
    pub fn encode_scalar(&self, s: &Scalar) -> Vec<u8> {
        Self::to_fixed_be(&s.0, self.scalar_width)
    }

    pub fn decode_element(&self, bytes: &[u8]) -> Result<GroupElement, GroupError> {
        if bytes.len() != self.elem_width {
            return Err(GroupError::MalformedEncoding(format!(
                "element must be {} bytes, got {}",
                self.elem_width,
                bytes.len()
            )));
        }
        let v = BigUint::from_bytes_be(bytes);
        if !self.is_member(&v) {
            return Err(GroupError::NotInGroup);
        }
        Ok(GroupElement(v))
    }

    pub fn decode_scalar(&self, bytes: &[u8]) -> Result<Scalar, GroupError> {
        if bytes.len() != self.scalar_width {
            return Err(GroupError::MalformedEncoding(format!(
                "scalar must be {} bytes, got {}",
                self.scalar_width,
                bytes.len()
            )));
        }
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.q {
            return Err(GroupError::ScalarOutOfRange);
        }
        Ok(Scalar(v))
    }

    /// Builds an element directly from an integer, checking membership.
    /// Intended for tests and parameter loading.
    pub fn element_from_biguint(&self, v: BigUint) -> Result<GroupElement, GroupError> {
        if !self.is_member(&v) {
            return Err(GroupError::NotInGroup);
        }
        Ok(GroupElement(v))
    }

    pub fn scalar_from_biguint(&self, v: BigUint) -> Result<Scalar, GroupError> {
        if v >= self.q {
            return Err(GroupError::ScalarOutOfRange);
        }
        Ok(Scalar(v))
    }

    // ----- Fiat-Shamir challenge derivation -----

    /// `SHA-256(len(tag) || tag || len(f) || f || ...) mod q`, lengths as
    /// 32-bit big-endian prefixes. Length prefixing keeps distinct field
    /// sequences from colliding by concatenation.
    pub fn hash_to_challenge(&self, domain_tag: &str, fields: &[&[u8]]) -> Scalar {
        let mut h = Sha256::new();
        h.update((domain_tag.len() as u32).to_be_bytes());
        h.update(domain_tag.as_bytes());
        for f in fields {
            h.update((f.len() as u32).to_be_bytes());
            h.update(f);
        }
        Scalar(BigUint::from_bytes_be(&h.finalize()) % &self.q)
    }
}
