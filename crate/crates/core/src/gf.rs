//! Arithmetic in the binary extension fields GF(2^p), 1 <= p <= 12.
//!
//! Elements are integers in `[0, q)` whose binary digits are the coefficients
//! of a polynomial over GF(2) of degree below `p`; bit `i` holds the
//! coefficient of `x^i`. Addition is XOR. Multiplication goes through
//! discrete log / antilog tables built once per field.
//!
//! Default moduli are the lexicographically smallest irreducible polynomial
//! of each degree (bit masks including the leading term):
//!
//! | p | modulus  | polynomial              |
//! |---|----------|-------------------------|
//! | 1 | `0x2`    | x                       |
//! | 2 | `0x7`    | x^2 + x + 1             |
//! | 3 | `0xb`    | x^3 + x + 1             |
//! | 4 | `0x13`   | x^4 + x + 1             |
//! | 5 | `0x25`   | x^5 + x^2 + 1           |
//! | 6 | `0x43`   | x^6 + x + 1             |
//! | 7 | `0x83`   | x^7 + x + 1             |
//! | 8 | `0x11b`  | x^8 + x^4 + x^3 + x + 1 |
//! | 9 | `0x203`  | x^9 + x + 1             |
//! | 10 | `0x409` | x^10 + x^3 + 1          |
//! | 11 | `0x805` | x^11 + x^2 + 1          |
//! | 12 | `0x1009` | x^12 + x^3 + 1         |
//!
//! Not every one of these is primitive (`0x11b` is the AES modulus, whose
//! multiplicative group is generated by `x + 1`), so the tables are built on
//! the smallest primitive element rather than on `x`.

use crate::error::{Error, Result};

pub const MAX_DEGREE: u32 = 12;

/// Smallest irreducible polynomial of degree `p`, indexed by `p`.
pub const DEFAULT_MODULI: [u32; 13] = [
    0, 0x2, 0x7, 0xb, 0x13, 0x25, 0x43, 0x83, 0x11b, 0x203, 0x409, 0x805, 0x1009,
];

/// Field element. Only the low `p` bits are ever set.
pub type Symbol = u16;

/// Shift-and-add multiplication modulo `poly`. Used to build tables and as a
/// reference in tests.
pub fn poly_mul_mod(a: u32, b: u32, poly: u32, p: u32) -> u32 {
    let top = 1u32 << p;
    let (mut a, mut b, mut acc) = (a, b, 0u32);
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= poly;
        }
    }
    acc
}

fn degree(a: u32) -> i32 {
    31 - a.leading_zeros() as i32
}

fn poly_rem(mut a: u32, b: u32) -> u32 {
    let db = degree(b);
    while a != 0 && degree(a) >= db {
        a ^= b << (degree(a) - db);
    }
    a
}

/// Exhaustive trial division by every polynomial of degree 1..=deg/2.
pub fn is_irreducible(poly: u32) -> bool {
    let d = degree(poly);
    if d < 1 {
        return false;
    }
    let max_divisor = 1u32 << (d / 2 + 1);
    (2..max_divisor).all(|g| poly_rem(poly, g) != 0)
}

#[derive(Clone, Debug)]
pub struct Field {
    p: u32,
    q: usize,
    poly: u32,
    generator: Symbol,
    // exp[i] = g^i for i in [0, q-1); exp[q-1] = exp[0] so the table has length q.
    exp: Vec<Symbol>,
    // log[0] is unused.
    log: Vec<u16>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.poly == other.poly
    }
}

impl Eq for Field {}

impl Field {
    /// Field with the default modulus for degree `p`.
    pub fn new(p: u32) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&p) {
            return Err(Error::DegreeOutOfRange(p));
        }
        Self::with_modulus(p, DEFAULT_MODULI[p as usize])
    }

    pub fn with_modulus(p: u32, poly: u32) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&p) {
            return Err(Error::DegreeOutOfRange(p));
        }
        if degree(poly) != p as i32 || !is_irreducible(poly) {
            return Err(Error::ReducibleModulus(poly));
        }
        let q = 1usize << p;
        let order = q - 1;

        // Smallest element whose powers cover the whole multiplicative group.
        let mut exp = vec![0 as Symbol; q];
        let mut log = vec![0u16; q];
        let generator = (1..q as u32)
            .find(|&g| {
                let mut seen = vec![false; q];
                let mut x = 1u32;
                for _ in 0..order {
                    if seen[x as usize] {
                        return false;
                    }
                    seen[x as usize] = true;
                    x = poly_mul_mod(x, g, poly, p);
                }
                x == 1
            })
            .expect("multiplicative group of a finite field is cyclic");

        let mut x = 1u32;
        for i in 0..order {
            exp[i] = x as Symbol;
            log[x as usize] = i as u16;
            x = poly_mul_mod(x, generator, poly, p);
        }
        exp[order] = exp[0];

        Ok(Field {
            p,
            q,
            poly,
            generator: generator as Symbol,
            exp,
            log,
        })
    }

    /// Bits per symbol.
    pub fn degree(&self) -> u32 {
        self.p
    }

    pub fn order(&self) -> usize {
        self.q
    }

    pub fn modulus(&self) -> u32 {
        self.poly
    }

    pub fn generator(&self) -> Symbol {
        self.generator
    }

    pub fn exp_table(&self) -> &[Symbol] {
        &self.exp
    }

    pub fn log_table(&self) -> &[u16] {
        &self.log
    }

    pub fn contains(&self, a: u32) -> bool {
        (a as usize) < self.q
    }

    pub fn check(&self, a: u32) -> Result<Symbol> {
        if self.contains(a) {
            Ok(a as Symbol)
        } else {
            Err(Error::ElementOutOfRange {
                value: a,
                order: self.q,
            })
        }
    }

    #[inline]
    pub fn add(&self, a: Symbol, b: Symbol) -> Symbol {
        a ^ b
    }

    /// Same as [`Field::add`]; characteristic two.
    #[inline]
    pub fn sub(&self, a: Symbol, b: Symbol) -> Symbol {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        if a == 0 || b == 0 {
            return 0;
        }
        let order = self.q - 1;
        let mut s = self.log[a as usize] as usize + self.log[b as usize] as usize;
        if s >= order {
            s -= order;
        }
        self.exp[s]
    }

    pub fn inv(&self, a: Symbol) -> Result<Symbol> {
        if a == 0 {
            return Err(Error::DivisionByZero(self.p));
        }
        let order = self.q - 1;
        let l = self.log[a as usize] as usize;
        Ok(self.exp[(order - l) % order])
    }

    pub fn div(&self, a: Symbol, b: Symbol) -> Result<Symbol> {
        let binv = self.inv(b)?;
        Ok(self.mul(a, binv))
    }

    /// `a^e` with `0^0 = 1`.
    pub fn pow(&self, a: Symbol, e: u64) -> Symbol {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let order = (self.q - 1) as u64;
        let l = self.log[a as usize] as u64;
        self.exp[((l * (e % order)) % order) as usize]
    }

    /// The permutation `alpha -> c * alpha` as a lookup table of length q.
    pub fn mul_row(&self, c: Symbol) -> Vec<Symbol> {
        (0..self.q as u32).map(|a| self.mul(c, a as Symbol)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_bounds() {
        assert!(matches!(Field::new(0), Err(Error::DegreeOutOfRange(0))));
        assert!(matches!(Field::new(13), Err(Error::DegreeOutOfRange(13))));
        for p in 1..=12 {
            let f = Field::new(p).unwrap();
            assert_eq!(f.order(), 1 << p);
        }
    }

    #[test]
    fn default_moduli_are_smallest_irreducible() {
        for p in 1..=12u32 {
            let smallest = ((1u32 << p)..(1u32 << (p + 1))).find(|&f| is_irreducible(f)).unwrap();
            assert_eq!(DEFAULT_MODULI[p as usize], smallest, "p = {p}");
        }
    }

    #[test]
    fn reducible_modulus_rejected() {
        // x^2 + 1 = (x + 1)^2
        assert!(matches!(
            Field::with_modulus(2, 0b101),
            Err(Error::ReducibleModulus(0b101))
        ));
        // wrong degree
        assert!(Field::with_modulus(3, 0b111).is_err());
    }

    #[test]
    fn gf2_is_xor_and() {
        let f = Field::new(1).unwrap();
        for a in 0..2u16 {
            for b in 0..2u16 {
                assert_eq!(f.add(a, b), a ^ b);
                assert_eq!(f.mul(a, b), a & b);
            }
        }
    }

    #[test]
    fn gf4_small_facts() {
        let f = Field::new(2).unwrap();
        assert_eq!(f.modulus(), 0b111);
        // x * (x + 1) = x^2 + x = 1 mod x^2 + x + 1
        assert_eq!(f.mul(2, 3), 1);
        assert_eq!(poly_mul_mod(2, 3, 0b111, 2), 1);
        let brute = (1..4u16).find(|&b| f.mul(2, b) == 1).unwrap();
        assert_eq!(f.inv(2).unwrap(), brute);
        assert_eq!(brute, 3);
    }

    #[test]
    fn table_round_trip_gf1024() {
        let f = Field::new(10).unwrap();
        assert_eq!(f.exp_table().len(), 1024);
        assert_eq!(f.log_table().len(), 1024);
        for a in 1..1024usize {
            assert_eq!(f.exp_table()[f.log_table()[a] as usize] as usize, a);
        }
    }

    #[test]
    fn aes_modulus_uses_non_trivial_generator() {
        let f = Field::new(8).unwrap();
        assert_eq!(f.modulus(), 0x11b);
        assert_eq!(f.generator(), 3);
        // AES test vector: {57} * {83} = {c1}
        assert_eq!(f.mul(0x57, 0x83), 0xc1);
    }

    #[test]
    fn division_by_zero() {
        let f = Field::new(4).unwrap();
        assert!(matches!(f.inv(0), Err(Error::DivisionByZero(4))));
        assert!(f.div(5, 0).is_err());
        assert_eq!(f.div(0, 5).unwrap(), 0);
    }

    #[test]
    fn pow_matches_repeated_mul() {
        let f = Field::new(5).unwrap();
        for a in 0..32u16 {
            let mut acc = 1u16;
            for e in 0..70u64 {
                assert_eq!(f.pow(a, e), acc, "a={a} e={e}");
                acc = f.mul(acc, a);
            }
        }
    }

    #[test]
    fn mul_row_is_permutation_for_nonzero() {
        let f = Field::new(6).unwrap();
        for c in 1..64u16 {
            let mut row = f.mul_row(c);
            row.sort_unstable();
            assert!(row.iter().enumerate().all(|(i, &v)| i == v as usize));
        }
        assert!(f.mul_row(0).iter().all(|&v| v == 0));
    }
}
