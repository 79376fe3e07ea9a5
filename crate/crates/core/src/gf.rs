//! Finite fields GF(p^n) with p^n <= 64, backed by full operation tables.
//!
//! Elements are encoded as integers `0..p^n`: the base-p digits of the code are
//! the polynomial coefficients, constant term first.

use crate::error::{Error, Result};

/// Largest field order the tables are built for.
pub const MAX_ORDER: usize = 64;

/// Fixed reduction polynomials (constant term first, monic), one per extension field.
const CONWAY: &[(u32, u32, &[u32])] = &[
    (2, 2, &[1, 1, 1]),
    (2, 3, &[1, 1, 0, 1]),
    (2, 4, &[1, 1, 0, 0, 1]),
    (2, 5, &[1, 0, 1, 0, 0, 1]),
    (2, 6, &[1, 1, 0, 1, 1, 0, 1]),
    (3, 2, &[2, 2, 1]),
    (3, 3, &[1, 2, 0, 1]),
    (5, 2, &[2, 4, 1]),
    (7, 2, &[3, 6, 1]),
];

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    (2..)
        .take_while(|k| k * k <= n)
        .all(|k| !n.is_multiple_of(k))
}

/// Splits `q` into `(p, n)` with `q = p^n`, if `q` is a prime power.
pub fn prime_power(q: usize) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let q = u32::try_from(q).ok()?;
    let p = (2..=q).find(|k| q % k == 0)?;
    let mut rest = q;
    let mut n = 0;
    while rest % p == 0 {
        rest /= p;
        n += 1;
    }
    (rest == 1).then_some((p, n))
}

fn poly_trim(mut a: Vec<u32>) -> Vec<u32> {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
    a
}

/// Remainder of `a` modulo monic `m` over Z_p.
fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r = a.to_vec();
    let dm = m.len() - 1;
    while r.len() > dm && r.len() > 1 {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        if lead != 0 {
            for (i, &c) in m.iter().enumerate() {
                r[shift + i] = (r[shift + i] + p - (lead * c) % p) % p;
            }
        }
        r.pop();
    }
    if r.is_empty() {
        r.push(0);
    }
    poly_trim(r)
}

/// Exhaustive irreducibility test: no monic factor of degree `1..=deg/2`.
pub fn is_irreducible(p: u32, poly: &[u32]) -> bool {
    let poly = poly_trim(poly.to_vec());
    let deg = poly.len() - 1;
    if deg == 0 || poly[deg] == 0 {
        return false;
    }
    for fd in 1..=deg / 2 {
        let count = (p as usize).pow(fd as u32);
        for code in 0..count {
            let mut f = vec![0u32; fd + 1];
            let mut c = code;
            for coef in f.iter_mut().take(fd) {
                *coef = (c % p as usize) as u32;
                c /= p as usize;
            }
            f[fd] = 1;
            if poly_rem(&poly, &f, p).iter().all(|&x| x == 0) {
                return false;
            }
        }
    }
    true
}

/// Arithmetic in GF(p^n).
#[derive(Clone, Debug)]
pub struct GaloisField {
    p: u32,
    n: u32,
    modulus: Vec<u32>,
    order: usize,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
    trace: Vec<u8>,
}

impl GaloisField {
    /// Field of order `q` using the built-in reduction polynomial.
    pub fn standard(q: usize) -> Result<Self> {
        if q > MAX_ORDER {
            return Err(Error::UnsupportedSize(format!(
                "GF({q}) exceeds the supported order {MAX_ORDER}"
            )));
        }
        let (p, n) = prime_power(q).ok_or(Error::UnsupportedDimension(q))?;
        let modulus = if n == 1 {
            vec![0, 1]
        } else {
            CONWAY
                .iter()
                .find(|(cp, cn, _)| *cp == p && *cn == n)
                .map(|(_, _, m)| m.to_vec())
                .ok_or_else(|| Error::UnsupportedSize(format!("no polynomial for GF({q})")))?
        };
        Self::new(p, n, modulus)
    }

    /// Field GF(p^n) reduced by `modulus` (constant term first, monic, degree n).
    pub fn new(p: u32, n: u32, modulus: Vec<u32>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!(
                "characteristic {p} is not prime"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput(
                "field degree must be at least 1".into(),
            ));
        }
        let order = (p as usize)
            .checked_pow(n)
            .filter(|&q| q <= MAX_ORDER)
            .ok_or_else(|| {
                Error::UnsupportedSize(format!("GF({p}^{n}) exceeds order {MAX_ORDER}"))
            })?;
        let modulus = poly_trim(modulus);
        if modulus.len() != n as usize + 1 || modulus[n as usize] != 1 {
            return Err(Error::InvalidInput(format!(
                "reduction polynomial must be monic of degree {n}"
            )));
        }
        if modulus.iter().any(|&c| c >= p) {
            return Err(Error::InvalidInput(
                "polynomial coefficient out of range".into(),
            ));
        }
        if !is_irreducible(p, &modulus) {
            return Err(Error::InvalidInput(format!(
                "polynomial {modulus:?} is reducible over GF({p})"
            )));
        }

        let mut field = GaloisField {
            p,
            n,
            modulus,
            order,
            add: vec![0; order * order],
            mul: vec![0; order * order],
            neg: vec![0; order],
            inv: vec![0; order],
            trace: vec![0; order],
        };
        for a in 0..order {
            let pa = field.to_poly(a);
            for b in 0..order {
                let pb = field.to_poly(b);
                let sum: Vec<u32> = pa.iter().zip(&pb).map(|(x, y)| (x + y) % p).collect();
                field.add[a * order + b] = field.encode_poly(&sum) as u8;
                let mut prod = vec![0u32; 2 * n as usize - 1];
                for (i, x) in pa.iter().enumerate() {
                    for (j, y) in pb.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + x * y) % p;
                    }
                }
                field.mul[a * order + b] =
                    field.encode_poly(&poly_rem(&prod, &field.modulus, p)) as u8;
            }
        }
        for a in 0..order {
            field.neg[a] = (0..order).find(|&b| field.add(a, b) == 0).unwrap() as u8;
            if a != 0 {
                field.inv[a] = (1..order)
                    .find(|&b| field.mul(a, b) == 1)
                    .ok_or_else(|| Error::InvalidInput("element without inverse".into()))?
                    as u8;
            }
            // tr(a) = a + a^p + ... + a^(p^(n-1))
            let mut acc = 0;
            let mut frob = a;
            for _ in 0..n {
                acc = field.add(acc, frob);
                frob = field.pow(frob, p as u64);
            }
            field.trace[a] = acc as u8;
        }
        Ok(field)
    }

    fn to_poly(&self, mut a: usize) -> Vec<u32> {
        let p = self.p as usize;
        (0..self.n)
            .map(|_| {
                let c = (a % p) as u32;
                a /= p;
                c
            })
            .collect()
    }

    fn encode_poly(&self, coeffs: &[u32]) -> usize {
        coeffs
            .iter()
            .take(self.n as usize)
            .rev()
            .fold(0usize, |acc, &c| acc * self.p as usize + c as usize)
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Reduction polynomial, constant term first.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        self.add[a * self.order + b] as usize
    }

    pub fn sub(&self, a: usize, b: usize) -> usize {
        self.add(a, self.neg(b))
    }

    pub fn neg(&self, a: usize) -> usize {
        self.neg[a] as usize
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.order + b] as usize
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: usize) -> Option<usize> {
        (a != 0).then(|| self.inv[a] as usize)
    }

    pub fn pow(&self, a: usize, mut e: u64) -> usize {
        let mut base = a;
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Absolute trace to the prime field, returned as an integer in `0..p`.
    pub fn trace(&self, a: usize) -> u32 {
        self.trace[a] as u32
    }

    /// Multiplicative order of a nonzero element.
    pub fn element_order(&self, a: usize) -> Option<usize> {
        if a == 0 {
            return None;
        }
        let mut x = a;
        let mut k = 1;
        while x != 1 {
            x = self.mul(x, a);
            k += 1;
        }
        Some(k)
    }
}
