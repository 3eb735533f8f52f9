//! Exact arithmetic in R = W(F_{p^f}), the unramified extension of Z_p of
//! degree f, truncated at precision p^k.
//!
//! Elements are polynomials in a fixed monic modulus basis with coefficients
//! in Z/p^k. Since the extension is unramified the maximal ideal is pR, so
//! valuations are plain coefficient-wise p-adic orders. Every operation is
//! exact in R/p^k; nothing ever rounds.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Hard cap on the inertia degree; coefficients live in fixed-size arrays so
/// the search kernels never allocate.
pub const MAX_F: usize = 4;

pub(crate) type Coeffs = [u64; MAX_F];

#[derive(Debug)]
pub struct RingData {
    p: u64,
    f: usize,
    k: u32,
    /// p^k
    pk: u64,
    /// Monic modulus, little-endian, degree f (coefficient of x^f is 1).
    modulus: [u64; MAX_F + 1],
    rho: Coeffs,
    delta: Coeffs,
    /// Scratch rings (residue fields, precision lifts) skip the rho scan.
    has_rho: bool,
}

/// An arithmetic domain R/p^k. Cheap to clone; elements keep a handle to
/// their owner and cross-ring operations panic.
#[derive(Clone, Debug)]
pub struct Ring(Arc<RingData>);

/// An element of R at working precision, coefficients reduced mod p^k.
#[derive(Clone, Debug)]
pub struct Elt {
    ring: Ring,
    c: Coeffs,
}

#[inline]
fn addm(a: u64, b: u64, m: u64) -> u64 {
    let s = a + b;
    if s >= m {
        s - m
    } else {
        s
    }
}

#[inline]
fn subm(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + m - b
    }
}

#[inline]
fn mulm(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

fn checked_pow(p: u64, k: u32) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..k {
        acc = acc.checked_mul(p)?;
        if acc > (1 << 62) {
            return None;
        }
    }
    Some(acc)
}

// ---------------------------------------------------------------------------
// F_p[x] helpers used for modulus selection and residue-field arithmetic.
// Polynomials are little-endian coefficient vectors over Z/p.

fn fp_trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn fp_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r: Vec<u64> = a.to_vec();
    fp_trim(&mut r);
    let dm = m.len() - 1;
    let lead_inv = mod_inv_prime(m[dm], p);
    while r.len() > dm {
        let dr = r.len() - 1;
        let c = mulm(r[dr], lead_inv, p);
        for i in 0..=dm {
            let idx = dr - dm + i;
            r[idx] = subm(r[idx], mulm(c, m[i], p), p);
        }
        fp_trim(&mut r);
        if r.is_empty() {
            break;
        }
    }
    r
}

fn fp_mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut prod = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = addm(prod[i + j], mulm(ai, bj, p), p);
        }
    }
    fp_rem(&prod, m, p)
}

fn fp_powmod(a: &[u64], mut e: u128, m: &[u64], p: u64) -> Vec<u64> {
    let mut base = fp_rem(a, m, p);
    let mut acc = vec![1u64];
    while e > 0 {
        if e & 1 == 1 {
            acc = fp_mulmod(&acc, &base, m, p);
        }
        base = fp_mulmod(&base, &base, m, p);
        e >>= 1;
    }
    acc
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    fp_trim(&mut x);
    fp_trim(&mut y);
    while !y.is_empty() {
        let r = fp_rem(&x, &scale_monic(&y, p), p);
        x = y;
        y = r;
        // scale_monic keeps the divisor monic; remainder degrees strictly drop
    }
    x
}

fn scale_monic(a: &[u64], p: u64) -> Vec<u64> {
    let mut v = a.to_vec();
    fp_trim(&mut v);
    let inv = mod_inv_prime(*v.last().unwrap(), p);
    for c in v.iter_mut() {
        *c = mulm(*c, inv, p);
    }
    v
}

fn mod_inv_prime(a: u64, p: u64) -> u64 {
    // Fermat; p is prime and a nonzero mod p.
    let mut e = p - 2;
    let mut base = a % p;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulm(acc, base, p);
        }
        base = mulm(base, base, p);
        e >>= 1;
    }
    acc
}

/// Irreducibility over F_p via the derandomized Rabin test: m of degree f is
/// irreducible iff x^{p^f} = x mod m and gcd(x^{p^{f/l}} - x, m) = 1 for each
/// prime l dividing f.
fn fp_irreducible(m: &[u64], p: u64) -> bool {
    let f = m.len() - 1;
    let x = vec![0u64, 1];
    let q = (p as u128).pow(f as u32);
    let xq = fp_powmod(&x, q, m, p);
    // x^{p^f} - x must vanish mod m
    let mut diff = xq.clone();
    while diff.len() < 2 {
        diff.push(0);
    }
    diff[1] = subm(diff[1], 1, p);
    let diff = fp_rem(&diff, m, p);
    if !diff.is_empty() {
        return false;
    }
    let mut rem = f;
    let mut primes = vec![];
    let mut d = 2;
    while d * d <= rem {
        if rem % d == 0 {
            primes.push(d);
            while rem % d == 0 {
                rem /= d;
            }
        }
        d += 1;
    }
    if rem > 1 {
        primes.push(rem);
    }
    for l in primes {
        let e = (p as u128).pow((f / l) as u32);
        let mut g = fp_powmod(&x, e, m, p);
        while g.len() < 2 {
            g.push(0);
        }
        g[1] = subm(g[1], 1, p);
        let g = fp_rem(&g, m, p);
        if g.is_empty() {
            return false;
        }
        let gcd = fp_gcd(m, &g, p);
        if gcd.len() > 1 {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------

impl Ring {
    /// Construct R = W(F_{p^f}) at precision p^k with the deterministic
    /// modulus (lexicographically smallest monic irreducible mod p, lifted
    /// verbatim) and the deterministic nonsquare unit delta = 1 - 4 rho.
    pub fn new(p: u64, f: usize, k: u32) -> Result<Ring> {
        let modulus = smallest_irreducible(p, f)?;
        Ring::with_modulus(p, f, k, &modulus)
    }

    /// Construct with an explicit monic modulus (little-endian, f+1
    /// coefficients); it must be irreducible mod p.
    pub fn with_modulus(p: u64, f: usize, k: u32, modulus: &[u64]) -> Result<Ring> {
        let mut ring = Ring::raw(p, f, k, modulus)?;
        if p == 2 && k < 5 {
            // ord(4) + 3: the smallest precision at which squareness of
            // units, and hence the nonsquare certificate for delta, is
            // decidable.
            return Err(Error::PrecisionTooSmall {
                required: 5,
                actual: k,
            });
        }
        let (rho, delta) = find_rho(&ring)?;
        let (rho_c, delta_c) = (rho.c, delta.c);
        drop((rho, delta));
        let data = Arc::get_mut(&mut ring.0).expect("fresh ring is unshared");
        data.rho = rho_c;
        data.delta = delta_c;
        data.has_rho = true;
        Ok(ring)
    }

    /// Internal constructor without the rho scan; used for residue fields
    /// and precision headroom inside certified lifts.
    pub(crate) fn raw(p: u64, f: usize, k: u32, modulus: &[u64]) -> Result<Ring> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if f == 0 || f > MAX_F {
            return Err(Error::UnsupportedDegree(f));
        }
        if k == 0 {
            return Err(Error::PrecisionTooSmall {
                required: 1,
                actual: 0,
            });
        }
        let pk = checked_pow(p, k).ok_or(Error::PrecisionCapacity)?;
        if modulus.len() != f + 1 || modulus[f] % p != 1 && modulus[f] != 1 {
            return Err(Error::InvalidInput(
                "modulus must be monic of degree f".into(),
            ));
        }
        let mod_p: Vec<u64> = modulus.iter().map(|c| c % p).collect();
        if !fp_irreducible(&mod_p, p) {
            return Err(Error::InvalidInput("modulus reducible mod p".into()));
        }
        let mut m = [0u64; MAX_F + 1];
        for (i, &c) in modulus.iter().enumerate() {
            m[i] = c % pk;
        }
        m[f] = 1;
        Ok(Ring(Arc::new(RingData {
            p,
            f,
            k,
            pk,
            modulus: m,
            rho: [0; MAX_F],
            delta: [0; MAX_F],
            has_rho: false,
        })))
    }

    pub fn p(&self) -> u64 {
        self.0.p
    }
    pub fn inertia_degree(&self) -> usize {
        self.0.f
    }
    pub fn precision(&self) -> u32 {
        self.0.k
    }
    pub(crate) fn pk(&self) -> u64 {
        self.0.pk
    }
    pub fn modulus(&self) -> &[u64] {
        &self.0.modulus[..=self.0.f]
    }
    /// Residue field size q = p^f.
    pub fn q(&self) -> u64 {
        self.0.p.pow(self.0.f as u32)
    }
    /// ord of 2 in R: 1 if p = 2, else 0.
    pub fn ord2(&self) -> u32 {
        if self.0.p == 2 {
            1
        } else {
            0
        }
    }
    pub fn is_dyadic(&self) -> bool {
        self.0.p == 2
    }

    /// The fixed unit rho with delta = 1 - 4 rho a nonsquare unit.
    pub fn rho(&self) -> Elt {
        debug_assert!(self.0.has_rho);
        Elt {
            ring: self.clone(),
            c: self.0.rho,
        }
    }
    pub fn delta(&self) -> Elt {
        debug_assert!(self.0.has_rho);
        Elt {
            ring: self.clone(),
            c: self.0.delta,
        }
    }

    pub fn zero(&self) -> Elt {
        Elt {
            ring: self.clone(),
            c: [0; MAX_F],
        }
    }
    pub fn one(&self) -> Elt {
        self.from_int(1)
    }

    /// Canonical embedding of a rational integer.
    pub fn from_int(&self, n: i64) -> Elt {
        let pk = self.0.pk as i128;
        let mut r = (n as i128) % pk;
        if r < 0 {
            r += pk;
        }
        let mut c = [0u64; MAX_F];
        c[0] = r as u64;
        Elt {
            ring: self.clone(),
            c,
        }
    }

    /// Element from little-endian coefficients in the modulus basis.
    pub fn from_coeffs(&self, coeffs: &[u64]) -> Result<Elt> {
        if coeffs.len() > self.0.f {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for inertia degree {}",
                coeffs.len(),
                self.0.f
            )));
        }
        let mut c = [0u64; MAX_F];
        for (i, &v) in coeffs.iter().enumerate() {
            c[i] = v % self.0.pk;
        }
        Ok(Elt {
            ring: self.clone(),
            c,
        })
    }

    pub(crate) fn elt(&self, c: Coeffs) -> Elt {
        Elt {
            ring: self.clone(),
            c,
        }
    }

    /// p^e as an element (e < k).
    pub fn pi_pow(&self, e: u32) -> Elt {
        if e >= self.0.k {
            return self.zero();
        }
        self.from_int(self.0.p.pow(e) as i64)
    }

    /// Deterministic enumeration of the q^m residues of R / p^m R, m <= k:
    /// index j maps to the base-p^m digit tuple of j, lifted verbatim.
    pub fn residues(&self, m: u32) -> impl Iterator<Item = Elt> + '_ {
        let b = self.0.p.pow(m.min(self.0.k));
        let f = self.0.f;
        let total = (b as u128).pow(f as u32);
        (0..total).map(move |j| {
            let mut c = [0u64; MAX_F];
            let mut t = j;
            for slot in c.iter_mut().take(f) {
                *slot = (t % b as u128) as u64;
                t /= b as u128;
            }
            self.elt(c)
        })
    }

    /// Same ring at precision k + extra; errors when p^{k+extra} would
    /// overflow the coefficient capacity.
    pub(crate) fn lift_precision(&self, extra: u32) -> Result<Ring> {
        Ring::raw(self.0.p, self.0.f, self.0.k + extra, self.modulus())
    }

    /// Same ring truncated to precision m (1 <= m <= k).
    pub(crate) fn truncate(&self, m: u32) -> Result<Ring> {
        Ring::raw(self.0.p, self.0.f, m, self.modulus())
    }

    /// The residue field F_q presented as the precision-1 ring.
    pub(crate) fn residue_field(&self) -> Ring {
        Ring::raw(self.0.p, self.0.f, 1, self.modulus()).expect("residue field")
    }

    /// Map an element of a compatible ring (same p, f, modulus lift) into
    /// this ring by reducing or lifting coefficients verbatim.
    pub(crate) fn transport(&self, x: &Elt) -> Elt {
        let mut c = [0u64; MAX_F];
        for i in 0..self.0.f {
            c[i] = x.c[i] % self.0.pk;
        }
        self.elt(c)
    }

    /// A complete, duplicate-free, deterministic set of representatives of
    /// the unit square classes R^x / (R^x)^2: {1, delta} for p odd, the
    /// 2^{f+1} classes scanned mod 8R for p = 2.
    pub fn unit_square_class_reps(&self) -> Vec<Elt> {
        if self.0.p != 2 {
            return vec![self.one(), self.delta()];
        }
        let expected = 1usize << (self.0.f + 1);
        let mut reps: Vec<Elt> = Vec::with_capacity(expected);
        for cand in self.residues(3) {
            if !cand.is_unit() {
                continue;
            }
            let mut fresh = true;
            for r in &reps {
                let ratio = (&cand * &r.inv().expect("unit rep")).expect("same ring");
                if ratio.is_square().expect("unit ratio") {
                    fresh = false;
                    break;
                }
            }
            if fresh {
                reps.push(cand);
                if reps.len() == expected {
                    break;
                }
            }
        }
        reps
    }

    /// Parse `p,f,k[,m0,...,mf]`.
    pub fn parse(s: &str) -> Result<Ring> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() < 3 {
            return Err(Error::Parse(format!("ring spec `{s}` needs p,f,k")));
        }
        let num = |t: &str| -> Result<u64> {
            t.parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad number `{t}` in ring spec")))
        };
        let p = num(parts[0])?;
        let f = num(parts[1])? as usize;
        let k = num(parts[2])? as u32;
        if parts.len() == 3 {
            Ring::new(p, f, k)
        } else {
            let coeffs: Vec<u64> = parts[3..]
                .iter()
                .map(|t| num(t))
                .collect::<Result<Vec<_>>>()?;
            Ring::with_modulus(p, f, k, &coeffs)
        }
    }

    /// Parse one element: f decimal coefficients joined by `,` (loose form:
    /// a single signed integer embeds canonically).
    pub fn parse_elt(&self, s: &str) -> Result<Elt> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() == 1 {
            let v = parts[0]
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("bad element `{s}`")))?;
            return Ok(self.from_int(v));
        }
        if parts.len() != self.0.f {
            return Err(Error::Parse(format!(
                "element `{s}` has {} coefficients, ring has f = {}",
                parts.len(),
                self.0.f
            )));
        }
        let coeffs: Vec<u64> = parts
            .iter()
            .map(|t| {
                t.parse::<u64>()
                    .map_err(|_| Error::Parse(format!("bad coefficient `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.from_coeffs(&coeffs)
    }
}

impl PartialEq for Ring {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.p == other.0.p
                && self.0.f == other.0.f
                && self.0.k == other.0.k
                && self.0.modulus == other.0.modulus)
    }
}
impl Eq for Ring {}

impl fmt::Display for Ring {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(w, "{},{},{}", self.0.p, self.0.f, self.0.k)?;
        if self.0.f > 1 {
            for i in 0..=self.0.f {
                write!(w, ",{}", self.0.modulus[i])?;
            }
        }
        Ok(())
    }
}

fn smallest_irreducible(p: u64, f: usize) -> Result<Vec<u64>> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if f == 0 || f > MAX_F {
        return Err(Error::UnsupportedDegree(f));
    }
    // Scan constant-to-top digit tuples in ascending integer order.
    let total = (p as u128).pow(f as u32);
    for j in 0..total {
        let mut m = vec![0u64; f + 1];
        let mut t = j;
        for c in m.iter_mut().take(f) {
            *c = (t % p as u128) as u64;
            t /= p as u128;
        }
        m[f] = 1;
        if fp_irreducible(&m, p) {
            return Ok(m);
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// Deterministic choice of the pair (rho, delta = 1 - 4 rho):
/// Z_2 takes rho = 1; other dyadic rings scan rho over residues mod 8R;
/// nondyadic rings scan delta over residue-field lifts and divide by 4.
fn find_rho(ring: &Ring) -> Result<(Elt, Elt)> {
    let one = ring.one();
    let four = ring.from_int(4);
    if ring.p() == 2 {
        if ring.inertia_degree() == 1 {
            let rho = one.clone();
            let delta = (&one - &(&four * &rho).unwrap()).unwrap();
            return Ok((rho, delta));
        }
        for rho in ring.residues(3) {
            if !rho.is_unit() {
                continue;
            }
            let delta = (&one - &(&four * &rho).unwrap()).unwrap();
            if !delta.is_square()? {
                return Ok((rho, delta));
            }
        }
        unreachable!("dyadic rings always have a nonsquare 1 - 4 rho");
    }
    for delta in ring.residues(1) {
        if !delta.is_unit() {
            continue;
        }
        if !delta.is_square()? {
            let rho = (&(&one - &delta).unwrap() / &four).unwrap();
            return Ok((rho, delta));
        }
    }
    unreachable!("F_q has nonsquare units for p odd")
}

// ---------------------------------------------------------------------------
// Element arithmetic

impl Elt {
    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.c[..self.ring.0.f]
    }

    pub(crate) fn raw_coeffs(&self) -> Coeffs {
        self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&c| c == 0)
    }

    /// Unit test: the residue mod pR is nonzero.
    pub fn is_unit(&self) -> bool {
        let p = self.ring.0.p;
        self.c[..self.ring.0.f].iter().any(|&c| c % p != 0)
    }

    fn assert_same_ring(&self, other: &Elt) {
        assert!(
            self.ring == other.ring,
            "elements of different rings may not be combined"
        );
    }

    /// p-adic order, capped at k; the zero element reports k (read: >= k).
    pub fn valuation(&self) -> u32 {
        let data = &*self.ring.0;
        let mut best = data.k;
        for &c in &self.c[..data.f] {
            if c == 0 {
                continue;
            }
            let mut v = 0u32;
            let mut t = c;
            while t % data.p == 0 {
                t /= data.p;
                v += 1;
            }
            best = best.min(v);
        }
        best
    }

    /// Write self = p^v u and return (v, u); u is well defined only mod
    /// p^{k-v}, which the caller must account for. Errors on zero.
    pub fn unit_part(&self) -> Result<(u32, Elt)> {
        let v = self.valuation();
        if v >= self.ring.0.k {
            return Err(Error::NotAUnit);
        }
        let div = self.ring.0.p.pow(v);
        let mut c = [0u64; MAX_F];
        for i in 0..self.ring.0.f {
            c[i] = self.c[i] / div;
        }
        Ok((v, self.ring.elt(c)))
    }

    pub fn neg(&self) -> Elt {
        let pk = self.ring.0.pk;
        let mut c = [0u64; MAX_F];
        for i in 0..self.ring.0.f {
            c[i] = if self.c[i] == 0 { 0 } else { pk - self.c[i] };
        }
        self.ring.elt(c)
    }

    fn add_impl(&self, other: &Elt) -> Elt {
        self.assert_same_ring(other);
        let pk = self.ring.0.pk;
        let mut c = [0u64; MAX_F];
        for i in 0..self.ring.0.f {
            c[i] = addm(self.c[i], other.c[i], pk);
        }
        self.ring.elt(c)
    }

    fn sub_impl(&self, other: &Elt) -> Elt {
        self.assert_same_ring(other);
        let pk = self.ring.0.pk;
        let mut c = [0u64; MAX_F];
        for i in 0..self.ring.0.f {
            c[i] = subm(self.c[i], other.c[i], pk);
        }
        self.ring.elt(c)
    }

    fn mul_impl(&self, other: &Elt) -> Elt {
        self.assert_same_ring(other);
        let data = &*self.ring.0;
        let f = data.f;
        let pk = data.pk;
        let mut prod = [0u64; 2 * MAX_F - 1];
        for i in 0..f {
            if self.c[i] == 0 {
                continue;
            }
            for j in 0..f {
                prod[i + j] = addm(prod[i + j], mulm(self.c[i], other.c[j], pk), pk);
            }
        }
        // reduce by the monic modulus: x^f = -(m_0 + ... + m_{f-1} x^{f-1})
        for d in (f..2 * f - 1).rev() {
            let c = prod[d];
            if c == 0 {
                continue;
            }
            prod[d] = 0;
            for j in 0..f {
                let t = mulm(c, data.modulus[j], pk);
                prod[d - f + j] = subm(prod[d - f + j], t, pk);
            }
        }
        let mut c = [0u64; MAX_F];
        c[..f].copy_from_slice(&prod[..f]);
        self.ring.elt(c)
    }

    /// Multiplicative inverse of a unit: residue-field inverse followed by
    /// Newton doubling up to p^k.
    pub fn inv(&self) -> Result<Elt> {
        if !self.is_unit() {
            return Err(Error::NotAUnit);
        }
        let data = &*self.ring.0;
        let p = data.p;
        let f = data.f;
        // inverse in F_q by extended Euclid over F_p[x]
        let m: Vec<u64> = data.modulus[..=f].iter().map(|&c| c % p).collect();
        let a: Vec<u64> = {
            let mut v: Vec<u64> = self.c[..f].iter().map(|&c| c % p).collect();
            fp_trim(&mut v);
            v
        };
        let inv0 = fp_inv_mod(&a, &m, p)?;
        let mut z = {
            let mut c = [0u64; MAX_F];
            for (i, &v) in inv0.iter().enumerate() {
                c[i] = v;
            }
            self.ring.elt(c)
        };
        let two = self.ring.from_int(2);
        // z_{n+1} = z_n (2 - a z_n); precision doubles per step
        let mut reached = 1u32;
        while reached < data.k {
            let az = self.mul_impl(&z);
            let corr = two.sub_impl(&az);
            z = z.mul_impl(&corr);
            reached *= 2;
        }
        debug_assert!(self.mul_impl(&z) == self.ring.one());
        Ok(z)
    }

    /// Exact division; the divisor must be a unit.
    pub fn div(&self, other: &Elt) -> Result<Elt> {
        if !other.is_unit() {
            return Err(Error::DivisionByNonUnit);
        }
        Ok(self.mul_impl(&other.inv()?))
    }

    /// Exact division by p^e: every coefficient must be divisible. The
    /// result is well defined mod p^{k-e} only.
    pub fn div_pi_pow(&self, e: u32) -> Result<Elt> {
        let data = &*self.ring.0;
        let div = checked_pow(data.p, e).ok_or(Error::PrecisionCapacity)?;
        let mut c = [0u64; MAX_F];
        for i in 0..data.f {
            if self.c[i] % div != 0 {
                return Err(Error::InvalidInput(format!(
                    "element not divisible by p^{e}"
                )));
            }
            c[i] = self.c[i] / div;
        }
        Ok(self.ring.elt(c))
    }

    /// Squareness of a unit, decided exactly (not merely at precision):
    /// residue-field Euler criterion for p odd, the finite mod-8R scan for
    /// p = 2 (sound by the local square theorem).
    pub fn is_square(&self) -> Result<bool> {
        if !self.is_unit() {
            return Err(Error::NotAUnit);
        }
        let data = &*self.ring.0;
        if data.p != 2 {
            let m: Vec<u64> = data.modulus[..=data.f].iter().map(|&c| c % data.p).collect();
            let a: Vec<u64> = {
                let mut v: Vec<u64> = self.c[..data.f].iter().map(|&c| c % data.p).collect();
                fp_trim(&mut v);
                v
            };
            let q = (data.p as u128).pow(data.f as u32);
            let pow = fp_powmod(&a, (q - 1) / 2, &m, data.p);
            return Ok(pow == vec![1]);
        }
        if data.k < 5 {
            return Err(Error::PrecisionTooSmall {
                required: 5,
                actual: data.k,
            });
        }
        let eight = 8u64;
        let target: Vec<u64> = self.c[..data.f].iter().map(|&c| c % eight).collect();
        for a in self.ring.residues(3) {
            let sq = a.mul_impl(&a);
            if sq.c[..data.f].iter().map(|&c| c % eight).eq(target.iter().copied()) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Deterministic square root: y with y^2 = self exactly at precision,
    /// branch fixed by the smaller leading coefficient. Accepts zero, square
    /// units, and even-valuation elements with square unit part.
    pub fn sqrt(&self) -> Result<Elt> {
        if self.is_zero() {
            return Ok(self.clone());
        }
        let data = &*self.ring.0;
        let (v, u) = self.unit_part()?;
        if v % 2 != 0 {
            return Err(Error::NotSquare);
        }
        let half_shift = v / 2;
        let sub_prec = data.k - v;
        let y_unit = if v == 0 {
            sqrt_unit(&self.ring, self)?
        } else {
            let sub = self.ring.truncate(sub_prec)?;
            let u_sub = sub.transport(&u);
            let y_sub = sqrt_unit(&sub, &u_sub)?;
            self.ring.transport(&y_sub)
        };
        let y = y_unit.mul_impl(&self.ring.pi_pow(half_shift));
        let y = canonical_branch(y);
        debug_assert!(y.mul_impl(&y) == *self, "sqrt postcondition");
        Ok(y)
    }

    pub fn pow(&self, mut e: u64) -> Elt {
        let mut base = self.clone();
        let mut acc = self.ring.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_impl(&base);
            }
            base = base.mul_impl(&base);
            e >>= 1;
        }
        acc
    }
}

fn fp_inv_mod(a: &[u64], m: &[u64], p: u64) -> Result<Vec<u64>> {
    // extended Euclid over F_p[x]: find s with s a = 1 mod m
    let (mut r0, mut r1) = (m.to_vec(), a.to_vec());
    let (mut s0, mut s1): (Vec<u64>, Vec<u64>) = (vec![], vec![1]);
    fp_trim(&mut r1);
    while !r1.is_empty() {
        // divide r0 by r1
        let lead_inv = mod_inv_prime(*r1.last().unwrap(), p);
        let mut rem = r0.clone();
        let mut quot = vec![0u64; rem.len().saturating_sub(r1.len()) + 1];
        while rem.len() >= r1.len() && !rem.is_empty() {
            let d = rem.len() - r1.len();
            let c = mulm(*rem.last().unwrap(), lead_inv, p);
            quot[d] = addm(quot[d], c, p);
            for (i, &mc) in r1.iter().enumerate() {
                rem[d + i] = subm(rem[d + i], mulm(c, mc, p), p);
            }
            fp_trim(&mut rem);
        }
        // s2 = s0 - q s1
        let qs1 = {
            if s1.is_empty() || quot.iter().all(|&c| c == 0) {
                vec![]
            } else {
                let mut prod = vec![0u64; quot.len() + s1.len() - 1];
                for (i, &qc) in quot.iter().enumerate() {
                    for (j, &sc) in s1.iter().enumerate() {
                        prod[i + j] = addm(prod[i + j], mulm(qc, sc, p), p);
                    }
                }
                prod
            }
        };
        let mut s2 = s0.clone();
        if s2.len() < qs1.len() {
            s2.resize(qs1.len(), 0);
        }
        for (i, &c) in qs1.iter().enumerate() {
            s2[i] = subm(s2[i], c, p);
        }
        fp_trim(&mut s2);
        r0 = r1;
        r1 = rem;
        s0 = s1;
        s1 = s2;
    }
    // r0 is the gcd, a nonzero constant for a unit
    if r0.len() != 1 {
        return Err(Error::NotAUnit);
    }
    let scale = mod_inv_prime(r0[0], p);
    let mut inv = s0;
    for c in inv.iter_mut() {
        *c = mulm(*c, scale, p);
    }
    let red = fp_rem(&inv, m, p);
    Ok(red)
}

/// Square root of a square unit in its own ring.
fn sqrt_unit(ring: &Ring, x: &Elt) -> Result<Elt> {
    let data_p = ring.p();
    if data_p != 2 {
        // Residue-field root by scan, then Newton with unit derivative.
        let rf = ring.residue_field();
        let x0 = rf.transport(x);
        let mut seed = None;
        for cand in rf.residues(1) {
            if cand.mul_impl(&cand) == x0 {
                seed = Some(cand);
                break;
            }
        }
        let seed = seed.ok_or(Error::NotSquare)?;
        let mut y = ring.transport(&seed);
        let inv2 = ring.from_int(2).inv().expect("2 is a unit for p odd");
        for _ in 0..(2 * ring.precision() + 4) {
            let fy = y.mul_impl(&y).sub_impl(x);
            if fy.is_zero() {
                break;
            }
            // y <- y - (y^2 - x) / (2y)
            let corr = fy.mul_impl(&inv2).mul_impl(&y.inv()?);
            y = y.sub_impl(&corr);
        }
        if y.mul_impl(&y) != *x {
            return Err(Error::NotSquare);
        }
        return Ok(y);
    }
    // p = 2: find a mod 8R with a^2 = x (8R), then solve
    // 2 t^2 + a t = (x - a^2)/8 at precision k-3 and set y = a + 4t.
    if ring.precision() < 5 {
        return Err(Error::PrecisionTooSmall {
            required: 5,
            actual: ring.precision(),
        });
    }
    let mut seed = None;
    for a in ring.residues(3) {
        if !a.is_unit() {
            continue;
        }
        let sq = a.mul_impl(&a);
        let diff = sq.sub_impl(x);
        if diff.valuation() >= 3 {
            seed = Some(a);
            break;
        }
    }
    let a = seed.ok_or(Error::NotSquare)?;
    let sub = ring.truncate(ring.precision() - 3)?;
    let d = x.sub_impl(&a.mul_impl(&a)).div_pi_pow(3)?;
    let d_sub = sub.transport(&d);
    let a_sub = sub.transport(&a);
    let two_sub = sub.from_int(2);
    let four_sub = sub.from_int(4);
    // Newton for g(t) = 2t^2 + a t - d, g' = 4t + a (a unit)
    let mut t = sub.zero();
    for _ in 0..(2 * sub.precision() + 4) {
        let g = two_sub
            .mul_impl(&t)
            .mul_impl(&t)
            .add_impl(&a_sub.mul_impl(&t))
            .sub_impl(&d_sub);
        if g.is_zero() {
            break;
        }
        let gp = four_sub.mul_impl(&t).add_impl(&a_sub);
        t = t.sub_impl(&g.mul_impl(&gp.inv()?));
    }
    let g = two_sub
        .mul_impl(&t)
        .mul_impl(&t)
        .add_impl(&a_sub.mul_impl(&t))
        .sub_impl(&d_sub);
    if !g.is_zero() {
        return Err(Error::NotSquare);
    }
    let t_lift = ring.transport(&t);
    let y = a.add_impl(&ring.from_int(4).mul_impl(&t_lift));
    if y.mul_impl(&y) != *x {
        return Err(Error::NotSquare);
    }
    Ok(y)
}

/// Pick min(y, -y) by the first nonzero coefficient.
fn canonical_branch(y: Elt) -> Elt {
    let neg = y.neg();
    let f = y.ring.0.f;
    for i in 0..f {
        if y.c[i] != 0 {
            return if y.c[i] <= neg.c[i] { y } else { neg };
        }
    }
    y
}

impl PartialEq for Elt {
    fn eq(&self, other: &Self) -> bool {
        self.ring == other.ring && self.c == other.c
    }
}
impl Eq for Elt {}

impl fmt::Display for Elt {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        let f = self.ring.0.f;
        for i in 0..f {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "{}", self.c[i])?;
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $impl:ident) => {
        impl std::ops::$trait<&Elt> for &Elt {
            type Output = Elt;
            fn $method(self, rhs: &Elt) -> Elt {
                self.$impl(rhs)
            }
        }
        impl std::ops::$trait<Elt> for Elt {
            type Output = Elt;
            fn $method(self, rhs: Elt) -> Elt {
                self.$impl(&rhs)
            }
        }
    };
}

impl std::ops::Add<&Elt> for &Elt {
    type Output = Result<Elt>;
    fn add(self, rhs: &Elt) -> Result<Elt> {
        Ok(self.add_impl(rhs))
    }
}
impl std::ops::Sub<&Elt> for &Elt {
    type Output = Result<Elt>;
    fn sub(self, rhs: &Elt) -> Result<Elt> {
        Ok(self.sub_impl(rhs))
    }
}
impl std::ops::Mul<&Elt> for &Elt {
    type Output = Result<Elt>;
    fn mul(self, rhs: &Elt) -> Result<Elt> {
        Ok(self.mul_impl(rhs))
    }
}
impl std::ops::Div<&Elt> for &Elt {
    type Output = Result<Elt>;
    fn div(self, rhs: &Elt) -> Result<Elt> {
        self.div(rhs)
    }
}

// Panicking value-ops for internal ergonomic use.
impl Elt {
    pub fn add(&self, rhs: &Elt) -> Elt {
        self.add_impl(rhs)
    }
    pub fn sub(&self, rhs: &Elt) -> Elt {
        self.sub_impl(rhs)
    }
    pub fn mul(&self, rhs: &Elt) -> Elt {
        self.mul_impl(rhs)
    }
}

#[allow(unused)]
fn _unused_forward_binop_guard() {
    // forward_binop kept for potential value-based operator impls
    let _ = stringify!(forward_binop);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2(k: u32) -> Ring {
        Ring::new(2, 1, k).unwrap()
    }
    fn z3(k: u32) -> Ring {
        Ring::new(3, 1, k).unwrap()
    }

    #[test]
    fn make_ring_basic() {
        let r = z2(6);
        assert_eq!(r.pk(), 64);
        assert_eq!(r.q(), 2);
        let r3 = z3(4);
        assert_eq!(r3.pk(), 81);
        // W(F_4): modulus is the verbatim lift of x^2 + x + 1
        let r4 = Ring::new(2, 2, 6).unwrap();
        assert_eq!(r4.modulus(), &[1, 1, 1]);
        assert_eq!(r4.q(), 4);
    }

    #[test]
    fn make_ring_errors() {
        assert_eq!(Ring::new(4, 1, 6).unwrap_err(), Error::NotPrime(4));
        assert!(matches!(
            Ring::new(2, 1, 3).unwrap_err(),
            Error::PrecisionTooSmall { required: 5, .. }
        ));
        assert!(Ring::new(3, 1, 1).is_ok());
    }

    #[test]
    fn arith_examples() {
        let r = z2(6);
        let a = r.from_int(3);
        let b = r.from_int(5);
        assert_eq!(a.add(&b), r.from_int(8));
        // inverse of 5 mod 64 is 13
        assert_eq!(b.inv().unwrap(), r.from_int(13));
        // x * x = -x - 1 under x^2 + x + 1
        let r4 = Ring::new(2, 2, 6).unwrap();
        let x = r4.from_coeffs(&[0, 1]).unwrap();
        let want = r4.from_int(-1).add(&r4.from_coeffs(&[0, 63]).unwrap());
        assert_eq!(x.mul(&x), want);
    }

    #[test]
    fn division_contract() {
        let r = z2(6);
        let a = r.from_int(44);
        let b = r.from_int(5);
        let q = a.div(&b).unwrap();
        assert_eq!(q.mul(&b), a);
        assert_eq!(
            a.div(&r.from_int(2)).unwrap_err(),
            Error::DivisionByNonUnit
        );
    }

    #[test]
    fn valuation_examples() {
        let r = z2(6);
        assert_eq!(r.from_int(12).valuation(), 2);
        assert_eq!(r.zero().valuation(), 6);
        let r3 = z3(4);
        assert_eq!(r3.from_int(18).valuation(), 2);
    }

    #[test]
    fn square_examples() {
        let r = z2(6);
        assert!(r.from_int(17).is_square().unwrap());
        assert!(!r.from_int(5).is_square().unwrap());
        let r3 = z3(4);
        assert!(r3.from_int(7).is_square().unwrap());
        assert_eq!(r3.from_int(3).is_square().unwrap_err(), Error::NotAUnit);
    }

    #[test]
    fn sqrt_examples() {
        let r3 = z3(4);
        assert_eq!(r3.from_int(4).sqrt().unwrap(), r3.from_int(2));
        let r = z2(6);
        let y = r.from_int(17).sqrt().unwrap();
        assert_eq!(y.mul(&y), r.from_int(17));
        assert_eq!(r.from_int(5).sqrt().unwrap_err(), Error::NotSquare);
        // even valuation with square unit part; needs k - v >= 5
        let r8 = Ring::new(2, 1, 8).unwrap();
        let x = r8.from_int(4 * 17);
        let y = x.sqrt().unwrap();
        assert_eq!(y.mul(&y), x);
        assert_eq!(r8.from_int(8).sqrt().unwrap_err(), Error::NotSquare);
        assert!(matches!(
            r.from_int(4 * 17).sqrt().unwrap_err(),
            Error::PrecisionTooSmall { .. }
        ));
    }

    #[test]
    fn rho_delta_examples() {
        let r = z2(6);
        assert_eq!(r.rho(), r.from_int(1));
        assert_eq!(r.delta(), r.from_int(-3));
        assert!(!r.delta().is_square().unwrap());

        let r3 = z3(4);
        assert_eq!(r3.delta(), r3.from_int(2));
        // rho = (1 - 2)/4 = -1/4
        let four_rho = r3.from_int(4).mul(&r3.rho());
        assert_eq!(r3.one().sub(&four_rho), r3.delta());

        let r4 = Ring::new(2, 2, 6).unwrap();
        assert_eq!(r4.rho(), r4.from_coeffs(&[0, 1]).unwrap());
        assert!(!r4.delta().is_square().unwrap());
        assert!(r4.delta().is_unit());
    }

    #[test]
    fn square_class_reps() {
        let r3 = z3(4);
        let reps = r3.unit_square_class_reps();
        assert_eq!(reps, vec![r3.from_int(1), r3.from_int(2)]);

        let r = z2(6);
        let reps: Vec<u64> = r
            .unit_square_class_reps()
            .iter()
            .map(|e| e.coeffs()[0] % 8)
            .collect();
        assert_eq!(reps, vec![1, 3, 5, 7]);

        let r4 = Ring::new(2, 2, 6).unwrap();
        assert_eq!(r4.unit_square_class_reps().len(), 8);
    }

    #[test]
    fn square_multiplicativity() {
        // p odd: two square classes, so is_square is multiplicative.
        let r3 = z3(5);
        for a in 1..40 {
            for b in 1..40 {
                if a % 3 == 0 || b % 3 == 0 {
                    continue;
                }
                let x = r3.from_int(a);
                let y = r3.from_int(b);
                assert_eq!(
                    x.mul(&y).is_square().unwrap(),
                    x.is_square().unwrap() == y.is_square().unwrap()
                );
            }
        }
        // p = 2 has four classes; the correct law is that a product is a
        // square exactly when the factors share a class.
        let r = z2(7);
        let units: Vec<Elt> = (0..40).map(|i| r.from_int(2 * i + 1)).collect();
        for a in &units {
            for b in &units {
                let same_class = a.div(b).unwrap().is_square().unwrap();
                assert_eq!(a.mul(b).is_square().unwrap(), same_class);
            }
        }
    }

    #[test]
    fn dyadic_square_set_matches_scan() {
        // {a^2 mod 8R : a unit} must equal the units that is_square accepts,
        // mod 8R.
        for ring in [z2(6), Ring::new(2, 2, 6).unwrap()] {
            let mut squares = std::collections::BTreeSet::new();
            for a in ring.residues(3) {
                if a.is_unit() {
                    let sq = a.mul(&a);
                    let key: Vec<u64> = sq.coeffs().iter().map(|c| c % 8).collect();
                    squares.insert(key);
                }
            }
            for u in ring.residues(3) {
                if !u.is_unit() {
                    continue;
                }
                let key: Vec<u64> = u.coeffs().iter().map(|c| c % 8).collect();
                assert_eq!(u.is_square().unwrap(), squares.contains(&key));
            }
        }
    }

    #[test]
    fn valuation_laws() {
        let r = z2(8);
        for a in -20i64..20 {
            for b in -20i64..20 {
                let x = r.from_int(a);
                let y = r.from_int(b);
                let k = r.precision();
                assert_eq!(
                    x.mul(&y).valuation(),
                    (x.valuation() + y.valuation()).min(k)
                );
                assert!(x.add(&y).valuation() >= x.valuation().min(y.valuation()));
            }
        }
    }

    #[test]
    fn serialization_round_trip() {
        for spec in ["2,1,8", "3,1,5", "2,2,6,1,1,1"] {
            let r = Ring::parse(spec).unwrap();
            let r2 = Ring::parse(&r.to_string()).unwrap();
            assert_eq!(r, r2);
        }
        let r = Ring::new(2, 2, 6).unwrap();
        let x = r.from_coeffs(&[17, 40]).unwrap();
        assert_eq!(r.parse_elt(&x.to_string()).unwrap(), x);
        let z = Ring::parse("2,1,8").unwrap();
        assert_eq!(z.parse_elt("-3").unwrap(), z.from_int(-3));
    }

    #[test]
    fn delta_is_one_mod_4() {
        for ring in [z2(6), z3(4), Ring::new(2, 2, 6).unwrap(), Ring::new(5, 1, 4).unwrap()] {
            let delta = ring.delta();
            assert!(delta.is_unit());
            assert!(!delta.is_square().unwrap());
            let diff = delta.sub(&ring.one());
            assert!(diff.is_zero() || diff.valuation() >= 2 * ring.ord2());
        }
    }
}
