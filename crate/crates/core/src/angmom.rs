//! Angular-momentum treatment of N→M cloning and the N→(M−N) universal NOT.
//!
//! The protocol runs on the register `[S₁..S_N, A₁..A_{M−N}, B₁..B_{M−N}]`:
//! N copies of the input, then Alice's halves of the shared pairs, then Bob's
//! halves. Alice projects the first M qubits onto their symmetric subspace.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::qcore::{c, fidelity_pure, CMatrix, CVector, DensityMatrix, PureState, ONE, ZERO};

/// A half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const fn from_twice(twice: i64) -> Self {
        Self(twice)
    }

    pub const fn integer(n: i64) -> Self {
        Self(2 * n)
    }

    /// Parses a float that must be a multiple of 1/2.
    pub fn new(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if (twice - twice.round()).abs() > 1e-9 || !twice.is_finite() {
            return Err(Error::AngularMomentum(format!("{value} is not a half-integer")));
        }
        Ok(Self(twice.round() as i64))
    }

    pub const fn twice(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// `|j, m⟩` with `j ≥ 0`, `|m| ≤ j` and `j − m` integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinState {
    pub j: HalfInt,
    pub m: HalfInt,
}

impl SpinState {
    pub fn new(j: HalfInt, m: HalfInt) -> Result<Self> {
        if j.0 < 0 || m.0.abs() > j.0 || (j.0 - m.0) % 2 != 0 {
            return Err(Error::AngularMomentum(format!("invalid state |{j}, {m}⟩")));
        }
        Ok(Self { j, m })
    }
}

fn factorial(n: i64) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * k)
}

/// `(a + b)/2` of doubled values, which must be a non-negative integer.
fn half_sum(twice: i64) -> i64 {
    debug_assert!(twice % 2 == 0 && twice >= 0);
    twice / 2
}

/// Exact squared Clebsch–Gordan coefficient together with its sign
/// (Condon–Shortley convention), from the Racah formula.
pub fn clebsch_gordan_exact(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<(i8, BigRational)> {
    let s1 = SpinState::new(j1, m1)?;
    let s2 = SpinState::new(j2, m2)?;
    let st = SpinState::new(j, m)?;
    if s1.m.0 + s2.m.0 != st.m.0 {
        return Err(Error::AngularMomentum(format!(
            "m1 + m2 = {} differs from M = {m}",
            HalfInt(m1.0 + m2.0)
        )));
    }
    let (tj1, tj2, tj) = (j1.0, j2.0, j.0);
    if tj < (tj1 - tj2).abs() || tj > tj1 + tj2 || (tj1 + tj2 + tj) % 2 != 0 {
        return Err(Error::AngularMomentum(format!(
            "J = {j} violates the triangle rule for j1 = {j1}, j2 = {j2}"
        )));
    }
    let (tm1, tm2, tm) = (m1.0, m2.0, m.0);

    let triangle = BigRational::new(
        BigInt::from(tj + 1)
            * factorial(half_sum(tj + tj1 - tj2))
            * factorial(half_sum(tj - tj1 + tj2))
            * factorial(half_sum(tj1 + tj2 - tj)),
        factorial(half_sum(tj1 + tj2 + tj) + 1),
    );
    let projections = BigRational::from_integer(
        factorial(half_sum(tj + tm))
            * factorial(half_sum(tj - tm))
            * factorial(half_sum(tj1 - tm1))
            * factorial(half_sum(tj1 + tm1))
            * factorial(half_sum(tj2 - tm2))
            * factorial(half_sum(tj2 + tm2)),
    );

    // Summation index k runs wherever all factorial arguments are >= 0.
    let a = half_sum(tj1 + tj2 - tj);
    let b = half_sum(tj1 - tm1);
    let cc = half_sum(tj2 + tm2);
    let d = (tj - tj2 + tm1) / 2;
    let e = (tj - tj1 - tm2) / 2;
    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(cc);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(a - k)
            * factorial(b - k)
            * factorial(cc - k)
            * factorial(d + k)
            * factorial(e + k);
        let term = BigRational::new(BigInt::one(), denom);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let sign = if sum.is_zero() {
        0
    } else if sum.is_negative() {
        -1
    } else {
        1
    };
    Ok((sign, triangle * projections * &sum * &sum))
}

/// `⟨j₁ m₁; j₂ m₂ | J M⟩` in the Condon–Shortley convention.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    let (sign, squared) = clebsch_gordan_exact(j1, m1, j2, m2, j, m)?;
    let value = squared
        .to_f64()
        .ok_or_else(|| Error::AngularMomentum("coefficient not representable".into()))?;
    Ok(f64::from(sign) * value.sqrt())
}

/// Cloning parameters: N identical inputs, M outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CloningSpec {
    n: usize,
    m: usize,
}

impl CloningSpec {
    /// Requires `1 ≤ N ≤ M`; `M = N` is the trivial pass-through.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 1 || m < n {
            return Err(Error::InvalidParameter(format!(
                "cloning requires 1 <= N <= M, got N = {n}, M = {m}"
            )));
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of shared pairs, `M − N`.
    pub fn pairs(&self) -> usize {
        self.m - self.n
    }

    pub fn beta(&self) -> f64 {
        self.n as f64 / self.m as f64
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k > self.pairs() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} outside 0..={}",
                self.pairs()
            )));
        }
        Ok(())
    }
}

/// Closed-form amplitude
/// `b_k = (−1)^k √((N+1)/(M+1)) √((M−N)!(M−k)!/(M!(M−N−k)!))`.
pub fn bk_coefficient(spec: CloningSpec, k: usize) -> Result<f64> {
    spec.check_k(k)?;
    let (n, m) = (spec.n as f64, spec.m as f64);
    // (M−N)!(M−k)!/(M!(M−N−k)!) = Π_{i<k} (M−N−i)/(M−i)
    let ratio: f64 = (0..k).map(|i| (m - n - i as f64) / (m - i as f64)).product();
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * ((n + 1.0) / (m + 1.0) * ratio).sqrt())
}

/// The same amplitude as the coupling coefficient
/// `⟨M/2, M/2−k; (M−N)/2, −(M−N)/2+k | N/2, N/2⟩`.
pub fn bk_from_clebsch_gordan(spec: CloningSpec, k: usize) -> Result<f64> {
    spec.check_k(k)?;
    let (n, m, k) = (spec.n as i64, spec.m as i64, k as i64);
    clebsch_gordan(
        HalfInt(m),
        HalfInt(m - 2 * k),
        HalfInt(m - n),
        HalfInt(-(m - n) + 2 * k),
        HalfInt(n),
        HalfInt(n),
    )
}

pub fn bk_vector(spec: CloningSpec) -> Vec<f64> {
    (0..=spec.pairs())
        .map(|k| bk_coefficient(spec, k).expect("k in range"))
        .collect()
}

/// Both routes to the optimal fidelities, plus the heralding probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormFigures {
    /// `Σ_k b_k² (M−k)/M`.
    pub clone_summation: f64,
    /// `(N + 1 + β)/(N + 2)`.
    pub clone_closed: f64,
    /// `Σ_k b_k² (M−N−k)/(M−N)`; absent when `M = N`.
    pub unot_summation: Option<f64>,
    /// `(N + 1)/(N + 2)`.
    pub unot_closed: f64,
    /// `(1/2^{M−N}) (1+M)/(1+N)`.
    pub success_probability: f64,
}

pub fn closed_form_fidelities(spec: CloningSpec) -> ClosedFormFigures {
    let (n, m) = (spec.n as f64, spec.m as f64);
    let b = bk_vector(spec);
    let clone_summation = b
        .iter()
        .enumerate()
        .map(|(k, bk)| bk * bk * (m - k as f64) / m)
        .sum();
    let unot_summation = (spec.pairs() > 0).then(|| {
        let l = spec.pairs() as f64;
        b.iter()
            .enumerate()
            .map(|(k, bk)| bk * bk * (l - k as f64) / l)
            .sum()
    });
    ClosedFormFigures {
        clone_summation,
        clone_closed: (n + 1.0 + spec.beta()) / (n + 2.0),
        unot_summation,
        unot_closed: (n + 1.0) / (n + 2.0),
        success_probability: (1.0 + m) / (1.0 + n) / 2f64.powi(spec.pairs() as i32),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn register_labels(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

/// Computational-basis Dicke state with `ones` excitations on `total` qubits.
fn computational_dicke(total: usize, ones: usize) -> CVector {
    let amp = c(1.0 / binomial(total, ones).sqrt(), 0.0);
    CVector::from_fn(1 << total, |i, _| {
        if (i as u64).count_ones() as usize == ones {
            amp
        } else {
            ZERO
        }
    })
}

/// Normalized symmetric combination of `p` copies of `φ` and `total − p`
/// copies of `φ⊥`, on qubits labelled `q1..q_total`.
pub fn dicke_state(total: usize, p: usize, phi: &PureState) -> Result<PureState> {
    phi.require_single()?;
    if p > total || total == 0 {
        return Err(Error::InvalidParameter(format!("p = {p} outside 0..={total}")));
    }
    let perp = phi.orthogonal()?;
    let rotation = CMatrix::from_columns(&[phi.amplitudes().clone(), perp.amplitudes().clone()]);
    let labels = register_labels("q", total);
    let mut state = PureState::new(computational_dicke(total, total - p), labels.clone())?;
    for label in &labels {
        state.apply(&rotation, &[label.as_str()])?;
    }
    Ok(state)
}

/// `ρ_{p,q} = (p/(p+q))|φ⟩⟨φ| + (q/(p+q))|φ⊥⟩⟨φ⊥|`.
pub fn rho_pq(phi: &PureState, p: usize, q: usize) -> Result<DensityMatrix> {
    if p + q == 0 {
        return Err(Error::InvalidParameter("p + q must be positive".into()));
    }
    let perp = phi.orthogonal()?;
    let total = (p + q) as f64;
    let m = crate::qcore::outer(phi.amplitudes(), phi.amplitudes()).scale(p as f64 / total)
        + crate::qcore::outer(perp.amplitudes(), perp.amplitudes()).scale(q as f64 / total);
    DensityMatrix::new(m, phi.labels().to_vec())
}

pub const DENSE_PROJECTOR_LIMIT: usize = 10;
pub const PERMUTATION_AVERAGE_LIMIT: usize = 8;

/// Dense `P_sym^M = Σ_k |M/2, M/2−k⟩⟨M/2, M/2−k|` on M qubits.
pub fn symmetric_projector_m(m: usize) -> Result<CMatrix> {
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    if m > DENSE_PROJECTOR_LIMIT {
        return Err(Error::RegisterTooLarge { qubits: m, limit: DENSE_PROJECTOR_LIMIT });
    }
    let dim = 1 << m;
    let mut p = CMatrix::zeros(dim, dim);
    for k in 0..=m {
        let d = computational_dicke(m, k);
        p += &d * d.adjoint();
    }
    Ok(p)
}

/// `(1/M!) Σ_π P_π`, averaging every qubit permutation operator.
pub fn symmetric_projector_permutation_average(m: usize) -> Result<CMatrix> {
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    if m > PERMUTATION_AVERAGE_LIMIT {
        return Err(Error::RegisterTooLarge { qubits: m, limit: PERMUTATION_AVERAGE_LIMIT });
    }
    let dim = 1usize << m;
    let mut counts = vec![0u32; dim * dim];
    let mut perm: Vec<usize> = (0..m).collect();
    let mut visit = |perm: &[usize]| {
        for x in 0..dim {
            let y = perm
                .iter()
                .enumerate()
                .filter(|(src, _)| x & (1 << src) != 0)
                .fold(0, |acc, (_, &dst)| acc | (1 << dst));
            counts[y * dim + x] += 1;
        }
    };
    // Heap's algorithm.
    let mut stack = vec![0usize; m];
    visit(&perm);
    let mut i = 0;
    while i < m {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            visit(&perm);
            stack[i] += 1;
            i = 0;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    let total: f64 = (1..=m).map(|k| k as f64).product();
    Ok(CMatrix::from_fn(dim, dim, |r, col| {
        c(f64::from(counts[r * dim + col]) / total, 0.0)
    }))
}

/// Applies `P_sym ⊗ 𝕀` to a vector whose leading `alice` qubits are
/// projected and whose trailing `rest` qubits are untouched. Each symmetric
/// component is the average of the amplitudes with equal Hamming weight.
pub fn apply_symmetric_projector(amplitudes: &CVector, alice: usize, rest: usize) -> CVector {
    assert_eq!(amplitudes.len(), 1 << (alice + rest));
    let cols = 1usize << rest;
    let mut sums = vec![ZERO; (alice + 1) * cols];
    for a in 0..(1usize << alice) {
        let k = a.count_ones() as usize;
        for b in 0..cols {
            sums[k * cols + b] += amplitudes[a * cols + b];
        }
    }
    let weights: Vec<f64> = (0..=alice).map(|k| 1.0 / binomial(alice, k)).collect();
    CVector::from_fn(amplitudes.len(), |i, _| {
        let (a, b) = (i / cols, i % cols);
        let k = a.count_ones() as usize;
        sums[k * cols + b] * weights[k]
    })
}

/// Entangled resource shared by Alice and Bob in each pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairProgram {
    /// `|Ψ⁻⟩`: Bob receives the optimal universal NOT.
    Singlet,
    /// `|Φ⁺⟩`: Bob receives the optimal transpose.
    Triplet,
}

impl PairProgram {
    fn amplitudes(self) -> [f64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            PairProgram::Singlet => [0.0, h, -h, 0.0],
            PairProgram::Triplet => [h, 0.0, 0.0, h],
        }
    }
}

/// Largest register the brute-force protocol simulates (`2M − N`).
pub const BRUTE_FORCE_LIMIT: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct NMOutcome {
    pub success_probability: f64,
    pub b: Vec<f64>,
    pub clone_fidelity: f64,
    /// Fidelity of Bob's first qubit to `φ⊥` (singlet) or `φ*` (triplet).
    pub unot_fidelity: f64,
    pub reduced_clone: DensityMatrix,
    pub reduced_anticlone: DensityMatrix,
    /// Normalized, phase-canonical post-measurement state.
    pub post_state: PureState,
}

/// Builds `|φ⟩^{⊗N} ⊗ |pair⟩^{⊗(M−N)}` on the protocol layout.
pub fn initial_register(spec: CloningSpec, phi: &PureState, program: PairProgram) -> Result<PureState> {
    phi.require_single()?;
    let (n, l) = (spec.n, spec.pairs());
    let qubits = n + 2 * l;
    if qubits > BRUTE_FORCE_LIMIT {
        return Err(Error::RegisterTooLarge { qubits, limit: BRUTE_FORCE_LIMIT });
    }
    let pair = program.amplitudes();
    let input = [phi.amplitudes()[0], phi.amplitudes()[1]];
    let amplitudes = CVector::from_fn(1 << qubits, |idx, _| {
        let s = idx >> (2 * l);
        let a = (idx >> l) & ((1 << l) - 1);
        let b = idx & ((1 << l) - 1);
        let mut amp = ONE;
        for q in 0..n {
            amp *= input[(s >> (n - 1 - q)) & 1];
        }
        for i in 0..l {
            let ai = (a >> (l - 1 - i)) & 1;
            let bi = (b >> (l - 1 - i)) & 1;
            amp *= pair[2 * ai + bi];
        }
        amp
    });
    let labels: Vec<String> = register_labels("S", n)
        .into_iter()
        .chain(register_labels("A", l))
        .chain(register_labels("B", l))
        .collect();
    PureState::new(amplitudes, labels)
}

/// Heralded N→M cloning / N→(M−N) NOT by brute-force projection of Alice's
/// M qubits onto their symmetric subspace.
pub fn run_nm_protocol(spec: CloningSpec, phi: &PureState, program: PairProgram) -> Result<NMOutcome> {
    if spec.pairs() == 0 {
        return Err(Error::InvalidParameter("protocol needs M > N".into()));
    }
    let omega = initial_register(spec, phi, program)?;
    let projected = apply_symmetric_projector(omega.amplitudes(), spec.m, spec.pairs());
    let p = projected.norm_squared();
    let post = PureState::normalized(projected, omega.labels().to_vec())?.canonical_phase();
    let reduced_clone = post.reduced(&["S1"])?.relabel(["q"])?;
    let reduced_anticlone = post.reduced(&["B1"])?.relabel(["q"])?;
    let target = PureState::new(phi.amplitudes().clone(), ["q"])?;
    let anti_target = match program {
        PairProgram::Singlet => target.orthogonal()?,
        PairProgram::Triplet => target.conjugate(),
    };
    Ok(NMOutcome {
        success_probability: p,
        b: bk_vector(spec),
        clone_fidelity: fidelity_pure(&reduced_clone, &target)?,
        unot_fidelity: fidelity_pure(&reduced_anticlone, &anti_target)?,
        reduced_clone,
        reduced_anticlone,
        post_state: post,
    })
}
