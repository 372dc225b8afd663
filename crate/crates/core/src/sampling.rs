//! Finite-shot estimation and partial photon distinguishability.
//!
//! Distinguishability model: every photon independently carries the common
//! internal state with probability `β = √V` and otherwise a private state
//! orthogonal to all others. Photons sharing the common state interfere
//! through the permanent; every other photon propagates on its own with
//! single-photon statistics `|U_ij|²`. Two photons then interfere with
//! probability `β² = V`, which is the Hong–Ou–Mandel visibility.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{binomial, Caps, FockBasis, FockState};
use crate::interferometer::{evolve_fock_state, fock_matrix, BoundCircuit, BoundComponent, ModeUnitary, ParamCircuit};

/// Number of samples per expectation value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Finite(u64),
}

impl Shots {
    pub fn count(self) -> u64 {
        match self {
            Shots::Exact => 0,
            Shots::Finite(n) => n,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Shots::Exact)
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_none(),
            Shots::Finite(n) => s.serialize_some(n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match Option::<u64>::deserialize(d)? {
            None => Shots::Exact,
            Some(n) => Shots::Finite(n),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(rename = "hom")]
    pub hom_visibility: f64,
    pub shots: Shots,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::exact()
    }
}

impl NoiseModel {
    /// Infinite shots, perfectly indistinguishable photons.
    pub fn exact() -> Self {
        NoiseModel {
            hom_visibility: 1.0,
            shots: Shots::Exact,
            seed: 0,
        }
    }

    pub fn sampled(shots: u64, hom_visibility: f64, seed: u64) -> Self {
        NoiseModel {
            hom_visibility,
            shots: Shots::Finite(shots),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_visibility(self.hom_visibility)?;
        if self.shots == Shots::Finite(0) {
            return Err(Error::InvalidArgument("shot count must be positive".into()));
        }
        Ok(())
    }

    /// Same settings with infinite shots.
    pub fn without_shots(&self) -> Self {
        NoiseModel {
            shots: Shots::Exact,
            ..*self
        }
    }

    /// Same settings on the sub-stream identified by `key`.
    pub fn reseeded(&self, key: &[u64]) -> Self {
        NoiseModel {
            seed: derive_seed(self.seed, key),
            ..*self
        }
    }

    pub fn rng(&self, key: &[u64]) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self.seed, key))
    }
}

fn check_visibility(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidVisibility(v));
    }
    Ok(())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-stream seed for `(seed, key...)`.
pub fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    key.iter().fold(splitmix64(seed), |acc, &k| {
        splitmix64(acc ^ splitmix64(k.wrapping_add(0x5851_F42D)))
    })
}

/// Outcome counts over a Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    basis: Arc<FockBasis>,
    counts: Vec<u64>,
    total: u64,
}

impl SampleRecord {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, state: &FockState) -> u64 {
        self.basis.index_of(state).map_or(0, |i| self.counts[i])
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// `{"|1,0⟩": 17, ...}` in basis order, zero counts omitted.
impl Serialize for SampleRecord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let nonzero = self.counts.iter().filter(|&&c| c > 0).count();
        let mut map = s.serialize_map(Some(nonzero))?;
        for (state, &c) in self.basis.states().iter().zip(&self.counts) {
            if c > 0 {
                map.serialize_entry(&state.to_string(), &c)?;
            }
        }
        map.end()
    }
}

pub(crate) fn validate_distribution(p: &[f64]) -> Result<()> {
    if let Some((i, x)) = p.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < -1e-12) {
        return Err(Error::InvalidDistribution(format!("entry {i} is {x}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("sums to {total}")));
    }
    Ok(())
}

/// `shots` i.i.d. categorical draws from `p`, drawn as a multinomial by
/// successive conditional binomials.
pub fn sample_distribution(basis: Arc<FockBasis>, p: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Result<SampleRecord> {
    if p.len() != basis.len() {
        return Err(Error::Dimension(format!(
            "{} probabilities for {} states",
            p.len(),
            basis.len()
        )));
    }
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be positive".into()));
    }
    validate_distribution(p)?;
    let counts = multinomial(p, shots, rng);
    Ok(SampleRecord {
        basis,
        counts,
        total: shots,
    })
}

fn multinomial(p: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut counts = vec![0u64; p.len()];
    let last = p.iter().rposition(|&x| x > 0.0).unwrap_or(0);
    let mut remaining = shots;
    let mut mass = 1.0f64;
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        let pi = pi.max(0.0);
        let q = if mass > 0.0 { (pi / mass).clamp(0.0, 1.0) } else { 1.0 };
        let k = Binomial::new(remaining, q).expect("q in [0, 1]").sample(rng);
        counts[i] = k;
        remaining -= k;
        mass -= pi;
    }
    counts
}

/// Fock bases for `0..=n` photons on `m` modes with the photon-adding maps
/// used to convolve independent photons into a joint occupation pattern.
#[derive(Debug)]
pub struct PhotonLadder {
    bases: Vec<Arc<FockBasis>>,
    /// `raise[k][t][i]`: index in basis `k+1` of state `t` of basis `k` plus one photon in mode `i`.
    raise: Vec<Vec<Vec<usize>>>,
}

impl PhotonLadder {
    pub fn new(photons: usize, modes: usize) -> Result<Self> {
        Self::with_caps(photons, modes, &Caps::default())
    }

    pub fn with_caps(photons: usize, modes: usize, caps: &Caps) -> Result<Self> {
        let bases = (0..=photons)
            .map(|k| FockBasis::with_caps(k, modes, caps).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let raise = (0..photons)
            .map(|k| {
                bases[k]
                    .states()
                    .iter()
                    .map(|t| {
                        (0..modes)
                            .map(|i| {
                                let mut occ = t.occupations().to_vec();
                                occ[i] += 1;
                                bases[k + 1].index_of(&FockState::new(occ)).unwrap()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(PhotonLadder { bases, raise })
    }

    pub fn photons(&self) -> usize {
        self.bases.len() - 1
    }

    pub fn modes(&self) -> usize {
        self.bases[0].modes()
    }

    pub fn basis(&self, photons: usize) -> &Arc<FockBasis> {
        &self.bases[photons]
    }

    /// Full-photon-number basis.
    pub fn top(&self) -> &Arc<FockBasis> {
        self.bases.last().unwrap()
    }

    /// Output distribution of `input` through `u` under visibility `v`.
    pub fn distribution(&self, u: &ModeUnitary, input: &FockState, v: f64) -> Result<Vec<f64>> {
        check_visibility(v)?;
        let n = input.photons();
        if n != self.photons() {
            return Err(Error::PhotonMismatch {
                expected: self.photons(),
                got: n,
            });
        }
        if input.modes() != self.modes() {
            return Err(Error::ModeMismatch {
                expected: self.modes(),
                got: input.modes(),
            });
        }
        let beta = v.sqrt();
        let s = input.occupations();
        let mut total = vec![0.0; self.top().len()];
        let mut good = vec![0usize; s.len()];
        loop {
            let weight: f64 = s
                .iter()
                .zip(&good)
                .map(|(&sj, &gj)| binomial(sj, gj) as f64 * beta.powi(gj as i32) * (1.0 - beta).powi((sj - gj) as i32))
                .product();
            if weight > 0.0 {
                let part = self.partition_distribution(u, s, &good)?;
                total.iter_mut().zip(part).for_each(|(t, p)| *t += weight * p);
            }
            // odometer over 0 <= good[j] <= s[j]
            let mut j = 0;
            while j < s.len() && good[j] == s[j] {
                good[j] = 0;
                j += 1;
            }
            if j == s.len() {
                break;
            }
            good[j] += 1;
        }
        Ok(total)
    }

    /// Interfering photons `good`, the rest `s - good` propagating independently.
    fn partition_distribution(&self, u: &ModeUnitary, s: &[usize], good: &[usize]) -> Result<Vec<f64>> {
        let k: usize = good.iter().sum();
        let good_state = FockState::new(good.to_vec());
        let mut dist: Vec<f64> = evolve_fock_state(u, self.basis(k), &good_state)?
            .iter()
            .map(|a| a.norm_sqr())
            .collect();
        let mut photons = k;
        for (j, (&sj, &gj)) in s.iter().zip(good).enumerate() {
            let single: Vec<f64> = (0..self.modes()).map(|i| u.matrix()[(i, j)].norm_sqr()).collect();
            for _ in gj..sj {
                let mut next = vec![0.0; self.basis(photons + 1).len()];
                for (t, &pt) in dist.iter().enumerate() {
                    if pt == 0.0 {
                        continue;
                    }
                    for (i, &qi) in single.iter().enumerate() {
                        next[self.raise[photons][t][i]] += pt * qi;
                    }
                }
                dist = next;
                photons += 1;
            }
        }
        Ok(dist)
    }
}

/// Exact outcome distribution under partial distinguishability `v`.
pub fn noisy_distribution(circuit: &ParamCircuit, theta: &[f64], input: &FockState, v: f64) -> Result<Vec<f64>> {
    let ladder = PhotonLadder::new(input.photons(), circuit.modes())?;
    ladder.distribution(&circuit.bind(theta)?.unitary(), input, v)
}

/// One measurement setting: a fixed basis rotation followed by a
/// number-resolved readout assigning `values[x]` to outcome `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredTerm {
    pub rotation: Vec<BoundComponent>,
    pub values: Vec<f64>,
    /// Post-selection mask; discarded outcomes do not count towards the estimate.
    pub keep: Option<Vec<bool>>,
}

impl MeasuredTerm {
    pub fn diagonal(values: Vec<f64>) -> Self {
        MeasuredTerm {
            rotation: Vec::new(),
            values,
            keep: None,
        }
    }

    /// `max_x |values[x]|` over retained outcomes.
    pub fn bound(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.keep.as_ref().is_none_or(|k| k[*i]))
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    fn kept(&self, i: usize) -> bool {
        self.keep.as_ref().is_none_or(|k| k[i])
    }

    fn exact_value(&self, p: &[f64]) -> Result<f64> {
        let mut kept_mass = 0.0;
        let mut acc = 0.0;
        for (i, (&pi, &v)) in p.iter().zip(&self.values).enumerate() {
            if self.kept(i) {
                kept_mass += pi;
                acc += pi * v;
            }
        }
        if self.keep.is_none() {
            return Ok(acc);
        }
        if kept_mass <= 0.0 {
            return Err(Error::PostSelectionStarved { shots: 0 });
        }
        Ok(acc / kept_mass)
    }

    fn sampled_value(&self, counts: &[u64], shots: u64) -> Result<f64> {
        let mut kept = 0u64;
        let mut acc = 0.0;
        for (i, (&c, &v)) in counts.iter().zip(&self.values).enumerate() {
            if self.kept(i) {
                kept += c;
                acc += c as f64 * v;
            }
        }
        if kept == 0 {
            return Err(Error::PostSelectionStarved { shots });
        }
        Ok(acc / kept as f64)
    }
}

/// What is measured at the circuit output.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// Arbitrary operator on the output Fock basis; exact mode only.
    Dense(DMatrix<Complex64>),
    /// Sum of diagonalized measurement settings.
    Measured(Vec<MeasuredTerm>),
}

impl Observable {
    pub fn identity(basis: &FockBasis) -> Self {
        Observable::Measured(vec![MeasuredTerm::diagonal(vec![1.0; basis.len()])])
    }

    /// Number operator `n̂_k`.
    pub fn number(basis: &FockBasis, k: usize) -> Result<Self> {
        let occ = basis.mode_occupations(k)?;
        Ok(Observable::Measured(vec![MeasuredTerm::diagonal(
            occ.into_iter().map(|n| n as f64).collect(),
        )]))
    }

    /// `|state⟩⟨state|`
    pub fn projector(basis: &FockBasis, state: &FockState) -> Result<Self> {
        let idx = basis.index_of(state).ok_or(Error::PhotonMismatch {
            expected: basis.photons(),
            got: state.photons(),
        })?;
        let mut values = vec![0.0; basis.len()];
        values[idx] = 1.0;
        Ok(Observable::Measured(vec![MeasuredTerm::diagonal(values)]))
    }

    /// Range bound `λ = max |λ_j|` of a single-term observable, summed over terms.
    pub fn bound(&self) -> f64 {
        match self {
            Observable::Dense(m) => m.iter().map(|z| z.norm()).fold(0.0, f64::max) * m.nrows() as f64,
            Observable::Measured(terms) => terms.iter().map(MeasuredTerm::bound).sum(),
        }
    }

    pub fn num_terms(&self) -> usize {
        match self {
            Observable::Dense(_) => 1,
            Observable::Measured(terms) => terms.len(),
        }
    }

    /// Dense operator on `basis`. Post-selected terms have no linear form.
    pub fn to_dense(&self, basis: &FockBasis, caps: &Caps) -> Result<DMatrix<Complex64>> {
        match self {
            Observable::Dense(m) => Ok(m.clone()),
            Observable::Measured(terms) => {
                let d = basis.len();
                let mut total = DMatrix::<Complex64>::zeros(d, d);
                for term in terms {
                    if term.keep.is_some() {
                        return Err(Error::InvalidArgument("post-selected terms have no dense form".into()));
                    }
                    let rot = BoundCircuit::new(basis.modes(), term.rotation.clone()).unitary();
                    let r = fock_matrix(&rot, basis, caps)?;
                    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                        d,
                        term.values.iter().map(|&v| Complex64::new(v, 0.0)),
                    ));
                    total += r.adjoint() * diag * r;
                }
                Ok(total)
            }
        }
    }

    fn check_dims(&self, basis: &FockBasis) -> Result<()> {
        let bad = match self {
            Observable::Dense(m) => (m.nrows() != basis.len() || m.ncols() != basis.len())
                .then(|| format!("{}x{} observable", m.nrows(), m.ncols())),
            Observable::Measured(terms) => terms
                .iter()
                .find(|t| t.values.len() != basis.len() || t.keep.as_ref().is_some_and(|k| k.len() != basis.len()))
                .map(|t| format!("term with {} outcome values", t.values.len())),
        };
        match bad {
            Some(what) => Err(Error::Dimension(format!("{what} on a basis of {} states", basis.len()))),
            None => Ok(()),
        }
    }
}

/// An estimated expectation value and its cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    /// Real part; equals `complex.re`.
    pub value: f64,
    pub complex: Complex64,
    pub shots: u64,
    /// Circuit executions (one per measurement setting).
    pub evaluations: usize,
}

/// `⟨O⟩` for a Fock input through `circuit(theta)` under `noise`.
pub fn estimate_expectation(
    circuit: &ParamCircuit,
    theta: &[f64],
    input: &FockState,
    observable: &Observable,
    noise: &NoiseModel,
) -> Result<Estimate> {
    let ladder = PhotonLadder::new(input.photons(), circuit.modes())?;
    estimate_bound(&circuit.bind(theta)?, &ladder, input, observable, noise)
}

pub(crate) fn estimate_bound(
    bound: &BoundCircuit,
    ladder: &PhotonLadder,
    input: &FockState,
    observable: &Observable,
    noise: &NoiseModel,
) -> Result<Estimate> {
    noise.validate()?;
    let basis = ladder.top();
    observable.check_dims(basis)?;
    match observable {
        Observable::Dense(m) => {
            if !noise.shots.is_exact() {
                return Err(Error::NotDiagonalized);
            }
            if noise.hom_visibility != 1.0 {
                return Err(Error::DenseUnderDistinguishability);
            }
            let psi = evolve_fock_state(&bound.unitary(), basis, input)?;
            let value: Complex64 = psi
                .iter()
                .enumerate()
                .map(|(r, a)| a.conj() * psi.iter().enumerate().map(|(c, b)| m[(r, c)] * b).sum::<Complex64>())
                .sum();
            Ok(Estimate {
                value: value.re,
                complex: value,
                shots: 0,
                evaluations: 1,
            })
        }
        Observable::Measured(terms) => {
            let mut value = 0.0;
            let mut shots = 0;
            let u = bound.unitary();
            for (ti, term) in terms.iter().enumerate() {
                let rotated = if term.rotation.is_empty() {
                    u.clone()
                } else {
                    BoundCircuit::new(bound.modes(), term.rotation.clone())
                        .unitary()
                        .compose(&u)
                };
                let p = ladder.distribution(&rotated, input, noise.hom_visibility)?;
                value += match noise.shots {
                    Shots::Exact => term.exact_value(&p)?,
                    Shots::Finite(n) => {
                        let mut rng = noise.rng(&[ti as u64]);
                        let counts = multinomial(&p, n, &mut rng);
                        shots += n;
                        term.sampled_value(&counts, n)?
                    }
                };
            }
            Ok(Estimate {
                value,
                complex: Complex64::new(value, 0.0),
                shots,
                evaluations: terms.len(),
            })
        }
    }
}

/// Outcome distribution as seen through `noise`: exact, or the empirical
/// frequencies of `noise.shots` samples on stream `key`.
pub(crate) fn observed_distribution(
    bound: &BoundCircuit,
    ladder: &PhotonLadder,
    input: &FockState,
    noise: &NoiseModel,
    key: &[u64],
) -> Result<(Vec<f64>, u64)> {
    let p = ladder.distribution(&bound.unitary(), input, noise.hom_visibility)?;
    match noise.shots {
        Shots::Exact => Ok((p, 0)),
        Shots::Finite(n) => {
            let counts = multinomial(&p, n, &mut noise.rng(key));
            Ok((counts.iter().map(|&c| c as f64 / n as f64).collect(), n))
        }
    }
}

/// Counts of a sample as an ordered map, for diagnostics.
pub fn counts_by_state(record: &SampleRecord) -> HashMap<FockState, u64> {
    record
        .basis()
        .states()
        .iter()
        .cloned()
        .zip(record.counts().iter().copied())
        .filter(|(_, c)| *c > 0)
        .collect()
}
