//! Secular terms of the quartic interaction under a given tone set.
//!
//! A product of ladder operators and one tone component is secular when its
//! formal frequency, an integer combination of the mode frequencies, is
//! identically zero. Any other combination that vanishes numerically is an
//! accidental resonance and is reported as a commensurability error.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{NonlinearError, OptomechanicalParams};
use crate::tones::ToneSchedule;

/// Relative tolerance (of the largest frame frequency) for accidental resonances.
pub const COMMENSURABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DegeneracyClass {
    /// All four indices equal: self-Kerr and frequency shift.
    SelfKerr,
    /// One index thrice: population-assisted coupling corrections.
    PopulationAssisted,
    /// Two indices twice: cross-Kerr and spring corrections.
    CrossKerr,
    /// One index twice, two singletons: tone-assisted three-body terms.
    ToneAssisted,
}

impl DegeneracyClass {
    pub fn number(self) -> u8 {
        match self {
            DegeneracyClass::SelfKerr => 1,
            DegeneracyClass::PopulationAssisted => 2,
            DegeneracyClass::CrossKerr => 3,
            DegeneracyClass::ToneAssisted => 4,
        }
    }

    /// `None` for four distinct indices.
    pub fn of(indices: &[usize; 4]) -> Option<Self> {
        let mut counts: Vec<usize> = Vec::new();
        let mut sorted = *indices;
        sorted.sort_unstable();
        for w in sorted.chunk_by(|a, b| a == b) {
            counts.push(w.len());
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        match counts.as_slice() {
            [4] => Some(DegeneracyClass::SelfKerr),
            [3, 1] => Some(DegeneracyClass::PopulationAssisted),
            [2, 2] => Some(DegeneracyClass::CrossKerr),
            [2, 1, 1] => Some(DegeneracyClass::ToneAssisted),
            _ => None,
        }
    }
}

/// Normal-ordered monomial `prod a_c^dag prod a_a`, both lists sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub creation: Vec<usize>,
    pub annihilation: Vec<usize>,
}

impl Monomial {
    pub fn degree(&self) -> usize {
        self.creation.len() + self.annihilation.len()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return f.write_str("1");
        }
        let parts: Vec<String> = self
            .creation
            .iter()
            .map(|m| format!("a{m}\u{2020}"))
            .chain(self.annihilation.iter().map(|m| format!("a{m}")))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwaTerm {
    /// Sorted index multiset of the quartic coefficient.
    pub modes: [usize; 4],
    pub class: DegeneracyClass,
    /// Tone component `(tone index, sign)` of `e^{+-i(w t + phase)}`, or
    /// `None` for the unmodulated part.
    pub tone: Option<(usize, i8)>,
    pub monomial: Monomial,
    pub coefficient: Complex64,
    /// Number of index orderings summed into `coefficient`.
    pub orderings: usize,
}

/// Secular part of `(1/16) sum_{ijkl} alpha_{ijkl}(t) prod (a e^{-i w t} + h.c.)`,
/// normal ordered, with every index ordering of a multiset summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwaTermCatalog {
    pub frame_frequencies: Vec<f64>,
    pub terms: Vec<RwaTerm>,
}

impl RwaTermCatalog {
    pub fn class(&self, class: DegeneracyClass) -> impl Iterator<Item = &RwaTerm> {
        self.terms.iter().filter(move |t| t.class == class)
    }

    pub fn count(&self, class: DegeneracyClass) -> usize {
        self.class(class).count()
    }
}

/// Sparse integer combination of mode frequencies.
#[derive(Debug, Clone, Default)]
struct Formal(Vec<(usize, i64)>);

impl Formal {
    fn add(&mut self, mode: usize, c: i64) {
        match self.0.iter_mut().find(|e| e.0 == mode) {
            Some(e) => e.1 += c,
            None => self.0.push((mode, c)),
        }
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|e| e.1 == 0)
    }

    fn value(&self, nu: &[f64]) -> f64 {
        self.0.iter().map(|&(m, c)| c as f64 * nu[m]).sum()
    }

    fn dense(&self, n: usize) -> Vec<i64> {
        let mut v = vec![0; n];
        for &(m, c) in &self.0 {
            v[m] += c;
        }
        v
    }
}

/// Tone components: the unmodulated part plus `e^{+-i(w t + phase)}` per tone.
#[derive(Debug, Clone)]
pub(crate) struct Component {
    pub(crate) key: Option<(usize, i8)>,
    formal: Formal,
    pub(crate) weight: Complex64,
}

pub(crate) fn components(schedule: &ToneSchedule, n: usize) -> Vec<Component> {
    let mut out = vec![Component {
        key: None,
        formal: Formal::default(),
        weight: Complex64::new(1.0, 0.0),
    }];
    for (idx, tone) in schedule.tones.iter().enumerate() {
        if tone.depth == 0.0 {
            continue;
        }
        let f = tone.formal_frequency(n);
        for sign in [1i8, -1] {
            let mut formal = Formal::default();
            for (m, &c) in f.iter().enumerate() {
                if c != 0 {
                    formal.add(m, sign as i64 * c);
                }
            }
            out.push(Component {
                key: Some((idx, sign)),
                formal,
                weight: Complex64::from_polar(tone.depth / 2.0, sign as f64 * tone.phase),
            });
        }
    }
    out
}

struct Resonance<'a> {
    nu: &'a [f64],
    tolerance: f64,
}

impl Resonance<'_> {
    fn new(nu: &[f64]) -> Resonance<'_> {
        let scale = nu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Resonance {
            nu,
            tolerance: COMMENSURABILITY_TOLERANCE * scale,
        }
    }

    /// `Ok(true)` when secular, `Ok(false)` when rotating, `Err` when accidental.
    fn secular(&self, formal: &Formal) -> Result<bool, NonlinearError> {
        if formal.is_zero() {
            return Ok(true);
        }
        let mismatch = formal.value(self.nu);
        if mismatch.abs() <= self.tolerance {
            let mut relation = formal.dense(self.nu.len());
            if relation.iter().find(|c| **c != 0).is_some_and(|c| *c < 0) {
                relation.iter_mut().for_each(|c| *c = -*c);
            }
            return Err(NonlinearError::Commensurate {
                relation,
                mismatch: mismatch.abs(),
            });
        }
        Ok(false)
    }
}

fn frame_frequencies(
    params: &OptomechanicalParams,
    schedule: &ToneSchedule,
) -> Result<Vec<f64>, NonlinearError> {
    let nu = schedule.frame_frequencies();
    if nu.len() != params.n_modes() {
        return Err(NonlinearError::InvalidParams(format!(
            "schedule has {} oscillators for {} modes",
            nu.len(),
            params.n_modes()
        )));
    }
    Ok(nu)
}

/// Normal-orders a word of `(mode, dagger)` operators using `[a_i, a_j^dag] = delta_ij`.
fn normal_order(word: &[(usize, bool)], out: &mut BTreeMap<Monomial, i64>, weight: i64) {
    if let Some(i) = (0..word.len().saturating_sub(1)).find(|&i| !word[i].1 && word[i + 1].1) {
        let mut swapped = word.to_vec();
        swapped.swap(i, i + 1);
        normal_order(&swapped, out, weight);
        if word[i].0 == word[i + 1].0 {
            let contracted: Vec<(usize, bool)> =
                word[..i].iter().chain(&word[i + 2..]).copied().collect();
            normal_order(&contracted, out, weight);
        }
        return;
    }
    let mut creation: Vec<usize> = word.iter().filter(|o| o.1).map(|o| o.0).collect();
    let mut annihilation: Vec<usize> = word.iter().filter(|o| !o.1).map(|o| o.0).collect();
    creation.sort_unstable();
    annihilation.sort_unstable();
    *out.entry(Monomial {
        creation,
        annihilation,
    })
    .or_insert(0) += weight;
}

type TermKey = ([usize; 4], Option<(usize, i8)>, Monomial);

/// Builds the secular quartic Hamiltonian for the modes in `params` under the
/// tones (and rotating frames) of `schedule`.
pub fn build_rwa_catalog(
    params: &OptomechanicalParams,
    schedule: &ToneSchedule,
) -> Result<RwaTermCatalog, NonlinearError> {
    params.validate()?;
    let n = params.n_modes();
    let nu = frame_frequencies(params, schedule)?;
    let resonance = Resonance::new(&nu);
    let comps = components(schedule, n);

    let mut acc: BTreeMap<TermKey, (Complex64, usize)> = BTreeMap::new();
    let mut orderings: BTreeMap<[usize; 4], usize> = BTreeMap::new();
    for flat in 0..n.pow(4) {
        let idx = [
            flat / (n * n * n),
            (flat / (n * n)) % n,
            (flat / n) % n,
            flat % n,
        ];
        let mut sorted = idx;
        sorted.sort_unstable();
        *orderings.entry(sorted).or_insert(0) += 1;
        let alpha = params.quartic_coefficient(idx);
        for daggers in 0..16u32 {
            let word: Vec<(usize, bool)> =
                (0..4).map(|s| (idx[s], daggers >> s & 1 == 1)).collect();
            for comp in &comps {
                let mut formal = comp.formal.clone();
                for &(m, dag) in &word {
                    formal.add(m, if dag { 1 } else { -1 });
                }
                if !resonance.secular(&formal)? {
                    continue;
                }
                let mut expanded = BTreeMap::new();
                normal_order(&word, &mut expanded, 1);
                for (monomial, count) in expanded {
                    let c = comp.weight * (alpha / 16.0 * count as f64);
                    let e = acc
                        .entry((sorted, comp.key, monomial))
                        .or_insert((Complex64::new(0.0, 0.0), 0));
                    e.0 += c;
                }
            }
        }
    }
    let mut terms = Vec::new();
    for ((modes, tone, monomial), (coefficient, _)) in acc {
        if coefficient == Complex64::new(0.0, 0.0) {
            continue;
        }
        let class = DegeneracyClass::of(&modes).ok_or_else(|| {
            NonlinearError::Precondition(format!(
                "secular term with four distinct indices {modes:?}"
            ))
        })?;
        terms.push(RwaTerm {
            modes,
            class,
            tone,
            monomial,
            coefficient,
            orderings: orderings[&modes],
        });
    }
    Ok(RwaTermCatalog {
        frame_frequencies: nu,
        terms,
    })
}

/// Secular part of the cubic force in envelope form:
/// `da_target/dt += coefficient * prod_f (a_f or conj(a_f))`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ForceTerm {
    pub(crate) target: usize,
    pub(crate) coefficient: Complex64,
    /// `(mode, conjugated)`.
    pub(crate) factors: [(usize, bool); 3],
}

/// Averages `-c_i m(t) (sum_j g0_j z_j)^3` with
/// `z_j = a_j e^{-i nu_j t} + c.c.` and projects onto `e^{-i nu_i t}`:
/// `da_i/dt = i / (2 nu_i) [F_i]`.
pub(crate) fn envelope_force_terms(
    params: &OptomechanicalParams,
    schedule: &ToneSchedule,
    scale: f64,
) -> Result<Vec<ForceTerm>, NonlinearError> {
    let n = params.n_modes();
    let nu = frame_frequencies(params, schedule)?;
    let resonance = Resonance::new(&nu);
    let comps = components(schedule, n);
    let g = &params.vacuum_couplings;

    let mut acc: BTreeMap<(usize, [(usize, bool); 3]), Complex64> = BTreeMap::new();
    for i in 0..n {
        let pre = Complex64::new(0.0, 1.0 / (2.0 * nu[i])) * (-params.cubic_prefactor(i) * scale);
        for flat in 0..(2 * n).pow(3) {
            let slot = |s: u32| {
                let v = flat / (2 * n).pow(s) % (2 * n);
                (v / 2, v % 2 == 1)
            };
            let factors = [slot(0), slot(1), slot(2)];
            let weight = factors.iter().map(|f| g[f.0]).product::<f64>();
            if weight == 0.0 {
                continue;
            }
            for comp in &comps {
                let mut formal = comp.formal.clone();
                formal.add(i, 1);
                for &(m, conj) in &factors {
                    formal.add(m, if conj { 1 } else { -1 });
                }
                if !resonance.secular(&formal)? {
                    continue;
                }
                let mut key = factors;
                key.sort_unstable();
                *acc.entry((i, key)).or_insert(Complex64::new(0.0, 0.0)) +=
                    pre * comp.weight * weight;
            }
        }
    }
    Ok(acc
        .into_iter()
        .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
        .map(|((target, factors), coefficient)| ForceTerm {
            target,
            coefficient,
            factors,
        })
        .collect())
}
