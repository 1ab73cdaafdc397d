//! Combination rules: Dempster–Shafer fusion and reliability-discounted
//! aggregation of opinions.
//!
//! Two DS implementations live here on purpose. [`ds_combine_pair`] /
//! [`ds_combine_many`] work on the restricted frame this crate actually uses
//! (singleton focal elements plus the full frame Θ, which is exactly the shape
//! of a subjective-logic opinion). The [`setwise`] submodule implements the
//! general rule over arbitrary focal subsets via bitmasks; it is slower but
//! assumption-free, so it doubles as an independent cross-check and powers the
//! demo that replays sequential fusion step by step.
//!
//! Discount fusion combines per-view opinions weighted by learnable
//! reliabilities `γ_v = σ(ρ_v)`: either pairwise on opinions
//! ([`discount_aggregate_pair`]) or, equivalently for equal weights, as a
//! weighted average of evidence vectors ([`discount_fuse_views`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opinion::{Evidence, Opinion};

const MASS_TOL: f64 = 1e-9;

/// A basic belief assignment restricted to singleton focal elements plus the
/// whole frame Θ. `singleton[k]` is the mass on class `k`, `theta` the mass
/// on Θ; together they sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Bba {
    singleton: Vec<f64>,
    theta: f64,
}

impl Bba {
    pub fn new(singleton: Vec<f64>, theta: f64) -> Result<Self> {
        if singleton.len() < 2 {
            return Err(Error::FrameTooSmall {
                got: singleton.len(),
            });
        }
        for (i, &m) in singleton.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::NonFinite {
                    context: "bba mass".into(),
                });
            }
            if m < 0.0 {
                return Err(Error::Negative {
                    context: "bba mass".into(),
                    index: i,
                    value: m,
                });
            }
        }
        if !theta.is_finite() {
            return Err(Error::NonFinite {
                context: "bba theta mass".into(),
            });
        }
        if theta < 0.0 {
            return Err(Error::Negative {
                context: "bba theta mass".into(),
                index: singleton.len(),
                value: theta,
            });
        }
        let sum = singleton.iter().sum::<f64>() + theta;
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::NotNormalized {
                context: "bba mass".into(),
                sum,
            });
        }
        Ok(Bba { singleton, theta })
    }

    /// All mass on Θ: the neutral element of Dempster's rule.
    pub fn vacuous(k: usize) -> Result<Self> {
        Bba::new(vec![0.0; k], 1.0)
    }

    /// Reads an opinion as a BBA (`b` on singletons, `u` on Θ).
    pub fn from_opinion(w: &Opinion) -> Self {
        Bba {
            singleton: w.belief().to_vec(),
            theta: w.uncertainty(),
        }
    }

    /// Reads the BBA back as an opinion with the given base rates.
    pub fn to_opinion(&self, base_rate: &[f64]) -> Result<Opinion> {
        Opinion::new(self.singleton.clone(), self.theta, base_rate.to_vec())
    }

    pub fn num_classes(&self) -> usize {
        self.singleton.len()
    }

    pub fn singleton(&self) -> &[f64] {
        &self.singleton
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Unnormalized combination: conjunctive products that land on each singleton
/// and on Θ. Returns `(numerators, theta_numerator, total)` where
/// `total = 1 − conflict`.
fn ds_products(m1: &Bba, m2: &Bba) -> Result<(Vec<f64>, f64, f64)> {
    let k = m1.num_classes();
    if m2.num_classes() != k {
        return Err(Error::dim("ds combination", k, m2.num_classes()));
    }
    let mut n = Vec::with_capacity(k);
    for i in 0..k {
        n.push(
            m1.singleton[i] * m2.singleton[i]
                + m1.singleton[i] * m2.theta
                + m2.singleton[i] * m1.theta,
        );
    }
    let n_theta = m1.theta * m2.theta;
    let total = n.iter().sum::<f64>() + n_theta;
    Ok((n, n_theta, total))
}

/// Degree of conflict `C = Σ_{i≠j} m1({i}) m2({j})` between two BBAs.
pub fn ds_conflict(m1: &Bba, m2: &Bba) -> Result<f64> {
    let (_, _, total) = ds_products(m1, m2)?;
    Ok(1.0 - total)
}

/// Dempster's rule for two BBAs on the singleton+Θ frame.
///
/// Errors with [`Error::TotalConflict`] when every conjunctive product lands
/// on the empty set (conflict = 1), where the rule is undefined.
pub fn ds_combine_pair(m1: &Bba, m2: &Bba) -> Result<Bba> {
    let (n, n_theta, total) = ds_products(m1, m2)?;
    if total <= 0.0 {
        return Err(Error::TotalConflict);
    }
    Bba::new(n.iter().map(|v| v / total).collect(), n_theta / total)
}

/// Left fold of [`ds_combine_pair`] over one or more sources.
pub fn ds_combine_many(sources: &[Bba]) -> Result<Bba> {
    let first = sources.first().ok_or_else(|| Error::EmptyInput {
        context: "ds combination sources".into(),
    })?;
    let mut acc = first.clone();
    for m in &sources[1..] {
        acc = ds_combine_pair(&acc, m)?;
    }
    Ok(acc)
}

/// General Dempster–Shafer combination over arbitrary focal subsets.
///
/// Focal elements are bitmasks over a frame of up to 20 classes, masses live
/// in a sorted map so iteration (and therefore floating-point summation
/// order) is deterministic. Quadratic in the number of focal elements; fine
/// for demos and cross-checks, not for the training loop.
pub mod setwise {
    use std::collections::BTreeMap;

    use super::Bba;
    use crate::error::{Error, Result};

    /// Practical cap so subsets fit comfortably in a `u32` bitmask.
    const MAX_FRAME: usize = 20;

    /// A BBA with arbitrary focal subsets.
    #[derive(Debug, Clone, PartialEq)]
    pub struct SetBba {
        frame_size: usize,
        masses: BTreeMap<u32, f64>,
    }

    impl SetBba {
        pub fn new(frame_size: usize) -> Result<Self> {
            if frame_size < 2 {
                return Err(Error::FrameTooSmall { got: frame_size });
            }
            if frame_size > MAX_FRAME {
                return Err(Error::InvalidParameter {
                    name: "frame_size",
                    reason: format!("at most {MAX_FRAME} classes supported, got {frame_size}"),
                });
            }
            Ok(SetBba {
                frame_size,
                masses: BTreeMap::new(),
            })
        }

        pub fn frame_size(&self) -> usize {
            self.frame_size
        }

        /// Bitmask of the full frame Θ.
        pub fn theta_mask(&self) -> u32 {
            (1u32 << self.frame_size) - 1
        }

        /// Adds mass to a focal subset (empty set not allowed).
        pub fn set_mass(&mut self, subset: u32, mass: f64) -> Result<()> {
            if subset == 0 || subset > self.theta_mask() {
                return Err(Error::InvalidParameter {
                    name: "subset",
                    reason: format!(
                        "focal element {subset:#b} outside non-empty subsets of a {}-class frame",
                        self.frame_size
                    ),
                });
            }
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "mass",
                    reason: format!("mass must be finite and non-negative, got {mass}"),
                });
            }
            if mass > 0.0 {
                *self.masses.entry(subset).or_insert(0.0) += mass;
            }
            Ok(())
        }

        pub fn mass(&self, subset: u32) -> f64 {
            self.masses.get(&subset).copied().unwrap_or(0.0)
        }

        pub fn focal_elements(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
            self.masses.iter().map(|(&s, &m)| (s, m))
        }

        fn check_normalized(&self) -> Result<()> {
            let sum: f64 = self.masses.values().sum();
            if (sum - 1.0).abs() > super::MASS_TOL {
                return Err(Error::NotNormalized {
                    context: "setwise bba mass".into(),
                    sum,
                });
            }
            Ok(())
        }

        /// Dempster's rule by brute-force enumeration of focal pairs.
        pub fn combine(&self, other: &SetBba) -> Result<SetBba> {
            if other.frame_size != self.frame_size {
                return Err(Error::dim(
                    "setwise combination",
                    self.frame_size,
                    other.frame_size,
                ));
            }
            self.check_normalized()?;
            other.check_normalized()?;
            let mut products: BTreeMap<u32, f64> = BTreeMap::new();
            let mut total = 0.0;
            for (s1, m1) in self.focal_elements() {
                for (s2, m2) in other.focal_elements() {
                    let inter = s1 & s2;
                    let product = m1 * m2;
                    if inter != 0 {
                        *products.entry(inter).or_insert(0.0) += product;
                        total += product;
                    }
                }
            }
            if total <= 0.0 {
                return Err(Error::TotalConflict);
            }
            let mut out = SetBba::new(self.frame_size)?;
            for (subset, mass) in products {
                out.set_mass(subset, mass / total)?;
            }
            Ok(out)
        }

        /// Conflict mass `C` between two BBAs (products landing on ∅).
        pub fn conflict(&self, other: &SetBba) -> Result<f64> {
            if other.frame_size != self.frame_size {
                return Err(Error::dim(
                    "setwise combination",
                    self.frame_size,
                    other.frame_size,
                ));
            }
            let mut c = 0.0;
            for (s1, m1) in self.focal_elements() {
                for (s2, m2) in other.focal_elements() {
                    if s1 & s2 == 0 {
                        c += m1 * m2;
                    }
                }
            }
            Ok(c)
        }

        pub fn from_bba(bba: &Bba) -> Result<SetBba> {
            let mut out = SetBba::new(bba.num_classes())?;
            for (i, &m) in bba.singleton().iter().enumerate() {
                out.set_mass(1 << i, m)?;
            }
            out.set_mass(out.theta_mask(), bba.theta())?;
            Ok(out)
        }

        /// Converts back to the restricted form; errors if any mass sits on a
        /// subset that is neither a singleton nor Θ.
        pub fn to_bba(&self) -> Result<Bba> {
            let mut singleton = vec![0.0; self.frame_size];
            let mut theta = 0.0;
            for (subset, mass) in self.focal_elements() {
                if subset == self.theta_mask() {
                    theta = mass;
                } else if subset.count_ones() == 1 {
                    singleton[subset.trailing_zeros() as usize] = mass;
                } else {
                    return Err(Error::InvalidParameter {
                        name: "subset",
                        reason: format!(
                            "mass {mass} on compound focal element {subset:#b} has no restricted form"
                        ),
                    });
                }
            }
            Bba::new(singleton, theta)
        }
    }
}

/// Learnable per-view reliabilities, stored as unconstrained logits `ρ_v` and
/// exposed as discounts `γ_v = σ(ρ_v) ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    rho: Vec<f64>,
}

impl FusionWeights {
    /// `ρ = 0` for every view, i.e. all discounts start at 0.5.
    pub fn new(n_views: usize) -> Result<Self> {
        if n_views == 0 {
            return Err(Error::EmptyInput {
                context: "fusion weights".into(),
            });
        }
        Ok(FusionWeights {
            rho: vec![0.0; n_views],
        })
    }

    pub fn from_rho(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::EmptyInput {
                context: "fusion weights".into(),
            });
        }
        if rho.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite {
                context: "fusion weights".into(),
            });
        }
        Ok(FusionWeights { rho })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub(crate) fn rho_mut(&mut self) -> &mut [f64] {
        &mut self.rho
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.rho.iter().map(|&r| logistic(r)).collect()
    }
}

/// Numerically stable logistic `σ(x) = 1 / (1 + e^{-x})`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("discount must lie in (0, 1], got {gamma}"),
        });
    }
    Ok(())
}

/// Reliability-discounted aggregation of two opinions.
///
/// Beliefs are cross-weighted by the other side's uncertainty and discounted
/// by `γ`, the fused uncertainty starts from the harmonic mean of the pair's
/// uncertainties, and any mass removed by discounting is reassigned to
/// uncertainty so the result stays a valid opinion:
///
/// ```text
/// b_k = (γ^A b^A_k u^B + γ^B b^B_k u^A) / (u^A + u^B)
/// u   = 2 u^A u^B / (u^A + u^B) + deficit,   deficit = 1 − Σ b − u_harm
/// a_k ∝ γ^A a^A_k + γ^B a^B_k
/// ```
///
/// Undefined when both opinions are dogmatic (`u^A = u^B = 0`).
pub fn discount_aggregate_pair(
    wa: &Opinion,
    wb: &Opinion,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<Opinion> {
    let k = wa.len();
    if wb.len() != k {
        return Err(Error::dim("discount aggregation", k, wb.len()));
    }
    check_gamma(gamma_a)?;
    check_gamma(gamma_b)?;
    let (ua, ub) = (wa.uncertainty(), wb.uncertainty());
    let denom = ua + ub;
    if denom <= 0.0 {
        return Err(Error::ZeroUncertainty {
            context: "discount aggregation of two dogmatic opinions".into(),
        });
    }
    let belief: Vec<f64> = (0..k)
        .map(|i| (gamma_a * wa.belief()[i] * ub + gamma_b * wb.belief()[i] * ua) / denom)
        .collect();
    let u_harm = 2.0 * ua * ub / denom;
    let deficit = 1.0 - belief.iter().sum::<f64>() - u_harm;
    let base_rate: Vec<f64> = {
        let raw: Vec<f64> = (0..k)
            .map(|i| gamma_a * wa.base_rate()[i] + gamma_b * wb.base_rate()[i])
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|a| a / sum).collect()
    };
    Opinion::new(belief, u_harm + deficit, base_rate)
}

/// Discount-weighted average of per-view evidence: `ē_k = (1/V) Σ_v γ_v e^v_k`.
///
/// For `γ = 1` everywhere and two views this matches
/// [`discount_aggregate_pair`] on the corresponding opinions exactly.
pub fn discount_fuse_views(views: &[Evidence], gammas: &[f64]) -> Result<Evidence> {
    let first = views.first().ok_or_else(|| Error::EmptyInput {
        context: "evidence fusion".into(),
    })?;
    if gammas.len() != views.len() {
        return Err(Error::dim("fusion discounts", views.len(), gammas.len()));
    }
    for &g in gammas {
        check_gamma(g)?;
    }
    let k = first.len();
    let mut fused = vec![0.0; k];
    for (e, &g) in views.iter().zip(gammas) {
        if e.len() != k {
            return Err(Error::dim("evidence fusion", k, e.len()));
        }
        for (acc, &v) in fused.iter_mut().zip(e.values()) {
            *acc += g * v;
        }
    }
    let v = views.len() as f64;
    Evidence::new(fused.into_iter().map(|x| x / v).collect())
}

/// Plain evidence average: discount fusion with every `γ_v = 1`.
pub fn naive_fuse(views: &[Evidence]) -> Result<Evidence> {
    discount_fuse_views(views, &vec![1.0; views.len()])
}

/// Dempster-combines opinions directly (belief → singleton mass, uncertainty
/// → Θ); base rates of the inputs are averaged.
pub fn ds_fuse_opinions(opinions: &[Opinion]) -> Result<Opinion> {
    let first = opinions.first().ok_or_else(|| Error::EmptyInput {
        context: "opinion fusion".into(),
    })?;
    let k = first.len();
    let bbas: Vec<Bba> = opinions.iter().map(Bba::from_opinion).collect();
    let fused = ds_combine_many(&bbas)?;
    let mut base_rate = vec![0.0; k];
    for w in opinions {
        if w.len() != k {
            return Err(Error::dim("opinion fusion", k, w.len()));
        }
        for (acc, &a) in base_rate.iter_mut().zip(w.base_rate()) {
            *acc += a;
        }
    }
    let sum: f64 = base_rate.iter().sum();
    fused.to_opinion(&base_rate.iter().map(|a| a / sum).collect::<Vec<_>>())
}

/// Forward pass of a left-to-right Dempster fold over `(belief, uncertainty)`
/// pairs, with enough cached state to run reverse-mode differentiation.
///
/// The fold is a composition of smooth rational maps (products normalized by
/// `1 − conflict`), so gradients exist wherever no step hits total conflict —
/// which cannot happen when every input has `u > 0`.
#[derive(Debug, Clone)]
pub struct DsFold {
    inputs: Vec<(Vec<f64>, f64)>,
    /// Running fold state; `states[i]` combines inputs `0..=i`.
    states: Vec<(Vec<f64>, f64)>,
    /// Normalizer `1 − conflict` of each combination step (`totals[0]` unused).
    totals: Vec<f64>,
}

impl DsFold {
    pub fn new(inputs: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let first = inputs.first().ok_or_else(|| Error::EmptyInput {
            context: "ds fold".into(),
        })?;
        let k = first.0.len();
        if k < 2 {
            return Err(Error::FrameTooSmall { got: k });
        }
        for (b, u) in &inputs {
            if b.len() != k {
                return Err(Error::dim("ds fold", k, b.len()));
            }
            if b.iter().any(|x| !x.is_finite()) || !u.is_finite() {
                return Err(Error::NonFinite {
                    context: "ds fold input".into(),
                });
            }
        }
        let mut states = Vec::with_capacity(inputs.len());
        let mut totals = Vec::with_capacity(inputs.len());
        states.push(inputs[0].clone());
        totals.push(1.0);
        for (b2, u2) in &inputs[1..] {
            let (b1, u1) = states.last().unwrap();
            let mut n = Vec::with_capacity(k);
            for i in 0..k {
                n.push(b1[i] * b2[i] + b1[i] * u2 + b2[i] * u1);
            }
            let n_theta = u1 * u2;
            let total = n.iter().sum::<f64>() + n_theta;
            if total <= 0.0 {
                return Err(Error::TotalConflict);
            }
            states.push((n.iter().map(|v| v / total).collect(), n_theta / total));
            totals.push(total);
        }
        Ok(DsFold {
            inputs,
            states,
            totals,
        })
    }

    /// Fused belief vector.
    pub fn belief(&self) -> &[f64] {
        &self.states.last().unwrap().0
    }

    /// Fused uncertainty mass.
    pub fn uncertainty(&self) -> f64 {
        self.states.last().unwrap().1
    }

    /// Pulls a cotangent on the fold output back to every input.
    ///
    /// `d_belief` / `d_uncertainty` are `∂L/∂b_out`, `∂L/∂u_out`; the return
    /// value holds `(∂L/∂b_v, ∂L/∂u_v)` for each input `v` in order.
    pub fn backward(&self, d_belief: &[f64], d_uncertainty: f64) -> Result<Vec<(Vec<f64>, f64)>> {
        let k = self.inputs[0].0.len();
        if d_belief.len() != k {
            return Err(Error::dim("ds fold cotangent", k, d_belief.len()));
        }
        let v = self.inputs.len();
        let mut grads = vec![(vec![0.0; k], 0.0); v];
        let mut cot_b = d_belief.to_vec();
        let mut cot_u = d_uncertainty;
        for i in (1..v).rev() {
            let (prev_b, prev_u) = &self.states[i - 1];
            let (in_b, in_u) = &self.inputs[i];
            let (out_b, out_u) = &self.states[i];
            let total = self.totals[i];
            // d/d(numerator) of n ↦ n / Σn: deflate by the weighted mean.
            let dot: f64 = cot_b.iter().zip(out_b).map(|(c, o)| c * o).sum::<f64>() + cot_u * out_u;
            let dn: Vec<f64> = cot_b.iter().map(|c| (c - dot) / total).collect();
            let dn_theta = (cot_u - dot) / total;
            let mut d_prev_b = vec![0.0; k];
            let mut d_prev_u = dn_theta * in_u;
            let mut d_in_b = vec![0.0; k];
            let mut d_in_u = dn_theta * prev_u;
            for j in 0..k {
                d_prev_b[j] = dn[j] * (in_b[j] + in_u);
                d_in_b[j] = dn[j] * (prev_b[j] + prev_u);
                d_prev_u += dn[j] * in_b[j];
                d_in_u += dn[j] * prev_b[j];
            }
            grads[i] = (d_in_b, d_in_u);
            cot_b = d_prev_b;
            cot_u = d_prev_u;
        }
        grads[0] = (cot_b, cot_u);
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_difference_gradient;
    use crate::opinion::uniform_base_rate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol,
            "got {got}, want {want} (diff {})",
            (got - want).abs()
        );
    }

    fn bba(singleton: &[f64], theta: f64) -> Bba {
        Bba::new(singleton.to_vec(), theta).unwrap()
    }

    /// Three-class sources used by the sequential-fusion demo; the last
    /// entry of each row is the Θ mass.
    fn demo_sources() -> Vec<Bba> {
        [
            ([0.7, 0.1, 0.1], 0.1),
            ([0.6, 0.2, 0.1], 0.1),
            ([0.8, 0.1, 0.05], 0.05),
            ([0.1, 0.8, 0.05], 0.05),
            ([0.1, 0.1, 0.7], 0.1),
        ]
        .iter()
        .map(|(m, t)| bba(m, *t))
        .collect()
    }

    #[test]
    fn pairwise_combination_hand_values() {
        // First two demo sources: conflict 0.36, normalizer 0.64, masses
        // (0.55, 0.05, 0.03, 0.01) / 0.64.
        let sources = demo_sources();
        assert_close(ds_conflict(&sources[0], &sources[1]).unwrap(), 0.36, 1e-12);
        let fused = ds_combine_pair(&sources[0], &sources[1]).unwrap();
        assert_close(fused.singleton()[0], 0.859375, 1e-12);
        assert_close(fused.singleton()[1], 0.078125, 1e-12);
        assert_close(fused.singleton()[2], 0.046875, 1e-12);
        assert_close(fused.theta(), 0.015625, 1e-12);
    }

    #[test]
    fn vacuous_is_neutral() {
        let m = bba(&[0.5, 0.2, 0.1], 0.2);
        let id = Bba::vacuous(3).unwrap();
        let fused = ds_combine_pair(&m, &id).unwrap();
        for (a, b) in fused.singleton().iter().zip(m.singleton()) {
            assert_close(*a, *b, 1e-15);
        }
        assert_close(fused.theta(), m.theta(), 1e-15);
    }

    #[test]
    fn total_conflict_errors() {
        let m1 = bba(&[1.0, 0.0], 0.0);
        let m2 = bba(&[0.0, 1.0], 0.0);
        assert!(matches!(
            ds_combine_pair(&m1, &m2),
            Err(Error::TotalConflict)
        ));
        assert_close(ds_conflict(&m1, &m2).unwrap(), 1.0, 0.0);
    }

    #[test]
    fn restricted_matches_setwise_on_demo_chain() {
        // Fold all five demo sources, cross-checking the restricted
        // implementation against the general one after every step.
        let sources = demo_sources();
        let mut acc = sources[0].clone();
        let mut set_acc = setwise::SetBba::from_bba(&sources[0]).unwrap();
        for m in &sources[1..] {
            acc = ds_combine_pair(&acc, m).unwrap();
            set_acc = set_acc.combine(&setwise::SetBba::from_bba(m).unwrap()).unwrap();
            let set_bba = set_acc.to_bba().unwrap();
            for (a, b) in acc.singleton().iter().zip(set_bba.singleton()) {
                assert_close(*a, *b, 1e-12);
            }
            assert_close(acc.theta(), set_bba.theta(), 1e-12);
            let sum = acc.singleton().iter().sum::<f64>() + acc.theta();
            assert_close(sum, 1.0, 1e-12);
        }
    }

    #[test]
    fn setwise_compound_focal_elements_hand_example() {
        // m1 = {A}: 0.6, {A,B}: 0.4;  m2 = {B}: 0.5, Θ: 0.5 over {A,B,C}.
        // Conflict = m1({A})·m2({B}) = 0.3; normalized masses:
        // {A}: 0.3/0.7, {B}: 0.2/0.7, {A,B}: 0.2/0.7.
        let mut m1 = setwise::SetBba::new(3).unwrap();
        m1.set_mass(0b001, 0.6).unwrap();
        m1.set_mass(0b011, 0.4).unwrap();
        let mut m2 = setwise::SetBba::new(3).unwrap();
        m2.set_mass(0b010, 0.5).unwrap();
        m2.set_mass(0b111, 0.5).unwrap();
        assert_close(m1.conflict(&m2).unwrap(), 0.3, 1e-15);
        let fused = m1.combine(&m2).unwrap();
        assert_close(fused.mass(0b001), 3.0 / 7.0, 1e-12);
        assert_close(fused.mass(0b010), 2.0 / 7.0, 1e-12);
        assert_close(fused.mass(0b011), 2.0 / 7.0, 1e-12);
        // A compound focal element has no restricted-form equivalent.
        assert!(fused.to_bba().is_err());
    }

    #[test]
    fn setwise_rejects_bad_subsets() {
        let mut m = setwise::SetBba::new(3).unwrap();
        assert!(m.set_mass(0, 0.5).is_err());
        assert!(m.set_mass(0b1000, 0.5).is_err());
        assert!(m.set_mass(0b001, -0.1).is_err());
        assert!(setwise::SetBba::new(1).is_err());
        assert!(setwise::SetBba::new(21).is_err());
    }

    #[test]
    fn discount_aggregation_hand_values() {
        // Opposing opinions from e = (4,0) and (0,4); with γ = 1 the fused
        // opinion matches the evidence average, with γ_a = 0.5 half of A's
        // belief mass moves to uncertainty.
        let wa = Evidence::new(vec![4.0, 0.0])
            .unwrap()
            .to_opinion(&uniform_base_rate(2))
            .unwrap();
        let wb = Evidence::new(vec![0.0, 4.0])
            .unwrap()
            .to_opinion(&uniform_base_rate(2))
            .unwrap();

        let full = discount_aggregate_pair(&wa, &wb, 1.0, 1.0).unwrap();
        assert_close(full.belief()[0], 1.0 / 3.0, 1e-12);
        assert_close(full.belief()[1], 1.0 / 3.0, 1e-12);
        assert_close(full.uncertainty(), 1.0 / 3.0, 1e-12);

        let half = discount_aggregate_pair(&wa, &wb, 0.5, 1.0).unwrap();
        assert_close(half.belief()[0], 1.0 / 6.0, 1e-12);
        assert_close(half.belief()[1], 1.0 / 3.0, 1e-12);
        assert_close(half.uncertainty(), 0.5, 1e-12);
    }

    #[test]
    fn discount_pair_matches_evidence_average_at_full_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let k = rng.gen_range(2..5);
            let ea: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..20.0)).collect();
            let eb: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..20.0)).collect();
            let ea = Evidence::new(ea).unwrap();
            let eb = Evidence::new(eb).unwrap();
            let a = uniform_base_rate(k);
            let pairwise = discount_aggregate_pair(
                &ea.to_opinion(&a).unwrap(),
                &eb.to_opinion(&a).unwrap(),
                1.0,
                1.0,
            )
            .unwrap();
            let averaged = naive_fuse(&[ea, eb]).unwrap().to_opinion(&a).unwrap();
            for (x, y) in pairwise.belief().iter().zip(averaged.belief()) {
                assert_close(*x, *y, 1e-9);
            }
            assert_close(pairwise.uncertainty(), averaged.uncertainty(), 1e-9);
        }
    }

    #[test]
    fn fused_uncertainty_is_harmonic_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = rng.gen_range(2..5);
            let ea: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..30.0)).collect();
            let eb: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..30.0)).collect();
            let a = uniform_base_rate(k);
            let wa = Evidence::new(ea).unwrap().to_opinion(&a).unwrap();
            let wb = Evidence::new(eb).unwrap().to_opinion(&a).unwrap();
            let (ua, ub) = (wa.uncertainty(), wb.uncertainty());
            let fused = discount_aggregate_pair(&wa, &wb, 1.0, 1.0).unwrap();
            let harm = 2.0 * ua * ub / (ua + ub);
            assert_close(fused.uncertainty(), harm, 1e-12);
            if (ua - ub).abs() > 1e-12 {
                let (lo, hi) = (ua.min(ub), ua.max(ub));
                assert!(fused.uncertainty() > lo && fused.uncertainty() < hi);
            }
        }
    }

    #[test]
    fn dogmatic_pair_is_rejected() {
        let wa = Opinion::new(vec![1.0, 0.0], 0.0, uniform_base_rate(2)).unwrap();
        let wb = Opinion::new(vec![0.0, 1.0], 0.0, uniform_base_rate(2)).unwrap();
        assert!(matches!(
            discount_aggregate_pair(&wa, &wb, 1.0, 1.0),
            Err(Error::ZeroUncertainty { .. })
        ));
    }

    #[test]
    fn lower_discount_moves_mass_to_uncertainty() {
        let wa = Evidence::new(vec![8.0, 1.0])
            .unwrap()
            .to_opinion(&uniform_base_rate(2))
            .unwrap();
        let wb = Evidence::new(vec![1.0, 6.0])
            .unwrap()
            .to_opinion(&uniform_base_rate(2))
            .unwrap();
        let mut prev_b0 = f64::INFINITY;
        let mut prev_u = -f64::INFINITY;
        for gamma_a in [1.0, 0.7, 0.4, 0.1] {
            let fused = discount_aggregate_pair(&wa, &wb, gamma_a, 1.0).unwrap();
            assert!(fused.belief()[0] < prev_b0);
            assert!(fused.uncertainty() > prev_u);
            prev_b0 = fused.belief()[0];
            prev_u = fused.uncertainty();
        }
    }

    #[test]
    fn gamma_bounds_are_enforced() {
        let w = Opinion::vacuous(2).unwrap();
        for bad in [0.0, -0.2, 1.2, f64::NAN] {
            assert!(discount_aggregate_pair(&w, &w, bad, 1.0).is_err());
            assert!(discount_fuse_views(
                &[Evidence::zeros(2).unwrap(), Evidence::zeros(2).unwrap()],
                &[bad, 1.0]
            )
            .is_err());
        }
    }

    #[test]
    fn weighted_evidence_average_values() {
        let e1 = Evidence::new(vec![4.0, 0.0]).unwrap();
        let e2 = Evidence::new(vec![0.0, 2.0]).unwrap();
        let fused = discount_fuse_views(&[e1, e2], &[0.5, 1.0]).unwrap();
        assert_eq!(fused.values(), &[1.0, 1.0]);
    }

    #[test]
    fn fusion_weights_default_to_half() {
        let w = FusionWeights::new(3).unwrap();
        assert_eq!(w.rho(), &[0.0, 0.0, 0.0]);
        for g in w.gammas() {
            assert_close(g, 0.5, 1e-15);
        }
        assert!(FusionWeights::from_rho(vec![f64::INFINITY]).is_err());
        assert!(FusionWeights::new(0).is_err());
    }

    #[test]
    fn logistic_is_stable_at_extremes() {
        assert_close(logistic(0.0), 0.5, 1e-15);
        assert!(logistic(800.0) <= 1.0 && logistic(800.0) > 0.999);
        assert!(logistic(-800.0) >= 0.0 && logistic(-800.0) < 1e-300);
        assert_close(logistic(2.0) + logistic(-2.0), 1.0, 1e-15);
    }

    #[test]
    fn ds_fold_matches_opinion_fusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let k = rng.gen_range(2..5);
            let v = rng.gen_range(1..5);
            let a = uniform_base_rate(k);
            let opinions: Vec<Opinion> = (0..v)
                .map(|_| {
                    let e: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..10.0)).collect();
                    Evidence::new(e).unwrap().to_opinion(&a).unwrap()
                })
                .collect();
            let fused = ds_fuse_opinions(&opinions).unwrap();
            let fold = DsFold::new(
                opinions
                    .iter()
                    .map(|w| (w.belief().to_vec(), w.uncertainty()))
                    .collect(),
            )
            .unwrap();
            for (x, y) in fused.belief().iter().zip(fold.belief()) {
                assert_close(*x, *y, 1e-12);
            }
            assert_close(fused.uncertainty(), fold.uncertainty(), 1e-12);
        }
    }

    #[test]
    fn ds_fold_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..20 {
            let k = rng.gen_range(2..4usize);
            let v = rng.gen_range(2..4usize);
            // Random positive-uncertainty inputs plus a random linear readout.
            let inputs: Vec<(Vec<f64>, f64)> = (0..v)
                .map(|_| {
                    let e: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..6.0)).collect();
                    let s = k as f64 + e.iter().sum::<f64>();
                    (e.iter().map(|x| x / s).collect(), k as f64 / s)
                })
                .collect();
            let w_b: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w_u: f64 = rng.gen_range(-1.0..1.0);

            let fold = DsFold::new(inputs.clone()).unwrap();
            let grads = fold.backward(&w_b, w_u).unwrap();

            let flat: Vec<f64> = inputs
                .iter()
                .flat_map(|(b, u)| b.iter().copied().chain(std::iter::once(*u)))
                .collect();
            let loss = |x: &[f64]| {
                let ins: Vec<(Vec<f64>, f64)> = x
                    .chunks(k + 1)
                    .map(|c| (c[..k].to_vec(), c[k]))
                    .collect();
                let f = DsFold::new(ins).unwrap();
                f.belief().iter().zip(&w_b).map(|(b, w)| b * w).sum::<f64>()
                    + f.uncertainty() * w_u
            };
            let numeric = finite_difference_gradient(loss, &flat, 1e-6).unwrap();
            let analytic: Vec<f64> = grads
                .iter()
                .flat_map(|(b, u)| b.iter().copied().chain(std::iter::once(*u)))
                .collect();
            for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
                assert!(
                    rel < 1e-5,
                    "trial {trial}, coordinate {i}: analytic {a}, numeric {n}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn ds_combination_is_commutative(
            raw1 in proptest::collection::vec(0.01..1.0f64, 4),
            raw2 in proptest::collection::vec(0.01..1.0f64, 4),
            t1 in 0.01..1.0f64,
            t2 in 0.01..1.0f64,
        ) {
            let norm = |raw: &[f64], t: f64| {
                let sum: f64 = raw.iter().sum::<f64>() + t;
                Bba::new(raw.iter().map(|m| m / sum).collect(), t / sum).unwrap()
            };
            let (m1, m2) = (norm(&raw1, t1), norm(&raw2, t2));
            let ab = ds_combine_pair(&m1, &m2).unwrap();
            let ba = ds_combine_pair(&m2, &m1).unwrap();
            for (x, y) in ab.singleton().iter().zip(ba.singleton()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((ab.theta() - ba.theta()).abs() < 1e-12);
        }

        #[test]
        fn ds_combination_is_associative(
            raws in proptest::collection::vec(proptest::collection::vec(0.01..1.0f64, 3), 3),
            thetas in proptest::collection::vec(0.05..1.0f64, 3),
        ) {
            let ms: Vec<Bba> = raws.iter().zip(&thetas).map(|(raw, &t)| {
                let sum: f64 = raw.iter().sum::<f64>() + t;
                Bba::new(raw.iter().map(|m| m / sum).collect(), t / sum).unwrap()
            }).collect();
            let left = ds_combine_pair(&ds_combine_pair(&ms[0], &ms[1]).unwrap(), &ms[2]).unwrap();
            let right = ds_combine_pair(&ms[0], &ds_combine_pair(&ms[1], &ms[2]).unwrap()).unwrap();
            for (x, y) in left.singleton().iter().zip(right.singleton()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            prop_assert!((left.theta() - right.theta()).abs() < 1e-9);
        }

        #[test]
        fn restricted_and_setwise_agree(
            raw1 in proptest::collection::vec(0.0..1.0f64, 2..6),
            raw2raw in proptest::collection::vec(0.0..1.0f64, 6),
            t1 in 0.0..1.0f64,
            t2 in 0.01..1.0f64,
        ) {
            let k = raw1.len();
            let raw2 = &raw2raw[..k];
            let norm = |raw: &[f64], t: f64| {
                let sum: f64 = raw.iter().sum::<f64>() + t;
                prop_assume!(sum > 1e-9);
                Ok(Bba::new(raw.iter().map(|m| m / sum).collect(), t / sum).unwrap())
            };
            let m1 = norm(&raw1, t1)?;
            let m2 = norm(raw2, t2)?;
            let fast = ds_combine_pair(&m1, &m2).unwrap();
            let slow = setwise::SetBba::from_bba(&m1).unwrap()
                .combine(&setwise::SetBba::from_bba(&m2).unwrap()).unwrap()
                .to_bba().unwrap();
            for (x, y) in fast.singleton().iter().zip(slow.singleton()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((fast.theta() - slow.theta()).abs() < 1e-12);
        }

        #[test]
        fn discount_output_is_valid_opinion(
            ea in proptest::collection::vec(0.0..20.0f64, 2..5),
            ebraw in proptest::collection::vec(0.0..20.0f64, 5),
            ga in 0.05..1.0f64,
            gb in 0.05..1.0f64,
        ) {
            let k = ea.len();
            let a = uniform_base_rate(k);
            let wa = Evidence::new(ea).unwrap().to_opinion(&a).unwrap();
            let wb = Evidence::new(ebraw[..k].to_vec()).unwrap().to_opinion(&a).unwrap();
            // Opinion::new inside validates the simplex invariants.
            let fused = discount_aggregate_pair(&wa, &wb, ga, gb).unwrap();
            prop_assert!(fused.uncertainty() >= 0.0);
        }
    }
}
