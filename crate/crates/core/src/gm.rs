//! Gaussian mixtures with diagonal covariances over named variable slots.
//!
//! A [`GaussianMixture`] is an unnormalized weighted sum of diagonal Gaussians
//! over the concatenation of one or more latent vectors ("slots"). The family is
//! closed under product and marginalization, which is what makes exact dynamic
//! programming over continuous subtypes possible. Weights are kept in the log
//! domain throughout; masses are combined with log-sum-exp only.
//!
//! Conventions:
//! - zero slots, one component: a scalar `exp(log_weight)`. Used for sentence
//!   masses and for the constant root outside score.
//! - zero components: the zero function.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One named latent vector in a mixture's layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Slot {
    pub name: &'static str,
    pub width: usize,
}

impl Slot {
    pub const fn new(name: &'static str, width: usize) -> Self {
        Slot { name, width }
    }
}

/// An owned component, used to build mixtures.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianComponent {
    pub log_weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl GaussianComponent {
    pub fn new(log_weight: f64, mean: Vec<f64>, variance: Vec<f64>) -> Self {
        GaussianComponent {
            log_weight,
            mean,
            variance,
        }
    }
}

/// Borrowed view of one component.
#[derive(Clone, Copy, Debug)]
pub struct ComponentRef<'a> {
    pub log_weight: f64,
    pub mean: &'a [f64],
    pub variance: &'a [f64],
}

/// Which components survive [`GaussianMixture::prune`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PruneRule {
    Off,
    /// Keep `min(k_min + floor(k_c^theta), k_max)` once `k_c > k_min`.
    Adaptive { k_min: usize, k_max: usize, theta: f64 },
    /// Keep at most `k_hard` components.
    Hard { k_hard: usize },
}

impl PruneRule {
    /// Training default: looser pruning than at parse time.
    pub const TRAIN: PruneRule = PruneRule::Adaptive {
        k_min: 40,
        k_max: 50,
        theta: 0.35,
    };
    pub const PARSE: PruneRule = PruneRule::Adaptive {
        k_min: 20,
        k_max: 50,
        theta: 0.35,
    };

    /// Number of components kept from a mixture with `k_c` components.
    pub fn allowed(&self, k_c: usize) -> usize {
        match *self {
            PruneRule::Off => k_c,
            PruneRule::Adaptive { k_min, k_max, theta } => {
                if k_c <= k_min {
                    k_c
                } else {
                    k_allow(k_c, k_min, k_max, theta).min(k_c)
                }
            }
            PruneRule::Hard { k_hard } => k_c.min(k_hard),
        }
    }
}

/// `min(k_min + floor(k_c^theta), k_max)`.
pub fn k_allow(k_c: usize, k_min: usize, k_max: usize, theta: f64) -> usize {
    let root = (k_c as f64).powf(theta);
    // powf on exact integer powers can land a hair below the integer
    let mut fl = root.floor();
    if (root - (fl + 1.0)).abs() < 1e-9 {
        fl += 1.0;
    }
    (k_min + fl as usize).min(k_max)
}

#[inline]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// log N(x | m, v) for one dimension.
#[inline]
pub(crate) fn log_normal_1d(x: f64, m: f64, v: f64) -> f64 {
    let d = x - m;
    -0.5 * (LN_2PI + v.ln() + d * d / v)
}

/// log of the integral of the product of two diagonal Gaussians.
#[inline]
pub(crate) fn log_gaussian_overlap(m1: &[f64], v1: &[f64], m2: &[f64], v2: &[f64]) -> f64 {
    let mut acc = 0.0;
    for d in 0..m1.len() {
        let v = v1[d] + v2[d];
        let diff = m1[d] - m2[d];
        acc += LN_2PI + v.ln() + diff * diff / v;
    }
    -0.5 * acc
}

/// Per-dimension moments of the normalized product of a Gaussian with a
/// one-slot mixture, centered at the Gaussian's mean.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapMoments {
    /// log of the integral of the product.
    pub log_mass: f64,
    /// E[x_d - mean_d] under the normalized product.
    pub centered_first: Vec<f64>,
    /// E[(x_d - mean_d)^2] under the normalized product.
    pub centered_second: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    slots: Vec<Slot>,
    dim: usize,
    log_weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(slots: Vec<Slot>, components: Vec<GaussianComponent>) -> Result<Self> {
        let dim = total_width(&slots)?;
        let mut f = GaussianMixture::zero(slots);
        for c in components {
            if c.mean.len() != dim || c.variance.len() != dim {
                return Err(Error::Dimension(format!(
                    "component has {} mean / {} variance entries, layout needs {}",
                    c.mean.len(),
                    c.variance.len(),
                    dim
                )));
            }
            if c.variance.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Input("variance entries must be positive and finite".into()));
            }
            if c.log_weight.is_nan() {
                return Err(Error::Input("log weight is NaN".into()));
            }
            f.push(c.log_weight, &c.mean, &c.variance);
        }
        Ok(f)
    }

    /// The zero function over the given layout.
    pub fn zero(slots: Vec<Slot>) -> Self {
        let dim = slots.iter().map(|s| s.width).sum();
        GaussianMixture {
            slots,
            dim,
            log_weights: Vec::new(),
            means: Vec::new(),
            variances: Vec::new(),
        }
    }

    /// The multiplicative unit: zero slots, one component of weight 1.
    pub fn unit() -> Self {
        GaussianMixture::scalar(0.0)
    }

    /// Zero-slot constant `exp(log_value)`.
    pub fn scalar(log_value: f64) -> Self {
        let mut f = GaussianMixture::zero(Vec::new());
        if log_value > f64::NEG_INFINITY {
            f.log_weights.push(log_value);
        }
        f
    }

    /// Single Gaussian with weight `exp(log_weight)`.
    pub fn gaussian(slots: Vec<Slot>, log_weight: f64, mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        GaussianMixture::new(slots, vec![GaussianComponent::new(log_weight, mean, variance)])
    }

    pub(crate) fn with_capacity(slots: Vec<Slot>, components: usize) -> Self {
        let dim = slots.iter().map(|s| s.width).sum();
        GaussianMixture {
            slots,
            dim,
            log_weights: Vec::with_capacity(components),
            means: Vec::with_capacity(components * dim),
            variances: Vec::with_capacity(components * dim),
        }
    }

    pub(crate) fn push(&mut self, log_weight: f64, mean: &[f64], variance: &[f64]) {
        debug_assert_eq!(mean.len(), self.dim);
        debug_assert_eq!(variance.len(), self.dim);
        self.log_weights.push(log_weight);
        self.means.extend_from_slice(mean);
        self.variances.extend_from_slice(variance);
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Total number of dimensions (sum of slot widths).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    /// True for the zero function.
    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn log_weight(&self, k: usize) -> f64 {
        self.log_weights[k]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variances[k * self.dim..(k + 1) * self.dim]
    }

    pub fn component(&self, k: usize) -> ComponentRef<'_> {
        ComponentRef {
            log_weight: self.log_weights[k],
            mean: self.mean(k),
            variance: self.variance(k),
        }
    }

    pub fn components(&self) -> impl Iterator<Item = ComponentRef<'_>> + '_ {
        (0..self.len()).map(move |k| self.component(k))
    }

    pub(crate) fn set_log_weight(&mut self, k: usize, value: f64) {
        self.log_weights[k] = value;
    }

    pub(crate) fn mean_mut(&mut self, k: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.means[k * d..(k + 1) * d]
    }

    pub(crate) fn variance_mut(&mut self, k: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.variances[k * d..(k + 1) * d]
    }

    /// Position of a slot and the offset of its first dimension.
    pub fn slot_offset(&self, name: &str) -> Result<(usize, usize)> {
        let mut offset = 0;
        for (i, s) in self.slots.iter().enumerate() {
            if s.name == name {
                return Ok((i, offset));
            }
            offset += s.width;
        }
        Err(Error::UnknownSlot(name.to_string()))
    }

    /// Pointwise product. The result layout is `self`'s slots followed by the
    /// slots of `other` that `self` lacks.
    pub fn product(&self, other: &GaussianMixture) -> Result<GaussianMixture> {
        // for every result dimension: (dimension in self, dimension in other)
        let mut sources: Vec<(Option<usize>, Option<usize>)> = Vec::with_capacity(self.dim + other.dim);
        let mut slots = self.slots.clone();
        let mut shared = vec![None; self.dim];
        let mut other_offset = 0;
        let mut extra = Vec::new();
        for s in &other.slots {
            match self.slot_offset(s.name) {
                Ok((i, off)) => {
                    if self.slots[i].width != s.width {
                        return Err(Error::Dimension(format!(
                            "slot `{}` has width {} and {}",
                            s.name, self.slots[i].width, s.width
                        )));
                    }
                    for w in 0..s.width {
                        shared[off + w] = Some(other_offset + w);
                    }
                }
                Err(_) => {
                    slots.push(*s);
                    extra.push(other_offset..other_offset + s.width);
                }
            }
            other_offset += s.width;
        }
        for (d, sh) in shared.iter().enumerate() {
            sources.push((Some(d), *sh));
        }
        for range in extra {
            for d in range {
                sources.push((None, Some(d)));
            }
        }

        let mut out = GaussianMixture::with_capacity(slots, self.len() * other.len());
        let dim = out.dim;
        let mut mean = vec![0.0; dim];
        let mut var = vec![0.0; dim];
        for i in 0..self.len() {
            let (m1, v1) = (self.mean(i), self.variance(i));
            for j in 0..other.len() {
                let (m2, v2) = (other.mean(j), other.variance(j));
                let mut lw = self.log_weights[i] + other.log_weights[j];
                for (d, src) in sources.iter().enumerate() {
                    match *src {
                        (Some(a), Some(b)) => {
                            let s = v1[a] + v2[b];
                            lw += log_normal_1d(m1[a], m2[b], s);
                            var[d] = v1[a] * v2[b] / s;
                            mean[d] = (m1[a] * v2[b] + m2[b] * v1[a]) / s;
                        }
                        (Some(a), None) => {
                            mean[d] = m1[a];
                            var[d] = v1[a];
                        }
                        (None, Some(b)) => {
                            mean[d] = m2[b];
                            var[d] = v2[b];
                        }
                        (None, None) => unreachable!(),
                    }
                }
                out.push(lw, &mean, &var);
            }
        }
        Ok(out)
    }

    /// Integrates the named slot out. Diagonal covariances make this a
    /// deletion of the slot's dimensions; weights are unchanged.
    pub fn marginalize(&self, name: &str) -> Result<GaussianMixture> {
        let (idx, off) = self.slot_offset(name)?;
        let width = self.slots[idx].width;
        let mut slots = self.slots.clone();
        slots.remove(idx);
        let mut out = GaussianMixture::with_capacity(slots, self.len());
        for k in 0..self.len() {
            let m = self.mean(k);
            let v = self.variance(k);
            out.log_weights.push(self.log_weights[k]);
            out.means.extend_from_slice(&m[..off]);
            out.means.extend_from_slice(&m[off + width..]);
            out.variances.extend_from_slice(&v[..off]);
            out.variances.extend_from_slice(&v[off + width..]);
        }
        Ok(out)
    }

    /// Integrates every slot out, leaving a scalar.
    pub fn marginalize_all(&self) -> GaussianMixture {
        GaussianMixture::scalar(self.log_total_mass())
    }

    pub fn rename_slot(&self, from: &str, to: &'static str) -> Result<GaussianMixture> {
        let (idx, _) = self.slot_offset(from)?;
        let mut out = self.clone();
        out.slots[idx].name = to;
        Ok(out)
    }

    /// Same components, new slot layout of equal total width.
    pub fn with_slots(&self, slots: Vec<Slot>) -> Result<GaussianMixture> {
        let dim = total_width(&slots)?;
        if dim != self.dim {
            return Err(Error::Dimension(format!("layout width {dim} != {}", self.dim)));
        }
        let mut out = self.clone();
        out.slots = slots;
        Ok(out)
    }

    /// log of the integral over all slots (`-inf` for the zero function).
    pub fn log_total_mass(&self) -> f64 {
        log_sum_exp(self.log_weights.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.log_total_mass().exp()
    }

    /// `(∫f, ∫f·x_d, ∫f·x_d²)` in closed form.
    pub fn moments(&self, dim_index: usize) -> Result<(f64, f64, f64)> {
        if dim_index >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: dim_index,
                len: self.dim,
            });
        }
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok((0.0, 0.0, 0.0));
        }
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for k in 0..self.len() {
            let w = (self.log_weights[k] - max).exp();
            let mu = self.mean(k)[dim_index];
            let var = self.variance(k)[dim_index];
            m0 += w;
            m1 += w * mu;
            m2 += w * (mu * mu + var);
        }
        let scale = max.exp();
        Ok((m0 * scale, m1 * scale, m2 * scale))
    }

    /// Adds `log_c` to every log weight.
    pub fn scale(&self, log_c: f64) -> GaussianMixture {
        let mut out = self.clone();
        for w in &mut out.log_weights {
            *w += log_c;
        }
        out
    }

    /// Sum of two mixtures over the same layout (component concatenation).
    pub fn sum(&self, other: &GaussianMixture) -> Result<GaussianMixture> {
        if self.slots != other.slots {
            return Err(Error::Dimension("sum of mixtures over different layouts".into()));
        }
        let mut out = self.clone();
        out.log_weights.extend_from_slice(&other.log_weights);
        out.means.extend_from_slice(&other.means);
        out.variances.extend_from_slice(&other.variances);
        Ok(out)
    }

    /// Keeps the `k_allow` heaviest components (see [`k_allow`]).
    pub fn prune_components(&self, k_min: usize, k_max: usize, theta: f64) -> GaussianMixture {
        self.prune(&PruneRule::Adaptive { k_min, k_max, theta })
    }

    /// Keeps the components with the largest log weights, ties to the lower
    /// index; survivors keep their relative order.
    pub fn prune(&self, rule: &PruneRule) -> GaussianMixture {
        let keep = rule.allowed(self.len());
        if keep >= self.len() {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.log_weights[b]
                .partial_cmp(&self.log_weights[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut kept = order[..keep].to_vec();
        kept.sort_unstable();
        let mut out = GaussianMixture::with_capacity(self.slots.clone(), keep);
        for k in kept {
            out.push(self.log_weights[k], self.mean(k), self.variance(k));
        }
        out
    }

    /// log f(x) at a point of the full layout.
    pub fn log_evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension");
        log_sum_exp((0..self.len()).map(|k| {
            let m = self.mean(k);
            let v = self.variance(k);
            let mut lw = self.log_weights[k];
            for d in 0..self.dim {
                lw += log_normal_1d(x[d], m[d], v[d]);
            }
            lw
        }))
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.log_evaluate(x).exp()
    }

    /// `log ∫ N(x | mean, diag(variance)) · f(x) dx` for a one-slot `f`.
    /// A zero-slot `f` is a constant function, so the result is its log mass.
    pub fn log_overlap(&self, mean: &[f64], variance: &[f64]) -> f64 {
        if self.slots.is_empty() {
            return self.log_total_mass();
        }
        debug_assert_eq!(mean.len(), self.dim);
        let mut acc = f64::NEG_INFINITY;
        for k in 0..self.len() {
            let lw = self.log_weights[k] + log_gaussian_overlap(mean, variance, self.mean(k), self.variance(k));
            acc = log_add(acc, lw);
        }
        acc
    }

    /// Moments of `N(x | mean, variance) · f(x)`, normalized and centered at
    /// `mean`. A zero-slot `f` behaves as a constant.
    pub fn overlap_moments(&self, mean: &[f64], variance: &[f64]) -> OverlapMoments {
        let d = mean.len();
        if self.slots.is_empty() {
            return OverlapMoments {
                log_mass: self.log_total_mass(),
                centered_first: vec![0.0; d],
                centered_second: variance.to_vec(),
            };
        }
        let mut log_terms = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            log_terms.push(self.log_weights[k] + log_gaussian_overlap(mean, variance, self.mean(k), self.variance(k)));
        }
        let log_mass = log_sum_exp(log_terms.iter().copied());
        let mut first = vec![0.0; d];
        let mut second = vec![0.0; d];
        if log_mass == f64::NEG_INFINITY {
            return OverlapMoments {
                log_mass,
                centered_first: first,
                centered_second: second,
            };
        }
        for k in 0..self.len() {
            let w = (log_terms[k] - log_mass).exp();
            let m2 = self.mean(k);
            let v2 = self.variance(k);
            for i in 0..d {
                let s = variance[i] + v2[i];
                let v = variance[i] * v2[i] / s;
                // product mean minus `mean`, written to avoid cancellation
                let shift = (m2[i] - mean[i]) * variance[i] / s;
                first[i] += w * shift;
                second[i] += w * (v + shift * shift);
            }
        }
        OverlapMoments {
            log_mass,
            centered_first: first,
            centered_second: second,
        }
    }
}

fn total_width(slots: &[Slot]) -> Result<usize> {
    let mut total = 0;
    for (i, s) in slots.iter().enumerate() {
        if s.width == 0 {
            return Err(Error::Dimension(format!("slot `{}` has width 0", s.name)));
        }
        if slots[..i].iter().any(|t| t.name == s.name) {
            return Err(Error::Dimension(format!("duplicate slot `{}`", s.name)));
        }
        total += s.width;
    }
    Ok(total)
}

/// Density of a univariate normal.
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quadrature;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const X: Slot = Slot::new("x", 1);

    fn std_normal(mean: f64) -> GaussianMixture {
        GaussianMixture::gaussian(vec![X], 0.0, vec![mean], vec![1.0]).unwrap()
    }

    fn random_mixture(rng: &mut ChaCha8Rng, slots: Vec<Slot>, k: usize) -> GaussianMixture {
        let dim: usize = slots.iter().map(|s| s.width).sum();
        let comps = (0..k)
            .map(|_| {
                GaussianComponent::new(
                    rng.gen_range(-1.0..1.0),
                    (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                    (0..dim).map(|_| rng.gen_range(0.1..5.0)).collect(),
                )
            })
            .collect();
        GaussianMixture::new(slots, comps).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn product_with_unit_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_mixture(&mut rng, vec![Slot::new("a", 2), Slot::new("b", 1)], 3);
        assert_eq!(GaussianMixture::unit().product(&f).unwrap().components().count(), 3);
        let p = f.product(&GaussianMixture::unit()).unwrap();
        assert_eq!(p, f);
        let q = GaussianMixture::unit().product(&f).unwrap();
        assert_eq!(q.log_weights(), f.log_weights());
        assert_eq!(q.mean(2), f.mean(2));
    }

    #[test]
    fn product_of_standard_normals_matches_quadrature() {
        // frozen from the trapezoid oracle over [-10, 10]
        let oracle = quadrature(&[(-10.0, 10.0)], 2001, |x| normal_pdf(x[0], 0.0, 1.0).powi(2));
        assert!((oracle - 0.282_094_791_773_878_14).abs() < 1e-12);
        let p = std_normal(0.0).product(&std_normal(0.0)).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.total_mass() - 1.0 / (2.0 * PI.sqrt())).abs() < 1e-15);
        assert!((p.total_mass() - 0.28209).abs() < 1e-5);
        assert_eq!(p.mean(0), &[0.0]);
        assert!((p.variance(0)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_of_shifted_normals_matches_quadrature() {
        let oracle = quadrature(&[(-10.0, 10.0)], 2001, |x| normal_pdf(x[0], 0.0, 1.0) * normal_pdf(x[0], 1.0, 1.0));
        let p = std_normal(0.0).product(&std_normal(1.0)).unwrap();
        assert!(rel(p.total_mass(), oracle) < 1e-12);
        assert!((p.total_mass() - 0.21970).abs() < 1e-5);
        assert!((p.mean(0)[0] - 0.5).abs() < 1e-15);
        assert!((p.variance(0)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_rejects_width_mismatch() {
        let f = GaussianMixture::zero(vec![Slot::new("a", 2)]);
        let g = GaussianMixture::zero(vec![Slot::new("a", 3)]);
        assert!(matches!(f.product(&g), Err(Error::Dimension(_))));
    }

    #[test]
    fn product_mass_matches_quadrature_on_random_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dims in 1..=3usize {
            let cases = if dims == 3 { 2 } else { 5 };
            for _ in 0..cases {
                let layout: Vec<Slot> = (0..dims).map(|i| Slot::new(["a", "b", "c"][i], 1)).collect();
                let f = random_mixture(&mut rng, layout.clone(), 2);
                let g = random_mixture(&mut rng, layout.clone(), 2);
                let analytic = f.product(&g).unwrap().marginalize_all().total_mass();
                let points = if dims == 3 { 161 } else { 601 };
                let bounds = vec![(-15.0, 15.0); dims];
                let numeric = quadrature(&bounds, points, |x| f.evaluate(x) * g.evaluate(x));
                assert!(rel(analytic, numeric) < 1e-6, "dims {dims}: {analytic} vs {numeric}");
            }
        }
    }

    #[test]
    fn product_is_commutative_up_to_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_mixture(&mut rng, vec![Slot::new("a", 1), Slot::new("b", 2)], 2);
        let g = random_mixture(&mut rng, vec![Slot::new("b", 2), Slot::new("c", 1)], 3);
        let fg = f.product(&g).unwrap();
        let gf = g.product(&f).unwrap();
        assert_eq!(fg.len(), 6);
        assert!(rel(fg.total_mass(), gf.total_mass()) < 1e-12);
        let point = [0.3, -0.2, 1.0, 0.5];
        // gf layout is b, c, a
        let permuted = [point[1], point[2], point[3], point[0]];
        assert!(rel(fg.evaluate(&point), gf.evaluate(&permuted)) < 1e-12);
        let h = random_mixture(&mut rng, vec![Slot::new("a", 1)], 2);
        let left = fg.product(&h).unwrap();
        let right = f.product(&g.product(&h).unwrap()).unwrap();
        assert!(rel(left.evaluate(&point), right.evaluate(&point)) < 1e-12);
    }

    #[test]
    fn marginalize_deletes_slot_dims() {
        let f = GaussianMixture::gaussian(
            vec![Slot::new("a", 2), Slot::new("b", 1)],
            0.3,
            vec![1.0, 2.0, 3.0],
            vec![0.5, 0.6, 0.7],
        )
        .unwrap();
        let m = f.marginalize("b").unwrap();
        assert_eq!(m.slots(), &[Slot::new("a", 2)]);
        assert_eq!(m.mean(0), &[1.0, 2.0]);
        assert_eq!(m.variance(0), &[0.5, 0.6]);
        assert_eq!(m.log_weight(0), 0.3);
        let a = f.marginalize("a").unwrap();
        assert_eq!(a.mean(0), &[3.0]);
        assert!(matches!(f.marginalize("zz"), Err(Error::UnknownSlot(_))));
    }

    #[test]
    fn marginalize_last_slot_gives_scalar() {
        let f = GaussianMixture::new(
            vec![X],
            vec![
                GaussianComponent::new(0.3f64.ln(), vec![0.0], vec![1.0]),
                GaussianComponent::new(0.7f64.ln(), vec![2.0], vec![3.0]),
            ],
        )
        .unwrap();
        let s = f.marginalize("x").unwrap();
        assert!(s.is_scalar());
        assert!((s.total_mass() - 1.0).abs() < 1e-15);
        let z = GaussianMixture::zero(vec![X]).marginalize("x").unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn marginalize_commutes_with_disjoint_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_mixture(&mut rng, vec![Slot::new("a", 2)], 2);
        let g = random_mixture(&mut rng, vec![Slot::new("b", 1)], 3);
        let lhs = f.product(&g).unwrap().marginalize("b").unwrap();
        let rhs = f.scale(g.log_total_mass());
        for x in [[0.0, 0.0], [1.0, -2.0], [3.0, 0.5]] {
            assert!(rel(lhs.evaluate(&x), rhs.evaluate(&x)) < 1e-12);
        }
    }

    #[test]
    fn total_mass_examples() {
        assert_eq!(GaussianMixture::unit().total_mass(), 1.0);
        let w = |ws: &[f64]| {
            GaussianMixture::new(
                vec![X],
                ws.iter().map(|w| GaussianComponent::new(w.ln(), vec![0.0], vec![1.0])).collect(),
            )
            .unwrap()
        };
        assert!((w(&[0.3, 0.7]).total_mass() - 1.0).abs() < 1e-15);
        assert!((w(&[2.0, 2.0, 2.0, 2.0]).total_mass() - 8.0).abs() < 1e-14);
        assert_eq!(GaussianMixture::zero(vec![X]).log_total_mass(), f64::NEG_INFINITY);
    }

    #[test]
    fn moments_examples() {
        let f = GaussianMixture::gaussian(vec![X], 0.0, vec![2.0], vec![3.0]).unwrap();
        let (m0, m1, m2) = f.moments(0).unwrap();
        assert!((m0 - 1.0).abs() < 1e-15 && (m1 - 2.0).abs() < 1e-15 && (m2 - 7.0).abs() < 1e-14);
        let f = GaussianMixture::gaussian(vec![X], 0.5f64.ln(), vec![0.0], vec![1.0]).unwrap();
        let (m0, m1, m2) = f.moments(0).unwrap();
        assert!((m0 - 0.5).abs() < 1e-15 && m1.abs() < 1e-15 && (m2 - 0.5).abs() < 1e-15);
        let f = GaussianMixture::new(
            vec![X],
            vec![
                GaussianComponent::new(0.0, vec![1.0], vec![1.0]),
                GaussianComponent::new(0.0, vec![-1.0], vec![1.0]),
            ],
        )
        .unwrap();
        let q0 = quadrature(&[(-15.0, 15.0)], 3001, |x| f.evaluate(x));
        let q1 = quadrature(&[(-15.0, 15.0)], 3001, |x| f.evaluate(x) * x[0]);
        let q2 = quadrature(&[(-15.0, 15.0)], 3001, |x| f.evaluate(x) * x[0] * x[0]);
        let (m0, m1, m2) = f.moments(0).unwrap();
        assert!((m0 - 2.0).abs() < 1e-14 && m1.abs() < 1e-14 && (m2 - 4.0).abs() < 1e-14);
        assert!((q0 - 2.0).abs() < 1e-9 && q1.abs() < 1e-9 && (q2 - 4.0).abs() < 1e-9);
        assert!(matches!(f.moments(1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn moments_match_quadrature_on_random_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let f = random_mixture(&mut rng, vec![X], 3);
            let (m0, m1, m2) = f.moments(0).unwrap();
            let b = [(-25.0, 25.0)];
            let q0 = quadrature(&b, 4001, |x| f.evaluate(x));
            let q1 = quadrature(&b, 4001, |x| f.evaluate(x) * x[0]);
            let q2 = quadrature(&b, 4001, |x| f.evaluate(x) * x[0] * x[0]);
            assert!(rel(m0, q0) < 1e-6);
            assert!((m1 - q1).abs() <= 1e-6 * m1.abs().max(m0));
            assert!(rel(m2, q2) < 1e-6);
        }
    }

    #[test]
    fn k_allow_tabulated_cases() {
        assert_eq!(PruneRule::Adaptive { k_min: 40, k_max: 50, theta: 0.35 }.allowed(30), 30);
        assert_eq!(k_allow(100, 20, 50, 0.35), 25);
        assert_eq!(k_allow(1_000_000, 20, 50, 0.35), 50);
        assert_eq!(PruneRule::Hard { k_hard: 10 }.allowed(30), 10);
        assert_eq!(PruneRule::Hard { k_hard: 40 }.allowed(30), 30);
    }

    #[test]
    fn prune_keeps_heaviest_with_index_ties() {
        let comps = [0.0, 2.0, 1.0, 2.0, -1.0]
            .iter()
            .enumerate()
            .map(|(i, w)| GaussianComponent::new(*w, vec![i as f64], vec![1.0]))
            .collect();
        let f = GaussianMixture::new(vec![X], comps).unwrap();
        let p = f.prune(&PruneRule::Hard { k_hard: 2 });
        assert_eq!(p.log_weights(), &[2.0, 2.0]);
        assert_eq!(p.mean(0), &[1.0]);
        assert_eq!(p.mean(1), &[3.0]);
        let p = f.prune(&PruneRule::Hard { k_hard: 3 });
        assert_eq!(p.log_weights(), &[2.0, 1.0, 2.0]);
        let comps: Vec<_> = (0..100).map(|i| GaussianComponent::new(-(i as f64), vec![0.0], vec![1.0])).collect();
        let f = GaussianMixture::new(vec![X], comps).unwrap();
        assert_eq!(f.prune_components(20, 50, 0.35).len(), 25);
        assert_eq!(f.prune_components(200, 500, 0.35).len(), 100);
    }

    #[test]
    fn scale_examples() {
        let s = GaussianMixture::unit().scale(2f64.ln());
        assert!(s.is_scalar());
        assert!((s.total_mass() - 2.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_mixture(&mut rng, vec![X], 4);
        assert_eq!(f.scale(0.0), f);
        assert!(rel(f.scale(10f64.ln()).total_mass(), 10.0 * f.total_mass()) < 1e-14);
    }

    #[test]
    fn overlap_agrees_with_product_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let f = random_mixture(&mut rng, vec![Slot::new("x", 2)], 3);
            let g = random_mixture(&mut rng, vec![Slot::new("x", 2)], 1);
            let (m, v) = (g.mean(0).to_vec(), g.variance(0).to_vec());
            let unit_g = g.scale(-g.log_weight(0));
            let prod = f.product(&unit_g).unwrap();
            assert!(rel(f.log_overlap(&m, &v).exp(), prod.total_mass()) < 1e-12);
            let mom = f.overlap_moments(&m, &v);
            assert!(rel(mom.log_mass.exp(), prod.total_mass()) < 1e-12);
            for d in 0..2 {
                let (m0, m1, m2) = prod.moments(d).unwrap();
                let first = m1 / m0 - m[d];
                let second = m2 / m0 - 2.0 * m[d] * m1 / m0 + m[d] * m[d];
                assert!((mom.centered_first[d] - first).abs() < 1e-9 * (1.0 + first.abs()));
                assert!(rel(mom.centered_second[d], second) < 1e-9);
            }
        }
        let c = GaussianMixture::scalar(1.5);
        assert_eq!(c.log_overlap(&[0.0], &[1.0]), 1.5);
    }

    proptest::proptest! {
        #[test]
        fn pruning_is_a_mass_decreasing_subset(
            weights in proptest::collection::vec(-5.0f64..5.0, 1..60),
            k_min in 0usize..30,
            extra in 0usize..30,
            theta in 0.0f64..1.0,
        ) {
            let comps: Vec<_> = weights
                .iter()
                .enumerate()
                .map(|(i, w)| GaussianComponent::new(*w, vec![i as f64], vec![1.0]))
                .collect();
            let f = GaussianMixture::new(vec![X], comps).unwrap();
            let p = f.prune_components(k_min, k_min + extra, theta);
            proptest::prop_assert!(p.len() <= f.len());
            proptest::prop_assert!(p.log_total_mass() <= f.log_total_mass() + 1e-12);
            for c in p.components() {
                let i = c.mean[0] as usize;
                proptest::prop_assert_eq!(c.log_weight, weights[i]);
            }
        }
    }
}
