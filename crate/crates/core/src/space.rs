//! The layered design space.
//!
//! A [`SearchSpace`] is an ordered list of layers, each offering a set of
//! operators, plus one list of channel scaling factors shared by every
//! layer. An [`Architecture`] picks one operator and one factor per layer.
//! Shrinking a space fixes the operator of a layer; channel factors always
//! stay searchable.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::cmp::Ordering;
use core::fmt;

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};

/// Index of an operator within a layer's operator list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct OperatorId(pub u16);

impl OperatorId {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A channel scaling factor in `(0, 1]`.
///
/// Factors are compared by their exact bit pattern, so a factor parsed from a
/// document matches the table entries parsed from the same kind of document.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct ChannelFactor(f64);

impl ChannelFactor {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "channel factor {value} is outside (0, 1]"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ChannelFactor {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ChannelFactor> for f64 {
    fn from(cf: ChannelFactor) -> f64 {
        cf.0
    }
}

impl PartialEq for ChannelFactor {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ChannelFactor {}

impl core::hash::Hash for ChannelFactor {
    fn hash<H: core::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl PartialOrd for ChannelFactor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ChannelFactor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for ChannelFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Channel count after scaling `max_channels` by `cf`, rounded half away
/// from zero and never below one.
pub fn scaled_channels(max_channels: u32, cf: ChannelFactor) -> u32 {
    let scaled = libm::round(f64::from(max_channels) * cf.value());
    if scaled < 1.0 {
        1
    } else {
        scaled as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    /// Operator display names; the position is the [`OperatorId`].
    pub operators: Vec<String>,
    pub max_channels: u32,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub fixed_operator: Option<OperatorId>,
}

impl LayerSpec {
    pub fn new<S: ToString>(operators: &[S], max_channels: u32) -> Self {
        Self {
            operators: operators.iter().map(ToString::to_string).collect(),
            max_channels,
            fixed_operator: None,
        }
    }

    pub fn num_operators(&self) -> usize {
        self.operators.len()
    }

    /// Operators an architecture may use at this layer.
    pub fn choices(&self) -> impl Iterator<Item = OperatorId> + '_ {
        let (lo, hi) = match self.fixed_operator {
            Some(op) => (op.0, op.0 + 1),
            None => (0, self.operators.len() as u16),
        };
        (lo..hi).map(OperatorId)
    }

    pub fn num_choices(&self) -> usize {
        if self.fixed_operator.is_some() {
            1
        } else {
            self.operators.len()
        }
    }

    pub fn has_operator(&self, op: OperatorId) -> bool {
        op.index() < self.operators.len()
    }

    pub fn operator_name(&self, op: OperatorId) -> Option<&str> {
        self.operators.get(op.index()).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Gene {
    pub op: OperatorId,
    pub factor: ChannelFactor,
}

impl Gene {
    pub fn new(op: u16, factor: ChannelFactor) -> Self {
        Self {
            op: OperatorId(op),
            factor,
        }
    }
}

/// One operator and one channel factor per layer.
///
/// The derived ordering is lexicographic over the gene vector and serves as
/// the canonical order for tie-breaking and memoization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Architecture {
    pub genes: Vec<Gene>,
}

impl Architecture {
    pub fn new(genes: Vec<Gene>) -> Self {
        Self { genes }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawSpace"))]
pub struct SearchSpace {
    layers: Vec<LayerSpec>,
    channel_factors: Vec<ChannelFactor>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawSpace {
    layers: Vec<LayerSpec>,
    channel_factors: Vec<ChannelFactor>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawSpace> for SearchSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        SearchSpace::new(raw.layers, raw.channel_factors)
    }
}

/// Operator names used by [`SearchSpace::shufflenet_like`].
pub const SHUFFLE_OPERATORS: [&str; 5] = [
    "shuffle_k3",
    "shuffle_k5",
    "shuffle_k7",
    "shuffle_xception",
    "skip",
];

impl SearchSpace {
    pub fn new(layers: Vec<LayerSpec>, channel_factors: Vec<ChannelFactor>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidSpace("no layers".into()));
        }
        if channel_factors.is_empty() {
            return Err(Error::InvalidSpace("no channel factors".into()));
        }
        if channel_factors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpace(
                "channel factors must be strictly increasing".into(),
            ));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.operators.is_empty() {
                return Err(Error::InvalidSpace(format!("layer {l} has no operators")));
            }
            if layer.operators.len() > usize::from(u16::MAX) {
                return Err(Error::InvalidSpace(format!("layer {l} has too many operators")));
            }
            if layer.max_channels == 0 {
                return Err(Error::InvalidSpace(format!("layer {l} has max_channels 0")));
            }
            if let Some(op) = layer.fixed_operator {
                if !layer.has_operator(op) {
                    return Err(Error::UnknownOperator { layer: l, op });
                }
            }
        }
        Ok(Self {
            layers,
            channel_factors,
        })
    }

    /// `depth` layers sharing the same operator list, max channel count and
    /// factor list.
    pub fn uniform<S: ToString>(
        depth: usize,
        operators: &[S],
        max_channels: u32,
        factors: &[f64],
    ) -> Result<Self> {
        let factors = factors
            .iter()
            .map(|&f| ChannelFactor::new(f))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            vec![LayerSpec::new(operators, max_channels); depth],
            factors,
        )
    }

    /// Twenty layers of five ShuffleNetV2-style choices (three kernel sizes,
    /// an xception variant and a skip) with channel factors 0.1, 0.2, ..., 1.0.
    /// Stage widths follow the `[48, 128, 256, 512]` layout over a 4/4/8/4
    /// layer split.
    pub fn shufflenet_like() -> Self {
        let widths = [(4, 48), (4, 128), (8, 256), (4, 512)];
        let layers = widths
            .iter()
            .flat_map(|&(n, w)| core::iter::repeat_n(LayerSpec::new(&SHUFFLE_OPERATORS, w), n))
            .collect();
        let factors = (1..=10)
            .map(|i| ChannelFactor(f64::from(i) / 10.0))
            .collect();
        Self::new(layers, factors).expect("built-in space is valid")
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer(&self, layer: usize) -> Result<&LayerSpec> {
        self.layers.get(layer).ok_or(Error::UnknownLayer {
            layer,
            layers: self.layers.len(),
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn channel_factors(&self) -> &[ChannelFactor] {
        &self.channel_factors
    }

    pub fn is_fixed(&self, layer: usize) -> bool {
        self.layers
            .get(layer)
            .is_some_and(|l| l.fixed_operator.is_some())
    }

    /// Number of architectures: the product over layers of (operator choices
    /// × channel factors).
    pub fn size(&self) -> BigUint {
        let n = self.channel_factors.len() as u64;
        self.layers
            .iter()
            .fold(BigUint::from(1u32), |acc, l| acc * (l.num_choices() as u64 * n))
    }

    /// [`size`](Self::size) when it fits in a `u64`.
    pub fn size_u64(&self) -> Option<u64> {
        let n = self.channel_factors.len() as u64;
        self.layers
            .iter()
            .try_fold(1u64, |acc, l| acc.checked_mul(l.num_choices() as u64 * n))
    }

    /// Copy of the space with `layer` fixed to `op`.
    pub fn restrict(&self, layer: usize, op: OperatorId) -> Result<Self> {
        let spec = self.layer(layer)?;
        if !spec.has_operator(op) {
            return Err(Error::UnknownOperator { layer, op });
        }
        if let Some(fixed) = spec.fixed_operator {
            if fixed != op {
                return Err(Error::AlreadyFixed { layer, fixed });
            }
        }
        let mut out = self.clone();
        out.layers[layer].fixed_operator = Some(op);
        Ok(out)
    }

    /// Uniform draw: each layer's operator from its choices and each layer's
    /// channel factor from the shared list, independently.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Architecture {
        let n = self.channel_factors.len();
        let genes = self
            .layers
            .iter()
            .map(|layer| {
                let op = match layer.fixed_operator {
                    Some(op) => op,
                    None => OperatorId(rng.random_range(0..layer.operators.len()) as u16),
                };
                let factor = self.channel_factors[rng.random_range(0..n)];
                Gene { op, factor }
            })
            .collect();
        Architecture { genes }
    }

    /// Uniform operator for `layer`; a fixed layer always yields its fixing.
    pub fn resample_operator<R: Rng + ?Sized>(&self, layer: usize, rng: &mut R) -> OperatorId {
        let spec = &self.layers[layer];
        match spec.fixed_operator {
            Some(op) => op,
            None => OperatorId(rng.random_range(0..spec.operators.len()) as u16),
        }
    }

    pub fn resample_factor<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelFactor {
        self.channel_factors[rng.random_range(0..self.channel_factors.len())]
    }

    /// Resamples the gene at `layer` uniformly, keeping a fixed operator.
    pub fn resample_gene<R: Rng + ?Sized>(&self, layer: usize, rng: &mut R) -> Gene {
        let op = self.resample_operator(layer, rng);
        Gene { op, factor: self.resample_factor(rng) }
    }

    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        if arch.genes.len() != self.layers.len() {
            return Err(Error::InvalidArchitecture(format!(
                "{} genes for {} layers",
                arch.genes.len(),
                self.layers.len()
            )));
        }
        for (l, (gene, layer)) in arch.genes.iter().zip(&self.layers).enumerate() {
            if !layer.has_operator(gene.op) {
                return Err(Error::UnknownOperator { layer: l, op: gene.op });
            }
            if let Some(fixed) = layer.fixed_operator {
                if fixed != gene.op {
                    return Err(Error::InvalidArchitecture(format!(
                        "layer {l} is fixed to operator {fixed}, got {}",
                        gene.op
                    )));
                }
            }
            if self.channel_factors.binary_search(&gene.factor).is_err() {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {l} uses undeclared channel factor {}",
                    gene.factor
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, arch: &Architecture) -> bool {
        self.validate(arch).is_ok()
    }

    /// Every architecture of the space in ascending canonical order.
    pub fn architectures(&self) -> Architectures<'_> {
        Architectures {
            space: self,
            digits: Some(vec![(0, 0); self.layers.len()]),
        }
    }
}

/// Odometer over a space; the last layer turns fastest, which yields the
/// lexicographic gene order.
pub struct Architectures<'a> {
    space: &'a SearchSpace,
    // (operator choice index, factor index) per layer
    digits: Option<Vec<(usize, usize)>>,
}

impl Iterator for Architectures<'_> {
    type Item = Architecture;

    fn next(&mut self) -> Option<Architecture> {
        let digits = self.digits.as_mut()?;
        let space = self.space;
        let genes = digits
            .iter()
            .zip(&space.layers)
            .map(|(&(o, f), layer)| Gene {
                op: layer.choices().nth(o).expect("digit in range"),
                factor: space.channel_factors[f],
            })
            .collect();
        let nf = space.channel_factors.len();
        let mut carry = true;
        for (d, layer) in digits.iter_mut().zip(&space.layers).rev() {
            d.1 += 1;
            if d.1 < nf {
                carry = false;
                break;
            }
            d.1 = 0;
            d.0 += 1;
            if d.0 < layer.num_choices() {
                carry = false;
                break;
            }
            d.0 = 0;
        }
        if carry {
            self.digits = None;
        }
        Some(Architecture { genes })
    }
}
