//! Exhaustive parameter-count search over convolutional architectures.
//!
//! Every configuration in a [`CnnSearchSpace`] is a convolutional feature
//! stage (fixed prefix, pooling choices, optional extra convolution, head)
//! followed by 0 to 2 hidden dense layers and the output layer. Feature stages
//! are grouped by (parameter count, feature width); inside a group the dense
//! widths are solved in closed form, so the search is exact without walking
//! every width combination.

use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::nn::{Activation, FeatureShape, LayerSpec, ModelSpec};
use crate::zoo::models::{conv_prefix, with_dropout, INPUT_CHANNELS, INPUT_LEN, NUM_CLASSES};
use crate::{Error, Result};

/// What turns the convolutional sequence into a flat feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Flatten,
    GlobalMaxPool,
    /// A fixed recurrent stack whose last layer returns its final state.
    Recurrent(Vec<LayerSpec>),
}

impl Head {
    fn layers(&self) -> Vec<LayerSpec> {
        match self {
            Head::Flatten => vec![LayerSpec::Flatten],
            Head::GlobalMaxPool => vec![LayerSpec::GlobalMaxPool1d],
            Head::Recurrent(v) => v.clone(),
        }
    }
}

/// Optional convolution appended after the prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraConv {
    pub max_filters: usize,
    pub max_kernel: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnSearchSpace {
    pub input_len: usize,
    pub input_channels: usize,
    pub num_classes: usize,
    /// Fixed leading layers.
    pub prefix: Vec<LayerSpec>,
    /// Pool sizes tried after every convolution; 1 means no pooling layer.
    pub pools: Vec<usize>,
    pub extra_conv: Option<ExtraConv>,
    pub heads: Vec<Head>,
    pub min_hidden: usize,
    pub max_hidden: usize,
    pub max_width: usize,
    pub hidden_activation: Activation,
}

impl CnnSearchSpace {
    /// Shared prefix, pools of 2 to 4, an optional third convolution of up
    /// to 128 filters and kernel 16, flatten or global max pooling, and one
    /// or two hidden layers of up to 256 units.
    pub fn standard() -> Self {
        Self {
            input_len: INPUT_LEN,
            input_channels: INPUT_CHANNELS,
            num_classes: NUM_CLASSES,
            prefix: conv_prefix().to_vec(),
            pools: vec![1, 2, 3, 4],
            extra_conv: Some(ExtraConv {
                max_filters: 128,
                max_kernel: 16,
                activation: Activation::Relu,
            }),
            heads: vec![Head::Flatten, Head::GlobalMaxPool],
            min_hidden: 1,
            max_hidden: 2,
            max_width: 256,
            hidden_activation: Activation::Relu,
        }
    }

    /// Prefix plus a fixed recurrent head, as in the hybrid models.
    pub fn hybrid(recurrent: Vec<LayerSpec>) -> Self {
        Self {
            extra_conv: None,
            heads: vec![Head::Recurrent(recurrent)],
            hidden_activation: Activation::Tanh,
            ..Self::standard()
        }
    }

    /// `Flatten → [Dense(h)]* → Dense(K)` on the raw window.
    pub fn dense_only(min_hidden: usize, max_hidden: usize) -> Self {
        Self {
            prefix: Vec::new(),
            pools: vec![1],
            extra_conv: None,
            heads: vec![Head::Flatten],
            min_hidden,
            max_hidden,
            ..Self::standard()
        }
    }
}

/// `(layers, width sum, pools, extra conv, head, hidden)`.
pub type SortKey = (usize, usize, Vec<usize>, Option<(usize, usize)>, usize, Vec<usize>);

/// One point of the search space with its parameter count.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CnnCandidate {
    /// Pool size after each convolution (prefix convolutions, then the extra one).
    pub pools: Vec<usize>,
    /// `(filters, kernel)` of the extra convolution.
    pub extra_conv: Option<(usize, usize)>,
    /// Index into [`CnnSearchSpace::heads`].
    pub head: usize,
    pub hidden: Vec<usize>,
    pub params: usize,
    pub delta: i64,
}

impl CnnCandidate {
    /// Layers excluding dropout: convolutions, pools, head, hidden, output.
    pub fn layer_count(&self, space: &CnnSearchSpace) -> usize {
        space.prefix.len()
            + self.pools.iter().filter(|&&p| p > 1).count()
            + usize::from(self.extra_conv.is_some())
            + space.heads[self.head].layers().len()
            + self.hidden.len()
            + 1
    }

    /// Sum of the free widths: extra-conv filters plus hidden units.
    pub fn width_sum(&self) -> usize {
        self.extra_conv.map_or(0, |(f, _)| f) + self.hidden.iter().sum::<usize>()
    }

    /// Ordering used for results: fewest layers, then smallest widths, then
    /// the configuration itself.
    pub fn sort_key(&self, space: &CnnSearchSpace) -> SortKey {
        (
            self.layer_count(space),
            self.width_sum(),
            self.pools.clone(),
            self.extra_conv,
            self.head,
            self.hidden.clone(),
        )
    }

    /// Layer list without dropout.
    pub fn layers(&self, space: &CnnSearchSpace) -> Vec<LayerSpec> {
        let mut out = Vec::new();
        let mut pools = self.pools.iter();
        let push_pool = |out: &mut Vec<LayerSpec>, p: Option<&usize>| {
            if let Some(&p) = p.filter(|&&p| p > 1) {
                out.push(LayerSpec::MaxPool1d { pool: p });
            }
        };
        for &l in &space.prefix {
            out.push(l);
            if matches!(l, LayerSpec::Conv1d { .. }) {
                push_pool(&mut out, pools.next());
            }
        }
        if let (Some((filters, kernel)), Some(x)) = (self.extra_conv, space.extra_conv) {
            out.push(LayerSpec::Conv1d {
                filters,
                kernel,
                activation: x.activation,
            });
            push_pool(&mut out, pools.next());
        }
        out.extend(space.heads[self.head].layers());
        out.extend(self.hidden.iter().map(|&units| LayerSpec::Dense {
            units,
            activation: space.hidden_activation,
        }));
        out.push(LayerSpec::Dense {
            units: space.num_classes,
            activation: Activation::Softmax,
        });
        out
    }

    /// Full model with `Dropout(0.3)` after every hidden parameterised layer.
    pub fn to_spec(&self, space: &CnnSearchSpace, name: &str) -> ModelSpec {
        let layers = self.layers(space);
        let (output, hidden) = layers.split_last().expect("output layer");
        ModelSpec {
            name: name.to_string(),
            input_len: space.input_len,
            input_channels: space.input_channels,
            num_classes: space.num_classes,
            layers: with_dropout(hidden, *output),
        }
    }

    /// Readable one-line description, e.g. `conv24k4 conv56k5 gmp d174 d190 out4`.
    pub fn describe(&self, space: &CnnSearchSpace) -> String {
        self.layers(space)
            .iter()
            .map(|l| match *l {
                LayerSpec::Conv1d { filters, kernel, .. } => format!("conv{filters}k{kernel}"),
                LayerSpec::MaxPool1d { pool } => format!("pool{pool}"),
                LayerSpec::Flatten => "flatten".into(),
                LayerSpec::GlobalMaxPool1d => "gmp".into(),
                LayerSpec::Dense {
                    units,
                    activation: Activation::Softmax,
                } => format!("out{units}"),
                LayerSpec::Dense { units, .. } => format!("d{units}"),
                LayerSpec::SimpleRnn { units, .. } => format!("rnn{units}"),
                LayerSpec::Lstm { units, .. } => format!("lstm{units}"),
                LayerSpec::Gru { units, .. } => format!("gru{units}"),
                LayerSpec::Dropout { rate } => format!("drop{rate}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub target: usize,
    /// All exact matches in [`CnnCandidate::sort_key`] order.
    pub exact: Vec<CnnCandidate>,
    /// Filled only when there is no exact match: the `k` configurations with
    /// the smallest `|delta|`, ties by sort key.
    pub nearest: Vec<CnnCandidate>,
}

impl SolveResult {
    /// First exact match, else the nearest configuration.
    pub fn best(&self) -> Option<&CnnCandidate> {
        self.exact.first().or_else(|| self.nearest.first())
    }
}

#[derive(Clone)]
struct Feature {
    pools: Vec<usize>,
    extra_conv: Option<(usize, usize)>,
    head: usize,
}

fn push_layer(shape: FeatureShape, params: &mut usize, layer: &LayerSpec) -> Option<FeatureShape> {
    *params += layer.param_count_for(shape.last_dim());
    layer.output_shape(shape).ok()
}

fn pooled(shape: FeatureShape, pool: usize) -> Option<FeatureShape> {
    if pool > 1 {
        LayerSpec::MaxPool1d { pool }.output_shape(shape).ok()
    } else {
        Some(shape)
    }
}

fn pool_choices(space: &CnnSearchSpace, convs: usize) -> Vec<Vec<usize>> {
    let mut combos = vec![Vec::new()];
    for _ in 0..convs {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                space.pools.iter().map(move |&p| {
                    let mut c = c.clone();
                    c.push(p);
                    c
                })
            })
            .collect();
    }
    combos
}

/// Every valid feature stage, grouped by `(parameter count, feature width)`.
fn feature_groups(space: &CnnSearchSpace) -> BTreeMap<(usize, usize), Vec<Feature>> {
    let mut groups: BTreeMap<(usize, usize), Vec<Feature>> = BTreeMap::new();
    let n_convs = space
        .prefix
        .iter()
        .filter(|l| matches!(l, LayerSpec::Conv1d { .. }))
        .count();
    let input = FeatureShape::Sequence {
        len: space.input_len,
        channels: space.input_channels,
    };
    let mut extras = vec![None];
    if let Some(x) = space.extra_conv {
        for f in 1..=x.max_filters {
            for k in 1..=x.max_kernel {
                extras.push(Some((f, k)));
            }
        }
    }
    for prefix_pools in pool_choices(space, n_convs) {
        let mut params = 0;
        let mut shape = Some(input);
        let mut pools = prefix_pools.iter();
        for l in &space.prefix {
            shape = shape.and_then(|s| push_layer(s, &mut params, l));
            if matches!(l, LayerSpec::Conv1d { .. }) {
                let p = *pools.next().unwrap();
                shape = shape.and_then(|s| pooled(s, p));
            }
        }
        let Some(base_shape) = shape else { continue };
        for &extra in &extras {
            let extra_pools: Vec<usize> = if extra.is_some() { space.pools.clone() } else { vec![0] };
            for p3 in extra_pools {
                let mut params = params;
                let mut shape = Some(base_shape);
                if let (Some((filters, kernel)), Some(x)) = (extra, space.extra_conv) {
                    let layer = LayerSpec::Conv1d {
                        filters,
                        kernel,
                        activation: x.activation,
                    };
                    shape = shape
                        .and_then(|s| push_layer(s, &mut params, &layer))
                        .and_then(|s| pooled(s, p3));
                }
                let Some(stage_shape) = shape else { continue };
                for (hi, head) in space.heads.iter().enumerate() {
                    let mut params = params;
                    let mut shape = Some(stage_shape);
                    for l in head.layers() {
                        shape = shape.and_then(|s| push_layer(s, &mut params, &l));
                    }
                    if let Some(FeatureShape::Flat(width)) = shape {
                        let mut pools = prefix_pools.clone();
                        if extra.is_some() {
                            pools.push(p3);
                        }
                        groups.entry((params, width)).or_default().push(Feature {
                            pools,
                            extra_conv: extra,
                            head: hi,
                        });
                    }
                }
            }
        }
    }
    groups
}

/// Dense-tail parameter count for `hidden` widths on `width` features.
fn tail_params(width: usize, hidden: &[usize], classes: usize) -> usize {
    let mut n_in = width;
    let mut total = 0;
    for &h in hidden.iter().chain(std::iter::once(&classes)) {
        total += n_in * h + h;
        n_in = h;
    }
    total
}

/// Hidden-width tuples whose tail count is exactly `rem`.
fn exact_tails(space: &CnnSearchSpace, width: usize, rem: usize) -> Vec<Vec<usize>> {
    let k = space.num_classes;
    let w = space.max_width;
    let mut out = Vec::new();
    for depth in space.min_hidden..=space.max_hidden {
        match depth {
            0 => {
                if width * k + k == rem {
                    out.push(vec![]);
                }
            }
            1 => {
                let denom = width + 1 + k;
                if rem > k && (rem - k) % denom == 0 {
                    let h = (rem - k) / denom;
                    if (1..=w).contains(&h) {
                        out.push(vec![h]);
                    }
                }
            }
            2 => {
                for h2 in 1..=w {
                    let fixed = k + h2 * (k + 1);
                    if rem <= fixed {
                        break;
                    }
                    let denom = width + 1 + h2;
                    if (rem - fixed) % denom == 0 {
                        let h1 = (rem - fixed) / denom;
                        if (1..=w).contains(&h1) {
                            out.push(vec![h1, h2]);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Hidden-width tuples near the root of `tail = rem`, `reach` on each side.
fn near_tails(space: &CnnSearchSpace, width: usize, rem: i64, reach: usize) -> Vec<Vec<usize>> {
    let k = space.num_classes as i64;
    let w = space.max_width;
    let around = |root: i64| -> Vec<usize> {
        let root = root.clamp(1, w.max(1) as i64);
        let lo = (root - reach as i64 + 1).max(1);
        let hi = (root + reach as i64).min(w as i64);
        (lo..=hi).map(|h| h as usize).collect()
    };
    let mut out = Vec::new();
    for depth in space.min_hidden..=space.max_hidden {
        match depth {
            0 => out.push(vec![]),
            1 => {
                let root = (rem - k).div_euclid(width as i64 + 1 + k);
                out.extend(around(root).into_iter().map(|h| vec![h]));
            }
            2 => {
                for h2 in 1..=w {
                    let root = (rem - k - h2 as i64 * (k + 1)).div_euclid(width as i64 + 1 + h2 as i64);
                    out.extend(around(root).into_iter().map(|h1| vec![h1, h2]));
                }
            }
            _ => {}
        }
    }
    out
}

fn check_space(space: &CnnSearchSpace) -> Result<()> {
    if space.heads.is_empty() || space.pools.is_empty() || space.min_hidden > space.max_hidden {
        return Err(Error::InvalidConfig("empty search space".into()));
    }
    if space.max_hidden > 2 {
        return Err(Error::InvalidConfig(
            "at most two hidden dense layers are searched".into(),
        ));
    }
    if space.max_width == 0 && space.max_hidden > 0 {
        return Err(Error::InvalidConfig("max_width must be positive".into()));
    }
    Ok(())
}

/// Enumerates `space` for configurations with exactly `target` parameters.
/// Without an exact match, returns the `k` nearest instead.
pub fn solve_conv_architecture(target: usize, space: &CnnSearchSpace, k: usize) -> Result<SolveResult> {
    check_space(space)?;
    let groups = feature_groups(space);
    if groups.is_empty() {
        return Err(Error::InvalidConfig("search space has no valid configuration".into()));
    }
    let mut exact = Vec::new();
    for (&(base, width), members) in &groups {
        if base > target {
            continue;
        }
        for hidden in exact_tails(space, width, target - base) {
            for m in members {
                exact.push(CnnCandidate {
                    pools: m.pools.clone(),
                    extra_conv: m.extra_conv,
                    head: m.head,
                    hidden: hidden.clone(),
                    params: target,
                    delta: 0,
                });
            }
        }
    }
    exact.sort_by_cached_key(|c| c.sort_key(space));
    let nearest = if exact.is_empty() && k > 0 {
        nearest_k(target, space, &groups, k)
    } else {
        Vec::new()
    };
    Ok(SolveResult { target, exact, nearest })
}

fn nearest_k(
    target: usize,
    space: &CnnSearchSpace,
    groups: &BTreeMap<(usize, usize), Vec<Feature>>,
    k: usize,
) -> Vec<CnnCandidate> {
    // max-heap on (|delta|, key) keeps the k best seen so far
    let mut heap: BinaryHeap<(u64, SortKey, CnnCandidate)> = BinaryHeap::new();
    for (&(base, width), members) in groups {
        let rem = target as i64 - base as i64;
        for hidden in near_tails(space, width, rem, k) {
            let params = base + tail_params(width, &hidden, space.num_classes);
            let delta = params as i64 - target as i64;
            let dist = delta.unsigned_abs();
            if heap.len() == k && heap.peek().is_some_and(|top| dist > top.0) {
                continue;
            }
            for m in members {
                let c = CnnCandidate {
                    pools: m.pools.clone(),
                    extra_conv: m.extra_conv,
                    head: m.head,
                    hidden: hidden.clone(),
                    params,
                    delta,
                };
                let key = c.sort_key(space);
                let entry = (dist, key, c);
                if heap.len() < k {
                    heap.push(entry);
                } else if heap.peek().is_some_and(|top| (entry.0, &entry.1) < (top.0, &top.1)) {
                    heap.pop();
                    heap.push(entry);
                }
            }
        }
    }
    heap.into_sorted_vec().into_iter().map(|(_, _, c)| c).collect()
}
