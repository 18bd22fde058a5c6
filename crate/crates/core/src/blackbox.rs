//! Batch probabilistic classifiers: seeded synthetic models for desk-scale
//! experiments and an HTTP client for remote models.

use std::sync::Arc;
use std::time::Duration;

use base64::Engine as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Instance, InterpretableDomain};
use crate::error::{Error, Result};
use crate::point::InterpretablePoint;

/// Rows of class probabilities, one per instance.
pub type ProbabilityMatrix = Vec<Vec<f64>>;

const ROW_SUM_TOLERANCE: f64 = 1e-9;
/// Remote models commonly emit single precision.
const REMOTE_ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Largest `d` a boolean-table model will materialise.
pub const MAX_TABLE_DIM: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    SegmentLogit,
    BooleanTable,
    XorPair,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segment-logit" => Ok(Self::SegmentLogit),
            "boolean-table" => Ok(Self::BooleanTable),
            "xor-pair" => Ok(Self::XorPair),
            other => Err(Error::invalid(format!("unknown synthetic family {other:?}"))),
        }
    }
}

impl std::fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SegmentLogit => "segment-logit",
            Self::BooleanTable => "boolean-table",
            Self::XorPair => "xor-pair",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub d: usize,
    pub class_count: usize,
    pub seed: u64,
}

/// A deterministic classifier over segment-presence bits.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticModel {
    d: usize,
    class_count: usize,
    body: ModelBody,
}

#[derive(Clone, Debug, PartialEq)]
enum ModelBody {
    Logit {
        bias: Vec<f64>,
        /// `class_count x d`
        weights: Vec<Vec<f64>>,
        /// `(i, j, per-class weight)` with `i < j`
        interactions: Vec<(usize, usize, Vec<f64>)>,
    },
    /// Indexed by [`InterpretablePoint::index`].
    Table(Vec<Vec<f64>>),
}

/// Logit scale of the xor-pair family; keeps the two xor states far apart.
const XOR_SCALE: f64 = 8.0;
const LOGIT_WEIGHT_SD: f64 = 2.0;
const LOGIT_INTERACTION_SD: f64 = 1.0;
const LOGIT_BIAS_SD: f64 = 1.0;
const TABLE_LOGIT_SD: f64 = 2.0;

impl SyntheticModel {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        if spec.d == 0 {
            return Err(Error::invalid("synthetic model needs d >= 1"));
        }
        if spec.class_count < 2 {
            return Err(Error::invalid("synthetic model needs at least 2 classes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (d, k) = (spec.d, spec.class_count);
        let body = match spec.kind {
            SyntheticKind::SegmentLogit => {
                let bias_dist = Normal::new(0.0, LOGIT_BIAS_SD).expect("finite sd");
                let w_dist = Normal::new(0.0, LOGIT_WEIGHT_SD).expect("finite sd");
                let u_dist = Normal::new(0.0, LOGIT_INTERACTION_SD).expect("finite sd");
                let bias = (0..k).map(|_| bias_dist.sample(&mut rng)).collect();
                let weights = (0..k)
                    .map(|_| (0..d).map(|_| w_dist.sample(&mut rng)).collect())
                    .collect();
                let mut interactions = Vec::new();
                for i in 0..d {
                    for j in i + 1..d {
                        interactions.push((i, j, (0..k).map(|_| u_dist.sample(&mut rng)).collect()));
                    }
                }
                ModelBody::Logit {
                    bias,
                    weights,
                    interactions,
                }
            }
            SyntheticKind::BooleanTable => {
                if d > MAX_TABLE_DIM {
                    return Err(Error::Capacity {
                        what: "boolean-table rows",
                        needed: 1u128 << d,
                        cap: 1u128 << MAX_TABLE_DIM,
                    });
                }
                let dist = Normal::new(0.0, TABLE_LOGIT_SD).expect("finite sd");
                let rows = (0..1u64 << d)
                    .map(|_| {
                        let logits: Vec<f64> = (0..k).map(|_| dist.sample(&mut rng)).collect();
                        softmax(&logits)
                    })
                    .collect();
                ModelBody::Table(rows)
            }
            SyntheticKind::XorPair => {
                if d < 2 {
                    return Err(Error::invalid("xor-pair family needs d >= 2"));
                }
                // class 0 carries the xor; the rest sit at constant logits
                // around the midpoint so the two xor states are separated.
                let mut bias = vec![0.0; k];
                bias[0] = -XOR_SCALE / 2.0;
                for b in bias.iter_mut().skip(1) {
                    *b = rng.random_range(-0.5..0.5);
                }
                let mut weights = vec![vec![0.0; d]; k];
                weights[0][0] = XOR_SCALE;
                weights[0][1] = XOR_SCALE;
                let mut xor = vec![0.0; k];
                xor[0] = -2.0 * XOR_SCALE;
                ModelBody::Logit {
                    bias,
                    weights,
                    interactions: vec![(0, 1, xor)],
                }
            }
        };
        Ok(Self {
            d,
            class_count: k,
            body,
        })
    }

    /// Logit model from explicit parameters.
    pub fn logit(
        bias: Vec<f64>,
        weights: Vec<Vec<f64>>,
        interactions: Vec<(usize, usize, Vec<f64>)>,
    ) -> Result<Self> {
        let k = bias.len();
        if k < 2 {
            return Err(Error::invalid("logit model needs at least 2 classes"));
        }
        if weights.len() != k {
            return Err(Error::invalid("one weight vector per class required"));
        }
        let d = weights[0].len();
        if d == 0 || weights.iter().any(|w| w.len() != d) {
            return Err(Error::invalid("weight vectors must share a non-zero length"));
        }
        for (i, j, u) in &interactions {
            if i >= j || *j >= d || u.len() != k {
                return Err(Error::invalid(format!("bad interaction term ({i}, {j})")));
            }
        }
        Ok(Self {
            d,
            class_count: k,
            body: ModelBody::Logit {
                bias,
                weights,
                interactions,
            },
        })
    }

    /// Table model; row `i` is the probability row of the point with index `i`.
    pub fn table(d: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if d == 0 || d > MAX_TABLE_DIM {
            return Err(Error::invalid(format!("table dimension {d} out of range")));
        }
        if rows.len() != 1 << d {
            return Err(Error::invalid(format!(
                "table over d = {d} needs {} rows, got {}",
                1u64 << d,
                rows.len()
            )));
        }
        let k = rows[0].len();
        if k < 2 {
            return Err(Error::invalid("table rows need at least 2 classes"));
        }
        for row in &rows {
            if row.len() != k {
                return Err(Error::invalid("table rows differ in length"));
            }
            check_row(row, ROW_SUM_TOLERANCE).map_err(Error::InvalidArgument)?;
        }
        Ok(Self {
            d,
            class_count: k,
            body: ModelBody::Table(rows),
        })
    }

    /// Table model built by evaluating `f` on every point.
    pub fn from_fn(d: usize, f: impl Fn(&InterpretablePoint) -> Vec<f64>) -> Result<Self> {
        if d == 0 || d > MAX_TABLE_DIM {
            return Err(Error::invalid(format!("table dimension {d} out of range")));
        }
        let rows = (0..1u64 << d)
            .map(|i| f(&InterpretablePoint::from_index(i, d)))
            .collect();
        Self::table(d, rows)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Class probabilities for a segment-presence pattern.
    pub fn evaluate(&self, bits: &InterpretablePoint) -> Result<Vec<f64>> {
        bits.check_len(self.d)?;
        Ok(match &self.body {
            ModelBody::Table(rows) => rows[bits.index() as usize].clone(),
            ModelBody::Logit {
                bias,
                weights,
                interactions,
            } => {
                let x = bits.bits();
                let mut logits = bias.clone();
                for (c, w) in weights.iter().enumerate() {
                    for (i, wi) in w.iter().enumerate() {
                        if x[i] {
                            logits[c] += wi;
                        }
                    }
                }
                for (i, j, u) in interactions {
                    if x[*i] && x[*j] {
                        for (l, ui) in logits.iter_mut().zip(u) {
                            *l += ui;
                        }
                    }
                }
                softmax(&logits)
            }
        })
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_row(row: &[f64], tolerance: f64) -> std::result::Result<(), String> {
    if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(format!("probability {v} outside [0, 1]"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tolerance {
        return Err(format!("probability row sums to {sum}"));
    }
    Ok(())
}

/// Where a remote model lives and how to talk to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteEndpoint {
    pub url: String,
    /// Instances per request.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Requests allowed in flight at once.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Extra attempts after a transport failure.
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_batch_size() -> usize {
    64
}
fn default_in_flight() -> usize {
    4
}
fn default_retries() -> u32 {
    2
}
fn default_timeout_ms() -> u64 {
    30_000
}

impl RemoteEndpoint {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            batch_size: default_batch_size(),
            max_in_flight: default_in_flight(),
            retries: default_retries(),
            timeout_ms: default_timeout_ms(),
        }
    }
}

/// Wire body sent to a remote model.
#[derive(Debug, Serialize, Deserialize)]
pub struct PredictRequest {
    pub instances: Vec<WireInstance>,
}

/// An image travels as base64 PPM, text as its token list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireInstance {
    Image(String),
    Tokens(Vec<String>),
}

impl WireInstance {
    pub fn encode(instance: &Instance) -> Self {
        match instance {
            Instance::Image(_) => WireInstance::Image(
                base64::engine::general_purpose::STANDARD
                    .encode(instance.to_ppm().expect("image instance")),
            ),
            Instance::Text(tokens) => WireInstance::Tokens(tokens.clone()),
        }
    }

    pub fn decode(&self) -> Result<Instance> {
        match self {
            WireInstance::Tokens(t) => Ok(Instance::Text(t.clone())),
            WireInstance::Image(b64) => {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(b64)
                    .map_err(|e| Error::Media(format!("bad base64 image: {e}")))?;
                Ok(Instance::Image(crate::domain::decode_image(&bytes)?))
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictResponse {
    pub probabilities: ProbabilityMatrix,
}

#[derive(Clone, Debug)]
pub struct RemoteModel {
    endpoint: RemoteEndpoint,
    agent: ureq::Agent,
}

impl RemoteModel {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { endpoint, agent }
    }

    pub fn endpoint(&self) -> &RemoteEndpoint {
        &self.endpoint
    }

    fn post_batch(&self, instances: &[Instance]) -> Result<ProbabilityMatrix> {
        let body = serde_json::to_vec(&PredictRequest {
            instances: instances.iter().map(WireInstance::encode).collect(),
        })?;
        let mut attempts = 0;
        let mut response = loop {
            attempts += 1;
            match self
                .agent
                .post(&self.endpoint.url)
                .header("content-type", "application/json")
                .send(&body[..])
            {
                Ok(r) => break r,
                Err(e) if attempts > self.endpoint.retries => {
                    return Err(Error::Transport {
                        endpoint: self.endpoint.url.clone(),
                        attempts,
                        message: e.to_string(),
                    })
                }
                Err(_) => std::thread::sleep(Duration::from_millis(50 * u64::from(attempts))),
            }
        };
        let status = response.status();
        let text = response
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| Error::Transport {
                endpoint: self.endpoint.url.clone(),
                attempts,
                message: e.to_string(),
            })?;
        if status != 200 {
            return Err(Error::Protocol(format!("remote model answered HTTP {status}")));
        }
        let parsed: PredictResponse = serde_json::from_str(&text)
            .map_err(|e| Error::Protocol(format!("malformed response body: {e}")))?;
        if parsed.probabilities.len() != instances.len() {
            return Err(Error::Protocol(format!(
                "sent {} instances, received {} rows",
                instances.len(),
                parsed.probabilities.len()
            )));
        }
        Ok(parsed.probabilities)
    }

    /// Splits the batch into requests, keeps at most `max_in_flight` of them
    /// running, and reassembles rows in request order.
    fn predict(&self, instances: &[Instance]) -> Result<ProbabilityMatrix> {
        let chunks: Vec<&[Instance]> = instances.chunks(self.endpoint.batch_size.max(1)).collect();
        let mut out = Vec::with_capacity(instances.len());
        for wave in chunks.chunks(self.endpoint.max_in_flight.max(1)) {
            let results: Vec<Result<ProbabilityMatrix>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|chunk| s.spawn(move || self.post_batch(chunk)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("request thread panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
enum Source {
    Synthetic {
        model: Arc<SyntheticModel>,
        /// The binding perceives instances through this domain's decoder.
        perception: Arc<InterpretableDomain>,
    },
    Remote(RemoteModel),
}

/// A probabilistic classifier `f` that consumes concrete instances.
#[derive(Clone, Debug)]
pub struct BlackBoxBinding {
    source: Source,
    class_count: usize,
    class_names: Option<Vec<String>>,
}

impl BlackBoxBinding {
    /// Binds a synthetic model to the domain whose instances it will see.
    pub fn synthetic(model: SyntheticModel, domain: &InterpretableDomain) -> Result<Self> {
        if model.d() != domain.d() {
            return Err(Error::invalid(format!(
                "model expects d = {}, domain has d = {}",
                model.d(),
                domain.d()
            )));
        }
        Ok(Self {
            class_count: model.class_count(),
            source: Source::Synthetic {
                model: Arc::new(model),
                perception: Arc::new(domain.clone()),
            },
            class_names: None,
        })
    }

    pub fn remote(endpoint: RemoteEndpoint, class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::invalid("a classifier needs at least 2 classes"));
        }
        Ok(Self {
            source: Source::Remote(RemoteModel::new(endpoint)),
            class_count,
            class_names: None,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.class_count {
            return Err(Error::invalid("one name per class required"));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn synthetic_model(&self) -> Option<&SyntheticModel> {
        match &self.source {
            Source::Synthetic { model, .. } => Some(model),
            Source::Remote(_) => None,
        }
    }

    /// `f` applied to each instance, in order.
    pub fn predict_batch(&self, instances: &[Instance]) -> Result<ProbabilityMatrix> {
        let first = instances
            .first()
            .ok_or_else(|| Error::invalid("predict_batch needs at least one instance"))?;
        if instances.iter().any(|i| i.kind() != first.kind()) {
            return Err(Error::invalid("instances in one batch must share a domain kind"));
        }
        match &self.source {
            Source::Synthetic { model, perception } => instances
                .iter()
                .map(|inst| model.evaluate(&perception.decode_occlusion(inst)?))
                .collect(),
            Source::Remote(remote) => {
                let rows = remote.predict(instances)?;
                for row in &rows {
                    if row.len() != self.class_count {
                        return Err(Error::Protocol(format!(
                            "expected {} probabilities per row, got {}",
                            self.class_count,
                            row.len()
                        )));
                    }
                    check_row(row, REMOTE_ROW_SUM_TOLERANCE).map_err(Error::Protocol)?;
                }
                Ok(rows)
            }
        }
    }

    /// Decodes `points` through `domain` and classifies them, `chunk` at a
    /// time so only one chunk of decoded instances is alive at once.
    pub fn predict_points(
        &self,
        domain: &InterpretableDomain,
        points: &[InterpretablePoint],
        chunk: usize,
    ) -> Result<ProbabilityMatrix> {
        let mut out = Vec::with_capacity(points.len());
        for part in points.chunks(chunk.max(1)) {
            let instances = part
                .iter()
                .map(|p| domain.from_interpretable(p))
                .collect::<Result<Vec<_>>>()?;
            out.extend(self.predict_batch(&instances)?);
        }
        Ok(out)
    }
}

/// Default decode-and-classify chunk size.
pub const DEFAULT_BATCH: usize = 64;

/// Serializable description from which a binding can be rebuilt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BlackBoxDescriptor {
    Synthetic {
        family: SyntheticKind,
        class_count: usize,
        seed: u64,
    },
    /// Explicit probability table indexed by point value (feature 0 is the
    /// most significant bit).
    Table { rows: Vec<Vec<f64>> },
    Remote {
        #[serde(flatten)]
        endpoint: RemoteEndpoint,
        #[serde(default)]
        class_count: Option<usize>,
    },
}

impl BlackBoxDescriptor {
    /// Builds the binding for `domain`. Remote descriptors without a class
    /// count are probed with the anchor to learn it (and to check the model
    /// is reachable).
    pub fn bind(&self, domain: &InterpretableDomain) -> Result<BlackBoxBinding> {
        match self {
            BlackBoxDescriptor::Synthetic {
                family,
                class_count,
                seed,
            } => {
                let spec = SyntheticSpec {
                    kind: *family,
                    d: domain.d(),
                    class_count: *class_count,
                    seed: *seed,
                };
                BlackBoxBinding::synthetic(SyntheticModel::new(&spec)?, domain)
            }
            BlackBoxDescriptor::Table { rows } => {
                let d = rows.len().trailing_zeros() as usize;
                BlackBoxBinding::synthetic(SyntheticModel::table(d, rows.clone())?, domain)
            }
            BlackBoxDescriptor::Remote {
                endpoint,
                class_count,
            } => {
                let probe = RemoteModel::new(endpoint.clone())
                    .post_batch(std::slice::from_ref(domain.anchor()))?;
                let k = probe[0].len();
                if let Some(expected) = class_count {
                    if *expected != k {
                        return Err(Error::Protocol(format!(
                            "descriptor says {expected} classes, model returned {k}"
                        )));
                    }
                }
                let binding = BlackBoxBinding::remote(endpoint.clone(), k)?;
                binding.predict_batch(std::slice::from_ref(domain.anchor()))?;
                Ok(binding)
            }
        }
    }
}

impl BlackBoxDescriptor {
    /// Like [`Self::bind`] but trusts a previously learned class count for
    /// remote models instead of probing them.
    pub fn bind_known(&self, domain: &InterpretableDomain, class_count: usize) -> Result<BlackBoxBinding> {
        match self {
            BlackBoxDescriptor::Remote { endpoint, .. } => {
                BlackBoxBinding::remote(endpoint.clone(), class_count)
            }
            other => other.bind(domain),
        }
    }
}

/// Convenience wrapper: a synthetic binding for `spec` over `domain`.
pub fn make_synthetic(spec: &SyntheticSpec, domain: &InterpretableDomain) -> Result<BlackBoxBinding> {
    BlackBoxBinding::synthetic(SyntheticModel::new(spec)?, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::Segmentation;
    use image::{Rgb, RgbImage};

    fn domain(d: u32) -> InterpretableDomain {
        let img = RgbImage::from_fn(4 * d, 4, |x, y| Rgb([40 + (x % 7) as u8, 90, 10 + y as u8]));
        InterpretableDomain::image(
            img,
            Segmentation::grid(4 * d, 4, 1, d).unwrap(),
            Default::default(),
        )
        .unwrap()
    }

    fn all_points(d: usize) -> Vec<InterpretablePoint> {
        (0..1u64 << d).map(|i| InterpretablePoint::from_index(i, d)).collect()
    }

    #[test]
    fn segment_logit_single_row_normalised_and_deterministic() {
        let dom = domain(3);
        let spec = SyntheticSpec {
            kind: SyntheticKind::SegmentLogit,
            d: 3,
            class_count: 2,
            seed: 7,
        };
        let bb = make_synthetic(&spec, &dom).unwrap();
        let a = bb.predict_batch(std::slice::from_ref(dom.anchor())).unwrap();
        assert_eq!(a.len(), 1);
        assert!((a[0].iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let b = bb.predict_batch(std::slice::from_ref(dom.anchor())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn xor_pair_rows_follow_parity() {
        let dom = domain(2);
        let spec = SyntheticSpec {
            kind: SyntheticKind::XorPair,
            d: 2,
            class_count: 2,
            seed: 0,
        };
        let bb = make_synthetic(&spec, &dom).unwrap();
        let rows = bb.predict_points(&dom, &all_points(2), 64).unwrap();
        // order: 00, 01, 10, 11
        assert_eq!(rows[1], rows[2]);
        assert_eq!(rows[0], rows[3]);
        assert_ne!(rows[0], rows[1]);
        assert!(rows[1][0] > 0.95 && rows[0][0] < 0.05);
    }

    #[test]
    fn boolean_table_reproducible() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::BooleanTable,
            d: 2,
            class_count: 2,
            seed: 1,
        };
        let a = SyntheticModel::new(&spec).unwrap();
        let b = SyntheticModel::new(&spec).unwrap();
        assert_eq!(a, b);
        for p in all_points(2) {
            assert_eq!(a.evaluate(&p).unwrap(), b.evaluate(&p).unwrap());
        }
    }

    #[test]
    fn segment_logit_256_rows_on_simplex() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::SegmentLogit,
            d: 8,
            class_count: 3,
            seed: 3,
        };
        let m = SyntheticModel::new(&spec).unwrap();
        for p in all_points(8) {
            let row = m.evaluate(&p).unwrap();
            assert_eq!(row.len(), 3);
            check_row(&row, ROW_SUM_TOLERANCE).unwrap();
        }
    }

    #[test]
    fn preconditions() {
        let mut spec = SyntheticSpec {
            kind: SyntheticKind::SegmentLogit,
            d: 0,
            class_count: 2,
            seed: 0,
        };
        assert!(SyntheticModel::new(&spec).is_err());
        spec.d = 2;
        spec.class_count = 1;
        assert!(SyntheticModel::new(&spec).is_err());
    }

    #[test]
    fn empty_and_mixed_batches_rejected() {
        let dom = domain(2);
        let bb = make_synthetic(
            &SyntheticSpec {
                kind: SyntheticKind::SegmentLogit,
                d: 2,
                class_count: 2,
                seed: 0,
            },
            &dom,
        )
        .unwrap();
        assert!(bb.predict_batch(&[]).is_err());
        let mixed = vec![dom.anchor().clone(), Instance::Text(vec!["a".into()])];
        assert!(bb.predict_batch(&mixed).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(SyntheticModel::table(1, vec![vec![0.5, 0.5]]).is_err());
        assert!(SyntheticModel::table(1, vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(SyntheticModel::table(1, vec![vec![0.5, 0.5], vec![1.0, 0.0]]).is_ok());
    }

    #[test]
    fn wire_instance_round_trip() {
        let dom = domain(2);
        let wire = WireInstance::encode(dom.anchor());
        assert_eq!(&wire.decode().unwrap(), dom.anchor());
        let json = serde_json::to_string(&WireInstance::encode(&Instance::Text(vec!["a".into()])))
            .unwrap();
        assert_eq!(json, r#"["a"]"#);
    }

    #[test]
    fn descriptor_json_shapes() {
        let d: BlackBoxDescriptor = serde_json::from_str(
            r#"{"kind":"synthetic","family":"segment-logit","class_count":3,"seed":7}"#,
        )
        .unwrap();
        assert!(matches!(d, BlackBoxDescriptor::Synthetic { class_count: 3, .. }));
        let r: BlackBoxDescriptor =
            serde_json::from_str(r#"{"kind":"remote","url":"http://127.0.0.1:1/predict"}"#).unwrap();
        match r {
            BlackBoxDescriptor::Remote { endpoint, class_count } => {
                assert_eq!(endpoint.batch_size, 64);
                assert_eq!(class_count, None);
            }
            _ => panic!("expected remote"),
        }
    }

    #[test]
    fn unreachable_remote_is_transport_error() {
        let mut ep = RemoteEndpoint::new("http://127.0.0.1:9/predict");
        ep.retries = 1;
        ep.timeout_ms = 500;
        let bb = BlackBoxBinding::remote(ep, 2).unwrap();
        match bb.predict_batch(&[Instance::Text(vec!["x".into()])]) {
            Err(Error::Transport { attempts, .. }) => assert_eq!(attempts, 2),
            other => panic!("expected transport error, got {other:?}"),
        }
    }
}
