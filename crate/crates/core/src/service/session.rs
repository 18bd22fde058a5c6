//! One explained instance with its domain, black box and fitted surrogates,
//! plus the fit pipeline shared with the command line.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::bench::Method;
use crate::blackbox::{BlackBoxBinding, BlackBoxDescriptor, DEFAULT_BATCH};
use crate::domain::{decode_image, encode_png, DomainDescriptor, DomainKind, Instance, InterpretableDomain, OcclusionStrategy};
use crate::error::{Error, Result};
use crate::explain::{
    counterfactual, default_oracle, exemplars, extract_rule, feature_importance, render_tree,
    shortest_explanation, what_if, ClassFilter, CounterfactualQuery, ExplanationResult, Oracle,
    DEFAULT_CANDIDATE_CAP,
};
use crate::fidelity::{
    complete_from_rows, complete_report, injectivity_warning, relabel_leaves, verify_fidelity,
    FidelityScope,
};
use crate::lime::{lime_explain_labelled, LinearSurrogate, DEFAULT_ALPHA};
use crate::point::InterpretablePoint;
use crate::sampling::{
    check_enumerable, enumerate_domain, WeightedSample, DEFAULT_ENUMERATION_CAP,
    DEFAULT_KERNEL_WIDTH, DEFAULT_SAMPLE_BUDGET,
};
use crate::segmentation::Segmentation;
use crate::tree::{
    fit_limetree_labelled, loss_limetree, top_classes, FitReport, LabelledSample, SurrogateTree,
    Variant,
};

pub const DEFAULT_FIT_EPSILON: f64 = 0.95;
pub const DEFAULT_TOP: usize = 3;

fn b64() -> base64::engine::GeneralPurpose {
    base64::engine::general_purpose::STANDARD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSource {
    /// Base64 PNG or PPM, 8-bit RGB.
    Image { data: String },
    /// Whitespace tokens unless byte `spans` are given.
    Text {
        text: String,
        #[serde(default)]
        spans: Option<Vec<(usize, usize)>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SegmentationSource {
    Grid { rows: u32, cols: u32 },
    /// Base64 single-channel PNG/PGM of segment ids.
    Mask { data: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub instance: InstanceSource,
    #[serde(default)]
    pub segmentation: Option<SegmentationSource>,
    #[serde(default)]
    pub occlusion: Option<OcclusionStrategy>,
    pub blackbox: BlackBoxDescriptor,
    #[serde(default)]
    pub class_names: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    /// Explain the `top` most probable classes at the anchor.
    #[serde(default)]
    pub top: Option<usize>,
    /// Explicit class ids; overrides `top`.
    #[serde(default)]
    pub classes: Option<Vec<usize>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_variants")]
    pub variants: Vec<Method>,
    #[serde(default = "default_width")]
    pub kernel_width: f64,
    #[serde(default = "default_budget")]
    pub sample_budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub depth_cap: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_FIT_EPSILON
}
fn default_variants() -> Vec<Method> {
    vec![Method::Limet]
}
fn default_width() -> f64 {
    DEFAULT_KERNEL_WIDTH
}
fn default_budget() -> usize {
    DEFAULT_SAMPLE_BUDGET
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl Default for FitRequest {
    fn default() -> Self {
        Self {
            top: None,
            classes: None,
            epsilon: DEFAULT_FIT_EPSILON,
            variants: default_variants(),
            kernel_width: DEFAULT_KERNEL_WIDTH,
            sample_budget: DEFAULT_SAMPLE_BUDGET,
            seed: 0,
            depth_cap: None,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimeReport {
    pub loss: f64,
    pub surrogates: Vec<LinearSurrogate>,
    /// Per class: features by decreasing coefficient magnitude.
    pub ranking: Vec<Vec<(usize, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub classes: Vec<usize>,
    pub anchor_probabilities: Vec<f64>,
    pub reports: Vec<FitReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lime: Option<LimeReport>,
    #[serde(skip)]
    pub trees: BTreeMap<Variant, SurrogateTree>,
}

/// Samples around the anchor, queries the black box once and fits every
/// requested surrogate on that sample.
pub fn run_fit(
    domain: &InterpretableDomain,
    bb: &BlackBoxBinding,
    req: &FitRequest,
) -> Result<FitOutcome> {
    let d = domain.d();
    if req.variants.is_empty() {
        return Err(Error::invalid("at least one variant must be requested"));
    }
    let anchor_probabilities = bb
        .predict_points(domain, &[InterpretablePoint::ones(d)], 1)?
        .pop()
        .expect("one row");
    let classes = match (&req.classes, req.top) {
        (Some(c), _) => {
            if c.is_empty() || c.iter().any(|&k| k >= bb.class_count()) {
                return Err(Error::invalid(format!(
                    "classes must be non-empty ids below {}",
                    bb.class_count()
                )));
            }
            c.clone()
        }
        (None, top) => {
            let n = top.unwrap_or(DEFAULT_TOP).min(bb.class_count());
            if n == 0 {
                return Err(Error::invalid("top must be at least 1"));
            }
            top_classes(&anchor_probabilities, n)
        }
    };
    let depth_cap = req.depth_cap.unwrap_or(d);

    let sample = WeightedSample::around_anchor(d, req.sample_budget, req.kernel_width, req.seed)?;
    let labelled = LabelledSample::query(bb, domain, sample)?;
    let targets = labelled.targets(&classes)?;
    let points = &labelled.sample.points;
    let weights = &labelled.sample.weights;
    let warning = injectivity_warning(domain);

    let mut trees = BTreeMap::new();
    let mut reports = Vec::new();
    let wants = |m: Method| req.variants.contains(&m);

    if wants(Method::Limet) || wants(Method::LimetRelabeled) {
        let (tree, mut report) = fit_limetree_labelled(&labelled, &classes, req.epsilon, depth_cap)?;
        if wants(Method::LimetRelabeled) {
            let relabeled = relabel_leaves(&tree, bb, domain)?;
            let loss = loss_limetree(&targets, &relabeled.predict_many(points)?, weights)?;
            let check = verify_fidelity(&relabeled, bb, domain, FidelityScope::MinimalSet)?;
            let mut r = report.clone();
            r.variant = Variant::LimetRelabeled;
            r.final_loss = loss;
            r.fidelity = 1.0 - loss;
            r.epsilon_met = 1.0 - loss >= req.epsilon;
            r.certified = Some(check.certified);
            r.warnings.extend(warning.clone());
            reports.push(r);
            trees.insert(Variant::LimetRelabeled, relabeled);
        }
        if wants(Method::Limet) {
            report.warnings.extend(warning.clone());
            reports.insert(0, report);
            trees.insert(Variant::Limet, tree);
        }
    }
    if wants(Method::LimetComplete) {
        check_enumerable(d, DEFAULT_ENUMERATION_CAP)?;
        let all = enumerate_domain(d)?;
        let rows = if labelled.sample.len() == all.len() && labelled.sample.points == all {
            labelled.probabilities.clone()
        } else {
            bb.predict_points(domain, &all, DEFAULT_BATCH)?
        };
        let tree = complete_from_rows(d, &rows, &classes)?;
        let mut report = complete_report(&tree, &rows, req.kernel_width)?;
        report.warnings.extend(warning.clone());
        reports.push(report);
        trees.insert(Variant::LimetComplete, tree);
    }
    let lime = if wants(Method::Lime) {
        let lime = lime_explain_labelled(&labelled, &classes, req.alpha)?;
        let loss = loss_limetree(&targets, &lime.predict_clipped(points)?, weights)?;
        Some(LimeReport {
            loss,
            ranking: lime.surrogates.iter().map(LinearSurrogate::ranking).collect(),
            surrogates: lime.surrogates,
        })
    } else {
        None
    };
    Ok(FitOutcome {
        classes,
        anchor_probabilities,
        reports,
        lime,
        trees,
    })
}

/// An explanation request against one fitted surrogate. `variant` picks the
/// tree (default: the first fitted of limet, limet-relabeled,
/// limet-complete); `leaf` or `point` selects a leaf (default: the leaf of
/// the all-ones point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QueryRequest {
    Importance {
        #[serde(default)]
        variant: Option<Variant>,
    },
    Rule {
        #[serde(default)]
        variant: Option<Variant>,
        #[serde(default)]
        leaf: Option<usize>,
        #[serde(default)]
        point: Option<InterpretablePoint>,
    },
    Exemplars {
        #[serde(default)]
        variant: Option<Variant>,
        #[serde(default)]
        leaf: Option<usize>,
        #[serde(default)]
        point: Option<InterpretablePoint>,
        #[serde(default = "one")]
        radius: usize,
        #[serde(default)]
        filter: ClassFilter,
    },
    WhatIf {
        #[serde(default)]
        variant: Option<Variant>,
        point: InterpretablePoint,
        #[serde(default)]
        oracle: Option<Oracle>,
    },
    Counterfactual {
        #[serde(default)]
        variant: Option<Variant>,
        query: CounterfactualQuery,
    },
    Shortest {
        #[serde(default)]
        variant: Option<Variant>,
        class: usize,
        #[serde(default)]
        oracle: Option<Oracle>,
    },
    Tree {
        #[serde(default)]
        variant: Option<Variant>,
    },
}

fn one() -> usize {
    1
}

impl QueryRequest {
    fn variant(&self) -> Option<Variant> {
        match self {
            QueryRequest::Importance { variant }
            | QueryRequest::Rule { variant, .. }
            | QueryRequest::Exemplars { variant, .. }
            | QueryRequest::WhatIf { variant, .. }
            | QueryRequest::Counterfactual { variant, .. }
            | QueryRequest::Shortest { variant, .. }
            | QueryRequest::Tree { variant } => *variant,
        }
    }
}

/// Persisted part of a session (`session.json`); media lives beside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub created_at: u64,
    pub updated_at: u64,
    pub kind: DomainKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occlusion: Option<OcclusionStrategy>,
    pub merge_history: Vec<Vec<Vec<u32>>>,
    pub blackbox: BlackBoxDescriptor,
    pub class_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub request: FitRequest,
    pub outcome: FitOutcome,
    pub variants: Vec<Variant>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub d: usize,
    pub domain: DomainDescriptor,
    pub blackbox: BlackBoxDescriptor,
    pub class_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    pub fitted: Vec<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitOutcome>,
    pub warnings: Vec<String>,
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub d: usize,
    /// Fitted surrogates were discarded and must be re-fitted.
    pub invalidated: bool,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub struct Session {
    record: SessionRecord,
    /// Domain before any merge; synthetic black boxes perceive through it.
    original: InterpretableDomain,
    domain: InterpretableDomain,
    binding: BlackBoxBinding,
    trees: BTreeMap<Variant, SurrogateTree>,
    render_cache: Mutex<HashMap<String, Arc<Vec<u8>>>>,
}

impl Session {
    pub fn create(id: String, req: CreateSession) -> Result<Self> {
        let original = match &req.instance {
            InstanceSource::Image { data } => {
                let bytes = b64()
                    .decode(data.trim())
                    .map_err(|e| Error::Media(format!("bad base64 image: {e}")))?;
                let img = decode_image(&bytes)?;
                let seg = match &req.segmentation {
                    Some(SegmentationSource::Grid { rows, cols }) => {
                        Segmentation::grid(img.width(), img.height(), *rows, *cols)?
                    }
                    Some(SegmentationSource::Mask { data }) => {
                        let bytes = b64()
                            .decode(data.trim())
                            .map_err(|e| Error::Media(format!("bad base64 mask: {e}")))?;
                        Segmentation::from_encoded(&bytes)?
                    }
                    None => return Err(Error::invalid("image sessions need a segmentation")),
                };
                InterpretableDomain::image(img, seg, req.occlusion.unwrap_or_default())?
            }
            InstanceSource::Text { text, spans } => {
                if req.segmentation.is_some() {
                    return Err(Error::invalid("text sessions take token spans, not a segmentation"));
                }
                match spans {
                    Some(s) => InterpretableDomain::text_with_spans(text, s)?,
                    None => InterpretableDomain::text(text)?,
                }
            }
        };
        let mut binding = req.blackbox.bind(&original)?;
        if let Some(names) = &req.class_names {
            binding = binding.with_class_names(names.clone())?;
        }
        let t = now();
        let record = SessionRecord {
            id,
            created_at: t,
            updated_at: t,
            kind: original.kind(),
            tokens: original.anchor().as_tokens().map(<[String]>::to_vec),
            occlusion: original.occlusion(),
            merge_history: Vec::new(),
            blackbox: req.blackbox,
            class_count: binding.class_count(),
            class_names: req.class_names,
            fit: None,
        };
        Ok(Self {
            record,
            domain: original.clone(),
            original,
            binding,
            trees: BTreeMap::new(),
            render_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn record(&self) -> &SessionRecord {
        &self.record
    }

    pub fn domain(&self) -> &InterpretableDomain {
        &self.domain
    }

    pub fn binding(&self) -> &BlackBoxBinding {
        &self.binding
    }

    pub fn tree(&self, variant: Option<Variant>) -> Result<(Variant, &SurrogateTree)> {
        let pick = match variant {
            Some(v) => v,
            None => *[Variant::Limet, Variant::LimetRelabeled, Variant::LimetComplete]
                .iter()
                .find(|v| self.trees.contains_key(v))
                .ok_or_else(|| Error::Conflict("session has not been fitted".into()))?,
        };
        self.trees
            .get(&pick)
            .map(|t| (pick, t))
            .ok_or_else(|| Error::Conflict(format!("variant {} has not been fitted", pick.as_str())))
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.record.id.clone(),
            d: self.domain.d(),
            domain: self.domain.descriptor(),
            blackbox: self.record.blackbox.clone(),
            class_count: self.record.class_count,
            class_names: self.record.class_names.clone(),
            fitted: self.trees.keys().copied().collect(),
            fit: self.record.fit.as_ref().map(|f| f.outcome.clone()),
            warnings: injectivity_warning(&self.domain).into_iter().collect(),
            created_at: self.record.created_at,
            updated_at: self.record.updated_at,
        }
    }

    /// Merges features; a non-empty merge discards every fitted surrogate.
    pub fn merge(&mut self, groups: &[Vec<u32>]) -> Result<MergeOutcome> {
        if groups.is_empty() {
            return Ok(MergeOutcome {
                d: self.domain.d(),
                invalidated: false,
            });
        }
        let merged = self.domain.merge(groups)?;
        self.domain = merged;
        self.record.merge_history = self.domain.merge_history().to_vec();
        let invalidated = !self.trees.is_empty();
        self.trees.clear();
        self.record.fit = None;
        self.record.updated_at = now();
        self.render_cache.lock().expect("cache lock").clear();
        Ok(MergeOutcome {
            d: self.domain.d(),
            invalidated,
        })
    }

    pub fn fit(&mut self, req: FitRequest) -> Result<FitOutcome> {
        let outcome = run_fit(&self.domain, &self.binding, &req)?;
        self.trees = outcome.trees.clone();
        self.record.fit = Some(FitRecord {
            request: req,
            outcome: outcome.clone(),
            variants: self.trees.keys().copied().collect(),
        });
        self.record.updated_at = now();
        Ok(outcome)
    }

    pub fn query(&self, req: &QueryRequest) -> Result<ExplanationResult> {
        let (_, tree) = self.tree(req.variant())?;
        let leaf_for = |leaf: &Option<usize>, point: &Option<InterpretablePoint>| -> Result<usize> {
            match (leaf, point) {
                (Some(l), _) => tree.leaf(*l).map(|_| *l),
                (None, Some(p)) => tree.leaf_of(p),
                (None, None) => tree.leaf_of(&InterpretablePoint::ones(tree.d)),
            }
        };
        let (bb, domain) = (&self.binding, &self.domain);
        Ok(match req {
            QueryRequest::Importance { .. } => ExplanationResult::Importance(feature_importance(tree)),
            QueryRequest::Rule { leaf, point, .. } => {
                ExplanationResult::Rule(extract_rule(tree, leaf_for(leaf, point)?)?)
            }
            QueryRequest::Exemplars {
                leaf,
                point,
                radius,
                filter,
                ..
            } => ExplanationResult::Exemplars(exemplars(
                tree,
                leaf_for(leaf, point)?,
                *radius,
                *filter,
                DEFAULT_CANDIDATE_CAP,
            )?),
            QueryRequest::WhatIf { point, oracle, .. } => ExplanationResult::WhatIf(what_if(
                point,
                oracle.unwrap_or_else(|| default_oracle(tree)),
                tree,
                bb,
                domain,
            )?),
            QueryRequest::Counterfactual { query, .. } => ExplanationResult::Counterfactual(
                counterfactual(query, tree, domain, bb, DEFAULT_CANDIDATE_CAP)?,
            ),
            QueryRequest::Shortest { class, oracle, .. } => {
                ExplanationResult::Shortest(shortest_explanation(
                    *class,
                    tree,
                    domain,
                    bb,
                    oracle.unwrap_or_else(|| default_oracle(tree)),
                    DEFAULT_CANDIDATE_CAP,
                )?)
            }
            QueryRequest::Tree { .. } => {
                let mut rendered = render_tree(tree, domain)?;
                rendered.class_names = self.record.class_names.clone();
                ExplanationResult::Tree(rendered)
            }
        })
    }

    /// Encoded occluded instance for an exact-length bitstring: PNG for
    /// images, UTF-8 text for token domains. Cached per bitstring.
    pub fn render(&self, bits: &str) -> Result<(&'static str, Arc<Vec<u8>>)> {
        let point: InterpretablePoint = bits.parse()?;
        point.check_len(self.domain.d())?;
        let content_type = match self.domain.kind() {
            DomainKind::ImageOcclusion => "image/png",
            DomainKind::TextDeletion => "text/plain; charset=utf-8",
        };
        if let Some(hit) = self.render_cache.lock().expect("cache lock").get(bits) {
            return Ok((content_type, hit.clone()));
        }
        let bytes = Arc::new(self.domain.from_interpretable(&point)?.render()?);
        self.render_cache
            .lock()
            .expect("cache lock")
            .insert(bits.to_owned(), bytes.clone());
        Ok((content_type, bytes))
    }

    /// Writes `session.json`, media and one JSON file per fitted tree.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        if let Instance::Image(img) = self.original.anchor() {
            write_atomic(&dir.join("anchor.png"), &encode_png(img)?)?;
            let seg = self.original.segmentation().expect("image domains are segmented");
            write_atomic(&dir.join("mask.png"), &seg.to_png()?)?;
        }
        let trees_dir = dir.join("trees");
        if trees_dir.exists() {
            std::fs::remove_dir_all(&trees_dir)?;
        }
        if !self.trees.is_empty() {
            std::fs::create_dir_all(&trees_dir)?;
            for (variant, tree) in &self.trees {
                write_atomic(
                    &trees_dir.join(format!("{}.json", variant.as_str())),
                    tree.to_json()?.as_bytes(),
                )?;
            }
        }
        write_atomic(
            &dir.join("session.json"),
            serde_json::to_string_pretty(&self.record)?.as_bytes(),
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let record: SessionRecord =
            serde_json::from_slice(&std::fs::read(dir.join("session.json"))?)?;
        let original = match record.kind {
            DomainKind::ImageOcclusion => {
                let img = decode_image(&std::fs::read(dir.join("anchor.png"))?)?;
                let seg = Segmentation::from_encoded(&std::fs::read(dir.join("mask.png"))?)?;
                InterpretableDomain::image(img, seg, record.occlusion.unwrap_or_default())?
            }
            DomainKind::TextDeletion => InterpretableDomain::from_tokens(
                record
                    .tokens
                    .clone()
                    .ok_or_else(|| Error::invalid("text session without tokens"))?,
            )?,
        };
        let mut domain = original.clone();
        for groups in &record.merge_history {
            domain = domain.merge(groups)?;
        }
        let mut binding = record.blackbox.bind_known(&original, record.class_count)?;
        if let Some(names) = &record.class_names {
            binding = binding.with_class_names(names.clone())?;
        }
        let mut trees = BTreeMap::new();
        if let Some(fit) = &record.fit {
            for variant in &fit.variants {
                let path = dir.join("trees").join(format!("{}.json", variant.as_str()));
                trees.insert(*variant, SurrogateTree::from_json(&std::fs::read_to_string(path)?)?);
            }
        }
        Ok(Self {
            record,
            original,
            domain,
            binding,
            trees,
            render_cache: Mutex::new(HashMap::new()),
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
