//! Value types shared by every pipeline stage and their on-disk JSON shape.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::CostEstimate;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid page image: {0}")]
    InvalidPage(String),
    #[error("malformed substep {id}: {reason}")]
    MalformedSubstep { id: String, reason: String },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("invalid review record: {0}")]
    InvalidReview(String),
}

/// One rasterized drawing page, 8-bit grayscale, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageImage {
    pub page_index: u32,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub source_id: String,
}

impl PageImage {
    pub fn new(
        page_index: u32,
        width: u32,
        height: u32,
        pixels: Vec<u8>,
        source_id: impl Into<String>,
    ) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::InvalidPage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(ModelError::InvalidPage(format!(
                "buffer holds {} pixels, expected {}",
                pixels.len(),
                width as usize * height as usize
            )));
        }
        Ok(Self {
            page_index,
            width,
            height,
            pixels,
            source_id: source_id.into(),
        })
    }

    /// A page filled with one gray value.
    pub fn filled(page_index: u32, width: u32, height: u32, value: u8, source_id: &str) -> Self {
        Self::new(
            page_index,
            width,
            height,
            vec![value; width as usize * height as usize],
            source_id,
        )
        .expect("filled page with positive dimensions")
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = v;
    }

    /// Copies out the pixels under `bbox`, which must lie inside the page.
    pub fn crop(&self, bbox: BBox) -> Vec<u8> {
        let mut out = Vec::with_capacity(bbox.area() as usize);
        for y in bbox.y..bbox.bottom() {
            let row = y as usize * self.width as usize;
            out.extend_from_slice(&self.pixels[row + bbox.x as usize..row + bbox.right() as usize]);
        }
        out
    }
}

/// Axis-aligned box in pixel coordinates; `x + w` and `y + h` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    /// Box spanning the inclusive corner coordinates.
    pub fn from_corners(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn union(&self, other: &BBox) -> BBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Intersection over union.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other).map_or(0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Shifts the box by a non-negative offset.
    pub fn offset(&self, dx: u32, dy: u32) -> BBox {
        BBox::new(self.x + dx, self.y + dy, self.w, self.h)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.w, self.h)
    }
}

/// A single note cut out of a page, with its grayscale pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteCrop {
    pub page_index: u32,
    pub bbox: BBox,
    pub pixels: Vec<u8>,
    pub column_index: u32,
    pub row_order: u32,
}

/// Where a [`DrawingNote`] came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRef {
    pub source_id: String,
    pub page_index: u32,
    pub bbox: BBox,
    pub column_index: u32,
    pub row_order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoteType {
    Flagged,
    Plain,
}

impl NoteType {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoteType::Flagged => "flagged",
            NoteType::Plain => "plain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawingNote {
    pub note_number: u32,
    pub note_type: NoteType,
    pub text: String,
    pub crop_ref: CropRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedStep {
    pub action: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    ReferenceDesignator,
    Item,
    Table,
    Material,
    Figure,
    Document,
    #[serde(other)]
    Other,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::ReferenceDesignator,
        EntityType::Item,
        EntityType::Table,
        EntityType::Material,
        EntityType::Figure,
        EntityType::Document,
        EntityType::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityType::ReferenceDesignator => "reference_designator",
            EntityType::Item => "item",
            EntityType::Table => "table",
            EntityType::Material => "material",
            EntityType::Figure => "figure",
            EntityType::Document => "document",
            EntityType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    #[serde(rename = "ref")]
    pub reference: String,
    #[serde(rename = "type")]
    pub kind: EntityType,
}

/// A note decomposed into actionable steps, free-standing information and
/// the entities it mentions.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedNote {
    pub steps: Vec<ParsedStep>,
    pub information: Vec<String>,
    pub entities: Vec<Entity>,
}

impl ParsedNote {
    pub fn has_action(&self, action: &str) -> bool {
        self.steps.iter().any(|s| s.action == action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubstepType {
    Text,
    Table,
    Choice,
}

impl SubstepType {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubstepType::Text => "text",
            SubstepType::Table => "table",
            SubstepType::Choice => "choice",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Update,
    Choose,
}

/// What a template substep asks the generator to do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubstepAction {
    /// Rewrite `data` with note-specific content.
    Update { data: String },
    /// Pick one of `options` verbatim.
    Choose { options: Vec<String> },
}

impl SubstepAction {
    pub fn kind(&self) -> ActionKind {
        match self {
            SubstepAction::Update { .. } => ActionKind::Update,
            SubstepAction::Choose { .. } => ActionKind::Choose,
        }
    }
}

/// Substep as written in a template file. `data` and `options` are both
/// optional here; [`SubstepSpec::into_substep`] enforces the pairing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substep_id: Option<String>,
    #[serde(rename = "type")]
    pub kind: SubstepType,
    pub action: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guidance: Option<String>,
}

impl SubstepSpec {
    pub fn into_substep(self, substep_id: String) -> Result<TemplateSubstep, ModelError> {
        let bad = |reason: &str| ModelError::MalformedSubstep {
            id: substep_id.clone(),
            reason: reason.to_string(),
        };
        let action = match (self.action, self.data, self.options) {
            (_, Some(_), Some(_)) => return Err(bad("carries both data and options")),
            (ActionKind::Update, Some(data), None) => SubstepAction::Update { data },
            (ActionKind::Update, None, _) => return Err(bad("update action without data")),
            (ActionKind::Choose, None, Some(options)) => {
                if options.len() < 2 {
                    return Err(bad("choose action needs at least two options"));
                }
                let distinct: HashSet<&String> = options.iter().collect();
                if distinct.len() != options.len() {
                    return Err(bad("choose options are not distinct"));
                }
                SubstepAction::Choose { options }
            }
            (ActionKind::Choose, _, None) => return Err(bad("choose action without options")),
        };
        Ok(TemplateSubstep {
            substep_id,
            kind: self.kind,
            action,
            guidance: self.guidance,
        })
    }
}

/// A validated template substep with its assigned id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SubstepSpec", into = "SubstepSpec")]
pub struct TemplateSubstep {
    pub substep_id: String,
    pub kind: SubstepType,
    pub action: SubstepAction,
    pub guidance: Option<String>,
}

impl TemplateSubstep {
    pub fn options(&self) -> Option<&[String]> {
        match &self.action {
            SubstepAction::Choose { options } => Some(options),
            SubstepAction::Update { .. } => None,
        }
    }

    pub fn data(&self) -> Option<&str> {
        match &self.action {
            SubstepAction::Update { data } => Some(data),
            SubstepAction::Choose { .. } => None,
        }
    }
}

impl TryFrom<SubstepSpec> for TemplateSubstep {
    type Error = ModelError;

    fn try_from(spec: SubstepSpec) -> Result<Self, Self::Error> {
        let id = spec.substep_id.clone().unwrap_or_default();
        spec.into_substep(id)
    }
}

impl From<TemplateSubstep> for SubstepSpec {
    fn from(s: TemplateSubstep) -> Self {
        let (action, data, options) = match s.action {
            SubstepAction::Update { data } => (ActionKind::Update, Some(data), None),
            SubstepAction::Choose { options } => (ActionKind::Choose, None, Some(options)),
        };
        SubstepSpec {
            substep_id: Some(s.substep_id),
            kind: s.kind,
            action,
            data,
            options,
            guidance: s.guidance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateStep {
    pub step_name: String,
    pub trigger_actions: Vec<String>,
    pub substeps: Vec<SubstepSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawTemplate {
    template_id: String,
    steps: Vec<TemplateStep>,
}

/// Golden template: ordered steps, each split into substeps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate", into = "RawTemplate")]
pub struct IbatTemplate {
    pub template_id: String,
    pub steps: Vec<TemplateStep>,
}

impl IbatTemplate {
    pub fn new(template_id: impl Into<String>, steps: Vec<TemplateStep>) -> Result<Self, ModelError> {
        let mut seen = HashSet::new();
        for step in &steps {
            if !seen.insert(step.step_name.as_str()) {
                return Err(ModelError::InvalidTemplate(format!(
                    "duplicate step name {:?}",
                    step.step_name
                )));
            }
            if step.substeps.is_empty() {
                return Err(ModelError::InvalidTemplate(format!(
                    "step {:?} has no substeps",
                    step.step_name
                )));
            }
        }
        Ok(Self {
            template_id: template_id.into(),
            steps,
        })
    }

    pub fn substep_count(&self) -> usize {
        self.steps.iter().map(|s| s.substeps.len()).sum()
    }
}

impl TryFrom<RawTemplate> for IbatTemplate {
    type Error = ModelError;

    fn try_from(raw: RawTemplate) -> Result<Self, Self::Error> {
        IbatTemplate::new(raw.template_id, raw.steps)
    }
}

impl From<IbatTemplate> for RawTemplate {
    fn from(t: IbatTemplate) -> Self {
        RawTemplate {
            template_id: t.template_id,
            steps: t.steps,
        }
    }
}

/// Content produced for one template substep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedStep {
    pub substep_id: String,
    #[serde(rename = "type")]
    pub kind: SubstepType,
    pub data: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReviewLabel {
    R0,
    R1,
    R2,
    R3,
}

impl ReviewLabel {
    pub const ALL: [ReviewLabel; 4] = [ReviewLabel::R0, ReviewLabel::R1, ReviewLabel::R2, ReviewLabel::R3];

    /// R0 and R1 need no significant edits.
    pub fn is_usable(&self) -> bool {
        matches!(self, ReviewLabel::R0 | ReviewLabel::R1)
    }
}

impl fmt::Display for ReviewLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReviewLabel::R0 => "R0",
            ReviewLabel::R1 => "R1",
            ReviewLabel::R2 => "R2",
            ReviewLabel::R3 => "R3",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawReview {
    output_id: String,
    labels: BTreeSet<ReviewLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edited_text: Option<String>,
    reviewer: String,
    timestamp: DateTime<Utc>,
}

/// One reviewer judgement of one model output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawReview", into = "RawReview")]
pub struct ReviewRecord {
    pub output_id: String,
    pub labels: BTreeSet<ReviewLabel>,
    pub edited_text: Option<String>,
    pub reviewer: String,
    pub timestamp: DateTime<Utc>,
}

impl ReviewRecord {
    pub fn new(
        output_id: impl Into<String>,
        labels: impl IntoIterator<Item = ReviewLabel>,
        edited_text: Option<String>,
        reviewer: impl Into<String>,
        timestamp: DateTime<Utc>,
    ) -> Result<Self, ModelError> {
        let labels: BTreeSet<ReviewLabel> = labels.into_iter().collect();
        if labels.is_empty() {
            return Err(ModelError::InvalidReview("labels must not be empty".into()));
        }
        if labels.contains(&ReviewLabel::R0) && labels.len() > 1 {
            return Err(ModelError::InvalidReview(
                "R0 (no errors) cannot be combined with error labels".into(),
            ));
        }
        Ok(Self {
            output_id: output_id.into(),
            labels,
            edited_text,
            reviewer: reviewer.into(),
            timestamp,
        })
    }

    /// True when every label is R0 or R1.
    pub fn is_usable(&self) -> bool {
        self.labels.iter().all(ReviewLabel::is_usable)
    }
}

impl TryFrom<RawReview> for ReviewRecord {
    type Error = ModelError;

    fn try_from(r: RawReview) -> Result<Self, Self::Error> {
        ReviewRecord::new(r.output_id, r.labels, r.edited_text, r.reviewer, r.timestamp)
    }
}

impl From<ReviewRecord> for RawReview {
    fn from(r: ReviewRecord) -> Self {
        RawReview {
            output_id: r.output_id,
            labels: r.labels,
            edited_text: r.edited_text,
            reviewer: r.reviewer,
            timestamp: r.timestamp,
        }
    }
}

/// Label counts and usable fraction for one group of reviewed outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSummary {
    pub items: usize,
    pub r_counts: BTreeMap<ReviewLabel, usize>,
    pub pr01: Option<f64>,
}

/// Aggregate figures written to `metrics.json`. Figures that need inputs
/// the job does not have (ground truth, reviews) are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cer_mean: Option<f64>,
    pub cer_std: Option<f64>,
    pub flagged_accuracy: Option<f64>,
    pub r_counts: BTreeMap<ReviewLabel, usize>,
    pub pr01: Option<f64>,
    pub cost: CostEstimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsing: Option<ReviewSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<ReviewSummary>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ts() -> DateTime<Utc> {
        "2024-09-01T12:00:00Z".parse().unwrap()
    }

    #[test]
    fn page_rejects_bad_buffer() {
        assert!(PageImage::new(0, 2, 2, vec![0; 3], "d").is_err());
        assert!(PageImage::new(0, 0, 2, vec![], "d").is_err());
        let p = PageImage::new(1, 2, 2, vec![1, 2, 3, 4], "d").unwrap();
        assert_eq!(p.get(1, 1), 4);
        assert_eq!(p.crop(BBox::new(1, 0, 1, 2)), vec![2, 4]);
    }

    #[test]
    fn bbox_iou() {
        let a = BBox::new(0, 0, 10, 10);
        let b = BBox::new(5, 0, 10, 10);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(a.iou(&BBox::new(20, 20, 1, 1)), 0.0);
        assert_eq!(a.iou(&a), 1.0);
    }

    #[test]
    fn substep_pairing_rules() {
        let both = SubstepSpec {
            substep_id: None,
            kind: SubstepType::Text,
            action: ActionKind::Update,
            data: Some("x".into()),
            options: Some(vec!["a".into(), "b".into()]),
            guidance: None,
        };
        assert!(matches!(
            both.into_substep("S/1".into()),
            Err(ModelError::MalformedSubstep { .. })
        ));

        let dup: Result<TemplateSubstep, _> = serde_json::from_value(json!({
            "type": "choice", "action": "choose", "options": ["A", "A"]
        }));
        assert!(dup.is_err());

        let one: Result<TemplateSubstep, _> = serde_json::from_value(json!({
            "type": "choice", "action": "choose", "options": ["A"]
        }));
        assert!(one.is_err());
    }

    #[test]
    fn substep_serializes_flat() {
        let s: TemplateSubstep = serde_json::from_value(json!({
            "substep_id": "BOND/1", "type": "text", "action": "update", "data": "D", "guidance": "G"
        }))
        .unwrap();
        assert_eq!(s.data(), Some("D"));
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(
            v,
            json!({"substep_id": "BOND/1", "type": "text", "action": "update", "data": "D", "guidance": "G"})
        );
    }

    #[test]
    fn template_invariants() {
        let step = |name: &str, n: usize| TemplateStep {
            step_name: name.into(),
            trigger_actions: vec!["BOND".into()],
            substeps: (0..n)
                .map(|_| SubstepSpec {
                    substep_id: None,
                    kind: SubstepType::Text,
                    action: ActionKind::Update,
                    data: Some("d".into()),
                    options: None,
                    guidance: None,
                })
                .collect(),
        };
        assert!(IbatTemplate::new("t", vec![step("A", 1), step("A", 1)]).is_err());
        assert!(IbatTemplate::new("t", vec![step("A", 0)]).is_err());
        let t = IbatTemplate::new("t", vec![step("A", 2), step("B", 1)]).unwrap();
        assert_eq!(t.substep_count(), 3);
    }

    #[test]
    fn r0_must_be_alone() {
        let err = ReviewRecord::new("x", [ReviewLabel::R0, ReviewLabel::R2], None, "sme", ts());
        assert!(matches!(err, Err(ModelError::InvalidReview(_))));
        assert!(ReviewRecord::new("x", [], None, "sme", ts()).is_err());
        let ok = ReviewRecord::new("x", [ReviewLabel::R1, ReviewLabel::R2], None, "sme", ts()).unwrap();
        assert!(!ok.is_usable());

        let parsed: Result<ReviewRecord, _> = serde_json::from_value(json!({
            "output_id": "x", "labels": ["R0", "R2"], "reviewer": "sme",
            "timestamp": "2024-09-01T12:00:00Z"
        }));
        assert!(parsed.is_err());
    }

    #[test]
    fn unknown_entity_type_maps_to_other() {
        let e: Entity = serde_json::from_value(json!({"ref": "X", "type": "connector"})).unwrap();
        assert_eq!(e.kind, EntityType::Other);
    }
}
