//! A complete drawing/template pair: 22 notes (6 flagged), an 8-step
//! template with 20 substeps, and canned model answers for every call the
//! pipeline makes on it.

use std::collections::BTreeSet;

use aibat_core::{
    ActionKind, Entity, EntityType, IbatTemplate, NoteType, ParsedNote, ParsedStep, SubstepAction, SubstepSpec,
    SubstepType, TemplateStep,
};
use aibat_extraction::MockOcrEntry;
use aibat_llm::orchestrate::{match_notes_to_step, split_template_step, ParsedRecord};
use aibat_llm::prompt::{generation_target_input, parse_target_input};
use aibat_llm::{ActionLegend, ExampleSets, FewShotExample, MockLlmEntry, RefdesEntry};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{ColumnSpec, CorpusSpec, GroundTruthManifest, NoteSpec, PageSpec};
use crate::published;

pub const DRAWING_ID: &str = published::GENERATION_EXAMPLE_DRAWING;
pub const TEMPLATE_ID: &str = "GOLDEN-IBAT";

/// Canned answers for both offline engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MockSidecar {
    pub ocr: Vec<MockOcrEntry>,
    pub llm: Vec<MockLlmEntry>,
}

const NOTES: [(u32, &str, Option<u32>); 22] = [
    (1, "ALL DIMENSIONS ARE IN INCHES. INTERPRET DRAWING PER ASME Y14.5-2009.", None),
    (2, "CLEAN ASSEMBLY PER IPC-CH-65 USING ISOPROPYL ALCOHOL (ITEM 12) BEFORE AND AFTER SOLDERING.", None),
    (3, "REMOVE REF DES LISTED IN TABLE 4. REFERENCE DESIGNATORS ARE FOR REFERENCE ONLY.", Some(2)),
    (4, "INSTALL U1 THRU U6 (ITEM 3) WITH PIN 1 ORIENTED AS SHOWN.", None),
    (5, "SOLDER ALL COMPONENTS PER J-STD-001 CLASS 3 USING SOLDER ITEM 9.", Some(1)),
    (6, "UNDERFILL U4 AND U5 WITH ITEM 14 (EPOXY). CURE PER MANUFACTURER DATA SHEET.", None),
    (7, "STAKE C10 THRU C14 USING ITEM 7 (EC 55/9) AT TWO PLACES MINIMUM.", Some(2)),
    (8, "MARK ASSEMBLY PART NUMBER AND SERIAL NUMBER APPROXIMATELY WHERE SHOWN USING ITEM 11.", None),
    (9, "INSPECT ASSEMBLY PER IPC-A-610 CLASS 3 AFTER ALL OPERATIONS ARE COMPLETE.", None),
    (10, published::BOND_STEP_TEXT, Some(1)),
    (11, "APPLY CONFORMAL COAT ITEM 15 TO TOP SIDE ONLY. MASK CONNECTORS J1 AND J2.", None),
    (12, "TORQUE SCREWS (ITEM 20) TO 4-6 IN-LB. FOR U21 USE ITEM 21 WASHERS.", Some(2)),
    (13, "ROUTE WIRES AWAY FROM HEAT SOURCES. OPTIMAL WIRE ROUTING TO BE DETERMINED PER MANUFACTURING, PACKAGING OR COGNIZANT ENGINEER DISCRETION.", None),
    (14, "ITEMS 30 THRU 35 ARE NOT SHOWN ON THE FIELD OF THE DRAWING.", None),
    (15, "COMPONENT PLACEMENT TOLERANCE IS 0.005 INCH UNLESS OTHERWISE SPECIFIED.", None),
    (16, "PWB (ITEM 1) SHALL BE BAKED PER FABRICATION NOTES PRIOR TO ASSEMBLY.", None),
    (17, "ESD SENSITIVE DEVICES. HANDLE PER ANSI/ESD S20.20.", None),
    (18, "REMOVE FLUX RESIDUE WITHIN 30 MINUTES OF SOLDERING.", Some(1)),
    (19, "APPLY ITEM 16 (ADHESIVE) UNDER TRANSFORMER T1 PRIOR TO INSTALLATION.", None),
    (20, "COAT EXPOSED COPPER WITH ITEM 17 AFTER REWORK.", None),
    (21, "WORKMANSHIP SHALL CONFORM TO NASA-STD-8739.1.", None),
    (22, "THIS ASSEMBLY CONTAINS MOISTURE SENSITIVE DEVICES & SHALL BE STORED IN DRY CABINET.", None),
];

/// One page, two columns of 10 and 12 notes, 6 flagged with mixed strokes.
pub fn corpus_spec() -> CorpusSpec {
    let note = |&(number, text, stroke): &(u32, &str, Option<u32>)| NoteSpec {
        number,
        text: text.to_string(),
        flagged: stroke.is_some(),
        flag_stroke: stroke,
        inline_mark: false,
    };
    CorpusSpec {
        drawing_id: DRAWING_ID.into(),
        pages: vec![PageSpec {
            columns: vec![
                ColumnSpec {
                    notes: NOTES[..10].iter().map(note).collect(),
                },
                ColumnSpec {
                    notes: NOTES[10..].iter().map(note).collect(),
                },
            ],
        }],
        ..CorpusSpec::default()
    }
}

pub fn legend() -> ActionLegend {
    let actions = [
        "SOLDER", "BOND", "STAKE", "UNDERFILL", "CLEAN", "INSTALL", "MARK", "INSPECT", "REMOVE", "APPLY", "TORQUE",
        "COAT", "ROUTE", "CURE",
    ];
    let refdes = [
        ("PRT#", "thermal couple"),
        ("C#", "capacitor"),
        ("U#", "integrated circuit"),
        ("J#", "connector"),
        ("T#", "transformer"),
    ];
    ActionLegend {
        common_actions: actions.iter().map(|s| s.to_string()).collect(),
        refdes_legend: refdes
            .iter()
            .map(|(p, m)| RefdesEntry {
                prefix: p.to_string(),
                meaning: m.to_string(),
            })
            .collect(),
    }
}

pub fn examples() -> ExampleSets {
    ExampleSets {
        parse: vec![FewShotExample {
            input: published::parse_example_input(),
            output: published::parse_example_output(),
        }],
        generate: vec![FewShotExample {
            input: published::generation_example_input(),
            output: published::generation_example_output(),
        }],
        generate_by_substep: Default::default(),
    }
}

fn update(kind: SubstepType, data: &str) -> SubstepSpec {
    SubstepSpec {
        substep_id: None,
        kind,
        action: ActionKind::Update,
        data: Some(data.into()),
        options: None,
        guidance: None,
    }
}

fn choose(options: &[&str], guidance: Option<&str>) -> SubstepSpec {
    SubstepSpec {
        substep_id: None,
        kind: SubstepType::Choice,
        action: ActionKind::Choose,
        data: None,
        options: Some(options.iter().map(|s| s.to_string()).collect()),
        guidance: guidance.map(str::to_string),
    }
}

fn step(name: &str, trigger: &str, substeps: Vec<SubstepSpec>) -> TemplateStep {
    TemplateStep {
        step_name: name.into(),
        trigger_actions: vec![trigger.into()],
        substeps,
    }
}

/// Eight automatable steps, 20 substeps in all.
pub fn template() -> IbatTemplate {
    use SubstepType::{Table, Text};
    let steps = vec![
        step(
            "CLEANING",
            "CLEAN",
            vec![
                update(Text, "CLEANING\n\nPER DRAWING NOTE X: CLEAN ASSEMBLY USING ITEM X. AIR DRY 15 MINUTES MINIMUM."),
                choose(&["VAPOR DEGREASE", "AQUEOUS WASH", "MANUAL CLEAN WITH IPA"], None),
            ],
        ),
        step(
            "COMPONENT INSTALLATION",
            "INSTALL",
            vec![
                update(Text, "COMPONENT INSTALLATION\n\nPER DRAWING NOTE X: INSTALL COMPONENTS LISTED BELOW USING ITEM X."),
                update(Table, "REF DES | ITEM | ORIENTATION\nREF DES X | ITEM X | AS SHOWN"),
                choose(&["HAND PLACE", "MACHINE PLACE"], Some("Use HAND PLACE unless the note names a placement program")),
            ],
        ),
        step(
            "SOLDERING",
            "SOLDER",
            vec![
                update(Text, "SOLDERING\n\nPER DRAWING NOTE X: SOLDER COMPONENTS USING SOLDER ITEM X."),
                choose(&["J-STD-001 CLASS 2", "J-STD-001 CLASS 3"], None),
                update(Text, "VERIFY SOLDER JOINTS PER DRAWING NOTE X PRIOR TO CLEANING."),
            ],
        ),
        step(
            "UNDERFILL",
            "UNDERFILL",
            vec![
                update(Text, "UNDERFILL\n\nPER DRAWING NOTE X: UNDERFILL THE PARTS BELOW USING ITEM X."),
                update(Table, "REF DES | MATERIAL\nREF DES X | ITEM X"),
                update(Text, "CURE UNDERFILL PER DRAWING NOTE X AND THE MATERIAL DATA SHEET."),
            ],
        ),
        step(
            "BONDING PRTs",
            "BOND",
            vec![
                published::bonding_substep_spec(),
                choose(&["24 HOUR ROOM TEMPERATURE CURE", "1 HOUR AT 65 C CURE"], None),
            ],
        ),
        step(
            "STAKING",
            "STAKE",
            vec![
                update(Text, "STAKING\n\nPER DRAWING NOTE X: STAKE COMPONENTS USING ITEM X."),
                choose(&["2 PLACES", "4 PLACES"], None),
            ],
        ),
        step(
            "MARKING",
            "MARK",
            vec![
                update(Text, "MARKING\n\nPER DRAWING NOTE X: MARK PART NUMBER AND SERIAL NUMBER USING ITEM X."),
                choose(&["INK STAMP", "LABEL", "LASER MARK"], None),
            ],
        ),
        step(
            "FINAL INSPECTION",
            "INSPECT",
            vec![
                update(Text, "FINAL INSPECTION\n\nPER DRAWING NOTE X: INSPECT ASSEMBLY. RECORD RESULTS BELOW."),
                update(Table, "CHECK | RESULT\nWORKMANSHIP PER DRAWING NOTE X | PASS/FAIL"),
                choose(&["ACCEPT", "REJECT", "ROUTE TO MRB"], None),
            ],
        ),
    ];
    IbatTemplate::new(TEMPLATE_ID, steps).expect("fixture template is valid")
}

struct Patterns {
    sentence_end: Regex,
    item: Regex,
    table: Regex,
    document: Regex,
    refdes: Regex,
}

impl Patterns {
    fn new() -> Self {
        Self {
            sentence_end: Regex::new(r"\.(\s+|$)").unwrap(),
            item: Regex::new(r"ITEMS? \d+(\s\([^)]*\))?").unwrap(),
            table: Regex::new(r"TABLE \d+").unwrap(),
            document: Regex::new(r"IPC-[A-Z0-9-]+|J-STD-\d+|ASME Y14\.5-\d+|ANSI/ESD S20\.20|NASA-STD-\d+(\.\d+)?").unwrap(),
            refdes: Regex::new(r"\b[A-Z]{1,3}\d{1,3}\b").unwrap(),
        }
    }
}

fn sentences<'a>(p: &Patterns, text: &'a str) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut start = 0;
    for m in p.sentence_end.find_iter(text) {
        out.push(text[start..m.start() + 1].trim());
        start = m.end();
    }
    if start < text.len() && !text[start..].trim().is_empty() {
        out.push(text[start..].trim());
    }
    out
}

/// Reference parse of a note: sentences starting with a legend action are
/// steps, the rest information; entities are found by pattern.
pub fn canned_parse(text: &str, legend: &ActionLegend) -> ParsedNote {
    let p = Patterns::new();
    let mut parsed = ParsedNote::default();
    for s in sentences(&p, text) {
        let first = s.split_whitespace().next().unwrap_or("");
        if legend.common_actions.iter().any(|a| a == first) {
            parsed.steps.push(ParsedStep {
                action: first.to_string(),
                text: s.to_string(),
            });
        } else {
            parsed.information.push(s.to_string());
        }
    }
    let mut found: Vec<(usize, Entity)> = Vec::new();
    let mut covered: Vec<(usize, usize)> = Vec::new();
    let mut add = |start: usize, end: usize, kind: EntityType, found: &mut Vec<(usize, Entity)>| {
        if covered.iter().any(|&(a, b)| start < b && a < end) {
            return;
        }
        covered.push((start, end));
        found.push((
            start,
            Entity {
                reference: text[start..end].to_string(),
                kind,
            },
        ));
    };
    for m in p.document.find_iter(text) {
        add(m.start(), m.end(), EntityType::Document, &mut found);
    }
    for m in p.item.find_iter(text) {
        add(m.start(), m.end(), EntityType::Item, &mut found);
    }
    for m in p.table.find_iter(text) {
        add(m.start(), m.end(), EntityType::Table, &mut found);
    }
    for m in p.refdes.find_iter(text) {
        // Skip numbers inside dotted or hyphenated tokens such as Y14.5.
        let next = text[m.end()..].chars().next();
        let after = text[m.end()..].chars().nth(1);
        if matches!(next, Some('.') | Some('-')) && after.is_some_and(|c| c.is_ascii_alphanumeric()) {
            continue;
        }
        add(m.start(), m.end(), EntityType::ReferenceDesignator, &mut found);
    }
    found.sort_by_key(|(start, _)| *start);
    let mut seen = BTreeSet::new();
    parsed.entities = found
        .into_iter()
        .map(|(_, e)| e)
        .filter(|e| seen.insert(e.reference.clone()))
        .collect();
    parsed
}

/// Reference answer for one substep: placeholders filled from the note for
/// updates, a fixed option for choices.
pub fn canned_generation(drawing_id: &str, note: &ParsedRecord, action: &SubstepAction) -> String {
    match action {
        SubstepAction::Choose { options } => options[note.note_number as usize % options.len()].clone(),
        SubstepAction::Update { data } => {
            let first = |kind: EntityType| {
                note.parsed
                    .entities
                    .iter()
                    .find(|e| e.kind == kind)
                    .map(|e| e.reference.replace('\n', " "))
            };
            let item = first(EntityType::Item).unwrap_or_else(|| format!("ITEMS PER NOTE {}", note.note_number));
            let refdes = first(EntityType::ReferenceDesignator)
                .unwrap_or_else(|| format!("REF DES PER NOTE {}", note.note_number));
            data.replace("DRAWING NOTE X", &format!("DRAWING {drawing_id} NOTE {}", note.note_number))
                .replace("NOTE X", &format!("NOTE {}", note.note_number))
                .replace("DRAWING X", &format!("DRAWING {drawing_id}"))
                .replace("ITEM X", &item)
                .replace("REF DES X", &refdes)
        }
    }
}

fn note_type(flagged: bool) -> NoteType {
    if flagged {
        NoteType::Flagged
    } else {
        NoteType::Plain
    }
}

/// Parsed records as the canned parse answers produce them.
pub fn canned_records(manifest: &GroundTruthManifest, legend: &ActionLegend) -> Vec<ParsedRecord> {
    manifest
        .notes
        .iter()
        .map(|n| {
            let parsed = if n.text == published::BOND_STEP_TEXT {
                published::generation_example_parsed()
            } else {
                canned_parse(&n.text, legend)
            };
            ParsedRecord {
                output_id: ParsedRecord::output_id_for(n.number),
                note_number: n.number,
                note_type: note_type(n.flagged),
                parsed,
                attempts: 1,
            }
        })
        .collect()
}

/// Canned model answers for every parse and generation call on the
/// manifest's notes against `template`.
pub fn llm_entries(
    manifest: &GroundTruthManifest,
    template: &IbatTemplate,
    legend: &ActionLegend,
) -> Vec<MockLlmEntry> {
    let records = canned_records(manifest, legend);
    let mut out: Vec<MockLlmEntry> = manifest
        .notes
        .iter()
        .zip(&records)
        .map(|(n, r)| MockLlmEntry {
            input: parse_target_input(&n.text, r.note_type),
            output: serde_json::to_value(&r.parsed).expect("parsed notes serialize"),
        })
        .collect();
    for step in &template.steps {
        let substeps = split_template_step(step).expect("template was validated");
        for r in match_notes_to_step(step, &records) {
            for sub in &substeps {
                let input = generation_target_input(&manifest.drawing_id, r.note_number, r.note_type, &r.parsed, sub);
                let output = if input == published::generation_example_input() {
                    published::generation_example_output()
                } else {
                    let data = canned_generation(&manifest.drawing_id, r, &sub.action);
                    json!({ "type": sub.kind.as_str(), "data": data })
                };
                out.push(MockLlmEntry { input, output });
            }
        }
    }
    out
}

pub fn sidecar(manifest: &GroundTruthManifest, template: &IbatTemplate, legend: &ActionLegend) -> MockSidecar {
    MockSidecar {
        ocr: manifest.mock_ocr_entries(),
        llm: llm_entries(manifest, template, legend),
    }
}

/// The parse-call target input for the published parse example.
pub fn parse_example_key_input() -> Value {
    parse_target_input(published::PARSE_EXAMPLE_NOTE, published::PARSE_EXAMPLE_TYPE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::render_corpus;
    use aibat_core::validate::validate_parsed_note;

    #[test]
    fn template_shape() {
        let t = template();
        assert_eq!(t.steps.len(), 8);
        assert_eq!(t.substep_count(), 20);
    }

    #[test]
    fn spec_shape() {
        let s = corpus_spec();
        let notes: Vec<&NoteSpec> = s.pages[0].columns.iter().flat_map(|c| &c.notes).collect();
        assert_eq!(notes.len(), 22);
        assert_eq!(notes.iter().filter(|n| n.flagged).count(), 6);
        assert_eq!(s.pages[0].columns[0].notes.len(), 10);
    }

    #[test]
    fn each_template_step_matches_exactly_one_note() {
        let (_, man) = render_corpus(&corpus_spec(), 0).unwrap();
        let records = canned_records(&man, &legend());
        for step in &template().steps {
            let hits = match_notes_to_step(step, &records);
            assert_eq!(hits.len(), 1, "{}", step.step_name);
        }
        assert_eq!(llm_entries(&man, &template(), &legend()).len(), 22 + 20);
    }

    #[test]
    fn canned_parses_validate() {
        let (_, man) = render_corpus(&corpus_spec(), 0).unwrap();
        for r in canned_records(&man, &legend()) {
            validate_parsed_note(&serde_json::to_value(&r.parsed).unwrap()).unwrap();
        }
    }

    #[test]
    fn canned_parse_finds_steps_and_entities() {
        let p = canned_parse("STAKE C10 THRU C14 USING ITEM 7 (EC 55/9). SEE\nTABLE 2 PER IPC-A-610.", &legend());
        assert_eq!(p.steps.len(), 1);
        assert_eq!(p.steps[0].action, "STAKE");
        assert_eq!(p.information, vec!["SEE\nTABLE 2 PER IPC-A-610."]);
        let refs: Vec<(&str, EntityType)> = p.entities.iter().map(|e| (e.reference.as_str(), e.kind)).collect();
        assert_eq!(
            refs,
            vec![
                ("C10", EntityType::ReferenceDesignator),
                ("C14", EntityType::ReferenceDesignator),
                ("ITEM 7 (EC 55/9)", EntityType::Item),
                ("TABLE 2", EntityType::Table),
                ("IPC-A-610", EntityType::Document),
            ]
        );
        let p = canned_parse("INTERPRET PER ASME Y14.5-2009.", &legend());
        assert_eq!(p.entities.len(), 1);
    }

    #[test]
    fn generations_resolve_placeholders() {
        let (_, man) = render_corpus(&corpus_spec(), 0).unwrap();
        for e in llm_entries(&man, &template(), &legend()) {
            if let Some(data) = e.output.get("data").and_then(Value::as_str) {
                assert!(aibat_llm::find_placeholders(data).is_empty(), "{data}");
            }
        }
    }

    #[test]
    fn bonding_answer_is_the_published_one() {
        let (_, man) = render_corpus(&corpus_spec(), 0).unwrap();
        let entries = llm_entries(&man, &template(), &legend());
        let bond = entries
            .iter()
            .find(|e| e.input == published::generation_example_input())
            .expect("bonding entry");
        assert_eq!(bond.output, published::generation_example_output());
    }
}
