//! Randomized note corpora built from a bank of drawing-note sentences.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ColumnSpec, CorpusSpec, NoteSpec, PageSpec};

const SENTENCES: &[&str] = &[
    "SOLDER ITEM 3 TO PADS SHOWN PER J-STD-001.",
    "BOND PRT1 TO ITEM 1 (PWB) USING ITEM 5.",
    "STAKE C4 AND C5 WITH ITEM 7 (EC 55/9).",
    "UNDERFILL U2 USING ITEM 14 PER DATA SHEET.",
    "CLEAN ASSEMBLY WITH ITEM 12 AFTER SOLDERING.",
    "INSTALL J1 FLUSH TO BOARD SURFACE.",
    "MARK REVISION LETTER WHERE SHOWN.",
    "INSPECT PER IPC-A-610 CLASS 3.",
    "REMOVE REF DES LISTED IN TABLE 2.",
    "APPLY ITEM 15 TO AREA INDICATED.",
    "TORQUE FASTENERS TO 6-8 IN-LB.",
    "ROUTE CABLE AWAY FROM SHARP EDGES.",
    "COAT TOP SIDE ONLY, MASK J2 & J3.",
    "CURE 24 HOURS AT ROOM TEMPERATURE.",
    "REFERENCE DESIGNATORS ARE FOR REFERENCE ONLY.",
    "ALL DIMENSIONS ARE IN INCHES.",
    "ITEMS NOT SHOWN ARE LISTED IN TABLE 1.",
    "USE ITEM 21 WASHERS FOR U21.",
    "ORIENT PIN 1 AS SHOWN (#1 MARK).",
    "HANDLE PER ANSI/ESD S20.20.",
];

/// A corpus with `layout[page][column]` notes, numbered from 1 on each
/// page. About a third of the notes are flagged, alternating 2-px and 1-px
/// strokes; every fifth plain multi-line note carries a glyph-sized
/// triangle in its body.
pub fn synthetic_spec(drawing_id: &str, layout: &[Vec<usize>], seed: u64) -> CorpusSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flagged_so_far = 0u32;
    let mut plain_so_far = 0u32;
    let pages = layout
        .iter()
        .map(|cols| {
            let mut number = 0u32;
            PageSpec {
                columns: cols
                    .iter()
                    .map(|&n| ColumnSpec {
                        notes: (0..n)
                            .map(|_| {
                                number += 1;
                                let count = rng.random_range(2..=3);
                                let text = SENTENCES
                                    .choose_multiple(&mut rng, count)
                                    .copied()
                                    .collect::<Vec<_>>()
                                    .join(" ");
                                let flagged = number % 3 == 1;
                                let mut note = NoteSpec::new(number, text, flagged);
                                if flagged {
                                    note.flag_stroke = Some(if flagged_so_far % 2 == 0 { 2 } else { 1 });
                                    flagged_so_far += 1;
                                } else {
                                    note.inline_mark = plain_so_far % 5 == 0;
                                    plain_so_far += 1;
                                }
                                note
                            })
                            .collect(),
                    })
                    .collect(),
            }
        })
        .collect();
    CorpusSpec {
        drawing_id: drawing_id.into(),
        pages,
        ..CorpusSpec::default()
    }
}

/// Three pages: two columns, one column, two columns; 62 notes.
pub fn round_trip_spec(seed: u64) -> CorpusSpec {
    synthetic_spec("SYN-0001", &[vec![11, 11], vec![18], vec![10, 12]], seed)
}
