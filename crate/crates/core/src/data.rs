//! Beam-prediction ingestion, cross-domain splits, dedup/cap, and corpus
//! statistics.
//!
//! Beam files are line-delimited JSON, one record per line:
//!
//! ```json
//! {"question_id":"q1","db_id":"concert_singer","question":"...","gold_sql":"...",
//!  "difficulty":"easy","predictions":[{"sql":"...","parser_score":-0.35,
//!  "dropout_scores":[...],"label":{"value":"correct","provenance":"execution"},
//!  "detector_score":0.91}]}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::exec::Label;
use crate::sql::tokenize;

/// Number of dropout passes the uncertainty baseline expects.
pub const DROPOUT_PASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sql: String,
    /// Log-probability or ranking score from the base parser.
    pub parser_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout_scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamRecord {
    pub question_id: String,
    pub db_id: String,
    pub question: String,
    pub gold_sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<String>,
    /// Parser rank order, best first.
    pub predictions: Vec<Prediction>,
}

impl BeamRecord {
    pub fn top(&self) -> &Prediction {
        &self.predictions[0]
    }
}

pub fn load_beams(path: &Path) -> Result<Vec<BeamRecord>, DataError> {
    let text = fs::read_to_string(path)?;
    load_beams_str(&text)
}

pub fn load_beams_str(text: &str) -> Result<Vec<BeamRecord>, DataError> {
    let mut beams = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let beam: BeamRecord = serde_json::from_str(line)
            .map_err(|e| DataError::Format { line: line_no, message: e.to_string() })?;
        if beam.predictions.is_empty() {
            return Err(DataError::Format {
                line: line_no,
                message: "beam has no predictions".into(),
            });
        }
        for pred in &beam.predictions {
            if let Some(scores) = &pred.dropout_scores {
                if scores.len() != DROPOUT_PASSES {
                    return Err(DataError::Format {
                        line: line_no,
                        message: format!(
                            "dropout_scores must have {DROPOUT_PASSES} entries, found {}",
                            scores.len()
                        ),
                    });
                }
            }
        }
        if !seen.insert(beam.question_id.clone()) {
            return Err(DataError::DuplicateQuestion(beam.question_id));
        }
        beams.push(beam);
    }
    Ok(beams)
}

pub fn save_beams(path: &Path, beams: &[BeamRecord]) -> Result<(), DataError> {
    let mut out = String::new();
    for beam in beams {
        out.push_str(&serde_json::to_string(beam).expect("beam records serialize"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Dedup key: whitespace/case-normalized token sequence, falling back to a
/// lowercased whitespace-collapsed string when the SQL does not tokenize.
pub fn sql_dedup_key(sql: &str) -> String {
    match tokenize(sql) {
        Ok(tokens) => tokens.iter().map(|t| t.normalized_text()).collect::<Vec<_>>().join(" "),
        Err(_) => sql.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase(),
    }
}

/// Merges duplicate predictions (earliest rank kept, best parser score
/// retained) and truncates to `cap` predictions. Idempotent.
pub fn dedup_and_cap(beam: &BeamRecord, cap: usize) -> BeamRecord {
    let mut order: Vec<Prediction> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for pred in &beam.predictions {
        let key = sql_dedup_key(&pred.sql);
        match index.get(&key) {
            Some(&i) => {
                if pred.parser_score > order[i].parser_score {
                    order[i].parser_score = pred.parser_score;
                }
            }
            None => {
                index.insert(key, order.len());
                order.push(pred.clone());
            }
        }
    }
    order.truncate(cap);
    BeamRecord { predictions: order, ..beam.clone() }
}

/// Split partition tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    HalfA,
    HalfB,
    Train,
    Dev,
    Fold(usize),
}

impl Partition {
    pub fn manifest_name(&self) -> String {
        match self {
            Partition::HalfA => "half_a".into(),
            Partition::HalfB => "half_b".into(),
            Partition::Train => "train".into(),
            Partition::Dev => "dev".into(),
            Partition::Fold(i) => format!("fold_{i}"),
        }
    }
}

/// Database-level split: every database is assigned to exactly one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub assignments: BTreeMap<String, Partition>,
}

impl SplitSpec {
    pub fn dbs_in(&self, partition: Partition) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, p)| **p == partition)
            .map(|(db, _)| db.clone())
            .collect()
    }

    pub fn partition_of(&self, db_id: &str) -> Option<Partition> {
        self.assignments.get(db_id).copied()
    }

    /// One plain-text manifest per partition (one db id per line), named
    /// `<prefix><partition>.txt` under `dir`.
    pub fn write_manifests(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>, DataError> {
        fs::create_dir_all(dir)?;
        let mut by_partition: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        for (db, partition) in &self.assignments {
            by_partition.entry(partition.manifest_name()).or_default().push(db);
        }
        let mut paths = Vec::new();
        for (name, dbs) in by_partition {
            let path = dir.join(format!("{prefix}{name}.txt"));
            let mut text = dbs.join("\n");
            text.push('\n');
            fs::write(&path, text)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

fn unique_sorted_dbs(db_ids: &[String]) -> Vec<String> {
    let set: BTreeSet<String> = db_ids.iter().cloned().collect();
    set.into_iter().collect()
}

/// Seeded partition of the databases into two halves whose sizes differ by
/// at most one.
pub fn cross_domain_halves(db_ids: &[String], seed: u64) -> Result<SplitSpec, DataError> {
    let mut dbs = unique_sorted_dbs(db_ids);
    if dbs.len() < 2 {
        return Err(DataError::TooFewDatabases { needed: 2, found: dbs.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dbs.shuffle(&mut rng);
    let half = dbs.len() / 2;
    let assignments = dbs
        .into_iter()
        .enumerate()
        .map(|(i, db)| (db, if i < half { Partition::HalfA } else { Partition::HalfB }))
        .collect();
    Ok(SplitSpec { assignments })
}

/// Seeded 80:20 database-level split into train and dev.
pub fn train_dev_split(db_ids: &[String], seed: u64) -> Result<SplitSpec, DataError> {
    let mut dbs = unique_sorted_dbs(db_ids);
    if dbs.len() < 2 {
        return Err(DataError::TooFewDatabases { needed: 2, found: dbs.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dbs.shuffle(&mut rng);
    let n = dbs.len();
    let n_train = (n * 4 / 5).clamp(1, n - 1);
    let assignments = dbs
        .into_iter()
        .enumerate()
        .map(|(i, db)| (db, if i < n_train { Partition::Train } else { Partition::Dev }))
        .collect();
    Ok(SplitSpec { assignments })
}

/// Drops whole beams whose top prediction is unexecutable, then drops
/// unexecutable members from the surviving beams. All predictions must be
/// labeled.
pub fn filter_executable(beams: &[BeamRecord]) -> Result<Vec<BeamRecord>, DataError> {
    for beam in beams {
        if beam.predictions.iter().any(|p| p.label.is_none()) {
            return Err(DataError::MissingLabels(beam.question_id.clone()));
        }
    }
    Ok(beams
        .iter()
        .filter(|b| b.top().label.expect("checked").is_executable())
        .map(|b| BeamRecord {
            predictions: b
                .predictions
                .iter()
                .filter(|p| p.label.expect("checked").is_executable())
                .cloned()
                .collect(),
            ..b.clone()
        })
        .collect())
}

/// Corpus statistics in the total / average-per-beam shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub beam_count: usize,
    pub hits_total: usize,
    pub hits_avg_per_beam: f64,
    pub misses_total: usize,
    pub misses_avg_per_beam: f64,
}

impl StatsSummary {
    /// Display row with averages rounded to one decimal.
    pub fn display_row(&self) -> String {
        format!(
            "{} & {}/{:.1} & {}/{:.1}",
            self.beam_count,
            self.hits_total,
            self.hits_avg_per_beam,
            self.misses_total,
            self.misses_avg_per_beam
        )
    }
}

pub fn stats(beams: &[BeamRecord]) -> Result<StatsSummary, DataError> {
    let mut hits = 0usize;
    let mut misses = 0usize;
    for beam in beams {
        for pred in &beam.predictions {
            match pred.label {
                Some(label) if label.is_correct() => hits += 1,
                Some(label) if label.is_executable() => misses += 1,
                Some(_) => {}
                None => return Err(DataError::MissingLabels(beam.question_id.clone())),
            }
        }
    }
    let n = beams.len();
    Ok(StatsSummary {
        beam_count: n,
        hits_total: hits,
        hits_avg_per_beam: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        misses_total: misses,
        misses_avg_per_beam: if n == 0 { 0.0 } else { misses as f64 / n as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{LabelValue, Provenance};

    fn pred(sql: &str, score: f64) -> Prediction {
        Prediction {
            sql: sql.into(),
            parser_score: score,
            dropout_scores: None,
            label: None,
            detector_score: None,
        }
    }

    fn labeled(sql: &str, score: f64, value: LabelValue) -> Prediction {
        Prediction {
            label: Some(Label { value, provenance: Provenance::Execution }),
            ..pred(sql, score)
        }
    }

    fn beam(id: &str, db: &str, preds: Vec<Prediction>) -> BeamRecord {
        BeamRecord {
            question_id: id.into(),
            db_id: db.into(),
            question: "q".into(),
            gold_sql: "SELECT 1".into(),
            difficulty: None,
            predictions: preds,
        }
    }

    #[test]
    fn load_three_records() {
        let line = |id: &str| {
            format!(
                "{{\"question_id\":\"{id}\",\"db_id\":\"d\",\"question\":\"q\",\
                 \"gold_sql\":\"SELECT 1\",\"predictions\":[{{\"sql\":\"SELECT 1\",\
                 \"parser_score\":-0.5}}]}}"
            )
        };
        let text = format!("{}\n{}\n{}\n", line("a"), line("b"), line("c"));
        let beams = load_beams_str(&text).unwrap();
        assert_eq!(beams.len(), 3);
    }

    #[test]
    fn missing_gold_sql_is_format_error() {
        let text = "{\"question_id\":\"a\",\"db_id\":\"d\",\"question\":\"q\",\
                    \"predictions\":[{\"sql\":\"SELECT 1\",\"parser_score\":0}]}";
        let err = load_beams_str(text).unwrap_err();
        assert!(matches!(err, DataError::Format { line: 1, .. }));
    }

    #[test]
    fn duplicate_question_rejected() {
        let line = "{\"question_id\":\"a\",\"db_id\":\"d\",\"question\":\"q\",\
                    \"gold_sql\":\"SELECT 1\",\"predictions\":[{\"sql\":\"SELECT 1\",\
                    \"parser_score\":0}]}";
        let text = format!("{line}\n{line}\n");
        assert!(matches!(load_beams_str(&text), Err(DataError::DuplicateQuestion(_))));
    }

    #[test]
    fn wrong_dropout_arity_rejected() {
        let text = "{\"question_id\":\"a\",\"db_id\":\"d\",\"question\":\"q\",\
                    \"gold_sql\":\"SELECT 1\",\"predictions\":[{\"sql\":\"SELECT 1\",\
                    \"parser_score\":0,\"dropout_scores\":[1.0,2.0]}]}";
        assert!(matches!(load_beams_str(text), Err(DataError::Format { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let beams = vec![BeamRecord {
            difficulty: Some("easy".into()),
            predictions: vec![Prediction {
                sql: "SELECT a FROM t".into(),
                parser_score: -0.25,
                dropout_scores: Some(vec![0.1; DROPOUT_PASSES]),
                label: Some(Label {
                    value: LabelValue::Correct,
                    provenance: Provenance::OrderInsensitive,
                }),
                detector_score: Some(0.75),
            }],
            ..beam("q1", "db1", vec![])
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("beams.jsonl");
        save_beams(&path, &beams).unwrap();
        assert_eq!(load_beams(&path).unwrap(), beams);
    }

    #[test]
    fn dedup_eight_predictions_two_duplicate_pairs() {
        let b = beam(
            "q",
            "d",
            vec![
                pred("SELECT a FROM t", -1.0),
                pred("select a from t", -2.0), // dup of 0
                pred("SELECT b FROM t", -3.0),
                pred("SELECT c FROM t", -4.0),
                pred("SELECT  b  FROM  t", -5.0), // dup of 2
                pred("SELECT d FROM t", -6.0),
                pred("SELECT e FROM t", -7.0),
                pred("SELECT f FROM t", -8.0),
            ],
        );
        let out = dedup_and_cap(&b, 5);
        assert_eq!(out.predictions.len(), 5); // 6 unique, capped at 5
        assert_eq!(out.predictions[0].sql, "SELECT a FROM t");
    }

    #[test]
    fn all_identical_keeps_one_with_max_score() {
        let b = beam(
            "q",
            "d",
            vec![
                pred("SELECT a FROM t", -3.0),
                pred("select A from T", -1.0),
                pred("SELECT a FROM  t", -2.0),
            ],
        );
        let out = dedup_and_cap(&b, 5);
        assert_eq!(out.predictions.len(), 1);
        assert_eq!(out.predictions[0].parser_score, -1.0);
    }

    #[test]
    fn dedup_is_idempotent() {
        let b = beam(
            "q",
            "d",
            vec![pred("SELECT a FROM t", -1.0), pred("SELECT a FROM t", -0.5)],
        );
        let once = dedup_and_cap(&b, 5);
        let twice = dedup_and_cap(&once, 5);
        assert_eq!(once, twice);
    }

    #[test]
    fn halves_small_cases() {
        let two: Vec<String> = vec!["a".into(), "b".into()];
        let spec = cross_domain_halves(&two, 7).unwrap();
        assert_eq!(spec.dbs_in(Partition::HalfA).len(), 1);
        assert_eq!(spec.dbs_in(Partition::HalfB).len(), 1);

        let seven: Vec<String> = (0..7).map(|i| format!("db{i}")).collect();
        let spec = cross_domain_halves(&seven, 7).unwrap();
        let a = spec.dbs_in(Partition::HalfA).len();
        let b = spec.dbs_in(Partition::HalfB).len();
        assert_eq!((a.min(b), a.max(b)), (3, 4));
    }

    #[test]
    fn halves_deterministic_under_seed() {
        let dbs: Vec<String> = (0..11).map(|i| format!("db{i}")).collect();
        assert_eq!(cross_domain_halves(&dbs, 3).unwrap(), cross_domain_halves(&dbs, 3).unwrap());
        assert_ne!(cross_domain_halves(&dbs, 3).unwrap(), cross_domain_halves(&dbs, 4).unwrap());
    }

    #[test]
    fn train_dev_ratios() {
        let ten: Vec<String> = (0..10).map(|i| format!("db{i}")).collect();
        let spec = train_dev_split(&ten, 0).unwrap();
        assert_eq!(spec.dbs_in(Partition::Train).len(), 8);
        assert_eq!(spec.dbs_in(Partition::Dev).len(), 2);

        let five: Vec<String> = (0..5).map(|i| format!("db{i}")).collect();
        let spec = train_dev_split(&five, 0).unwrap();
        assert_eq!(spec.dbs_in(Partition::Train).len(), 4);
        assert_eq!(spec.dbs_in(Partition::Dev).len(), 1);

        let one: Vec<String> = vec!["only".into()];
        assert!(matches!(
            train_dev_split(&one, 0),
            Err(DataError::TooFewDatabases { .. })
        ));
    }

    #[test]
    fn filter_drops_unexecutable_tops_and_members() {
        let beams = vec![
            beam("q1", "d", vec![labeled("bad(", -1.0, LabelValue::Unexecutable)]),
            beam(
                "q2",
                "d",
                vec![
                    labeled("SELECT 1", -1.0, LabelValue::Correct),
                    labeled("bad(", -2.0, LabelValue::Unexecutable),
                    labeled("SELECT 2", -3.0, LabelValue::Wrong),
                ],
            ),
        ];
        let out = filter_executable(&beams).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].question_id, "q2");
        assert_eq!(out[0].predictions.len(), 2);
    }

    #[test]
    fn filter_requires_labels() {
        let beams = vec![beam("q1", "d", vec![pred("SELECT 1", 0.0)])];
        assert!(matches!(filter_executable(&beams), Err(DataError::MissingLabels(_))));
    }

    #[test]
    fn stats_one_beam() {
        let beams = vec![beam(
            "q",
            "d",
            vec![
                labeled("SELECT 1", 0.0, LabelValue::Correct),
                labeled("SELECT 2", 0.0, LabelValue::Correct),
                labeled("SELECT 3", 0.0, LabelValue::Wrong),
                labeled("SELECT 4", 0.0, LabelValue::Wrong),
                labeled("SELECT 5", 0.0, LabelValue::Wrong),
            ],
        )];
        let s = stats(&beams).unwrap();
        assert_eq!(
            (s.beam_count, s.hits_total, s.misses_total),
            (1, 2, 3)
        );
        assert_eq!(s.hits_avg_per_beam, 2.0);
        assert_eq!(s.misses_avg_per_beam, 3.0);
    }
}
