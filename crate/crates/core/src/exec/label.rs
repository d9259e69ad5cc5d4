//! The fixed labeling pipeline, the naive pipeline it is audited against,
//! and corpus-level labeling with caching.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::BeamRecord;
use crate::error::ExecError;
use crate::sql::rewrite::{drop_equal_limits, has_top_level_order_by, set_match};
use crate::sql::parse_sql;

use super::run::{execute_with, TextDecoding};
use super::{compare_results, ExecResult, Label, LabelValue, Provenance};

/// Bumped whenever labeling semantics change; part of the cache key.
pub const PIPELINE_VERSION: &str = "1";

/// Labels one prediction against its gold query with all fixes applied:
/// equal top-level LIMITs are dropped, text decodes tolerantly, an empty
/// gold result falls back to exact set match, and comparison is
/// order-insensitive unless the gold query has a top-level ORDER BY.
pub fn label_prediction(
    db_path: &Path,
    gold_sql: &str,
    pred_sql: &str,
    timeout_ms: u64,
) -> Result<Label, ExecError> {
    let gold_ast = parse_sql(gold_sql)
        .map_err(|e| ExecError::Data(format!("gold query does not parse: {e}")))?;
    let Ok(pred_ast) = parse_sql(pred_sql) else {
        return Ok(Label { value: LabelValue::Unexecutable, provenance: Provenance::ParseFailure });
    };
    let (gold_ast, pred_ast) = drop_equal_limits(&gold_ast, &pred_ast);

    let gold_res = execute_with(db_path, &gold_ast.render(), timeout_ms, TextDecoding::Lossy)
        .map_err(|e| ExecError::Data(format!("gold query does not execute: {e}")))?;
    let Ok(pred_res) = execute_with(db_path, &pred_ast.render(), timeout_ms, TextDecoding::Lossy)
    else {
        return Ok(Label {
            value: LabelValue::Unexecutable,
            provenance: Provenance::ExecutionFailure,
        });
    };

    if gold_res.is_empty() {
        let value =
            if set_match(&gold_ast, &pred_ast) { LabelValue::Correct } else { LabelValue::Wrong };
        return Ok(Label { value, provenance: Provenance::SetMatch });
    }

    let order_sensitive = has_top_level_order_by(&gold_ast);
    let equal = compare_results(&gold_res, &pred_res, order_sensitive);
    Ok(Label {
        value: if equal { LabelValue::Correct } else { LabelValue::Wrong },
        provenance: if order_sensitive {
            Provenance::Execution
        } else {
            Provenance::OrderInsensitive
        },
    })
}

/// The unfixed pipeline: strict text decoding, no LIMIT handling, no
/// empty-result fallback, and always order-sensitive comparison. A gold-side
/// failure labels the sample wrong, mirroring an evaluation script that
/// errors out mid-comparison.
pub fn label_prediction_naive(
    db_path: &Path,
    gold_sql: &str,
    pred_sql: &str,
    timeout_ms: u64,
) -> Result<Label, ExecError> {
    let Ok(pred_res) = execute_with(db_path, pred_sql, timeout_ms, TextDecoding::Strict) else {
        return Ok(Label {
            value: LabelValue::Unexecutable,
            provenance: Provenance::ExecutionFailure,
        });
    };
    let Ok(gold_res) = execute_with(db_path, gold_sql, timeout_ms, TextDecoding::Strict) else {
        return Ok(Label { value: LabelValue::Wrong, provenance: Provenance::Execution });
    };
    let equal = naive_equal(&gold_res, &pred_res);
    Ok(Label {
        value: if equal { LabelValue::Correct } else { LabelValue::Wrong },
        provenance: Provenance::Execution,
    })
}

fn naive_equal(gold: &ExecResult, pred: &ExecResult) -> bool {
    compare_results(gold, pred, true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    db_id: String,
    gold_sha: String,
    pred_sha: String,
    version: String,
    label: Label,
}

fn sha_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Label cache keyed by (db id, gold hash, pred hash, pipeline version),
/// persisted as JSON lines.
#[derive(Debug, Default)]
pub struct LabelCache {
    entries: BTreeMap<(String, String, String), Label>,
}

impl LabelCache {
    pub fn load(path: &Path) -> Result<Self, ExecError> {
        let mut cache = LabelCache::default();
        if !path.exists() {
            return Ok(cache);
        }
        let text = fs::read_to_string(path)
            .map_err(|e| ExecError::Database(format!("cannot read cache: {e}")))?;
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry = serde_json::from_str(line)
                .map_err(|e| ExecError::Database(format!("corrupt cache line: {e}")))?;
            if entry.version == PIPELINE_VERSION {
                cache
                    .entries
                    .insert((entry.db_id, entry.gold_sha, entry.pred_sha), entry.label);
            }
        }
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<(), ExecError> {
        let mut out = String::new();
        for ((db_id, gold_sha, pred_sha), label) in &self.entries {
            let entry = CacheEntry {
                db_id: db_id.clone(),
                gold_sha: gold_sha.clone(),
                pred_sha: pred_sha.clone(),
                version: PIPELINE_VERSION.to_string(),
                label: *label,
            };
            out.push_str(&serde_json::to_string(&entry).expect("cache entries serialize"));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| ExecError::Database(format!("cannot write cache: {e}")))
    }

    pub fn get(&self, db_id: &str, gold_sql: &str, pred_sql: &str) -> Option<Label> {
        self.entries
            .get(&(db_id.to_string(), sha_hex(gold_sql), sha_hex(pred_sql)))
            .copied()
    }

    pub fn put(&mut self, db_id: &str, gold_sql: &str, pred_sql: &str, label: Label) {
        self.entries
            .insert((db_id.to_string(), sha_hex(gold_sql), sha_hex(pred_sql)), label);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Corpus labeler: resolves database paths under
/// `db_root/<db_id>/<db_id>.sqlite` and labels beams in parallel.
pub struct Labeler {
    db_root: PathBuf,
    timeout_ms: u64,
}

impl Labeler {
    pub fn new(db_root: &Path, timeout_ms: u64) -> Self {
        Labeler { db_root: db_root.to_path_buf(), timeout_ms }
    }

    pub fn db_path(&self, db_id: &str) -> PathBuf {
        self.db_root.join(db_id).join(format!("{db_id}.sqlite"))
    }

    pub fn label(&self, db_id: &str, gold_sql: &str, pred_sql: &str) -> Result<Label, ExecError> {
        label_prediction(&self.db_path(db_id), gold_sql, pred_sql, self.timeout_ms)
    }

    /// Labels every prediction of every beam, filling `label` in place.
    /// Already-cached pairs are not re-executed; fresh labels are added to
    /// the cache.
    pub fn label_beams(
        &self,
        beams: &mut [BeamRecord],
        cache: &mut LabelCache,
        workers: usize,
    ) -> Result<(), ExecError> {
        // (beam, prediction) pairs still needing execution.
        let mut jobs: Vec<(usize, usize)> = Vec::new();
        for (bi, beam) in beams.iter_mut().enumerate() {
            for pi in 0..beam.predictions.len() {
                if let Some(label) =
                    cache.get(&beam.db_id, &beam.gold_sql, &beam.predictions[pi].sql)
                {
                    beam.predictions[pi].label = Some(label);
                } else {
                    jobs.push((bi, pi));
                }
            }
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| ExecError::Database(e.to_string()))?;
        let results: Vec<Result<Label, ExecError>> = pool.install(|| {
            jobs.par_iter()
                .map(|&(bi, pi)| {
                    let beam = &beams[bi];
                    self.label(&beam.db_id, &beam.gold_sql, &beam.predictions[pi].sql)
                })
                .collect()
        });
        for (&(bi, pi), result) in jobs.iter().zip(results) {
            let label = result?;
            let beam = &mut beams[bi];
            cache.put(&beam.db_id, &beam.gold_sql, &beam.predictions[pi].sql, label);
            beam.predictions[pi].label = Some(label);
        }
        Ok(())
    }
}

/// Top-1 accuracy under the fixed pipeline plus the number of examples where
/// the fixed and naive pipelines disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParserEvalReport {
    pub examples: usize,
    pub accuracy: f64,
    pub disagreements: usize,
}

pub fn evaluate_parser(
    beams: &[BeamRecord],
    db_root: &Path,
    timeout_ms: u64,
) -> Result<ParserEvalReport, ExecError> {
    let labeler = Labeler::new(db_root, timeout_ms);
    let mut correct = 0usize;
    let mut disagreements = 0usize;
    for beam in beams {
        let top = beam.top();
        let fixed = labeler.label(&beam.db_id, &beam.gold_sql, &top.sql)?;
        let naive = label_prediction_naive(
            &labeler.db_path(&beam.db_id),
            &beam.gold_sql,
            &top.sql,
            timeout_ms,
        )?;
        if fixed.is_correct() {
            correct += 1;
        }
        if fixed.value != naive.value {
            disagreements += 1;
        }
    }
    Ok(ParserEvalReport {
        examples: beams.len(),
        accuracy: if beams.is_empty() { 0.0 } else { correct as f64 / beams.len() as f64 },
        disagreements,
    })
}

#[cfg(test)]
mod tests {
    use super::super::run::create_database;
    use super::*;

    const HEAD_DB: &str = "\
        CREATE TABLE head(head_ID INTEGER, name TEXT, age INTEGER);\n\
        INSERT INTO head VALUES (1, 'Tiger', 67);\n\
        INSERT INTO head VALUES (2, 'Dudley', 42);\n\
        INSERT INTO head VALUES (3, 'Jeff', 69);\n\
        INSERT INTO head VALUES (4, 'Franklin', 69);\n";

    fn temp_db(script: &str) -> tempfile::TempPath {
        let file = tempfile::NamedTempFile::new().unwrap();
        let path = file.into_temp_path();
        std::fs::remove_file(&path).ok();
        create_database(&path, script).unwrap();
        path
    }

    #[test]
    fn identical_order_by_query_is_correct_via_execution() {
        let db = temp_db(
            "CREATE TABLE festival_detail(festival_name TEXT, year INTEGER);\n\
             INSERT INTO festival_detail VALUES ('a', 2007), ('b', 2010), ('c', 2011), ('d', 2012);",
        );
        let gold = "SELECT festival_detail.festival_name FROM festival_detail \
                    ORDER BY festival_detail.year DESC LIMIT 3";
        let label = label_prediction(&db, gold, gold, 5_000).unwrap();
        assert_eq!(label.value, LabelValue::Correct);
        assert_eq!(label.provenance, Provenance::Execution);
    }

    #[test]
    fn equal_limit_tie_is_correct_after_limit_removal() {
        let db = temp_db(HEAD_DB);
        // Three heads qualify; the two queries pick different pairs of them
        // under LIMIT 2, so the naive comparison mislabels the prediction.
        // With the equal LIMITs removed, the full results compare equal
        // (order-insensitively, since gold has no top-level ORDER BY).
        let gold = "SELECT name FROM head WHERE age > 56 LIMIT 2";
        let pred = "SELECT name FROM head WHERE age > 56 ORDER BY name ASC LIMIT 2";
        let fixed = label_prediction(&db, gold, pred, 5_000).unwrap();
        assert_eq!(fixed.value, LabelValue::Correct);
        let naive = label_prediction_naive(&db, gold, pred, 5_000).unwrap();
        assert_eq!(naive.value, LabelValue::Wrong);
    }

    #[test]
    fn wrong_projection_is_wrong() {
        let db = temp_db(HEAD_DB);
        let gold = "SELECT COUNT(*) FROM head WHERE head.age > 56";
        let pred = "SELECT head.name FROM head WHERE head.age > 56";
        let label = label_prediction(&db, gold, pred, 5_000).unwrap();
        assert_eq!(label.value, LabelValue::Wrong);
    }

    #[test]
    fn unparseable_prediction_is_unexecutable() {
        let db = temp_db(HEAD_DB);
        let gold = "SELECT COUNT(*) FROM head";
        let pred = "SELECT ( DISTINCT head.name) FROM head";
        let label = label_prediction(&db, gold, pred, 5_000).unwrap();
        assert_eq!(label.value, LabelValue::Unexecutable);
        assert_eq!(label.provenance, Provenance::ParseFailure);
    }

    #[test]
    fn self_equivalence_holds() {
        let db = temp_db(HEAD_DB);
        for q in [
            "SELECT COUNT(*) FROM head WHERE head.age > 56",
            "SELECT name FROM head ORDER BY age DESC LIMIT 2",
            "SELECT age , COUNT(*) FROM head GROUP BY age",
            "SELECT name FROM head WHERE age > 100",
        ] {
            let label = label_prediction(&db, q, q, 5_000).unwrap();
            assert_eq!(label.value, LabelValue::Correct, "{q}");
        }
    }

    #[test]
    fn whitespace_and_case_invariance() {
        let db = temp_db(HEAD_DB);
        let gold = "SELECT COUNT(*) FROM head WHERE head.age > 56";
        let pred = "select   count(*)  from HEAD where head.AGE > 56";
        let label = label_prediction(&db, gold, pred, 5_000).unwrap();
        assert_eq!(label.value, LabelValue::Correct);
    }

    #[test]
    fn cache_round_trip() {
        let mut cache = LabelCache::default();
        let label = Label { value: LabelValue::Correct, provenance: Provenance::Execution };
        cache.put("db1", "SELECT 1", "SELECT 1", label);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        cache.save(&path).unwrap();
        let loaded = LabelCache::load(&path).unwrap();
        assert_eq!(loaded.get("db1", "SELECT 1", "SELECT 1"), Some(label));
        assert_eq!(loaded.get("db2", "SELECT 1", "SELECT 1"), None);
    }
}
