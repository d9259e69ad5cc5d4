//! Read-only query execution with timeout and tolerant text decoding.

use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};

use crate::error::{ExecError, ExecFailure};

use super::{ExecResult, Scalar};

/// How TEXT cells are decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextDecoding {
    /// Invalid byte sequences become replacement characters; never fails.
    Lossy,
    /// Invalid byte sequences fail the query (the unfixed behavior).
    Strict,
}

/// Runs `sql` against the database at `db_path`, read-only, materializing the
/// full result. Invalid UTF-8 in text cells is replaced, never raised.
pub fn execute(db_path: &Path, sql: &str, timeout_ms: u64) -> Result<ExecResult, ExecError> {
    execute_with(db_path, sql, timeout_ms, TextDecoding::Lossy)
}

pub fn execute_with(
    db_path: &Path,
    sql: &str,
    timeout_ms: u64,
    decoding: TextDecoding,
) -> Result<ExecResult, ExecError> {
    if !db_path.exists() {
        return Err(ExecError::Database(format!("no such database file: {}", db_path.display())));
    }
    let conn = Connection::open_with_flags(db_path, OpenFlags::SQLITE_OPEN_READ_ONLY)
        .map_err(|e| ExecError::Database(e.to_string()))?;

    let deadline = Instant::now() + Duration::from_millis(timeout_ms);
    conn.progress_handler(1_000, Some(move || Instant::now() > deadline));

    let mut stmt = conn.prepare(sql).map_err(classify_query_error)?;
    let ncols = stmt.column_count();
    let mut columns: Vec<Vec<Scalar>> = vec![Vec::new(); ncols];
    let mut row_count = 0usize;

    let mut rows = stmt.query([]).map_err(classify_query_error)?;
    loop {
        let row = match rows.next() {
            Ok(Some(row)) => row,
            Ok(None) => break,
            Err(e) => return Err(classify_query_error(e)),
        };
        for (i, column) in columns.iter_mut().enumerate() {
            let value = row.get_ref(i).map_err(|e| ExecError::Query {
                kind: ExecFailure::Runtime,
                message: e.to_string(),
            })?;
            column.push(decode_value(value, decoding)?);
        }
        row_count += 1;
    }
    Ok(ExecResult { columns, row_count })
}

fn decode_value(value: ValueRef<'_>, decoding: TextDecoding) -> Result<Scalar, ExecError> {
    Ok(match value {
        ValueRef::Null => Scalar::Null,
        ValueRef::Integer(i) => Scalar::Int(i),
        ValueRef::Real(f) => Scalar::Real(f),
        ValueRef::Text(bytes) => match decoding {
            TextDecoding::Lossy => Scalar::Text(String::from_utf8_lossy(bytes).into_owned()),
            TextDecoding::Strict => match std::str::from_utf8(bytes) {
                Ok(s) => Scalar::Text(s.to_string()),
                Err(e) => {
                    return Err(ExecError::Query {
                        kind: ExecFailure::Runtime,
                        message: format!("invalid utf-8 in text cell: {e}"),
                    })
                }
            },
        },
        ValueRef::Blob(bytes) => Scalar::Blob(bytes.to_vec()),
    })
}

fn classify_query_error(err: rusqlite::Error) -> ExecError {
    let message = err.to_string();
    let kind = match &err {
        rusqlite::Error::SqliteFailure(e, _)
            if e.code == rusqlite::ErrorCode::OperationInterrupted =>
        {
            ExecFailure::Timeout
        }
        _ if message.contains("syntax error") => ExecFailure::Syntax,
        _ => ExecFailure::Runtime,
    };
    ExecError::Query { kind, message }
}

/// Creates (or extends) a database file from a SQL script. Used to
/// materialize bundled fixture databases; labeling itself never writes.
pub fn create_database(path: &Path, script: &str) -> Result<(), ExecError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| ExecError::Database(format!("cannot create {}: {e}", parent.display())))?;
    }
    let conn = Connection::open(path).map_err(|e| ExecError::Database(e.to_string()))?;
    conn.execute_batch(script).map_err(|e| ExecError::Database(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ExecFailure;

    fn temp_db(script: &str) -> tempfile::TempPath {
        let file = tempfile::NamedTempFile::new().unwrap();
        let path = file.into_temp_path();
        std::fs::remove_file(&path).ok();
        create_database(&path, script).unwrap();
        path
    }

    #[test]
    fn select_constant() {
        let db = temp_db("CREATE TABLE t(x INTEGER);");
        let res = execute(&db, "SELECT 1", 5_000).unwrap();
        assert_eq!(res.columns, vec![vec![Scalar::Int(1)]]);
        assert_eq!(res.row_count, 1);
    }

    #[test]
    fn missing_column_is_runtime_error() {
        let db = temp_db("CREATE TABLE t(x INTEGER);");
        let err = execute(&db, "SELECT nonexistent FROM t", 5_000).unwrap_err();
        assert_eq!(err.failure_kind(), Some(ExecFailure::Runtime));
    }

    #[test]
    fn bad_syntax_is_syntax_error() {
        let db = temp_db("CREATE TABLE t(x INTEGER);");
        let err = execute(&db, "SELECT FROM WHERE", 5_000).unwrap_err();
        assert_eq!(err.failure_kind(), Some(ExecFailure::Syntax));
    }

    #[test]
    fn invalid_utf8_cell_is_replaced_not_raised() {
        let db = temp_db(
            "CREATE TABLE t(id INTEGER, txt TEXT);\n\
             INSERT INTO t VALUES (1, CAST(X'C3' AS TEXT));\n\
             INSERT INTO t VALUES (2, 'ok');",
        );
        let res = execute(&db, "SELECT txt FROM t WHERE id = 1", 5_000).unwrap();
        match &res.columns[0][0] {
            Scalar::Text(s) => assert!(s.contains('\u{FFFD}')),
            other => panic!("expected text, got {other:?}"),
        }
        let err =
            execute_with(&db, "SELECT txt FROM t WHERE id = 1", 5_000, TextDecoding::Strict)
                .unwrap_err();
        assert_eq!(err.failure_kind(), Some(ExecFailure::Runtime));
    }

    #[test]
    fn runaway_query_times_out() {
        let db = temp_db("CREATE TABLE t(x INTEGER);");
        let err = execute(
            &db,
            "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) \
             SELECT count(*) FROM c",
            200,
        )
        .unwrap_err();
        assert_eq!(err.failure_kind(), Some(ExecFailure::Timeout));
    }

    #[test]
    fn write_statements_rejected_by_read_only_connection() {
        let db = temp_db("CREATE TABLE t(x INTEGER);");
        assert!(execute(&db, "INSERT INTO t VALUES (1)", 5_000).is_err());
    }
}
