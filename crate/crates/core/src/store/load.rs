use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::store::database::{for_each_tuple, AtomSource, Database, DatabaseBuilder};
use crate::store::schema::Schema;

/// Loads a schema and one CSV per functor. The functor is taken from the
/// file stem; each file has a header row `arg1,...,argk,value`.
/// Relationship files may omit false rows; every attribute atom must be
/// present.
pub fn load_database(schema_file: &Path, data_files: &[PathBuf]) -> Result<Database> {
    let schema = Arc::new(Schema::load(schema_file)?);
    load_with_schema(schema, data_files)
}

/// Loads every `*.csv` in `dir`, in name order.
pub fn load_dir(schema_file: &Path, dir: &Path) -> Result<Database> {
    load_database(schema_file, &csv_files(dir)?)
}

pub fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_with_schema(schema: Arc<Schema>, data_files: &[PathBuf]) -> Result<Database> {
    let mut builder = DatabaseBuilder::new(schema.clone())?;
    for path in data_files {
        let file = path.display().to_string();
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::InvalidArgument(format!("bad data file name {file}")))?;
        let f = schema.functor_id(stem)?;
        let info = schema.functor(f);
        let arity = info.arg_pops.len();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let header_len = reader.headers().map_err(|e| csv_error(path, e))?.len();
        if header_len != arity + 1 {
            return Err(Error::SchemaViolation {
                file,
                row: 1,
                message: format!("expected {} columns for `{stem}`, found {header_len}", arity + 1),
            });
        }
        let mut record = csv::StringRecord::new();
        let mut ids = vec![0; arity];
        let mut row = 1usize;
        while reader.read_record(&mut record).map_err(|e| csv_error(path, e))? {
            row += 1;
            let violation = |message: String| Error::SchemaViolation {
                file: file.clone(),
                row,
                message,
            };
            if record.len() != arity + 1 {
                return Err(violation(format!("expected {} fields, found {}", arity + 1, record.len())));
            }
            for (i, &p) in info.arg_pops.iter().enumerate() {
                ids[i] = schema
                    .population(p)
                    .id(&record[i])
                    .map_err(|e| violation(e.to_string()))?;
            }
            let v = info
                .decl
                .value_index(&record[arity])
                .map_err(|e| violation(e.to_string()))?;
            builder.set_ids(f, &ids, v).map_err(|e| match e {
                Error::ConflictingAtom { .. } => e,
                other => violation(other.to_string()),
            })?;
        }
    }
    builder.finish()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

/// Writes `schema.json` and one CSV per functor into `dir`. Relationship
/// files list true tuples only.
pub fn write_database(db: &Database, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema = db.schema();
    let path = dir.join("schema.json");
    std::fs::write(&path, schema.to_json()).map_err(|e| Error::io(&path, e))?;
    for (f, info) in schema.functors().iter().enumerate() {
        let path = dir.join(format!("{}.csv", info.name()));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        let arity = info.arg_pops.len();
        let mut header: Vec<String> = (1..=arity).map(|i| format!("arg{i}")).collect();
        header.push("value".into());
        w.write_record(&header).map_err(|e| csv_error(&path, e))?;
        let mut result = Ok(());
        let mut emit = |args: &[u32], value: &str| {
            if result.is_err() {
                return;
            }
            result = args
                .iter()
                .zip(&info.arg_pops)
                .try_for_each(|(&a, &p)| w.write_field(schema.population(p).constant(a)))
                .and_then(|_| w.write_field(value))
                .and_then(|_| w.write_record(None::<&[u8]>));
        };
        if info.is_relationship() {
            for t in db.true_tuples(f) {
                emit(&t, "T");
            }
        } else {
            let dims: Vec<usize> = info.arg_pops.iter().map(|&p| schema.population(p).len()).collect();
            for_each_tuple(&dims, |args| {
                emit(args, &info.decl.range[db.attr_value(f, args) as usize]);
            });
        }
        result.map_err(|e| csv_error(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
