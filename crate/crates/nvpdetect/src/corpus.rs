//! Fixture corpus IO. A corpus root holds the program under test in
//! `src/`, its test files in `tests/`, and forged variants under
//! `variants/<id>/src/`, all as `.mini` sources read in name order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use minilang::ast::Program;
use minilang::error::ParseError;
use minilang::parser::parse_program_file;

use crate::test_ir::TestSuite;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("missing directory {0}")]
    MissingDir(PathBuf),
    #[error("no .mini files under {0}")]
    Empty(PathBuf),
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `(file stem, source)` pairs for every `.mini` file in one directory,
/// sorted by name so load order is stable across platforms.
pub fn mini_files(dir: &Path) -> Result<Vec<(String, String)>, CorpusError> {
    if !dir.is_dir() {
        return Err(CorpusError::MissingDir(dir.to_path_buf()));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "mini"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let stem = path
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        out.push((stem, text));
    }
    if out.is_empty() {
        return Err(CorpusError::Empty(dir.to_path_buf()));
    }
    Ok(out)
}

/// The program under `<root>/src/`.
pub fn load_program(root: &Path) -> Result<Program, CorpusError> {
    load_program_dir(&root.join("src"))
}

/// A program from one directory of `.mini` files.
pub fn load_program_dir(dir: &Path) -> Result<Program, CorpusError> {
    let mut files = Vec::new();
    for (name, text) in mini_files(dir)? {
        files.push(parse_program_file(&name, &text)?);
    }
    Ok(Program { files })
}

/// The test suite under `<root>/tests/`.
pub fn load_suite(root: &Path) -> Result<TestSuite, CorpusError> {
    let sources = mini_files(&root.join("tests"))?;
    Ok(TestSuite::parse(&sources)?)
}

/// Variant ids under `<root>/variants/`, name order. A corpus without a
/// variants directory simply has none.
pub fn variant_ids(root: &Path) -> Result<Vec<String>, CorpusError> {
    let dir = root.join("variants");
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut ids: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| io_err(&dir, e))?
        .filter_map(|entry| entry.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    Ok(ids)
}

/// The variant program under `<root>/variants/<id>/src/`.
pub fn load_variant(root: &Path, id: &str) -> Result<Program, CorpusError> {
    load_program(&root.join("variants").join(id))
}

/// Write `(name, source)` pairs as `<dir>/<name>.mini`.
pub fn write_sources(dir: &Path, sources: &BTreeMap<String, String>) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (name, text) in sources {
        let path = dir.join(format!("{name}.mini"));
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    const PROGRAM: &str = "class A {\n    pub fn getOne(): int {\n        return 1;\n    }\n}\n";
    const TESTS: &str =
        "import checks;\n\ntest one() {\n    let a: A = new A();\n    assertEquals(1, a.getOne());\n}\n";

    fn corpus() -> TempDir {
        let root = TempDir::new().unwrap();
        fs::create_dir_all(root.path().join("src")).unwrap();
        fs::create_dir_all(root.path().join("tests")).unwrap();
        fs::write(root.path().join("src/A.mini"), PROGRAM).unwrap();
        fs::write(root.path().join("tests/ATest.mini"), TESTS).unwrap();
        root
    }

    #[test]
    fn loads_program_and_suite_from_the_layout() {
        let root = corpus();
        let program = load_program(root.path()).unwrap();
        assert_eq!(program.files.len(), 1);
        assert_eq!(program.files[0].name, "A");
        let suite = load_suite(root.path()).unwrap();
        assert_eq!(suite.tests().count(), 1);
    }

    #[test]
    fn variants_round_trip_through_write_and_load() {
        let root = corpus();
        let sources = BTreeMap::from([("A".to_string(), PROGRAM.to_string())]);
        write_sources(&root.path().join("variants/v1/src"), &sources).unwrap();
        assert_eq!(variant_ids(root.path()).unwrap(), vec!["v1"]);
        let variant = load_variant(root.path(), "v1").unwrap();
        assert_eq!(variant.files[0].name, "A");
    }

    #[test]
    fn missing_layout_pieces_are_distinct_errors() {
        let root = TempDir::new().unwrap();
        assert!(matches!(
            load_program(root.path()),
            Err(CorpusError::MissingDir(_))
        ));
        fs::create_dir_all(root.path().join("src")).unwrap();
        assert!(matches!(load_program(root.path()), Err(CorpusError::Empty(_))));
        assert_eq!(variant_ids(root.path()).unwrap(), Vec::<String>::new());
    }

    #[test]
    fn parse_failures_name_the_file() {
        let root = corpus();
        fs::write(root.path().join("src/Bad.mini"), "class {").unwrap();
        let err = load_program(root.path()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse(_)));
        assert!(err.to_string().contains("Bad"));
    }
}
