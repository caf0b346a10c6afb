//! Suite-level test representation: parsing, rendering, statement ordinals,
//! literal slots, and assertion identification.
//!
//! Statement ordinals are pre-order indices over a test body; compound
//! statements and their children are all addressable. Inside a compound the
//! next path element indexes the concatenation of its sub-bodies (`then`
//! before `els`), mirroring program-side statement addressing.

use minilang::ast::{Expr, Lit, RawTest, TStmt, TestFile};
use minilang::error::ParseError;
use minilang::interp::{TestSet, CHECKS_EXPORTS};
use minilang::parser::parse_test_file;
use minilang::render::{self, Unrenderable};
use serde::{Deserialize, Serialize};

/// A parsed test corpus, preserving file boundaries and imports.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    pub files: Vec<TestFile>,
}

impl TestSuite {
    /// Parse `(file_stem, source)` pairs. Duplicate test names across the
    /// suite are rejected: names key traces and generated-test derivation.
    pub fn parse(sources: &[(String, String)]) -> Result<Self, ParseError> {
        let mut files = Vec::with_capacity(sources.len());
        for (name, src) in sources {
            files.push(parse_test_file(name, src)?);
        }
        let suite = TestSuite { files };
        let mut seen = std::collections::BTreeSet::new();
        for (_, test) in suite.tests() {
            if !seen.insert(test.name.clone()) {
                return Err(ParseError::Unsupported {
                    file: suite
                        .file_of(&test.name)
                        .map(|f| f.name.clone())
                        .unwrap_or_default(),
                    pos: minilang::error::Pos { line: 0, col: 0 },
                    message: format!("duplicate test name '{}'", test.name),
                });
            }
        }
        Ok(suite)
    }

    pub fn render(&self) -> Result<Vec<(String, String)>, Unrenderable> {
        self.files
            .iter()
            .map(|f| Ok((f.name.clone(), render::test_file(f)?)))
            .collect()
    }

    pub fn tests(&self) -> impl Iterator<Item = (&TestFile, &RawTest)> {
        self.files
            .iter()
            .flat_map(|f| f.tests.iter().map(move |t| (f, t)))
    }

    /// Zero-arg tests; the runnable entry points of the suite.
    pub fn entry_tests(&self) -> impl Iterator<Item = (&TestFile, &RawTest)> {
        self.tests().filter(|(_, t)| t.params.is_empty())
    }

    pub fn find(&self, name: &str) -> Option<(&TestFile, &RawTest)> {
        self.tests().find(|(_, t)| t.name == name)
    }

    pub fn file_of(&self, test_name: &str) -> Option<&TestFile> {
        self.find(test_name).map(|(f, _)| f)
    }

    /// Registry handed to the interpreter; helper invocation and assertion
    /// resolution follow each test's own file imports.
    pub fn test_set(&self) -> TestSet<'_> {
        let mut set = TestSet::new();
        for (file, test) in self.tests() {
            set.insert(test, checks_imported(file));
        }
        set
    }
}

pub fn checks_imported(file: &TestFile) -> bool {
    file.imports.iter().any(|i| i == "checks")
}

/// A free call is framework-provided when the calling file imports `checks`
/// and the callee is one of its exports.
pub fn framework_provided(callee: &str, file_imports_checks: bool) -> bool {
    file_imports_checks && CHECKS_EXPORTS.contains(&callee)
}

/// Assertion heuristic: framework provenance plus an `assert`/`fail` name.
pub fn is_assertion(callee: &str, framework_provided: bool) -> bool {
    if !framework_provided {
        return false;
    }
    let lower = callee.to_lowercase();
    lower.contains("assert") || lower.contains("fail")
}

/// True for a statement that is exactly an assertion call.
pub fn is_assertion_stmt(stmt: &TStmt, file_imports_checks: bool) -> bool {
    match stmt {
        TStmt::Expr(Expr::Free { name, .. }) => {
            is_assertion(name, framework_provided(name, file_imports_checks))
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Statement addressing
// ---------------------------------------------------------------------------

/// Path to one statement in a test body; at a compound the next element
/// indexes the concatenation of its sub-bodies.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TPath(pub Vec<usize>);

fn sub_bodies(stmt: &TStmt) -> Vec<&Vec<TStmt>> {
    match stmt {
        TStmt::For { body, .. } => vec![body],
        TStmt::If { then, els, .. } => vec![then, els],
        _ => vec![],
    }
}

fn sub_bodies_mut(stmt: &mut TStmt) -> Vec<&mut Vec<TStmt>> {
    match stmt {
        TStmt::For { body, .. } => vec![body],
        TStmt::If { then, els, .. } => vec![then, els],
        _ => vec![],
    }
}

/// Pre-order enumeration; the position of each entry is the statement's
/// ordinal within the test.
pub fn enumerate(body: &[TStmt]) -> Vec<(TPath, &TStmt)> {
    fn walk<'a>(out: &mut Vec<(TPath, &'a TStmt)>, prefix: &[usize], body: &'a [TStmt], offset: usize) {
        for (k, stmt) in body.iter().enumerate() {
            let mut path = prefix.to_vec();
            path.push(offset + k);
            out.push((TPath(path.clone()), stmt));
            let mut child_off = 0usize;
            for sub in sub_bodies(stmt) {
                walk(out, &path, sub, child_off);
                child_off += sub.len();
            }
        }
    }
    let mut out = Vec::new();
    walk(&mut out, &[], body, 0);
    out
}

pub fn path_of(body: &[TStmt], ordinal: usize) -> Option<TPath> {
    enumerate(body).into_iter().nth(ordinal).map(|(p, _)| p)
}

pub fn stmt_at(body: &[TStmt], ordinal: usize) -> Option<TStmt> {
    enumerate(body).into_iter().nth(ordinal).map(|(_, s)| s.clone())
}

fn locate<'a>(body: &'a mut Vec<TStmt>, path: &[usize]) -> Option<(&'a mut Vec<TStmt>, usize)> {
    match path {
        [] => None,
        [idx] => {
            if *idx < body.len() {
                Some((body, *idx))
            } else {
                None
            }
        }
        [head, next, rest @ ..] => {
            if *head >= body.len() {
                return None;
            }
            let mut idx = *next;
            for sub in sub_bodies_mut(&mut body[*head]) {
                if idx < sub.len() {
                    let mut inner = Vec::with_capacity(rest.len() + 1);
                    inner.push(idx);
                    inner.extend_from_slice(rest);
                    return locate(sub, &inner);
                }
                idx -= sub.len();
            }
            None
        }
    }
}

pub fn remove(body: &mut Vec<TStmt>, path: &TPath) -> bool {
    match locate(body, &path.0) {
        Some((b, i)) => {
            b.remove(i);
            true
        }
        None => false,
    }
}

pub fn insert_after(body: &mut Vec<TStmt>, path: &TPath, stmt: TStmt) -> bool {
    match locate(body, &path.0) {
        Some((b, i)) => {
            b.insert(i + 1, stmt);
            true
        }
        None => false,
    }
}

/// Duplicate the addressed statement in place (subtree and all).
pub fn duplicate(body: &mut Vec<TStmt>, path: &TPath) -> bool {
    match locate(body, &path.0) {
        Some((b, i)) => {
            let copy = b[i].clone();
            b.insert(i + 1, copy);
            true
        }
        None => false,
    }
}

pub fn replace(body: &mut Vec<TStmt>, path: &TPath, stmt: TStmt) -> bool {
    match locate(body, &path.0) {
        Some((b, i)) => {
            b[i] = stmt;
            true
        }
        None => false,
    }
}

/// Append a statement to the end of the addressed `for` body.
pub fn append_to_for(body: &mut Vec<TStmt>, path: &TPath, stmt: TStmt) -> bool {
    let Some((b, i)) = locate(body, &path.0) else {
        return false;
    };
    match &mut b[i] {
        TStmt::For { body: inner, .. } => {
            inner.push(stmt);
            true
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Literal slots
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    Str,
    Int,
    Float,
    Bool,
}

/// Address of one transformable literal: the statement's ordinal plus the
/// literal's pre-order index among that statement's own expressions. Literals
/// inside child statements belong to the child's ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteralSlot {
    pub ordinal: usize,
    pub index: usize,
    pub kind: SlotKind,
}

fn own_exprs(stmt: &TStmt) -> Vec<&Expr> {
    match stmt {
        TStmt::Let { init, .. } => vec![init],
        TStmt::Expr(e) => vec![e],
        TStmt::For { from, to, .. } => vec![from, to],
        TStmt::If { cond, .. } => vec![cond],
        TStmt::Observe { value, .. } => vec![value],
    }
}

fn walk_lits<'a>(e: &'a Expr, out: &mut Vec<&'a Lit>) {
    match e {
        Expr::Lit(l) => match l {
            Lit::Int(_) | Lit::Float(_) | Lit::Bool(_) | Lit::Str(_) => out.push(l),
            Lit::Null => {}
        },
        Expr::Var(_) | Expr::This => {}
        Expr::Field { base, .. } => walk_lits(base, out),
        Expr::Call { base, args, .. } => {
            walk_lits(base, out);
            for a in args {
                walk_lits(a, out);
            }
        }
        Expr::Free { args, .. } | Expr::New { args, .. } => {
            for a in args {
                walk_lits(a, out);
            }
        }
        Expr::Unary { expr, .. } => walk_lits(expr, out),
        Expr::Binary { lhs, rhs, .. } => {
            walk_lits(lhs, out);
            walk_lits(rhs, out);
        }
    }
}

fn walk_lits_mut<'a>(e: &'a mut Expr, out: &mut Vec<&'a mut Lit>) {
    match e {
        Expr::Lit(l) => match l {
            Lit::Int(_) | Lit::Float(_) | Lit::Bool(_) | Lit::Str(_) => out.push(l),
            Lit::Null => {}
        },
        Expr::Var(_) | Expr::This => {}
        Expr::Field { base, .. } => walk_lits_mut(base, out),
        Expr::Call { base, args, .. } => {
            walk_lits_mut(base, out);
            for a in args {
                walk_lits_mut(a, out);
            }
        }
        Expr::Free { args, .. } | Expr::New { args, .. } => {
            for a in args {
                walk_lits_mut(a, out);
            }
        }
        Expr::Unary { expr, .. } => walk_lits_mut(expr, out),
        Expr::Binary { lhs, rhs, .. } => {
            walk_lits_mut(lhs, out);
            walk_lits_mut(rhs, out);
        }
    }
}

fn kind_of(l: &Lit) -> SlotKind {
    match l {
        Lit::Int(_) => SlotKind::Int,
        Lit::Float(_) => SlotKind::Float,
        Lit::Bool(_) => SlotKind::Bool,
        Lit::Str(_) => SlotKind::Str,
        Lit::Null => unreachable!("null literals are not slots"),
    }
}

/// Every transformable literal in the test, in (ordinal, pre-order) order.
/// Literals inside assertion arguments are included; transformation runs
/// before assertion stripping.
pub fn literal_slots(test: &RawTest) -> Vec<LiteralSlot> {
    let mut out = Vec::new();
    for (ordinal, (_, stmt)) in enumerate(&test.body).iter().enumerate() {
        let mut lits = Vec::new();
        for e in own_exprs(stmt) {
            walk_lits(e, &mut lits);
        }
        for (index, lit) in lits.iter().enumerate() {
            out.push(LiteralSlot {
                ordinal,
                index,
                kind: kind_of(lit),
            });
        }
    }
    out
}

pub fn get_literal(test: &RawTest, slot: &LiteralSlot) -> Option<Lit> {
    let stmts = enumerate(&test.body);
    let (_, stmt) = stmts.get(slot.ordinal)?;
    let mut lits = Vec::new();
    for e in own_exprs(stmt) {
        walk_lits(e, &mut lits);
    }
    lits.get(slot.index).map(|l| (*l).clone())
}

/// Replace the addressed literal in place. Fails when the slot does not
/// resolve or the replacement changes the slot's kind.
pub fn set_literal(test: &mut RawTest, slot: &LiteralSlot, value: Lit) -> bool {
    if kind_of(&value) != slot.kind {
        return false;
    }
    let Some(path) = path_of(&test.body, slot.ordinal) else {
        return false;
    };
    let Some((parent, idx)) = locate(&mut test.body, &path.0) else {
        return false;
    };
    let stmt = &mut parent[idx];
    let mut lits = Vec::new();
    match stmt {
        TStmt::Let { init, .. } => walk_lits_mut(init, &mut lits),
        TStmt::Expr(e) => walk_lits_mut(e, &mut lits),
        TStmt::For { from, to, .. } => {
            walk_lits_mut(from, &mut lits);
            walk_lits_mut(to, &mut lits);
        }
        TStmt::If { cond, .. } => walk_lits_mut(cond, &mut lits),
        TStmt::Observe { value, .. } => walk_lits_mut(value, &mut lits),
    }
    match lits.into_iter().nth(slot.index) {
        Some(l) => {
            *l = value;
            true
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUITE: &str = r#"import checks;

test testAddTwice() {
    let c: Counter = new Counter();
    c.add(2);
    for i in 0..3 {
        c.add(i);
        c.add(1);
    }
    if (true) {
        c.add(10);
    } else {
        c.add(20);
    }
    assertEquals(6, c.getCount());
}
"#;

    fn suite() -> TestSuite {
        TestSuite::parse(&[("CounterTest".to_string(), SUITE.to_string())]).unwrap()
    }

    #[test]
    fn parse_then_render_round_trips() {
        let s = suite();
        let rendered = s.render().unwrap();
        let again = TestSuite::parse(&rendered).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn duplicate_test_names_are_rejected() {
        let src = "test a() { f(); }".to_string();
        let err = TestSuite::parse(&[("X".to_string(), src.clone()), ("Y".to_string(), src)]);
        assert!(err.is_err());
    }

    #[test]
    fn ordinals_enumerate_compounds_and_children() {
        let s = suite();
        let (_, test) = s.find("testAddTwice").unwrap();
        let stmts = enumerate(&test.body);
        // let, add, for, add(i), add(1), if, add(10), add(20), assertEquals
        assert_eq!(stmts.len(), 9);
        assert!(matches!(stmts[2].1, TStmt::For { .. }));
        assert_eq!(stmts[3].0, TPath(vec![2, 0]));
        assert_eq!(stmts[4].0, TPath(vec![2, 1]));
        assert!(matches!(stmts[5].1, TStmt::If { .. }));
        // paths hold body-local indices (the if is the 4th top-level stmt);
        // the else branch continues the concatenated index space
        assert_eq!(stmts[6].0, TPath(vec![3, 0]));
        assert_eq!(stmts[7].0, TPath(vec![3, 1]));
    }

    #[test]
    fn remove_and_duplicate_edit_nested_bodies() {
        let s = suite();
        let (_, test) = s.find("testAddTwice").unwrap();
        let mut body = test.body.clone();
        let path = path_of(&body, 4).unwrap();
        assert!(duplicate(&mut body, &path));
        assert_eq!(enumerate(&body).len(), 10);
        assert!(remove(&mut body, &path));
        assert!(remove(&mut body, &path));
        assert_eq!(enumerate(&body).len(), 8);
    }

    #[test]
    fn append_to_for_lands_at_body_end() {
        let s = suite();
        let (_, test) = s.find("testAddTwice").unwrap();
        let mut body = test.body.clone();
        let path = path_of(&body, 2).unwrap();
        let marker = TStmt::Observe {
            point: "p".to_string(),
            value: Expr::Var("i".to_string()),
        };
        assert!(append_to_for(&mut body, &path, marker));
        let stmts = enumerate(&body);
        assert!(matches!(stmts[5].1, TStmt::Observe { .. }));
    }

    #[test]
    fn literal_slots_cover_assertion_arguments() {
        let s = suite();
        let (_, test) = s.find("testAddTwice").unwrap();
        let slots = literal_slots(test);
        // 2, 0, 3, 1, true, 10, 20, 6
        assert_eq!(slots.len(), 8);
        let ints = slots.iter().filter(|s| s.kind == SlotKind::Int).count();
        let bools = slots.iter().filter(|s| s.kind == SlotKind::Bool).count();
        assert_eq!((ints, bools), (7, 1));
        // the assertion literal is addressed at the assertion's ordinal
        let last = slots.last().unwrap();
        assert_eq!(last.ordinal, 8);
        assert_eq!(get_literal(test, last), Some(Lit::Int(6)));
    }

    #[test]
    fn set_literal_edits_exactly_one_slot() {
        let s = suite();
        let (_, test) = s.find("testAddTwice").unwrap();
        let mut edited = test.clone();
        let slots = literal_slots(test);
        assert!(set_literal(&mut edited, &slots[0], Lit::Int(5)));
        assert_eq!(get_literal(&edited, &slots[0]), Some(Lit::Int(5)));
        for (i, slot) in slots.iter().enumerate().skip(1) {
            assert_eq!(
                get_literal(&edited, slot),
                get_literal(test, slot),
                "slot {i} changed"
            );
        }
        // kind mismatch is refused
        assert!(!set_literal(&mut edited, &slots[0], Lit::Str("x".to_string())));
    }

    #[test]
    fn assertion_heuristic_requires_framework_provenance() {
        assert!(is_assertion("assertEquals", true));
        assert!(is_assertion("fail", true));
        assert!(!is_assertion("assertEquals", false));
        assert!(!framework_provided("assertSomething", true));
        assert!(framework_provided("assertTrue", true));
        assert!(!framework_provided("assertTrue", false));
    }

    #[test]
    fn assertion_statements_are_classified_per_file_imports() {
        let s = suite();
        let (file, test) = s.find("testAddTwice").unwrap();
        let imports = checks_imported(file);
        assert!(imports);
        let stmts = enumerate(&test.body);
        let flags: Vec<bool> = stmts
            .iter()
            .map(|(_, st)| is_assertion_stmt(st, imports))
            .collect();
        assert_eq!(flags.iter().filter(|f| **f).count(), 1);
        assert!(flags[8]);
    }
}
