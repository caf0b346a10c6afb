//! Observation-point discovery and test instrumentation.
//!
//! Points come from the public accessor surface of the objects a test
//! manipulates: `get*` methods with a result, `is*` predicates, public
//! fields, custom textual renderings, plus the method calls hoisted out of
//! removed assertions. The catalog is always built from the original
//! program so point identity is shared by every variant. Exception records
//! are harness-level points declared here but never inserted into bodies.

use std::collections::{BTreeMap, BTreeSet};

use minilang::ast::{ClassDecl, Expr, Program, RawTest, TStmt, Type};
use minilang::interp::{ObsValue, Observed};
use minilang::render::{self, float_text};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::test_ir::{self, TestSuite};

// ---------------------------------------------------------------------------
// Point identity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PointSource {
    Getter,
    PublicField,
    DebugRender,
    OriginalAssertionCall,
    ExceptionMessage,
}

/// Identity of one observation point. Stable across program variants:
/// every component is derived from the test suite and the original
/// program's declarations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointId {
    pub test: String,
    /// Pre-order ordinal of the anchor statement in the uninstrumented
    /// body. End-of-test anchors use one past the last ordinal so they can
    /// never collide with a trailing loop's ordinal.
    pub anchor: usize,
    /// Variable the accessor is applied to; empty for free calls and
    /// exception records.
    pub receiver: String,
    pub accessor: String,
    /// Disambiguates structurally identical points at the same anchor.
    pub occurrence: usize,
}

pub const EXCEPTION_ACCESSOR: &str = "!exception";
pub const RENDER_ACCESSOR: &str = "!render";

impl PointId {
    pub fn encode(&self) -> String {
        format!(
            "{}|s{}|{}|{}|{}",
            self.test, self.anchor, self.receiver, self.accessor, self.occurrence
        )
    }

    /// Inverse of `encode`. The accessor may itself contain `|` inside
    /// string literals, so fixed fields are taken from both ends.
    pub fn decode(text: &str) -> Option<PointId> {
        let (test, rest) = text.split_once('|')?;
        let (anchor_field, rest) = rest.split_once('|')?;
        let (receiver, rest) = rest.split_once('|')?;
        let (middle, occ_field) = rest.rsplit_once('|')?;
        let anchor = anchor_field.strip_prefix('s')?.parse().ok()?;
        let occurrence = occ_field.parse().ok()?;
        Some(PointId {
            test: test.to_string(),
            anchor,
            receiver: receiver.to_string(),
            accessor: middle.to_string(),
            occurrence,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationPoint {
    pub id: PointId,
    pub source: PointSource,
}

/// The harness-level point that carries an escaping exception's message.
pub fn exception_point(test_name: &str) -> ObservationPoint {
    ObservationPoint {
        id: PointId {
            test: test_name.to_string(),
            anchor: 0,
            receiver: String::new(),
            accessor: EXCEPTION_ACCESSOR.to_string(),
            occurrence: 0,
        },
        source: PointSource::ExceptionMessage,
    }
}

// ---------------------------------------------------------------------------
// Accessor catalog
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSurface {
    /// No-argument state readers, name order.
    pub getters: Vec<String>,
    /// Public field names, declaration order.
    pub fields: Vec<String>,
    /// Whether the type redefines its textual rendering.
    pub debug_render: bool,
}

/// Public accessor surface per type name, built once from the original
/// program and reused for every variant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessorCatalog {
    pub entries: BTreeMap<String, TypeSurface>,
}

/// `get*` with a result and no arguments, or an `is*` boolean predicate.
pub fn is_state_reader(name: &str, arity: usize, ret: &Type) -> bool {
    if arity != 0 {
        return false;
    }
    (name.starts_with("get") && *ret != Type::Void)
        || (name.starts_with("is") && *ret == Type::Bool)
}

fn surface_of(class: &ClassDecl) -> TypeSurface {
    let mut getters: Vec<String> = class
        .methods
        .iter()
        .filter(|m| m.public && is_state_reader(&m.name, m.params.len(), &m.ret))
        .map(|m| m.name.clone())
        .collect();
    getters.sort();
    let fields = class
        .fields
        .iter()
        .filter(|f| f.public)
        .map(|f| f.name.clone())
        .collect();
    let debug_render = class
        .methods
        .iter()
        .any(|m| m.public && m.name == "toString" && m.params.is_empty() && m.ret == Type::Str);
    TypeSurface {
        getters,
        fields,
        debug_render,
    }
}

impl AccessorCatalog {
    pub fn build(program: &Program) -> AccessorCatalog {
        let mut entries = BTreeMap::new();
        for class in program.classes() {
            entries.insert(class.name.clone(), surface_of(class));
        }
        // the builtin list type: contents render deterministically and
        // emptiness is a predicate, so both are observable
        entries.insert(
            "List".to_string(),
            TypeSurface {
                getters: vec!["isEmpty".to_string()],
                fields: vec![],
                debug_render: true,
            },
        );
        AccessorCatalog { entries }
    }
}

// ---------------------------------------------------------------------------
// Discovery
// ---------------------------------------------------------------------------

fn object_type_name(ty: &Type) -> Option<&str> {
    match ty {
        Type::Class(name) => Some(name),
        Type::List => Some("List"),
        _ => None,
    }
}

/// Ultimate variable at the base of a call/field chain.
fn base_var(e: &Expr) -> Option<&str> {
    match e {
        Expr::Var(name) => Some(name),
        Expr::Call { base, .. } | Expr::Field { base, .. } => base_var(base),
        _ => None,
    }
}

fn subtree_receivers(body: &[TStmt], out: &mut BTreeSet<String>) {
    for stmt in body {
        if let TStmt::Expr(Expr::Call { base, .. }) = stmt {
            if let Some(v) = base_var(base) {
                out.insert(v.to_string());
            }
        }
        match stmt {
            TStmt::For { body: inner, .. } => subtree_receivers(inner, out),
            TStmt::If { then, els, .. } => {
                subtree_receivers(then, out);
                subtree_receivers(els, out);
            }
            _ => {}
        }
    }
}

fn ordinal_of(body: &[TStmt], path: &[usize]) -> Option<usize> {
    test_ir::enumerate(body)
        .iter()
        .position(|(tp, _)| tp.0 == path)
}

/// Sentinel anchor for points logged after the final statement.
pub fn end_anchor(body: &[TStmt]) -> usize {
    test_ir::enumerate(body).len()
}

struct Discovery<'a> {
    catalog: &'a AccessorCatalog,
    /// (receiver, class, anchor ordinal) triples collected so far.
    anchored: Vec<(String, String, usize)>,
}

impl<'a> Discovery<'a> {
    /// Walk one block. `scope` maps visible object variables to their type
    /// names; block-local declarations pop with the block.
    fn walk(
        &mut self,
        root: &[TStmt],
        body: &[TStmt],
        prefix: &[usize],
        offset: usize,
        scope: &mut Vec<(String, String)>,
    ) {
        let depth = scope.len();
        for (i, stmt) in body.iter().enumerate() {
            let mut path = prefix.to_vec();
            path.push(offset + i);
            match stmt {
                TStmt::Let { name, ty, .. } => {
                    if let Some(type_name) = object_type_name(ty) {
                        if self.catalog.entries.contains_key(type_name) {
                            scope.push((name.clone(), type_name.to_string()));
                        }
                    }
                }
                TStmt::For { body: inner, .. } => {
                    let anchor = ordinal_of(root, &path).expect("loop path enumerates");
                    // objects the loop creates or calls methods on, visible
                    // at its body end: enclosing-scope variables plus the
                    // body's own direct declarations
                    let mut receivers = BTreeSet::new();
                    subtree_receivers(inner, &mut receivers);
                    let mut visible: Vec<(String, String)> = scope.clone();
                    for s in inner {
                        if let TStmt::Let { name, ty, .. } = s {
                            if let Some(tn) = object_type_name(ty) {
                                if self.catalog.entries.contains_key(tn) {
                                    visible.push((name.clone(), tn.to_string()));
                                    receivers.insert(name.clone());
                                }
                            }
                        }
                    }
                    for (name, type_name) in &visible {
                        if receivers.contains(name) {
                            self.anchored
                                .push((name.clone(), type_name.clone(), anchor));
                        }
                    }
                    self.walk(root, inner, &path, 0, scope);
                    scope.truncate(depth + count_object_lets(self, &body[..=i]));
                }
                TStmt::If { then, els, .. } => {
                    self.walk(root, then, &path, 0, scope);
                    scope.truncate(depth + count_object_lets(self, &body[..=i]));
                    self.walk(root, els, &path, then.len(), scope);
                    scope.truncate(depth + count_object_lets(self, &body[..=i]));
                }
                _ => {}
            }
        }

        fn count_object_lets(d: &Discovery, stmts: &[TStmt]) -> usize {
            stmts
                .iter()
                .filter(|s| {
                    matches!(s, TStmt::Let { ty, .. }
                        if object_type_name(ty)
                            .is_some_and(|tn| d.catalog.entries.contains_key(tn)))
                })
                .count()
        }
    }
}

/// All observation points of one test: accessor-surface points for object
/// locals (anchored at end of test, and at loop-body end for loop-resident
/// objects), one point per hoisted assertion call, and the harness-level
/// exception point.
pub fn discover_points(
    test: &RawTest,
    hoisted_ordinals: &[usize],
    catalog: &AccessorCatalog,
) -> Vec<ObservationPoint> {
    let mut points = Vec::new();
    let mut seen: BTreeMap<(usize, String, String), usize> = BTreeMap::new();
    let mut occurrence = |anchor: usize, receiver: &str, accessor: &str| -> usize {
        let key = (anchor, receiver.to_string(), accessor.to_string());
        let n = seen.entry(key).or_insert(0);
        let occ = *n;
        *n += 1;
        occ
    };

    // end-of-test anchor: accessor surface of every top-level object local
    let end_anchor = end_anchor(&test.body);
    for stmt in &test.body {
        let TStmt::Let { name, ty, .. } = stmt else {
            continue;
        };
        let Some(type_name) = object_type_name(ty) else {
            continue;
        };
        let Some(surface) = catalog.entries.get(type_name) else {
            continue;
        };
        push_surface_points(
            test,
            name,
            surface,
            end_anchor,
            &mut points,
            &mut occurrence,
        );
    }

    // loop anchors
    let mut discovery = Discovery {
        catalog,
        anchored: Vec::new(),
    };
    let mut scope = Vec::new();
    discovery.walk(&test.body, &test.body, &[], 0, &mut scope);
    let anchored = discovery.anchored;
    for (receiver, type_name, anchor) in anchored {
        let surface = catalog.entries.get(&type_name).expect("catalog entry");
        push_surface_points(test, &receiver, surface, anchor, &mut points, &mut occurrence);
    }

    // hoisted assertion calls observe in place
    for &ordinal in hoisted_ordinals {
        let Some(stmt) = test_ir::stmt_at(&test.body, ordinal) else {
            continue;
        };
        let TStmt::Expr(expr) = stmt else { continue };
        let receiver = base_var(&expr).unwrap_or("").to_string();
        let accessor = match render::expr(&expr) {
            Ok(text) => text,
            Err(_) => continue,
        };
        let occ = occurrence(ordinal, &receiver, &accessor);
        points.push(ObservationPoint {
            id: PointId {
                test: test.name.clone(),
                anchor: ordinal,
                receiver,
                accessor,
                occurrence: occ,
            },
            source: PointSource::OriginalAssertionCall,
        });
    }

    points.push(exception_point(&test.name));
    points
}

fn push_surface_points(
    test: &RawTest,
    receiver: &str,
    surface: &TypeSurface,
    anchor: usize,
    points: &mut Vec<ObservationPoint>,
    occurrence: &mut impl FnMut(usize, &str, &str) -> usize,
) {
    let mut add = |accessor: String, source: PointSource, points: &mut Vec<ObservationPoint>| {
        let occ = occurrence(anchor, receiver, &accessor);
        points.push(ObservationPoint {
            id: PointId {
                test: test.name.clone(),
                anchor,
                receiver: receiver.to_string(),
                accessor,
                occurrence: occ,
            },
            source,
        });
    };
    for g in &surface.getters {
        add(format!("{g}()"), PointSource::Getter, points);
    }
    for f in &surface.fields {
        add(f.clone(), PointSource::PublicField, points);
    }
    if surface.debug_render {
        add(RENDER_ACCESSOR.to_string(), PointSource::DebugRender, points);
    }
}

// ---------------------------------------------------------------------------
// Instrumentation
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstrumentError {
    #[error("point {point} anchors at statement {anchor}, which is neither a loop nor the final statement")]
    AnchorInvalid { point: String, anchor: usize },
    #[error("receiver {receiver} is not visible at the anchor of point {point}")]
    AccessorNotVisible { receiver: String, point: String },
    #[error("point {point} expects a hoisted call at its anchor")]
    NotACall { point: String },
}

fn contains_observe(body: &[TStmt]) -> bool {
    body.iter().any(|s| match s {
        TStmt::Observe { .. } => true,
        TStmt::For { body: inner, .. } => contains_observe(inner),
        TStmt::If { then, els, .. } => contains_observe(then) || contains_observe(els),
        _ => false,
    })
}

fn top_level_lets(body: &[TStmt]) -> BTreeSet<String> {
    body.iter()
        .filter_map(|s| match s {
            TStmt::Let { name, .. } => Some(name.clone()),
            _ => None,
        })
        .collect()
}

fn observe_expr(point: &ObservationPoint) -> Expr {
    let receiver = Expr::Var(point.id.receiver.clone());
    match point.source {
        PointSource::Getter => Expr::Call {
            base: Box::new(receiver),
            name: point
                .id
                .accessor
                .strip_suffix("()")
                .unwrap_or(&point.id.accessor)
                .to_string(),
            args: vec![],
        },
        PointSource::PublicField => Expr::Field {
            base: Box::new(receiver),
            name: point.id.accessor.clone(),
        },
        PointSource::DebugRender => receiver,
        PointSource::OriginalAssertionCall | PointSource::ExceptionMessage => {
            unreachable!("handled separately")
        }
    }
}

/// Insert logging statements for the given points. Idempotent: a body that
/// already observes is returned unchanged. Exception points are the
/// harness's job and are skipped here.
pub fn instrument(test: &RawTest, points: &[ObservationPoint]) -> Result<RawTest, InstrumentError> {
    if contains_observe(&test.body) {
        return Ok(test.clone());
    }
    let mut out = test.clone();
    let locals = top_level_lets(&test.body);
    let end = end_anchor(&test.body);

    // deterministic logging order at each shared anchor
    let mut surface: Vec<&ObservationPoint> = points
        .iter()
        .filter(|p| {
            matches!(
                p.source,
                PointSource::Getter | PointSource::PublicField | PointSource::DebugRender
            )
        })
        .collect();
    surface.sort_by(|a, b| {
        (a.id.anchor, &a.id.accessor, &a.id.receiver, a.id.occurrence).cmp(&(
            b.id.anchor,
            &b.id.accessor,
            &b.id.receiver,
            b.id.occurrence,
        ))
    });

    for point in &surface {
        let observe = TStmt::Observe {
            point: point.id.encode(),
            value: observe_expr(point),
        };
        if point.id.anchor == end {
            if !locals.contains(&point.id.receiver) {
                return Err(InstrumentError::AccessorNotVisible {
                    receiver: point.id.receiver.clone(),
                    point: point.id.encode(),
                });
            }
            out.body.push(observe);
            continue;
        }
        let path = test_ir::path_of(&test.body, point.id.anchor).ok_or_else(|| {
            InstrumentError::AnchorInvalid {
                point: point.id.encode(),
                anchor: point.id.anchor,
            }
        })?;
        let anchor_stmt = test_ir::stmt_at(&test.body, point.id.anchor);
        let Some(TStmt::For { body: loop_body, .. }) = anchor_stmt else {
            return Err(InstrumentError::AnchorInvalid {
                point: point.id.encode(),
                anchor: point.id.anchor,
            });
        };
        let loop_locals = top_level_lets(&loop_body);
        if !locals.contains(&point.id.receiver) && !loop_locals.contains(&point.id.receiver) {
            return Err(InstrumentError::AccessorNotVisible {
                receiver: point.id.receiver.clone(),
                point: point.id.encode(),
            });
        }
        assert!(test_ir::append_to_for(&mut out.body, &path, observe));
    }

    // hoisted assertion calls get wrapped where they stand
    for point in points {
        if point.source != PointSource::OriginalAssertionCall {
            continue;
        }
        let Some(TStmt::Expr(expr)) = test_ir::stmt_at(&test.body, point.id.anchor) else {
            return Err(InstrumentError::NotACall {
                point: point.id.encode(),
            });
        };
        let expr = expr.clone();
        // paths come from the original body: appends above only extend
        // bodies at their ends, so pre-existing paths still resolve
        let path = test_ir::path_of(&test.body, point.id.anchor).expect("anchor path");
        assert!(test_ir::replace(
            &mut out.body,
            &path,
            TStmt::Observe {
                point: point.id.encode(),
                value: expr,
            },
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Whole-suite instrumentation
// ---------------------------------------------------------------------------

/// Observation points per test, exception points included.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCatalog {
    pub per_test: BTreeMap<String, Vec<ObservationPoint>>,
}

impl PointCatalog {
    pub fn points_declared(&self) -> usize {
        self.per_test.values().map(Vec::len).sum()
    }

    pub fn find(&self, id: &PointId) -> Option<&ObservationPoint> {
        self.per_test.get(&id.test)?.iter().find(|p| p.id == *id)
    }
}

/// Discover and instrument every entry test. Helper tests (those taking
/// parameters) pass through untouched: their records would not have a run
/// of their own to land in.
pub fn instrument_suite(
    suite: &TestSuite,
    hoisted: &BTreeMap<String, Vec<usize>>,
    catalog: &AccessorCatalog,
) -> Result<(TestSuite, PointCatalog), InstrumentError> {
    let mut files = Vec::with_capacity(suite.files.len());
    let mut per_test = BTreeMap::new();
    for file in &suite.files {
        let mut tests = Vec::with_capacity(file.tests.len());
        for test in &file.tests {
            if !test.params.is_empty() {
                tests.push(test.clone());
                continue;
            }
            let empty = Vec::new();
            let ordinals = hoisted.get(&test.name).unwrap_or(&empty);
            let points = discover_points(test, ordinals, catalog);
            tests.push(instrument(test, &points)?);
            per_test.insert(test.name.clone(), points);
        }
        files.push(minilang::ast::TestFile {
            name: file.name.clone(),
            imports: file.imports.clone(),
            tests,
        });
    }
    Ok((TestSuite { files }, PointCatalog { per_test }))
}

// ---------------------------------------------------------------------------
// Value rendering
// ---------------------------------------------------------------------------

const ABSENT: &str = "∅";

/// Replace memory-address/hash-like hexadecimal tokens: `@hex` suffixes and
/// standalone 8..=16 character hex runs both become `@ID`.
pub fn scrub_hex(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let is_hex = |c: char| c.is_ascii_digit() || ('a'..='f').contains(&c);
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '@' {
            let mut j = i + 1;
            while j < chars.len() && is_hex(chars[j]) {
                j += 1;
            }
            if j > i + 1 {
                out.push_str("@ID");
                i = j;
                continue;
            }
        }
        if is_hex(c) {
            let bounded_left = i == 0 || !chars[i - 1].is_ascii_alphanumeric();
            let mut j = i;
            while j < chars.len() && is_hex(chars[j]) {
                j += 1;
            }
            let bounded_right = j == chars.len() || !chars[j].is_ascii_alphanumeric();
            if bounded_left && bounded_right && (8..=16).contains(&(j - i)) {
                out.push_str("@ID");
                i = j;
                continue;
            }
            out.extend(&chars[i..j]);
            i = j;
            continue;
        }
        out.push(c);
        i += 1;
    }
    out
}

/// Escape control characters so records stay one line of tab-separated
/// fields.
pub fn escape_controls(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\x{:02x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

/// Canonical record value. Deterministic for equal inputs; NaN renders as
/// "NaN" so it compares equal to itself across runs.
pub fn render_value(observed: &Observed) -> String {
    match observed {
        Observed::Thrown(message) => format!("thrown:{}", escape_controls(&scrub_hex(message))),
        Observed::Value(v) => match v {
            ObsValue::Int(i) => i.to_string(),
            ObsValue::Float(f) => float_text(*f),
            ObsValue::Bool(b) => b.to_string(),
            ObsValue::Null | ObsValue::Void => ABSENT.to_string(),
            ObsValue::Str(s) => escape_controls(s),
            ObsValue::ObjText(s) | ObsValue::ListText(s) => escape_controls(&scrub_hex(s)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use minilang::parser;

    const PROGRAM: &str = r#"class Counter {
    pub count: int = 0;
    hidden: int = 1;

    pub fn getCount(): int {
        return this.count;
    }

    pub fn isEmpty(): bool {
        return this.count == 0;
    }

    pub fn getWith(extra: int): int {
        return this.count + extra;
    }

    fn getSecret(): int {
        return this.hidden;
    }

    pub fn add(n: int): void {
        this.count = this.count + n;
    }

    pub fn toString(): string {
        return "Counter(" + this.count + ")";
    }
}

class Plain {
    pub fn getNothing(): void {
        return;
    }

    pub fn isOdd(): int {
        return 1;
    }
}
"#;

    fn catalog() -> AccessorCatalog {
        let file = parser::parse_program_file("counter", PROGRAM).unwrap();
        AccessorCatalog::build(&Program { files: vec![file] })
    }

    fn parse_test(src: &str) -> TestSuite {
        TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap()
    }

    #[test]
    fn catalog_keeps_state_readers_and_public_surface_only() {
        let cat = catalog();
        let counter = &cat.entries["Counter"];
        assert_eq!(counter.getters, vec!["getCount", "isEmpty"]);
        assert_eq!(counter.fields, vec!["count"]);
        assert!(counter.debug_render);
        let plain = &cat.entries["Plain"];
        assert!(plain.getters.is_empty(), "void get and int is are out");
        assert!(!plain.debug_render);
        assert!(cat.entries["List"].debug_render);
    }

    #[test]
    fn accessor_predicate_table() {
        assert!(is_state_reader("getX", 0, &Type::Int));
        assert!(!is_state_reader("getX", 1, &Type::Int));
        assert!(!is_state_reader("getX", 0, &Type::Void));
        assert!(is_state_reader("isY", 0, &Type::Bool));
        assert!(!is_state_reader("isY", 0, &Type::Int));
        assert!(!is_state_reader("size", 0, &Type::Int));
    }

    #[test]
    fn discovery_covers_the_accessor_surface_of_locals() {
        let suite = parse_test(
            "test t() { let c: Counter = new Counter(); c.add(2); }",
        );
        let (_, test) = suite.find("t").unwrap();
        let points = discover_points(test, &[], &catalog());
        // getCount, isEmpty, count, !render, plus the exception point
        assert_eq!(points.len(), 5);
        let accessors: Vec<&str> = points.iter().map(|p| p.id.accessor.as_str()).collect();
        assert!(accessors.contains(&"getCount()"));
        assert!(accessors.contains(&"isEmpty()"));
        assert!(accessors.contains(&"count"));
        assert!(accessors.contains(&RENDER_ACCESSOR));
        assert!(accessors.contains(&EXCEPTION_ACCESSOR));
        // anchored one past the final statement
        assert!(points
            .iter()
            .filter(|p| p.source != PointSource::ExceptionMessage)
            .all(|p| p.id.anchor == 2));
    }

    #[test]
    fn discovery_without_objects_or_assertions_yields_only_the_exception_point() {
        let suite = parse_test("test t() { let x: int = 1; f(x); }");
        let (_, test) = suite.find("t").unwrap();
        let points = discover_points(test, &[], &catalog());
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].source, PointSource::ExceptionMessage);
    }

    #[test]
    fn loop_mutated_objects_anchor_at_the_loop_too() {
        let suite = parse_test(
            "test t() { let c: Counter = new Counter(); for i in 0..3 { c.add(i); } }",
        );
        let (_, test) = suite.find("t").unwrap();
        let points = discover_points(test, &[], &catalog());
        // body ordinals: let=0, for=1, add=2; end sentinel = 3
        let loop_points: Vec<_> = points.iter().filter(|p| p.id.anchor == 1).collect();
        let end_points: Vec<_> = points.iter().filter(|p| p.id.anchor == 3).collect();
        assert_eq!(loop_points.len(), 4, "surface re-observed per iteration");
        assert_eq!(end_points.len(), 4, "and once more after the loop");
        let ids: BTreeSet<String> = points.iter().map(|p| p.id.encode()).collect();
        assert_eq!(ids.len(), points.len(), "ids are unique");
        let instrumented = instrument(test, &points).unwrap();
        let rendered = minilang::render::render_test(&instrumented).unwrap();
        let in_loop = rendered
            .lines()
            .filter(|l| l.starts_with("        observe("))
            .count();
        assert_eq!(in_loop, 4, "loop points land inside the loop body");
    }

    #[test]
    fn loop_local_objects_are_observed_inside_the_loop_only() {
        let suite = parse_test(
            "test t() { let n: int = 2; for i in 0..3 { let c: Counter = new Counter(); c.add(i); } f(n); }",
        );
        let (_, test) = suite.find("t").unwrap();
        let points = discover_points(test, &[], &catalog());
        let c_points: Vec<_> = points.iter().filter(|p| p.id.receiver == "c").collect();
        assert_eq!(c_points.len(), 4);
        assert!(c_points.iter().all(|p| p.id.anchor == 1));
    }

    #[test]
    fn hoisted_calls_become_original_assertion_points() {
        let suite = parse_test(
            "test t() { let c: Counter = new Counter(); c.getCount(); helper(1); }",
        );
        let (_, test) = suite.find("t").unwrap();
        let points = discover_points(test, &[1, 2], &catalog());
        let hoisted: Vec<_> = points
            .iter()
            .filter(|p| p.source == PointSource::OriginalAssertionCall)
            .collect();
        assert_eq!(hoisted.len(), 2);
        assert_eq!(hoisted[0].id.accessor, "c.getCount()");
        assert_eq!(hoisted[0].id.receiver, "c");
        assert_eq!(hoisted[1].id.accessor, "helper(1)");
        assert_eq!(hoisted[1].id.receiver, "");
    }

    #[test]
    fn point_ids_survive_encode_decode() {
        let id = PointId {
            test: "t".to_string(),
            anchor: 3,
            receiver: "m".to_string(),
            accessor: "m.split(\"|\")".to_string(),
            occurrence: 1,
        };
        assert_eq!(PointId::decode(&id.encode()), Some(id));
        assert_eq!(PointId::decode("junk"), None);
    }

    #[test]
    fn instrumentation_appends_sorted_logging_calls() {
        let suite = parse_test(
            "test t() { let c: Counter = new Counter(); c.add(2); }",
        );
        let (_, test) = suite.find("t").unwrap();
        let points = discover_points(test, &[], &catalog());
        let instrumented = instrument(test, &points).unwrap();
        let rendered = minilang::render::render_test(&instrumented).unwrap();
        let lines: Vec<&str> = rendered
            .lines()
            .filter(|l| l.trim_start().starts_with("observe("))
            .collect();
        assert_eq!(lines.len(), 4);
        // sorted by accessor path: !render, count, getCount(), isEmpty()
        assert!(lines[0].contains("!render"));
        assert!(lines[1].contains("|count|"));
        assert!(lines[2].contains("getCount()"));
        assert!(lines[3].contains("isEmpty()"));
    }

    #[test]
    fn instrumentation_is_idempotent() {
        let suite = parse_test(
            "test t() { let c: Counter = new Counter(); c.add(2); }",
        );
        let (_, test) = suite.find("t").unwrap();
        let points = discover_points(test, &[], &catalog());
        let once = instrument(test, &points).unwrap();
        let twice = instrument(&once, &points).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn instrumentation_wraps_hoisted_calls_in_place() {
        let suite = parse_test(
            "test t() { let c: Counter = new Counter(); c.getCount(); }",
        );
        let (_, test) = suite.find("t").unwrap();
        let points = discover_points(test, &[1], &catalog());
        let instrumented = instrument(test, &points).unwrap();
        let rendered = minilang::render::render_test(&instrumented).unwrap();
        assert!(rendered.contains("observe(\"t|s1|c|c.getCount()|0\", c.getCount());"));
        // the bare statement was replaced, not kept alongside
        assert!(!rendered.contains("\n    c.getCount();"));
    }

    #[test]
    fn invisible_receivers_are_instrumentation_errors() {
        let suite = parse_test("test t() { let c: Counter = new Counter(); c.add(1); }");
        let (_, test) = suite.find("t").unwrap();
        let rogue = ObservationPoint {
            id: PointId {
                test: "t".to_string(),
                anchor: 2,
                receiver: "ghost".to_string(),
                accessor: "getCount()".to_string(),
                occurrence: 0,
            },
            source: PointSource::Getter,
        };
        let err = instrument(test, &[rogue]).unwrap_err();
        assert!(matches!(err, InstrumentError::AccessorNotVisible { .. }));
        // a non-loop interior statement cannot anchor surface points
        let misplaced = ObservationPoint {
            id: PointId {
                test: "t".to_string(),
                anchor: 1,
                receiver: "c".to_string(),
                accessor: "getCount()".to_string(),
                occurrence: 0,
            },
            source: PointSource::Getter,
        };
        let err = instrument(test, &[misplaced]).unwrap_err();
        assert!(matches!(err, InstrumentError::AnchorInvalid { .. }));
    }

    #[test]
    fn point_identity_is_test_side_only() {
        // same suite instrumented twice yields byte-identical tests,
        // regardless of which variant will execute them
        let suite = parse_test(
            "test t() { let c: Counter = new Counter(); c.add(2); c.getCount(); }",
        );
        let hoisted = BTreeMap::from([("t".to_string(), vec![2])]);
        let (a, cat_a) = instrument_suite(&suite, &hoisted, &catalog()).unwrap();
        let (b, cat_b) = instrument_suite(&suite, &hoisted, &catalog()).unwrap();
        assert_eq!(a.render().unwrap(), b.render().unwrap());
        assert_eq!(cat_a, cat_b);
        assert_eq!(cat_a.points_declared(), 6);
    }

    #[test]
    fn rendered_values_are_canonical() {
        assert_eq!(render_value(&Observed::Value(ObsValue::Int(-3))), "-3");
        assert_eq!(render_value(&Observed::Value(ObsValue::Float(3.5))), "3.5");
        assert_eq!(render_value(&Observed::Value(ObsValue::Float(2.0))), "2.0");
        assert_eq!(
            render_value(&Observed::Value(ObsValue::Float(f64::NAN))),
            "NaN"
        );
        assert_eq!(render_value(&Observed::Value(ObsValue::Null)), "∅");
        assert_eq!(render_value(&Observed::Value(ObsValue::Void)), "∅");
        assert_eq!(
            render_value(&Observed::Value(ObsValue::Str("a\tb\nc".to_string()))),
            "a\\tb\\nc"
        );
        assert_eq!(
            render_value(&Observed::Value(ObsValue::ObjText("Obj@1a2b3c4d".to_string()))),
            "Obj@ID"
        );
        assert_eq!(
            render_value(&Observed::Thrown("index 9 out of bounds".to_string())),
            "thrown:index 9 out of bounds"
        );
    }

    #[test]
    fn hex_scrubbing_hits_address_shapes_only() {
        assert_eq!(scrub_hex("Counter@af03"), "Counter@ID");
        assert_eq!(scrub_hex("deadbeef1234"), "@ID");
        assert_eq!(scrub_hex("cafe"), "cafe", "short runs stay");
        assert_eq!(
            scrub_hex("0123456789abcdef0"),
            "0123456789abcdef0",
            "17 chars is past the window"
        );
        assert_eq!(scrub_hex("value: 3"), "value: 3");
        assert_eq!(
            scrub_hex("xdeadbeef"),
            "xdeadbeef",
            "embedded runs are not standalone"
        );
        assert_eq!(scrub_hex("[C@10ffa3, C@10ffb4]"), "[C@ID, C@ID]");
    }
}
