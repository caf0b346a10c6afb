//! Variant forging: single-statement Add, Delete, and Replace transplants
//! drawn from the program's own AST, validated against the original suite,
//! and ground-truth labeled by a brute-force differential probe over a
//! finite input grid.
//!
//! A forged variant is kept only when the edited statement is covered by at
//! least one original test and the complete original suite still passes on
//! the patched program.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use minilang::ast::{
    enumerate_stmts, insert_after, remove_stmt, replace_stmt, Expr, LValue, MethodDecl, PStmt,
    Program, RawTest, StmtAddr, TStmt, TestFile, Type,
};
use minilang::interp::RunLimits;
use minilang::parser::parse_program_file;
use minilang::render;

use crate::divergence::{compare, Mode, Verdict};
use crate::executor::{
    measure_coverage, parallel_map, run_checked, run_suite, RunSpec,
};
use crate::flake_filter::{value_sequences, DiscardEvidence, StablePointSet};
use crate::observer::{AccessorCatalog, PointId};
use crate::test_ir::TestSuite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransplantKind {
    Add,
    Delete,
    Replace,
}

impl TransplantKind {
    pub fn label(self) -> &'static str {
        match self {
            TransplantKind::Add => "add",
            TransplantKind::Delete => "delete",
            TransplantKind::Replace => "replace",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForgeError {
    #[error("original suite is red on the unpatched program: {test}: {failure}")]
    SuiteRed { test: String, failure: String },
    #[error("unknown statement id '{0}'")]
    UnknownStatement(String),
}

// ---------------------------------------------------------------------------
// Statement identity
// ---------------------------------------------------------------------------

/// Statement id `<file>#<n>` where `n` is the statement's pre-order
/// enumeration position within its file.
pub fn stmt_id(file: &str, local: usize) -> String {
    format!("{file}#{local}")
}

fn parse_stmt_id(id: &str) -> Option<(&str, usize)> {
    let (file, local) = id.rsplit_once('#')?;
    Some((file, local.parse().ok()?))
}

/// (file index, address, statement) for a statement id.
fn resolve<'a>(program: &'a Program, id: &str) -> Option<(usize, StmtAddr, &'a PStmt)> {
    let (file_name, local) = parse_stmt_id(id)?;
    let (fi, file) = program
        .files
        .iter()
        .enumerate()
        .find(|(_, f)| f.name == file_name)?;
    let entries = enumerate_stmts(file);
    let (addr, stmt) = entries.into_iter().nth(local)?;
    Some((fi, addr, stmt))
}

/// Per-file offsets turning (file, local id) into the global coverage probe
/// id space.
fn file_offsets(program: &Program) -> BTreeMap<String, u32> {
    let mut offsets = BTreeMap::new();
    let mut next = 0u32;
    for file in &program.files {
        offsets.insert(file.name.clone(), next);
        next += enumerate_stmts(file).len() as u32;
    }
    offsets
}

// ---------------------------------------------------------------------------
// Scope and free-variable analysis
// ---------------------------------------------------------------------------

/// Names visible to a statement before it runs: method parameters, loop
/// variables of enclosing `for` statements, and `let` declarations earlier
/// in each enclosing body. Compound path elements index the concatenation
/// of sub-bodies, matching statement addressing.
fn scope_walk(body: &[PStmt], path: &[usize], scope: &mut BTreeMap<String, Type>) -> bool {
    match path {
        [] => false,
        [idx] => {
            if *idx >= body.len() {
                return false;
            }
            for stmt in &body[..*idx] {
                if let PStmt::Let { name, ty, .. } = stmt {
                    scope.insert(name.clone(), ty.clone());
                }
            }
            true
        }
        [head, next, rest @ ..] => {
            if *head >= body.len() {
                return false;
            }
            for stmt in &body[..*head] {
                if let PStmt::Let { name, ty, .. } = stmt {
                    scope.insert(name.clone(), ty.clone());
                }
            }
            let stmt = &body[*head];
            if let PStmt::For { var, .. } = stmt {
                scope.insert(var.clone(), Type::Int);
            }
            let mut idx = *next;
            for sub in stmt.children() {
                if idx < sub.len() {
                    let mut inner = Vec::with_capacity(rest.len() + 1);
                    inner.push(idx);
                    inner.extend_from_slice(rest);
                    return scope_walk(sub, &inner, scope);
                }
                idx -= sub.len();
            }
            false
        }
    }
}

fn scope_at(method: &MethodDecl, path: &[usize]) -> Option<BTreeMap<String, Type>> {
    let mut scope: BTreeMap<String, Type> = method
        .params
        .iter()
        .map(|p| (p.name.clone(), p.ty.clone()))
        .collect();
    if scope_walk(&method.body, path, &mut scope) {
        Some(scope)
    } else {
        None
    }
}

fn expr_vars(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(name) => {
            out.insert(name.clone());
        }
        Expr::Field { base, .. } => expr_vars(base, out),
        Expr::Call { base, args, .. } => {
            expr_vars(base, out);
            for a in args {
                expr_vars(a, out);
            }
        }
        Expr::Free { args, .. } | Expr::New { args, .. } => {
            for a in args {
                expr_vars(a, out);
            }
        }
        Expr::Unary { expr, .. } => expr_vars(expr, out),
        Expr::Binary { lhs, rhs, .. } => {
            expr_vars(lhs, out);
            expr_vars(rhs, out);
        }
        Expr::Lit(_) | Expr::This => {}
    }
}

fn expr_uses_this(e: &Expr) -> bool {
    match e {
        Expr::This => true,
        Expr::Var(_) | Expr::Lit(_) => false,
        Expr::Field { base, .. } => expr_uses_this(base),
        Expr::Call { base, args, .. } => expr_uses_this(base) || args.iter().any(expr_uses_this),
        Expr::Free { args, .. } | Expr::New { args, .. } => args.iter().any(expr_uses_this),
        Expr::Unary { expr, .. } => expr_uses_this(expr),
        Expr::Binary { lhs, rhs, .. } => expr_uses_this(lhs) || expr_uses_this(rhs),
    }
}

/// Free variables and `this` usage of a transplantable statement. Only
/// assignments and expression statements qualify: they neither declare
/// names nor alter control flow, so binding stays a pure renaming.
fn transplant_reads(stmt: &PStmt) -> Option<(BTreeSet<String>, bool)> {
    match stmt {
        PStmt::Assign { target, value } => {
            let mut vars = BTreeSet::new();
            let mut uses_this = expr_uses_this(value);
            expr_vars(value, &mut vars);
            match target {
                LValue::Var(name) => {
                    vars.insert(name.clone());
                }
                LValue::ThisField(_) => uses_this = true,
            }
            Some((vars, uses_this))
        }
        PStmt::Expr(e) => {
            let mut vars = BTreeSet::new();
            expr_vars(e, &mut vars);
            Some((vars, expr_uses_this(e)))
        }
        _ => None,
    }
}

fn rebind_expr(e: &Expr, map: &BTreeMap<String, String>) -> Expr {
    match e {
        Expr::Var(name) => Expr::Var(map.get(name).cloned().unwrap_or_else(|| name.clone())),
        Expr::Field { base, name } => Expr::Field {
            base: Box::new(rebind_expr(base, map)),
            name: name.clone(),
        },
        Expr::Call { base, name, args } => Expr::Call {
            base: Box::new(rebind_expr(base, map)),
            name: name.clone(),
            args: args.iter().map(|a| rebind_expr(a, map)).collect(),
        },
        Expr::Free { name, args } => Expr::Free {
            name: name.clone(),
            args: args.iter().map(|a| rebind_expr(a, map)).collect(),
        },
        Expr::New { class, args } => Expr::New {
            class: class.clone(),
            args: args.iter().map(|a| rebind_expr(a, map)).collect(),
        },
        Expr::Unary { op, expr } => Expr::Unary {
            op: *op,
            expr: Box::new(rebind_expr(expr, map)),
        },
        Expr::Binary { op, lhs, rhs } => Expr::Binary {
            op: *op,
            lhs: Box::new(rebind_expr(lhs, map)),
            rhs: Box::new(rebind_expr(rhs, map)),
        },
        Expr::Lit(_) | Expr::This => e.clone(),
    }
}

fn apply_bindings(stmt: &PStmt, map: &BTreeMap<String, String>) -> PStmt {
    match stmt {
        PStmt::Assign { target, value } => PStmt::Assign {
            target: match target {
                LValue::Var(name) => {
                    LValue::Var(map.get(name).cloned().unwrap_or_else(|| name.clone()))
                }
                LValue::ThisField(f) => LValue::ThisField(f.clone()),
            },
            value: rebind_expr(value, map),
        },
        PStmt::Expr(e) => PStmt::Expr(rebind_expr(e, map)),
        other => other.clone(),
    }
}

// ---------------------------------------------------------------------------
// Transplant enumeration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransplantCandidate {
    /// Statement id of the donor statement.
    pub transplant: String,
    /// Donor variable name -> in-scope name at the transplantation point.
    pub bindings: BTreeMap<String, String>,
    /// The bound donor equals the statement at the point; replacing with it
    /// yields an equivalent variant.
    pub identity: bool,
}

/// All donor statements whose free variables can be bound to
/// type-compatible names in scope at `point`. Deterministic: one binding
/// per donor, preferring the donor's own name, then the alphabetically
/// first compatible name. Donors reading `this` stay within the point's
/// class.
pub fn enumerate_transplants(
    program: &Program,
    point: &str,
) -> Result<Vec<TransplantCandidate>, ForgeError> {
    let (pfi, paddr, pstmt) =
        resolve(program, point).ok_or_else(|| ForgeError::UnknownStatement(point.to_string()))?;
    let pfile = &program.files[pfi];
    let pclass = &pfile.classes[paddr.class];
    let pmethod = &pclass.methods[paddr.method];
    let Some(point_scope) = scope_at(pmethod, &paddr.path.0) else {
        return Err(ForgeError::UnknownStatement(point.to_string()));
    };
    let mut out = Vec::new();
    for file in &program.files {
        for (local, (addr, stmt)) in enumerate_stmts(file).into_iter().enumerate() {
            let Some((vars, uses_this)) = transplant_reads(stmt) else {
                continue;
            };
            let donor_class = &file.classes[addr.class];
            if uses_this && donor_class.name != pclass.name {
                continue;
            }
            let donor_method = &donor_class.methods[addr.method];
            let Some(donor_scope) = scope_at(donor_method, &addr.path.0) else {
                continue;
            };
            let mut bindings = BTreeMap::new();
            let mut ok = true;
            for var in &vars {
                let Some(ty) = donor_scope.get(var) else {
                    ok = false;
                    break;
                };
                let bound = if point_scope.get(var) == Some(ty) {
                    Some(var.clone())
                } else {
                    point_scope
                        .iter()
                        .find(|(_, t)| *t == ty)
                        .map(|(n, _)| n.clone())
                };
                match bound {
                    Some(name) => {
                        bindings.insert(var.clone(), name);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let identity = apply_bindings(stmt, &bindings) == *pstmt;
            out.push(TransplantCandidate {
                transplant: stmt_id(&file.name, local),
                bindings,
                identity,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantDescriptor {
    pub id: String,
    pub kind: TransplantKind,
    pub transplantation_point: String,
    /// Donor statement id; absent for DELETE.
    pub transplant: Option<String>,
    pub bindings: BTreeMap<String, String>,
    /// REPLACE by an identical statement: the variant is equivalent by
    /// construction.
    pub identity: bool,
    /// File name -> rendered variant source.
    pub patched_source: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SosieCheck {
    /// The transplantation point is executed by at least one original test.
    pub covered: bool,
    /// The complete original suite passes on the patched program.
    pub passes: bool,
    pub is_sosie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgedVariant {
    pub descriptor: VariantDescriptor,
    pub check: SosieCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgeOutcome {
    /// Variants that passed both sosie conditions, in sampled order.
    pub accepted: Vec<ForgedVariant>,
    pub sampled: usize,
    pub rejected_uncovered: usize,
    pub rejected_failing: usize,
    pub rejected_build: usize,
}

#[derive(Clone)]
struct Candidate {
    kind: TransplantKind,
    point: String,
    point_file: usize,
    point_local: usize,
    transplant: Option<TransplantCandidate>,
}

fn all_stmt_ids(program: &Program) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    for (fi, file) in program.files.iter().enumerate() {
        for local in 0..enumerate_stmts(file).len() {
            out.push((fi, local, stmt_id(&file.name, local)));
        }
    }
    out
}

fn fisher_yates<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let bound = (i + 1) as u64;
        let limit = u64::MAX - u64::MAX % bound;
        let mut draw = rng.next_u64();
        while draw >= limit {
            draw = rng.next_u64();
        }
        items.swap(i, (draw % bound) as usize);
    }
}

/// Apply one candidate edit to a copy of the program. `None` when the edit
/// cannot be applied or the patched source fails to re-parse.
fn patch(program: &Program, cand: &Candidate) -> Option<(Program, BTreeMap<String, String>)> {
    let mut patched = program.clone();
    let (_, paddr, _) = resolve(program, &cand.point)?;
    let edit_ok = match (&cand.kind, &cand.transplant) {
        (TransplantKind::Delete, None) => {
            remove_stmt(&mut patched.files[cand.point_file], &paddr)
        }
        (TransplantKind::Add, Some(tc)) | (TransplantKind::Replace, Some(tc)) => {
            let (_, _, donor) = resolve(program, &tc.transplant)?;
            let bound = apply_bindings(donor, &tc.bindings);
            if cand.kind == TransplantKind::Add {
                insert_after(&mut patched.files[cand.point_file], &paddr, bound)
            } else {
                replace_stmt(&mut patched.files[cand.point_file], &paddr, bound)
            }
        }
        _ => false,
    };
    if !edit_ok {
        return None;
    }
    let mut sources = BTreeMap::new();
    for file in &patched.files {
        let text = render::program_file(file).ok()?;
        parse_program_file(&file.name, &text).ok()?;
        sources.insert(file.name.clone(), text);
    }
    Some((patched, sources))
}

/// Forge up to `budget` variants of one kind. Candidates are enumerated in
/// file order, shuffled by the seed, then each is checked against both
/// sosie conditions; only accepted variants are returned, with the
/// rejection tallies.
pub fn synthesize(
    program: &Program,
    suite: &TestSuite,
    kind: TransplantKind,
    budget: usize,
    seed: u64,
    limits: &RunLimits,
) -> Result<ForgeOutcome, ForgeError> {
    let baseline = run_checked(program, suite, seed, limits);
    if let Some((test, failure)) = baseline.failed.first() {
        return Err(ForgeError::SuiteRed {
            test: test.clone(),
            failure: failure.clone(),
        });
    }

    let mut candidates = Vec::new();
    for (fi, local, point) in all_stmt_ids(program) {
        match kind {
            TransplantKind::Delete => candidates.push(Candidate {
                kind,
                point,
                point_file: fi,
                point_local: local,
                transplant: None,
            }),
            TransplantKind::Add | TransplantKind::Replace => {
                for tc in enumerate_transplants(program, &point)? {
                    candidates.push(Candidate {
                        kind,
                        point: point.clone(),
                        point_file: fi,
                        point_local: local,
                        transplant: Some(tc),
                    });
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fisher_yates(&mut candidates, &mut rng);
    candidates.truncate(budget);
    let sampled = candidates.len();

    let covered = measure_coverage(program, suite, seed);
    let offsets = file_offsets(program);

    enum Checked {
        Build,
        Ran {
            cand: Candidate,
            sources: BTreeMap<String, String>,
            check: SosieCheck,
        },
    }
    let checked = parallel_map(&candidates, |cand| {
        let Some((patched, sources)) = patch(program, cand) else {
            return Checked::Build;
        };
        let file_name = &program.files[cand.point_file].name;
        let probe = offsets[file_name] + cand.point_local as u32;
        let is_covered = covered.contains(&probe);
        let passes = run_checked(&patched, suite, seed, limits).all_green();
        Checked::Ran {
            cand: cand.clone(),
            sources,
            check: SosieCheck {
                covered: is_covered,
                passes,
                is_sosie: is_covered && passes,
            },
        }
    });

    let mut outcome = ForgeOutcome {
        accepted: Vec::new(),
        sampled,
        rejected_uncovered: 0,
        rejected_failing: 0,
        rejected_build: 0,
    };
    for item in checked {
        match item {
            Checked::Build => outcome.rejected_build += 1,
            Checked::Ran {
                cand,
                sources,
                check,
            } => {
                if check.is_sosie {
                    let (transplant, bindings, identity) = match &cand.transplant {
                        Some(tc) => (Some(tc.transplant.clone()), tc.bindings.clone(), tc.identity),
                        None => (None, BTreeMap::new(), false),
                    };
                    outcome.accepted.push(ForgedVariant {
                        descriptor: VariantDescriptor {
                            id: format!("{}-{:03}", kind.label(), outcome.accepted.len()),
                            kind,
                            transplantation_point: cand.point.clone(),
                            transplant,
                            bindings,
                            identity,
                            patched_source: sources,
                        },
                        check,
                    });
                } else if !check.covered {
                    outcome.rejected_uncovered += 1;
                } else {
                    outcome.rejected_failing += 1;
                }
            }
        }
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// Ground truth by brute-force differential probing
// ---------------------------------------------------------------------------

/// Finite argument grid the differential probe draws from. The defaults
/// straddle common boundary magnitudes so behavior outside the original
/// suite's inputs gets exercised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputGrid {
    pub ints: Vec<i64>,
    pub floats: Vec<f64>,
    pub strings: Vec<String>,
    pub bools: Vec<bool>,
}

impl Default for InputGrid {
    fn default() -> Self {
        InputGrid {
            ints: vec![-30001, -30000, -1, 0, 1, 2, 7, 29999, 30000, 30001],
            floats: vec![-1.5, 0.0, 1.0, 2.5],
            strings: vec![
                String::new(),
                "a".to_string(),
                "xy".to_string(),
                "hello world".to_string(),
            ],
            bools: vec![true, false],
        }
    }
}

fn grid_values(grid: &InputGrid, ty: &Type) -> Option<Vec<Expr>> {
    use minilang::ast::Lit;
    match ty {
        Type::Int => Some(grid.ints.iter().map(|v| Expr::Lit(Lit::Int(*v))).collect()),
        Type::Float => Some(
            grid.floats
                .iter()
                .map(|v| Expr::Lit(Lit::Float(*v)))
                .collect(),
        ),
        Type::Str => Some(
            grid.strings
                .iter()
                .map(|v| Expr::Lit(Lit::Str(v.clone())))
                .collect(),
        ),
        Type::Bool => Some(
            grid.bools
                .iter()
                .map(|v| Expr::Lit(Lit::Bool(*v)))
                .collect(),
        ),
        _ => None,
    }
}

/// Cartesian argument tuples for a parameter list, capped to keep probe
/// counts bounded.
fn arg_tuples(params: &[minilang::ast::Param], grid: &InputGrid, cap: usize) -> Vec<Vec<Expr>> {
    let mut tuples: Vec<Vec<Expr>> = vec![Vec::new()];
    for param in params {
        let Some(values) = grid_values(grid, &param.ty) else {
            return Vec::new();
        };
        let mut next = Vec::with_capacity(tuples.len() * values.len());
        for tuple in &tuples {
            for v in &values {
                let mut t = tuple.clone();
                t.push(v.clone());
                next.push(t);
                if next.len() >= cap {
                    break;
                }
            }
            if next.len() >= cap {
                break;
            }
        }
        tuples = next;
    }
    tuples
}

const PROBE_RECEIVER: &str = "o";
const SEQUENCE_CALLS: i64 = 6;

fn probe_point(test: &str, anchor: usize, receiver: &str, accessor: &str) -> String {
    PointId {
        test: test.to_string(),
        anchor,
        receiver: receiver.to_string(),
        accessor: accessor.to_string(),
        occurrence: 0,
    }
    .encode()
}

fn observe_stmt(test: &str, anchor: usize, receiver: &str, accessor: &str, value: Expr) -> TStmt {
    TStmt::Observe {
        point: probe_point(test, anchor, receiver, accessor),
        value,
    }
}

fn receiver_var() -> Expr {
    Expr::Var(PROBE_RECEIVER.to_string())
}

/// Observations of the receiver's full public surface, one per getter,
/// public field, and textual rendering.
fn surface_observes(test: &str, anchor: &mut usize, catalog: &AccessorCatalog, class: &str) -> Vec<TStmt> {
    let mut out = Vec::new();
    let Some(surface) = catalog.entries.get(class) else {
        return out;
    };
    for getter in &surface.getters {
        *anchor += 1;
        out.push(observe_stmt(
            test,
            *anchor,
            PROBE_RECEIVER,
            &format!("{getter}()"),
            Expr::Call {
                base: Box::new(receiver_var()),
                name: getter.clone(),
                args: Vec::new(),
            },
        ));
    }
    for field in &surface.fields {
        *anchor += 1;
        out.push(observe_stmt(
            test,
            *anchor,
            PROBE_RECEIVER,
            field,
            Expr::Field {
                base: Box::new(receiver_var()),
                name: field.clone(),
            },
        ));
    }
    if surface.debug_render {
        *anchor += 1;
        out.push(observe_stmt(
            test,
            *anchor,
            PROBE_RECEIVER,
            "!render",
            Expr::Call {
                base: Box::new(receiver_var()),
                name: "toString".to_string(),
                args: Vec::new(),
            },
        ));
    }
    out
}

fn new_receiver(class: &str) -> TStmt {
    TStmt::Let {
        name: PROBE_RECEIVER.to_string(),
        ty: Type::Class(class.to_string()),
        init: Expr::New {
            class: class.to_string(),
            args: Vec::new(),
        },
    }
}

/// A sentinel record before the probed call so a thrown error still leaves
/// a trace carrying its message.
fn begin_observe(test: &str) -> TStmt {
    observe_stmt(test, 1, "", "!begin", Expr::Lit(minilang::ast::Lit::Bool(true)))
}

/// One test per public method and argument tuple (a fresh object, one
/// call, then the full surface), plus one repeated-call test per method
/// that drives state evolution under a loop.
pub fn probe_suite(program: &Program, grid: &InputGrid) -> TestSuite {
    let catalog = AccessorCatalog::build(program);
    let mut tests = Vec::new();
    for file in &program.files {
        for class in &file.classes {
            for method in class.methods.iter().filter(|m| m.public) {
                if method.params.len() > 3 {
                    continue;
                }
                let tuples = arg_tuples(&method.params, grid, 200);
                if tuples.is_empty() && !method.params.is_empty() {
                    continue;
                }
                for (k, tuple) in tuples.iter().enumerate() {
                    let name = format!("probe_{}_{}_{k}", class.name, method.name);
                    let mut body = vec![new_receiver(&class.name), begin_observe(&name)];
                    let mut anchor = 1usize;
                    let call = Expr::Call {
                        base: Box::new(receiver_var()),
                        name: method.name.clone(),
                        args: tuple.clone(),
                    };
                    anchor += 1;
                    if method.ret == Type::Void {
                        body.push(TStmt::Expr(call));
                    } else {
                        body.push(observe_stmt(
                            &name,
                            anchor,
                            PROBE_RECEIVER,
                            &format!("{}(...)", method.name),
                            call,
                        ));
                    }
                    body.extend(surface_observes(&name, &mut anchor, &catalog, &class.name));
                    tests.push(RawTest {
                        name,
                        params: Vec::new(),
                        body,
                    });
                }
                // repeated calls with the first tuple, surface observed
                // each iteration: growth policies differ only under state
                if let Some(tuple) = tuples.first() {
                    let name = format!("seq_{}_{}", class.name, method.name);
                    let mut anchor = 1usize;
                    let call = Expr::Call {
                        base: Box::new(receiver_var()),
                        name: method.name.clone(),
                        args: tuple.clone(),
                    };
                    let mut loop_body = vec![TStmt::Expr(call)];
                    loop_body.extend(surface_observes(&name, &mut anchor, &catalog, &class.name));
                    tests.push(RawTest {
                        name: name.clone(),
                        params: Vec::new(),
                        body: vec![
                            new_receiver(&class.name),
                            begin_observe(&name),
                            TStmt::For {
                                var: "i".to_string(),
                                from: Expr::Lit(minilang::ast::Lit::Int(0)),
                                to: Expr::Lit(minilang::ast::Lit::Int(SEQUENCE_CALLS)),
                                body: loop_body,
                            },
                        ],
                    });
                }
            }
        }
    }
    TestSuite {
        files: vec![TestFile {
            name: "Probe".to_string(),
            imports: Vec::new(),
            tests,
        }],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    /// Some observable output differs on the probe grid.
    pub diverse: bool,
    /// First diverging probe point, when diverse.
    pub witness: Option<String>,
    /// Probe points excluded as self-unstable on the original program.
    pub self_unstable: usize,
    pub probes: usize,
}

/// Points whose value sequences differ between two runs of the same
/// program: naturally random observables the oracle must not count.
fn self_stability(a: &crate::executor::TraceSet, b: &crate::executor::TraceSet) -> StablePointSet {
    let seq_a = value_sequences(a);
    let seq_b = value_sequences(b);
    let universe: BTreeSet<&String> = seq_a.keys().chain(seq_b.keys()).collect();
    let empty: Vec<String> = Vec::new();
    let mut set = StablePointSet::default();
    for point in universe {
        let va = seq_a.get(point).unwrap_or(&empty);
        let vb = seq_b.get(point).unwrap_or(&empty);
        if va == vb {
            set.stable.insert(point.clone());
        } else {
            set.discarded.insert(
                point.clone(),
                DiscardEvidence {
                    run_a: a.run_id(),
                    run_b: b.run_id(),
                    values_a: va.clone(),
                    values_b: vb.clone(),
                },
            );
        }
    }
    set
}

/// Brute-force ground truth: run the probe suite on both programs at
/// matched entropy and compare observable outputs, after excluding points
/// the original program cannot reproduce between its own runs.
pub fn differential_oracle(
    original: &Program,
    variant: &Program,
    grid: &InputGrid,
    seed: u64,
    limits: &RunLimits,
) -> OracleVerdict {
    let suite = probe_suite(original, grid);
    let spec = |program_id: &str, run: usize| RunSpec {
        program_id: program_id.to_string(),
        suite_id: String::new(),
        env_index: 0,
        run_index: run,
        seed,
        limits: limits.clone(),
    };
    let (t0, _) = run_suite(original, &suite, 0, &spec("original", 0));
    let (t1, _) = run_suite(original, &suite, 0, &spec("original", 1));
    let stable = self_stability(&t0, &t1);
    let (v0, _) = run_suite(variant, &suite, 0, &spec("variant", 0));
    let report = compare(&t0, &v0, &stable, Mode::Full)
        .expect("probe traces share suite and environment by construction");
    OracleVerdict {
        diverse: report.verdict == Verdict::NvpDiverse,
        witness: report.diverging_points.first().map(|d| d.point.clone()),
        self_unstable: stable.discarded.len(),
        probes: suite.tests().count(),
    }
}
