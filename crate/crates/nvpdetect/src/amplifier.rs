//! Test amplification: exhaustive single-transformation exploration of the
//! input space plus assertion removal, and the stacked-numeric baseline.
//!
//! For every original test, each literal gets its kind's fixed set of
//! mutations (strings 3, numerics 4, booleans 1) and each non-assertion
//! statement is removed once and duplicated once. Transformations never
//! stack. Literals inside assertion arguments are targets too, because
//! transformation runs before assertions are stripped. The generated count
//! obeys `s*3 + n*4 + b + st*2` exactly once skipped transformations
//! (overflow, values with no literal spelling) are added back.

use std::collections::BTreeMap;

use minilang::ast::{Expr, Lit, RawTest, TStmt, TestFile};
use minilang::render::float_src;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::test_ir::{
    self, checks_imported, is_assertion_stmt, LiteralSlot, SlotKind, TestSuite,
};

// ---------------------------------------------------------------------------
// Descriptors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NumericKind {
    Plus1,
    Minus1,
    Times2,
    Div2,
}

impl NumericKind {
    pub const ALL: [NumericKind; 4] = [
        NumericKind::Plus1,
        NumericKind::Minus1,
        NumericKind::Times2,
        NumericKind::Div2,
    ];

    fn label(&self) -> &'static str {
        match self {
            NumericKind::Plus1 => "Plus1",
            NumericKind::Minus1 => "Minus1",
            NumericKind::Times2 => "Times2",
            NumericKind::Div2 => "Div2",
        }
    }
}

/// Literal slot reference carried in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRef {
    pub ordinal: usize,
    pub index: usize,
}

impl From<&LiteralSlot> for SlotRef {
    fn from(s: &LiteralSlot) -> Self {
        SlotRef {
            ordinal: s.ordinal,
            index: s.index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransformationDescriptor {
    StrRemove { slot: SlotRef },
    StrAdd { slot: SlotRef },
    StrReplace { slot: SlotRef },
    NumPlus1 { slot: SlotRef },
    NumMinus1 { slot: SlotRef },
    NumTimes2 { slot: SlotRef },
    NumDiv2 { slot: SlotRef },
    BoolNegate { slot: SlotRef },
    StmtRemove { ordinal: usize },
    StmtDup { ordinal: usize },
    TdrStack { slot: SlotRef, stack: Vec<NumericKind> },
}

impl TransformationDescriptor {
    fn numeric(kind: NumericKind, slot: SlotRef) -> Self {
        match kind {
            NumericKind::Plus1 => TransformationDescriptor::NumPlus1 { slot },
            NumericKind::Minus1 => TransformationDescriptor::NumMinus1 { slot },
            NumericKind::Times2 => TransformationDescriptor::NumTimes2 { slot },
            NumericKind::Div2 => TransformationDescriptor::NumDiv2 { slot },
        }
    }

    fn name_label(&self) -> String {
        match self {
            TransformationDescriptor::StrRemove { slot } => {
                format!("StrRemove_{}_{}", slot.ordinal, slot.index)
            }
            TransformationDescriptor::StrAdd { slot } => {
                format!("StrAdd_{}_{}", slot.ordinal, slot.index)
            }
            TransformationDescriptor::StrReplace { slot } => {
                format!("StrReplace_{}_{}", slot.ordinal, slot.index)
            }
            TransformationDescriptor::NumPlus1 { slot } => {
                format!("Plus1_{}_{}", slot.ordinal, slot.index)
            }
            TransformationDescriptor::NumMinus1 { slot } => {
                format!("Minus1_{}_{}", slot.ordinal, slot.index)
            }
            TransformationDescriptor::NumTimes2 { slot } => {
                format!("Times2_{}_{}", slot.ordinal, slot.index)
            }
            TransformationDescriptor::NumDiv2 { slot } => {
                format!("Div2_{}_{}", slot.ordinal, slot.index)
            }
            TransformationDescriptor::BoolNegate { slot } => {
                format!("Negate_{}_{}", slot.ordinal, slot.index)
            }
            TransformationDescriptor::StmtRemove { ordinal } => format!("Remove{ordinal}"),
            TransformationDescriptor::StmtDup { ordinal } => format!("Add{ordinal}"),
            TransformationDescriptor::TdrStack { slot, stack } => {
                let kinds: String = stack.iter().map(|k| k.label()).collect();
                format!("Tdr_{}_{}_{}", slot.ordinal, slot.index, kinds)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Output shape
// ---------------------------------------------------------------------------

/// Literal counts of the original suite, assertion arguments included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    /// String literals.
    pub s: usize,
    /// Numeric literals (integers and floats).
    pub n: usize,
    /// Boolean literals.
    pub b: usize,
    /// Addressable (non-assertion) statements, compounds and children alike.
    pub st: usize,
}

impl Counts {
    pub fn formula(&self) -> usize {
        self.s * 3 + self.n * 4 + self.b + self.st * 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTest {
    pub name: String,
    pub parent: String,
    pub descriptor: TransformationDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTransformation {
    pub parent: String,
    pub descriptor: TransformationDescriptor,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplifiedSuite {
    /// Assertion-stripped originals plus generated tests, file structure
    /// preserved (generated tests live in their parent's file).
    pub suite: TestSuite,
    pub counts: Counts,
    pub generated: Vec<GeneratedTest>,
    pub skipped: Vec<SkippedTransformation>,
    /// Test name -> pre-order ordinals of statements hoisted out of assertion
    /// arguments; these carry the original-assertion observation points.
    pub hoisted: BTreeMap<String, Vec<usize>>,
}

impl AmplifiedSuite {
    pub fn generated_count(&self) -> usize {
        self.generated.len()
    }

    /// Names of the assertion-stripped originals, in suite order.
    pub fn original_names(&self) -> Vec<String> {
        let gen: std::collections::BTreeSet<&str> =
            self.generated.iter().map(|g| g.name.as_str()).collect();
        self.suite
            .tests()
            .map(|(_, t)| t.name.clone())
            .filter(|n| !gen.contains(n.as_str()))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

/// Stable per-slot stream so amplification order never affects results.
pub fn derive_slot_seed(seed: u64, test_name: &str, ordinal: usize, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update([0x1f]);
    h.update(test_name.as_bytes());
    h.update([0x1f]);
    h.update((ordinal as u64).to_le_bytes());
    h.update((index as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

const PRINTABLE_LO: u32 = 0x20;
const PRINTABLE_HI: u32 = 0x7e;

fn random_printable(rng: &mut ChaCha8Rng) -> char {
    let span = PRINTABLE_HI - PRINTABLE_LO + 1;
    char::from_u32(PRINTABLE_LO + rng.next_u32() % span).expect("printable ASCII")
}

fn random_index(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    debug_assert!(bound > 0);
    (rng.next_u64() % bound as u64) as usize
}

// ---------------------------------------------------------------------------
// Literal transformation
// ---------------------------------------------------------------------------

/// Which single-literal mutation an outcome belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiteralKind {
    StrRemove,
    StrAdd,
    StrReplace,
    Num(NumericKind),
    BoolNegate,
}

impl LiteralKind {
    fn descriptor(self, slot: SlotRef) -> TransformationDescriptor {
        match self {
            LiteralKind::StrRemove => TransformationDescriptor::StrRemove { slot },
            LiteralKind::StrAdd => TransformationDescriptor::StrAdd { slot },
            LiteralKind::StrReplace => TransformationDescriptor::StrReplace { slot },
            LiteralKind::Num(kind) => TransformationDescriptor::numeric(kind, slot),
            LiteralKind::BoolNegate => TransformationDescriptor::BoolNegate { slot },
        }
    }
}

/// One literal-transformation attempt: the value, or the reason it was
/// skipped (overflow, no literal spelling).
#[derive(Debug, Clone, PartialEq)]
pub struct LiteralOutcome {
    pub kind: LiteralKind,
    pub result: Result<Lit, String>,
}

/// All transformations of one literal value: strings get exactly 3, numerics
/// exactly 4, booleans exactly 1. Character positions and characters come
/// from the per-slot seeded stream.
pub fn transform_literal(lit: &Lit, slot_seed: u64) -> Vec<LiteralOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(slot_seed);
    match lit {
        Lit::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let removed = if chars.is_empty() {
                // the empty string stays empty; still emitted so the count
                // identity stays closed-form
                s.clone()
            } else {
                let at = random_index(&mut rng, chars.len());
                let mut out = chars.clone();
                out.remove(at);
                out.into_iter().collect()
            };
            let added = {
                let at = random_index(&mut rng, chars.len() + 1);
                let c = random_printable(&mut rng);
                let mut out = chars.clone();
                out.insert(at, c);
                out.into_iter().collect::<String>()
            };
            let replaced = if chars.is_empty() {
                s.clone()
            } else {
                let at = random_index(&mut rng, chars.len());
                let mut c = random_printable(&mut rng);
                while c == chars[at] {
                    c = random_printable(&mut rng);
                }
                let mut out = chars.clone();
                out[at] = c;
                out.into_iter().collect()
            };
            vec![
                LiteralOutcome {
                    kind: LiteralKind::StrRemove,
                    result: Ok(Lit::Str(removed)),
                },
                LiteralOutcome {
                    kind: LiteralKind::StrAdd,
                    result: Ok(Lit::Str(added)),
                },
                LiteralOutcome {
                    kind: LiteralKind::StrReplace,
                    result: Ok(Lit::Str(replaced)),
                },
            ]
        }
        Lit::Int(i) => NumericKind::ALL
            .iter()
            .map(|kind| {
                let value = match kind {
                    NumericKind::Plus1 => i.checked_add(1),
                    NumericKind::Minus1 => i.checked_sub(1),
                    NumericKind::Times2 => i.checked_mul(2),
                    NumericKind::Div2 => Some(i / 2),
                };
                let result = match value {
                    // the minimum has no literal spelling (its magnitude
                    // overflows during lexing)
                    Some(v) if v != i64::MIN => Ok(Lit::Int(v)),
                    Some(_) => Err("result has no literal spelling".to_string()),
                    None => Err("integer overflow".to_string()),
                };
                LiteralOutcome {
                    kind: LiteralKind::Num(*kind),
                    result,
                }
            })
            .collect(),
        Lit::Float(f) => NumericKind::ALL
            .iter()
            .map(|kind| {
                let v = match kind {
                    NumericKind::Plus1 => f + 1.0,
                    NumericKind::Minus1 => f - 1.0,
                    NumericKind::Times2 => f * 2.0,
                    NumericKind::Div2 => f / 2.0,
                };
                let result = if float_src(v).is_some() {
                    Ok(Lit::Float(v))
                } else {
                    Err("result is not a finite float".to_string())
                };
                LiteralOutcome {
                    kind: LiteralKind::Num(*kind),
                    result,
                }
            })
            .collect(),
        Lit::Bool(v) => vec![LiteralOutcome {
            kind: LiteralKind::BoolNegate,
            result: Ok(Lit::Bool(!v)),
        }],
        Lit::Null => vec![],
    }
}

// ---------------------------------------------------------------------------
// Statement transformation
// ---------------------------------------------------------------------------

/// Ordinals of statements eligible for removal/duplication: everything that
/// is not an assertion call, compounds and their children included.
pub fn addressable_ordinals(test: &RawTest, file_imports_checks: bool) -> Vec<usize> {
    test_ir::enumerate(&test.body)
        .iter()
        .enumerate()
        .filter(|(_, (_, stmt))| !is_assertion_stmt(stmt, file_imports_checks))
        .map(|(ordinal, _)| ordinal)
        .collect()
}

/// Removal and duplication variants for every addressable statement:
/// exactly two generated tests per target.
pub fn transform_statements(
    test: &RawTest,
    file_imports_checks: bool,
) -> Vec<(TransformationDescriptor, RawTest)> {
    let mut out = Vec::new();
    for ordinal in addressable_ordinals(test, file_imports_checks) {
        let path = test_ir::path_of(&test.body, ordinal).expect("enumerated ordinal resolves");
        let mut removed = test.clone();
        assert!(test_ir::remove(&mut removed.body, &path));
        out.push((TransformationDescriptor::StmtRemove { ordinal }, removed));
        let mut duplicated = test.clone();
        assert!(test_ir::duplicate(&mut duplicated.body, &path));
        out.push((TransformationDescriptor::StmtDup { ordinal }, duplicated));
    }
    out
}

// ---------------------------------------------------------------------------
// Assertion stripping
// ---------------------------------------------------------------------------

fn expr_is_call(e: &Expr) -> bool {
    matches!(e, Expr::Call { .. } | Expr::Free { .. })
}

/// Remove every assertion statement, hoisting each method-call argument as a
/// standalone statement at the assertion's position, order preserved.
/// Returns the stripped test plus the pre-order ordinals of hoisted calls.
pub fn strip_assertions(test: &RawTest, file_imports_checks: bool) -> (RawTest, Vec<usize>) {
    fn strip_body(
        body: &[TStmt],
        checks: bool,
        prefix: &[usize],
        offset: usize,
        hoisted_paths: &mut Vec<Vec<usize>>,
    ) -> Vec<TStmt> {
        let mut out = Vec::new();
        for stmt in body {
            if is_assertion_stmt(stmt, checks) {
                let TStmt::Expr(Expr::Free { args, .. }) = stmt else {
                    unreachable!("assertion statements are free calls");
                };
                for arg in args {
                    if expr_is_call(arg) {
                        let mut path = prefix.to_vec();
                        path.push(offset + out.len());
                        hoisted_paths.push(path);
                        out.push(TStmt::Expr(arg.clone()));
                    }
                }
                continue;
            }
            let rebuilt = match stmt {
                TStmt::For {
                    var,
                    from,
                    to,
                    body: inner,
                } => {
                    let mut path = prefix.to_vec();
                    path.push(offset + out.len());
                    TStmt::For {
                        var: var.clone(),
                        from: from.clone(),
                        to: to.clone(),
                        body: strip_body(inner, checks, &path, 0, hoisted_paths),
                    }
                }
                TStmt::If { cond, then, els } => {
                    let mut path = prefix.to_vec();
                    path.push(offset + out.len());
                    let new_then = strip_body(then, checks, &path, 0, hoisted_paths);
                    let new_els = strip_body(els, checks, &path, new_then.len(), hoisted_paths);
                    TStmt::If {
                        cond: cond.clone(),
                        then: new_then,
                        els: new_els,
                    }
                }
                other => other.clone(),
            };
            out.push(rebuilt);
        }
        out
    }

    let mut hoisted_paths = Vec::new();
    let stripped = RawTest {
        name: test.name.clone(),
        params: test.params.clone(),
        body: strip_body(&test.body, file_imports_checks, &[], 0, &mut hoisted_paths),
    };
    let enumerated = test_ir::enumerate(&stripped.body);
    let ordinals = hoisted_paths
        .iter()
        .map(|p| {
            enumerated
                .iter()
                .position(|(tp, _)| &tp.0 == p)
                .expect("hoisted path enumerates")
        })
        .collect();
    (stripped, ordinals)
}

// ---------------------------------------------------------------------------
// Whole-suite amplification
// ---------------------------------------------------------------------------

pub fn count_suite(suite: &TestSuite) -> Counts {
    let mut counts = Counts::default();
    for (file, test) in suite.tests() {
        let checks = checks_imported(file);
        for slot in test_ir::literal_slots(test) {
            match slot.kind {
                SlotKind::Str => counts.s += 1,
                SlotKind::Int | SlotKind::Float => counts.n += 1,
                SlotKind::Bool => counts.b += 1,
            }
        }
        counts.st += addressable_ordinals(test, checks).len();
    }
    counts
}

fn unique_name(base: String, taken: &mut std::collections::BTreeSet<String>) -> String {
    let mut name = base;
    while !taken.insert(name.clone()) {
        name.push('x');
    }
    name
}

/// Algorithm: for each test, apply every single literal transformation and
/// every single statement transformation, then strip assertions from the
/// originals and all generated tests.
pub fn amplify(suite: &TestSuite, seed: u64) -> AmplifiedSuite {
    let counts = count_suite(suite);
    let mut files: Vec<TestFile> = Vec::with_capacity(suite.files.len());
    let mut generated = Vec::new();
    let mut skipped = Vec::new();
    let mut hoisted = BTreeMap::new();
    let mut taken: std::collections::BTreeSet<String> =
        suite.tests().map(|(_, t)| t.name.clone()).collect();

    for file in &suite.files {
        let checks = checks_imported(file);
        let mut out_tests = Vec::new();
        // assertion-stripped originals come first, in file order
        for test in &file.tests {
            let (stripped, ords) = strip_assertions(test, checks);
            hoisted.insert(stripped.name.clone(), ords);
            out_tests.push(stripped);
        }
        for test in &file.tests {
            // literal transformations, slot order then fixed kind order
            for slot in test_ir::literal_slots(test) {
                let lit = test_ir::get_literal(test, &slot).expect("slot resolves");
                let slot_seed = derive_slot_seed(seed, &test.name, slot.ordinal, slot.index);
                for outcome in transform_literal(&lit, slot_seed) {
                    let descriptor = outcome.kind.descriptor(SlotRef::from(&slot));
                    match outcome.result {
                        Ok(value) => {
                            let mut mutant = test.clone();
                            assert!(test_ir::set_literal(&mut mutant, &slot, value));
                            let name = unique_name(
                                format!("{}_{}", test.name, descriptor.name_label()),
                                &mut taken,
                            );
                            mutant.name = name.clone();
                            let (stripped, ords) = strip_assertions(&mutant, checks);
                            hoisted.insert(name.clone(), ords);
                            out_tests.push(stripped);
                            generated.push(GeneratedTest {
                                name,
                                parent: test.name.clone(),
                                descriptor,
                            });
                        }
                        Err(reason) => skipped.push(SkippedTransformation {
                            parent: test.name.clone(),
                            descriptor,
                            reason,
                        }),
                    }
                }
            }
            // statement transformations, ordinal order, remove before dup
            for (descriptor, mut mutant) in transform_statements(test, checks) {
                let name = unique_name(
                    format!("{}_{}", test.name, descriptor.name_label()),
                    &mut taken,
                );
                mutant.name = name.clone();
                let (stripped, ords) = strip_assertions(&mutant, checks);
                hoisted.insert(name.clone(), ords);
                out_tests.push(stripped);
                generated.push(GeneratedTest {
                    name,
                    parent: test.name.clone(),
                    descriptor,
                });
            }
        }
        files.push(TestFile {
            name: file.name.clone(),
            imports: file.imports.clone(),
            tests: out_tests,
        });
    }

    let out = AmplifiedSuite {
        suite: TestSuite { files },
        counts,
        generated,
        skipped,
        hoisted,
    };
    debug_assert_eq!(
        out.generated.len() + out.skipped.len(),
        counts.formula(),
        "count identity must hold"
    );
    out
}

/// Stacked-numeric baseline: sequences of 1..=interaction_level numeric
/// mutations applied to a single literal slot per generated test. Strings,
/// booleans, and statements are untouched.
pub fn tdr_amplify(suite: &TestSuite, interaction_level: usize) -> AmplifiedSuite {
    assert!(interaction_level >= 1, "interaction level starts at 1");
    let counts = count_suite(suite);
    let mut files: Vec<TestFile> = Vec::with_capacity(suite.files.len());
    let mut generated = Vec::new();
    let mut skipped = Vec::new();
    let mut hoisted = BTreeMap::new();
    let mut taken: std::collections::BTreeSet<String> =
        suite.tests().map(|(_, t)| t.name.clone()).collect();

    for file in &suite.files {
        let checks = checks_imported(file);
        let mut out_tests = Vec::new();
        for test in &file.tests {
            let (stripped, ords) = strip_assertions(test, checks);
            hoisted.insert(stripped.name.clone(), ords);
            out_tests.push(stripped);
        }
        for test in &file.tests {
            for slot in test_ir::literal_slots(test) {
                if !matches!(slot.kind, SlotKind::Int | SlotKind::Float) {
                    continue;
                }
                let base = test_ir::get_literal(test, &slot).expect("slot resolves");
                for depth in 1..=interaction_level {
                    for stack in numeric_stacks(depth) {
                        let descriptor = TransformationDescriptor::TdrStack {
                            slot: SlotRef::from(&slot),
                            stack: stack.clone(),
                        };
                        match apply_stack(&base, &stack) {
                            Ok(value) => {
                                let mut mutant = test.clone();
                                assert!(test_ir::set_literal(&mut mutant, &slot, value));
                                let name = unique_name(
                                    format!("{}_{}", test.name, descriptor.name_label()),
                                    &mut taken,
                                );
                                mutant.name = name.clone();
                                let (stripped, ords) = strip_assertions(&mutant, checks);
                                hoisted.insert(name.clone(), ords);
                                out_tests.push(stripped);
                                generated.push(GeneratedTest {
                                    name,
                                    parent: test.name.clone(),
                                    descriptor,
                                });
                            }
                            Err(reason) => skipped.push(SkippedTransformation {
                                parent: test.name.clone(),
                                descriptor,
                                reason,
                            }),
                        }
                    }
                }
            }
        }
        files.push(TestFile {
            name: file.name.clone(),
            imports: file.imports.clone(),
            tests: out_tests,
        });
    }

    AmplifiedSuite {
        suite: TestSuite { files },
        counts,
        generated,
        skipped,
        hoisted,
    }
}

/// All ordered sequences of numeric kinds with the given length.
fn numeric_stacks(depth: usize) -> Vec<Vec<NumericKind>> {
    let mut out: Vec<Vec<NumericKind>> = vec![vec![]];
    for _ in 0..depth {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                NumericKind::ALL.iter().map(move |k| {
                    let mut next = prefix.clone();
                    next.push(*k);
                    next
                })
            })
            .collect();
    }
    out
}

fn apply_stack(base: &Lit, stack: &[NumericKind]) -> Result<Lit, String> {
    let mut lit = base.clone();
    for kind in stack {
        lit = match (&lit, kind) {
            (Lit::Int(i), NumericKind::Plus1) => i
                .checked_add(1)
                .filter(|v| *v != i64::MIN)
                .map(Lit::Int)
                .ok_or_else(|| "integer overflow".to_string())?,
            (Lit::Int(i), NumericKind::Minus1) => i
                .checked_sub(1)
                .filter(|v| *v != i64::MIN)
                .map(Lit::Int)
                .ok_or_else(|| "integer overflow".to_string())?,
            (Lit::Int(i), NumericKind::Times2) => i
                .checked_mul(2)
                .filter(|v| *v != i64::MIN)
                .map(Lit::Int)
                .ok_or_else(|| "integer overflow".to_string())?,
            (Lit::Int(i), NumericKind::Div2) => Lit::Int(i / 2),
            (Lit::Float(f), kind) => {
                let v = match kind {
                    NumericKind::Plus1 => f + 1.0,
                    NumericKind::Minus1 => f - 1.0,
                    NumericKind::Times2 => f * 2.0,
                    NumericKind::Div2 => f / 2.0,
                };
                if float_src(v).is_none() {
                    return Err("result is not a finite float".to_string());
                }
                Lit::Float(v)
            }
            _ => unreachable!("stacks apply to numeric literals only"),
        };
    }
    Ok(lit)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUITE: &str = r#"import checks;

test testCounter() {
    let c: Counter = new Counter();
    c.add(4);
    assertEquals(6, c.getCount());
}
"#;

    fn suite() -> TestSuite {
        TestSuite::parse(&[("CounterTest".to_string(), SUITE.to_string())]).unwrap()
    }

    #[test]
    fn integer_transforms_follow_the_fixed_recipe() {
        let outcomes = transform_literal(&Lit::Int(4), 1);
        let values: Vec<Lit> = outcomes.into_iter().map(|o| o.result.unwrap()).collect();
        assert_eq!(
            values,
            vec![Lit::Int(5), Lit::Int(3), Lit::Int(8), Lit::Int(2)]
        );
    }

    #[test]
    fn integer_division_truncates_toward_zero() {
        let outcomes = transform_literal(&Lit::Int(-7), 1);
        assert_eq!(outcomes[3].result, Ok(Lit::Int(-3)));
        let outcomes = transform_literal(&Lit::Int(7), 1);
        assert_eq!(outcomes[3].result, Ok(Lit::Int(3)));
    }

    #[test]
    fn boolean_transform_is_negation() {
        let outcomes = transform_literal(&Lit::Bool(true), 9);
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].result, Ok(Lit::Bool(false)));
    }

    #[test]
    fn string_transforms_have_the_three_shapes() {
        let outcomes = transform_literal(&Lit::Str("ab".to_string()), 42);
        assert_eq!(outcomes.len(), 3);
        let texts: Vec<String> = outcomes
            .into_iter()
            .map(|o| match o.result.unwrap() {
                Lit::Str(s) => s,
                other => panic!("unexpected {other:?}"),
            })
            .collect();
        assert_eq!(texts[0].chars().count(), 1, "removal shortens by one");
        assert_eq!(texts[1].chars().count(), 3, "insertion lengthens by one");
        assert_eq!(texts[2].chars().count(), 2, "replacement keeps length");
        let diff = texts[2]
            .chars()
            .zip("ab".chars())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(diff, 1, "replacement differs in exactly one position");
        for c in texts.concat().chars() {
            assert!((' '..='~').contains(&c), "characters stay printable");
        }
    }

    #[test]
    fn string_transforms_are_seed_deterministic() {
        let a = transform_literal(&Lit::Str("hello".to_string()), 7);
        let b = transform_literal(&Lit::Str("hello".to_string()), 7);
        let c = transform_literal(&Lit::Str("hello".to_string()), 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_string_remove_and_replace_are_identity_but_counted() {
        let outcomes = transform_literal(&Lit::Str(String::new()), 3);
        assert_eq!(outcomes.len(), 3);
        assert_eq!(outcomes[0].result, Ok(Lit::Str(String::new())));
        match &outcomes[1].result {
            Ok(Lit::Str(s)) => assert_eq!(s.chars().count(), 1),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(outcomes[2].result, Ok(Lit::Str(String::new())));
    }

    #[test]
    fn overflowing_integer_transforms_are_skipped_with_reasons() {
        let outcomes = transform_literal(&Lit::Int(i64::MAX), 1);
        assert!(outcomes[0].result.is_err(), "plus1 overflows");
        assert_eq!(outcomes[1].result, Ok(Lit::Int(i64::MAX - 1)));
        assert!(outcomes[2].result.is_err(), "times2 overflows");
        assert!(outcomes[3].result.is_ok());
    }

    #[test]
    fn statement_transforms_skip_assertions_and_double_the_rest() {
        let s = suite();
        let (file, test) = s.find("testCounter").unwrap();
        let variants = transform_statements(test, checks_imported(file));
        // let + add are addressable; the assertion is not
        assert_eq!(variants.len(), 4);
        let dup = variants
            .iter()
            .find(|(d, _)| matches!(d, TransformationDescriptor::StmtDup { ordinal: 1 }))
            .unwrap();
        let stmts = test_ir::enumerate(&dup.1.body);
        assert_eq!(stmts.len(), 4);
        assert_eq!(
            test_ir::stmt_at(&dup.1.body, 1),
            test_ir::stmt_at(&dup.1.body, 2),
            "duplicate sits immediately after the original"
        );
    }

    #[test]
    fn strip_hoists_call_arguments_in_order() {
        let src = r#"import checks;

test t() {
    let m: M = new M();
    assertFalse(m.getMap().containsKey(5));
    assertEquals(5, x);
    assertEquals(m.size(), m.count());
}
"#;
        let s = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        let (file, test) = s.find("t").unwrap();
        let (stripped, ords) = strip_assertions(test, checks_imported(file));
        // let, hoisted containsKey, hoisted size, hoisted count
        assert_eq!(stripped.body.len(), 4);
        assert_eq!(ords, vec![1, 2, 3]);
        for ord in ords {
            let stmt = test_ir::stmt_at(&stripped.body, ord).unwrap();
            assert!(matches!(stmt, TStmt::Expr(Expr::Call { .. })));
        }
        let rendered = minilang::render::render_test(&stripped).unwrap();
        assert!(rendered.contains("m.getMap().containsKey(5);"));
        assert!(!rendered.contains("assert"));
    }

    #[test]
    fn strip_without_assertions_is_identity() {
        let src = "test t() { let x: int = 1; f(x); }";
        let s = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        let (file, test) = s.find("t").unwrap();
        let (stripped, ords) = strip_assertions(test, checks_imported(file));
        assert_eq!(&stripped, test);
        assert!(ords.is_empty());
    }

    #[test]
    fn strip_reaches_assertions_inside_loops() {
        let src = r#"import checks;

test t() {
    let c: Counter = new Counter();
    for i in 0..3 {
        c.add(i);
        assertTrue(c.isOk());
    }
}
"#;
        let s = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        let (file, test) = s.find("t").unwrap();
        let (stripped, ords) = strip_assertions(test, checks_imported(file));
        let rendered = minilang::render::render_test(&stripped).unwrap();
        assert!(!rendered.contains("assertTrue"));
        assert!(rendered.contains("c.isOk();"));
        // hoisted call is the loop's second statement: ordinals are let=0,
        // for=1, add=2, isOk=3
        assert_eq!(ords, vec![3]);
    }

    #[test]
    fn amplify_satisfies_the_count_identity() {
        let s = suite();
        let amplified = amplify(&s, 11);
        // literals: 4 and 6 (n=2); statements: let, add (st=2)
        assert_eq!(
            amplified.counts,
            Counts {
                s: 0,
                n: 2,
                b: 0,
                st: 2
            }
        );
        assert_eq!(amplified.counts.formula(), 12);
        assert_eq!(amplified.generated_count(), 12);
        assert!(amplified.skipped.is_empty());
        // originals kept, assertion-stripped
        let names = amplified.original_names();
        assert_eq!(names, vec!["testCounter".to_string()]);
        let rendered = amplified.suite.render().unwrap();
        assert!(!rendered[0].1.contains("assertEquals"));
        assert!(rendered[0].1.contains("c.getCount();"), "hoisted call kept");
    }

    #[test]
    fn amplify_is_deterministic_for_a_fixed_seed() {
        let s = suite();
        let a = amplify(&s, 5).suite.render().unwrap();
        let b = amplify(&s, 5).suite.render().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn skipped_transforms_keep_the_identity_closed() {
        let src = format!(
            "import checks;\n\ntest t() {{ let x: int = {}; assertEquals({}, x); }}\n",
            i64::MAX,
            i64::MAX
        );
        let s = TestSuite::parse(&[("T".to_string(), src)]).unwrap();
        let amplified = amplify(&s, 2);
        // n=2 (both MAX literals), st=1 (the let)
        assert_eq!(amplified.counts.formula(), 2 * 4 + 2);
        assert_eq!(
            amplified.generated_count() + amplified.skipped.len(),
            amplified.counts.formula()
        );
        assert_eq!(amplified.skipped.len(), 4, "plus1 and times2, twice");
    }

    #[test]
    fn generated_names_embed_parent_and_transformation() {
        let s = suite();
        let amplified = amplify(&s, 11);
        assert!(amplified
            .generated
            .iter()
            .any(|g| g.name == "testCounter_Add1"));
        assert!(amplified
            .generated
            .iter()
            .any(|g| g.name == "testCounter_Remove0"));
        assert!(amplified
            .generated
            .iter()
            .any(|g| g.name.starts_with("testCounter_Plus1_")));
        for g in &amplified.generated {
            assert!(g.name.starts_with(&format!("{}_", g.parent)));
        }
    }

    #[test]
    fn tdr_counts_are_closed_form() {
        let src = "import checks;\n\ntest t() { let x: int = 10; assertEquals(10, w(x)); }\n";
        let s = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        // two numeric literals, level 2: each slot gets 4 + 16
        let amplified = tdr_amplify(&s, 2);
        assert_eq!(amplified.generated_count(), 2 * (4 + 16));
        assert!(amplified.skipped.is_empty());
        let one = tdr_amplify(&s, 1);
        assert_eq!(one.generated_count(), 2 * 4);
    }

    #[test]
    fn tdr_ignores_non_numeric_literals_and_statements() {
        let src = "test t() { let s: string = \"abc\"; let b: bool = true; f(s, b); }";
        let s = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        let amplified = tdr_amplify(&s, 3);
        assert_eq!(amplified.generated_count(), 0);
    }

    #[test]
    fn tdr_stacks_compose_in_order() {
        assert_eq!(
            apply_stack(&Lit::Int(5), &[NumericKind::Plus1, NumericKind::Times2]),
            Ok(Lit::Int(12))
        );
        assert_eq!(
            apply_stack(&Lit::Int(5), &[NumericKind::Times2, NumericKind::Plus1]),
            Ok(Lit::Int(11))
        );
        assert_eq!(numeric_stacks(2).len(), 16);
    }

    #[test]
    fn single_transformation_per_generated_test() {
        let s = suite();
        let amplified = amplify(&s, 11);
        let (_, parent) = s.find("testCounter").unwrap();
        let (parent_stripped, _) = strip_assertions(parent, true);
        for g in &amplified.generated {
            let (_, gen_test) = amplified.suite.find(&g.name).unwrap();
            match &g.descriptor {
                TransformationDescriptor::StmtRemove { .. } => {
                    assert_eq!(
                        test_ir::enumerate(&gen_test.body).len() + 1,
                        test_ir::enumerate(&parent_stripped.body).len()
                    );
                }
                TransformationDescriptor::StmtDup { .. } => {
                    assert_eq!(
                        test_ir::enumerate(&gen_test.body).len(),
                        test_ir::enumerate(&parent_stripped.body).len() + 1
                    );
                }
                _ => {
                    // literal transforms: same shape, at most one slot differs
                    let parent_slots = test_ir::literal_slots(&parent_stripped);
                    let gen_slots = test_ir::literal_slots(gen_test);
                    assert_eq!(parent_slots.len(), gen_slots.len());
                    let differing = parent_slots
                        .iter()
                        .zip(gen_slots.iter())
                        .filter(|(a, b)| {
                            test_ir::get_literal(&parent_stripped, a)
                                != test_ir::get_literal(gen_test, b)
                        })
                        .count();
                    assert!(differing <= 1, "{} changed {differing} slots", g.name);
                }
            }
        }
    }
}
