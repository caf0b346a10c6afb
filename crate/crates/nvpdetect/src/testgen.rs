//! Randomized test-suite generation with by-construction bookkeeping.
//! Every emitted literal and statement is tallied at the moment it is
//! placed, so the tallies are an independent check on anything that later
//! re-counts the suite by walking its AST.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use minilang::ast::{Expr, Lit, Param, RawTest, TStmt, TestFile, Type};

use crate::amplifier::Counts;
use crate::test_ir::TestSuite;

#[derive(Debug, Clone)]
pub struct GeneratedSuite {
    pub suite: TestSuite,
    /// Literal and statement tallies recorded while emitting.
    pub counts: Counts,
    /// Assertion arguments that are method or free calls: the statements
    /// stripping must hoist.
    pub hoistable: usize,
}

fn pick(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    debug_assert!(bound > 0);
    let bound = bound as u64;
    let limit = u64::MAX - u64::MAX % bound;
    let mut draw = rng.next_u64();
    while draw >= limit {
        draw = rng.next_u64();
    }
    (draw % bound) as usize
}

const WORDS: &[&str] = &["", "a", "note", "hello world", "Zz0"];
const FLOATS: &[f64] = &[0.0, 1.5, 2.0, -3.25];
const METHODS: &[&str] = &["push", "clear", "combine", "step"];

struct Emit {
    rng: ChaCha8Rng,
    counts: Counts,
    hoistable: usize,
    next_var: usize,
}

impl Emit {
    /// A literal from overflow-safe ranges, tallied as it is minted.
    fn literal(&mut self) -> Expr {
        let lit = match pick(&mut self.rng, 4) {
            0 => {
                self.counts.n += 1;
                Lit::Int(pick(&mut self.rng, 2001) as i64 - 1000)
            }
            1 => {
                self.counts.n += 1;
                Lit::Float(FLOATS[pick(&mut self.rng, FLOATS.len())])
            }
            2 => {
                self.counts.b += 1;
                Lit::Bool(pick(&mut self.rng, 2) == 0)
            }
            _ => {
                self.counts.s += 1;
                Lit::Str(WORDS[pick(&mut self.rng, WORDS.len())].to_string())
            }
        };
        Expr::Lit(lit)
    }

    fn int_literal(&mut self, lo: i64, hi: i64) -> Expr {
        self.counts.n += 1;
        Expr::Lit(Lit::Int(lo + pick(&mut self.rng, (hi - lo + 1) as usize) as i64))
    }

    fn fresh_var(&mut self) -> String {
        let name = format!("x{}", self.next_var);
        self.next_var += 1;
        name
    }

    fn call(&mut self) -> Expr {
        let args = (0..pick(&mut self.rng, 3)).map(|_| self.literal()).collect();
        Expr::Call {
            base: Box::new(Expr::Var("subject".to_string())),
            name: METHODS[pick(&mut self.rng, METHODS.len())].to_string(),
            args,
        }
    }

    /// A non-assertion simple statement; counts one addressable statement.
    fn simple_stmt(&mut self) -> TStmt {
        self.counts.st += 1;
        match pick(&mut self.rng, 3) {
            0 => {
                let init = self.literal();
                let ty = match &init {
                    Expr::Lit(Lit::Int(_)) => Type::Int,
                    Expr::Lit(Lit::Float(_)) => Type::Float,
                    Expr::Lit(Lit::Bool(_)) => Type::Bool,
                    _ => Type::Str,
                };
                TStmt::Let {
                    name: self.fresh_var(),
                    ty,
                    init,
                }
            }
            1 => TStmt::Expr(self.call()),
            _ => {
                let call = self.call();
                TStmt::Let {
                    name: self.fresh_var(),
                    ty: Type::Int,
                    init: call,
                }
            }
        }
    }

    /// An assertion statement: never addressable, but its literals count
    /// and its call arguments will have to be hoisted.
    fn assertion(&mut self) -> TStmt {
        let stmt = match pick(&mut self.rng, 3) {
            0 => {
                self.hoistable += 1;
                Expr::Free {
                    name: "assertEquals".to_string(),
                    args: vec![self.literal(), self.call()],
                }
            }
            1 => Expr::Free {
                name: "assertTrue".to_string(),
                args: vec![{
                    self.counts.b += 1;
                    Expr::Lit(Lit::Bool(true))
                }],
            },
            _ => {
                self.hoistable += 2;
                Expr::Free {
                    name: "assertNotEquals".to_string(),
                    args: vec![self.call(), self.call()],
                }
            }
        };
        TStmt::Expr(stmt)
    }

    /// A compound with simple children; the compound and each child are
    /// all addressable statements.
    fn compound(&mut self) -> TStmt {
        let children = 1 + pick(&mut self.rng, 2);
        let mut body = Vec::with_capacity(children + 1);
        for _ in 0..children {
            body.push(self.simple_stmt());
        }
        if pick(&mut self.rng, 4) == 0 {
            body.push(self.assertion());
        }
        self.counts.st += 1;
        if pick(&mut self.rng, 2) == 0 {
            TStmt::For {
                var: self.fresh_var(),
                from: self.int_literal(0, 2),
                to: self.int_literal(3, 5),
                body,
            }
        } else {
            let cond = Expr::Binary {
                op: minilang::ast::BinOp::Lt,
                lhs: Box::new(self.int_literal(0, 9)),
                rhs: Box::new(self.int_literal(10, 19)),
            };
            TStmt::If {
                cond,
                then: body,
                els: Vec::new(),
            }
        }
    }

    fn test(&mut self, name: String) -> RawTest {
        self.next_var = 0;
        let stmts = 2 + pick(&mut self.rng, 5);
        let mut body = Vec::with_capacity(stmts);
        for _ in 0..stmts {
            match pick(&mut self.rng, 4) {
                0 => body.push(self.assertion()),
                1 => body.push(self.compound()),
                _ => body.push(self.simple_stmt()),
            }
        }
        RawTest {
            name,
            params: Vec::<Param>::new(),
            body,
        }
    }
}

/// A random well-formed suite with its emission tallies. Fixed seed, fixed
/// suite.
pub fn random_suite(seed: u64) -> GeneratedSuite {
    let mut emit = Emit {
        rng: ChaCha8Rng::seed_from_u64(seed),
        counts: Counts::default(),
        hoistable: 0,
        next_var: 0,
    };
    let tests = 1 + pick(&mut emit.rng, 4);
    let tests = (0..tests).map(|i| emit.test(format!("gen{i}"))).collect();
    GeneratedSuite {
        suite: TestSuite {
            files: vec![TestFile {
                name: "GenTest".to_string(),
                imports: vec!["checks".to_string()],
                tests,
            }],
        },
        counts: emit.counts,
        hoistable: emit.hoistable,
    }
}
