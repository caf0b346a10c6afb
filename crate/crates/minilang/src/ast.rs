//! Syntax trees for program files and test files, plus statement addressing
//! helpers used by instrumentation and source transplantation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Type {
    Int,
    Float,
    Bool,
    Str,
    List,
    Void,
    Class(String),
}

impl Type {
    pub fn name(&self) -> String {
        match self {
            Type::Int => "int".to_string(),
            Type::Float => "float".to_string(),
            Type::Bool => "bool".to_string(),
            Type::Str => "string".to_string(),
            Type::List => "List".to_string(),
            Type::Void => "void".to_string(),
            Type::Class(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lit {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Lit),
    Var(String),
    This,
    /// Field read: `base.name` where `name` is not a call.
    Field { base: Box<Expr>, name: String },
    /// Method call: `base.name(args)`.
    Call {
        base: Box<Expr>,
        name: String,
        args: Vec<Expr>,
    },
    /// Free function call: builtins, check-framework calls, helper tests.
    Free { name: String, args: Vec<Expr> },
    New { class: String, args: Vec<Expr> },
    Unary { op: UnOp, expr: Box<Expr> },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

// ---------------------------------------------------------------------------
// Program side
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub files: Vec<SourceFile>,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.files
            .iter()
            .flat_map(|f| f.classes.iter())
            .find(|c| c.name == name)
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassDecl> {
        self.files.iter().flat_map(|f| f.classes.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFile {
    /// File stem, e.g. `Calc` for `Calc.mini`.
    pub name: String,
    pub classes: Vec<ClassDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
}

impl ClassDecl {
    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub public: bool,
    pub name: String,
    pub ty: Type,
    /// Field initializers are restricted to literals so construction order
    /// can never observe partially built state.
    pub init: Option<Lit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodDecl {
    pub public: bool,
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Vec<PStmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var(String),
    ThisField(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PStmt {
    Let {
        name: String,
        ty: Type,
        init: Expr,
    },
    Assign {
        target: LValue,
        value: Expr,
    },
    Expr(Expr),
    Return(Option<Expr>),
    Throw(Expr),
    If {
        cond: Expr,
        then: Vec<PStmt>,
        els: Vec<PStmt>,
    },
    While {
        cond: Expr,
        body: Vec<PStmt>,
    },
    For {
        var: String,
        from: Expr,
        to: Expr,
        body: Vec<PStmt>,
    },
    /// Coverage counter injected by instrumentation; renders as `__cov(n);`.
    CovMark(u32),
}

impl PStmt {
    pub fn children(&self) -> Vec<&Vec<PStmt>> {
        match self {
            PStmt::If { then, els, .. } => vec![then, els],
            PStmt::While { body, .. } | PStmt::For { body, .. } => vec![body],
            _ => vec![],
        }
    }
}

// ---------------------------------------------------------------------------
// Statement addressing within a program file
// ---------------------------------------------------------------------------

/// Path to one statement inside a method body: indices into nested bodies.
/// For `If`, index space is `then` followed by `els`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StmtPath(pub Vec<usize>);

/// Address of one statement inside a source file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StmtAddr {
    pub class: usize,
    pub method: usize,
    pub path: StmtPath,
}

fn sub_bodies_mut(stmt: &mut PStmt) -> Vec<&mut Vec<PStmt>> {
    match stmt {
        PStmt::If { then, els, .. } => vec![then, els],
        PStmt::While { body, .. } | PStmt::For { body, .. } => vec![body],
        _ => vec![],
    }
}

/// Resolve a path to (parent body, local index) so the statement can be
/// inspected or edited in place. At a compound statement the next path
/// element indexes the concatenation of its sub-bodies (`then` before `els`).
fn locate<'a>(body: &'a mut Vec<PStmt>, path: &[usize]) -> Option<(&'a mut Vec<PStmt>, usize)> {
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

/// Pre-order enumeration of every statement in a file. The position of each
/// entry in the returned vector is its stable statement id within the file.
pub fn enumerate_stmts(file: &SourceFile) -> Vec<(StmtAddr, &PStmt)> {
    fn walk<'a>(
        out: &mut Vec<(StmtAddr, &'a PStmt)>,
        ci: usize,
        mi: usize,
        prefix: &[usize],
        body: &'a [PStmt],
        offset: usize,
    ) {
        for (k, stmt) in body.iter().enumerate() {
            let mut path = prefix.to_vec();
            path.push(offset + k);
            out.push((
                StmtAddr {
                    class: ci,
                    method: mi,
                    path: StmtPath(path.clone()),
                },
                stmt,
            ));
            let mut child_off = 0usize;
            for sub in stmt.children() {
                walk(out, ci, mi, &path, sub, child_off);
                child_off += sub.len();
            }
        }
    }
    let mut out = Vec::new();
    for (ci, class) in file.classes.iter().enumerate() {
        for (mi, method) in class.methods.iter().enumerate() {
            walk(&mut out, ci, mi, &[], &method.body, 0);
        }
    }
    out
}

/// Edit operations over addressed statements. All return `false` when the
/// address does not resolve.
pub fn remove_stmt(file: &mut SourceFile, addr: &StmtAddr) -> bool {
    with_body(file, addr, |body, idx| {
        body.remove(idx);
    })
}

pub fn insert_after(file: &mut SourceFile, addr: &StmtAddr, stmt: PStmt) -> bool {
    with_body(file, addr, |body, idx| {
        body.insert(idx + 1, stmt);
    })
}

pub fn replace_stmt(file: &mut SourceFile, addr: &StmtAddr, stmt: PStmt) -> bool {
    with_body(file, addr, |body, idx| {
        body[idx] = stmt;
    })
}

pub fn get_stmt(file: &SourceFile, addr: &StmtAddr) -> Option<PStmt> {
    enumerate_stmts(file)
        .into_iter()
        .find(|(a, _)| a == addr)
        .map(|(_, s)| s.clone())
}

fn with_body(
    file: &mut SourceFile,
    addr: &StmtAddr,
    edit: impl FnOnce(&mut Vec<PStmt>, usize),
) -> bool {
    let Some(class) = file.classes.get_mut(addr.class) else {
        return false;
    };
    let Some(method) = class.methods.get_mut(addr.method) else {
        return false;
    };
    match locate(&mut method.body, &addr.path.0) {
        Some((body, idx)) => {
            edit(body, idx);
            true
        }
        None => false,
    }
}

// ---------------------------------------------------------------------------
// Test side
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TestFile {
    /// File stem, e.g. `CalcTest` for `CalcTest.mini`.
    pub name: String,
    pub imports: Vec<String>,
    pub tests: Vec<RawTest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTest {
    pub name: String,
    /// Zero-arg tests are entry points; parameterized ones are helpers
    /// invoked from other tests.
    pub params: Vec<Param>,
    pub body: Vec<TStmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TStmt {
    Let {
        name: String,
        ty: Type,
        init: Expr,
    },
    Expr(Expr),
    For {
        var: String,
        from: Expr,
        to: Expr,
        body: Vec<TStmt>,
    },
    If {
        cond: Expr,
        then: Vec<TStmt>,
        els: Vec<TStmt>,
    },
    /// Injected observation: logs `(point, rendered value)` when executed.
    Observe { point: String, value: Expr },
}

impl TStmt {
    pub fn children(&self) -> Option<Vec<&TStmt>> {
        match self {
            TStmt::For { body, .. } => Some(body.iter().collect()),
            TStmt::If { then, els, .. } => Some(then.iter().chain(els.iter()).collect()),
            _ => None,
        }
    }
}
