//! Tree-walking interpreter with fully virtualized nondeterminism.
//!
//! A run is a pure function of `(program, tests, env, entropy_seed, limits)`:
//! clock reads, random integers, and object identity hashes are drawn from a
//! seeded stream; the working directory, locale, timezone, and environment
//! variables come from the supplied [`ExecEnv`]. Nothing touches the host.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::ast::*;
use crate::error::LangError;
use crate::render::float_text;

/// Names exported by the `checks` framework import. Calls to these resolve to
/// builtin assertions only when the calling test's file imports `checks`.
pub const CHECKS_EXPORTS: &[&str] = &[
    "assertEquals",
    "assertNotEquals",
    "assertTrue",
    "assertFalse",
    "assertNull",
    "assertNotNull",
    "fail",
];

/// Builtin free functions that read the virtual execution environment or the
/// per-run entropy stream.
pub const ENV_BUILTINS: &[&str] = &[
    "clockNanos",
    "randomInt",
    "workingDir",
    "localeName",
    "timezoneName",
    "envValue",
];

/// Virtual execution environment a test runs under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecEnv {
    pub working_dir: String,
    pub locale: String,
    pub timezone: String,
    pub vars: BTreeMap<String, String>,
}

impl ExecEnv {
    /// The unperturbed base environment.
    pub fn base() -> Self {
        let mut vars = BTreeMap::new();
        vars.insert("FIXTURE_HOME".to_string(), "/home/fixture".to_string());
        vars.insert("FIXTURE_TMPDIR".to_string(), "/tmp/fixture".to_string());
        ExecEnv {
            working_dir: "/sandbox/work".to_string(),
            locale: "en_US".to_string(),
            timezone: "UTC".to_string(),
            vars,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunLimits {
    pub step_limit: u64,
    pub wall: Option<Duration>,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            step_limit: 5_000_000,
            wall: Some(Duration::from_secs(10)),
        }
    }
}

// The evaluator recurses on the native stack, which gives out near 140
// interpreted levels on a 2 MiB thread in debug builds. 64 keeps 2x headroom.
pub const MAX_CALL_DEPTH: usize = 64;

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Void,
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(Rc<String>),
    List(Rc<RefCell<Vec<Value>>>),
    Obj(Rc<Object>),
}

#[derive(Debug)]
pub struct Object {
    pub class: String,
    pub id: u64,
    pub fields: RefCell<BTreeMap<String, Value>>,
}

impl Value {
    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(Rc::new(s.into()))
    }

    fn type_name(&self) -> String {
        match self {
            Value::Null => "null".to_string(),
            Value::Void => "void".to_string(),
            Value::Int(_) => "int".to_string(),
            Value::Float(_) => "float".to_string(),
            Value::Bool(_) => "bool".to_string(),
            Value::Str(_) => "string".to_string(),
            Value::List(_) => "List".to_string(),
            Value::Obj(o) => o.class.clone(),
        }
    }
}

/// Structural equality: primitives and strings by value, lists element-wise,
/// objects by identity.
pub fn value_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) | (Value::Void, Value::Void) => true,
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Float(x), Value::Float(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::List(x), Value::List(y)) => {
            let (x, y) = (x.borrow(), y.borrow());
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(a, b)| value_eq(a, b))
        }
        (Value::Obj(x), Value::Obj(y)) => Rc::ptr_eq(x, y),
        _ => false,
    }
}

fn conforms(v: &Value, ty: &Type) -> bool {
    match (v, ty) {
        (Value::Int(_), Type::Int) => true,
        (Value::Float(_), Type::Float) => true,
        (Value::Bool(_), Type::Bool) => true,
        (Value::Str(_), Type::Str) => true,
        (Value::List(_), Type::List) => true,
        (Value::Obj(o), Type::Class(c)) => o.class == *c,
        (Value::Null, Type::Str | Type::List | Type::Class(_)) => true,
        _ => false,
    }
}

/// Kind-tagged payload delivered to the observation sink. Rendering of
/// objects and lists happens inside the interpreter (it may run `toString`
/// methods); canonical formatting of the payload is the observer's concern.
#[derive(Debug, Clone, PartialEq)]
pub enum ObsValue {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Null,
    Void,
    /// Raw textual rendering of an object (user `toString` or `Class@hexid`).
    ObjText(String),
    /// Raw textual rendering of a list.
    ListText(String),
}

/// One observation as seen by the sink: either a value or a guarded failure
/// raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub enum Observed {
    Value(ObsValue),
    Thrown(String),
}

/// Outcome of running one entry test to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub outcome: Result<(), LangError>,
    /// Entry test plus every helper test it invoked, counted per invocation.
    pub tests_invoked: u64,
    /// Observation records delivered to the sink.
    pub records_emitted: u64,
}

// ---------------------------------------------------------------------------
// Machine
// ---------------------------------------------------------------------------

/// Test registry: maps a test name to its body and whether the file declaring
/// it imports the `checks` framework.
pub struct TestSet<'a> {
    map: BTreeMap<&'a str, (&'a RawTest, bool)>,
}

impl<'a> TestSet<'a> {
    pub fn new() -> Self {
        TestSet {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, test: &'a RawTest, checks_imported: bool) {
        self.map.insert(test.name.as_str(), (test, checks_imported));
    }

    pub fn get(&self, name: &str) -> Option<(&'a RawTest, bool)> {
        self.map.get(name).copied()
    }
}

impl<'a> Default for TestSet<'a> {
    fn default() -> Self {
        Self::new()
    }
}

struct Frame {
    scopes: Vec<HashMap<String, Value>>,
    this: Option<Rc<Object>>,
    class: Option<String>,
    checks: bool,
}

enum Flow {
    Normal,
    Return(Value),
}

pub struct Machine<'p, 's> {
    program: &'p Program,
    tests: &'p TestSet<'p>,
    env: &'p ExecEnv,
    rng: ChaCha8Rng,
    clock: u64,
    next_obj_id: u64,
    steps: u64,
    limits: RunLimits,
    started: Instant,
    frames: Vec<Frame>,
    observe_sink: Option<&'s mut dyn FnMut(&str, Observed)>,
    coverage_sink: Option<&'s mut dyn FnMut(u32)>,
    tests_invoked: u64,
    records_emitted: u64,
}

impl<'p, 's> Machine<'p, 's> {
    pub fn new(
        program: &'p Program,
        tests: &'p TestSet<'p>,
        env: &'p ExecEnv,
        entropy_seed: u64,
        limits: RunLimits,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(entropy_seed);
        let clock = 1_000_000_000 + (rng.next_u64() % 1_000_000_000);
        // object ids look like identity hashes and differ run to run
        let next_obj_id = 0x10_0000 + (rng.next_u32() as u64 % 0xF0_0000);
        Machine {
            program,
            tests,
            env,
            rng,
            clock,
            next_obj_id,
            steps: 0,
            limits,
            started: Instant::now(),
            frames: Vec::new(),
            observe_sink: None,
            coverage_sink: None,
            tests_invoked: 0,
            records_emitted: 0,
        }
    }

    pub fn with_observe_sink(mut self, sink: &'s mut dyn FnMut(&str, Observed)) -> Self {
        self.observe_sink = Some(sink);
        self
    }

    pub fn with_coverage_sink(mut self, sink: &'s mut dyn FnMut(u32)) -> Self {
        self.coverage_sink = Some(sink);
        self
    }

    /// Run one zero-arg entry test to completion.
    pub fn run_entry(&mut self, name: &str) -> TestRun {
        self.started = Instant::now();
        let outcome = match self.tests.get(name) {
            Some((test, checks)) => {
                if !test.params.is_empty() {
                    Err(LangError::Runtime {
                        message: format!("test '{name}' takes parameters and cannot run directly"),
                    })
                } else {
                    self.invoke_test(test, checks, Vec::new())
                }
            }
            None => Err(LangError::Runtime {
                message: format!("unknown test '{name}'"),
            }),
        };
        TestRun {
            outcome,
            tests_invoked: self.tests_invoked,
            records_emitted: self.records_emitted,
        }
    }

    fn invoke_test(
        &mut self,
        test: &RawTest,
        checks: bool,
        args: Vec<Value>,
    ) -> Result<(), LangError> {
        if args.len() != test.params.len() {
            return Err(LangError::Runtime {
                message: format!(
                    "test '{}' expects {} arguments, got {}",
                    test.name,
                    test.params.len(),
                    args.len()
                ),
            });
        }
        let mut scope = HashMap::new();
        for (param, arg) in test.params.iter().zip(args) {
            if !conforms(&arg, &param.ty) {
                return Err(LangError::Runtime {
                    message: format!(
                        "argument '{}' of test '{}' expects {}, got {}",
                        param.name,
                        test.name,
                        param.ty.name(),
                        arg.type_name()
                    ),
                });
            }
            scope.insert(param.name.clone(), arg);
        }
        if self.frames.len() >= MAX_CALL_DEPTH {
            return Err(LangError::Runtime {
                message: format!("call depth exceeded invoking test '{}'", test.name),
            });
        }
        self.tests_invoked += 1;
        self.frames.push(Frame {
            scopes: vec![scope],
            this: None,
            class: None,
            checks,
        });
        let result = self.exec_tstmts(&test.body);
        self.frames.pop();
        result
    }

    fn tick(&mut self) -> Result<(), LangError> {
        self.steps += 1;
        if self.steps > self.limits.step_limit {
            return Err(LangError::StepLimit);
        }
        if self.steps % 4096 == 0 {
            if let Some(wall) = self.limits.wall {
                if self.started.elapsed() > wall {
                    return Err(LangError::WallClock);
                }
            }
        }
        Ok(())
    }

    fn runtime<T>(&self, message: impl Into<String>) -> Result<T, LangError> {
        Err(LangError::Runtime {
            message: message.into(),
        })
    }

    fn frame(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("no active frame")
    }

    // -- test statements ----------------------------------------------------

    fn exec_tstmts(&mut self, body: &[TStmt]) -> Result<(), LangError> {
        for stmt in body {
            self.exec_tstmt(stmt)?;
        }
        Ok(())
    }

    fn exec_tstmt(&mut self, stmt: &TStmt) -> Result<(), LangError> {
        self.tick()?;
        match stmt {
            TStmt::Let { name, ty, init } => {
                let v = self.eval(init)?;
                if !conforms(&v, ty) && !matches!(v, Value::Null) {
                    return self.runtime(format!(
                        "'{name}' declared as {} but initialized with {}",
                        ty.name(),
                        v.type_name()
                    ));
                }
                let scope = self.frame().scopes.last_mut().expect("scope");
                scope.insert(name.clone(), v);
                Ok(())
            }
            TStmt::Expr(e) => {
                self.eval(e)?;
                Ok(())
            }
            TStmt::For {
                var,
                from,
                to,
                body,
            } => {
                let from = self.eval_int(from, "loop bound")?;
                let to = self.eval_int(to, "loop bound")?;
                let mut i = from;
                while i < to {
                    self.frame().scopes.push(HashMap::new());
                    self.frame()
                        .scopes
                        .last_mut()
                        .expect("scope")
                        .insert(var.clone(), Value::Int(i));
                    let result = self.exec_tstmts(body);
                    self.frame().scopes.pop();
                    result?;
                    i += 1;
                }
                Ok(())
            }
            TStmt::If { cond, then, els } => {
                let c = self.eval_bool(cond, "if condition")?;
                let body = if c { then } else { els };
                self.frame().scopes.push(HashMap::new());
                let result = self.exec_tstmts(body);
                self.frame().scopes.pop();
                result
            }
            TStmt::Observe { point, value } => {
                let observed = match self.eval(value) {
                    Ok(v) => match self.observation_payload(&v) {
                        Ok(p) => Observed::Value(p),
                        Err(e) if Self::guardable(&e) => Observed::Thrown(e.message()),
                        Err(e) => return Err(e),
                    },
                    Err(e) if Self::guardable(&e) => Observed::Thrown(e.message()),
                    Err(e) => return Err(e),
                };
                self.records_emitted += 1;
                if let Some(sink) = self.observe_sink.as_mut() {
                    sink(point, observed);
                }
                Ok(())
            }
        }
    }

    /// Budget exhaustion is never swallowed by observation guards.
    fn guardable(e: &LangError) -> bool {
        !matches!(e, LangError::StepLimit | LangError::WallClock)
    }

    fn observation_payload(&mut self, v: &Value) -> Result<ObsValue, LangError> {
        Ok(match v {
            Value::Int(n) => ObsValue::Int(*n),
            Value::Float(f) => ObsValue::Float(*f),
            Value::Bool(b) => ObsValue::Bool(*b),
            Value::Str(s) => ObsValue::Str(s.as_ref().clone()),
            Value::Null => ObsValue::Null,
            Value::Void => ObsValue::Void,
            Value::Obj(_) => ObsValue::ObjText(self.render_raw(v)?),
            Value::List(_) => ObsValue::ListText(self.render_raw(v)?),
        })
    }

    // -- program statements ---------------------------------------------------

    fn exec_pstmts(&mut self, body: &[PStmt]) -> Result<Flow, LangError> {
        for stmt in body {
            match self.exec_pstmt(stmt)? {
                Flow::Normal => {}
                flow => return Ok(flow),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_pstmt(&mut self, stmt: &PStmt) -> Result<Flow, LangError> {
        self.tick()?;
        match stmt {
            PStmt::Let { name, ty, init } => {
                let v = self.eval(init)?;
                if !conforms(&v, ty) && !matches!(v, Value::Null) {
                    return self.runtime(format!(
                        "'{name}' declared as {} but initialized with {}",
                        ty.name(),
                        v.type_name()
                    ));
                }
                let scope = self.frame().scopes.last_mut().expect("scope");
                scope.insert(name.clone(), v);
                Ok(Flow::Normal)
            }
            PStmt::Assign { target, value } => {
                let v = self.eval(value)?;
                match target {
                    LValue::Var(name) => {
                        let frame = self.frame();
                        for scope in frame.scopes.iter_mut().rev() {
                            if let Some(slot) = scope.get_mut(name) {
                                *slot = v;
                                return Ok(Flow::Normal);
                            }
                        }
                        self.runtime(format!("assignment to unknown variable '{name}'"))
                    }
                    LValue::ThisField(field) => {
                        let (this, class_name) = {
                            let frame = self.frame();
                            match (&frame.this, &frame.class) {
                                (Some(t), Some(c)) => (Rc::clone(t), c.clone()),
                                _ => return self.runtime("'this' outside of a method"),
                            }
                        };
                        let class = self
                            .program
                            .class(&class_name)
                            .expect("class of active frame");
                        let Some(decl) = class.field(field) else {
                            return self
                                .runtime(format!("class {class_name} has no field '{field}'"));
                        };
                        if !conforms(&v, &decl.ty) && !matches!(v, Value::Null) {
                            return self.runtime(format!(
                                "field '{field}' of {class_name} holds {}, got {}",
                                decl.ty.name(),
                                v.type_name()
                            ));
                        }
                        this.fields.borrow_mut().insert(field.clone(), v);
                        Ok(Flow::Normal)
                    }
                }
            }
            PStmt::Expr(e) => {
                self.eval(e)?;
                Ok(Flow::Normal)
            }
            PStmt::Return(None) => Ok(Flow::Return(Value::Void)),
            PStmt::Return(Some(e)) => {
                let v = self.eval(e)?;
                Ok(Flow::Return(v))
            }
            PStmt::Throw(e) => {
                let v = self.eval(e)?;
                let message = match &v {
                    Value::Str(s) => s.as_ref().clone(),
                    other => self.render_raw(other)?,
                };
                Err(LangError::Thrown { message })
            }
            PStmt::If { cond, then, els } => {
                let c = self.eval_bool(cond, "if condition")?;
                let body = if c { then } else { els };
                self.frame().scopes.push(HashMap::new());
                let result = self.exec_pstmts(body);
                self.frame().scopes.pop();
                result
            }
            PStmt::While { cond, body } => {
                loop {
                    self.tick()?;
                    if !self.eval_bool(cond, "while condition")? {
                        return Ok(Flow::Normal);
                    }
                    self.frame().scopes.push(HashMap::new());
                    let result = self.exec_pstmts(body);
                    self.frame().scopes.pop();
                    match result? {
                        Flow::Normal => {}
                        flow => return Ok(flow),
                    }
                }
            }
            PStmt::For {
                var,
                from,
                to,
                body,
            } => {
                let from = self.eval_int(from, "loop bound")?;
                let to = self.eval_int(to, "loop bound")?;
                let mut i = from;
                while i < to {
                    self.frame().scopes.push(HashMap::new());
                    self.frame()
                        .scopes
                        .last_mut()
                        .expect("scope")
                        .insert(var.clone(), Value::Int(i));
                    let result = self.exec_pstmts(body);
                    self.frame().scopes.pop();
                    match result? {
                        Flow::Normal => {}
                        flow => return Ok(flow),
                    }
                    i += 1;
                }
                Ok(Flow::Normal)
            }
            PStmt::CovMark(id) => {
                if let Some(sink) = self.coverage_sink.as_mut() {
                    sink(*id);
                }
                Ok(Flow::Normal)
            }
        }
    }

    // -- expressions -----------------------------------------------------------

    fn eval_int(&mut self, e: &Expr, what: &str) -> Result<i64, LangError> {
        match self.eval(e)? {
            Value::Int(v) => Ok(v),
            other => self.runtime(format!("{what} must be int, got {}", other.type_name())),
        }
    }

    fn eval_bool(&mut self, e: &Expr, what: &str) -> Result<bool, LangError> {
        match self.eval(e)? {
            Value::Bool(v) => Ok(v),
            other => self.runtime(format!("{what} must be bool, got {}", other.type_name())),
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, LangError> {
        self.tick()?;
        match e {
            Expr::Lit(l) => Ok(match l {
                Lit::Int(v) => Value::Int(*v),
                Lit::Float(v) => Value::Float(*v),
                Lit::Bool(v) => Value::Bool(*v),
                Lit::Str(s) => Value::str(s.clone()),
                Lit::Null => Value::Null,
            }),
            Expr::Var(name) => {
                let frame = self.frames.last().expect("no active frame");
                for scope in frame.scopes.iter().rev() {
                    if let Some(v) = scope.get(name) {
                        return Ok(v.clone());
                    }
                }
                self.runtime(format!("unknown variable '{name}'"))
            }
            Expr::This => {
                let frame = self.frames.last().expect("no active frame");
                match &frame.this {
                    Some(obj) => Ok(Value::Obj(Rc::clone(obj))),
                    None => self.runtime("'this' outside of a method"),
                }
            }
            Expr::Field { base, name } => {
                let base_is_this = matches!(**base, Expr::This);
                let base = self.eval(base)?;
                match base {
                    Value::Obj(obj) => {
                        let class_name = obj.class.clone();
                        let Some(class) = self.program.class(&class_name) else {
                            return self.runtime(format!("unknown class {class_name}"));
                        };
                        let Some(decl) = class.field(name) else {
                            return self
                                .runtime(format!("class {class_name} has no field '{name}'"));
                        };
                        let same_class =
                            self.frames.last().and_then(|f| f.class.as_deref()) == Some(&class_name);
                        if !decl.public && !(base_is_this || same_class) {
                            return self.runtime(format!(
                                "field '{name}' of {class_name} is not public"
                            ));
                        }
                        let fields = obj.fields.borrow();
                        Ok(fields.get(name).cloned().unwrap_or(Value::Null))
                    }
                    Value::Null => self.runtime(format!("field '{name}' read on null")),
                    other => {
                        self.runtime(format!("{} values have no fields", other.type_name()))
                    }
                }
            }
            Expr::Call { base, name, args } => {
                let base_is_this = matches!(**base, Expr::This);
                let base = self.eval(base)?;
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(a)?);
                }
                self.call_method(base, base_is_this, name, argv)
            }
            Expr::Free { name, args } => {
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(a)?);
                }
                self.call_free(name, argv)
            }
            Expr::New { class, args } => {
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(a)?);
                }
                self.construct(class, argv)
            }
            Expr::Unary { op, expr } => {
                let v = self.eval(expr)?;
                match (op, v) {
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, Value::Int(n)) => match n.checked_neg() {
                        Some(r) => Ok(Value::Int(r)),
                        None => self.runtime("integer overflow in negation"),
                    },
                    (UnOp::Neg, Value::Float(f)) => Ok(Value::Float(-f)),
                    (op, v) => self.runtime(format!(
                        "operator {op:?} not defined for {}",
                        v.type_name()
                    )),
                }
            }
            Expr::Binary { op, lhs, rhs } => self.eval_binary(*op, lhs, rhs),
        }
    }

    fn eval_binary(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr) -> Result<Value, LangError> {
        // short-circuit forms first
        match op {
            BinOp::And => {
                return if self.eval_bool(lhs, "operand of &&")? {
                    Ok(Value::Bool(self.eval_bool(rhs, "operand of &&")?))
                } else {
                    Ok(Value::Bool(false))
                };
            }
            BinOp::Or => {
                return if self.eval_bool(lhs, "operand of ||")? {
                    Ok(Value::Bool(true))
                } else {
                    Ok(Value::Bool(self.eval_bool(rhs, "operand of ||")?))
                };
            }
            _ => {}
        }
        let a = self.eval(lhs)?;
        let b = self.eval(rhs)?;
        match op {
            BinOp::Eq => Ok(Value::Bool(value_eq(&a, &b))),
            BinOp::Ne => Ok(Value::Bool(!value_eq(&a, &b))),
            BinOp::Add => match (&a, &b) {
                (Value::Int(x), Value::Int(y)) => match x.checked_add(*y) {
                    Some(r) => Ok(Value::Int(r)),
                    None => self.runtime("integer overflow in addition"),
                },
                (Value::Float(x), Value::Float(y)) => Ok(Value::Float(x + y)),
                (Value::Str(_), _) | (_, Value::Str(_)) => {
                    let l = self.render_raw(&a)?;
                    let r = self.render_raw(&b)?;
                    Ok(Value::str(format!("{l}{r}")))
                }
                _ => self.runtime(format!(
                    "operator + not defined for {} and {}",
                    a.type_name(),
                    b.type_name()
                )),
            },
            BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => match (&a, &b) {
                (Value::Int(x), Value::Int(y)) => {
                    let r = match op {
                        BinOp::Sub => x.checked_sub(*y),
                        BinOp::Mul => x.checked_mul(*y),
                        BinOp::Div => {
                            if *y == 0 {
                                return self.runtime("division by zero");
                            }
                            x.checked_div(*y)
                        }
                        BinOp::Rem => {
                            if *y == 0 {
                                return self.runtime("remainder by zero");
                            }
                            x.checked_rem(*y)
                        }
                        _ => unreachable!(),
                    };
                    match r {
                        Some(r) => Ok(Value::Int(r)),
                        None => self.runtime("integer overflow"),
                    }
                }
                (Value::Float(x), Value::Float(y)) => Ok(Value::Float(match op {
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Rem => x % y,
                    _ => unreachable!(),
                })),
                _ => self.runtime(format!(
                    "operator {op:?} not defined for {} and {}",
                    a.type_name(),
                    b.type_name()
                )),
            },
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let ord = match (&a, &b) {
                    (Value::Int(x), Value::Int(y)) => x.partial_cmp(y),
                    (Value::Float(x), Value::Float(y)) => x.partial_cmp(y),
                    (Value::Str(x), Value::Str(y)) => x.partial_cmp(y),
                    _ => {
                        return self.runtime(format!(
                            "operator {op:?} not defined for {} and {}",
                            a.type_name(),
                            b.type_name()
                        ))
                    }
                };
                let holds = match (op, ord) {
                    (BinOp::Lt, Some(std::cmp::Ordering::Less)) => true,
                    (BinOp::Le, Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)) => true,
                    (BinOp::Gt, Some(std::cmp::Ordering::Greater)) => true,
                    (BinOp::Ge, Some(std::cmp::Ordering::Greater | std::cmp::Ordering::Equal)) => {
                        true
                    }
                    _ => false,
                };
                Ok(Value::Bool(holds))
            }
            BinOp::And | BinOp::Or => unreachable!("handled above"),
        }
    }

    // -- calls -------------------------------------------------------------------

    fn construct(&mut self, class_name: &str, args: Vec<Value>) -> Result<Value, LangError> {
        if class_name == "List" {
            if !args.is_empty() {
                return self.runtime("List takes no constructor arguments");
            }
            return Ok(Value::List(Rc::new(RefCell::new(Vec::new()))));
        }
        let Some(class) = self.program.class(class_name) else {
            return self.runtime(format!("unknown class {class_name}"));
        };
        let mut fields = BTreeMap::new();
        for field in &class.fields {
            let v = match &field.init {
                Some(Lit::Int(v)) => Value::Int(*v),
                Some(Lit::Float(v)) => Value::Float(*v),
                Some(Lit::Bool(v)) => Value::Bool(*v),
                Some(Lit::Str(s)) => Value::str(s.clone()),
                Some(Lit::Null) => Value::Null,
                None => match &field.ty {
                    Type::Int => Value::Int(0),
                    Type::Float => Value::Float(0.0),
                    Type::Bool => Value::Bool(false),
                    Type::Str => Value::str(""),
                    Type::List => Value::List(Rc::new(RefCell::new(Vec::new()))),
                    Type::Class(_) => Value::Null,
                    Type::Void => {
                        return self.runtime(format!(
                            "field '{}' of {class_name} cannot be void",
                            field.name
                        ))
                    }
                },
            };
            fields.insert(field.name.clone(), v);
        }
        let obj = Rc::new(Object {
            class: class_name.to_string(),
            id: self.next_obj_id,
            fields: RefCell::new(fields),
        });
        self.next_obj_id += 0x11;
        if class.method("init").is_some() {
            self.invoke_method(Rc::clone(&obj), "init", args, true)?;
        } else if !args.is_empty() {
            return self.runtime(format!(
                "class {class_name} has no constructor taking {} arguments",
                args.len()
            ));
        }
        Ok(Value::Obj(obj))
    }

    fn call_method(
        &mut self,
        base: Value,
        base_is_this: bool,
        name: &str,
        args: Vec<Value>,
    ) -> Result<Value, LangError> {
        match base {
            Value::Obj(obj) => {
                let class_name = obj.class.clone();
                let same_class =
                    self.frames.last().and_then(|f| f.class.as_deref()) == Some(class_name.as_str());
                if name == "toString" {
                    let has_user = self
                        .program
                        .class(&class_name)
                        .map(|c| c.method("toString").is_some())
                        .unwrap_or(false);
                    if !has_user {
                        if !args.is_empty() {
                            return self.runtime("toString takes no arguments");
                        }
                        return Ok(Value::str(format!("{}@{:x}", class_name, obj.id)));
                    }
                }
                let Some(class) = self.program.class(&class_name) else {
                    return self.runtime(format!("unknown class {class_name}"));
                };
                let Some(method) = class.method(name) else {
                    return self
                        .runtime(format!("class {class_name} has no method '{name}'"));
                };
                if !method.public && !(base_is_this || same_class) {
                    return self
                        .runtime(format!("method '{name}' of {class_name} is not public"));
                }
                self.invoke_method(obj, name, args, base_is_this || same_class)
            }
            Value::List(list) => self.call_list_method(list, name, args),
            Value::Str(s) => self.call_str_method(&s, name, args),
            Value::Int(_) | Value::Float(_) | Value::Bool(_) => {
                if name == "toString" && args.is_empty() {
                    let text = self.render_raw(&base)?;
                    Ok(Value::str(text))
                } else {
                    self.runtime(format!(
                        "{} values have no method '{name}'",
                        base.type_name()
                    ))
                }
            }
            Value::Null => self.runtime(format!("method '{name}' called on null")),
            Value::Void => self.runtime(format!("method '{name}' called on void")),
        }
    }

    fn invoke_method(
        &mut self,
        obj: Rc<Object>,
        name: &str,
        args: Vec<Value>,
        _privileged: bool,
    ) -> Result<Value, LangError> {
        let class_name = obj.class.clone();
        let class = self.program.class(&class_name).expect("checked by caller");
        let method = class.method(name).expect("checked by caller").clone();
        if args.len() != method.params.len() {
            return self.runtime(format!(
                "method '{name}' of {class_name} expects {} arguments, got {}",
                method.params.len(),
                args.len()
            ));
        }
        let mut scope = HashMap::new();
        for (param, arg) in method.params.iter().zip(args) {
            if !conforms(&arg, &param.ty) {
                return self.runtime(format!(
                    "argument '{}' of {class_name}.{name} expects {}, got {}",
                    param.name,
                    param.ty.name(),
                    arg.type_name()
                ));
            }
            scope.insert(param.name.clone(), arg);
        }
        if self.frames.len() >= MAX_CALL_DEPTH {
            return self.runtime(format!(
                "call depth exceeded invoking '{name}' of {class_name}"
            ));
        }
        let checks = self.frames.last().map(|f| f.checks).unwrap_or(false);
        self.frames.push(Frame {
            scopes: vec![scope],
            this: Some(obj),
            class: Some(class_name.clone()),
            checks,
        });
        let flow = self.exec_pstmts(&method.body);
        self.frames.pop();
        match flow? {
            Flow::Return(v) => {
                if method.ret == Type::Void {
                    if !matches!(v, Value::Void) {
                        return self.runtime(format!(
                            "void method '{name}' of {class_name} returned a value"
                        ));
                    }
                    Ok(Value::Void)
                } else {
                    if !conforms(&v, &method.ret) {
                        return self.runtime(format!(
                            "method '{name}' of {class_name} declares {} but returned {}",
                            method.ret.name(),
                            v.type_name()
                        ));
                    }
                    Ok(v)
                }
            }
            Flow::Normal => Ok(Value::Void),
        }
    }

    fn call_free(&mut self, name: &str, args: Vec<Value>) -> Result<Value, LangError> {
        let checks_active = self.frames.last().map(|f| f.checks).unwrap_or(false);
        if checks_active && CHECKS_EXPORTS.contains(&name) {
            return self.call_assertion(name, args);
        }
        if ENV_BUILTINS.contains(&name) {
            return self.call_env_builtin(name, args);
        }
        if let Some((test, checks)) = self.tests.get(name) {
            self.invoke_test(test, checks, args)?;
            return Ok(Value::Void);
        }
        self.runtime(format!("unknown function '{name}'"))
    }

    fn call_env_builtin(&mut self, name: &str, args: Vec<Value>) -> Result<Value, LangError> {
        match (name, args.as_slice()) {
            ("clockNanos", []) => {
                self.clock += 1 + (self.rng.next_u64() % 999_983);
                Ok(Value::Int(self.clock as i64))
            }
            ("randomInt", []) => Ok(Value::Int(self.rng.next_u64() as i64)),
            ("workingDir", []) => Ok(Value::str(self.env.working_dir.clone())),
            ("localeName", []) => Ok(Value::str(self.env.locale.clone())),
            ("timezoneName", []) => Ok(Value::str(self.env.timezone.clone())),
            ("envValue", [Value::Str(key)]) => Ok(Value::str(
                self.env.vars.get(key.as_ref().as_str()).cloned().unwrap_or_default(),
            )),
            _ => self.runtime(format!("bad arguments for builtin '{name}'")),
        }
    }

    fn call_assertion(&mut self, name: &str, args: Vec<Value>) -> Result<Value, LangError> {
        let fail = |message: String| Err(LangError::AssertionFailed { message });
        match (name, args.as_slice()) {
            ("assertEquals", [expected, actual]) => {
                if value_eq(expected, actual) {
                    Ok(Value::Void)
                } else {
                    let e = self.render_raw(expected)?;
                    let a = self.render_raw(actual)?;
                    fail(format!("expected {e} but was {a}"))
                }
            }
            ("assertNotEquals", [unexpected, actual]) => {
                if !value_eq(unexpected, actual) {
                    Ok(Value::Void)
                } else {
                    let u = self.render_raw(unexpected)?;
                    fail(format!("did not expect {u}"))
                }
            }
            ("assertTrue", [Value::Bool(b)]) => {
                if *b {
                    Ok(Value::Void)
                } else {
                    fail("expected true but was false".to_string())
                }
            }
            ("assertFalse", [Value::Bool(b)]) => {
                if !*b {
                    Ok(Value::Void)
                } else {
                    fail("expected false but was true".to_string())
                }
            }
            ("assertNull", [v]) => {
                if matches!(v, Value::Null) {
                    Ok(Value::Void)
                } else {
                    let text = self.render_raw(v)?;
                    fail(format!("expected null but was {text}"))
                }
            }
            ("assertNotNull", [v]) => {
                if !matches!(v, Value::Null) {
                    Ok(Value::Void)
                } else {
                    fail("expected a value but was null".to_string())
                }
            }
            ("fail", []) => fail("failed".to_string()),
            ("fail", [Value::Str(msg)]) => fail(msg.as_ref().clone()),
            _ => self.runtime(format!("bad arguments for assertion '{name}'")),
        }
    }

    fn call_list_method(
        &mut self,
        list: Rc<RefCell<Vec<Value>>>,
        name: &str,
        args: Vec<Value>,
    ) -> Result<Value, LangError> {
        let index = |v: &Value| -> Option<i64> {
            match v {
                Value::Int(i) => Some(*i),
                _ => None,
            }
        };
        match (name, args.as_slice()) {
            ("add", [v]) => {
                list.borrow_mut().push(v.clone());
                Ok(Value::Void)
            }
            ("get", [i]) => {
                let Some(i) = index(i) else {
                    return self.runtime("List.get expects an int index");
                };
                let list = list.borrow();
                if i < 0 || i as usize >= list.len() {
                    return self.runtime(format!(
                        "index {i} out of bounds for list of size {}",
                        list.len()
                    ));
                }
                Ok(list[i as usize].clone())
            }
            ("set", [i, v]) => {
                let Some(i) = index(i) else {
                    return self.runtime("List.set expects an int index");
                };
                let mut list = list.borrow_mut();
                if i < 0 || i as usize >= list.len() {
                    return self.runtime(format!(
                        "index {i} out of bounds for list of size {}",
                        list.len()
                    ));
                }
                list[i as usize] = v.clone();
                Ok(Value::Void)
            }
            ("size", []) => Ok(Value::Int(list.borrow().len() as i64)),
            ("isEmpty", []) => Ok(Value::Bool(list.borrow().is_empty())),
            ("removeAt", [i]) => {
                let Some(i) = index(i) else {
                    return self.runtime("List.removeAt expects an int index");
                };
                let mut list = list.borrow_mut();
                if i < 0 || i as usize >= list.len() {
                    return self.runtime(format!(
                        "index {i} out of bounds for list of size {}",
                        list.len()
                    ));
                }
                Ok(list.remove(i as usize))
            }
            ("remove", [v]) => {
                let mut list = list.borrow_mut();
                match list.iter().position(|x| value_eq(x, v)) {
                    Some(pos) => {
                        list.remove(pos);
                        Ok(Value::Bool(true))
                    }
                    None => Ok(Value::Bool(false)),
                }
            }
            ("contains", [v]) => Ok(Value::Bool(list.borrow().iter().any(|x| value_eq(x, v)))),
            ("indexOf", [v]) => Ok(Value::Int(
                list.borrow()
                    .iter()
                    .position(|x| value_eq(x, v))
                    .map(|p| p as i64)
                    .unwrap_or(-1),
            )),
            ("clear", []) => {
                list.borrow_mut().clear();
                Ok(Value::Void)
            }
            ("toString", []) => {
                let v = Value::List(list);
                let text = self.render_raw(&v)?;
                Ok(Value::str(text))
            }
            _ => self.runtime(format!("List has no method '{name}' with that arity")),
        }
    }

    fn call_str_method(
        &mut self,
        s: &Rc<String>,
        name: &str,
        args: Vec<Value>,
    ) -> Result<Value, LangError> {
        let chars: Vec<char> = s.chars().collect();
        match (name, args.as_slice()) {
            ("length", []) => Ok(Value::Int(chars.len() as i64)),
            ("isEmpty", []) => Ok(Value::Bool(chars.is_empty())),
            ("charAt", [Value::Int(i)]) => {
                if *i < 0 || *i as usize >= chars.len() {
                    return self.runtime(format!(
                        "index {i} out of bounds for string of length {}",
                        chars.len()
                    ));
                }
                Ok(Value::str(chars[*i as usize].to_string()))
            }
            ("substring", [Value::Int(a), Value::Int(b)]) => {
                if *a < 0 || *b < *a || *b as usize > chars.len() {
                    return self.runtime(format!(
                        "substring({a}, {b}) out of bounds for string of length {}",
                        chars.len()
                    ));
                }
                Ok(Value::str(
                    chars[*a as usize..*b as usize].iter().collect::<String>(),
                ))
            }
            ("contains", [Value::Str(needle)]) => {
                Ok(Value::Bool(s.contains(needle.as_ref().as_str())))
            }
            ("startsWith", [Value::Str(p)]) => Ok(Value::Bool(s.starts_with(p.as_ref().as_str()))),
            ("endsWith", [Value::Str(p)]) => Ok(Value::Bool(s.ends_with(p.as_ref().as_str()))),
            ("indexOf", [Value::Str(needle)]) => {
                let pos = s
                    .find(needle.as_ref().as_str())
                    .map(|byte| s[..byte].chars().count() as i64)
                    .unwrap_or(-1);
                Ok(Value::Int(pos))
            }
            ("toUpperCase", []) => Ok(Value::str(s.to_uppercase())),
            ("toLowerCase", []) => Ok(Value::str(s.to_lowercase())),
            ("trim", []) => Ok(Value::str(s.trim().to_string())),
            ("replace", [Value::Str(from), Value::Str(to)]) => {
                if from.is_empty() {
                    return self.runtime("replace with an empty pattern");
                }
                Ok(Value::str(
                    s.replace(from.as_ref().as_str(), to.as_ref().as_str()),
                ))
            }
            ("toString", []) => Ok(Value::Str(Rc::clone(s))),
            _ => self.runtime(format!("string has no method '{name}' with that arity")),
        }
    }

    /// Raw textual rendering. May execute user `toString` methods.
    pub fn render_raw(&mut self, v: &Value) -> Result<String, LangError> {
        self.tick()?;
        Ok(match v {
            Value::Null => "null".to_string(),
            Value::Void => "void".to_string(),
            Value::Int(n) => n.to_string(),
            Value::Float(f) => float_text(*f),
            Value::Bool(b) => b.to_string(),
            Value::Str(s) => s.as_ref().clone(),
            Value::List(list) => {
                let items = list.borrow().clone();
                let mut parts = Vec::with_capacity(items.len());
                for item in &items {
                    parts.push(self.render_raw(item)?);
                }
                format!("[{}]", parts.join(", "))
            }
            Value::Obj(obj) => {
                let class_name = obj.class.clone();
                let has_user = self
                    .program
                    .class(&class_name)
                    .map(|c| c.method("toString").is_some())
                    .unwrap_or(false);
                if has_user {
                    match self.invoke_method(Rc::clone(obj), "toString", Vec::new(), true)? {
                        Value::Str(s) => s.as_ref().clone(),
                        other => {
                            return self.runtime(format!(
                                "toString of {class_name} returned {}",
                                other.type_name()
                            ))
                        }
                    }
                } else {
                    format!("{}@{:x}", class_name, obj.id)
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_program_file, parse_test_file};

    fn counter_program() -> Program {
        let src = r#"
class Counter {
    pub count: int = 0;

    pub fn add(x: int) {
        if (x < 0) {
            throw "negative increment";
        }
        this.count = this.count + x;
    }

    pub fn getCount(): int {
        return this.count;
    }

    pub fn isEmpty(): bool {
        return this.count == 0;
    }

    pub fn toString(): string {
        return "Counter[" + this.count + "]";
    }
}
"#;
        Program {
            files: vec![parse_program_file("Counter", src).unwrap()],
        }
    }

    fn run(program: &Program, test_src: &str, entry: &str) -> (TestRun, Vec<(String, Observed)>) {
        let file = parse_test_file("T", test_src).unwrap();
        let checks = file.imports.iter().any(|i| i == "checks");
        let mut set = TestSet::new();
        for t in &file.tests {
            set.insert(t, checks);
        }
        let env = ExecEnv::base();
        let mut records = Vec::new();
        let mut sink = |point: &str, obs: Observed| records.push((point.to_string(), obs));
        let mut machine = Machine::new(program, &set, &env, 7, RunLimits::default())
            .with_observe_sink(&mut sink);
        let run = machine.run_entry(entry);
        drop(machine);
        (run, records)
    }

    #[test]
    fn arithmetic_and_assertions_pass() {
        let program = counter_program();
        let src = r#"import checks;

test t() {
    let c: Counter = new Counter();
    c.add(4);
    c.add(2);
    assertEquals(6, c.getCount());
    assertFalse(c.isEmpty());
}
"#;
        let (run, _) = run(&program, src, "t");
        assert_eq!(run.outcome, Ok(()));
        assert_eq!(run.tests_invoked, 1);
    }

    #[test]
    fn failed_assertion_reports_values() {
        let program = counter_program();
        let src = "import checks;\ntest t() { let c: Counter = new Counter(); assertEquals(1, c.getCount()); }";
        let (run, _) = run(&program, src, "t");
        match run.outcome {
            Err(LangError::AssertionFailed { message }) => {
                assert_eq!(message, "expected 1 but was 0");
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn thrown_exceptions_carry_messages() {
        let program = counter_program();
        let src = "test t() { let c: Counter = new Counter(); c.add(-1); }";
        let (run, _) = run(&program, src, "t");
        assert_eq!(
            run.outcome,
            Err(LangError::Thrown {
                message: "negative increment".to_string()
            })
        );
    }

    #[test]
    fn observe_guards_throws_and_continues() {
        let program = counter_program();
        let src = r#"test t() {
    let c: Counter = new Counter();
    observe("p0", c.getCount());
    observe("p1", c.add(-1));
    observe("p2", c.isEmpty());
}"#;
        let (run, records) = run(&program, src, "t");
        assert_eq!(run.outcome, Ok(()));
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].1, Observed::Value(ObsValue::Int(0)));
        assert_eq!(
            records[1].1,
            Observed::Thrown("negative increment".to_string())
        );
        assert_eq!(records[2].1, Observed::Value(ObsValue::Bool(true)));
    }

    #[test]
    fn helper_tests_count_invocations() {
        let program = counter_program();
        let src = r#"import checks;

test checkPositive(c: Counter) {
    assertTrue(c.getCount() >= 0);
}

test t() {
    let c: Counter = new Counter();
    c.add(1);
    checkPositive(c);
    checkPositive(c);
}
"#;
        let (run, _) = run(&program, src, "t");
        assert_eq!(run.outcome, Ok(()));
        assert_eq!(run.tests_invoked, 3);
    }

    #[test]
    fn entropy_is_seed_deterministic() {
        let program = counter_program();
        let file = parse_test_file("T", "test t() { observe(\"p\", randomInt()); }").unwrap();
        let mut set = TestSet::new();
        for t in &file.tests {
            set.insert(t, false);
        }
        let env = ExecEnv::base();
        let mut grab = |seed: u64| {
            let mut got = Vec::new();
            let mut sink = |_: &str, obs: Observed| got.push(obs);
            let mut machine =
                Machine::new(&program, &set, &env, seed, RunLimits::default())
                    .with_observe_sink(&mut sink);
            machine.run_entry("t");
            drop(machine);
            got
        };
        assert_eq!(grab(41), grab(41));
        assert_ne!(grab(41), grab(42));
    }

    #[test]
    fn default_rendering_scrub_material_looks_like_a_hash() {
        let program = Program {
            files: vec![parse_program_file("Plain", "class Plain { pub x: int = 0; }").unwrap()],
        };
        let (_, records) = run(&program, "test t() { let p: Plain = new Plain(); observe(\"p\", p); }", "t");
        match &records[0].1 {
            Observed::Value(ObsValue::ObjText(text)) => {
                assert!(text.starts_with("Plain@"), "got {text}");
            }
            other => panic!("unexpected observation {other:?}"),
        }
    }

    #[test]
    fn step_limit_stops_infinite_loops() {
        let src = "class Spin { pub fn go() { while (true) { this.noop(); } } fn noop() { } }";
        let program = Program {
            files: vec![parse_program_file("Spin", src).unwrap()],
        };
        let file = parse_test_file("T", "test t() { let s: Spin = new Spin(); s.go(); }").unwrap();
        let mut set = TestSet::new();
        for t in &file.tests {
            set.insert(t, false);
        }
        let env = ExecEnv::base();
        let limits = RunLimits {
            step_limit: 10_000,
            wall: None,
        };
        let mut machine = Machine::new(&program, &set, &env, 1, limits);
        let run = machine.run_entry("t");
        assert_eq!(run.outcome, Err(LangError::StepLimit));
    }

    #[test]
    fn unbounded_recursion_fails_instead_of_exhausting_the_stack() {
        let src = "class Loop { pub fn spin(x: int): int { return this.spin(x); } }";
        let program = Program {
            files: vec![parse_program_file("Loop", src).unwrap()],
        };
        let file = parse_test_file("T", "test t() { let l: Loop = new Loop(); l.spin(1); }").unwrap();
        let mut set = TestSet::new();
        for t in &file.tests {
            set.insert(t, false);
        }
        let env = ExecEnv::base();
        let mut machine = Machine::new(&program, &set, &env, 1, RunLimits::default());
        let run = machine.run_entry("t");
        match run.outcome {
            Err(LangError::Runtime { message }) => {
                assert!(message.contains("call depth"), "got {message}");
            }
            other => panic!("expected a call depth error, got {other:?}"),
        }
    }

    #[test]
    fn coverage_marks_reach_the_sink() {
        let src = "class A { pub fn f(): int { __cov(0); let x: int = 1; __cov(1); return x; } }";
        let program = Program {
            files: vec![parse_program_file("A", src).unwrap()],
        };
        let file = parse_test_file("T", "test t() { let a: A = new A(); a.f(); }").unwrap();
        let mut set = TestSet::new();
        for t in &file.tests {
            set.insert(t, false);
        }
        let env = ExecEnv::base();
        let mut hits = Vec::new();
        let mut sink = |id: u32| hits.push(id);
        let mut machine = Machine::new(&program, &set, &env, 1, RunLimits::default())
            .with_coverage_sink(&mut sink);
        machine.run_entry("t");
        drop(machine);
        assert_eq!(hits, vec![0, 1]);
    }

    #[test]
    fn lists_behave_like_sequences() {
        let src = r#"import checks;

test t() {
    let xs: List = new List();
    xs.add(1);
    xs.add(2);
    xs.add(1);
    assertEquals(3, xs.size());
    assertTrue(xs.remove(1));
    assertEquals(2, xs.get(0));
    assertEquals(1, xs.indexOf(1));
    observe("xs", xs);
}
"#;
        let program = counter_program();
        let (run, records) = run(&program, src, "t");
        assert_eq!(run.outcome, Ok(()));
        assert_eq!(
            records[0].1,
            Observed::Value(ObsValue::ListText("[2, 1]".to_string()))
        );
    }
}
