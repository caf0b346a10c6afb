//! Recursive-descent parser for program files and test files.
//!
//! Test files accept a deliberately narrow statement subset: local `let`
//! declarations, expression statements (method/function calls), one level of
//! `for`/`if` nesting, and injected `observe` statements. Anything else that
//! the grammar knows but the subset rejects surfaces as
//! [`ParseError::Unsupported`] rather than a generic syntax error.

use crate::ast::*;
use crate::error::{ParseError, Pos};
use crate::token::{lex, Spanned, Tok};

pub fn parse_program_file(name: &str, src: &str) -> Result<SourceFile, ParseError> {
    let toks = lex(name, src)?;
    let mut p = Parser::new(name, toks);
    let mut classes = Vec::new();
    while !p.done() {
        classes.push(p.class_decl()?);
    }
    Ok(SourceFile {
        name: name.to_string(),
        classes,
    })
}

pub fn parse_test_file(name: &str, src: &str) -> Result<TestFile, ParseError> {
    let toks = lex(name, src)?;
    let mut p = Parser::new(name, toks);
    let mut imports = Vec::new();
    while p.eat(&Tok::Import) {
        let id = p.ident("import name")?;
        p.expect(&Tok::Semi)?;
        imports.push(id);
    }
    let mut tests = Vec::new();
    while !p.done() {
        tests.push(p.test_decl()?);
    }
    Ok(TestFile {
        name: name.to_string(),
        imports,
        tests,
    })
}

struct Parser {
    file: String,
    toks: Vec<Spanned>,
    idx: usize,
}

impl Parser {
    fn new(file: &str, toks: Vec<Spanned>) -> Self {
        Parser {
            file: file.to_string(),
            toks,
            idx: 0,
        }
    }

    fn done(&self) -> bool {
        self.idx >= self.toks.len()
    }

    fn pos(&self) -> Pos {
        self.toks
            .get(self.idx.min(self.toks.len().saturating_sub(1)))
            .map(|t| t.pos)
            .unwrap_or(Pos { line: 1, col: 1 })
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            file: self.file.clone(),
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn unsupported<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Unsupported {
            file: self.file.clone(),
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|t| &t.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.idx + 1).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|t| t.tok.clone());
        self.idx += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.syntax(format!("expected {tok:?}, found {:?}", self.peek()))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                if name.starts_with("__") {
                    return self.unsupported(format!(
                        "identifier '{name}' uses the reserved '__' prefix"
                    ));
                }
                self.idx += 1;
                Ok(name)
            }
            other => self.syntax(format!("expected {what}, found {other:?}")),
        }
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        match self.next() {
            Some(Tok::Ident(name)) => Ok(match name.as_str() {
                "int" => Type::Int,
                "float" => Type::Float,
                "bool" => Type::Bool,
                "string" => Type::Str,
                "List" => Type::List,
                "void" => Type::Void,
                _ => Type::Class(name),
            }),
            other => self.syntax(format!("expected type, found {other:?}")),
        }
    }

    // -- program side ------------------------------------------------------

    fn class_decl(&mut self) -> Result<ClassDecl, ParseError> {
        self.expect(&Tok::Class)?;
        let name = self.ident("class name")?;
        self.expect(&Tok::LBrace)?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        while !self.eat(&Tok::RBrace) {
            let public = self.eat(&Tok::Pub);
            if self.eat(&Tok::Fn) {
                methods.push(self.method_decl(public)?);
            } else {
                fields.push(self.field_decl(public)?);
            }
        }
        Ok(ClassDecl {
            name,
            fields,
            methods,
        })
    }

    fn field_decl(&mut self, public: bool) -> Result<FieldDecl, ParseError> {
        let name = self.ident("field name")?;
        self.expect(&Tok::Colon)?;
        let ty = self.ty()?;
        let init = if self.eat(&Tok::Assign) {
            Some(self.literal_only()?)
        } else {
            None
        };
        self.expect(&Tok::Semi)?;
        Ok(FieldDecl {
            public,
            name,
            ty,
            init,
        })
    }

    fn literal_only(&mut self) -> Result<Lit, ParseError> {
        let neg = self.eat(&Tok::Minus);
        match self.next() {
            Some(Tok::Int(v)) => Ok(Lit::Int(if neg { -v } else { v })),
            Some(Tok::Float(v)) => Ok(Lit::Float(if neg { -v } else { v })),
            Some(Tok::Str(s)) if !neg => Ok(Lit::Str(s)),
            Some(Tok::True) if !neg => Ok(Lit::Bool(true)),
            Some(Tok::False) if !neg => Ok(Lit::Bool(false)),
            Some(Tok::Null) if !neg => Ok(Lit::Null),
            other => self.syntax(format!(
                "field initializers must be literals, found {other:?}"
            )),
        }
    }

    fn method_decl(&mut self, public: bool) -> Result<MethodDecl, ParseError> {
        let name = self.ident("method name")?;
        self.expect(&Tok::LParen)?;
        let params = self.params()?;
        let ret = if self.eat(&Tok::Colon) {
            self.ty()?
        } else {
            Type::Void
        };
        let body = self.pbody()?;
        Ok(MethodDecl {
            public,
            name,
            params,
            ret,
            body,
        })
    }

    fn params(&mut self) -> Result<Vec<Param>, ParseError> {
        let mut params = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(params);
        }
        loop {
            let name = self.ident("parameter name")?;
            self.expect(&Tok::Colon)?;
            let ty = self.ty()?;
            params.push(Param { name, ty });
            if self.eat(&Tok::RParen) {
                return Ok(params);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    fn pbody(&mut self) -> Result<Vec<PStmt>, ParseError> {
        self.expect(&Tok::LBrace)?;
        let mut body = Vec::new();
        while !self.eat(&Tok::RBrace) {
            body.push(self.pstmt()?);
        }
        Ok(body)
    }

    fn pstmt(&mut self) -> Result<PStmt, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Let) => {
                self.idx += 1;
                let name = self.ident("variable name")?;
                self.expect(&Tok::Colon)?;
                let ty = self.ty()?;
                self.expect(&Tok::Assign)?;
                let init = self.expr()?;
                self.expect(&Tok::Semi)?;
                Ok(PStmt::Let { name, ty, init })
            }
            Some(Tok::Return) => {
                self.idx += 1;
                if self.eat(&Tok::Semi) {
                    Ok(PStmt::Return(None))
                } else {
                    let e = self.expr()?;
                    self.expect(&Tok::Semi)?;
                    Ok(PStmt::Return(Some(e)))
                }
            }
            Some(Tok::Throw) => {
                self.idx += 1;
                let e = self.expr()?;
                self.expect(&Tok::Semi)?;
                Ok(PStmt::Throw(e))
            }
            Some(Tok::If) => {
                self.idx += 1;
                self.expect(&Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(&Tok::RParen)?;
                let then = self.pbody()?;
                let els = if self.eat(&Tok::Else) {
                    self.pbody()?
                } else {
                    Vec::new()
                };
                Ok(PStmt::If { cond, then, els })
            }
            Some(Tok::While) => {
                self.idx += 1;
                self.expect(&Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(&Tok::RParen)?;
                let body = self.pbody()?;
                Ok(PStmt::While { cond, body })
            }
            Some(Tok::For) => {
                self.idx += 1;
                let var = self.ident("loop variable")?;
                self.expect(&Tok::In)?;
                let from = self.expr()?;
                self.expect(&Tok::DotDot)?;
                let to = self.expr()?;
                let body = self.pbody()?;
                Ok(PStmt::For {
                    var,
                    from,
                    to,
                    body,
                })
            }
            Some(Tok::Ident(name)) if name == "__cov" => {
                self.idx += 1;
                self.expect(&Tok::LParen)?;
                let id = match self.next() {
                    Some(Tok::Int(v)) if v >= 0 => v as u32,
                    other => return self.syntax(format!("__cov expects an id, found {other:?}")),
                };
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Semi)?;
                Ok(PStmt::CovMark(id))
            }
            Some(Tok::This) if self.peek2() == Some(&Tok::Dot) => {
                // this.f = e;  or  this.m(...);
                let e = self.expr()?;
                if self.eat(&Tok::Assign) {
                    let field = match e {
                        Expr::Field { base, name } if *base == Expr::This => name,
                        _ => return self.syntax("only 'this.<field>' can be assigned"),
                    };
                    let value = self.expr()?;
                    self.expect(&Tok::Semi)?;
                    Ok(PStmt::Assign {
                        target: LValue::ThisField(field),
                        value,
                    })
                } else {
                    self.expect(&Tok::Semi)?;
                    Ok(PStmt::Expr(e))
                }
            }
            Some(Tok::Ident(_)) if self.peek2() == Some(&Tok::Assign) => {
                let name = self.ident("variable name")?;
                self.expect(&Tok::Assign)?;
                let value = self.expr()?;
                self.expect(&Tok::Semi)?;
                Ok(PStmt::Assign {
                    target: LValue::Var(name),
                    value,
                })
            }
            _ => {
                let e = self.expr()?;
                self.expect(&Tok::Semi)?;
                Ok(PStmt::Expr(e))
            }
        }
    }

    // -- test side ----------------------------------------------------------

    fn test_decl(&mut self) -> Result<RawTest, ParseError> {
        self.expect(&Tok::Test)?;
        let name = self.ident("test name")?;
        self.expect(&Tok::LParen)?;
        let params = self.params()?;
        self.expect(&Tok::LBrace)?;
        let mut body = Vec::new();
        while !self.eat(&Tok::RBrace) {
            body.push(self.tstmt(0)?);
        }
        Ok(RawTest { name, params, body })
    }

    fn tstmt(&mut self, depth: u32) -> Result<TStmt, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Let) => {
                self.idx += 1;
                let name = self.ident("variable name")?;
                self.expect(&Tok::Colon)?;
                let ty = self.ty()?;
                self.expect(&Tok::Assign)?;
                let init = self.expr()?;
                self.expect(&Tok::Semi)?;
                Ok(TStmt::Let { name, ty, init })
            }
            Some(Tok::Observe) => {
                self.idx += 1;
                self.expect(&Tok::LParen)?;
                let point = match self.next() {
                    Some(Tok::Str(s)) => s,
                    other => {
                        return self.syntax(format!(
                            "observe expects a point id string, found {other:?}"
                        ))
                    }
                };
                self.expect(&Tok::Comma)?;
                let value = self.expr()?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Semi)?;
                Ok(TStmt::Observe { point, value })
            }
            Some(Tok::For) => {
                if depth >= 1 {
                    return self.unsupported("tests allow only one level of for/if nesting");
                }
                self.idx += 1;
                let var = self.ident("loop variable")?;
                self.expect(&Tok::In)?;
                let from = self.expr()?;
                self.expect(&Tok::DotDot)?;
                let to = self.expr()?;
                self.expect(&Tok::LBrace)?;
                let mut body = Vec::new();
                while !self.eat(&Tok::RBrace) {
                    body.push(self.tstmt(depth + 1)?);
                }
                Ok(TStmt::For {
                    var,
                    from,
                    to,
                    body,
                })
            }
            Some(Tok::If) => {
                if depth >= 1 {
                    return self.unsupported("tests allow only one level of for/if nesting");
                }
                self.idx += 1;
                self.expect(&Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::LBrace)?;
                let mut then = Vec::new();
                while !self.eat(&Tok::RBrace) {
                    then.push(self.tstmt(depth + 1)?);
                }
                let mut els = Vec::new();
                if self.eat(&Tok::Else) {
                    self.expect(&Tok::LBrace)?;
                    while !self.eat(&Tok::RBrace) {
                        els.push(self.tstmt(depth + 1)?);
                    }
                }
                Ok(TStmt::If { cond, then, els })
            }
            Some(Tok::While) => self.unsupported("while loops are not part of the test subset"),
            Some(Tok::Return) => self.unsupported("return is not part of the test subset"),
            Some(Tok::Throw) => self.unsupported("throw is not part of the test subset"),
            Some(Tok::Ident(_)) if self.peek2() == Some(&Tok::Assign) => {
                self.unsupported("assignments are not part of the test subset")
            }
            _ => {
                let e = self.expr()?;
                self.expect(&Tok::Semi)?;
                Ok(TStmt::Expr(e))
            }
        }
    }

    // -- expressions ---------------------------------------------------------

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.and_expr()?;
            lhs = Expr::Binary {
                op: BinOp::Or,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.eq_expr()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.eq_expr()?;
            lhs = Expr::Binary {
                op: BinOp::And,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn eq_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        loop {
            let op = if self.eat(&Tok::Eq) {
                BinOp::Eq
            } else if self.eat(&Tok::Ne) {
                BinOp::Ne
            } else {
                return Ok(lhs);
            };
            let rhs = self.cmp_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.add_expr()?;
        loop {
            let op = if self.eat(&Tok::Lt) {
                BinOp::Lt
            } else if self.eat(&Tok::Le) {
                BinOp::Le
            } else if self.eat(&Tok::Gt) {
                BinOp::Gt
            } else if self.eat(&Tok::Ge) {
                BinOp::Ge
            } else {
                return Ok(lhs);
            };
            let rhs = self.add_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = if self.eat(&Tok::Plus) {
                BinOp::Add
            } else if self.eat(&Tok::Minus) {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = if self.eat(&Tok::Star) {
                BinOp::Mul
            } else if self.eat(&Tok::Slash) {
                BinOp::Div
            } else if self.eat(&Tok::Percent) {
                BinOp::Rem
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Bang) {
            let e = self.unary_expr()?;
            return Ok(Expr::Unary {
                op: UnOp::Not,
                expr: Box::new(e),
            });
        }
        if self.eat(&Tok::Minus) {
            // fold '-<numeric literal>' into a signed literal so transformation
            // operates on the value the author wrote; anything else (including
            // a parenthesized literal) stays an explicit negation
            match self.peek() {
                Some(Tok::Int(v)) => {
                    let v = *v;
                    self.idx += 1;
                    return self.postfix_tail(Expr::Lit(Lit::Int(-v)));
                }
                Some(Tok::Float(v)) => {
                    let v = *v;
                    self.idx += 1;
                    return self.postfix_tail(Expr::Lit(Lit::Float(-v)));
                }
                _ => {}
            }
            let e = self.unary_expr()?;
            return Ok(Expr::Unary {
                op: UnOp::Neg,
                expr: Box::new(e),
            });
        }
        self.postfix_expr()
    }

    fn postfix_expr(&mut self) -> Result<Expr, ParseError> {
        let e = self.primary()?;
        self.postfix_tail(e)
    }

    fn postfix_tail(&mut self, start: Expr) -> Result<Expr, ParseError> {
        let mut e = start;
        while self.eat(&Tok::Dot) {
            let name = self.ident("member name")?;
            if self.eat(&Tok::LParen) {
                let args = self.args()?;
                e = Expr::Call {
                    base: Box::new(e),
                    name,
                    args,
                };
            } else {
                e = Expr::Field {
                    base: Box::new(e),
                    name,
                };
            }
        }
        Ok(e)
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.idx += 1;
                Ok(Expr::Lit(Lit::Int(v)))
            }
            Some(Tok::Float(v)) => {
                self.idx += 1;
                Ok(Expr::Lit(Lit::Float(v)))
            }
            Some(Tok::Str(s)) => {
                self.idx += 1;
                Ok(Expr::Lit(Lit::Str(s)))
            }
            Some(Tok::True) => {
                self.idx += 1;
                Ok(Expr::Lit(Lit::Bool(true)))
            }
            Some(Tok::False) => {
                self.idx += 1;
                Ok(Expr::Lit(Lit::Bool(false)))
            }
            Some(Tok::Null) => {
                self.idx += 1;
                Ok(Expr::Lit(Lit::Null))
            }
            Some(Tok::This) => {
                self.idx += 1;
                Ok(Expr::This)
            }
            Some(Tok::New) => {
                self.idx += 1;
                let class = match self.next() {
                    Some(Tok::Ident(name)) => name,
                    other => return self.syntax(format!("expected class name, found {other:?}")),
                };
                self.expect(&Tok::LParen)?;
                let args = self.args()?;
                Ok(Expr::New { class, args })
            }
            Some(Tok::LParen) => {
                self.idx += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if name.starts_with("__") {
                    return self
                        .unsupported(format!("identifier '{name}' uses the reserved '__' prefix"));
                }
                self.idx += 1;
                if self.eat(&Tok::LParen) {
                    let args = self.args()?;
                    Ok(Expr::Free { name, args })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            other => self.syntax(format!("expected expression, found {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_class_with_fields_and_methods() {
        let src = r#"
class Counter {
    pub count: int = 0;
    limit: int = 10;

    pub fn getCount(): int {
        return this.count;
    }

    pub fn add(x: int) {
        if (x < 0) {
            throw "negative increment";
        }
        this.count = this.count + x;
    }
}
"#;
        let file = parse_program_file("Counter", src).unwrap();
        assert_eq!(file.classes.len(), 1);
        let class = &file.classes[0];
        assert_eq!(class.fields.len(), 2);
        assert!(class.fields[0].public);
        assert!(!class.fields[1].public);
        assert_eq!(class.methods.len(), 2);
        assert_eq!(class.methods[1].params[0].ty, Type::Int);
    }

    #[test]
    fn parses_a_test_file_with_imports_and_loop() {
        let src = r#"
import checks;

test addThree() {
    let c: Counter = new Counter();
    for i in 0..3 {
        c.add(2);
    }
    assertEquals(6, c.getCount());
}
"#;
        let file = parse_test_file("CounterTest", src).unwrap();
        assert_eq!(file.imports, vec!["checks".to_string()]);
        assert_eq!(file.tests.len(), 1);
        assert_eq!(file.tests[0].body.len(), 3);
    }

    #[test]
    fn rejects_nested_loops_in_tests() {
        let src = "test t() { for i in 0..2 { for j in 0..2 { x.f(); } } }";
        let err = parse_test_file("T", src).unwrap_err();
        assert!(matches!(err, ParseError::Unsupported { .. }));
    }

    #[test]
    fn rejects_assignment_in_tests() {
        let src = "test t() { let x: int = 1; x = 2; }";
        let err = parse_test_file("T", src).unwrap_err();
        assert!(matches!(err, ParseError::Unsupported { .. }));
    }

    #[test]
    fn rejects_reserved_identifiers() {
        let err = parse_test_file("T", "test t() { let __x: int = 1; }").unwrap_err();
        assert!(matches!(err, ParseError::Unsupported { .. }));
    }

    #[test]
    fn folds_negative_literals() {
        let file = parse_test_file("T", "test t() { let x: int = -5; }").unwrap();
        match &file.tests[0].body[0] {
            TStmt::Let { init, .. } => assert_eq!(*init, Expr::Lit(Lit::Int(-5))),
            other => panic!("unexpected statement {other:?}"),
        }
    }

    #[test]
    fn parses_observe_statements() {
        let file = parse_test_file("T", r#"test t() { observe("p1", c.getCount()); }"#).unwrap();
        match &file.tests[0].body[0] {
            TStmt::Observe { point, .. } => assert_eq!(point, "p1"),
            other => panic!("unexpected statement {other:?}"),
        }
    }

    #[test]
    fn cov_marks_parse_in_program_files() {
        let src = "class A { pub fn f() { __cov(3); return; } }";
        let file = parse_program_file("A", src).unwrap();
        assert_eq!(file.classes[0].methods[0].body[0], PStmt::CovMark(3));
    }
}
