//! Canonical source renderer. Rendering then re-parsing any tree produced by
//! the parser yields an equal tree; generated and patched trees go through the
//! same path so everything on disk stays parseable.

use crate::ast::*;

/// A node that cannot be expressed in surface syntax (a float outside the
/// plain-decimal range, a string with unescapable characters).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unrenderable(pub String);

impl std::fmt::Display for Unrenderable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unrenderable node: {}", self.0)
    }
}

impl std::error::Error for Unrenderable {}

/// Float formatting shared by the renderer and observation canonicalization:
/// integral values keep one decimal, everything else uses the shortest
/// round-trip form.
pub fn float_text(v: f64) -> String {
    if v.is_nan() {
        return "NaN".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "Infinity" } else { "-Infinity" }.to_string();
    }
    if v == v.trunc() && v.abs() < 1e16 {
        return format!("{v:.1}");
    }
    format!("{v}")
}

/// Source form of a float literal; `None` for NaN and the infinities, which
/// the grammar cannot spell. Finite values always render positionally and a
/// `.0` suffix keeps integral magnitudes lexing as floats.
pub fn float_src(v: f64) -> Option<String> {
    if !v.is_finite() {
        return None;
    }
    let text = float_text(v);
    Some(if text.contains('.') {
        text
    } else {
        format!("{text}.0")
    })
}

pub fn escape_str(s: &str) -> Result<String, Unrenderable> {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c if (c as u32) < 0x20 => {
                return Err(Unrenderable(format!(
                    "control character U+{:04X} in string literal",
                    c as u32
                )))
            }
            c => out.push(c),
        }
    }
    Ok(out)
}

fn lit(l: &Lit) -> Result<String, Unrenderable> {
    Ok(match l {
        Lit::Int(v) => v.to_string(),
        Lit::Float(v) => float_src(*v).ok_or_else(|| Unrenderable(format!("float {v}")))?,
        Lit::Bool(v) => v.to_string(),
        Lit::Str(s) => format!("\"{}\"", escape_str(s)?),
        Lit::Null => "null".to_string(),
    })
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne => 3,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
    }
}

fn op_text(op: BinOp) -> &'static str {
    match op {
        BinOp::Or => "||",
        BinOp::And => "&&",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Rem => "%",
    }
}

pub fn expr(e: &Expr) -> Result<String, Unrenderable> {
    expr_prec(e, 0)
}

fn expr_prec(e: &Expr, min: u8) -> Result<String, Unrenderable> {
    Ok(match e {
        Expr::Lit(l) => lit(l)?,
        Expr::Var(name) => name.clone(),
        Expr::This => "this".to_string(),
        Expr::Field { base, name } => format!("{}.{name}", expr_prec(base, 8)?),
        Expr::Call { base, name, args } => {
            format!("{}.{name}({})", expr_prec(base, 8)?, arg_list(args)?)
        }
        Expr::Free { name, args } => format!("{name}({})", arg_list(args)?),
        Expr::New { class, args } => format!("new {class}({})", arg_list(args)?),
        Expr::Unary { op, expr: inner } => {
            // an explicit negation of a numeric literal must keep its parens,
            // otherwise the parser folds "-5" back into a plain literal
            let fold_guard = matches!(op, UnOp::Neg)
                && matches!(**inner, Expr::Lit(Lit::Int(_)) | Expr::Lit(Lit::Float(_)));
            let text = expr_prec(inner, 7)?;
            let text = match op {
                UnOp::Not => format!("!{text}"),
                UnOp::Neg if fold_guard || text.starts_with('-') => format!("-({text})"),
                UnOp::Neg => format!("-{text}"),
            };
            if min > 7 {
                format!("({text})")
            } else {
                text
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = prec(*op);
            let text = format!(
                "{} {} {}",
                expr_prec(lhs, p)?,
                op_text(*op),
                expr_prec(rhs, p + 1)?
            );
            if p < min {
                format!("({text})")
            } else {
                text
            }
        }
    })
}

fn arg_list(args: &[Expr]) -> Result<String, Unrenderable> {
    let parts: Result<Vec<_>, _> = args.iter().map(expr).collect();
    Ok(parts?.join(", "))
}

fn indent(level: usize) -> String {
    "    ".repeat(level)
}

// ---------------------------------------------------------------------------
// Program files
// ---------------------------------------------------------------------------

pub fn program_file(file: &SourceFile) -> Result<String, Unrenderable> {
    let mut out = String::new();
    for (i, class) in file.classes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("class {} {{\n", class.name));
        for field in &class.fields {
            let vis = if field.public { "pub " } else { "" };
            let init = match &field.init {
                Some(l) => format!(" = {}", lit(l)?),
                None => String::new(),
            };
            out.push_str(&format!(
                "{}{vis}{}: {}{init};\n",
                indent(1),
                field.name,
                field.ty.name()
            ));
        }
        if !class.fields.is_empty() && !class.methods.is_empty() {
            out.push('\n');
        }
        for (mi, method) in class.methods.iter().enumerate() {
            if mi > 0 {
                out.push('\n');
            }
            let vis = if method.public { "pub " } else { "" };
            let params = method
                .params
                .iter()
                .map(|p| format!("{}: {}", p.name, p.ty.name()))
                .collect::<Vec<_>>()
                .join(", ");
            let ret = match &method.ret {
                Type::Void => String::new(),
                ty => format!(": {}", ty.name()),
            };
            out.push_str(&format!(
                "{}{vis}fn {}({params}){ret} {{\n",
                indent(1),
                method.name
            ));
            for stmt in &method.body {
                pstmt(&mut out, stmt, 2)?;
            }
            out.push_str(&format!("{}}}\n", indent(1)));
        }
        out.push_str("}\n");
    }
    Ok(out)
}

fn pstmt(out: &mut String, stmt: &PStmt, level: usize) -> Result<(), Unrenderable> {
    let pad = indent(level);
    match stmt {
        PStmt::Let { name, ty, init } => {
            out.push_str(&format!("{pad}let {name}: {} = {};\n", ty.name(), expr(init)?));
        }
        PStmt::Assign { target, value } => {
            let lhs = match target {
                LValue::Var(name) => name.clone(),
                LValue::ThisField(name) => format!("this.{name}"),
            };
            out.push_str(&format!("{pad}{lhs} = {};\n", expr(value)?));
        }
        PStmt::Expr(e) => out.push_str(&format!("{pad}{};\n", expr(e)?)),
        PStmt::Return(None) => out.push_str(&format!("{pad}return;\n")),
        PStmt::Return(Some(e)) => out.push_str(&format!("{pad}return {};\n", expr(e)?)),
        PStmt::Throw(e) => out.push_str(&format!("{pad}throw {};\n", expr(e)?)),
        PStmt::If { cond, then, els } => {
            out.push_str(&format!("{pad}if ({}) {{\n", expr(cond)?));
            for s in then {
                pstmt(out, s, level + 1)?;
            }
            if els.is_empty() {
                out.push_str(&format!("{pad}}}\n"));
            } else {
                out.push_str(&format!("{pad}}} else {{\n"));
                for s in els {
                    pstmt(out, s, level + 1)?;
                }
                out.push_str(&format!("{pad}}}\n"));
            }
        }
        PStmt::While { cond, body } => {
            out.push_str(&format!("{pad}while ({}) {{\n", expr(cond)?));
            for s in body {
                pstmt(out, s, level + 1)?;
            }
            out.push_str(&format!("{pad}}}\n"));
        }
        PStmt::For {
            var,
            from,
            to,
            body,
        } => {
            out.push_str(&format!(
                "{pad}for {var} in {}..{} {{\n",
                expr(from)?,
                expr(to)?
            ));
            for s in body {
                pstmt(out, s, level + 1)?;
            }
            out.push_str(&format!("{pad}}}\n"));
        }
        PStmt::CovMark(id) => out.push_str(&format!("{pad}__cov({id});\n")),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Test files
// ---------------------------------------------------------------------------

pub fn test_file(file: &TestFile) -> Result<String, Unrenderable> {
    let mut out = String::new();
    for import in &file.imports {
        out.push_str(&format!("import {import};\n"));
    }
    if !file.imports.is_empty() {
        out.push('\n');
    }
    for (i, test) in file.tests.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&render_test(test)?);
    }
    Ok(out)
}

pub fn render_test(test: &RawTest) -> Result<String, Unrenderable> {
    let mut out = String::new();
    let params = test
        .params
        .iter()
        .map(|p| format!("{}: {}", p.name, p.ty.name()))
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!("test {}({params}) {{\n", test.name));
    for stmt in &test.body {
        tstmt(&mut out, stmt, 1)?;
    }
    out.push_str("}\n");
    Ok(out)
}

fn tstmt(out: &mut String, stmt: &TStmt, level: usize) -> Result<(), Unrenderable> {
    let pad = indent(level);
    match stmt {
        TStmt::Let { name, ty, init } => {
            out.push_str(&format!("{pad}let {name}: {} = {};\n", ty.name(), expr(init)?));
        }
        TStmt::Expr(e) => out.push_str(&format!("{pad}{};\n", expr(e)?)),
        TStmt::For {
            var,
            from,
            to,
            body,
        } => {
            out.push_str(&format!(
                "{pad}for {var} in {}..{} {{\n",
                expr(from)?,
                expr(to)?
            ));
            for s in body {
                tstmt(out, s, level + 1)?;
            }
            out.push_str(&format!("{pad}}}\n"));
        }
        TStmt::If { cond, then, els } => {
            out.push_str(&format!("{pad}if ({}) {{\n", expr(cond)?));
            for s in then {
                tstmt(out, s, level + 1)?;
            }
            if els.is_empty() {
                out.push_str(&format!("{pad}}}\n"));
            } else {
                out.push_str(&format!("{pad}}} else {{\n"));
                for s in els {
                    tstmt(out, s, level + 1)?;
                }
                out.push_str(&format!("{pad}}}\n"));
            }
        }
        TStmt::Observe { point, value } => {
            out.push_str(&format!(
                "{pad}observe(\"{}\", {});\n",
                escape_str(point)?,
                expr(value)?
            ));
        }
    }
    Ok(())
}
