//! Render/parse round-trip properties over generated syntax trees.
//!
//! Rendering is the retraction: for any tree we can render, parsing the text
//! and rendering again must reproduce the text byte for byte. Literal folding
//! means the tree itself is not always preserved (`-(5)` folds to `-5`), so
//! the properties compare rendered text, which is what every downstream
//! consumer stores and hashes.

use minilang::ast::*;
use minilang::parser::{parse_program_file, parse_test_file};
use minilang::render;
use proptest::prelude::*;

const RESERVED: &[&str] = &[
    "class", "pub", "fn", "let", "if", "else", "for", "while", "in", "return", "throw", "new",
    "this", "true", "false", "null", "test", "import", "observe", "int", "float", "bool",
    "string", "void", "List",
];

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9]{0,5}".prop_filter("reserved word", |s| !RESERVED.contains(&s.as_str()))
}

fn str_text() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![
            4 => proptest::char::range(' ', '~'),
            1 => prop_oneof![Just('\n'), Just('\t'), Just('\r'), Just('\\'), Just('"'), Just('\0')],
        ],
        0..8,
    )
    .prop_map(|cs| cs.into_iter().collect())
}

fn lit() -> impl Strategy<Value = Lit> {
    prop_oneof![
        any::<i64>()
            .prop_filter("minimum has no literal spelling", |v| *v != i64::MIN)
            .prop_map(Lit::Int),
        (any::<i32>(), 1i32..1000).prop_map(|(n, d)| Lit::Float(n as f64 / d as f64)),
        any::<bool>().prop_map(Lit::Bool),
        str_text().prop_map(Lit::Str),
        Just(Lit::Null),
    ]
}

fn ty() -> impl Strategy<Value = Type> {
    prop_oneof![
        Just(Type::Int),
        Just(Type::Float),
        Just(Type::Bool),
        Just(Type::Str),
        Just(Type::List),
        ident().prop_map(Type::Class),
    ]
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop_oneof![
        Just(BinOp::Or),
        Just(BinOp::And),
        Just(BinOp::Eq),
        Just(BinOp::Ne),
        Just(BinOp::Lt),
        Just(BinOp::Le),
        Just(BinOp::Gt),
        Just(BinOp::Ge),
        Just(BinOp::Add),
        Just(BinOp::Sub),
        Just(BinOp::Mul),
        Just(BinOp::Div),
        Just(BinOp::Rem),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        lit().prop_map(Expr::Lit),
        ident().prop_map(Expr::Var),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            (ident(), proptest::collection::vec(inner.clone(), 0..3))
                .prop_map(|(name, args)| Expr::Free { name, args }),
            (ident(), proptest::collection::vec(inner.clone(), 0..3))
                .prop_map(|(class, args)| Expr::New { class, args }),
            (inner.clone(), ident(), proptest::collection::vec(inner.clone(), 0..3)).prop_map(
                |(base, name, args)| Expr::Call {
                    base: Box::new(base),
                    name,
                    args,
                }
            ),
            (inner.clone(), ident()).prop_map(|(base, name)| Expr::Field {
                base: Box::new(base),
                name,
            }),
            (
                prop_oneof![Just(UnOp::Not), Just(UnOp::Neg)],
                inner.clone()
            )
                .prop_map(|(op, e)| Expr::Unary {
                    op,
                    expr: Box::new(e),
                }),
            (binop(), inner.clone(), inner).prop_map(|(op, lhs, rhs)| Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            }),
        ]
    })
}

// -- test files -------------------------------------------------------------

fn simple_tstmt() -> impl Strategy<Value = TStmt> {
    prop_oneof![
        (ident(), ty(), expr()).prop_map(|(name, ty, init)| TStmt::Let { name, ty, init }),
        expr().prop_map(TStmt::Expr),
        (str_text(), expr()).prop_map(|(point, value)| TStmt::Observe { point, value }),
    ]
}

fn tstmt() -> impl Strategy<Value = TStmt> {
    prop_oneof![
        3 => simple_tstmt(),
        1 => (
            ident(),
            expr(),
            expr(),
            proptest::collection::vec(simple_tstmt(), 1..3)
        )
            .prop_map(|(var, from, to, body)| TStmt::For {
                var,
                from,
                to,
                body,
            }),
        1 => (
            expr(),
            proptest::collection::vec(simple_tstmt(), 1..3),
            proptest::collection::vec(simple_tstmt(), 0..2)
        )
            .prop_map(|(cond, then, els)| TStmt::If { cond, then, els }),
    ]
}

prop_compose! {
    fn raw_test()(
        name in ident(),
        params in proptest::collection::vec((ident(), ty()), 0..3),
        body in proptest::collection::vec(tstmt(), 1..5),
    ) -> RawTest {
        RawTest {
            name,
            params: params.into_iter().map(|(name, ty)| Param { name, ty }).collect(),
            body,
        }
    }
}

prop_compose! {
    fn test_file()(
        imports in prop_oneof![Just(Vec::new()), Just(vec!["checks".to_string()])],
        tests in proptest::collection::vec(raw_test(), 1..4),
    ) -> TestFile {
        TestFile { name: "Generated".to_string(), imports, tests }
    }
}

// -- program files ----------------------------------------------------------

fn simple_pstmt() -> impl Strategy<Value = PStmt> {
    prop_oneof![
        (ident(), ty(), expr()).prop_map(|(name, ty, init)| PStmt::Let { name, ty, init }),
        (ident(), expr()).prop_map(|(name, value)| PStmt::Assign {
            target: LValue::Var(name),
            value,
        }),
        (ident(), expr()).prop_map(|(field, value)| PStmt::Assign {
            target: LValue::ThisField(field),
            value,
        }),
        expr().prop_map(PStmt::Expr),
        Just(PStmt::Return(None)),
        expr().prop_map(|e| PStmt::Return(Some(e))),
        expr().prop_map(PStmt::Throw),
        (0u32..100).prop_map(PStmt::CovMark),
    ]
}

fn pstmt() -> impl Strategy<Value = PStmt> {
    let simple = simple_pstmt();
    simple.prop_recursive(2, 16, 3, |inner| {
        prop_oneof![
            2 => simple_pstmt(),
            1 => (
                expr(),
                proptest::collection::vec(inner.clone(), 1..3),
                proptest::collection::vec(inner.clone(), 0..2)
            )
                .prop_map(|(cond, then, els)| PStmt::If { cond, then, els }),
            1 => (expr(), proptest::collection::vec(inner.clone(), 1..3))
                .prop_map(|(cond, body)| PStmt::While { cond, body }),
            1 => (
                ident(),
                expr(),
                expr(),
                proptest::collection::vec(inner, 1..3)
            )
                .prop_map(|(var, from, to, body)| PStmt::For { var, from, to, body }),
        ]
    })
}

prop_compose! {
    fn method()(
        public in any::<bool>(),
        name in ident(),
        params in proptest::collection::vec((ident(), ty()), 0..3),
        ret in prop_oneof![Just(Type::Void), ty().boxed().prop_map(|t| t)],
        body in proptest::collection::vec(pstmt(), 0..4),
    ) -> MethodDecl {
        MethodDecl {
            public,
            name,
            params: params.into_iter().map(|(name, ty)| Param { name, ty }).collect(),
            ret,
            body,
        }
    }
}

prop_compose! {
    fn field()(
        public in any::<bool>(),
        name in ident(),
        ty in ty(),
        init in proptest::option::of(lit()),
    ) -> FieldDecl {
        FieldDecl { public, name, ty, init }
    }
}

prop_compose! {
    fn class()(
        name in ident(),
        fields in proptest::collection::vec(field(), 0..3),
        methods in proptest::collection::vec(method(), 0..3),
    ) -> ClassDecl {
        ClassDecl { name, fields, methods }
    }
}

prop_compose! {
    fn source_file()(classes in proptest::collection::vec(class(), 1..3)) -> SourceFile {
        SourceFile { name: "Generated".to_string(), classes }
    }
}

fn subtree_size(stmt: &PStmt) -> usize {
    1 + stmt
        .children()
        .iter()
        .flat_map(|b| b.iter())
        .map(subtree_size)
        .sum::<usize>()
}

proptest! {
    #[test]
    fn rendered_test_files_reparse_to_the_same_text(file in test_file()) {
        let first = render::test_file(&file).expect("generated trees are renderable");
        let parsed = parse_test_file(&file.name, &first)
            .unwrap_or_else(|e| panic!("rendered text failed to parse: {e}\n{first}"));
        let second = render::test_file(&parsed).expect("parsed trees are renderable");
        prop_assert_eq!(first, second);
    }

    #[test]
    fn rendered_program_files_reparse_to_the_same_text(file in source_file()) {
        let first = render::program_file(&file).expect("generated trees are renderable");
        let parsed = parse_program_file(&file.name, &first)
            .unwrap_or_else(|e| panic!("rendered text failed to parse: {e}\n{first}"));
        let second = render::program_file(&parsed).expect("parsed trees are renderable");
        prop_assert_eq!(first, second);
    }

    #[test]
    fn every_enumerated_address_resolves_to_its_statement(file in source_file()) {
        for (addr, stmt) in enumerate_stmts(&file) {
            let got = get_stmt(&file, &addr);
            prop_assert_eq!(got.as_ref(), Some(stmt), "address {:?} did not resolve", addr);
        }
    }

    #[test]
    fn removing_a_statement_removes_exactly_its_subtree(
        file in source_file(),
        pick in any::<proptest::sample::Index>(),
    ) {
        let stmts = enumerate_stmts(&file);
        prop_assume!(!stmts.is_empty());
        let (addr, stmt) = {
            let (addr, stmt) = &stmts[pick.index(stmts.len())];
            (addr.clone(), (*stmt).clone())
        };
        let before = stmts.len();
        let mut edited = file.clone();
        prop_assert!(remove_stmt(&mut edited, &addr));
        let after = enumerate_stmts(&edited).len();
        prop_assert_eq!(after, before - subtree_size(&stmt));
    }

    #[test]
    fn inserting_after_a_statement_adds_one_entry(
        file in source_file(),
        pick in any::<proptest::sample::Index>(),
        mark in 1000u32..2000,
    ) {
        let stmts = enumerate_stmts(&file);
        prop_assume!(!stmts.is_empty());
        let addr = stmts[pick.index(stmts.len())].0.clone();
        let before = stmts.len();
        let mut edited = file.clone();
        prop_assert!(insert_after(&mut edited, &addr, PStmt::CovMark(mark)));
        let now = enumerate_stmts(&edited);
        prop_assert_eq!(now.len(), before + 1);
        prop_assert!(now.iter().any(|(_, s)| matches!(s, PStmt::CovMark(m) if *m == mark)));
    }
}
