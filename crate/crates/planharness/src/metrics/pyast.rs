//! Kind-labelled syntax trees for match-based scoring.
//!
//! The tree keeps node kinds (statement/expression variants, operators,
//! constant types) and drops identifier and literal values, so structural
//! comparison is invariant under consistent renaming.

use rustpython_parser::ast::{self, Constant, Expr, Stmt};
use rustpython_parser::{parse, Mode};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub kind: String,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    fn new(kind: impl Into<String>, children: Vec<TreeNode>) -> Self {
        TreeNode {
            kind: kind.into(),
            children,
        }
    }

    fn leaf(kind: impl Into<String>) -> Self {
        TreeNode::new(kind, Vec::new())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeNode::size).sum::<usize>()
    }

    /// Canonical serialization used as a subtree multiset key.
    pub fn fingerprint(&self) -> String {
        let mut out = String::new();
        self.write_fingerprint(&mut out);
        out
    }

    fn write_fingerprint(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.kind);
        for child in &self.children {
            out.push(' ');
            child.write_fingerprint(out);
        }
        out.push(')');
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxTree {
    pub root: TreeNode,
}

pub fn parse_syntax_tree(source: &str) -> Result<SyntaxTree> {
    let module = parse(source, Mode::Module, "<candidate>")
        .map_err(|e| Error::Other(format!("parse error: {e}")))?;
    let body = match &module {
        ast::Mod::Module(m) => &m.body,
        _ => return Err(Error::Other("expected a module".into())),
    };
    Ok(SyntaxTree {
        root: TreeNode::new("Module", body.iter().map(stmt_node).collect()),
    })
}

fn stmts(body: &[Stmt]) -> Vec<TreeNode> {
    body.iter().map(stmt_node).collect()
}

fn exprs(items: &[Expr]) -> Vec<TreeNode> {
    items.iter().map(expr_node).collect()
}

fn args_nodes(args: &ast::Arguments) -> Vec<TreeNode> {
    let mut out = Vec::new();
    for a in args.posonlyargs.iter().chain(&args.args) {
        out.push(TreeNode::leaf("arg"));
        if let Some(default) = &a.default {
            out.push(expr_node(default));
        }
    }
    if args.vararg.is_some() {
        out.push(TreeNode::leaf("vararg"));
    }
    for a in &args.kwonlyargs {
        out.push(TreeNode::leaf("arg"));
        if let Some(default) = &a.default {
            out.push(expr_node(default));
        }
    }
    if args.kwarg.is_some() {
        out.push(TreeNode::leaf("kwarg"));
    }
    out
}

fn stmt_node(stmt: &Stmt) -> TreeNode {
    match stmt {
        Stmt::FunctionDef(f) => {
            let mut children = args_nodes(&f.args);
            children.extend(stmts(&f.body));
            TreeNode::new("FunctionDef", children)
        }
        Stmt::AsyncFunctionDef(f) => {
            let mut children = args_nodes(&f.args);
            children.extend(stmts(&f.body));
            TreeNode::new("AsyncFunctionDef", children)
        }
        Stmt::ClassDef(c) => {
            let mut children = exprs(&c.bases);
            children.extend(stmts(&c.body));
            TreeNode::new("ClassDef", children)
        }
        Stmt::Return(r) => TreeNode::new(
            "Return",
            r.value.iter().map(|v| expr_node(v)).collect(),
        ),
        Stmt::Delete(d) => TreeNode::new("Delete", exprs(&d.targets)),
        Stmt::Assign(a) => {
            let mut children = exprs(&a.targets);
            children.push(expr_node(&a.value));
            TreeNode::new("Assign", children)
        }
        Stmt::AugAssign(a) => TreeNode::new(
            format!("AugAssign:{:?}", a.op),
            vec![expr_node(&a.target), expr_node(&a.value)],
        ),
        Stmt::AnnAssign(a) => {
            let mut children = vec![expr_node(&a.target), expr_node(&a.annotation)];
            if let Some(v) = &a.value {
                children.push(expr_node(v));
            }
            TreeNode::new("AnnAssign", children)
        }
        Stmt::For(f) => {
            let mut children = vec![expr_node(&f.target), expr_node(&f.iter)];
            children.extend(stmts(&f.body));
            children.extend(stmts(&f.orelse));
            TreeNode::new("For", children)
        }
        Stmt::AsyncFor(f) => {
            let mut children = vec![expr_node(&f.target), expr_node(&f.iter)];
            children.extend(stmts(&f.body));
            children.extend(stmts(&f.orelse));
            TreeNode::new("AsyncFor", children)
        }
        Stmt::While(w) => {
            let mut children = vec![expr_node(&w.test)];
            children.extend(stmts(&w.body));
            children.extend(stmts(&w.orelse));
            TreeNode::new("While", children)
        }
        Stmt::If(i) => {
            let mut children = vec![expr_node(&i.test)];
            children.extend(stmts(&i.body));
            children.extend(stmts(&i.orelse));
            TreeNode::new("If", children)
        }
        Stmt::With(w) => {
            let mut children: Vec<TreeNode> =
                w.items.iter().map(|i| expr_node(&i.context_expr)).collect();
            children.extend(stmts(&w.body));
            TreeNode::new("With", children)
        }
        Stmt::AsyncWith(w) => {
            let mut children: Vec<TreeNode> =
                w.items.iter().map(|i| expr_node(&i.context_expr)).collect();
            children.extend(stmts(&w.body));
            TreeNode::new("AsyncWith", children)
        }
        Stmt::Raise(r) => TreeNode::new(
            "Raise",
            r.exc.iter().map(|e| expr_node(e)).collect(),
        ),
        Stmt::Try(t) => {
            let mut children = stmts(&t.body);
            for handler in &t.handlers {
                let ast::ExceptHandler::ExceptHandler(h) = handler;
                children.push(TreeNode::new("ExceptHandler", stmts(&h.body)));
            }
            children.extend(stmts(&t.orelse));
            children.extend(stmts(&t.finalbody));
            TreeNode::new("Try", children)
        }
        Stmt::Assert(a) => {
            let mut children = vec![expr_node(&a.test)];
            if let Some(m) = &a.msg {
                children.push(expr_node(m));
            }
            TreeNode::new("Assert", children)
        }
        Stmt::Import(i) => TreeNode::new(
            "Import",
            i.names.iter().map(|_| TreeNode::leaf("alias")).collect(),
        ),
        Stmt::ImportFrom(i) => TreeNode::new(
            "ImportFrom",
            i.names.iter().map(|_| TreeNode::leaf("alias")).collect(),
        ),
        Stmt::Global(_) => TreeNode::leaf("Global"),
        Stmt::Nonlocal(_) => TreeNode::leaf("Nonlocal"),
        Stmt::Expr(e) => TreeNode::new("ExprStmt", vec![expr_node(&e.value)]),
        Stmt::Pass(_) => TreeNode::leaf("Pass"),
        Stmt::Break(_) => TreeNode::leaf("Break"),
        Stmt::Continue(_) => TreeNode::leaf("Continue"),
        other => TreeNode::leaf(format!("Stmt:{other:?}").split('(').next().unwrap().to_string()),
    }
}

fn comprehension_nodes(generators: &[ast::Comprehension]) -> Vec<TreeNode> {
    generators
        .iter()
        .map(|g| {
            let mut children = vec![expr_node(&g.target), expr_node(&g.iter)];
            children.extend(exprs(&g.ifs));
            TreeNode::new("comprehension", children)
        })
        .collect()
}

fn expr_node(expr: &Expr) -> TreeNode {
    match expr {
        Expr::BoolOp(b) => TreeNode::new(format!("BoolOp:{:?}", b.op), exprs(&b.values)),
        Expr::NamedExpr(n) => TreeNode::new(
            "NamedExpr",
            vec![expr_node(&n.target), expr_node(&n.value)],
        ),
        Expr::BinOp(b) => TreeNode::new(
            format!("BinOp:{:?}", b.op),
            vec![expr_node(&b.left), expr_node(&b.right)],
        ),
        Expr::UnaryOp(u) => {
            TreeNode::new(format!("UnaryOp:{:?}", u.op), vec![expr_node(&u.operand)])
        }
        Expr::Lambda(l) => {
            let mut children = args_nodes(&l.args);
            children.push(expr_node(&l.body));
            TreeNode::new("Lambda", children)
        }
        Expr::IfExp(i) => TreeNode::new(
            "IfExp",
            vec![expr_node(&i.test), expr_node(&i.body), expr_node(&i.orelse)],
        ),
        Expr::Dict(d) => {
            let mut children = Vec::new();
            for k in d.keys.iter().flatten() {
                children.push(expr_node(k));
            }
            children.extend(exprs(&d.values));
            TreeNode::new("Dict", children)
        }
        Expr::Set(s) => TreeNode::new("Set", exprs(&s.elts)),
        Expr::ListComp(c) => {
            let mut children = vec![expr_node(&c.elt)];
            children.extend(comprehension_nodes(&c.generators));
            TreeNode::new("ListComp", children)
        }
        Expr::SetComp(c) => {
            let mut children = vec![expr_node(&c.elt)];
            children.extend(comprehension_nodes(&c.generators));
            TreeNode::new("SetComp", children)
        }
        Expr::DictComp(c) => {
            let mut children = vec![expr_node(&c.key), expr_node(&c.value)];
            children.extend(comprehension_nodes(&c.generators));
            TreeNode::new("DictComp", children)
        }
        Expr::GeneratorExp(c) => {
            let mut children = vec![expr_node(&c.elt)];
            children.extend(comprehension_nodes(&c.generators));
            TreeNode::new("GeneratorExp", children)
        }
        Expr::Await(a) => TreeNode::new("Await", vec![expr_node(&a.value)]),
        Expr::Yield(y) => TreeNode::new(
            "Yield",
            y.value.iter().map(|v| expr_node(v)).collect(),
        ),
        Expr::YieldFrom(y) => TreeNode::new("YieldFrom", vec![expr_node(&y.value)]),
        Expr::Compare(c) => {
            let ops = c
                .ops
                .iter()
                .map(|o| format!("{o:?}"))
                .collect::<Vec<_>>()
                .join(",");
            let mut children = vec![expr_node(&c.left)];
            children.extend(exprs(&c.comparators));
            TreeNode::new(format!("Compare:{ops}"), children)
        }
        Expr::Call(c) => {
            let mut children = vec![expr_node(&c.func)];
            children.extend(exprs(&c.args));
            for kw in &c.keywords {
                children.push(TreeNode::new("keyword", vec![expr_node(&kw.value)]));
            }
            TreeNode::new("Call", children)
        }
        Expr::FormattedValue(f) => TreeNode::new("FormattedValue", vec![expr_node(&f.value)]),
        Expr::JoinedStr(j) => TreeNode::new("JoinedStr", exprs(&j.values)),
        Expr::Constant(c) => TreeNode::leaf(format!("Constant:{}", constant_kind(&c.value))),
        Expr::Attribute(a) => TreeNode::new("Attribute", vec![expr_node(&a.value)]),
        Expr::Subscript(s) => TreeNode::new(
            "Subscript",
            vec![expr_node(&s.value), expr_node(&s.slice)],
        ),
        Expr::Starred(s) => TreeNode::new("Starred", vec![expr_node(&s.value)]),
        Expr::Name(_) => TreeNode::leaf("Name"),
        Expr::List(l) => TreeNode::new("List", exprs(&l.elts)),
        Expr::Tuple(t) => TreeNode::new("Tuple", exprs(&t.elts)),
        Expr::Slice(s) => {
            let mut children = Vec::new();
            for part in [&s.lower, &s.upper, &s.step].into_iter().flatten() {
                children.push(expr_node(part));
            }
            TreeNode::new("Slice", children)
        }
    }
}

fn constant_kind(value: &Constant) -> &'static str {
    match value {
        Constant::None => "none",
        Constant::Bool(_) => "bool",
        Constant::Str(_) => "str",
        Constant::Bytes(_) => "bytes",
        Constant::Int(_) => "int",
        Constant::Float(_) => "float",
        Constant::Complex { .. } => "complex",
        Constant::Tuple(_) => "tuple",
        Constant::Ellipsis => "ellipsis",
    }
}
