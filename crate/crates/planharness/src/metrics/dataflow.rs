//! Def-use dataflow extraction and matching.
//!
//! A single forward pass per function body computes reaching definitions:
//! assignments and parameters define, identifier reads use every definition
//! reaching them, branch arms merge conservatively at the join, and loops
//! contribute one conservative merge. Variables are α-renamed to
//! first-occurrence indices, and sites are statement ordinals in traversal
//! order, so consistently renamed programs produce identical graphs.

use std::collections::{BTreeSet, HashMap};

use rustpython_parser::ast::{self, Expr, Stmt};
use rustpython_parser::{parse, Mode};

use crate::error::{Error, Result};

/// Def-use edges `(def_site, use_site, variable_index)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataflowGraph {
    pub edges: BTreeSet<(usize, usize, usize)>,
}

impl DataflowGraph {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// `|matched| / |reference|`; the empty-reference convention returns 1.0
/// with the flag set.
pub fn dataflow_match(candidate: &DataflowGraph, reference: &DataflowGraph) -> (f64, bool) {
    if reference.edges.is_empty() {
        return (1.0, true);
    }
    let matched = reference.edges.intersection(&candidate.edges).count();
    (matched as f64 / reference.edges.len() as f64, false)
}

pub fn extract_dataflow(source: &str) -> Result<DataflowGraph> {
    let module = parse(source, Mode::Module, "<dataflow>")
        .map_err(|e| Error::Other(format!("parse error: {e}")))?;
    let body = match &module {
        ast::Mod::Module(m) => &m.body,
        _ => return Err(Error::Other("expected a module".into())),
    };
    let mut analyzer = Analyzer::default();
    let mut env = Env::default();
    analyzer.walk_body(body, &mut env);
    Ok(DataflowGraph {
        edges: analyzer.edges,
    })
}

/// Reaching definitions: variable index -> set of def sites.
#[derive(Debug, Clone, Default)]
struct Env {
    names: HashMap<String, usize>,
    reaching: HashMap<usize, BTreeSet<usize>>,
}

impl Env {
    fn merge_from(&mut self, other: Env) {
        for (name, idx) in other.names {
            self.names.entry(name).or_insert(idx);
        }
        for (var, sites) in other.reaching {
            self.reaching.entry(var).or_default().extend(sites);
        }
    }
}

#[derive(Default)]
struct Analyzer {
    edges: BTreeSet<(usize, usize, usize)>,
    next_site: usize,
    next_var: usize,
}

impl Analyzer {
    fn alloc_site(&mut self) -> usize {
        let s = self.next_site;
        self.next_site += 1;
        s
    }

    fn var_index(&mut self, env: &mut Env, name: &str) -> usize {
        if let Some(&idx) = env.names.get(name) {
            return idx;
        }
        let idx = self.next_var;
        self.next_var += 1;
        env.names.insert(name.to_string(), idx);
        idx
    }

    fn define(&mut self, env: &mut Env, name: &str, site: usize) {
        let idx = self.var_index(env, name);
        env.reaching.insert(idx, BTreeSet::from([site]));
    }

    fn use_name(&mut self, env: &Env, name: &str, site: usize) {
        // reads of unknown names (builtins, globals) contribute no edges
        if let Some(idx) = env.names.get(name) {
            if let Some(defs) = env.reaching.get(idx) {
                for &def_site in defs {
                    self.edges.insert((def_site, site, *idx));
                }
            }
        }
    }

    fn walk_body(&mut self, body: &[Stmt], env: &mut Env) {
        for stmt in body {
            self.walk_stmt(stmt, env);
        }
    }

    fn walk_stmt(&mut self, stmt: &Stmt, env: &mut Env) {
        let site = self.alloc_site();
        match stmt {
            Stmt::FunctionDef(f) => {
                let mut inner = Env::default();
                for default in f
                    .args
                    .posonlyargs
                    .iter()
                    .chain(&f.args.args)
                    .chain(&f.args.kwonlyargs)
                    .filter_map(|a| a.default.as_deref())
                {
                    self.load_expr(default, env, site);
                }
                for arg in f.args.posonlyargs.iter().chain(&f.args.args).chain(&f.args.kwonlyargs)
                {
                    self.define(&mut inner, arg.def.arg.as_str(), site);
                }
                if let Some(v) = &f.args.vararg {
                    self.define(&mut inner, v.arg.as_str(), site);
                }
                if let Some(k) = &f.args.kwarg {
                    self.define(&mut inner, k.arg.as_str(), site);
                }
                self.walk_body(&f.body, &mut inner);
                self.define(env, f.name.as_str(), site);
            }
            Stmt::AsyncFunctionDef(f) => {
                let mut inner = Env::default();
                for arg in f.args.posonlyargs.iter().chain(&f.args.args).chain(&f.args.kwonlyargs)
                {
                    self.define(&mut inner, arg.def.arg.as_str(), site);
                }
                self.walk_body(&f.body, &mut inner);
                self.define(env, f.name.as_str(), site);
            }
            Stmt::ClassDef(c) => {
                for base in &c.bases {
                    self.load_expr(base, env, site);
                }
                let mut inner = Env::default();
                self.walk_body(&c.body, &mut inner);
                self.define(env, c.name.as_str(), site);
            }
            Stmt::Assign(a) => {
                self.load_expr(&a.value, env, site);
                for target in &a.targets {
                    self.store_expr(target, env, site);
                }
            }
            Stmt::AugAssign(a) => {
                self.load_expr(&a.target, env, site);
                self.load_expr(&a.value, env, site);
                self.store_expr(&a.target, env, site);
            }
            Stmt::AnnAssign(a) => {
                if let Some(v) = &a.value {
                    self.load_expr(v, env, site);
                    self.store_expr(&a.target, env, site);
                }
            }
            Stmt::Return(r) => {
                if let Some(v) = &r.value {
                    self.load_expr(v, env, site);
                }
            }
            Stmt::Expr(e) => self.load_expr(&e.value, env, site),
            Stmt::If(i) => {
                self.load_expr(&i.test, env, site);
                let mut then_env = env.clone();
                self.walk_body(&i.body, &mut then_env);
                let mut else_env = env.clone();
                self.walk_body(&i.orelse, &mut else_env);
                *env = then_env;
                env.merge_from(else_env);
            }
            Stmt::While(w) => {
                self.load_expr(&w.test, env, site);
                let mut body_env = env.clone();
                self.walk_body(&w.body, &mut body_env);
                env.merge_from(body_env);
                let mut else_env = env.clone();
                self.walk_body(&w.orelse, &mut else_env);
                env.merge_from(else_env);
            }
            Stmt::For(f) => {
                self.load_expr(&f.iter, env, site);
                let mut body_env = env.clone();
                self.store_expr(&f.target, &mut body_env, site);
                self.walk_body(&f.body, &mut body_env);
                env.merge_from(body_env);
                let mut else_env = env.clone();
                self.walk_body(&f.orelse, &mut else_env);
                env.merge_from(else_env);
            }
            Stmt::AsyncFor(f) => {
                self.load_expr(&f.iter, env, site);
                let mut body_env = env.clone();
                self.store_expr(&f.target, &mut body_env, site);
                self.walk_body(&f.body, &mut body_env);
                env.merge_from(body_env);
            }
            Stmt::With(w) => {
                for item in &w.items {
                    self.load_expr(&item.context_expr, env, site);
                    if let Some(vars) = &item.optional_vars {
                        self.store_expr(vars, env, site);
                    }
                }
                self.walk_body(&w.body, env);
            }
            Stmt::AsyncWith(w) => {
                for item in &w.items {
                    self.load_expr(&item.context_expr, env, site);
                    if let Some(vars) = &item.optional_vars {
                        self.store_expr(vars, env, site);
                    }
                }
                self.walk_body(&w.body, env);
            }
            Stmt::Try(t) => {
                let mut body_env = env.clone();
                self.walk_body(&t.body, &mut body_env);
                env.merge_from(body_env);
                for handler in &t.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = handler;
                    let mut h_env = env.clone();
                    if let Some(name) = &h.name {
                        self.define(&mut h_env, name.as_str(), site);
                    }
                    self.walk_body(&h.body, &mut h_env);
                    env.merge_from(h_env);
                }
                self.walk_body(&t.orelse, env);
                self.walk_body(&t.finalbody, env);
            }
            Stmt::Assert(a) => {
                self.load_expr(&a.test, env, site);
                if let Some(m) = &a.msg {
                    self.load_expr(m, env, site);
                }
            }
            Stmt::Raise(r) => {
                if let Some(e) = &r.exc {
                    self.load_expr(e, env, site);
                }
            }
            Stmt::Delete(d) => {
                for t in &d.targets {
                    self.load_expr(t, env, site);
                }
            }
            Stmt::Import(i) => {
                for alias in &i.names {
                    let name = alias
                        .asname
                        .as_ref()
                        .map(|n| n.as_str())
                        .unwrap_or_else(|| alias.name.split('.').next().unwrap_or(""));
                    self.define(env, name, site);
                }
            }
            Stmt::ImportFrom(i) => {
                for alias in &i.names {
                    let name = alias
                        .asname
                        .as_ref()
                        .map(|n| n.as_str())
                        .unwrap_or_else(|| alias.name.as_str());
                    self.define(env, name, site);
                }
            }
            // unsupported constructs contribute no edges
            _ => {}
        }
    }

    fn load_expr(&mut self, expr: &Expr, env: &Env, site: usize) {
        match expr {
            Expr::Name(n) => self.use_name(env, n.id.as_str(), site),
            Expr::NamedExpr(n) => {
                self.load_expr(&n.value, env, site);
                // walrus target defines, but mutating env here would need
                // &mut; the simplified pass treats it as a plain load scope
                self.load_expr(&n.target, env, site);
            }
            Expr::Lambda(l) => {
                let mut inner = Env::default();
                for arg in l.args.posonlyargs.iter().chain(&l.args.args).chain(&l.args.kwonlyargs)
                {
                    self.define(&mut inner, arg.def.arg.as_str(), site);
                }
                self.load_expr(&l.body, &inner, site);
            }
            Expr::ListComp(c) => self.comprehension(&c.generators, &[&c.elt], env, site),
            Expr::SetComp(c) => self.comprehension(&c.generators, &[&c.elt], env, site),
            Expr::GeneratorExp(c) => self.comprehension(&c.generators, &[&c.elt], env, site),
            Expr::DictComp(c) => self.comprehension(&c.generators, &[&c.key, &c.value], env, site),
            other => {
                walk_child_exprs(other, &mut |child| self.load_expr(child, env, site));
            }
        }
    }

    fn comprehension(
        &mut self,
        generators: &[ast::Comprehension],
        outputs: &[&Expr],
        env: &Env,
        site: usize,
    ) {
        let mut inner = env.clone();
        for g in generators {
            self.load_expr(&g.iter, &inner, site);
            self.store_expr(&g.target, &mut inner, site);
            for cond in &g.ifs {
                self.load_expr(cond, &inner, site);
            }
        }
        for out in outputs {
            self.load_expr(out, &inner, site);
        }
    }

    fn store_expr(&mut self, target: &Expr, env: &mut Env, site: usize) {
        match target {
            Expr::Name(n) => self.define(env, n.id.as_str(), site),
            Expr::Tuple(t) => {
                for elt in &t.elts {
                    self.store_expr(elt, env, site);
                }
            }
            Expr::List(l) => {
                for elt in &l.elts {
                    self.store_expr(elt, env, site);
                }
            }
            Expr::Starred(s) => self.store_expr(&s.value, env, site),
            // a[i] = v / a.f = v: reads the base and its indices, then
            // redefines the base conservatively
            Expr::Subscript(s) => {
                self.load_expr(&s.value, env, site);
                self.load_expr(&s.slice, env, site);
                if let Expr::Name(n) = s.value.as_ref() {
                    self.define(env, n.id.as_str(), site);
                }
            }
            Expr::Attribute(a) => {
                self.load_expr(&a.value, env, site);
                if let Expr::Name(n) = a.value.as_ref() {
                    self.define(env, n.id.as_str(), site);
                }
            }
            other => self.load_expr(other, env, site),
        }
    }
}

/// Visit the direct child expressions of `expr` (generic traversal for the
/// variants without binding structure).
fn walk_child_exprs<'a>(expr: &'a Expr, visit: &mut dyn FnMut(&'a Expr)) {
    match expr {
        Expr::BoolOp(b) => b.values.iter().for_each(visit),
        Expr::BinOp(b) => {
            visit(&b.left);
            visit(&b.right);
        }
        Expr::UnaryOp(u) => visit(&u.operand),
        Expr::IfExp(i) => {
            visit(&i.test);
            visit(&i.body);
            visit(&i.orelse);
        }
        Expr::Dict(d) => {
            d.keys.iter().flatten().for_each(&mut *visit);
            d.values.iter().for_each(visit);
        }
        Expr::Set(s) => s.elts.iter().for_each(visit),
        Expr::Await(a) => visit(&a.value),
        Expr::Yield(y) => {
            if let Some(v) = &y.value {
                visit(v);
            }
        }
        Expr::YieldFrom(y) => visit(&y.value),
        Expr::Compare(c) => {
            visit(&c.left);
            c.comparators.iter().for_each(visit);
        }
        Expr::Call(c) => {
            visit(&c.func);
            c.args.iter().for_each(&mut *visit);
            c.keywords.iter().for_each(|k| visit(&k.value));
        }
        Expr::FormattedValue(f) => visit(&f.value),
        Expr::JoinedStr(j) => j.values.iter().for_each(visit),
        Expr::Attribute(a) => visit(&a.value),
        Expr::Subscript(s) => {
            visit(&s.value);
            visit(&s.slice);
        }
        Expr::Starred(s) => visit(&s.value),
        Expr::List(l) => l.elts.iter().for_each(visit),
        Expr::Tuple(t) => t.elts.iter().for_each(visit),
        Expr::Slice(s) => {
            for part in [&s.lower, &s.upper, &s.step].into_iter().flatten() {
                visit(part);
            }
        }
        _ => {}
    }
}
