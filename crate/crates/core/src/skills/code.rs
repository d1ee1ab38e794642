//! Skill extraction from Python source.
//!
//! Source that parses is walked as an AST and emits [`CodeEvent`]s which the
//! rule table maps to tags. Source that does not parse (students submit
//! anything) falls back to token-level rules for the same constructs. The
//! fallback never emits error-type tags; those come only from tracebacks.

use rustpython_parser::{ast, Parse};

use super::rules::RuleTable;
use super::taxonomy::SkillSet;
use super::SkillError;

/// Events produced by the AST walker and the token fallback. The rule table
/// maps each event to zero or more tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeEvent {
    WhileStmt,
    ForStmt,
    IfStmt,
    FuncDef,
    ReturnStmt,
    BreakStmt,
    ContinueStmt,
    ImportAny,
    ImportRandom,
    ImportTime,
    ImportMath,
    Assign,
    AugAssign,
    ScopeDecl,
    BoolOp,
    NotOp,
    BinaryOp,
    CompareOp,
    StringLiteral,
    FString,
    BoolLiteral,
    ValueLiteral,
    ListLiteral,
    DictLiteral,
    Subscript,
    SliceExpr,
    CallPrint,
    CallInput,
    CallTypeConvert,
    CallOpen,
    CallRead,
    CallWrite,
    CallClose,
    MultiArgCall,
    KeywordMisc,
}

impl CodeEvent {
    pub const ALL: &'static [(CodeEvent, &'static str)] = &[
        (CodeEvent::WhileStmt, "while_stmt"),
        (CodeEvent::ForStmt, "for_stmt"),
        (CodeEvent::IfStmt, "if_stmt"),
        (CodeEvent::FuncDef, "func_def"),
        (CodeEvent::ReturnStmt, "return_stmt"),
        (CodeEvent::BreakStmt, "break_stmt"),
        (CodeEvent::ContinueStmt, "continue_stmt"),
        (CodeEvent::ImportAny, "import_any"),
        (CodeEvent::ImportRandom, "import_random"),
        (CodeEvent::ImportTime, "import_time"),
        (CodeEvent::ImportMath, "import_math"),
        (CodeEvent::Assign, "assign"),
        (CodeEvent::AugAssign, "aug_assign"),
        (CodeEvent::ScopeDecl, "scope_decl"),
        (CodeEvent::BoolOp, "bool_op"),
        (CodeEvent::NotOp, "not_op"),
        (CodeEvent::BinaryOp, "binary_op"),
        (CodeEvent::CompareOp, "compare_op"),
        (CodeEvent::StringLiteral, "string_literal"),
        (CodeEvent::FString, "fstring"),
        (CodeEvent::BoolLiteral, "bool_literal"),
        (CodeEvent::ValueLiteral, "value_literal"),
        (CodeEvent::ListLiteral, "list_literal"),
        (CodeEvent::DictLiteral, "dict_literal"),
        (CodeEvent::Subscript, "subscript"),
        (CodeEvent::SliceExpr, "slice_expr"),
        (CodeEvent::CallPrint, "call_print"),
        (CodeEvent::CallInput, "call_input"),
        (CodeEvent::CallTypeConvert, "call_type_convert"),
        (CodeEvent::CallOpen, "call_open"),
        (CodeEvent::CallRead, "call_read"),
        (CodeEvent::CallWrite, "call_write"),
        (CodeEvent::CallClose, "call_close"),
        (CodeEvent::MultiArgCall, "multi_arg_call"),
        (CodeEvent::KeywordMisc, "keyword_misc"),
    ];

    pub fn parse(name: &str) -> Option<CodeEvent> {
        Self::ALL
            .iter()
            .find(|(_, n)| *n == name)
            .map(|(ev, _)| *ev)
    }

    pub fn name(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(ev, _)| *ev == self)
            .map(|(_, n)| *n)
            .expect("event registered")
    }
}

/// Where an expression sits; literal numbers count as "Value" only in
/// display positions (print arguments, collection elements, bare statements).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExprCtx {
    Plain,
    PrintArg,
    CollectionElem,
    StandaloneStmt,
}

pub(crate) fn extract(table: &RuleTable, code_text: &str) -> SkillSet {
    let mut out = SkillSet::new();
    if code_text.trim().is_empty() {
        return out;
    }
    match ast::Suite::parse(code_text, "<student>") {
        Ok(stmts) => {
            let mut walker = Walker { table, out: &mut out };
            walker.walk_stmts(&stmts);
        }
        Err(_) => {
            token_fallback(table, code_text, &mut out);
        }
    }
    out
}

pub(crate) fn required_skills(
    table: &RuleTable,
    reference_solution_code: &str,
) -> Result<SkillSet, SkillError> {
    if reference_solution_code.trim().is_empty() {
        return Err(SkillError::UnparseableSolution("empty solution".into()));
    }
    let stmts = ast::Suite::parse(reference_solution_code, "<solution>")
        .map_err(|e| SkillError::UnparseableSolution(e.to_string()))?;
    let mut out = SkillSet::new();
    let mut walker = Walker { table, out: &mut out };
    walker.walk_stmts(&stmts);
    Ok(out)
}

struct Walker<'a> {
    table: &'a RuleTable,
    out: &'a mut SkillSet,
}

const TYPE_CONVERTORS: &[&str] = &["int", "float", "str", "bool", "list", "dict", "tuple", "set"];

fn module_event(name: &str) -> Option<CodeEvent> {
    match name {
        "random" => Some(CodeEvent::ImportRandom),
        "time" => Some(CodeEvent::ImportTime),
        "math" => Some(CodeEvent::ImportMath),
        _ => None,
    }
}

impl Walker<'_> {
    fn emit(&mut self, ev: CodeEvent) {
        self.table.tags_for_event(ev, self.out);
    }

    fn walk_stmts(&mut self, stmts: &[ast::Stmt]) {
        for s in stmts {
            self.walk_stmt(s);
        }
    }

    fn walk_stmt(&mut self, stmt: &ast::Stmt) {
        use ast::Stmt::*;
        match stmt {
            FunctionDef(f) => {
                self.emit(CodeEvent::FuncDef);
                for d in f.args.defaults() {
                    self.walk_expr(d, ExprCtx::Plain);
                }
                self.walk_stmts(&f.body);
            }
            AsyncFunctionDef(f) => {
                self.emit(CodeEvent::FuncDef);
                self.walk_stmts(&f.body);
            }
            ClassDef(c) => {
                self.emit(CodeEvent::KeywordMisc);
                self.walk_stmts(&c.body);
            }
            Return(r) => {
                self.emit(CodeEvent::ReturnStmt);
                if let Some(v) = &r.value {
                    self.walk_expr(v, ExprCtx::Plain);
                }
            }
            Delete(d) => {
                self.emit(CodeEvent::KeywordMisc);
                for t in &d.targets {
                    self.walk_expr(t, ExprCtx::Plain);
                }
            }
            Assign(a) => {
                self.emit(CodeEvent::Assign);
                for t in &a.targets {
                    self.walk_expr(t, ExprCtx::Plain);
                }
                self.walk_expr(&a.value, ExprCtx::Plain);
            }
            AugAssign(a) => {
                self.emit(CodeEvent::AugAssign);
                self.walk_expr(&a.target, ExprCtx::Plain);
                self.walk_expr(&a.value, ExprCtx::Plain);
            }
            AnnAssign(a) => {
                self.emit(CodeEvent::Assign);
                self.walk_expr(&a.target, ExprCtx::Plain);
                if let Some(v) = &a.value {
                    self.walk_expr(v, ExprCtx::Plain);
                }
            }
            For(f) => {
                self.emit(CodeEvent::ForStmt);
                self.emit(CodeEvent::Assign);
                self.walk_expr(&f.target, ExprCtx::Plain);
                self.walk_expr(&f.iter, ExprCtx::Plain);
                self.walk_stmts(&f.body);
                self.walk_stmts(&f.orelse);
            }
            AsyncFor(f) => {
                self.emit(CodeEvent::ForStmt);
                self.emit(CodeEvent::Assign);
                self.walk_expr(&f.target, ExprCtx::Plain);
                self.walk_expr(&f.iter, ExprCtx::Plain);
                self.walk_stmts(&f.body);
                self.walk_stmts(&f.orelse);
            }
            While(w) => {
                self.emit(CodeEvent::WhileStmt);
                self.walk_expr(&w.test, ExprCtx::Plain);
                self.walk_stmts(&w.body);
                self.walk_stmts(&w.orelse);
            }
            If(i) => {
                self.emit(CodeEvent::IfStmt);
                self.walk_expr(&i.test, ExprCtx::Plain);
                self.walk_stmts(&i.body);
                self.walk_stmts(&i.orelse);
            }
            With(w) => {
                self.emit(CodeEvent::KeywordMisc);
                for item in &w.items {
                    self.walk_expr(&item.context_expr, ExprCtx::Plain);
                    if let Some(v) = &item.optional_vars {
                        self.emit(CodeEvent::Assign);
                        self.walk_expr(v, ExprCtx::Plain);
                    }
                }
                self.walk_stmts(&w.body);
            }
            AsyncWith(w) => {
                self.emit(CodeEvent::KeywordMisc);
                self.walk_stmts(&w.body);
            }
            Match(m) => {
                self.emit(CodeEvent::KeywordMisc);
                self.walk_expr(&m.subject, ExprCtx::Plain);
                for case in &m.cases {
                    self.walk_stmts(&case.body);
                }
            }
            Raise(r) => {
                self.emit(CodeEvent::KeywordMisc);
                if let Some(e) = &r.exc {
                    self.walk_expr(e, ExprCtx::Plain);
                }
            }
            Try(t) => {
                self.emit(CodeEvent::KeywordMisc);
                self.walk_stmts(&t.body);
                for h in &t.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    self.walk_stmts(&h.body);
                }
                self.walk_stmts(&t.orelse);
                self.walk_stmts(&t.finalbody);
            }
            TryStar(t) => {
                self.emit(CodeEvent::KeywordMisc);
                self.walk_stmts(&t.body);
            }
            Assert(a) => {
                self.emit(CodeEvent::KeywordMisc);
                self.walk_expr(&a.test, ExprCtx::Plain);
            }
            Import(i) => {
                self.emit(CodeEvent::ImportAny);
                for n in &i.names {
                    let root = n.name.as_str().split('.').next().unwrap_or("");
                    if let Some(ev) = module_event(root) {
                        self.emit(ev);
                    }
                }
            }
            ImportFrom(i) => {
                self.emit(CodeEvent::ImportAny);
                if let Some(module) = &i.module {
                    let root = module.as_str().split('.').next().unwrap_or("");
                    if let Some(ev) = module_event(root) {
                        self.emit(ev);
                    }
                }
            }
            Global(_) | Nonlocal(_) => self.emit(CodeEvent::ScopeDecl),
            Expr(e) => self.walk_expr(&e.value, ExprCtx::StandaloneStmt),
            Pass(_) => self.emit(CodeEvent::KeywordMisc),
            Break(_) => self.emit(CodeEvent::BreakStmt),
            Continue(_) => self.emit(CodeEvent::ContinueStmt),
            TypeAlias(_) => self.emit(CodeEvent::KeywordMisc),
        }
    }

    fn walk_constant(&mut self, value: &ast::Constant, ctx: ExprCtx) {
        use ast::Constant::*;
        match value {
            Str(_) => self.emit(CodeEvent::StringLiteral),
            Bool(_) => self.emit(CodeEvent::BoolLiteral),
            Int(_) | Float(_) | Complex { .. } => {
                if matches!(
                    ctx,
                    ExprCtx::PrintArg | ExprCtx::CollectionElem | ExprCtx::StandaloneStmt
                ) {
                    self.emit(CodeEvent::ValueLiteral);
                }
            }
            Tuple(items) => {
                for item in items {
                    self.walk_constant(item, ExprCtx::CollectionElem);
                }
            }
            _ => {}
        }
    }

    fn walk_expr(&mut self, expr: &ast::Expr, ctx: ExprCtx) {
        use ast::Expr::*;
        match expr {
            BoolOp(b) => {
                self.emit(CodeEvent::BoolOp);
                for v in &b.values {
                    self.walk_expr(v, ExprCtx::Plain);
                }
            }
            NamedExpr(n) => {
                self.emit(CodeEvent::Assign);
                self.walk_expr(&n.target, ExprCtx::Plain);
                self.walk_expr(&n.value, ExprCtx::Plain);
            }
            BinOp(b) => {
                self.emit(CodeEvent::BinaryOp);
                self.walk_expr(&b.left, ExprCtx::Plain);
                self.walk_expr(&b.right, ExprCtx::Plain);
            }
            UnaryOp(u) => {
                let numeric_literal = matches!(
                    u.operand.as_ref(),
                    Constant(c) if matches!(c.value, ast::Constant::Int(_) | ast::Constant::Float(_))
                );
                match u.op {
                    ast::UnaryOp::Not => {
                        self.emit(CodeEvent::NotOp);
                        self.walk_expr(&u.operand, ExprCtx::Plain);
                    }
                    ast::UnaryOp::USub | ast::UnaryOp::UAdd if numeric_literal => {
                        // A signed literal reads as a plain value, not an
                        // operator application.
                        self.walk_expr(&u.operand, ctx);
                    }
                    _ => {
                        self.emit(CodeEvent::BinaryOp);
                        self.walk_expr(&u.operand, ExprCtx::Plain);
                    }
                }
            }
            Lambda(l) => {
                self.emit(CodeEvent::KeywordMisc);
                self.walk_expr(&l.body, ExprCtx::Plain);
            }
            IfExp(i) => {
                self.emit(CodeEvent::IfStmt);
                self.walk_expr(&i.test, ExprCtx::Plain);
                self.walk_expr(&i.body, ExprCtx::Plain);
                self.walk_expr(&i.orelse, ExprCtx::Plain);
            }
            Dict(d) => {
                self.emit(CodeEvent::DictLiteral);
                for k in d.keys.iter().flatten() {
                    self.walk_expr(k, ExprCtx::CollectionElem);
                }
                for v in &d.values {
                    self.walk_expr(v, ExprCtx::CollectionElem);
                }
            }
            Set(s) => {
                for e in &s.elts {
                    self.walk_expr(e, ExprCtx::CollectionElem);
                }
            }
            ListComp(c) => {
                self.emit(CodeEvent::ListLiteral);
                self.emit(CodeEvent::ForStmt);
                self.emit(CodeEvent::Assign);
                self.walk_expr(&c.elt, ExprCtx::Plain);
                self.walk_comprehensions(&c.generators);
            }
            SetComp(c) => {
                self.emit(CodeEvent::ForStmt);
                self.emit(CodeEvent::Assign);
                self.walk_expr(&c.elt, ExprCtx::Plain);
                self.walk_comprehensions(&c.generators);
            }
            DictComp(c) => {
                self.emit(CodeEvent::DictLiteral);
                self.emit(CodeEvent::ForStmt);
                self.emit(CodeEvent::Assign);
                self.walk_expr(&c.key, ExprCtx::Plain);
                self.walk_expr(&c.value, ExprCtx::Plain);
                self.walk_comprehensions(&c.generators);
            }
            GeneratorExp(c) => {
                self.emit(CodeEvent::ForStmt);
                self.emit(CodeEvent::Assign);
                self.walk_expr(&c.elt, ExprCtx::Plain);
                self.walk_comprehensions(&c.generators);
            }
            Await(a) => {
                self.emit(CodeEvent::KeywordMisc);
                self.walk_expr(&a.value, ExprCtx::Plain);
            }
            Yield(y) => {
                self.emit(CodeEvent::KeywordMisc);
                if let Some(v) = &y.value {
                    self.walk_expr(v, ExprCtx::Plain);
                }
            }
            YieldFrom(y) => {
                self.emit(CodeEvent::KeywordMisc);
                self.walk_expr(&y.value, ExprCtx::Plain);
            }
            Compare(c) => {
                self.emit(CodeEvent::CompareOp);
                self.walk_expr(&c.left, ExprCtx::Plain);
                for e in &c.comparators {
                    self.walk_expr(e, ExprCtx::Plain);
                }
            }
            Call(call) => {
                let mut arg_ctx = ExprCtx::Plain;
                match call.func.as_ref() {
                    Name(name) => {
                        let id = name.id.as_str();
                        if id == "print" {
                            self.emit(CodeEvent::CallPrint);
                            arg_ctx = ExprCtx::PrintArg;
                        } else if id == "input" {
                            self.emit(CodeEvent::CallInput);
                        } else if TYPE_CONVERTORS.contains(&id) {
                            self.emit(CodeEvent::CallTypeConvert);
                        } else if id == "open" {
                            self.emit(CodeEvent::CallOpen);
                        }
                    }
                    Attribute(attr) => {
                        match attr.attr.as_str() {
                            "read" | "readline" | "readlines" => self.emit(CodeEvent::CallRead),
                            "write" | "writelines" => self.emit(CodeEvent::CallWrite),
                            "close" => self.emit(CodeEvent::CallClose),
                            _ => {}
                        }
                        self.walk_expr(&attr.value, ExprCtx::Plain);
                    }
                    other => self.walk_expr(other, ExprCtx::Plain),
                }
                if call.args.len() + call.keywords.len() >= 2 {
                    self.emit(CodeEvent::MultiArgCall);
                }
                for a in &call.args {
                    self.walk_expr(a, arg_ctx);
                }
                for k in &call.keywords {
                    self.walk_expr(&k.value, ExprCtx::Plain);
                }
            }
            FormattedValue(f) => self.walk_expr(&f.value, ExprCtx::Plain),
            JoinedStr(j) => {
                self.emit(CodeEvent::FString);
                self.emit(CodeEvent::StringLiteral);
                for v in &j.values {
                    self.walk_expr(v, ExprCtx::Plain);
                }
            }
            Constant(c) => self.walk_constant(&c.value, ctx),
            Attribute(a) => {
                if let Name(base) = a.value.as_ref() {
                    if let Some(ev) = module_event(base.id.as_str()) {
                        self.emit(ev);
                    }
                }
                self.walk_expr(&a.value, ExprCtx::Plain);
            }
            Subscript(s) => {
                self.emit(CodeEvent::Subscript);
                if matches!(s.slice.as_ref(), Slice(_)) {
                    self.emit(CodeEvent::SliceExpr);
                }
                self.walk_expr(&s.value, ExprCtx::Plain);
                self.walk_expr(&s.slice, ExprCtx::Plain);
            }
            Starred(s) => self.walk_expr(&s.value, ExprCtx::Plain),
            Name(_) => {}
            List(l) => {
                self.emit(CodeEvent::ListLiteral);
                for e in &l.elts {
                    self.walk_expr(e, ExprCtx::CollectionElem);
                }
            }
            Tuple(t) => {
                for e in &t.elts {
                    self.walk_expr(e, ExprCtx::CollectionElem);
                }
            }
            Slice(sl) => {
                self.emit(CodeEvent::SliceExpr);
                if let Some(l) = &sl.lower {
                    self.walk_expr(l, ExprCtx::Plain);
                }
                if let Some(u) = &sl.upper {
                    self.walk_expr(u, ExprCtx::Plain);
                }
                if let Some(s) = &sl.step {
                    self.walk_expr(s, ExprCtx::Plain);
                }
            }
        }
    }

    fn walk_comprehensions(&mut self, gens: &[ast::Comprehension]) {
        for g in gens {
            self.walk_expr(&g.target, ExprCtx::Plain);
            self.walk_expr(&g.iter, ExprCtx::Plain);
            for cond in &g.ifs {
                self.walk_expr(cond, ExprCtx::Plain);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Token fallback for unparseable source
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num,
    Str,
    Op(String),
    Open(char),
    Close(char),
    Comma,
    Colon,
    Dot,
}

fn tokenize_python_ish(src: &str) -> Vec<Tok> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '"' || c == '\'' {
            // Scan to the closing quote; tolerate unterminated strings.
            let quote = c;
            let triple = i + 2 < chars.len() && chars[i + 1] == quote && chars[i + 2] == quote;
            i += if triple { 3 } else { 1 };
            loop {
                if i >= chars.len() {
                    break;
                }
                if chars[i] == '\\' {
                    i += 2;
                    continue;
                }
                if triple {
                    if chars[i] == quote
                        && i + 2 < chars.len()
                        && chars[i + 1] == quote
                        && chars[i + 2] == quote
                    {
                        i += 3;
                        break;
                    }
                } else if chars[i] == quote || chars[i] == '\n' {
                    i += 1;
                    break;
                }
                i += 1;
            }
            toks.push(Tok::Str);
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Num);
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            match c {
                '(' | '[' | '{' => toks.push(Tok::Open(c)),
                ')' | ']' | '}' => toks.push(Tok::Close(c)),
                ',' => toks.push(Tok::Comma),
                ':' => {
                    if i + 1 < chars.len() && chars[i + 1] == '=' {
                        toks.push(Tok::Op(":=".into()));
                        i += 1;
                    } else {
                        toks.push(Tok::Colon);
                    }
                }
                '.' => toks.push(Tok::Dot),
                '+' | '-' | '*' | '/' | '%' | '<' | '>' | '=' | '!' | '&' | '|' | '^' | '~' => {
                    let start = i;
                    let mut end = i + 1;
                    // Greedily take two- and three-char operators.
                    while end < chars.len()
                        && end - start < 3
                        && matches!(chars[end], '+' | '-' | '*' | '/' | '%' | '<' | '>' | '=')
                    {
                        end += 1;
                    }
                    let op: String = chars[start..end].iter().collect();
                    i = end - 1;
                    toks.push(Tok::Op(op));
                }
                _ => {}
            }
            i += 1;
        }
    }
    toks
}

#[derive(Debug)]
enum BracketCtx {
    Paren { call: Option<String>, commas: usize },
    Square { subscript: bool, has_colon: bool },
    Brace { has_colon: bool },
}

/// Token-rule extraction for source that does not parse. Mirrors the AST
/// rules; mixed-script identifiers never break it.
fn token_fallback(table: &RuleTable, src: &str, out: &mut SkillSet) {
    let toks = tokenize_python_ish(src);
    let emit = |ev: CodeEvent, out: &mut SkillSet| table.tags_for_event(ev, out);
    let mut stack: Vec<BracketCtx> = Vec::new();
    let mut import_tail = false;

    for (idx, tok) in toks.iter().enumerate() {
        let prev = if idx > 0 { Some(&toks[idx - 1]) } else { None };
        let next = toks.get(idx + 1);
        match tok {
            Tok::Ident(name) => {
                let mut consumed_by_import = false;
                if import_tail {
                    if let Some(ev) = module_event(name.as_str()) {
                        emit(ev, out);
                    }
                    consumed_by_import = true;
                }
                match name.as_str() {
                    "while" => emit(CodeEvent::WhileStmt, out),
                    "for" => emit(CodeEvent::ForStmt, out),
                    "if" | "elif" | "else" => emit(CodeEvent::IfStmt, out),
                    "def" => emit(CodeEvent::FuncDef, out),
                    "return" => emit(CodeEvent::ReturnStmt, out),
                    "break" => emit(CodeEvent::BreakStmt, out),
                    "continue" => emit(CodeEvent::ContinueStmt, out),
                    "import" | "from" => {
                        emit(CodeEvent::ImportAny, out);
                        import_tail = true;
                        consumed_by_import = true;
                    }
                    "global" | "nonlocal" => emit(CodeEvent::ScopeDecl, out),
                    "and" | "or" => emit(CodeEvent::BoolOp, out),
                    "not" => emit(CodeEvent::NotOp, out),
                    "True" | "False" => emit(CodeEvent::BoolLiteral, out),
                    "in" | "is" => emit(CodeEvent::CompareOp, out),
                    "pass" | "del" | "assert" | "lambda" | "with" | "class" | "try"
                    | "except" | "finally" | "yield" | "raise" => {
                        emit(CodeEvent::KeywordMisc, out)
                    }
                    _ => {
                        if matches!(next, Some(Tok::Dot)) {
                            if let Some(ev) = module_event(name.as_str()) {
                                emit(ev, out);
                            }
                        }
                    }
                }
                if !consumed_by_import {
                    import_tail = false;
                }
            }
            Tok::Num => {
                let in_value_position = match stack.last() {
                    Some(BracketCtx::Paren { call: Some(name), .. }) => name == "print",
                    Some(BracketCtx::Square { .. }) => true,
                    _ => false,
                };
                if in_value_position {
                    emit(CodeEvent::ValueLiteral, out);
                }
            }
            Tok::Str => emit(CodeEvent::StringLiteral, out),
            Tok::Op(op) => match op.as_str() {
                "=" => {
                    let in_call = matches!(stack.last(), Some(BracketCtx::Paren { call: Some(_), .. }));
                    if !in_call {
                        emit(CodeEvent::Assign, out);
                    }
                }
                ":=" => emit(CodeEvent::Assign, out),
                "==" | "!=" | "<" | ">" | "<=" | ">=" => emit(CodeEvent::CompareOp, out),
                "+=" | "-=" | "*=" | "/=" | "%=" | "//=" | "**=" => {
                    emit(CodeEvent::AugAssign, out)
                }
                "+" | "-" | "*" | "/" | "%" | "//" | "**" | "&" | "|" | "^" | "~" => {
                    emit(CodeEvent::BinaryOp, out)
                }
                _ => {}
            },
            Tok::Open('(') => {
                // `def name(...)` is a parameter list, not a call.
                let after_def = matches!(
                    toks.get(idx.wrapping_sub(2)),
                    Some(Tok::Ident(kw)) if kw == "def"
                );
                let call = match prev {
                    Some(Tok::Ident(name)) if !after_def => {
                        let n = name.as_str();
                        if n == "print" {
                            emit(CodeEvent::CallPrint, out);
                        } else if n == "input" {
                            emit(CodeEvent::CallInput, out);
                        } else if TYPE_CONVERTORS.contains(&n) {
                            emit(CodeEvent::CallTypeConvert, out);
                        } else if n == "open" {
                            emit(CodeEvent::CallOpen, out);
                        } else if matches!(toks.get(idx.wrapping_sub(2)), Some(Tok::Dot)) {
                            match n {
                                "read" | "readline" | "readlines" => emit(CodeEvent::CallRead, out),
                                "write" | "writelines" => emit(CodeEvent::CallWrite, out),
                                "close" => emit(CodeEvent::CallClose, out),
                                _ => {}
                            }
                        }
                        Some(name.clone())
                    }
                    _ => None,
                };
                stack.push(BracketCtx::Paren { call, commas: 0 });
            }
            Tok::Open('[') => {
                let subscript = matches!(
                    prev,
                    Some(Tok::Ident(_)) | Some(Tok::Close(')')) | Some(Tok::Close(']')) | Some(Tok::Str)
                );
                if subscript {
                    emit(CodeEvent::Subscript, out);
                } else {
                    emit(CodeEvent::ListLiteral, out);
                }
                stack.push(BracketCtx::Square { subscript, has_colon: false });
            }
            Tok::Open('{') => stack.push(BracketCtx::Brace { has_colon: false }),
            Tok::Open(_) => {}
            Tok::Close(c) => {
                if let Some(ctx) = stack.pop() {
                    match (c, ctx) {
                        (')', BracketCtx::Paren { call: Some(_), commas }) if commas >= 1 => {
                            emit(CodeEvent::MultiArgCall, out);
                        }
                        (']', BracketCtx::Square { subscript: true, has_colon: true }) => {
                            emit(CodeEvent::SliceExpr, out);
                        }
                        ('}', BracketCtx::Brace { has_colon: true }) => {
                            emit(CodeEvent::DictLiteral, out);
                        }
                        _ => {}
                    }
                }
            }
            Tok::Comma => {
                if let Some(BracketCtx::Paren { commas, .. }) = stack.last_mut() {
                    *commas += 1;
                }
            }
            Tok::Colon => match stack.last_mut() {
                Some(BracketCtx::Square { has_colon, .. }) => *has_colon = true,
                Some(BracketCtx::Brace { has_colon }) => *has_colon = true,
                _ => {}
            },
            Tok::Dot => {}
        }
        if !matches!(tok, Tok::Ident(_) | Tok::Comma | Tok::Dot) {
            import_tail = false;
        }
    }
}
