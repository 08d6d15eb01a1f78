"""Text parsers for `.prism`-style models and `.props`-style property files.

Hand-written tokenizer and recursive-descent parsers with source-located
diagnostics, plus a pretty-printer whose output re-parses to a structurally
identical AST.
"""

from __future__ import annotations

import re

from .diagnostics import Diagnostic, ParseError, SourceSpan
from .model import (
    Binary, Command, ConstantDecl, Expr, FormulaDecl, Lit, ModelAst,
    ModuleDecl, Name, PathFormula, PropertySpec, RewardItem,
    RewardStructureDecl, Unary, Update, VarDecl,
)

KEYWORDS = {
    "dtmc", "const", "int", "double", "bool", "formula", "module", "endmodule",
    "rewards", "endrewards", "init", "true", "false",
}

# Recognized upstream constructs outside our subset; reported explicitly.
UNSUPPORTED = {
    "mdp", "ctmc", "pta", "nondeterministic", "stochastic", "probabilistic",
    "label", "system", "endsystem", "global", "player", "endplayer",
    "observables", "endinit", "invariant",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<real>\d+\.\d+|\.\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<op><=|>=|!=|->|\.\.|=\?|[-+*/=<>!&|()\[\]{}:;,'?])
""", re.VERBOSE)


class Token:
    __slots__ = ("kind", "text", "span")

    def __init__(self, kind, text, span):
        self.kind = kind
        self.text = text
        self.span = span

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


def tokenize(text, file="<string>"):
    tokens = []
    line, col = 1, 1
    pos = 0
    diags = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            diags.append(Diagnostic(
                "error", f"unexpected character {text[pos]!r}",
                SourceSpan(file, line, col)))
            raise ParseError(diags)
        kind = m.lastgroup
        lexeme = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, lexeme, SourceSpan(file, line, col, len(lexeme))))
        nl = lexeme.count("\n")
        if nl:
            line += nl
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(file, line, col, 0)))
    return tokens


class _Parser:
    """Common token-stream machinery for both grammars."""

    def __init__(self, text, file):
        self.file = file
        self.tokens = tokenize(text, file)
        self.i = 0
        self.diags = []

    @property
    def tok(self):
        return self.tokens[self.i]

    def peek(self, ahead=1):
        j = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def advance(self):
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text):
        return self.tok.text == text and self.tok.kind in ("op", "ident")

    def accept(self, text):
        if self.at(text):
            return self.advance()
        return None

    def fail(self, message, span=None):
        self.diags.append(Diagnostic("error", message, span or self.tok.span))
        raise ParseError(self.diags)

    def expect(self, text, what=None):
        if not self.at(text):
            self.fail(f"expected {what or text!r}, found {self.tok.text!r}")
        return self.advance()

    def expect_ident(self, what="identifier"):
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS or t.text in UNSUPPORTED:
            self.fail(f"expected {what}, found {t.text!r}")
        return self.advance()

    # ---- expression grammar (shared by models and properties) ----
    # ->  |  &  comparisons  + -  * /  unary  atom

    def parse_expr(self):
        return self._implies()

    def _implies(self):
        left = self._or()
        if self.accept("->"):
            return Binary("->", left, self._implies())
        return left

    def _or(self):
        e = self._and()
        while self.accept("|"):
            e = Binary("|", e, self._and())
        return e

    def _and(self):
        e = self._not()
        while self.accept("&"):
            e = Binary("&", e, self._not())
        return e

    def _not(self):
        if self.accept("!"):
            return Unary("!", self._not())
        return self._comparison()

    def _comparison(self):
        e = self._additive()
        for op in ("<=", ">=", "!=", "=", "<", ">"):
            if self.at(op):
                self.advance()
                return Binary(op, e, self._additive())
        return e

    def _additive(self):
        e = self._multiplicative()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            e = Binary(op, e, self._multiplicative())
        return e

    def _multiplicative(self):
        e = self._unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance().text
            e = Binary(op, e, self._unary())
        return e

    def _unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Unary("-", self._unary())
        return self._atom()

    def _atom(self):
        t = self.tok
        if t.kind == "int":
            self.advance()
            return Lit(int(t.text))
        if t.kind == "real":
            self.advance()
            return Lit(float(t.text))
        if t.kind == "ident":
            if t.text == "true":
                self.advance()
                return Lit(True)
            if t.text == "false":
                self.advance()
                return Lit(False)
            if t.text in UNSUPPORTED:
                self.fail(f"unsupported construct '{t.text}'")
            if t.text in KEYWORDS:
                self.fail(f"unexpected keyword '{t.text}' in expression")
            self.advance()
            return Name(t.text, t.span)
        if self.accept("("):
            e = self.parse_expr()
            self.expect(")")
            return e
        self.fail(f"expected expression, found {t.text!r}")


# --------------------------------------------------------------------------
# Model parser
# --------------------------------------------------------------------------

class _ModelParser(_Parser):
    def parse(self):
        if self.tok.kind == "eof":
            self.fail("expected model type header 'dtmc'")
        if self.tok.text in UNSUPPORTED:
            self.fail(f"unsupported model type '{self.tok.text}' (only dtmc)")
        self.expect("dtmc", "model type header 'dtmc'")
        constants, formulas, modules, rewards = [], [], [], []
        while self.tok.kind != "eof":
            if self.at("const"):
                constants.append(self._const())
            elif self.at("formula"):
                formulas.append(self._formula())
            elif self.at("module"):
                modules.append(self._module())
            elif self.at("rewards"):
                rewards.append(self._rewards())
            elif self.tok.text in UNSUPPORTED:
                self.fail(f"unsupported construct '{self.tok.text}'")
            else:
                self.fail(f"expected declaration, found {self.tok.text!r}")
        ast = ModelAst(tuple(constants), tuple(formulas), tuple(modules),
                       tuple(rewards))
        self._validate(ast)
        return ast

    def _const(self):
        span = self.expect("const").span
        if self.at("int"):
            kind = "int"
        elif self.at("double"):
            kind = "double"
        elif self.at("bool"):
            self.fail("unsupported construct 'const bool'")
        else:
            self.fail("expected 'int' or 'double' after 'const'")
        self.advance()
        name = self.expect_ident("constant name").text
        self.expect("=")
        value = self.parse_expr()
        self.expect(";")
        return ConstantDecl(name, kind, value, span)

    def _formula(self):
        span = self.expect("formula").span
        name = self.expect_ident("formula name").text
        self.expect("=")
        expr = self.parse_expr()
        self.expect(";")
        return FormulaDecl(name, expr, span)

    def _module(self):
        span = self.expect("module").span
        name = self.expect_ident("module name").text
        variables, commands = [], []
        while not self.at("endmodule"):
            if self.tok.kind == "eof":
                self.fail(f"unterminated module '{name}' (missing endmodule)")
            if self.at("["):
                commands.append(self._command())
            else:
                variables.append(self._vardecl())
        self.advance()
        return ModuleDecl(name, tuple(variables), tuple(commands), span)

    def _vardecl(self):
        name_tok = self.expect_ident("variable name")
        self.expect(":")
        if self.accept("bool"):
            low = high = None
            is_bool = True
        else:
            self.expect("[")
            low = self.parse_expr()
            self.expect("..")
            high = self.parse_expr()
            self.expect("]")
            is_bool = False
        self.expect("init")
        init = self.parse_expr()
        self.expect(";")
        return VarDecl(name_tok.text, low, high, init, is_bool, name_tok.span)

    def _command(self):
        span = self.expect("[").span
        label = None
        if not self.at("]"):
            label = self.expect_ident("action label").text
        self.expect("]")
        # Guards stop below the implication level so the command arrow is
        # unambiguous; a parenthesized implication is still fine.
        guard = self._or()
        self.expect("->")
        updates = [self._update()]
        while self.accept("+"):
            updates.append(self._update())
        self.expect(";")
        return Command(label, guard, tuple(updates), span)

    def _is_assignment_start(self):
        # "(" IDENT "'" marks a primed assignment rather than an expression.
        return (self.at("(") and self.peek(1).kind == "ident"
                and self.peek(2).text == "'")

    def _update(self):
        if self._is_assignment_start():
            return Update(None, self._assignments())
        prob = self.parse_expr()
        self.expect(":", "':' after update probability")
        return Update(prob, self._assignments())

    def _assignments(self):
        pairs = [self._assignment()]
        while self.accept("&"):
            pairs.append(self._assignment())
        return tuple(pairs)

    def _assignment(self):
        self.expect("(")
        name = self.expect_ident("variable name").text
        self.expect("'")
        self.expect("=")
        rhs = self.parse_expr()
        self.expect(")")
        return (name, rhs)

    def _rewards(self):
        span = self.expect("rewards").span
        if self.tok.kind != "string":
            self.fail("expected reward structure name string")
        name = _unquote(self.advance().text)
        items = []
        while not self.at("endrewards"):
            if self.tok.kind == "eof":
                self.fail(f'unterminated rewards "{name}" (missing endrewards)')
            if self.at("["):
                self.fail("unsupported construct: transition rewards")
            item_span = self.tok.span
            guard = self.parse_expr()
            self.expect(":")
            value = self.parse_expr()
            self.expect(";")
            items.append(RewardItem(guard, value, item_span))
        self.advance()
        return RewardStructureDecl(name, tuple(items), span)

    def _validate(self, ast):
        declared = {v.name for v in ast.all_variables()}
        for mod in ast.modules:
            local = {v.name for v in mod.variables}
            for cmd in mod.commands:
                for upd in cmd.updates:
                    for name, _ in upd.assignments:
                        if name not in declared:
                            self.fail(
                                f"update references undeclared variable '{name}'",
                                cmd.span)
                        if name not in local:
                            self.fail(
                                f"update assigns '{name}', which is not local to "
                                f"module '{mod.name}'", cmd.span)


def parse_model(text: str, file="<string>") -> ModelAst:
    """Parse a model file; raises ParseError with located diagnostics."""
    ast = _ModelParser(text, file).parse()
    return ModelAst(ast.constants, ast.formulas, ast.modules, ast.rewards,
                    source=text)


# --------------------------------------------------------------------------
# Property parser
# --------------------------------------------------------------------------

class _PropertyParser(_Parser):
    def __init__(self, text, file):
        super().__init__(text, file)
        self.text = text

    def parse(self):
        props = []
        counter = 0
        while self.tok.kind != "eof":
            start = self.tok.span
            name = None
            if self.tok.kind == "string" and self.peek(1).text == ":":
                name = _unquote(self.advance().text)
                self.advance()
            if name is None:
                counter += 1
                name = f"prop{counter}"
            start_i = self.i
            spec = self._property(name, start)
            source = self._source_slice(start_i, self.i)
            props.append(PropertySpec(
                spec.name, spec.kind, spec.path, spec.bound_op, spec.bound,
                spec.reward, source_text=source, span=start))
            self.accept(";")  # optional terminator, kept out of source_text
        seen = set()
        for p in props:
            if p.name in seen:
                self.fail(f"duplicate property name '{p.name}'", p.span)
            seen.add(p.name)
        return props

    def _source_slice(self, start_i, end_i):
        parts = []
        for t in self.tokens[start_i:end_i]:
            parts.append(t.text)
        return " ".join(parts)

    def _property(self, name, span):
        if self.accept("P"):
            if self.accept("=?"):
                path = self._path()
                return PropertySpec(name, "P_query", path, span=span)
            for op in ("<=", ">="):
                if self.accept(op):
                    bound = self._number()
                    if not 0.0 <= bound <= 1.0:
                        self.fail(f"probability bound {bound} outside [0,1]")
                    path = self._path()
                    return PropertySpec(name, "P_bound", path, bound_op=op,
                                        bound=bound, span=span)
            self.fail("expected '=?', '>=' or '<=' after 'P'")
        if self.accept("R"):
            self.expect("{")
            if self.tok.kind != "string":
                self.fail("expected reward structure name string")
            reward = _unquote(self.advance().text)
            self.expect("}")
            self.expect("=?")
            self.expect("[")
            self.expect("F", "'F' (reward queries pair with an F target)")
            target = self.parse_expr()
            self.expect("]")
            return PropertySpec(name, "R_query", PathFormula("F", target),
                                reward=reward, span=span)
        self.fail(f"expected 'P' or 'R' property, found {self.tok.text!r}")

    def _number(self):
        neg = bool(self.accept("-"))
        t = self.tok
        if t.kind not in ("int", "real"):
            self.fail(f"expected number, found {t.text!r}")
        self.advance()
        v = float(t.text)
        return -v if neg else v

    def _path(self):
        self.expect("[")
        if self.accept("F"):
            bound = None
            if self.accept("<="):
                t = self.tok
                if t.kind != "int":
                    self.fail("expected integer step bound after 'F<='")
                bound = int(self.advance().text)
            target = self.parse_expr()
            self.expect("]")
            if bound is None:
                return PathFormula("F", target)
            return PathFormula("F<=", target, bound=bound)
        if self.accept("G"):
            body = self.parse_expr()
            self.expect("]")
            return PathFormula("G", body)
        if self.at("X"):
            self.fail("unsupported construct: 'X' (next) path operator")
        left = self.parse_expr()
        self.expect("U", "'U' (until) between path operands")
        right = self.parse_expr()
        self.expect("]")
        return PathFormula("U", right, constraint=left)


def parse_properties(text: str, file="<string>"):
    """Parse a property file into a list of PropertySpec."""
    return _PropertyParser(text, file).parse()


def _unquote(s):
    return s[1:-1].replace('\\"', '"').replace("\\\\", "\\")


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

_PREC = {
    "->": 1, "|": 2, "&": 3,
    "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6,
}


def render_expr(e: Expr, parent_prec=0) -> str:
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return repr(e.value)
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Unary):
        if e.op == "!":
            # '!' sits between '&' and the comparisons in the grammar, so it
            # needs parentheses anywhere tighter than an '&' operand.
            s = "!" + render_expr(e.operand, 4)
            return f"({s})" if parent_prec > 3 else s
        inner = render_expr(e.operand, 7)
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        # Right operand of -, / and chained comparisons must keep grouping.
        left = render_expr(e.left, prec)
        right = render_expr(e.right, prec + 1)
        if e.op == "->":
            # right-associative
            left = render_expr(e.left, prec + 1)
            right = render_expr(e.right, prec)
        s = f"{left} {e.op} {right}"
        if prec < parent_prec:
            return f"({s})"
        return s
    raise TypeError(f"not an expression: {e!r}")


def render_model(ast: ModelAst) -> str:
    """Pretty-print a model; parse(render(ast)) is structurally equal to ast."""
    out = ["dtmc", ""]
    for c in ast.constants:
        out.append(f"const {c.kind} {c.name} = {render_expr(c.value)};")
    if ast.constants:
        out.append("")
    for f in ast.formulas:
        out.append(f"formula {f.name} = {render_expr(f.expr)};")
    if ast.formulas:
        out.append("")
    for mod in ast.modules:
        out.append(f"module {mod.name}")
        for v in mod.variables:
            if v.is_bool:
                out.append(f"  {v.name} : bool init {render_expr(v.init)};")
            else:
                out.append(f"  {v.name} : [{render_expr(v.low)}..{render_expr(v.high)}]"
                           f" init {render_expr(v.init)};")
        if mod.variables:
            out.append("")
        for cmd in mod.commands:
            label = cmd.label or ""
            updates = " + ".join(_render_update(u) for u in cmd.updates)
            out.append(f"  [{label}] {render_expr(cmd.guard)} -> {updates};")
        out.append("endmodule")
        out.append("")
    for rs in ast.rewards:
        out.append(f'rewards "{rs.name}"')
        for item in rs.items:
            out.append(f"  {render_expr(item.guard)} : {render_expr(item.value)};")
        out.append("endrewards")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def _render_update(u: Update) -> str:
    assigns = " & ".join(f"({name}' = {render_expr(rhs)})" for name, rhs in u.assignments)
    if u.probability is None:
        return assigns
    return f"{render_expr(u.probability)} : {assigns}"


def render_property(p: PropertySpec) -> str:
    path = render_path(p.path)
    if p.kind == "P_query":
        body = f"P=? [ {path} ]"
    elif p.kind == "P_bound":
        bound = f"{p.bound:g}"
        body = f"P{p.bound_op}{bound} [ {path} ]"
    else:
        body = f'R{{"{p.reward}"}}=? [ {path} ]'
    return f'"{p.name}": {body}'


def render_path(path: PathFormula) -> str:
    if path.kind == "F":
        return f"F {render_expr(path.target)}"
    if path.kind == "F<=":
        return f"F<={path.bound} {render_expr(path.target)}"
    if path.kind == "G":
        return f"G {render_expr(path.target)}"
    return f"{render_expr(path.constraint)} U {render_expr(path.target)}"
