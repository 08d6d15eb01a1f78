"""Typed abstract syntax and evaluation semantics for the modeling language.

Covers the DTMC subset used by the toolkit: integer/real/boolean expressions,
named constants (possibly defined in terms of each other), macro-style
formulas, module-local variables with bounded integer or boolean ranges,
probabilistic guarded commands, state-reward structures, and the property
forms P=?/P>=b/P<=b over F, bounded F, G and U paths plus R{"name"}=? over F.

All AST values are immutable; evaluation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .diagnostics import BindError, Diagnostic, EvalError, SourceSpan

INT = "int"
REAL = "real"
BOOL = "bool"


# --------------------------------------------------------------------------
# Expressions
# --------------------------------------------------------------------------

class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Lit(Expr):
    value: object  # int | float | bool


@dataclass(frozen=True)
class Name(Expr):
    """Reference to a variable, constant or formula (resolved contextually)."""
    ident: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "-" | "!"
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # + - * / = != < <= > >= & | ->
    left: Expr
    right: Expr


TRUE = Lit(True)

COMPARISONS = {"=", "!=", "<", "<=", ">", ">="}
ARITH = {"+", "-", "*", "/"}
LOGIC = {"&", "|", "->"}


# --------------------------------------------------------------------------
# Declarations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantDecl:
    name: str
    kind: str  # "int" | "double"
    value: Expr
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FormulaDecl:
    name: str
    expr: Expr
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class VarDecl:
    name: str
    low: Expr | None   # None for booleans
    high: Expr | None
    init: Expr
    is_bool: bool = False
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Update:
    probability: Expr | None  # None means probability 1
    assignments: tuple  # of (var name, Expr)


@dataclass(frozen=True)
class Command:
    label: str | None
    guard: Expr
    updates: tuple  # of Update
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    variables: tuple  # of VarDecl
    commands: tuple   # of Command
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class RewardItem:
    guard: Expr
    value: Expr
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class RewardStructureDecl:
    name: str
    items: tuple  # of RewardItem
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ModelAst:
    constants: tuple   # of ConstantDecl
    formulas: tuple    # of FormulaDecl
    modules: tuple     # of ModuleDecl
    rewards: tuple     # of RewardStructureDecl
    source: str = field(default="", compare=False)

    def constant(self, name):
        for c in self.constants:
            if c.name == name:
                return c
        return None

    def all_variables(self):
        """Variable declarations across modules, in declaration order."""
        out = []
        for m in self.modules:
            out.extend(m.variables)
        return out


# --------------------------------------------------------------------------
# Properties
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PathFormula:
    kind: str            # "F" | "F<=" | "G" | "U"
    target: Expr         # psi (or the G body)
    constraint: Expr | None = None  # phi for U
    bound: int | None = None        # k for bounded F


@dataclass(frozen=True)
class PropertySpec:
    name: str
    kind: str            # "P_query" | "P_bound" | "R_query"
    path: PathFormula
    bound_op: str | None = None   # ">=" | "<=" for P_bound
    bound: float | None = None
    reward: str | None = None     # reward structure name for R_query
    source_text: str = field(default="", compare=False)
    span: SourceSpan | None = field(default=None, compare=False)


# --------------------------------------------------------------------------
# Type checking
# --------------------------------------------------------------------------

def _join_numeric(a, b):
    return INT if a == INT and b == INT else REAL


class _TypeChecker:
    def __init__(self, model: ModelAst):
        self.model = model
        self.diags = []
        self.consts = {c.name: c for c in model.constants}
        self.formulas = {f.name: f for f in model.formulas}
        self.vars = {}
        for m in model.modules:
            for v in m.variables:
                self.vars[v.name] = v
        self._formula_state = {}  # name -> "visiting" | type

    def error(self, msg, span=None):
        self.diags.append(Diagnostic("error", msg, span))

    def run(self):
        self._check_duplicates()
        for f in self.model.formulas:
            self._formula_type(f.name, f.span)
        for c in self.model.constants:
            self.infer(c.value)
        for m in self.model.modules:
            declared = {v.name for v in m.variables}
            for v in m.variables:
                self._check_vardecl(v)
            for cmd in m.commands:
                self._check_command(cmd, declared)
        for rs in self.model.rewards:
            for item in rs.items:
                if self.infer(item.guard) not in (BOOL, None):
                    self.error(f'reward guard in "{rs.name}" is not boolean', item.span)
                t = self.infer(item.value)
                if t not in (INT, REAL, None):
                    self.error(f'reward value in "{rs.name}" is not numeric', item.span)
        return self.diags

    def _check_duplicates(self):
        seen = {}
        for group in (self.model.constants, self.model.formulas,
                      self.model.all_variables(), self.model.modules):
            for d in group:
                if d.name in seen:
                    self.error(f"duplicate identifier '{d.name}'", d.span)
                seen[d.name] = d

    def _check_vardecl(self, v):
        if v.is_bool:
            if self.infer(v.init) not in (BOOL, None):
                self.error(f"init of boolean variable '{v.name}' is not boolean", v.span)
            return
        for e, what in ((v.low, "lower bound"), (v.high, "upper bound"), (v.init, "init")):
            if self.infer(e) not in (INT, None):
                self.error(f"{what} of '{v.name}' is not an integer expression", v.span)

    def _check_command(self, cmd, declared):
        if self.infer(cmd.guard) not in (BOOL, None):
            self.error("command guard is not boolean", cmd.span)
        for upd in cmd.updates:
            if upd.probability is not None:
                if self.infer(upd.probability) not in (INT, REAL, None):
                    self.error("update probability is not numeric", cmd.span)
            for name, rhs in upd.assignments:
                var = self.vars.get(name)
                if var is None or name not in declared:
                    self.error(
                        f"assignment target '{name}' is not a variable of this module",
                        cmd.span)
                    continue
                t = self.infer(rhs)
                if t is None:
                    continue
                if var.is_bool and t != BOOL:
                    self.error(f"assignment to boolean '{name}' is not boolean", cmd.span)
                if not var.is_bool and t not in (INT, REAL):
                    self.error(f"assignment to '{name}' is not numeric", cmd.span)

    def _formula_type(self, name, span=None):
        state = self._formula_state.get(name)
        if state == "visiting":
            self.error(f"recursive formula '{name}'", span)
            self._formula_state[name] = None
            return None
        if name in self._formula_state:
            return self._formula_state[name]
        self._formula_state[name] = "visiting"
        t = self.infer(self.formulas[name].expr)
        self._formula_state[name] = t
        return t

    def infer(self, e):
        """Expression type, or None if a diagnostic was already emitted."""
        if isinstance(e, Lit):
            if isinstance(e.value, bool):
                return BOOL
            return INT if isinstance(e.value, int) else REAL
        if isinstance(e, Name):
            if e.ident in self.vars:
                return BOOL if self.vars[e.ident].is_bool else INT
            if e.ident in self.consts:
                return INT if self.consts[e.ident].kind == "int" else REAL
            if e.ident in self.formulas:
                return self._formula_type(e.ident, e.span)
            self.error(f"unknown identifier '{e.ident}'", e.span)
            return None
        if isinstance(e, Unary):
            t = self.infer(e.operand)
            if t is None:
                return None
            if e.op == "-":
                if t not in (INT, REAL):
                    self.error("operand of unary '-' is not numeric")
                    return None
                return t
            if t != BOOL:
                self.error("operand of '!' is not boolean")
                return None
            return BOOL
        if isinstance(e, Binary):
            lt = self.infer(e.left)
            rt = self.infer(e.right)
            if lt is None or rt is None:
                return None
            if e.op in ARITH:
                if lt == BOOL or rt == BOOL:
                    self.error(f"operands of '{e.op}' are not numeric")
                    return None
                return REAL if e.op == "/" else _join_numeric(lt, rt)
            if e.op in ("=", "!="):
                if (lt == BOOL) != (rt == BOOL):
                    self.error(f"operands of '{e.op}' have incompatible types")
                    return None
                return BOOL
            if e.op in COMPARISONS:
                if lt == BOOL or rt == BOOL:
                    self.error(f"operands of '{e.op}' are not numeric")
                    return None
                return BOOL
            if e.op in LOGIC:
                if lt != BOOL or rt != BOOL:
                    self.error(f"operands of '{e.op}' are not boolean")
                    return None
                return BOOL
        raise TypeError(f"not an expression: {e!r}")


def type_check(model: ModelAst):
    """Check the model; returns a list of diagnostics (empty when clean)."""
    return _TypeChecker(model).run()


# --------------------------------------------------------------------------
# Constant binding
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VarInfo:
    name: str
    low: int | None
    high: int | None
    init: object
    is_bool: bool


@dataclass(frozen=True)
class BoundModel:
    """A type-checked model with every constant resolved to a value."""
    ast: ModelAst
    constants: dict        # name -> int | float
    formulas: dict         # name -> Expr
    variables: tuple       # of VarInfo, declaration order

    def var_names(self):
        return tuple(v.name for v in self.variables)


_PROB_SUM_TOL = 1e-10


def bind_constants(model: ModelAst, overrides=None) -> BoundModel:
    """Resolve all constants, applying overrides, and evaluate derived ones.

    Overrides replace a constant's defining expression; derived constants are
    then re-evaluated, so overriding e.g. one branch probability flows into
    constants defined in terms of it.
    """
    overrides = dict(overrides or {})
    decls = {c.name: c for c in model.constants}
    for name, value in overrides.items():
        decl = decls.get(name)
        if decl is None:
            raise BindError(f"unknown constant '{name}'")
        if decl.kind == "int":
            if isinstance(value, bool) or not float(value).is_integer():
                raise BindError(f"constant '{name}' is int but override is {value!r}")
            overrides[name] = int(value)
        else:
            overrides[name] = float(value)

    formulas = {f.name: f.expr for f in model.formulas}
    values = {}
    visiting = set()

    def resolve(name):
        if name in values:
            return values[name]
        if name in visiting:
            raise BindError(f"cyclic constant definition involving '{name}'")
        decl = decls[name]
        visiting.add(name)
        if name in overrides:
            v = overrides[name]
        else:
            v = _eval(decl.value, {}, values, formulas, resolve_const=resolve)
            if decl.kind == "int":
                if isinstance(v, float):
                    if not v.is_integer():
                        raise BindError(f"constant '{name}' is int but evaluates to {v}")
                    v = int(v)
            else:
                v = float(v)
        visiting.discard(name)
        values[name] = v
        return v

    for name in decls:
        resolve(name)

    variables = []
    for v in model.all_variables():
        env = BoundModel(model, values, formulas, ())
        if v.is_bool:
            init = eval_expr(v.init, {}, env)
            variables.append(VarInfo(v.name, None, None, bool(init), True))
            continue
        low = int(eval_expr(v.low, {}, env))
        high = int(eval_expr(v.high, {}, env))
        init = int(eval_expr(v.init, {}, env))
        if low > high:
            raise BindError(f"variable '{v.name}' has empty range [{low}..{high}]")
        if not low <= init <= high:
            raise BindError(f"init of '{v.name}' ({init}) outside [{low}..{high}]")
        variables.append(VarInfo(v.name, low, high, init, False))

    bound = BoundModel(model, values, formulas, tuple(variables))
    _check_closed_probabilities(bound)
    return bound


def _check_closed_probabilities(bound):
    """Validate update probabilities that do not depend on state variables."""
    var_names = set(bound.var_names())
    for mod in bound.ast.modules:
        for cmd in mod.commands:
            probs = []
            closed = True
            for upd in cmd.updates:
                if upd.probability is None:
                    probs.append(1.0)
                    continue
                if _refers_to(upd.probability, var_names, bound.formulas):
                    closed = False
                    break
                p = float(eval_expr(upd.probability, {}, bound))
                if not -_PROB_SUM_TOL <= p <= 1 + _PROB_SUM_TOL:
                    raise BindError(
                        f"update probability {p} outside [0,1] in module "
                        f"'{mod.name}' ({cmd.span})")
                probs.append(p)
            if closed and abs(sum(probs) - 1.0) > _PROB_SUM_TOL:
                raise BindError(
                    f"update probabilities sum to {sum(probs)} (not 1) in module "
                    f"'{mod.name}' ({cmd.span})")


def _refers_to(e, names, formulas):
    if isinstance(e, Name):
        if e.ident in names:
            return True
        body = formulas.get(e.ident)
        return body is not None and _refers_to(body, names, formulas)
    if isinstance(e, Unary):
        return _refers_to(e.operand, names, formulas)
    if isinstance(e, Binary):
        return _refers_to(e.left, names, formulas) or _refers_to(e.right, names, formulas)
    return False


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def eval_expr(e: Expr, valuation: dict, env: BoundModel):
    """Evaluate an expression under a variable valuation.

    Formulas are expanded by substitution; division is real-valued.
    """
    return _eval(e, valuation, env.constants, env.formulas)


def _eval(e, valuation, constants, formulas, resolve_const=None):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Name):
        if e.ident in valuation:
            return valuation[e.ident]
        if e.ident in constants:
            return constants[e.ident]
        if resolve_const is not None and e.ident not in formulas:
            return resolve_const(e.ident)
        if e.ident in formulas:
            return _eval(formulas[e.ident], valuation, constants, formulas, resolve_const)
        raise EvalError(f"unbound identifier '{e.ident}'")
    if isinstance(e, Unary):
        v = _eval(e.operand, valuation, constants, formulas, resolve_const)
        return -v if e.op == "-" else not v
    if isinstance(e, Binary):
        l = _eval(e.left, valuation, constants, formulas, resolve_const)
        if e.op == "&":
            return bool(l) and bool(_eval(e.right, valuation, constants, formulas, resolve_const))
        if e.op == "|":
            return bool(l) or bool(_eval(e.right, valuation, constants, formulas, resolve_const))
        if e.op == "->":
            return (not l) or bool(_eval(e.right, valuation, constants, formulas, resolve_const))
        r = _eval(e.right, valuation, constants, formulas, resolve_const)
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        if e.op == "/":
            if r == 0:
                raise EvalError("division by zero")
            return l / r
        if e.op == "=":
            return l == r
        if e.op == "!=":
            return l != r
        if e.op == "<":
            return l < r
        if e.op == "<=":
            return l <= r
        if e.op == ">":
            return l > r
        if e.op == ">=":
            return l >= r
    raise TypeError(f"not an expression: {e!r}")


def expand_formulas(e: Expr, formulas: dict) -> Expr:
    """Inline every formula reference (assumes acyclicity)."""
    if isinstance(e, Name) and e.ident in formulas:
        return expand_formulas(formulas[e.ident], formulas)
    if isinstance(e, Unary):
        return Unary(e.op, expand_formulas(e.operand, formulas))
    if isinstance(e, Binary):
        return Binary(e.op, expand_formulas(e.left, formulas),
                      expand_formulas(e.right, formulas))
    return e
