"""Deterministic expression formatting for reports and the .pde text format.

Terms print in graded lexicographic order keyed on (dependent index,
multi-index, variable name), so identical content always renders to
identical text; the parser round-trips this output.
"""

from __future__ import annotations

import sympy

from .exprs import Context, Expr, normalize
from .systems import MultiIndex


def _generator_key(ctx: Context, base: Expr):
    if isinstance(base, sympy.Symbol):
        info = ctx._resolve_jet(base)
        if info is not None:
            dep, alpha = info
            return (0, ctx.dependent.index(dep), sum(alpha), tuple(alpha))
        name = str(base)
        if name in ctx.independent:
            return (1, ctx.independent.index(name), 0, ())
        return (2, str(base))
    if isinstance(base, sympy.Function):
        return (3, type(base).__name__, tuple(str(a) for a in base.args))
    return (4, str(base))


def _term_parts(term: Expr):
    coeff, rest = term.as_coeff_Mul()
    powers = rest.as_powers_dict() if rest != 1 else {}
    return coeff, dict(powers)


def _term_key(ctx: Context, term: Expr):
    coeff, powers = _term_parts(term)
    degree = 0
    for exp in powers.values():
        if exp.is_Integer:
            degree += int(exp)
    vec = sorted((_generator_key(ctx, b), str(e)) for b, e in powers.items())
    return (-degree, vec, str(coeff))


def _format_exponent(ctx: Context, exp: Expr) -> str:
    if exp.is_Integer and int(exp) >= 0:
        return str(int(exp))
    if isinstance(exp, sympy.Symbol):
        return str(exp)
    return f"({format_expr(ctx, exp)})"


def _format_base(ctx: Context, base: Expr) -> str:
    if isinstance(base, sympy.Symbol):
        return str(base)
    if isinstance(base, sympy.Function):
        args = ", ".join(format_expr(ctx, a) for a in base.args)
        return f"{type(base).__name__}({args})"
    if isinstance(base, sympy.Integer) and int(base) > 0:
        return str(base)
    return f"({format_expr(ctx, base)})"


def _format_term(ctx: Context, term: Expr) -> tuple[str, str]:
    """Return (sign, body) for one product term."""
    coeff, powers = _term_parts(term)
    sign = "-" if coeff < 0 else "+"
    coeff = abs(coeff)
    factors = []
    for base, exp in sorted(powers.items(), key=lambda kv: _generator_key(ctx, kv[0])):
        text = _format_base(ctx, base)
        if exp != 1:
            text += f"^{_format_exponent(ctx, exp)}"
        factors.append(text)
    num, den = int(coeff.p), int(coeff.q)
    if not factors:
        body = str(num) if den == 1 else f"{num}/{den}"
    else:
        body = "*".join(factors)
        if num != 1:
            body = f"{num}*{body}"
        if den != 1:
            body = f"{body}/{den}"
    return sign, body


def _format_polynomial(ctx: Context, e: Expr) -> str:
    e = sympy.expand(e)
    if e == 0:
        return "0"
    terms = sorted(sympy.Add.make_args(e), key=lambda t: _term_key(ctx, t))
    out = []
    for i, term in enumerate(terms):
        sign, body = _format_term(ctx, term)
        if i == 0:
            out.append(body if sign == "+" else f"-{body}")
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


def format_expr(ctx: Context, e) -> str:
    """Canonical text for a (normalized) expression."""
    e = normalize(e)
    num, den = e.as_numer_denom()
    if den == 1:
        return _format_polynomial(ctx, num)
    num_text = _format_polynomial(ctx, num)
    den_text = _format_polynomial(ctx, den)
    if len(sympy.Add.make_args(sympy.expand(num))) > 1:
        num_text = f"({num_text})"
    if not _is_atomic_text(den_text):
        den_text = f"({den_text})"
    return f"{num_text}/{den_text}"


def _is_atomic_text(text: str) -> bool:
    return text.isalnum() or (text and text[0].isalpha() and all(c.isalnum() or c in "_'" for c in text))


def format_operator(ctx: Context, op) -> str:
    """Operator matrix literal: entries are sums of coefficient*D_suffix terms."""
    rows = []
    for i in range(op.rows):
        entries = []
        for j in range(op.cols):
            entries.append(_format_operator_entry(ctx, op.entries[i][j]))
        rows.append(", ".join(entries))
    return "[" + "; ".join(rows) + "]"


def _format_operator_entry(ctx: Context, entry) -> str:
    if not entry:
        return "0"
    parts = []
    for alpha in sorted(entry, key=lambda a: (a.order, tuple(a))):
        coeff = entry[alpha]
        alpha = MultiIndex(alpha)
        if alpha.order == 0:
            parts.append(format_expr(ctx, coeff))
            continue
        dname = "D_" + "".join(v * k for v, k in zip(ctx.independent, alpha))
        ctext = format_expr(ctx, coeff)
        if ctext == "1":
            parts.append(dname)
        elif ctext == "-1":
            parts.append(f"-{dname}")
        else:
            if " + " in ctext or " - " in ctext or ctext.startswith("-") or "/" in ctext:
                ctext = f"({ctext})"
            parts.append(f"{ctext}*{dname}")
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out
