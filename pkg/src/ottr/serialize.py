"""Canonical text serialization for every value type.

One value per file: a format tag line, a theory block, a kind line, term
lines in canonical order, and ``end``.  Emission is deterministic, terms are
sorted, coefficients are in lowest terms, and parsing a file then re-emitting
it reproduces the bytes exactly.  The parser is strict: non-canonical
coefficients, unknown variable kinds, and terms outside the declared
truncation are rejected with line and column positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import (
    KIND_CODES as JET_KIND_CODES,
    KIND_NAMES as JET_KIND_NAMES,
    KIND_V,
    JetPoly,
    mono_deg0,
)
from .bigphase import (
    BIG_KIND_CODES,
    BIG_KIND_NAMES,
    KIND_T,
    BigSeries,
    TheoryData,
    Truncation,
    big_var_name,
    mono_degree,
)
from .genus0 import ResidualReport
from .laxpde import LinearDiffOp

FORMAT_TAG = "ottr-series-v1"


class ParseError(ValueError):
    """Malformed input; carries 1-based line and column."""

    def __init__(self, message: str, line: int, col: int = 1):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


@dataclass
class ReportFile:
    """Round-trippable digest of a residual report."""

    entries: list[tuple[str, tuple, bool, int | None]]
    ranges: dict[str, str] = field(default_factory=dict)

    @property
    def all_zero(self) -> bool:
        return all(zero for _, _, zero, _ in self.entries)


def _fmt_frac(x: Fraction) -> str:
    return str(x)


def _fmt_vec(vec) -> str:
    return ",".join(_fmt_frac(x) for x in vec)


def _fmt_mat(mat) -> str:
    return ";".join(_fmt_vec(row) for row in mat)


def _fmt_rel(rel: int | None) -> str:
    return "-" if rel is None else str(rel)


def _fmt_idx(idx: tuple) -> str:
    if not idx:
        return "-"
    parts = []
    for i in idx:
        parts.append(big_var_name(i) if isinstance(i, tuple) else str(i))
    return ":".join(parts)


def emit_theory(theory: TheoryData) -> str:
    tr = theory.trunc
    return (f"theory rank={theory.n} eta={_fmt_mat(theory.eta)} "
            f"A={_fmt_vec(theory.avec)} Dt={tr.deg_max} Amax={tr.level_max} "
            f"Dv={tr.deg0_max} J={tr.jet_max} E={tr.eps_max}")


def _emit_big_terms(value: BigSeries) -> list[str]:
    lines = []
    for (eps, mono), coef in value.sorted_terms():
        vars_txt = ",".join(f"{BIG_KIND_NAMES[k]}:{a}:{lv}:{e}"
                            for (k, a, lv), e in mono) or "-"
        lines.append(f"term {_fmt_frac(coef)} eps={eps} vars={vars_txt}")
    return lines


def _emit_jet_terms(value: JetPoly) -> list[str]:
    lines = []
    for (eps, mono), coef in value.sorted_terms():
        vars_txt = ",".join(f"{JET_KIND_NAMES[k]}:{a}:{j}:{e}"
                            for (k, a, j), e in mono) or "-"
        lines.append(f"term {_fmt_frac(coef)} eps={eps} vars={vars_txt}")
    return lines


def emit(value, theory: TheoryData) -> str:
    """Serialize a BigSeries, JetPoly, LinearDiffOp, or ResidualReport."""
    lines = [FORMAT_TAG, emit_theory(theory)]
    if isinstance(value, BigSeries):
        lines.append(f"kind bigseries rel={_fmt_rel(value.rel)}")
        lines.extend(_emit_big_terms(value))
    elif isinstance(value, JetPoly):
        lines.append(f"kind jetpoly rel={_fmt_rel(value.rel)}")
        lines.extend(_emit_jet_terms(value))
    elif isinstance(value, LinearDiffOp):
        meta = ":".join(str(x) for x in value.meta) or "-"
        lines.append(f"kind operator meta={meta}")
        for (i, j) in sorted(value.coeffs):
            poly = value.coeffs[(i, j)]
            lines.append(f"coef i={i} j={j} rel={_fmt_rel(poly.rel)}")
            lines.extend(_emit_jet_terms(poly))
    elif isinstance(value, (ResidualReport, ReportFile)):
        lines.append("kind report")
        if isinstance(value, ResidualReport):
            entries = [(e.equation, e.indices, e.is_zero, e.window)
                       for e in value.entries]
            ranges = value.checked
        else:
            entries = value.entries
            ranges = value.ranges
        for eq, idx, zero, window in sorted(entries, key=lambda t: (t[0], t[1])):
            status = "zero" if zero else "nonzero"
            lines.append(f"entry eq={eq} idx={_fmt_idx(idx)} status={status} "
                         f"window={_fmt_rel(window)}")
        for eq in sorted(ranges):
            lines.append(f"range {eq} {ranges[eq]}")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_frac(tok: str, line_no: int, col: int) -> Fraction:
    try:
        val = Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"malformed coefficient {tok!r}", line_no, col) from None
    if str(val) != tok:
        raise ParseError(f"coefficient {tok!r} is not canonical "
                         f"(expected {val!s})", line_no, col)
    return val


def _parse_rel(tok: str, line_no: int) -> int | None:
    if tok == "-":
        return None
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"bad reliable degree {tok!r}", line_no) from None


def _kv(token: str, key: str, line_no: int) -> str:
    if not token.startswith(key + "="):
        raise ParseError(f"expected {key}=..., got {token!r}", line_no)
    return token[len(key) + 1:]


def _parse_theory(line: str, line_no: int) -> TheoryData:
    toks = line.split()
    if len(toks) != 9 or toks[0] != "theory":
        raise ParseError("malformed theory line", line_no)
    rank = int(_kv(toks[1], "rank", line_no))
    eta_txt = _kv(toks[2], "eta", line_no)
    col = line.index("eta=") + 5
    eta = [[_parse_frac(x, line_no, col) for x in row.split(",")]
           for row in eta_txt.split(";")]
    a_txt = _kv(toks[3], "A", line_no)
    col = line.index("A=") + 3
    avec = [_parse_frac(x, line_no, col) for x in a_txt.split(",")]
    tr = Truncation(int(_kv(toks[4], "Dt", line_no)),
                    int(_kv(toks[5], "Amax", line_no)),
                    int(_kv(toks[6], "Dv", line_no)),
                    int(_kv(toks[7], "J", line_no)),
                    int(_kv(toks[8], "E", line_no)))
    try:
        return TheoryData.build(rank, eta, avec, tr)
    except ValueError as exc:
        raise ParseError(str(exc), line_no) from None


def _parse_term(line: str, line_no: int, *, big: bool, theory: TheoryData):
    toks = line.split()
    if len(toks) != 4:
        raise ParseError("malformed term line", line_no)
    coef = _parse_frac(toks[1], line_no, line.index(toks[1]) + 1)
    eps = int(_kv(toks[2], "eps", line_no))
    tr = theory.trunc
    if eps < 0 or eps > tr.eps_max:
        raise ParseError(f"eps power {eps} outside truncation", line_no)
    vars_txt = _kv(toks[3], "vars", line_no)
    factors = []
    if vars_txt != "-":
        seen = []
        for piece in vars_txt.split(","):
            parts = piece.split(":")
            if len(parts) != 4:
                raise ParseError(f"malformed variable {piece!r}", line_no,
                                 line.index(piece) + 1)
            kind_name, alpha, idx, exp = parts[0], int(parts[1]), int(parts[2]), int(parts[3])
            codes = BIG_KIND_CODES if big else JET_KIND_CODES
            if kind_name not in codes:
                raise ParseError(f"unknown variable kind {kind_name!r}", line_no,
                                 line.index(piece) + 1)
            if exp < 1:
                raise ParseError("exponents must be positive", line_no)
            kind = codes[kind_name]
            if big:
                if kind == KIND_T and not 1 <= alpha <= theory.n:
                    raise ParseError(f"component index {alpha} outside rank", line_no)
                if kind != KIND_T and alpha != 0:
                    raise ParseError("s-variables carry no component index", line_no)
                if idx < 0 or idx > tr.level_max:
                    raise ParseError(f"level {idx} outside truncation", line_no)
            else:
                if kind == KIND_V and not 1 <= alpha <= theory.n:
                    raise ParseError(f"component index {alpha} outside rank", line_no)
                if kind != KIND_V and alpha != 0:
                    raise ParseError("phi/f-variables carry no component index", line_no)
                if idx < 0 or idx > tr.jet_max:
                    raise ParseError(f"jet order {idx} outside truncation", line_no)
            seen.append(((kind, alpha, idx), exp))
        if seen != sorted(seen) or len({v for v, _ in seen}) != len(seen):
            raise ParseError("variables not in canonical order", line_no)
        factors = seen
    mono = tuple(factors)
    if big:
        if mono_degree(mono) > tr.deg_max:
            raise ParseError("term degree outside truncation", line_no)
    else:
        if mono_deg0(mono) > tr.deg0_max:
            raise ParseError("term degree outside truncation", line_no)
    return (eps, mono), coef


def parse(text: str):
    """Parse a serialized file; returns (value, theory)."""
    lines = text.splitlines()
    if not lines or lines[0] != FORMAT_TAG:
        raise ParseError(f"missing format tag {FORMAT_TAG!r}", 1)
    if len(lines) < 3:
        raise ParseError("truncated file", len(lines) or 1)
    theory = _parse_theory(lines[1], 2)
    kind_toks = lines[2].split()
    if not kind_toks or kind_toks[0] != "kind":
        raise ParseError("expected kind line", 3)
    kind = kind_toks[1] if len(kind_toks) > 1 else ""
    body = lines[3:]
    if not body or body[-1] != "end":
        raise ParseError("missing end marker", len(lines))
    body = body[:-1]
    base = 4
    if kind in ("bigseries", "jetpoly"):
        if len(kind_toks) != 3:
            raise ParseError("malformed kind line", 3)
        rel = _parse_rel(_kv(kind_toks[2], "rel", 3), 3)
        terms = {}
        for off, line in enumerate(body):
            if not line.startswith("term "):
                raise ParseError(f"unexpected line {line!r}", base + off)
            key, coef = _parse_term(line, base + off, big=(kind == "bigseries"),
                                    theory=theory)
            if key in terms:
                raise ParseError("duplicate term", base + off)
            if not coef:
                raise ParseError("zero coefficients are not stored", base + off)
            if rel is not None:
                deg = mono_degree(key[1]) if kind == "bigseries" else mono_deg0(key[1])
                if deg > rel:
                    raise ParseError("term beyond the declared reliable degree",
                                     base + off)
            terms[key] = coef
        if kind == "bigseries":
            return BigSeries(terms, theory.trunc, rel), theory
        return JetPoly(terms, theory.trunc.jet(), rel), theory
    if kind == "operator":
        if len(kind_toks) != 3:
            raise ParseError("malformed kind line", 3)
        meta_txt = _kv(kind_toks[2], "meta", 3)
        meta = tuple(int(x) if x.lstrip("-").isdigit() else x
                     for x in meta_txt.split(":")) if meta_txt != "-" else ()
        coeffs: dict[tuple[int, int], JetPoly] = {}
        cur: tuple[int, int] | None = None
        cur_rel: int | None = None
        cur_terms: dict = {}

        def flush(line_no):
            if cur is not None:
                if cur in coeffs:
                    raise ParseError("duplicate coefficient block", line_no)
                coeffs[cur] = JetPoly(cur_terms, theory.trunc.jet(), cur_rel)

        for off, line in enumerate(body):
            if line.startswith("coef "):
                flush(base + off)
                toks = line.split()
                if len(toks) != 4:
                    raise ParseError("malformed coef line", base + off)
                cur = (int(_kv(toks[1], "i", base + off)),
                       int(_kv(toks[2], "j", base + off)))
                cur_rel = _parse_rel(_kv(toks[3], "rel", base + off), base + off)
                cur_terms = {}
            elif line.startswith("term "):
                if cur is None:
                    raise ParseError("term before coef block", base + off)
                key, coef = _parse_term(line, base + off, big=False, theory=theory)
                cur_terms[key] = coef
            else:
                raise ParseError(f"unexpected line {line!r}", base + off)
        flush(len(lines))
        return LinearDiffOp(coeffs, meta), theory
    if kind == "report":
        entries = []
        ranges = {}
        for off, line in enumerate(body):
            if line.startswith("entry "):
                toks = line.split()
                if len(toks) != 5:
                    raise ParseError("malformed entry line", base + off)
                eq = _kv(toks[1], "eq", base + off)
                idx_txt = _kv(toks[2], "idx", base + off)
                idx = () if idx_txt == "-" else tuple(
                    int(x) if x.lstrip("-").isdigit() else x
                    for x in idx_txt.split(":"))
                status = _kv(toks[3], "status", base + off)
                if status not in ("zero", "nonzero"):
                    raise ParseError(f"bad status {status!r}", base + off)
                window = _parse_rel(_kv(toks[4], "window", base + off), base + off)
                entries.append((eq, idx, status == "zero", window))
            elif line.startswith("range "):
                _, eq, text_part = line.split(" ", 2)
                ranges[eq] = text_part
            else:
                raise ParseError(f"unexpected line {line!r}", base + off)
        return ReportFile(entries, ranges), theory
    raise ParseError(f"unknown kind {kind!r}", 3)


def dump(value, theory: TheoryData, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(emit(value, theory))


def load(path):
    with open(path, encoding="ascii") as fh:
        return parse(fh.read())
