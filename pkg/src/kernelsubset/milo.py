"""Mixed-integer linear models of the alignment subset-selection problem.

Two variants are built from a :class:`~kernelsubset.dataset.PairStructure`:

``full``
    one chain ``e[i,h,1..p+1]`` for every ordered pair ``(i, h)`` of
    instances (diagonal included) with four big-M inequalities per
    pair and layer and a uniform constant ``M``.
``reduced``
    chains only for ``i < h``; same-class pairs keep the two upper
    inequalities, cross-class pairs the two lower ones, each with its own
    coefficient ``M[i,h,j]``.

Feasible points are recovered from a mask with :func:`reconstruct_e`,
checked with :func:`verify_solution` and written out with
:func:`export_model` (CPLEX LP or free MPS text).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .dataset import PairStructure, SubsetMask

#: additive padding used by the stabilized big-M coefficient
STABILIZE_PAD = 0.1

FULL = "full"
REDUCED = "reduced"

# Inequality kinds, in emission order. Each reads
#   e[k, j+1] + c_prev * e[k, j] + c_z * z_j  (sense)  rhs
KINDS = ("keep_lo", "keep_up", "mult_lo", "mult_up")


class ModelError(ValueError):
    pass


def big_m(d, gamma: float, stabilized: bool = False, pad: float = STABILIZE_PAD):
    """Big-M coefficient ``1 - exp(-gamma d)``, optionally padded and capped at 1."""
    m = 1.0 - np.exp(-gamma * np.asarray(d, dtype=float))
    if stabilized:
        m = np.minimum(m + pad, 1.0)
    return float(m) if np.ndim(m) == 0 else m


@dataclass(frozen=True)
class EMatrix:
    """Layered chain values; row ``k`` belongs to ``pairs[k]``, column ``j`` to layer ``j+1``."""

    pairs: np.ndarray
    values: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.values[:, -1]


@dataclass(frozen=True)
class Violation:
    name: str
    kind: str
    amount: float


@dataclass
class VerificationReport:
    violations: list[Violation]
    objective: float
    alignment: float
    max_indicator_residual: float | None = None

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True, eq=False)
class MiloModel:
    """Symbolic MILO instance.

    ``pairs`` are zero-based instance pairs owning a chain, ``obj`` the
    objective coefficient of each pair's final-layer variable, ``factor``
    the per-layer multiplier ``exp(-gamma d)`` and ``M`` the big-M
    coefficient of each (pair, layer). ``kinds`` maps every pair to the
    inequality kinds it carries.

    The model objective relates to the alignment value by
    ``alignment = obj_offset + obj_scale * objective``.
    """

    variant: str
    n: int
    p: int
    theta: int
    gamma: float
    pairs: np.ndarray
    obj: np.ndarray
    factor: np.ndarray
    M: np.ndarray
    kinds: tuple[tuple[str, ...], ...]
    obj_offset: float = 0.0
    obj_scale: float = 1.0
    stabilized: bool = False
    _kind_rows: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        rows = {k: np.array([r for r, ks in enumerate(self.kinds) if k in ks], dtype=int) for k in KINDS}
        self._kind_rows.update(rows)

    # -- sizes -------------------------------------------------------------
    @property
    def n_binary(self) -> int:
        return self.p

    @property
    def n_continuous(self) -> int:
        return len(self.pairs) * (self.p + 1)

    @property
    def n_inequalities(self) -> int:
        return sum(len(ks) for ks in self.kinds) * self.p

    @property
    def n_equalities(self) -> int:
        return len(self.pairs)

    # -- constraint coefficients ------------------------------------------
    def coefficients(self, kind: str):
        """Return ``(rows, c_prev, c_z, sense, rhs)`` for one inequality kind.

        ``c_prev``, ``c_z`` and ``rhs`` have shape ``(len(rows), p)``.
        """
        rows = self._kind_rows[kind]
        a = self.factor[rows]
        M = self.M[rows]
        zero = np.zeros_like(M)
        reduced = self.variant == REDUCED
        if kind == "keep_lo":
            return rows, -np.ones_like(a), M, "G", zero
        if kind == "keep_up":
            return rows, -np.ones_like(a), (zero if reduced else -M), "L", zero
        if kind == "mult_lo":
            if reduced:
                return rows, -a, zero, "G", zero
            return rows, -a, -M, "G", -M
        if kind == "mult_up":
            return rows, -a, M, "L", M
        raise KeyError(kind)

    # -- naming ------------------------------------------------------------
    def z_name(self, j: int) -> str:
        return f"z_{j + 1}"

    def e_name(self, k: int, layer: int) -> str:
        i, h = self.pairs[k]
        return f"e_{i + 1}_{h + 1}_{layer + 1}"

    def variable_names(self) -> list[str]:
        names = [self.z_name(j) for j in range(self.p)]
        names += [self.e_name(k, l) for k in range(len(self.pairs)) for l in range(self.p + 1)]
        return names

    def iter_constraints(self):
        """Yield ``(name, terms, sense, rhs)`` in export order.

        Order: cardinality, layer-1 equalities, then coupling inequalities
        by pair, layer and kind.
        """
        yield "card", [(self.z_name(j), 1.0) for j in range(self.p)], "L", float(self.theta)
        for k in range(len(self.pairs)):
            i, h = self.pairs[k]
            yield f"init_{i + 1}_{h + 1}", [(self.e_name(k, 0), 1.0)], "E", 1.0
        coef = {}
        for kind in KINDS:
            rows, c_prev, c_z, sense, rhs = self.coefficients(kind)
            for r, k in enumerate(rows):
                coef[(int(k), kind)] = (c_prev[r], c_z[r], sense, rhs[r])
        for k in range(len(self.pairs)):
            i, h = self.pairs[k]
            for j in range(self.p):
                for kind in self.kinds[k]:
                    c_prev, c_z, sense, rhs = coef[(k, kind)]
                    terms = [(self.e_name(k, j + 1), 1.0), (self.e_name(k, j), float(c_prev[j]))]
                    if c_z[j] != 0.0:
                        terms.append((self.z_name(j), float(c_z[j])))
                    yield f"{kind}_{i + 1}_{h + 1}_{j + 1}", terms, sense, float(rhs[j])

    def objective_terms(self) -> list[tuple[str, float]]:
        return [(self.e_name(k, self.p), float(c)) for k, c in enumerate(self.obj)]


def _full_pairs(ps: PairStructure):
    """All ordered pairs (i, h) with their squared differences."""
    n, p = ps.n, ps.p
    dist = np.zeros((n, n, p))
    i_idx, h_idx = ps.pairs[:, 0], ps.pairs[:, 1]
    dist[i_idx, h_idx] = ps.dist
    dist[h_idx, i_idx] = ps.dist
    ii, hh = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    pairs = np.column_stack([ii.ravel(), hh.ravel()])
    return pairs, dist.reshape(n * n, p), np.outer(ps.psi, ps.psi).ravel()


def _check_theta(theta: int, p: int):
    if not 1 <= theta <= p:
        raise ModelError(f"theta must lie in [1, {p}], got {theta}")


def build_milo(ps: PairStructure, gamma: float, theta: int, M: float = 1.0) -> MiloModel:
    """Full big-M model over all ``n**2`` ordered instance pairs."""
    _check_theta(theta, ps.p)
    if not M > 0:
        raise ModelError("M must be positive")
    pairs, dist, obj = _full_pairs(ps)
    factor = np.exp(-gamma * dist)
    return MiloModel(
        variant=FULL,
        n=ps.n,
        p=ps.p,
        theta=int(theta),
        gamma=float(gamma),
        pairs=pairs,
        obj=obj,
        factor=factor,
        M=np.full_like(factor, float(M)),
        kinds=(KINDS,) * len(pairs),
    )


def build_rmilo(
    ps: PairStructure,
    gamma: float,
    theta: int,
    stabilized: bool = True,
    pad: float = STABILIZE_PAD,
) -> MiloModel:
    """Reduced model over pairs ``i < h`` with per-coefficient big-M values."""
    _check_theta(theta, ps.p)
    factor = np.exp(-gamma * ps.dist)
    M = big_m(ps.dist, gamma, stabilized=stabilized, pad=pad)
    M = np.asarray(M, dtype=float).reshape(factor.shape)
    plus_kinds, minus_kinds = ("keep_up", "mult_up"), ("keep_lo", "mult_lo")
    kinds = tuple(plus_kinds if s > 0 else minus_kinds for s in ps.prod)
    return MiloModel(
        variant=REDUCED,
        n=ps.n,
        p=ps.p,
        theta=int(theta),
        gamma=float(gamma),
        pairs=np.array(ps.pairs),
        obj=np.array(ps.prod),
        factor=factor,
        M=M,
        kinds=kinds,
        obj_offset=ps.psi_sq_sum,
        obj_scale=2.0,
        stabilized=stabilized,
    )


def _chain(factor: np.ndarray, z: np.ndarray) -> np.ndarray:
    step = np.where(z[None, :] > 0, factor, 1.0)
    values = np.ones((factor.shape[0], factor.shape[1] + 1))
    values[:, 1:] = np.cumprod(step, axis=1)
    return values


def _zvec(z, p: int) -> np.ndarray:
    arr = z.array() if isinstance(z, SubsetMask) else np.asarray(z, dtype=float)
    if arr.shape != (p,):
        raise ModelError(f"mask has shape {arr.shape}, expected ({p},)")
    return arr


def reconstruct_e(z, ps: PairStructure, gamma: float, variant: str = REDUCED) -> EMatrix:
    """Chain values implied by mask ``z``: multiply by ``exp(-gamma d_j)`` where ``z_j = 1``."""
    zv = _zvec(z, ps.p)
    if variant == FULL:
        pairs, dist, _ = _full_pairs(ps)
    elif variant == REDUCED:
        pairs, dist = np.array(ps.pairs), ps.dist
    else:
        raise ModelError(f"unknown variant {variant!r}")
    return EMatrix(pairs=pairs, values=_chain(np.exp(-gamma * dist), zv))


def model_reconstruct_e(m: MiloModel, z) -> EMatrix:
    """Chain values for the pairs of an existing model."""
    return EMatrix(pairs=m.pairs, values=_chain(m.factor, _zvec(z, m.p)))


def verify_solution(m: MiloModel, e: EMatrix, z, tol: float = 1e-9) -> VerificationReport:
    """Check every constraint of ``m`` at ``(e, z)`` and recompute the objective."""
    zv = _zvec(z, m.p)
    vals = np.asarray(e.values, dtype=float)
    if vals.shape != (len(m.pairs), m.p + 1):
        raise ModelError(f"e has shape {vals.shape}, expected {(len(m.pairs), m.p + 1)}")
    if not np.array_equal(np.asarray(e.pairs), m.pairs):
        raise ModelError("e pairs do not match the model")

    out: list[Violation] = []
    for j in np.flatnonzero(np.abs(zv - np.round(zv)) > tol):
        out.append(Violation(m.z_name(j), "integrality", float(abs(zv[j] - round(zv[j])))))
    for j in np.flatnonzero((zv < -tol) | (zv > 1 + tol)):
        out.append(Violation(m.z_name(j), "bound", float(max(-zv[j], zv[j] - 1))))
    excess = zv.sum() - m.theta
    if excess > tol:
        out.append(Violation("card", "cardinality", float(excess)))
    for k in np.flatnonzero(np.abs(vals[:, 0] - 1.0) > tol):
        i, h = m.pairs[k]
        out.append(Violation(f"init_{i + 1}_{h + 1}", "init", float(abs(vals[k, 0] - 1.0))))
    neg = np.argwhere(vals < -tol)
    for k, l in neg:
        out.append(Violation(m.e_name(k, l), "bound", float(-vals[k, l])))

    for kind in KINDS:
        rows, c_prev, c_z, sense, rhs = m.coefficients(kind)
        if len(rows) == 0:
            continue
        lhs = vals[rows, 1:] + c_prev * vals[rows, :-1] + c_z * zv[None, :]
        gap = lhs - rhs if sense == "L" else rhs - lhs
        for r, j in np.argwhere(gap > tol):
            k = rows[r]
            i, h = m.pairs[k]
            out.append(Violation(f"{kind}_{i + 1}_{h + 1}_{j + 1}", kind, float(gap[r, j])))

    objective = float(np.dot(m.obj, vals[:, -1]))
    report = VerificationReport(out, objective, m.obj_offset + m.obj_scale * objective)
    report.max_indicator_residual = indicator_residual(m, vals, zv)
    return report


def indicator_residual(m: MiloModel, values: np.ndarray, z: np.ndarray) -> float:
    """Largest residual of the implication form of the coupling constraints.

    ``z_j = 0`` forces ``e[j+1] = e[j]``; ``z_j = 1`` forces
    ``e[j+1] = exp(-gamma d_j) e[j]``. Only meaningful for binary ``z``.
    """
    on = np.round(z) > 0
    target = np.where(on[None, :], m.factor * values[:, :-1], values[:, :-1])
    if values.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(values[:, 1:] - target)))


def decode_solution(m: MiloModel, assignment: dict[str, float]):
    """Turn a name -> value mapping (e.g. from an external solver) into ``(z, EMatrix)``."""
    z = np.array([assignment.get(m.z_name(j), 0.0) for j in range(m.p)])
    vals = np.empty((len(m.pairs), m.p + 1))
    for k in range(len(m.pairs)):
        for l in range(m.p + 1):
            vals[k, l] = assignment[m.e_name(k, l)]
    return z, EMatrix(pairs=m.pairs, values=vals)


# -- export -------------------------------------------------------------------


def _num(v: float) -> str:
    v = float(v)
    if v == 0.0:
        return "0"
    return repr(v)


def _lp_expr(terms) -> str:
    parts = []
    for name, c in terms:
        if c == 0.0:
            continue
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1.0 else _num(mag) + " "
        parts.append(f"{sign} {coef}{name}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def _wrap(text: str, width: int = 200) -> list[str]:
    # LP readers cap line length; break between terms.
    lines, cur = [], ""
    for tok in text.split(" "):
        if cur and len(cur) + len(tok) + 1 > width and tok in ("+", "-"):
            lines.append(cur)
            cur = tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    if cur:
        lines.append(cur)
    return lines


def _to_lp(m: MiloModel) -> str:
    sense_sym = {"L": "<=", "G": ">=", "E": "="}
    buf = io.StringIO()
    buf.write(f"\\ kernelsubset {m.variant} model n={m.n} p={m.p} theta={m.theta} gamma={_num(m.gamma)}\n")
    buf.write("Maximize\n")
    for line in _wrap("obj: " + _lp_expr(m.objective_terms())):
        buf.write(f" {line}\n")
    buf.write("Subject To\n")
    for name, terms, sense, rhs in m.iter_constraints():
        for line in _wrap(f"{name}: {_lp_expr(terms)} {sense_sym[sense]} {_num(rhs)}"):
            buf.write(f" {line}\n")
    buf.write("Bounds\n")
    for name in m.variable_names()[m.p:]:
        buf.write(f" {name} >= 0\n")
    buf.write("Binaries\n")
    for j in range(m.p):
        buf.write(f" {m.z_name(j)}\n")
    buf.write("End\n")
    return buf.getvalue()


def _to_mps(m: MiloModel) -> str:
    rows: list[tuple[str, str]] = []
    rhs: dict[str, float] = {}
    columns: dict[str, list[tuple[str, float]]] = {name: [] for name in m.variable_names()}
    for name, c in m.objective_terms():
        columns[name].append(("obj", c))
    for name, terms, sense, b in m.iter_constraints():
        rows.append((sense, name))
        if b != 0.0:
            rhs[name] = b
        for var, c in terms:
            if c != 0.0:
                columns[var].append((name, c))

    buf = io.StringIO()
    buf.write(f"NAME kernelsubset_{m.variant}\n")
    buf.write("OBJSENSE\n    MAX\n")
    buf.write("ROWS\n N obj\n")
    for sense, name in rows:
        buf.write(f" {sense} {name}\n")
    buf.write("COLUMNS\n")
    buf.write("    MARKER 'MARKER' 'INTORG'\n")
    names = m.variable_names()
    for var in names[: m.p]:
        for row, c in columns[var]:
            buf.write(f"    {var} {row} {_num(c)}\n")
    buf.write("    MARKER 'MARKER' 'INTEND'\n")
    for var in names[m.p:]:
        for row, c in columns[var]:
            buf.write(f"    {var} {row} {_num(c)}\n")
    buf.write("RHS\n")
    for _, name in rows:
        if name in rhs:
            buf.write(f"    RHS {name} {_num(rhs[name])}\n")
    buf.write("BOUNDS\n")
    for var in names[: m.p]:
        buf.write(f" BV BND {var}\n")
    buf.write("ENDATA\n")
    return buf.getvalue()


EXPORTERS = {"lp": _to_lp, "mps": _to_mps}


def export_model(m: MiloModel, fmt: str = "lp") -> str:
    """Serialize ``m`` as CPLEX-LP (``"lp"``) or free-MPS (``"mps"``) text.

    Indicator implications are always written in big-M form.
    """
    try:
        writer = EXPORTERS[fmt.lower()]
    except KeyError:
        raise ModelError(f"unsupported format {fmt!r}; use one of {sorted(EXPORTERS)}") from None
    for arr in (m.obj, m.factor, m.M):
        if not np.all(np.isfinite(arr)):
            raise ModelError("model has non-finite coefficients")
    return writer(m)
