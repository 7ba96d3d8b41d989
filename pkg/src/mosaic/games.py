"""Matrix games, zero-sum solving, best responses and game composition."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITERS = 100_000
# largest min(rows, cols) for which exact support enumeration is attempted
ENUMERATION_LIMIT = 4


class ConvergenceError(RuntimeError):
    def __init__(self, message, best=None, regret=float("inf")):
        super().__init__(message)
        self.best = best
        self.regret = regret


@dataclass(frozen=True)
class MixedStrategy:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"not a probability vector: {p}")
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))

    def __len__(self):
        return len(self.probs)

    @classmethod
    def pure(cls, n: int, action: int) -> "MixedStrategy":
        p = np.zeros(n)
        p[action] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, n: int) -> "MixedStrategy":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class MatrixGame:
    """Two-player zero-sum game; the row player maximizes ``payoff``."""

    payoff: np.ndarray
    row_labels: Optional[tuple] = field(default=None, compare=False)
    col_labels: Optional[tuple] = field(default=None, compare=False)
    exact: bool = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.payoff, dtype=float))
        if A.ndim != 2 or A.size == 0:
            raise ValueError("payoff must be a nonempty matrix")
        if not np.all(np.isfinite(A)):
            raise ValueError("payoff entries must be finite")
        object.__setattr__(self, "payoff", A)

    @property
    def rows(self) -> int:
        return self.payoff.shape[0]

    @property
    def cols(self) -> int:
        return self.payoff.shape[1]

    def to_normal_form(self) -> "NormalFormGame":
        return NormalFormGame((self.payoff, -self.payoff))


@dataclass(frozen=True)
class ZeroSumSolution:
    value: float
    row: MixedStrategy
    col: MixedStrategy
    regret: float
    method: str

    def __iter__(self):
        # allows ``value, row, col = solve_zero_sum(g)``
        return iter((self.value, self.row, self.col))


def zero_sum_regrets(A: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Row and column players' best-deviation gains at (x, y)."""
    v = float(x @ A @ y)
    return float((A @ y).max() - v), float(v - (x @ A).min())


def _run_length(P, a, cur, maximize):
    """Plays of the current action before another action becomes the best response.

    ``P`` holds the cumulative payoffs after one more play, each further play
    adds ``a``; ties go to the lowest index. Returns inf if ``cur`` stays best.
    """
    if not maximize:
        P, a = -P, -a
    d = P - P[cur]
    e = a - a[cur]
    idx = np.arange(len(P))
    # action r takes over once d_r + u*e_r > 0 (r > cur) or >= 0 (r < cur)
    now = np.where(idx < cur, d >= 0, d > 0)
    now[cur] = False
    if now.any():
        return 0
    grow = e > 0
    grow[cur] = False
    if not grow.any():
        return np.inf
    u = -d[grow] / e[grow]
    strict = idx[grow] > cur
    steps = np.where(strict, np.floor(u) + 1, np.ceil(u))
    return float(max(steps.min(), 1))


def _play_runs(A, limit=None):
    """Simultaneous fictitious play from (0, 0), ties to the lowest index.

    Consecutive plays of an unchanged best-response pair are applied in one
    step; yields ``(t, row_counts, col_counts)`` after each such run and
    stops after ``limit`` plays.
    """
    rows, cols = A.shape
    row_counts = np.zeros(rows)
    col_counts = np.zeros(cols)
    row_payoff = np.zeros(rows)  # cumulative payoff of each row vs. the column history
    col_payoff = np.zeros(cols)
    i, j = 0, 0
    t = 0
    while limit is None or t < limit:
        a, b = A[:, j], A[i, :]
        n = 1 + min(_run_length(row_payoff + a, a, i, True), _run_length(col_payoff + b, b, j, False))
        if not np.isfinite(n):
            n = max(t, 1)  # a pure saddle point: the pair never changes
        n = int(n) if limit is None else int(min(n, limit - t))
        row_counts[i] += n
        col_counts[j] += n
        row_payoff += n * a
        col_payoff += n * b
        t += n
        i = int(np.argmax(row_payoff))
        j = int(np.argmin(col_payoff))
        yield t, row_counts, col_counts


def _fictitious_play(A, tol, max_iters):
    """Best (gap, x, y) seen by fictitious play; one iteration is one play."""
    best = None
    next_check = 64
    for t, rc, cc in _play_runs(A, max_iters):
        if t >= next_check or t == max_iters:
            next_check = t + max(64, t // 32)
            x, y = rc / t, cc / t
            gap = sum(zero_sum_regrets(A, x, y))
            if best is None or gap < best[0]:
                best = (gap, x.copy(), y.copy())
            if gap <= tol:
                break
    return best


def _square_solve(M, rhs):
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return None


def _equalizer(A, rows, cols):
    """Mixed strategy of the column player over ``cols`` making ``rows`` indifferent.

    Returns (y_support_probs, value) or None.
    """
    k = len(rows)
    M = np.zeros((k + 1, k + 1))
    M[:k, :k] = A[np.ix_(rows, cols)]
    M[:k, k] = -1.0
    M[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = _square_solve(M, rhs)
    if sol is None:
        return None
    return sol[:k], sol[k]


def _support_enumeration(A, tol=1e-9):
    """Exact equilibrium by enumerating equal-size support pairs."""
    rows, cols = A.shape
    for size in range(1, min(rows, cols) + 1):
        for I in itertools.combinations(range(rows), size):
            for J in itertools.combinations(range(cols), size):
                col_side = _equalizer(A, list(I), list(J))
                row_side = _equalizer(-A.T, list(J), list(I))
                if col_side is None or row_side is None:
                    continue
                yJ, v = col_side
                xI, _ = row_side
                if np.any(yJ < -tol) or np.any(xI < -tol):
                    continue
                x = np.zeros(rows)
                y = np.zeros(cols)
                x[list(I)] = np.clip(xI, 0, None)
                y[list(J)] = np.clip(yJ, 0, None)
                x /= x.sum()
                y /= y.sum()
                gap = sum(zero_sum_regrets(A, x, y))
                if gap <= tol * max(1.0, np.abs(A).max()):
                    return gap, x, y
    return None


def solve_zero_sum(
    g: MatrixGame,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    method: str = "auto",
) -> ZeroSumSolution:
    """Approximate minimax strategies with duality gap <= tol.

    ``method`` is one of ``"fictitious_play"``, ``"support"`` or ``"auto"``;
    auto runs fictitious play and falls back to exact support enumeration
    for small games when the play has not reached ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    A = g.payoff
    best = None
    used = method
    if method in ("auto", "fictitious_play"):
        small = min(A.shape) <= ENUMERATION_LIMIT
        best = _fictitious_play(A, tol, max_iters)
        used = "fictitious_play"
        if best[0] > tol and method == "auto" and small:
            exact = _support_enumeration(A)
            if exact is not None:
                best, used = exact, "support"
    elif method == "support":
        best = _support_enumeration(A)
        if best is None:
            raise ConvergenceError("support enumeration found no equilibrium")
    else:
        raise ValueError(f"unknown method {method!r}")

    gap, x, y = best
    if gap > tol:
        raise ConvergenceError(
            f"no {tol}-equilibrium within {max_iters} iterations (gap {gap:.3g})",
            best=(MixedStrategy(x), MixedStrategy(y)),
            regret=gap,
        )
    return ZeroSumSolution(
        value=float(x @ A @ y), row=MixedStrategy(x), col=MixedStrategy(y), regret=gap, method=used
    )


def maximin_minimax(g: MatrixGame, row: MixedStrategy, col: MixedStrategy) -> tuple[float, float]:
    """Security levels guaranteed by the given strategies."""
    return float((row.probs @ g.payoff).min()), float((g.payoff @ col.probs).max())


def best_response_pure(g: MatrixGame, opponent: MixedStrategy, side: str) -> int:
    """Lowest-index pure best response of ``side`` ('row' or 'col')."""
    if side == "row":
        if len(opponent) != g.cols:
            raise ValueError(f"opponent has {len(opponent)} actions, expected {g.cols}")
        return int(np.argmax(g.payoff @ opponent.probs))
    if side == "col":
        if len(opponent) != g.rows:
            raise ValueError(f"opponent has {len(opponent)} actions, expected {g.rows}")
        return int(np.argmin(opponent.probs @ g.payoff))
    raise ValueError(f"side must be 'row' or 'col', not {side!r}")


# --- N-player games and composition -----------------------------------------


@dataclass(frozen=True)
class NormalFormGame:
    """Finite N-player game; ``payoffs[p]`` has shape ``action_counts``."""

    payoffs: tuple[np.ndarray, ...]

    def __post_init__(self):
        ps = tuple(np.asarray(p, dtype=float) for p in self.payoffs)
        shapes = {p.shape for p in ps}
        if len(shapes) > 1:
            raise ValueError("all payoff tensors must share one shape")
        if ps and ps[0].ndim != len(ps):
            raise ValueError("payoff tensor rank must equal the player count")
        object.__setattr__(self, "payoffs", ps)

    @property
    def player_count(self) -> int:
        return len(self.payoffs)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.payoffs[0].shape if self.payoffs else ()

    def action_values(self, profile: Sequence[np.ndarray], player: int) -> np.ndarray:
        """Expected payoff of each pure action of ``player`` against the others' mix."""
        T = self.payoffs[player]
        for q in reversed(range(self.player_count)):
            if q != player:
                T = np.tensordot(T, profile[q], axes=([q], [0]))
        return T

    def expected(self, profile: Sequence[np.ndarray], player: int) -> float:
        return float(self.action_values(profile, player) @ profile[player])


EMPTY_GAME = NormalFormGame(())


@dataclass(frozen=True)
class Coupling:
    """Bilinear bonus kappa * x_a^T C x_b paid to both boundary players."""

    player_a: int
    player_b: int
    kappa: float
    matrix: np.ndarray


@dataclass(frozen=True)
class ComposedGame:
    blocks: tuple[NormalFormGame, ...]
    couplings: tuple[Coupling, ...] = ()

    @property
    def player_count(self) -> int:
        return sum(b.player_count for b in self.blocks)

    @property
    def coupling(self) -> float:
        return max((c.kappa for c in self.couplings), default=0.0)

    def _offsets(self):
        return np.cumsum([0] + [b.player_count for b in self.blocks])

    def locate(self, player: int) -> tuple[int, int]:
        """(block index, player index within the block)."""
        offs = self._offsets()
        for b in range(len(self.blocks)):
            if offs[b] <= player < offs[b + 1]:
                return b, int(player - offs[b])
        raise IndexError(player)

    def block_profile(self, profile, b):
        offs = self._offsets()
        return list(profile[offs[b] : offs[b + 1]])

    def local_action_values(self, profile, player: int) -> np.ndarray:
        b, p = self.locate(player)
        return self.blocks[b].action_values(self.block_profile(profile, b), p)

    def action_values(self, profile, player: int) -> np.ndarray:
        vals = self.local_action_values(profile, player).copy()
        for c in self.couplings:
            if c.player_a == player:
                vals += c.kappa * (c.matrix @ profile[c.player_b])
            elif c.player_b == player:
                vals += c.kappa * (c.matrix.T @ profile[c.player_a])
        return vals


def as_composed(game) -> ComposedGame:
    if isinstance(game, ComposedGame):
        return game
    if isinstance(game, MatrixGame):
        game = game.to_normal_form()
    return ComposedGame(blocks=(game,))


def compose(a, b, kappa: float = 1.0, boundary: tuple[int, int] = (0, 0), matrix=None) -> ComposedGame:
    """Compose an N-player and an M-player game into an (N+M)-player game.

    With ``kappa > 0`` the boundary players (local indices ``boundary``) share
    the bilinear term ``kappa * x_a^T C x_b``; ``C`` defaults to a
    (rectangular) identity.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    a, b = as_composed(a), as_composed(b)
    shift = a.player_count
    couplings = list(a.couplings) + [
        Coupling(c.player_a + shift, c.player_b + shift, c.kappa, c.matrix) for c in b.couplings
    ]
    if a.player_count and b.player_count:
        pa, pb = boundary
        ba, la = a.locate(pa)
        bb, lb = b.locate(pb)
        na = a.blocks[ba].action_counts[la]
        nb = b.blocks[bb].action_counts[lb]
        C = np.eye(na, nb) if matrix is None else np.asarray(matrix, dtype=float)
        if C.shape != (na, nb):
            raise ValueError(f"coupling matrix must have shape {(na, nb)}")
        couplings.append(Coupling(pa, pb + shift, float(kappa), C))
    blocks = tuple(g for g in a.blocks + b.blocks if g.player_count)
    return ComposedGame(blocks=blocks, couplings=tuple(couplings))


@dataclass(frozen=True)
class GneCertificate:
    holds: bool
    worst_regret: float
    violator: Optional[int] = None


class CertifiableGame(Protocol):
    """Anything exposing per-player regrets in its local and composed game."""

    player_count: int

    def local_regret(self, profile, player: int) -> float: ...

    def composed_regret(self, profile, player: int) -> float: ...


def _strategy_vectors(profile):
    return [p.probs if isinstance(p, MixedStrategy) else np.asarray(p, dtype=float) for p in profile]


def check_gne(profile, games, eps: float) -> GneCertificate:
    """Certify that no player gains more than ``eps`` by a unilateral deviation,
    either in its own block game or in the composed game.

    ``games`` is a :class:`MatrixGame`, :class:`NormalFormGame`,
    :class:`ComposedGame`, or any object following :class:`CertifiableGame`.
    """
    if hasattr(games, "local_regret"):
        regret_fns = (games.local_regret, games.composed_regret)
        players = range(games.player_count)
    else:
        g = as_composed(games)
        profile = _strategy_vectors(profile)
        if len(profile) != g.player_count:
            raise ValueError(f"profile has {len(profile)} strategies, game has {g.player_count} players")

        def local(prof, p):
            vals = g.local_action_values(prof, p)
            return float(vals.max() - vals @ prof[p])

        def composed(prof, p):
            vals = g.action_values(prof, p)
            return float(vals.max() - vals @ prof[p])

        regret_fns = (local, composed)
        players = range(g.player_count)

    worst, violator = 0.0, None
    for p in players:
        r = max(fn(profile, p) for fn in regret_fns)
        if r > worst:
            worst, violator = r, p
    holds = worst <= eps
    return GneCertificate(holds=holds, worst_regret=worst, violator=None if holds else violator)


def pure_equilibria(game: NormalFormGame, eps: float = 0.0) -> list[tuple[int, ...]]:
    """All pure-strategy eps-Nash profiles, in lexicographic order."""
    out = []
    for prof in itertools.product(*(range(n) for n in game.action_counts)):
        mixed = [np.eye(n)[a] for n, a in zip(game.action_counts, prof)]
        if check_gne(mixed, game, eps).holds:
            out.append(prof)
    return out
