"""Self-similar decaying solutions X_j(t) = a_j / (t - t0), t0 < 0.

On the chain model the coefficients obey

    -b_n = 2^{beta n} b_{n-1}^2 - 2^{beta (n+1)} b_n b_{n+1},   b_{-1} = 0,

a one-parameter recurrence in b_0; only one b_0 yields the positive,
square-summable decaying branch.  The shooting works in the scaled variables
w_n = 2^{beta n / 3} b_n, whose recurrence

    w_{n+1} = w_{n-1}^2 / w_n + 2^{-2 beta (n+1)/3}

settles on a strictly positive plateau exactly at the root; off the root, a
perturbation mode of ratio -2 takes over, producing dips (and rebound
spikes) whose index parity identifies the shooting direction: w_n is
increasing in w_0 for even n >= 2 and decreasing for odd n, so a dip at an
even index means w_0 was too small.  The dip/spike thresholds are recorded
in _DIP_RATIO; their adequacy is established by the trajectory-tracking
tests, and inconsistent bracketing raises BracketFailure loudly.

The solution whose first nonzero coefficient sits at index n0 >= 1 is the
base solution shifted and scaled: b'_{n0+m} = 2^{-beta n0} b_m (the
recurrence is invariant under that map), so grafting never re-solves.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import mpmath as mp
import numpy as np

from .core import ModelParams, ClassicState, NodeId, TreeState, generation, pow2
from .errors import (
    DepthMismatch,
    DomainError,
    GenerationMismatch,
    NoConvergence,
    OverlapError,
    ParameterMismatch,
    PoleMismatch,
)
from .lift import LiftSpec, scale_factor
from .stationary import bisect_shooting, _DPS_BASE, _DPS_PER_LEVEL, _HORIZON_FACTOR, _HORIZON_SLACK

#: Ratio between consecutive scaled coefficients that counts as a dip/spike.
_DIP_RATIO = 8.0


@dataclass(frozen=True)
class SelfSimilarProfile:
    """Coefficients of one self-similar solution.

    b holds the classic coefficients b_0..b_{n_max} (leading zeros when
    n0 >= 1).  After lift_selfsimilar, a[n] carries the per-generation tree
    coefficient a_j = 2^{-(n+2) alpha_tilde} b_n (constant within each
    generation; materialized on demand).  w_limit is the plateau of the
    scaled recurrence, a conditioning diagnostic.
    """

    t0: float
    beta: float
    b: np.ndarray
    n0: int = 0
    alpha_tilde: float | None = None
    a: np.ndarray | None = None
    w_limit: float | None = None
    bracket: tuple[float, float] | None = None

    @property
    def n_max(self) -> int:
        return len(self.b) - 1

    def classic_params(self, depth: int | None = None,
                       gamma: float = 1.0) -> ModelParams:
        depth = self.n_max if depth is None else depth
        return ModelParams(alpha=self.beta, gamma=gamma, nu=0.0, f=0.0,
                           branching=1, depth=depth)

    def classic_state(self, t: float = 0.0, depth: int | None = None) -> ClassicState:
        """Y_n(t) = b_n / (t - t0), materialized to the requested depth."""
        depth = self.n_max if depth is None else depth
        if depth > self.n_max:
            raise DepthMismatch(f"profile holds {self.n_max + 1} coefficients, "
                                f"need {depth + 1}")
        if t <= self.t0:
            raise DomainError(f"t = {t} not above the pole t0 = {self.t0}")
        return ClassicState(self.b[: depth + 1] / (t - self.t0),
                            self.classic_params(depth))


def _classify_dips(w0, q_eps, n_levels, ratio):
    """Classify a trial w_0 by the parity of the first dip of the scaled
    recurrence; spikes are rebounds of a dip one index earlier."""
    wm1, wn = mp.mpf(0), w0
    for n in range(n_levels):
        nxt = wm1 ** 2 / wn + q_eps ** (n + 1)
        m = n + 1
        if m >= 2:
            r = nxt / wn
            if r < 1.0 / ratio:
                return ("raise" if m % 2 == 0 else "lower"), m
            if r > ratio:
                return ("raise" if (m - 1) % 2 == 0 else "lower"), m
        wm1, wn = wn, nxt
    return "survive", None


def solve_selfsimilar_classic(t0: float, beta: float, n_max: int,
                              tol: float = 1e-12, *, n0: int = 0,
                              max_iter: int = 600) -> SelfSimilarProfile:
    """Find the positive decaying coefficient sequence by bisection on b_0.

    The algebraic system for b does not involve t0; the pole time only enters
    when the profile is evaluated, Y_n(t) = b_n/(t - t0).
    """
    if not t0 < 0:
        raise DomainError(f"t0 must be negative, got {t0}")
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    if n0 < 0:
        raise ValueError("n0 must be >= 0")

    n_class = _HORIZON_FACTOR * n_max + _HORIZON_SLACK
    dps = _DPS_BASE + int(_DPS_PER_LEVEL * n_class)
    with mp.workdps(dps):
        q_eps = mp.mpf(2) ** (-2 * mp.mpf(beta) / 3)

        def classify(a):
            return _classify_dips(a, q_eps, n_class, _DIP_RATIO)

        width_floor = mp.mpf(10) ** (-(dps - 15))
        root, (lo, hi), survived = bisect_shooting(
            classify, mp.mpf(1), max_iter=max_iter, width_floor=width_floor,
            what="b_0")
        if not survived:
            raise NoConvergence(
                "no plateau-stable b_0 found before the precision floor; "
                "dip thresholds or precision budget need revisiting")
        # rebuild the plateau and scale back to b
        w = [mp.mpf(0), root]
        for n in range(n_max):
            w.append(w[-2] ** 2 / w[-1] + q_eps ** (n + 1))
        qb = mp.mpf(2) ** (-mp.mpf(beta) / 3)
        b = np.array([float(w[n + 1] * qb ** n) for n in range(n_max + 1)])
        w_limit = float(w[-1])
        bracket = (float(lo), float(hi))

    profile = SelfSimilarProfile(t0=float(t0), beta=float(beta), b=b,
                                 w_limit=w_limit, bracket=bracket)
    return shifted_profile(profile, n0) if n0 > 0 else profile


def shifted_profile(profile: SelfSimilarProfile, n0: int) -> SelfSimilarProfile:
    """Solution whose first nonzero coefficient sits at index n0:
    b'_{n0+m} = 2^{-beta n0} b_m, zeros below."""
    if n0 == 0:
        return profile
    if profile.n0 != 0:
        raise ValueError("shift from the base (n0 = 0) profile")
    scale = pow2(-profile.beta * n0)
    b = np.zeros(profile.n_max + 1)
    b[n0:] = scale * profile.b[: profile.n_max + 1 - n0]
    shifted = replace(profile, b=b, n0=n0, a=None)
    if profile.alpha_tilde is not None:
        return lift_selfsimilar(shifted, profile.alpha_tilde)
    return shifted


def lift_selfsimilar(profile: SelfSimilarProfile, alpha_tilde: float,
                     depth: int | None = None) -> SelfSimilarProfile:
    """Fill the per-generation tree coefficients a_n = 2^{-(n+2) alpha_tilde} b_n
    (tree exponent alpha = beta + alpha_tilde).

    depth only validates coverage; the profile stays in formula form and is
    materialized when grafted.
    """
    if alpha_tilde < 0:
        raise ParameterMismatch("alpha_tilde must be >= 0")
    if depth is not None and depth > profile.n_max:
        raise DepthMismatch(f"profile holds {profile.n_max + 1} generations, "
                            f"need {depth + 1}")
    spec = LiftSpec(alpha_tilde=alpha_tilde, beta=profile.beta)
    a = np.array([scale_factor(spec, n) * profile.b[n]
                  for n in range(profile.n_max + 1)])
    return replace(profile, alpha_tilde=float(alpha_tilde), a=a)


def lift_residual(profile: SelfSimilarProfile) -> float:
    """Max relative defect of the algebraic self-similar condition

        a_j + c_j a_parent^2 = sum over children of c_child a_j a_child

    evaluated per generation on the lifted coefficients (interior
    generations only)."""
    if profile.a is None:
        raise ParameterMismatch("profile has no lifted coefficients; call "
                                "lift_selfsimilar first")
    spec = LiftSpec(alpha_tilde=profile.alpha_tilde, beta=profile.beta)
    alpha, branching = spec.alpha, spec.branching
    a = profile.a
    worst = 0.0
    for n in range(profile.n_max):
        parent_sq = a[n - 1] ** 2 if n > 0 else 0.0
        gain = pow2(alpha * n) * parent_sq
        loss = branching * pow2(alpha * (n + 1)) * a[n] * a[n + 1]
        res = a[n] + gain - loss
        scale = max(abs(a[n]), abs(gain), abs(loss), 1e-300)
        worst = max(worst, abs(res) / scale)
    return worst


def tree_coefficient_energy(profile: SelfSimilarProfile, depth: int) -> float:
    """Sum of a_j^2 over all tree nodes to ``depth``: the constant in
    E(t) = (sum a_j^2) / (t - t0)^2."""
    if profile.a is None:
        raise ParameterMismatch("profile has no lifted coefficients")
    spec = LiftSpec(alpha_tilde=profile.alpha_tilde, beta=profile.beta)
    total = 0.0
    for n in range(depth + 1):
        total += spec.branching ** n * profile.a[n] ** 2
    return total


@dataclass(frozen=True)
class GraftedTreeState(TreeState):
    """Tree of self-similar coefficients assembled from grafts.

    Carries the common pole time and the grafted subtree roots so that later
    grafts can be checked for pole consistency; at_time(t) evaluates the
    actual state a_j / (t - t0)."""

    t0: float = 0.0
    graft_roots: tuple = ()

    def at_time(self, t: float) -> TreeState:
        if t <= self.t0:
            raise DomainError(f"t = {t} not above the pole t0 = {self.t0}")
        return TreeState(self.values / (t - self.t0), self.params)


def _subtree_slices(root: NodeId, branching: int, depth: int, offsets):
    """Contiguous (start, width, generation) slices of the subtree below
    ``root``, one per generation."""
    g0 = generation(root, branching)
    start = root
    width = 1
    out = []
    for g in range(g0, depth + 1):
        out.append((start, width, g))
        start = branching * start + 1
        width *= branching
    return out


def graft_selfsimilar(base: TreeState, profile: SelfSimilarProfile,
                      subtree_root: NodeId) -> GraftedTreeState:
    """Place the lifted coefficients on one subtree, zero elsewhere.

    The subtree root's generation must not exceed the profile's first
    nonzero index n0 (values above are zero, so the node at generation n0
    inside the subtree sees a zero parent exactly as the full lifted
    solution does).  Repeated grafts must target pairwise disjoint subtrees
    and share the pole time.
    """
    if profile.a is None:
        raise ParameterMismatch("graft requires a lifted profile "
                                "(call lift_selfsimilar)")
    params = base.params
    spec = LiftSpec(alpha_tilde=profile.alpha_tilde, beta=profile.beta)
    if params.branching != spec.branching:
        raise ParameterMismatch(
            f"base branching {params.branching} != profile branching {spec.branching}")
    if abs(params.alpha - spec.alpha) > 1e-12 * max(1.0, abs(spec.alpha)):
        raise ParameterMismatch(
            f"base alpha {params.alpha} != beta + alpha_tilde {spec.alpha}")
    if params.depth > profile.n_max:
        raise DepthMismatch(f"profile covers {profile.n_max + 1} generations, "
                            f"tree needs {params.depth + 1}")
    if not 0 <= subtree_root < params.n_nodes:
        raise ValueError(f"subtree root {subtree_root} outside the tree")
    g0 = generation(subtree_root, params.branching)
    if g0 > profile.n0:
        raise GenerationMismatch(
            f"subtree root at generation {g0} but first nonzero coefficient "
            f"is at {profile.n0}")
    if isinstance(base, GraftedTreeState):
        if base.t0 != profile.t0:
            raise PoleMismatch(f"existing grafts have t0 = {base.t0}, "
                               f"profile has t0 = {profile.t0}")
        roots = base.graft_roots
    else:
        roots = ()

    values = np.array(base.values, dtype=np.float64)
    slices = _subtree_slices(subtree_root, params.branching, params.depth,
                             params.offsets)
    for start, width, g in slices:
        if np.any(values[start:start + width] != 0.0):
            raise OverlapError(
                f"subtree at {subtree_root} overlaps an existing graft "
                f"(generation {g})")
    for start, width, g in slices:
        values[start:start + width] = profile.a[g]
    return GraftedTreeState(values=values, params=params, t0=profile.t0,
                            graft_roots=roots + ((int(subtree_root), profile.n0),))
