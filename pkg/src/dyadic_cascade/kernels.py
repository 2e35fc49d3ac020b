"""Right-hand-side kernels and energy reductions.

Both models share one arithmetic discipline so that the tree kernel with
branching 1 reproduces the classic kernel bit for bit: every coefficient goes
through core.pow2, and every node combines its terms as (viscous + gain) -
loss in exactly that association order.  All sums use numpy's pairwise
add.reduce, which is a fixed-order deterministic reduction independent of
thread count.
"""

from __future__ import annotations

import numpy as np

from .core import ModelParams, pow2


class TreeKernel:
    """Generation-blocked evaluation on the implicit-heap tree array."""

    def __init__(self, params: ModelParams):
        self.params = params
        self.offsets = params.offsets
        self.depth = params.depth
        self.branching = params.branching
        d = params.depth
        # c up to depth+1: the loss coefficient of generation g is c[g+1]
        self.c = np.array([pow2(params.alpha * g) for g in range(d + 2)])
        self.d = np.array([pow2(params.gamma * g) for g in range(d + 1)])
        self.neg_nu_d = -params.nu * self.d
        self._gain0 = float(self.c[0] * np.square(np.float64(params.f)))

    def rhs(self, y: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            deriv, _ = self._eval(y, out=out, work_out=None)
        return deriv

    def rhs_work(self, y, out=None, work_out=None):
        """Derivative plus instantaneous work rates packed as
        [x0, visc rate per generation, flux rate per boundary].  Overflow is
        deliberately silent: the integrator detects non-finite results and
        rejects the step."""
        with np.errstate(over="ignore", invalid="ignore"):
            if work_out is None:
                work_out = np.empty(1 + (self.depth + 1) + self.depth)
            return self._eval(y, out=out, work_out=work_out)

    def _eval(self, y, out=None, work_out=None):
        """Single pass over the generations, writing into the output slices.

        The element-wise association is pinned to ((visc + gain) - loss) with
        loss = ((c_next * x) * child_sum), matching ClassicKernel bit for bit
        (only commutative reorderings are used below).
        """
        p = self.params
        offs = self.offsets
        N = self.branching
        nu = p.nu
        depth = self.depth
        deriv = out if out is not None else np.empty_like(y)
        with_work = work_out is not None
        if with_work:
            work_out[0] = y[0]
            visc_rate = work_out[1:depth + 2]
            flux_rate = work_out[depth + 2:]
        scratch = np.empty(offs[-1] - offs[-2])  # widest generation
        sq_prev = None
        for g in range(depth + 1):
            lo, hi = offs[g], offs[g + 1]
            block = y[lo:hi]
            width = hi - lo
            sq_block = np.square(block)
            dst = deriv[lo:hi]
            # gain term c_g * parent^2, broadcast over each child block
            if g == 0:
                dst[0] = self._gain0
            else:
                np.multiply(self.c[g], sq_prev, out=sq_prev)
                dst.reshape(-1, N)[:] = sq_prev[:, None]
            if nu != 0.0:
                buf = scratch[:width]
                np.multiply(self.neg_nu_d[g], block, out=buf)
                dst += buf
            if g < depth:
                child_sum = y[offs[g + 1]:offs[g + 2]].reshape(-1, N).sum(axis=1)
                if with_work:
                    visc_rate[g] = self.d[g] * np.add.reduce(sq_block)
                    flux_rate[g] = 2.0 * self.c[g + 1] * np.add.reduce(sq_block * child_sum)
                buf = scratch[:width]
                np.multiply(self.c[g + 1], block, out=buf)
                buf *= child_sum
                dst -= buf
            elif with_work:
                visc_rate[g] = self.d[g] * np.add.reduce(sq_block)
            sq_prev = sq_block
        if not with_work:
            return deriv, None
        return deriv, work_out

    def generation_energies(self, y: np.ndarray) -> np.ndarray:
        offs = self.offsets
        return np.array([
            np.add.reduce(np.square(y[offs[g]:offs[g + 1]]))
            for g in range(self.depth + 1)
        ])

    def boundary_fluxes(self, y: np.ndarray) -> np.ndarray:
        """2 * sum over generation-(n+1) nodes of c_{n+1} X_parent^2 X_child,
        for n = 0..depth-1."""
        offs = self.offsets
        N = self.branching
        flux = np.empty(self.depth)
        for n in range(self.depth):
            sq = np.square(y[offs[n]:offs[n + 1]])
            child_sum = y[offs[n + 1]:offs[n + 2]].reshape(-1, N).sum(axis=1)
            flux[n] = 2.0 * self.c[n + 1] * np.add.reduce(sq * child_sum)
        return flux

    @staticmethod
    def total_energy(y: np.ndarray) -> float:
        return float(np.add.reduce(np.square(y)))


class ClassicKernel:
    """Vectorized chain-model evaluation, one value per shell."""

    def __init__(self, params: ModelParams):
        if params.branching != 1:
            raise ValueError("ClassicKernel requires branching = 1")
        self.params = params
        self.depth = params.depth
        d = params.depth
        n = np.arange(d + 1)
        self.k = np.array([pow2(params.beta * i) for i in range(d + 1)])
        self.k_next = np.array([pow2(params.beta * (i + 1)) for i in range(d + 1)])
        self.l = np.array([pow2(params.gamma * i) for i in range(d + 1)])
        self.neg_nu_l = -params.nu * self.l
        del n

    def rhs(self, y, out=None):
        with np.errstate(over="ignore", invalid="ignore"):
            deriv, _ = self._eval(y, out=out, work_out=None)
        return deriv

    def rhs_work(self, y, out=None, work_out=None):
        with np.errstate(over="ignore", invalid="ignore"):
            if work_out is None:
                work_out = np.empty(1 + (self.depth + 1) + self.depth)
            return self._eval(y, out=out, work_out=work_out)

    def _eval(self, y, out=None, work_out=None):
        p = self.params
        m = self.depth + 1
        ym1 = np.empty(m)
        ym1[0] = p.f
        ym1[1:] = y[:-1]
        ynext = np.empty(m)
        ynext[:-1] = y[1:]
        ynext[-1] = 0.0
        gain = self.k * np.square(ym1)
        loss = (self.k_next * y) * ynext
        if p.nu != 0.0:
            result = (self.neg_nu_l * y + gain) - loss
        else:
            result = gain - loss
        if out is not None:
            out[:] = result
            result = out
        if work_out is None:
            return result, None
        sq = np.square(y)
        work_out[0] = y[0]
        np.multiply(self.l, sq, out=work_out[1:m + 1])
        np.multiply(2.0 * self.k_next[:-1] * sq[:-1], y[1:], out=work_out[m + 1:])
        return result, work_out

    def generation_energies(self, y):
        return np.square(y)

    def boundary_fluxes(self, y):
        sq = np.square(y)
        return (2.0 * self.k_next[:-1] * sq[:-1]) * y[1:]

    @staticmethod
    def total_energy(y):
        return float(np.add.reduce(np.square(y)))


def make_kernel(params: ModelParams):
    return ClassicKernel(params) if params.branching == 1 else TreeKernel(params)
