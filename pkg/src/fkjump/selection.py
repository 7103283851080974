"""Selection kernels solving ``Psi_{exp(V/m)}(mu) = mu S`` and their generators.

All functions take the potential ``V`` itself; case 1 and uniform
recycling expect ``V = -U <= 0``, case 2 expects ``V >= 0`` and case 3
accepts any bounded ``V``.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import SignViolation
from .measures import as_probability, boltzmann_gibbs, tv_distance


class SelectionCase(enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"
    CASE3 = "case3"
    UNIFORM = "uniform"
    PLUS_MINUS = "plusminus"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "").replace("_", ""))
        except ValueError:
            names = ", ".join(c.value for c in cls)
            raise ValueError(f"unknown selection case {value!r}; expected one of {names}") from None


def check_potential(case, v):
    """Raise `SignViolation` if ``v`` is incompatible with ``case``."""
    case = SelectionCase.parse(case)
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise SignViolation("potential must be finite")
    if case in (SelectionCase.CASE1, SelectionCase.UNIFORM) and np.any(v > 0):
        raise SignViolation(f"{case.value} needs V = -U <= 0; max V = {v.max():.6g}")
    if case is SelectionCase.CASE2 and np.any(v < 0):
        raise SignViolation(f"case2 needs V >= 0; min V = {v.min():.6g}")
    return case


@dataclass(frozen=True)
class SelectionKernel:
    kernel: np.ndarray
    case: SelectionCase
    m: int
    mu: np.ndarray

    def transport_residual(self, v):
        """``tv(mu S, Psi_{exp(V/m)}(mu))``; zero up to rounding by construction."""
        return tv_distance(self.mu @ self.kernel, boltzmann_gibbs(self.mu, np.exp(np.asarray(v) / self.m)))


def case3_rates(v, m, mu):
    """Rejection probabilities ``a(x)`` and the positive-part weights of case 3.

    Returns ``(a, w)`` with ``w[x, y] = mu(y) (e^{V(y)/m} - e^{V(x)/m})_+``.
    """
    g = np.exp(np.asarray(v, dtype=float) / m)
    w = np.clip(g[None, :] - g[:, None], 0.0, None) * mu[None, :]
    a = w.sum(axis=1) / float(mu @ g)
    return a, w


def build_selection_kernel(case, v, m, mu):
    """Exact finite-space selection kernel ``S_{t, mu}`` for one of the cases.

    Parameters
    ----------
    case : SelectionCase or str
    v : array_like
        Potential ``V_t`` on the states.
    m : int
        Mesh parameter; the kernel transports ``mu`` to ``Psi_{exp(V/m)}(mu)``.
    mu : array_like
        Probability vector the kernel is built from.

    Returns
    -------
    SelectionKernel
    """
    case = check_potential(case, v)
    if case is SelectionCase.PLUS_MINUS:
        raise ValueError("the plus/minus split exists only as a generator")
    v = np.asarray(v, dtype=float)
    mu = as_probability(mu)
    n = v.shape[0]
    eye = np.eye(n)

    if case in (SelectionCase.CASE1, SelectionCase.UNIFORM):
        keep = np.exp(v / m)
        target = boltzmann_gibbs(mu, keep) if case is SelectionCase.CASE1 else mu
        s = keep[:, None] * eye + (1.0 - keep)[:, None] * target[None, :]
    elif case is SelectionCase.CASE2:
        g = np.exp(v / m)
        keep = 1.0 / float(mu @ g)
        excess = mu * (g - 1.0)
        if excess.sum() <= 0.0:
            # V vanishes on supp(mu): Psi(mu) = mu and the identity transports it
            s = eye.copy()
        else:
            s = keep * eye + (1.0 - keep) * (excess / excess.sum())[None, :]
    else:
        a, w = case3_rates(v, m, mu)
        tot = w.sum(axis=1, keepdims=True)
        reloc = np.divide(w, tot, out=np.zeros_like(w), where=tot > 0)
        s = (1.0 - a)[:, None] * eye + a[:, None] * reloc
    s.setflags(write=False)
    return SelectionKernel(kernel=s, case=case, m=int(m), mu=mu)


def jump_generator(case, v, mu):
    """Interacting jump generator ``L_hat_{mu}`` as a dense matrix.

    Case 1 (and uniform recycling): ``U(x) mu(y)``; case 2: ``V(y) mu(y)``;
    case 3: ``(V(y) - V(x))_+ mu(y)``; plus/minus: the sum of the pair
    returned by `plus_minus_generator`. Diagonals make rows sum to zero.
    """
    case = check_potential(case, v)
    v = np.asarray(v, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if case in (SelectionCase.CASE1, SelectionCase.UNIFORM):
        rates = -v[:, None] * mu[None, :]
    elif case is SelectionCase.CASE2:
        rates = np.broadcast_to(v * mu, (v.size, v.size)).copy()
    elif case is SelectionCase.CASE3:
        rates = np.clip(v[None, :] - v[:, None], 0.0, None) * mu[None, :]
    else:
        lp, lm = plus_minus_generator(v, mu)
        return lp + lm
    np.fill_diagonal(rates, 0.0)
    np.fill_diagonal(rates, -rates.sum(axis=1))
    return rates


def plus_minus_generator(v, mu):
    """The pair ``(L_plus, L_minus)`` splitting ``V - mu(V)`` by sign.

    ``L_minus(x, .) = [V(x) - mu(V)]_- (mu - delta_x)`` and
    ``L_plus(x, y) = [V(y) - mu(V)]_+ mu(y)`` off the diagonal.
    """
    v = np.asarray(v, dtype=float)
    mu = np.asarray(mu, dtype=float)
    c = v - float(mu @ v)
    pos = np.clip(c, 0.0, None)
    neg = np.clip(-c, 0.0, None)
    lp = np.broadcast_to(pos * mu, (v.size, v.size)).copy()
    lm = neg[:, None] * mu[None, :]
    for k in (lp, lm):
        np.fill_diagonal(k, 0.0)
        np.fill_diagonal(k, -k.sum(axis=1))
    return lp, lm


def expansion_remainder(case, v, m, mu):
    """Max-row L1 norm of ``m**2 (S - Id - L_hat / m)``."""
    s = build_selection_kernel(case, v, m, mu).kernel
    lhat = jump_generator(case, v, mu)
    r = m * m * (s - np.eye(s.shape[0]) - lhat / m)
    return float(np.abs(r).sum(axis=1).max())


def recycler_gap(v, m, mu):
    """``tv(Psi_{exp(-U/m)}(mu), mu)`` for ``V = -U``."""
    return tv_distance(boltzmann_gibbs(mu, np.exp(np.asarray(v) / m)), mu)
