"""Matrix-exact Feynman-Kac flows and semigroup constants on finite spaces.

These are deterministic recursions used as reference values for the
particle engine and the continuous time simulator.
"""

from dataclasses import dataclass

import numpy as np

from .errors import HorizonExceeded, IndexOrder, ModelMismatch, WrongPotentialSign
from .measures import as_generator, dobrushin, sup_norm
from .models import CTMCModel, DiscreteModel


def _renormalize(w):
    return w / w.sum()


def flow_discrete(model, n):
    """``(gamma_n(1), eta_n)`` from ``eta_{p+1} = Psi_{G_p}(eta_p) M_{p+1}``."""
    if not isinstance(model, DiscreteModel):
        raise ModelMismatch("flow_discrete needs a DiscreteModel")
    if not 0 <= n <= model.horizon:
        raise HorizonExceeded(f"n={n} outside 0..{model.horizon}")
    eta = np.array(model.initial_law)
    mass = 1.0
    for p in range(n):
        w = eta * model.potentials[p]
        z = w.sum()
        mass *= z
        eta = _renormalize((w / z) @ model.kernels[p])
    return mass, eta


def mesh_flow_path(model, mesh, k):
    """All mesh marginals ``mu_{t_0..t_k}`` of the m-approximation and its masses.

    Returns
    -------
    flows : ndarray, shape (k + 1, n_states)
    masses : ndarray, shape (k + 1,)
        ``nu_{t_q}(1) = prod_{p<q} mu_{t_p}(exp(V_{t_p}/m))``.
    """
    _check_finite(model)
    if not 0 <= k <= model.mesh_steps(mesh):
        raise HorizonExceeded(f"mesh index {k} beyond horizon")
    mu = np.array(model.initial_law)
    flows = [mu]
    masses = [1.0]
    for q in range(k):
        w = mu * np.exp(model.log_potential(mesh, q) / mesh.m)
        z = w.sum()
        mu = w / z
        trans = model.mesh_transition(mesh, q)
        if trans is not None:
            mu = _renormalize(mu @ trans)
        flows.append(mu)
        masses.append(masses[-1] * z)
    return np.array(flows), np.array(masses)


def mesh_flow(model, mesh, k):
    """``mu^{(m)}_{t_k}`` for a discrete or CTMC model."""
    return mesh_flow_path(model, mesh, k)[0][-1]


def ct_exact_flow(model, t):
    """``(nu_t(1), mu_t)`` with ``nu_t = mu_0 exp(int (L + diag V))`` piecewise."""
    if not isinstance(model, CTMCModel):
        raise ModelMismatch("ct_exact_flow needs a CTMCModel")
    nu = model.initial_law @ model.twisted_semigroup(0, t)
    mass = float(nu.sum())
    return mass, nu / mass


def _check_finite(model):
    if not isinstance(model, (DiscreteModel, CTMCModel)):
        raise ModelMismatch(f"no exact flow for {type(model).__name__}")


@dataclass(frozen=True)
class SemigroupBundle:
    Q: np.ndarray
    P: np.ndarray
    g: float
    beta: float

    @property
    def mass_function(self):
        return self.Q.sum(axis=1)


def semigroup(model, k, n):
    """Feynman-Kac semigroup ``Q_{k,n} = prod_{k<=l<n} diag(G_l) M_{l+1}`` and friends."""
    if not isinstance(model, DiscreteModel):
        raise ModelMismatch("semigroup needs a DiscreteModel")
    if k > n:
        raise IndexOrder(f"k={k} > n={n}")
    if k < 0 or n > model.horizon:
        raise HorizonExceeded(f"({k}, {n}) outside 0..{model.horizon}")
    q = np.eye(model.n_states)
    for l in range(k, n):
        q = q @ (model.potentials[l][:, None] * model.kernels[l])
    ones = q.sum(axis=1)
    p = q / ones[:, None]
    return SemigroupBundle(Q=q, P=p, g=float(ones.max() / ones.min()), beta=dobrushin(p))


def theorem2_constant(model, n):
    """Structural part of the bias/variance constant, without the universal factor.

    ``sum_{k<n} g_{k,n}^3 g_{k,k+1}^3 (||log G_k|| v 1)^2 beta(P_{k,n})``.
    """
    if n < 0 or n > model.horizon:
        raise HorizonExceeded(f"n={n} outside 0..{model.horizon}")
    total = 0.0
    for k in range(n):
        far = semigroup(model, k, n)
        near = semigroup(model, k, k + 1)
        logg = max(sup_norm(np.log(model.potentials[k])), 1.0)
        total += far.g ** 3 * near.g ** 3 * logg ** 2 * far.beta
    return total


def fk_transform(model, k, n, mu):
    """``Phi_{k,n}(mu)`` computed by running the flow recursion from ``mu`` at time k."""
    eta = np.asarray(mu, dtype=float)
    for p in range(k, n):
        eta = _renormalize((eta * model.potentials[p]) @ model.kernels[p])
    return eta


def uniform_recycling_flow_path(model, mesh, k):
    """Flow of the McKean model whose recycling draws from ``mu`` itself.

    ``mu~_{t_{q+1}} = mu~_{t_q} S~_{t_q, mu~} M_{t_q, t_{q+1}}`` with
    ``S~(x, .) = e^{-U(x)/m} delta_x + (1 - e^{-U(x)/m}) mu~``.
    """
    _check_finite(model)
    if not 0 <= k <= model.mesh_steps(mesh):
        raise HorizonExceeded(f"mesh index {k} beyond horizon")
    mu = np.array(model.initial_law)
    flows = [mu]
    for q in range(k):
        v = model.log_potential(mesh, q)
        if np.any(v > 0):
            raise WrongPotentialSign(f"uniform recycling needs V = -U <= 0 (step {q}: max V = {v.max():.6g})")
        keep = np.exp(v / mesh.m)
        mu = keep * mu + float(mu @ (1.0 - keep)) * mu
        trans = model.mesh_transition(mesh, q)
        if trans is not None:
            mu = mu @ trans
        mu = _renormalize(mu)
        flows.append(mu)
    return np.array(flows)


def uniform_recycling_flow(model, mesh, k):
    return uniform_recycling_flow_path(model, mesh, k)[-1]


def carre_du_champ(generator, f):
    """``Gamma_L(f, f) = L(f^2) - 2 f L(f)``."""
    gen = as_generator(generator)
    f = np.asarray(f, dtype=float)
    return gen @ (f * f) - 2.0 * f * (gen @ f)
