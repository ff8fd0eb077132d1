"""No-jump propagation, master-equation integration and steady states."""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from scipy.linalg import expm, lu_factor, lu_solve

from .models import ModelBundle, ToyParams


class StepSizeError(RuntimeError):
    def __init__(self, message, suggested_dt):
        super().__init__(f"{message}; try dt <= {suggested_dt:.3g}")
        self.suggested_dt = suggested_dt


class NonUniqueSteadyStateError(RuntimeError):
    pass


class DimensionError(ValueError):
    pass


def default_dt(bundle: ModelBundle) -> float:
    """``1e-3`` of the fastest of ``1/kappa, 1/Gamma, 1/Omega_L, 1/g``."""
    p = bundle.params
    if isinstance(p, ToyParams):
        rates = [p.omega_L, p.gamma_L, p.gamma_D]
    elif p is not None:
        rates = [p.kappa, p.gamma, p.omega_L, p.g1, p.g2]
    else:
        rates = [np.abs(bundle.h_cond).max()]
    fastest = max(r for r in rates if r > 0) if any(r > 0 for r in rates) else 1.0
    return 1e-3 / fastest


def _check_state(bundle, psi):
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (bundle.dim,):
        raise DimensionError(f"state has shape {psi.shape}, bundle dimension is {bundle.dim}")
    return psi


class NoJumpPropagator:
    """Cached ``exp(-i H_cond dt)`` for a fixed bundle and step."""

    def __init__(self, bundle: ModelBundle, dt: float):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        self.bundle = bundle
        self.dt = float(dt)
        self.matrix = expm(-1j * bundle.h_cond * self.dt)

    def __call__(self, psi, steps: int = 1) -> np.ndarray:
        psi = _check_state(self.bundle, psi)
        for _ in range(steps):
            psi = self.matrix @ psi
        return psi


def propagate_nojump(bundle: ModelBundle, psi, dt: float) -> np.ndarray:
    """``exp(-i H_cond dt) psi``, left unnormalised."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    psi = _check_state(bundle, psi)
    return expm(-1j * bundle.h_cond * dt) @ psi


# -- master equation --------------------------------------------------------

def master_rhs(bundle: ModelBundle, rho: np.ndarray) -> np.ndarray:
    h = bundle.h_cond
    out = -1j * (h @ rho - rho @ h.conj().T)
    for r in bundle.resets:
        out += r @ rho @ r.conj().T
    return out


def liouvillian(bundle: ModelBundle) -> np.ndarray:
    """Generator acting on column-stacked ``vec(rho)`` (``rho.reshape(-1, order="F")``)."""
    h = bundle.h_cond
    eye = np.eye(bundle.dim)
    gen = -1j * np.kron(eye, h) + 1j * np.kron(h.conj(), eye)
    for r in bundle.resets:
        gen += np.kron(r.conj(), r)
    return gen


def _generator_bound(bundle):
    return 2 * np.linalg.norm(bundle.h_cond, 2) + sum(np.linalg.norm(r, 2) ** 2 for r in bundle.resets)


def validate_density_matrix(rho, tol=1e-10):
    """Raise ``ValueError`` unless ``rho`` is Hermitian, trace <= 1 and PSD within tolerance."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if not -1e-12 <= tr <= 1 + 1e-9:
        raise ValueError(f"density matrix trace {tr} outside [0, 1]")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def integrate_master(bundle: ModelBundle, rho0, t: float, dt: float | None = None,
                     sample_times=None):
    """Fixed-step RK4 integration of the master equation up to time ``t``.

    Returns ``rho(t)``; with ``sample_times`` returns an array of ``rho`` at
    those times (each rounded to the nearest step).
    """
    rho = validate_density_matrix(rho0).copy()
    if rho.shape[0] != bundle.dim:
        raise DimensionError(f"rho0 has dimension {rho.shape[0]}, bundle has {bundle.dim}")
    if t < 0:
        raise ValueError("t must be non-negative")
    dt = default_dt(bundle) if dt is None else float(dt)
    bound = _generator_bound(bundle)
    if dt * bound > 2.5:
        raise StepSizeError(f"RK4 step {dt:.3g} is outside the stability region", 2.0 / bound)
    n_steps = int(math.ceil(t / dt - 1e-9)) if t > 0 else 0
    h = t / n_steps if n_steps else 0.0
    marks = None
    if sample_times is not None:
        sample_times = np.asarray(sample_times, dtype=float)
        marks = np.rint(sample_times / h).astype(int) if h else np.zeros(len(sample_times), int)
        out = np.empty((len(sample_times), bundle.dim, bundle.dim), dtype=complex)
        out[marks == 0] = rho
    tr0 = np.trace(rho).real
    f = lambda x: master_rhs(bundle, x)  # noqa: E731
    for step in range(1, n_steps + 1):
        k1 = f(rho)
        k2 = f(rho + 0.5 * h * k1)
        k3 = f(rho + 0.5 * h * k2)
        k4 = f(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if marks is not None:
            out[marks == step] = rho
    drift = abs(np.trace(rho).real - tr0)
    if drift > 1e-6:
        raise StepSizeError(f"trace drifted by {drift:.3g}", 0.5 * h)
    return rho if marks is None else out


# -- steady state -----------------------------------------------------------

def restrict(bundle: ModelBundle, subspace) -> ModelBundle:
    """Compress the bundle onto an invariant subspace.

    ``subspace`` is either a list of basis indices or an isometry whose columns
    span the subspace.  Raises ``ValueError`` if the dynamics leak out of it.
    """
    v = np.asarray(subspace)
    if v.ndim == 1:
        v = np.eye(bundle.dim)[:, v.astype(int)]
    v = v.astype(complex)
    vd = v.conj().T
    leak = np.eye(bundle.dim) - v @ vd
    for label, op in (("H_cond", bundle.h_cond), *zip(bundle.channels, bundle.resets)):
        if np.max(np.abs(leak @ op @ v)) > 1e-10:
            raise ValueError(f"subspace is not invariant under {label}")
    return replace(
        bundle, h_cond=vd @ bundle.h_cond @ v,
        resets=tuple(vd @ r @ v for r in bundle.resets),
        dark_state=None, light_subspace=None,
        meta={**bundle.meta, "embedding": v},
    )


def steady_state(bundle: ModelBundle, subspace="light", drop_channels="slow") -> np.ndarray:
    """Stationary ``rho`` of the (restricted) master equation, embedded in the full space.

    By default the slow atomic channels are switched off and the problem is
    restricted to the bundle's light subspace.  Pass ``subspace=None`` and
    ``drop_channels=()`` to use the unmodified generator.
    """
    if drop_channels == "slow":
        drop_channels = bundle.slow_channels
    work = bundle.without_channels(drop_channels) if drop_channels else bundle
    if isinstance(subspace, str):
        if subspace != "light":
            raise ValueError(f"unknown subspace {subspace!r}")
        subspace = bundle.light_subspace
    if subspace is not None:
        work = restrict(work, subspace)
        embed = work.meta["embedding"]
    else:
        embed = np.eye(bundle.dim)
    d = work.dim
    gen = liouvillian(work)
    if d * d <= 1600:
        sv = np.linalg.svd(gen, compute_uv=False)
        scale = max(sv[0], 1e-300)
        if sv[-2] / scale < 1e-11:
            raise NonUniqueSteadyStateError(
                f"generator has a {int(np.sum(sv / scale < 1e-11))}-dimensional null space")
    system = gen.copy()
    rhs = np.zeros(d * d, dtype=complex)
    # trace condition replaces the first row
    system[0, :] = np.eye(d).reshape(-1, order="F")
    rhs[0] = 1.0
    lu = lu_factor(system)
    if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * np.max(np.abs(np.diag(lu[0]))):
        raise NonUniqueSteadyStateError("generator is singular beyond the trace constraint")
    rho = lu_solve(lu, rhs).reshape(d, d, order="F")
    rho = 0.5 * (rho + rho.conj().T)
    return embed @ rho @ embed.conj().T


def generator_residual(bundle: ModelBundle, rho) -> float:
    return float(np.max(np.abs(master_rhs(bundle, rho))))


def no_click_evolution(bundle: ModelBundle, t, click_channels=None, eta: float = 1.0, target=None):
    """Exact no-click statistics after a detected click, without the two-state picture.

    Starts from the click-averaged post-click state ``J rho_ss J^dag / tr``
    of the full stationary state and evolves it with the generator minus the
    detected part ``eta * J . J^dag`` of each click channel.  Returns
    ``(survival, fidelity)`` on the grid ``t``; ``fidelity`` is the overlap of
    the normalised conditional state with ``target`` (default: dark state).
    """
    if click_channels is None:
        click_channels = bundle.cavity_channels or bundle.channels
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta!r}")
    d = bundle.dim
    rho = steady_state(bundle, subspace=None, drop_channels=())
    gen = liouvillian(bundle)
    post = np.zeros((d, d), dtype=complex)
    for c in click_channels:
        j = bundle.reset(c)
        post += j @ rho @ j.conj().T
        gen = gen - eta * np.kron(j.conj(), j)
    post /= np.trace(post).real
    target = bundle.dark_state if target is None else np.asarray(target, dtype=complex)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    v = post.reshape(-1, order="F")
    surv = np.empty(t.size)
    fid = np.empty(t.size)
    for i, ti in enumerate(t):
        m = (expm(gen * ti) @ v).reshape(d, d, order="F")
        surv[i] = np.trace(m).real
        fid[i] = (target.conj() @ m @ target).real / surv[i] if target is not None else np.nan
    return surv, fid
