"""Conditional Hamiltonians and reset operators of the three models.

* toy model: four levels ``g, b, d, e`` with two photon types ``D`` and ``L``;
* full model: two Lambda-type atoms in a cavity (product basis), optionally
  with atom-dependent couplings ``g1, g2`` and ``omega_M1, omega_M2``;
* effective model: the four atomic ground states ``00, s01, a01, 11`` left
  after eliminating excited atomic levels and cavity photons.

Units: hbar = 1; rates are in units of ``g`` (cavity models) or ``gamma_L``
(toy model).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .hilbert import BELL_LABELS, SpaceSpec, bell_transform, state_vector


class ParameterError(ValueError):
    """A physical parameter is out of its allowed range."""


class ConfigurationError(ValueError):
    """The requested model cannot be built from these settings."""


class UnsupportedConfigurationError(ConfigurationError):
    pass


class RegimeWarning(UserWarning):
    """A parameter-regime inequality is violated (advisory only)."""


def _nonneg(name, value):
    if not np.isfinite(value) or value < 0:
        raise ParameterError(f"{name} must be a finite non-negative rate, got {value!r}")


@dataclass(frozen=True)
class ToyParams:
    omega_L: float = 1.0
    gamma_L: float = 1.0
    gamma_D: float = 1e-3

    def __post_init__(self):
        for name in ("omega_L", "gamma_L", "gamma_D"):
            _nonneg(name, getattr(self, name))

    @property
    def x(self) -> float:
        if self.gamma_L == 0:
            raise ParameterError("gamma_L must be positive to form x = omega_L / gamma_L")
        return self.omega_L / self.gamma_L

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ModelParams:
    """Rates and couplings of the two-atom cavity system."""

    g1: float = 1.0
    g2: float = 1.0
    kappa: float = 1.0
    gamma0: float = 0.05
    gamma1: float = 0.05
    omega_L: float = 1.0
    omega_M1: float = 0.05
    omega_M2: float = 0.05
    delta: float = 50.0
    eta: float = 1.0
    n_max: int = 2

    def __post_init__(self):
        for name in ("g1", "g2", "kappa", "gamma0", "gamma1", "omega_L", "omega_M1", "omega_M2"):
            _nonneg(name, getattr(self, name))
        if not np.isfinite(self.delta):
            raise ParameterError(f"delta must be finite, got {self.delta!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta!r}")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ParameterError(f"n_max must be a non-negative integer, got {self.n_max!r}")

    @classmethod
    def symmetric(cls, g=1.0, kappa=1.0, gamma=0.1, omega_L=1.0, omega_M=0.05,
                  delta=50.0, eta=1.0, n_max=2, branching=0.5,
                  delta_g=0.0, delta_omega_M=0.0):
        """Build from mean values.

        ``branching`` is ``gamma0 / gamma``.  ``delta_g`` and ``delta_omega_M``
        are *relative* differences between atom 1 and atom 2, split
        symmetrically around the mean (``g1 - g2 = delta_g * g``).
        """
        return cls(
            g1=g * (1 + delta_g / 2), g2=g * (1 - delta_g / 2), kappa=kappa,
            gamma0=gamma * branching, gamma1=gamma * (1 - branching),
            omega_L=omega_L,
            omega_M1=omega_M * (1 + delta_omega_M / 2),
            omega_M2=omega_M * (1 - delta_omega_M / 2),
            delta=delta, eta=eta, n_max=n_max,
        )

    @property
    def gamma(self) -> float:
        return self.gamma0 + self.gamma1

    @property
    def g(self) -> float:
        return 0.5 * (self.g1 + self.g2)

    @property
    def omega_M(self) -> float:
        return 0.5 * (self.omega_M1 + self.omega_M2)

    @property
    def is_symmetric(self) -> bool:
        return (math.isclose(self.g1, self.g2, rel_tol=1e-12, abs_tol=1e-15)
                and math.isclose(self.omega_M1, self.omega_M2, rel_tol=1e-12, abs_tol=1e-15))

    @property
    def cooperativity(self) -> float:
        return derived_rates(self).C

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    # Delta = 50 g, Omega_L = kappa = g, Omega_M = 0.05 g, Gamma_0 = Gamma_1
    "fig5a": dict(g=1.0, kappa=1.0, gamma=0.1, omega_L=1.0, omega_M=0.05, delta=50.0),
    "fig5b": dict(g=1.0, kappa=1.0, gamma=1.0, omega_L=1.0, omega_M=0.05, delta=50.0),
    "fig6": dict(g=1.0, kappa=1.0, gamma=0.05, omega_L=1.0, omega_M=0.05, delta=50.0),
}
TOY_PRESETS = {"toy": dict(omega_L=1.0, gamma_L=1.0, gamma_D=1e-3)}


def preset(name: str, **overrides):
    """Parameter preset by name; cavity presets accept ``ModelParams.symmetric`` kwargs."""
    if name in TOY_PRESETS:
        return ToyParams(**{**TOY_PRESETS[name], **overrides})
    if name in PRESETS:
        return ModelParams.symmetric(**{**PRESETS[name], **overrides})
    raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS) + sorted(TOY_PRESETS)}")


@dataclass(frozen=True)
class DerivedRates:
    C: float
    y: float
    delta_L: float
    delta_C: float
    g_eff: float
    gamma_eff: float
    kappa_eff: float
    gamma_eff_0: float
    gamma_eff_1: float
    x: float | None = None


def derived_rates(p: ModelParams) -> DerivedRates:
    """Cooperativity, light shifts and effective rates, using the mean coupling."""
    for name, value in (("delta", p.delta), ("kappa", p.kappa), ("gamma", p.gamma),
                        ("omega_M", p.omega_M)):
        if value == 0:
            raise ParameterError(f"{name} must be non-zero to form the derived rates")
    g, delta = p.g, p.delta
    gamma_eff = p.omega_L**2 * p.gamma / (4 * delta**2)
    delta_L = -p.omega_L**2 / (4 * delta)
    return DerivedRates(
        C=g**2 / (p.kappa * p.gamma),
        y=delta_L / p.omega_M,
        delta_L=delta_L,
        delta_C=-g**2 / delta,
        g_eff=-p.omega_L * g / (math.sqrt(2) * delta),
        gamma_eff=gamma_eff,
        kappa_eff=2 * p.omega_L**2 * g**2 / (p.kappa * delta**2),
        gamma_eff_0=p.gamma0 * gamma_eff / p.gamma,
        gamma_eff_1=p.gamma1 * gamma_eff / p.gamma,
    )


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """``H_cond`` plus labelled reset operators over a declared basis.

    ``cavity_channels`` are the channels a cavity photon detector can see;
    ``slow_channels`` are the atomic-decay channels removed when computing the
    light-period steady state.  ``light_subspace`` is an isometry whose
    columns span the light subspace; ``dark_state`` is the shelving state.
    """

    h_cond: np.ndarray
    resets: tuple
    channels: tuple
    basis: str
    cavity_channels: tuple = ()
    slow_channels: tuple = ()
    detect_atomic_default: bool = False
    dark_state: np.ndarray | None = None
    light_subspace: np.ndarray | None = None
    params: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        h = np.asarray(self.h_cond, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("h_cond must be a square matrix")
        resets = tuple(np.asarray(r, dtype=complex) for r in self.resets)
        if len(resets) != len(self.channels):
            raise ValueError("one channel label per reset operator is required")
        for label, r in zip(self.channels, resets):
            if r.shape != h.shape:
                raise ValueError(f"reset {label!r} has shape {r.shape}, expected {h.shape}")
        object.__setattr__(self, "h_cond", h)
        object.__setattr__(self, "resets", resets)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def dim(self) -> int:
        return self.h_cond.shape[0]

    def reset(self, label: str) -> np.ndarray:
        return self.resets[self.channels.index(label)]

    @property
    def atomic_channels(self) -> tuple:
        return tuple(c for c in self.channels if c not in self.cavity_channels)

    def decay_operator(self) -> np.ndarray:
        """``sum_i R_i^dag R_i``."""
        out = np.zeros_like(self.h_cond)
        for r in self.resets:
            out += r.conj().T @ r
        return out

    def sum_rule_residual(self) -> float:
        """Max elementwise ``|i (H - H^dag) - sum_i R_i^dag R_i|``."""
        h = self.h_cond
        return float(np.max(np.abs(1j * (h - h.conj().T) - self.decay_operator())))

    def without_channels(self, labels) -> "ModelBundle":
        """Drop reset channels together with their share of the decay in ``H_cond``."""
        labels = set(labels)
        unknown = labels - set(self.channels)
        if unknown:
            raise KeyError(f"unknown channels {sorted(unknown)}")
        h = self.h_cond.copy()
        keep = []
        for label, r in zip(self.channels, self.resets):
            if label in labels:
                h = h + 0.5j * (r.conj().T @ r)
            else:
                keep.append((label, r))
        return replace(
            self, h_cond=h, resets=tuple(r for _, r in keep),
            channels=tuple(lab for lab, _ in keep),
            cavity_channels=tuple(c for c in self.cavity_channels if c not in labels),
            slow_channels=tuple(c for c in self.slow_channels if c not in labels),
        )


# -- toy model ---------------------------------------------------------------

TOY_LEVELS = ("g", "b", "d", "e")


def build_toy(p: ToyParams) -> ModelBundle:
    """Four-level toy model in the basis ``(g, b, d, e)``.

    ``R_D`` sends ``d`` and ``b`` to ``g`` coherently, so ``R_D^dag R_D`` has a
    ``b``-``d`` cross term; it is kept in ``H_cond`` to make the no-jump
    evolution and the resets a trace-preserving unraveling.
    """
    if not isinstance(p, ToyParams):
        raise TypeError("build_toy expects ToyParams")
    g, b, d, e = range(4)

    def kb(i, j):
        m = np.zeros((4, 4), dtype=complex)
        m[i, j] = 1.0
        return m

    drive = 0.5 * p.omega_L * (kb(b, e) + kb(g, b))
    r_d = math.sqrt(p.gamma_D) * (kb(d, e) + kb(g, d) + kb(b, e) + kb(g, b))
    r_l = math.sqrt(p.gamma_L) * (kb(b, e) + kb(g, b))
    h = (drive + drive.conj().T
         - 0.5j * p.gamma_D * (kb(b, b) + kb(d, d) + 2 * kb(e, e) + kb(b, d) + kb(d, b))
         - 0.5j * p.gamma_L * (kb(b, b) + kb(e, e)))
    light = np.eye(4)[:, [g, b, e]]
    return ModelBundle(
        h_cond=h, resets=(r_d, r_l), channels=("D", "L"), basis="toy",
        cavity_channels=(), slow_channels=("D",), detect_atomic_default=True,
        dark_state=np.eye(4, dtype=complex)[d], light_subspace=light, params=p,
    )


# -- full model ---------------------------------------------------------------

FULL_CHANNELS = ("A20_atom1", "A20_atom2", "A21_atom1", "A21_atom2", "CAV")
BELL_CHANNELS = ("R_01", "R_02", "R_11", "R_12", "CAV")
# per Fock block: 00, s01, 11, s02, s12, 22
_SYMMETRIC_SLOTS = tuple(i for i, lab in enumerate(BELL_LABELS) if not lab.startswith("a"))


def _ket_bra(i, j, n=3):
    m = np.zeros((n, n))
    m[i, j] = 1.0
    return m


def _cavity_ops(n_max):
    eye_f = np.eye(n_max + 1)
    eye3 = np.eye(3)
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1)

    def atom(which, op):
        pair = np.kron(op, eye3) if which == 1 else np.kron(eye3, op)
        return np.kron(eye_f, pair)

    return atom, np.kron(a, np.eye(9))


def _check_params(p):
    if not isinstance(p, ModelParams):
        raise TypeError("expected ModelParams")


def build_full(p: ModelParams) -> ModelBundle:
    """Two atoms plus cavity mode in the product basis (dimension ``9 (n_max+1)``)."""
    _check_params(p)
    if p.n_max < 1:
        raise ConfigurationError("the full model needs n_max >= 1 for the cavity coupling to act")
    spec = SpaceSpec(p.n_max)
    atom, b = _cavity_ops(p.n_max)
    bd = b.T
    h = np.zeros((spec.dim, spec.dim), dtype=complex)
    resets = []
    for which, g_i, om_i in ((1, p.g1, p.omega_M1), (2, p.g2, p.omega_M2)):
        s12 = atom(which, _ket_bra(1, 2))
        s01 = atom(which, _ket_bra(0, 1))
        s02 = atom(which, _ket_bra(0, 2))
        s22 = atom(which, _ket_bra(2, 2))
        h += 0.5 * p.omega_L * (s12 + s12.T) + 0.5 * om_i * (s01 + s01.T)
        h += g_i * (s02 @ bd + s02.T @ b)
        h += (p.delta - 0.5j * p.gamma) * s22
    h += -0.5j * p.kappa * (bd @ b)
    for j, rate in ((0, p.gamma0), (1, p.gamma1)):
        for which in (1, 2):
            resets.append(math.sqrt(rate) * atom(which, _ket_bra(j, 2)))
    resets.append(math.sqrt(p.kappa) * b)
    u = bell_transform(spec)
    slots = [9 * n + s for n in range(p.n_max + 1) for s in _SYMMETRIC_SLOTS]
    return ModelBundle(
        h_cond=h, resets=tuple(resets), channels=FULL_CHANNELS, basis="product",
        cavity_channels=("CAV",), slow_channels=FULL_CHANNELS[:4],
        dark_state=state_vector("a01,0", spec), light_subspace=u[:, slots], params=p,
    )


def to_bell_basis(bundle: ModelBundle) -> ModelBundle:
    """Re-express a product-basis bundle in the symmetric/antisymmetric basis.

    Per-atom resets ``A^(1), A^(2)`` of each branch ``j`` become
    ``R_j1 = (A^(1) + A^(2))/sqrt2`` and ``R_j2 = (A^(2) - A^(1))/sqrt2``.
    """
    if bundle.basis != "product":
        raise ConfigurationError(f"expected a product-basis bundle, got basis {bundle.basis!r}")
    spec = SpaceSpec(bundle.dim // 9 - 1)
    u = bell_transform(spec)
    ud = u.conj().T

    def conj(m):
        return ud @ m @ u

    resets = []
    for j in (0, 1):
        a1 = bundle.reset(f"A2{j}_atom1")
        a2 = bundle.reset(f"A2{j}_atom2")
        resets.append(conj((a1 + a2) / math.sqrt(2)))
        resets.append(conj((a2 - a1) / math.sqrt(2)))
    resets.append(conj(bundle.reset("CAV")))
    slots = [9 * n + s for n in range(spec.n_max + 1) for s in _SYMMETRIC_SLOTS]
    return replace(
        bundle, h_cond=conj(bundle.h_cond), resets=tuple(resets), channels=BELL_CHANNELS,
        basis="bell", slow_channels=BELL_CHANNELS[:4],
        dark_state=ud @ bundle.dark_state, light_subspace=np.eye(spec.dim)[:, slots],
    )


# -- effective ground-state model ------------------------------------------

EFFECTIVE_LABELS = ("00", "s01", "a01", "11")


def build_effective(p: ModelParams) -> ModelBundle:
    """Effective four-state model over ``(00, s01, a01, 11)``.

    Overall level shifts and detunings of order ``1/Delta^2`` are dropped;
    reset phases are kept as derived (``-sqrt(Gamma_eff;j)``, ``+i sqrt(kappa_eff)``).
    """
    _check_params(p)
    if not p.is_symmetric:
        raise UnsupportedConfigurationError(
            "the effective model requires g1 == g2 and omega_M1 == omega_M2")
    if not p.delta > 0:
        raise ParameterError(f"delta must be positive for the effective model, got {p.delta!r}")
    r = derived_rates(p)
    s00, s01, a01, s11 = range(4)

    def kb(i, j):
        return _ket_bra(i, j, 4).astype(complex)

    couple = p.omega_M / math.sqrt(2) * (kb(s00, s01) + kb(s01, s11))
    h = (couple + couple.conj().T
         - r.delta_L * (kb(s00, s00) - kb(s11, s11))
         - 0.5j * r.gamma_eff * (kb(a01, a01) + kb(s01, s01) + 2 * kb(s11, s11))
         - 0.5j * r.kappa_eff * (kb(s01, s01) + kb(s11, s11)))
    ge0, ge1 = math.sqrt(r.gamma_eff_0), math.sqrt(r.gamma_eff_1 / 2)
    resets = (
        -ge0 * (kb(s00, s01) + kb(s01, s11)),
        -ge0 * (kb(s00, a01) - kb(a01, s11)),
        -ge1 * (kb(a01, a01) + kb(s01, s01) + 2 * kb(s11, s11)),
        -ge1 * (kb(s01, a01) + kb(a01, s01)),
        1j * math.sqrt(r.kappa_eff) * (kb(s00, s01) + kb(s01, s11)),
    )
    return ModelBundle(
        h_cond=h, resets=resets, channels=BELL_CHANNELS, basis="effective",
        cavity_channels=("CAV",), slow_channels=BELL_CHANNELS[:4],
        dark_state=np.eye(4, dtype=complex)[a01],
        light_subspace=np.eye(4)[:, [s00, s01, s11]], params=p,
        meta={"excited_admixture": p.omega_L**2 / (4 * p.delta**2)},
    )


def eliminate(h: np.ndarray, keep) -> np.ndarray:
    """Adiabatic elimination of every state not in ``keep``.

    Setting the time derivatives of the eliminated amplitudes to zero gives
    ``H_PP - H_PQ H_QQ^{-1} H_QP`` on the kept states.
    """
    keep = np.asarray(keep)
    drop = np.setdiff1d(np.arange(h.shape[0]), keep)
    hpp = h[np.ix_(keep, keep)]
    if drop.size == 0:
        return hpp
    hpq = h[np.ix_(keep, drop)]
    hqp = h[np.ix_(drop, keep)]
    hqq = h[np.ix_(drop, drop)]
    return hpp - hpq @ np.linalg.solve(hqq, hqp)


def eliminate_to_ground(bundle: ModelBundle) -> np.ndarray:
    """Two-step elimination of a Bell-basis full model down to ``(00, s01, a01, 11)`` at n=0.

    First all states with an excited atom, then every state with ``n >= 1``.
    """
    if bundle.basis != "bell":
        raise ConfigurationError("eliminate_to_ground expects a Bell-basis bundle")
    n_blocks = bundle.dim // 9
    ground = [9 * n + s for n in range(n_blocks) for s in range(4)]
    h1 = eliminate(bundle.h_cond, ground)
    return eliminate(h1, np.arange(4))


# -- regime checks ---------------------------------------------------------

def check_regime(p, threshold: float = 10.0) -> list[str]:
    """Advisory checks of the parameter hierarchy; ``<<`` means ratio above ``threshold``."""
    out = []
    if isinstance(p, ToyParams):
        for name in ("omega_L", "gamma_L"):
            other = getattr(p, name)
            if not other > threshold * p.gamma_D:
                out.append(f"toy regime: gamma_D << {name} violated "
                           f"(ratio {other / p.gamma_D if p.gamma_D else math.inf:.3g} <= {threshold})")
    else:
        fast = {"g": p.g, "kappa": p.kappa, "gamma": p.gamma, "omega_L": p.omega_L}
        for name, value in fast.items():
            if p.omega_M > value:
                out.append(f"hierarchy: omega_M < {name} violated ({p.omega_M:.3g} > {value:.3g})")
            if not abs(p.delta) > threshold * value:
                out.append(f"hierarchy: {name} << delta violated "
                           f"(delta/{name} = {abs(p.delta) / value if value else math.inf:.3g} <= {threshold})")
        if p.kappa > 0 and p.gamma > 0:
            ratio = 8 * p.g**2 / (p.kappa * p.gamma)  # kappa_eff / gamma_eff
            if not ratio > threshold:
                out.append(f"dark-state condition gamma_eff << kappa_eff violated "
                           f"(kappa_eff/gamma_eff = {ratio:.3g} <= {threshold})")
    for msg in out:
        warnings.warn(msg, RegimeWarning, stacklevel=2)
    return out
