"""Material data, dimensionless groups, constitutive closures, PDE residuals.

Everything downstream (trainer and finite-difference reference solvers)
works on the dimensionless form of the governing equations. A problem is
described by dimensional :class:`MaterialProperties` plus user-chosen
:class:`CharacteristicScales` (x*, t*, p*, T*); :func:`compute_groups`
derives the dimensionless coefficients once and the residual functions below
evaluate the momentum, phase-mass, energy, and strain-consistency equations
from a :class:`FieldPoint` holding field values and the partial derivatives
each residual needs.

All residual functions are pure and broadcast over numpy arrays, so the same
code serves single points in unit tests, collocation batches in the trainer,
and grid slices in the reference solvers.

Conventions:

* Tension-positive stress; the volumetric stress is the mean total stress
  measured incrementally from the configured reference state.
* Single-phase (fully saturated) problems are marked by an absent nonwetting
  viscosity. Then S_w = 1, the capillary field drops out, the nonwetting
  slots mirror the wetting ones inside the averaged quantities, and the
  viscosity ratio uses mu = mu_w (the mu = mu_w + mu_n convention applies
  only to genuinely two-phase problems).
* Absent bulk moduli (K_s, K_w, K_n) mean incompressible phases: 1/K = 0.
  An absent Young's modulus means a rigid matrix: the mechanical groups
  N_T, D*, u*, eps* are zero and 1/K_dr = 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivisionByZeroError,
    MissingDerivativeError,
    MissingPropertyError,
    SaturationOutOfRangeError,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# material data and scales


@dataclass
class MaterialProperties:
    """Dimensional inputs. ``None`` encodes an absent (infinite) modulus."""

    phi: float
    b: float
    k: float
    mu_w: float
    rho_s: float
    rho_w: float
    E: float | None = None
    nu: float = 0.0
    K_s: float | None = None
    K_w: float | None = None
    K_n: float | None = None
    c_w: float | None = None
    c_n: float | None = None
    mu_n: float | None = None
    rho_n: float | None = None
    lambda_s: float | None = None
    lambda_w: float | None = None
    lambda_n: float | None = None
    lambda_avg: float | None = None
    C_s: float | None = None
    C_w: float | None = None
    C_n: float | None = None
    rhoC_avg: float | None = None
    beta_s: float = 0.0
    beta_w: float = 0.0
    beta_n: float = 0.0
    g: float = 0.0
    d: tuple[float, ...] = (-1.0,)
    f_w: float = 0.0
    f_n: float = 0.0
    G_theta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"porosity must be in (0, 1), got {self.phi}")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError(f"Poisson ratio must be in [0, 0.5), got {self.nu}")
        if not 0.0 < self.b <= 1.0:
            raise ValueError(f"Biot coefficient must be in (0, 1], got {self.b}")
        for name in ("E", "K_s", "K_w", "K_n", "k", "mu_w", "mu_n",
                     "rho_s", "rho_w", "rho_n", "lambda_avg", "rhoC_avg"):
            v = getattr(self, name)
            if v is not None and not v > 0.0:
                raise ValueError(f"{name} must be positive, got {v}")

    @property
    def two_phase(self) -> bool:
        return self.mu_n is not None

    @property
    def K_dr(self) -> float | None:
        """Drained bulk modulus from (E, nu); None for a rigid matrix."""
        if self.E is None:
            return None
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))

    def compressibility(self, phase: str) -> float:
        """1/Pa fluid compressibility, from c_alpha or 1/K_alpha, else 0."""
        if phase == "w":
            c, K = self.c_w, self.K_w
        else:
            c, K = (self.c_n, self.K_n) if self.two_phase else (self.c_w, self.K_w)
        if c is not None:
            return c
        return 0.0 if K is None else 1.0 / K

    def nonwetting(self, name: str):
        """Nonwetting slot, mirroring the wetting one when single-phase."""
        value = getattr(self, name)
        if value is None and not self.two_phase:
            value = getattr(self, name.replace("_n", "_w"))
        return value


@dataclass(frozen=True)
class CharacteristicScales:
    """User-chosen normalization scales: length, time, pressure, temperature."""

    x_star: float
    t_star: float
    p_star: float
    T_star: float

    def __post_init__(self):
        for name in ("x_star", "t_star", "p_star", "T_star"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class BrooksCoreyModel:
    """Capillary pressure / relative permeability closure parameters."""

    p_entry: float          # entry pressure p_b, Pa
    pore_size_index: float  # lambda
    s_rw: float             # residual wetting saturation

    def __post_init__(self):
        if not self.p_entry > 0.0:
            raise ValueError("entry pressure must be positive")
        if not self.pore_size_index > 0.0:
            raise ValueError("pore-size index must be positive")
        if not 0.0 <= self.s_rw < 1.0:
            raise ValueError("residual saturation must be in [0, 1)")


@dataclass(frozen=True)
class StorageModel:
    """Storage and thermal-expansion coefficients of the mass balances."""

    N_nn: np.ndarray | float
    N_nw: np.ndarray | float
    N_wn: np.ndarray | float
    N_ww: np.ndarray | float
    N: float
    beta_sw: np.ndarray | float
    beta_sn: np.ndarray | float


@dataclass(frozen=True)
class ReferenceState:
    """Initial-state datum for the incremental stress relations."""

    pw0: float = 0.0
    pn0: float = 0.0
    T0: float = 0.0
    sigv0: float = 0.0
    ev0: float = 0.0


@dataclass(frozen=True)
class DimensionlessGroups:
    """Coefficients of the dimensionless governing equations.

    ``Q_factor_*`` are the thermal-coupling factors per unit saturation:
    Q*_alpha = S_alpha * Q_factor_alpha. ``flow_time_factor`` is
    Mbar* x A* = mu x*^2 / (k t*), the combination that actually multiplies
    the storage matrix in the mass balances. ``C_star`` is the constant heat
    capacity ratio when the averaged capacity is prescribed, else None and
    the per-point value comes from :func:`heat_capacity_ratio`.
    """

    nu_star: float
    N_T: float
    N_d: float
    inv_Mbar: float
    inv_Mbar_star: float
    A_star: float
    D_star: float
    J_star: float
    F_star: float
    Q_factor_w: float
    Q_factor_n: float
    f_star_w: float
    f_star_n: float
    G_theta_star: float
    rhoC_bar: float
    lambda_bar: float
    u_star: float
    eps_star: float
    C_star: float | None
    mu_over_mu_w: float
    mu_over_mu_n: float
    rho_w_over_rho: float
    rho_n_over_rho: float
    rhoCw_over_rhoCbar: float | None
    rhoCn_over_rhoCbar: float | None
    b: float
    inv_Kdr: float
    flow_time_factor: float
    two_phase: bool
    phi: float
    rho: float
    rho_solid_term: float
    phi_rho_w: float
    phi_rho_n: float
    d: tuple[float, ...]
    p_star: float
    T_star: float
    x_star: float
    t_star: float

    def bulk_density_ratio(self, S_w):
        """rho_b / rho at the given wetting saturation."""
        rho_b = self.rho_solid_term + S_w * self.phi_rho_w \
            + (1.0 - S_w) * self.phi_rho_n
        return rho_b / self.rho


def compute_groups(props: MaterialProperties,
                   scales: CharacteristicScales) -> DimensionlessGroups:
    """Derive every dimensionless coefficient; exact, no iteration."""
    xs, ts, ps, Ts = scales.x_star, scales.t_star, scales.p_star, scales.T_star
    for name, v in (("x_star", xs), ("t_star", ts), ("p_star", ps), ("T_star", Ts)):
        if v == 0.0:
            raise DivisionByZeroError(f"characteristic scale {name} is zero")

    two = props.two_phase
    phi, b = props.phi, props.b
    mu_w = props.mu_w
    mu_n = props.nonwetting("mu_n")
    mu = mu_w + mu_n if two else mu_w
    rho_n = props.nonwetting("rho_n")
    if rho_n is None:
        raise MissingPropertyError("rho_n")
    rho = (1.0 - phi) * props.rho_s + 0.5 * phi * (props.rho_w + rho_n)

    c_w = props.compressibility("w")
    c_n = props.compressibility("n")
    inv_Ks = 0.0 if props.K_s is None else 1.0 / props.K_s
    inv_Mbar = 0.5 * phi * c_w + 0.5 * phi * c_n + (b - phi) * inv_Ks

    K_dr = props.K_dr
    if K_dr is None:
        inv_Kdr = 0.0
        N_T = 0.0
        D_star = 0.0
        u_star = 0.0
        eps_star = 0.0
    else:
        inv_Kdr = 1.0 / K_dr
        N_T = props.beta_s * K_dr * Ts / ps
        D_star = b * mu * xs * xs / (K_dr * props.k * ts)
        u_star = ps * xs / K_dr
        eps_star = ps / K_dr
    inv_Mbar_star = inv_Mbar + b * b * inv_Kdr

    flow_time_factor = mu * xs * xs / (props.k * ts)
    A_star = flow_time_factor * inv_Mbar_star
    J_star = props.k * ps * ts / (mu * xs * xs)
    N_d = xs * rho * props.g / ps

    q_scale = Ts * mu * xs * xs / (ts * props.k * ps)
    beta_n = props.nonwetting("beta_n")
    Q_factor_w = phi * (props.beta_w - props.beta_s) * q_scale
    Q_factor_n = phi * (beta_n - props.beta_s) * q_scale

    f_scale = mu * xs * xs / (props.k * ps)
    f_star_w = props.f_w * f_scale
    f_star_n = props.f_n * f_scale

    if props.rhoC_avg is not None:
        rhoC_bar = props.rhoC_avg
        C_star = 1.0
    else:
        if props.C_s is None:
            raise MissingPropertyError("C_s")
        if props.C_w is None:
            raise MissingPropertyError("C_w")
        C_n = props.nonwetting("C_n")
        if C_n is None:
            raise MissingPropertyError("C_n")
        rhoC_bar = (1.0 - phi) * props.rho_s * props.C_s \
            + 0.5 * phi * props.rho_w * props.C_w + 0.5 * phi * rho_n * C_n
        C_star = 1.0 if not two else None

    if props.lambda_avg is not None:
        lambda_bar = props.lambda_avg
    else:
        if props.lambda_s is None:
            raise MissingPropertyError("lambda_s")
        if props.lambda_w is None:
            raise MissingPropertyError("lambda_w")
        lambda_n = props.nonwetting("lambda_n")
        if lambda_n is None:
            raise MissingPropertyError("lambda_n")
        lambda_bar = (1.0 - phi) * props.lambda_s \
            + 0.5 * phi * props.lambda_w + 0.5 * phi * lambda_n

    F_star = ts * lambda_bar / (rhoC_bar * xs * xs)
    G_theta_star = props.G_theta * ts / (Ts * rhoC_bar)

    C_w = props.C_w
    C_n_eff = props.nonwetting("C_n")
    rhoCw_ratio = None if C_w is None else props.rho_w * C_w / rhoC_bar
    rhoCn_ratio = None if C_n_eff is None else rho_n * C_n_eff / rhoC_bar

    return DimensionlessGroups(
        nu_star=(1.0 - 2.0 * props.nu) / (1.0 + props.nu),
        N_T=N_T,
        N_d=N_d,
        inv_Mbar=inv_Mbar,
        inv_Mbar_star=inv_Mbar_star,
        A_star=A_star,
        D_star=D_star,
        J_star=J_star,
        F_star=F_star,
        Q_factor_w=Q_factor_w,
        Q_factor_n=Q_factor_n,
        f_star_w=f_star_w,
        f_star_n=f_star_n,
        G_theta_star=G_theta_star,
        rhoC_bar=rhoC_bar,
        lambda_bar=lambda_bar,
        u_star=u_star,
        eps_star=eps_star,
        C_star=C_star,
        mu_over_mu_w=mu / mu_w,
        mu_over_mu_n=mu / mu_n,
        rho_w_over_rho=props.rho_w / rho,
        rho_n_over_rho=rho_n / rho,
        rhoCw_over_rhoCbar=rhoCw_ratio,
        rhoCn_over_rhoCbar=rhoCn_ratio,
        b=b,
        inv_Kdr=inv_Kdr,
        flow_time_factor=flow_time_factor,
        two_phase=two,
        phi=phi,
        rho=rho,
        rho_solid_term=(1.0 - phi) * props.rho_s,
        phi_rho_w=phi * props.rho_w,
        phi_rho_n=phi * rho_n,
        d=tuple(props.d),
        p_star=ps,
        T_star=Ts,
        x_star=xs,
        t_star=ts,
    )


def heat_capacity_ratio(props: MaterialProperties, groups: DimensionlessGroups,
                        S_w):
    """C* = (rho C)_avg / rhoC_bar, per point when saturation-dependent."""
    if groups.C_star is not None:
        return groups.C_star
    C_n = props.nonwetting("C_n")
    rho_n = props.nonwetting("rho_n")
    avg = (1.0 - props.phi) * props.rho_s * props.C_s \
        + props.phi * (S_w * props.rho_w * props.C_w
                       + (1.0 - S_w) * rho_n * C_n)
    return avg / groups.rhoC_bar


def conductivity_ratio(props: MaterialProperties, groups: DimensionlessGroups,
                       S_w):
    """lambda_avg / lambda_bar; 1 when a constant average is prescribed."""
    if props.lambda_avg is not None:
        return 1.0
    lambda_n = props.nonwetting("lambda_n")
    avg = (1.0 - props.phi) * props.lambda_s \
        + props.phi * (S_w * props.lambda_w + (1.0 - S_w) * lambda_n)
    return avg / groups.lambda_bar


# ---------------------------------------------------------------------------
# Brooks-Corey closure


def brooks_corey(model: BrooksCoreyModel, S_w):
    """(p_c, k_rw, k_rg) at wetting saturation S_w.

    p_c is defined for S_rw < S_w <= 1 (infinite at residual saturation);
    the relative permeabilities for S_rw <= S_w <= 1.
    """
    S_w = np.asarray(S_w, dtype=np.float64)
    if np.any(S_w > 1.0) or np.any(S_w < model.s_rw):
        raise SaturationOutOfRangeError(
            f"S_w outside [{model.s_rw}, 1]: range "
            f"[{S_w.min()}, {S_w.max()}]"
        )
    lam = model.pore_size_index
    S_e = (S_w - model.s_rw) / (1.0 - model.s_rw)
    with np.errstate(divide="ignore"):
        p_c = np.where(S_e > 0.0, model.p_entry * S_e ** (-1.0 / lam), np.inf)
    k_rw = S_e ** ((2.0 + 3.0 * lam) / lam)
    k_rg = (1.0 - S_e) ** 2 * (1.0 - S_e ** ((2.0 + lam) / lam))
    if S_w.ndim == 0:
        return float(p_c), float(k_rw), float(k_rg)
    return p_c, k_rw, k_rg


def saturation_from_pc(model: BrooksCoreyModel, p_c):
    """Invert the capillary relation; clamps to S_w = 1 below entry pressure."""
    p_c = np.asarray(p_c, dtype=np.float64)
    below = p_c < model.p_entry
    n_below = int(np.count_nonzero(below))
    if n_below:
        logger.debug(
            "clamping %d capillary pressures below entry pressure to S_w = 1",
            n_below,
        )
    safe = np.where(below, model.p_entry, p_c)
    S_e = (safe / model.p_entry) ** (-model.pore_size_index)
    S_w = model.s_rw + S_e * (1.0 - model.s_rw)
    S_w = np.where(below, 1.0, S_w)
    return float(S_w) if p_c.ndim == 0 else S_w


def dsw_dpc(model: BrooksCoreyModel, p_c):
    """Analytic dS_w/dp_c (1/Pa); zero in the clamped region below entry."""
    p_c = np.asarray(p_c, dtype=np.float64)
    lam = model.pore_size_index
    below = p_c < model.p_entry
    safe = np.where(below, model.p_entry, p_c)
    slope = -(lam * (1.0 - model.s_rw) / model.p_entry) \
        * (safe / model.p_entry) ** (-lam - 1.0)
    out = np.where(below, 0.0, slope)
    return float(out) if p_c.ndim == 0 else out


def storage_coefficients(props: MaterialProperties,
                         model: BrooksCoreyModel | None,
                         S_w, p_c=None) -> StorageModel:
    """Evaluate the storage matrix entries and thermal expansion terms.

    dS_w/dp_c comes analytically from the Brooks-Corey model; for saturated
    problems pass ``model=None`` and S_w = 1.
    """
    S_w = np.asarray(S_w, dtype=np.float64)
    if np.any(S_w > 1.0) or np.any(S_w < 0.0):
        raise SaturationOutOfRangeError(f"S_w outside [0, 1]")
    if model is not None:
        if p_c is None:
            p_c, _, _ = brooks_corey(model, S_w)
        dSwdpc = dsw_dpc(model, p_c)
    else:
        dSwdpc = np.zeros_like(S_w)
    phi, b = props.phi, props.b
    c_w = props.compressibility("w")
    c_n = props.compressibility("n")
    inv_Ks = 0.0 if props.K_s is None else 1.0 / props.K_s
    S_n = 1.0 - S_w
    N = (b - phi) * (1.0 - b) * inv_Ks
    N_nn = -phi * dSwdpc + phi * S_n * c_n + S_n ** 2 * N
    N_cross = phi * dSwdpc + S_n * S_w * N
    N_ww = -phi * dSwdpc + phi * S_w * c_w + S_w ** 2 * N
    beta_n = props.nonwetting("beta_n") or 0.0
    beta_sw = S_w * ((b - phi) * props.beta_s + phi * props.beta_w)
    beta_sn = S_n * ((b - phi) * props.beta_s + phi * beta_n)
    return StorageModel(
        N_nn=N_nn, N_nw=N_cross, N_wn=N_cross, N_ww=N_ww, N=N,
        beta_sw=beta_sw, beta_sn=beta_sn,
    )


# ---------------------------------------------------------------------------
# field state and residuals


@dataclass
class FieldPoint:
    """Field values and partial derivatives at dimensionless points.

    Slots may hold scalars or aligned arrays; only the slots required by the
    residuals being evaluated need to be populated. Suffixes name the
    derivative: ``_x``, ``_y``, ``_t`` first order, ``_xx``, ``_yy``, ``_xy``
    second order. ``sigv_t`` is the externally supplied volumetric stress
    rate (previous split iterate during flow training).
    """

    ux: object = None
    uy: object = None
    pw: object = None
    pc: object = None
    T: object = None
    ev: object = None
    ux_x: object = None
    ux_y: object = None
    ux_xx: object = None
    ux_yy: object = None
    ux_xy: object = None
    uy_x: object = None
    uy_y: object = None
    uy_xx: object = None
    uy_yy: object = None
    uy_xy: object = None
    pw_x: object = None
    pw_y: object = None
    pw_t: object = None
    pw_xx: object = None
    pw_yy: object = None
    pc_x: object = None
    pc_y: object = None
    pc_t: object = None
    pc_xx: object = None
    pc_yy: object = None
    T_x: object = None
    T_y: object = None
    T_t: object = None
    T_xx: object = None
    T_yy: object = None
    ev_x: object = None
    ev_y: object = None
    ev_t: object = None
    sigv_t: object = None

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise MissingDerivativeError(name)
        return value

    @property
    def pn(self):
        if self.pw is None or self.pc is None:
            return None
        return self.pw + self.pc


def momentum_residual(fp: FieldPoint, groups: DimensionlessGroups, S_w,
                      dims: int, dSw_dx=None, dSw_dy=None):
    """Left-hand side of the dimensionless momentum balance, componentwise.

    The pressure-coupling gradient uses the chain rule through a spatially
    varying saturation when ``dSw_dx``/``dSw_dy`` are supplied; omitted, the
    saturation is treated as locally constant.
    """
    S_n = 1.0 - np.asarray(S_w, dtype=np.float64)
    b = groups.b
    body = groups.bulk_density_ratio(S_w) * groups.N_d

    def pressure_gradient(axis: str, dSw):
        grad = fp.require(f"pw_{axis}")
        if groups.two_phase:
            grad = grad + S_n * fp.require(f"pc_{axis}")
            if dSw is not None:
                grad = grad - dSw * fp.require("pc")
        return grad

    def thermal_gradient(axis: str):
        if groups.N_T == 0.0:
            return 0.0
        return groups.N_T * fp.require(f"T_{axis}")

    if dims == 1:
        r = fp.require("ev_x") + 2.0 * groups.nu_star * fp.require("ux_xx") \
            - b * pressure_gradient("x", dSw_dx) - thermal_gradient("x") \
            + body * groups.d[0]
        return [r]
    if dims != 2:
        raise ValueError(f"dims must be 1 or 2, got {dims}")
    nu_s = groups.nu_star
    r_x = fp.require("ev_x") \
        + 0.5 * nu_s * (fp.require("ux_xx") + fp.require("uy_xy")) \
        + 1.5 * nu_s * (fp.require("ux_xx") + fp.require("ux_yy")) \
        - b * pressure_gradient("x", dSw_dx) - thermal_gradient("x") \
        + body * groups.d[0]
    r_y = fp.require("ev_y") \
        + 0.5 * nu_s * (fp.require("ux_xy") + fp.require("uy_yy")) \
        + 1.5 * nu_s * (fp.require("uy_xx") + fp.require("uy_yy")) \
        - b * pressure_gradient("y", dSw_dy) - thermal_gradient("y") \
        + body * groups.d[1]
    return [r_x, r_y]


def mass_residual(phase: str, fp: FieldPoint, groups: DimensionlessGroups,
                  storage: StorageModel, S_w, rel_perm, f_star=None,
                  kr_grad=None):
    """Left-hand side of the dimensionless mass balance for one phase.

    ``rel_perm`` is the phase relative permeability; ``kr_grad`` optionally
    supplies its spatial gradient (per axis) to restore the conservative form
    of the flux divergence, which the compact loss expression freezes.
    The volumetric stress rate enters through ``fp.sigv_t`` (previous split
    iterate) whenever the matrix is deformable.
    """
    if phase not in ("w", "n"):
        raise ValueError(f"phase must be 'w' or 'n', got {phase!r}")
    S_w = np.asarray(S_w, dtype=np.float64)
    S_n = 1.0 - S_w
    b = groups.b
    ftf = groups.flow_time_factor
    b_w, b_n = b * S_w, b * S_n

    pw_t = fp.require("pw_t")
    if groups.two_phase:
        pn_t = pw_t + fp.require("pc_t")
    if phase == "w":
        S_alpha = S_w
        mu_ratio = groups.mu_over_mu_w
        q_factor = groups.Q_factor_w
        f_val = groups.f_star_w if f_star is None else f_star
        acc = (storage.N_ww + b_w * b_w * groups.inv_Kdr) * ftf * pw_t
        if groups.two_phase:
            acc = acc + (storage.N_wn + b_w * b_n * groups.inv_Kdr) * ftf * pn_t
        lap = fp.require("pw_xx")
        if fp.pw_yy is not None:
            lap = lap + fp.pw_yy
    else:
        S_alpha = S_n
        mu_ratio = groups.mu_over_mu_n
        q_factor = groups.Q_factor_n
        f_val = groups.f_star_n if f_star is None else f_star
        acc = (storage.N_nw + b_n * b_w * groups.inv_Kdr) * ftf * pw_t \
            + (storage.N_nn + b_n * b_n * groups.inv_Kdr) * ftf * pn_t
        lap = fp.require("pw_xx") + fp.require("pc_xx")
        if fp.pw_yy is not None:
            lap = lap + fp.pw_yy + fp.require("pc_yy")

    flux = rel_perm * lap
    if kr_grad is not None:
        axes = ("x", "y")[: len(kr_grad)]
        for axis, dk in zip(axes, kr_grad):
            if phase == "w":
                g = fp.require(f"pw_{axis}")
            else:
                g = fp.require(f"pw_{axis}") + fp.require(f"pc_{axis}")
            flux = flux + dk * g

    r = acc - mu_ratio * flux - f_val
    if groups.D_star != 0.0:
        r = r + S_alpha * groups.D_star * fp.require("sigv_t")
    if np.any(np.asarray(q_factor) != 0.0):
        r = r - q_factor * S_alpha * fp.require("T_t")
    return r


def darcy_velocity(phase: str, fp: FieldPoint, groups: DimensionlessGroups,
                   rel_perm):
    """Dimensionless Darcy velocity components of one phase."""
    if phase == "w":
        mu_ratio = groups.mu_over_mu_w
        rho_ratio = groups.rho_w_over_rho
        grads = [fp.require("pw_x")]
        if fp.pw_y is not None:
            grads.append(fp.pw_y)
    else:
        mu_ratio = groups.mu_over_mu_n
        rho_ratio = groups.rho_n_over_rho
        grads = [fp.require("pw_x") + fp.require("pc_x")]
        if fp.pw_y is not None:
            grads.append(fp.pw_y + fp.require("pc_y"))
    out = []
    for i, g in enumerate(grads):
        drive = g - rho_ratio * groups.N_d * groups.d[i]
        out.append(-mu_ratio * rel_perm * drive)
    return out


def energy_residual(fp: FieldPoint, groups: DimensionlessGroups, v_w,
                    v_n=None, c_star=None, lambda_ratio=1.0,
                    lambda_ratio_grad=None):
    """Left-hand side of the dimensionless energy balance.

    ``v_w``/``v_n`` are Darcy velocity component sequences; ``c_star`` and
    ``lambda_ratio`` are the (possibly per-point) capacity and conductivity
    ratios, with ``lambda_ratio_grad`` restoring the conservative conduction
    term when the ratio varies in space.
    """
    if c_star is None:
        if groups.C_star is None:
            raise MissingPropertyError("C_s (per-point heat capacity ratio)")
        c_star = groups.C_star
    T_t = fp.require("T_t")
    grads = [fp.require("T_x")]
    lap = fp.require("T_xx")
    if fp.T_y is not None:
        grads.append(fp.T_y)
        lap = lap + fp.require("T_yy")

    conv = 0.0
    for i, g in enumerate(grads):
        vel = 0.0
        if v_w is not None:
            if groups.rhoCw_over_rhoCbar is None:
                raise MissingPropertyError("C_w")
            vel = vel + groups.rhoCw_over_rhoCbar * v_w[i]
        if v_n is not None:
            if groups.rhoCn_over_rhoCbar is None:
                raise MissingPropertyError("C_n")
            vel = vel + groups.rhoCn_over_rhoCbar * v_n[i]
        conv = conv + vel * g

    cond = lambda_ratio * lap
    if lambda_ratio_grad is not None:
        for g, dl in zip(grads, lambda_ratio_grad):
            cond = cond + dl * g

    return c_star * T_t + groups.J_star * conv - groups.F_star * cond \
        - groups.G_theta_star


def strain_residual(fp: FieldPoint):
    """Volumetric-strain consistency: eps_v minus the displacement divergence."""
    div = fp.require("ux_x")
    if fp.uy_y is not None:
        div = div + fp.uy_y
    return fp.require("ev") - div


def volumetric_stress(fp: FieldPoint, groups: DimensionlessGroups, S_w,
                      ref: ReferenceState = ReferenceState()):
    """Mean total stress increment relative to the reference state."""
    S_w = np.asarray(S_w, dtype=np.float64)
    b = groups.b
    coupling = b * S_w * (fp.require("pw") - ref.pw0)
    if groups.two_phase:
        coupling = coupling + b * (1.0 - S_w) * (fp.pn - ref.pn0)
    thermal = 0.0
    if groups.N_T != 0.0:
        thermal = groups.N_T * (fp.require("T") - ref.T0)
    return ref.sigv0 + (fp.require("ev") - ref.ev0) - coupling - thermal


def normal_stress(fp: FieldPoint, groups: DimensionlessGroups, S_w,
                  axis: str = "x", ref: ReferenceState = ReferenceState()):
    """Total normal stress increment on a coordinate face (for stress BCs)."""
    S_w = np.asarray(S_w, dtype=np.float64)
    strain = fp.require(f"u{axis}_{axis}")
    b = groups.b
    coupling = b * S_w * (fp.require("pw") - ref.pw0)
    if groups.two_phase:
        coupling = coupling + b * (1.0 - S_w) * (fp.pn - ref.pn0)
    thermal = 0.0
    if groups.N_T != 0.0:
        thermal = groups.N_T * (fp.require("T") - ref.T0)
    return ref.sigv0 + (1.0 - groups.nu_star) * (fp.require("ev") - ref.ev0) \
        + 3.0 * groups.nu_star * strain - coupling - thermal
