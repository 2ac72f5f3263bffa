"""Run configuration: flat ``key = value`` files with dotted sections.

Blank lines and ``#`` comments are ignored. Every key must appear in
:data:`KEYS`; unknown keys and malformed values raise :class:`ConfigError`
naming the key and line. Keys marked required have no default.

Flows are given in mL/min and the mass-transfer coefficient in L/min, as
they appear on lab equipment; they are converted to SI-like L/s on load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import CONVENTIONS, RbfBasis, uniform_basis
from .battery import FULL_CHARGE, BatteryParams, ml_per_min_to_l_per_s, per_min_to_per_s
from .bounds import BoundAssumptions, default_assumptions
from .errors import ConfigError, DrfbError
from .synthesis import SynthesisConfig

REQUIRED = object()


def _float(text):
    return float(text)


def _int(text):
    return int(text)


def _opt_float(text):
    return None if text.strip().lower() == "none" else float(text)


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _word(text):
    return text.strip()


# key -> (parser, default, help)
KEYS = {
    "battery.v_res_ml": (_float, 17.6, "reservoir volume [mL]"),
    "battery.v_cell_ml": (_float, 0.6985, "half-cell volume [mL]"),
    "battery.c0": (_float, 0.1, "total vanadium concentration [mol/L]"),
    "battery.epsilon": (_float, 0.87, "electrode porosity [-]"),
    "battery.e0_cell": (_float, 2.2, "open-circuit voltage at half charge [V]"),
    "battery.temperature": (_float, 275.0, "temperature [K]"),
    "basis.m": (_int, REQUIRED, "number of radial basis functions"),
    "basis.center_lo": (_float, 0.05, "first center"),
    "basis.center_hi": (_float, 0.95, "last center"),
    "basis.variance": (_float, 0.0081, "Gaussian variance"),
    "basis.convention": (_word, "sigma2", "exponent form: sigma2 -> exp(-d^2/2v), denominator -> exp(-d^2/v)"),
    "synthesis.q_min_ml_min": (_float, 8.1, "lowest flow vertex [mL/min]"),
    "synthesis.q_max_ml_min": (_float, 9.9, "highest flow vertex [mL/min]"),
    "synthesis.beta": (_float, REQUIRED, "decay weight"),
    "synthesis.kappa_z": (_float, 1.0, "weight on the gain-norm bound"),
    "synthesis.kappa_f": (_float, 1e-5, "weight on the injection-scalar bound"),
    "synthesis.omega_floor": (_floats, (1e-6, 1e-6), "lower bound on diag(W)"),
    "synthesis.tol": (_float, 1e-8, "solver duality-gap tolerance"),
    "synthesis.max_bandwidth": (_opt_float, 1.0, "closed-loop spectral radius cap [1/s], or none"),
    "observer.lambda_inv": (_opt_float, None, "adaptation gain, times identity"),
    "observer.lambda_inv_file": (_word, "", "text file holding a full m x m adaptation gain"),
    "observer.sigma": (_float, REQUIRED, "leakage weight"),
    "observer.dt": (_float, 1.0, "integration step [s]"),
    "observer.x_hat0": (_floats, (0.85, 0.8), "initial state estimate"),
    "observer.theta_hat0": (_floats, (0.0,), "initial weights (one value broadcasts)"),
    "simulate.t_end": (_float, 86400.0, "horizon [s]"),
    "simulate.dt": (_float, 1.0, "step [s]"),
    "simulate.x0": (_floats, (FULL_CHARGE, FULL_CHARGE), "initial state of charge"),
    "simulate.flow_ml_min": (_float, 9.0, "pump flow [mL/min]"),
    "simulate.k_mt_l_min": (_float, 5.6142e-8, "mass-transfer coefficient [L/min]"),
    "simulate.noise_w": (_float, 0.0, "voltage noise scale [V]; samples lie in +-3 noise_w"),
    "simulate.seed": (_int, 0, "noise seed"),
    "bounds.gamma_theta": (_opt_float, None, "weight-norm bound, default from a fit"),
    "bounds.eps_bar": (_opt_float, None, "approximation-error bound, default from a fit"),
    "bounds.w_bar": (_float, 1e-3, "output-error bound"),
    "bounds.gamma_s_tilde": (_float, 1.0, "state-to-s sensitivity"),
    "bounds.rho": (_float, 0.5, "split factor"),
    "bounds.varrho": (_float, 0.5, "split factor"),
}


def parse_text(text, source="<string>"):
    """Parse config text into a ``{key: value}`` dict with defaults filled in."""
    values, seen = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: key {key!r} already set on line {seen[key]}")
        try:
            values[key] = KEYS[key][0](val)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value {val!r} for {key!r}") from None
        seen[key] = lineno
    for key, (_, default, _) in KEYS.items():
        if key not in values:
            if default is REQUIRED:
                raise ConfigError(f"{source}: missing required key {key!r}")
            values[key] = default
    return values


@dataclass
class RunConfig:
    params: BatteryParams
    basis: RbfBasis
    synthesis: SynthesisConfig
    lambda_inv: np.ndarray
    sigma: float
    dt: float
    x_hat0: np.ndarray
    theta_hat0: np.ndarray
    sim: dict = field(default_factory=dict)
    bound_overrides: dict = field(default_factory=dict)
    source: str = "<string>"

    @property
    def m(self):
        return self.basis.m

    def assumptions(self, k_mt=None) -> BoundAssumptions:
        return default_assumptions(self.params, self.basis,
                                   k_mt=self.sim["k_mt"] if k_mt is None else k_mt,
                                   **self.bound_overrides)


def _build(v, source, base_dir):
    try:
        params = BatteryParams(v_res=v["battery.v_res_ml"] / 1000.0, v_cell=v["battery.v_cell_ml"] / 1000.0,
                               c0=v["battery.c0"], epsilon=v["battery.epsilon"],
                               e0_cell=v["battery.e0_cell"], temperature=v["battery.temperature"])
        if v["basis.convention"] not in CONVENTIONS:
            raise ConfigError(f"basis.convention must be one of {CONVENTIONS}")
        basis = uniform_basis(v["basis.m"], v["basis.center_lo"], v["basis.center_hi"],
                              v["basis.variance"], v["basis.convention"])
        syn = SynthesisConfig(q_min=ml_per_min_to_l_per_s(v["synthesis.q_min_ml_min"]),
                              q_max=ml_per_min_to_l_per_s(v["synthesis.q_max_ml_min"]),
                              beta=v["synthesis.beta"], kappa_z=v["synthesis.kappa_z"],
                              kappa_f=v["synthesis.kappa_f"], omega_floor=v["synthesis.omega_floor"],
                              tol=v["synthesis.tol"], max_bandwidth=v["synthesis.max_bandwidth"])
    except ConfigError:
        raise
    except DrfbError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    m = basis.m

    scalar, path = v["observer.lambda_inv"], v["observer.lambda_inv_file"]
    if (scalar is None) == (not path):
        raise ConfigError(f"{source}: set exactly one of 'observer.lambda_inv' and 'observer.lambda_inv_file'")
    if path:
        full = Path(path) if Path(path).is_absolute() else Path(base_dir) / path
        try:
            lam = np.atleast_2d(np.loadtxt(full, delimiter=None, ndmin=2))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{source}: cannot read 'observer.lambda_inv_file' {full}: {exc}") from exc
        if lam.shape != (m, m):
            raise ConfigError(f"{source}: 'observer.lambda_inv_file' holds {lam.shape}, expected ({m}, {m})")
    else:
        lam = scalar * np.eye(m)

    theta0 = np.asarray(v["observer.theta_hat0"], dtype=float)
    if theta0.size == 1:
        theta0 = np.full(m, theta0[0])
    if theta0.shape != (m,):
        raise ConfigError(f"{source}: 'observer.theta_hat0' has {theta0.size} entries, basis.m = {m}")
    x_hat0 = np.asarray(v["observer.x_hat0"], dtype=float)
    if x_hat0.shape != (2,):
        raise ConfigError(f"{source}: 'observer.x_hat0' needs two entries")
    x0 = np.asarray(v["simulate.x0"], dtype=float)
    if x0.shape != (2,):
        raise ConfigError(f"{source}: 'simulate.x0' needs two entries")
    for key in ("observer.dt", "simulate.dt", "simulate.t_end", "simulate.flow_ml_min"):
        if not (math.isfinite(v[key]) and v[key] > 0):
            raise ConfigError(f"{source}: {key!r} must be positive")
    if v["observer.sigma"] < 0 or v["simulate.noise_w"] < 0 or v["simulate.k_mt_l_min"] < 0:
        raise ConfigError(f"{source}: sigma, noise_w and k_mt must be >= 0")

    sim = dict(t_end=v["simulate.t_end"], dt=v["simulate.dt"], x0=x0,
               flow=ml_per_min_to_l_per_s(v["simulate.flow_ml_min"]),
               k_mt=per_min_to_per_s(v["simulate.k_mt_l_min"]),
               noise_w=v["simulate.noise_w"], seed=v["simulate.seed"])
    overrides = {k.split(".", 1)[1]: v[k] for k in
                 ("bounds.w_bar", "bounds.gamma_s_tilde", "bounds.rho", "bounds.varrho")}
    for k in ("bounds.gamma_theta", "bounds.eps_bar"):
        if v[k] is not None:
            overrides[k.split(".", 1)[1]] = v[k]
    try:
        BoundAssumptions(**{"gamma_theta": 0.0, **overrides})
    except DrfbError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return RunConfig(params=params, basis=basis, synthesis=syn, lambda_inv=lam,
                     sigma=v["observer.sigma"], dt=v["observer.dt"], x_hat0=x_hat0,
                     theta_hat0=theta0, sim=sim, bound_overrides=overrides, source=source)


def loads(text, source="<string>", base_dir=".") -> RunConfig:
    return _build(parse_text(text, source), source, base_dir)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, str(path), path.parent)


DEFAULT_TEXT = """\
# Twin-experiment settings for a small vanadium flow cell at open circuit.
basis.m = 7
synthesis.beta = 1e-4
observer.lambda_inv = 4.798e-7
observer.sigma = 0.1
"""


def describe_keys():
    """Human-readable key list, one ``key = default  # help`` line each."""
    out = []
    for key, (_, default, text) in KEYS.items():
        shown = "<required>" if default is REQUIRED else default
        if isinstance(shown, tuple):
            shown = ", ".join(repr(x) for x in shown)
        out.append(f"{key} = {shown}  # {text}")
    return "\n".join(out)
