"""Operational lower/upper bounds on the detection fidelity.

The squared Uhlmann fidelity between the fitted model state and the
measured state is bracketed without reconstructing either: the lower
bounds are the plain overlap Tr(rho_th rho_ex) and, when its radicand is
resolvable, the modified sub-fidelity built from the closed-form
theoretical traces; the upper bound is the super-fidelity.  The
theoretical purity and fourth-power trace of the lossy SPACS family have
closed forms in (|alpha|, eta) alone.

Uncertainties on the data-side functionals combine a mirror systematic
(half the difference between the estimate from theta in [0, pi) and from
the mirrored theta + pi data) with a multinomial bootstrap statistical
part, in quadrature.  How the reference experiment propagated its errors
is not documented, so the method is recorded in the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import DarkCountMixtureParams, SpacsModelParams, TomogramModel
from .overlaps import (
    EmpiricalCF,
    IntegrationConfig,
    _grids,
    _integral,
    _model_cf,
    _PhaseCF,
    _prepare,
    _resolve_cfg,
)

N_BOOTSTRAP = 200
UNCERTAINTY_METHOD = "mirror-systematic + 200-resample bootstrap, in quadrature"


def theoretical_traces(abs_alpha: float, eta: float) -> dict:
    """Closed-form Tr(rho_th^2) and Tr(rho_th^4) of the lossy SPACS state.

    Both depend only on |alpha| and eta and reduce to 1 in the pure-state
    limits eta = 0, 1.
    """
    if abs_alpha < 0:
        raise ValueError("abs_alpha must be >= 0")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    denom = (1.0 + abs_alpha**2) ** 2
    loss = eta * (1.0 - eta)
    purity_th = 1.0 - 2.0 * loss / denom
    four_th = 1.0 - 4.0 * loss / denom + 2.0 * loss**2 / denom**2
    return {"purity_th": purity_th, "four_th": four_th}


@dataclass
class Uncertain:
    """A value with a one-sigma uncertainty (None when not estimated)."""

    value: float
    uncertainty: float | None = None

    def to_json(self) -> dict:
        return {"value": self.value, "uncertainty": self.uncertainty}


@dataclass
class SubFidelityOutcome:
    """Modified sub-fidelity, or NotComputable with the radicand interval.

    computable is False whenever the radicand's one-sigma interval reaches
    below zero, in which case only the interval is reported; that is a
    legitimate outcome for noisy data, not an error.
    """

    computable: bool
    radicand_interval: tuple
    value: float | None = None
    uncertainty: float | None = None

    def to_json(self) -> dict:
        return {
            "status": "ok" if self.computable else "not_computable",
            "value": self.value,
            "uncertainty": self.uncertainty,
            "radicand_interval": list(self.radicand_interval),
        }


def super_fidelity(overlap, purity_th, purity_ex, uncertainties: dict | None = None):
    """Upper bound G = overlap + sqrt((1 - purity_th)(1 - purity_ex)).

    Finite-sample purities can exceed 1; they are clamped into [0, 1]
    before the square root and the clamp is flagged.  First-order
    uncertainty propagation when input uncertainties are given.
    """
    u = uncertainties or {}
    clamped = not (0.0 <= purity_th <= 1.0 and 0.0 <= purity_ex <= 1.0)
    p1 = min(max(purity_th, 0.0), 1.0)
    p2 = min(max(purity_ex, 0.0), 1.0)
    root = np.sqrt((1.0 - p1) * (1.0 - p2))
    value = overlap + root
    sigma = None
    if "overlap" in u and u["overlap"] is not None:
        var = float(u["overlap"]) ** 2
        if root > 0.0:
            d_p1 = -(1.0 - p2) / (2.0 * root)
            d_p2 = -(1.0 - p1) / (2.0 * root)
            var += (d_p1 * float(u.get("purity_th", 0.0) or 0.0)) ** 2
            var += (d_p2 * float(u.get("purity_ex", 0.0) or 0.0)) ** 2
        sigma = float(np.sqrt(var))
    return Uncertain(float(value), sigma), clamped


def sub_fidelity_modified(overlap, purity_th, four_th, purity_ex,
                          uncertainties: dict | None = None) -> SubFidelityOutcome:
    """Lower bound E' = overlap + sqrt(2[overlap^2 - four_th - |purity_ex - purity_th|]).

    The radicand's one-sigma interval is propagated from the overlap and
    data-purity uncertainties; if it reaches below zero the square root is
    not trustworthy and NotComputable is returned with the interval.
    """
    u = uncertainties or {}
    radicand = 2.0 * (overlap**2 - four_th - abs(purity_ex - purity_th))
    sig_o = float(u.get("overlap") or 0.0)
    sig_p = float(u.get("purity_ex") or 0.0)
    sig_r = np.sqrt((4.0 * overlap * sig_o) ** 2 + (2.0 * sig_p) ** 2)
    interval = (float(radicand - sig_r), float(radicand + sig_r))
    if interval[0] < 0.0:
        return SubFidelityOutcome(computable=False, radicand_interval=interval)
    value = overlap + np.sqrt(radicand)
    sigma = None
    if "overlap" in u and u["overlap"] is not None:
        d_o = 1.0 + (4.0 * overlap) / (2.0 * np.sqrt(radicand)) if radicand > 0 else 1.0
        d_p = -2.0 / (2.0 * np.sqrt(radicand)) if radicand > 0 else 0.0
        sigma = float(np.sqrt((d_o * sig_o) ** 2 + (d_p * sig_p) ** 2))
    return SubFidelityOutcome(
        computable=True, radicand_interval=interval,
        value=float(value), uncertainty=sigma,
    )


@dataclass
class FidelityBounds:
    """The assembled bound sandwich with its ingredients."""

    e_double_prime: Uncertain          # overlap lower bound
    e_prime: SubFidelityOutcome        # modified sub-fidelity lower bound
    g: Uncertain                       # super-fidelity upper bound
    purity_th: float
    four_th: float
    purity_ex: Uncertain
    purity_clamped: bool
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "e_double_prime": self.e_double_prime.to_json(),
            "e_prime": self.e_prime.to_json(),
            "g": self.g.to_json(),
            "purity_th": self.purity_th,
            "four_th": self.four_th,
            "purity_ex": self.purity_ex.to_json(),
            "purity_clamped": self.purity_clamped,
            "meta": self.meta,
        }


def _spacs_of(params) -> SpacsModelParams:
    if isinstance(params, DarkCountMixtureParams):
        return params.spacs
    if isinstance(params, SpacsModelParams):
        return params
    raise TypeError(f"expected model params, got {params!r}")


def _functionals_from_F(F_data, F_model, weights, cfg):
    overlap = _integral(F_data, F_model, weights, cfg)
    purity = _integral(F_data, F_data, weights, cfg)
    return overlap, purity


def _data_uncertainties(emp: EmpiricalCF, density, cfg, seed: int, n_boot: int):
    """(sigma_overlap, sigma_purity): mirror systematic + bootstrap, in quadrature."""
    # systematic: [0, pi) phases only vs mirrored (theta+pi, X -> -X) only
    sys_parts = {}
    for which in ("low", "high"):
        pos, wts, F = emp.half_circle_variant(which)
        F_th = _model_cf(density, pos, cfg)
        sys_parts[which] = _functionals_from_F(F, F_th, wts, cfg)
    sys_overlap = 0.5 * abs(sys_parts["low"][0] - sys_parts["high"][0])
    sys_purity = 0.5 * abs(sys_parts["low"][1] - sys_parts["high"][1])

    # statistical: multinomial bootstrap of the folded CFs
    F_th_fold = _model_cf(density, emp.positions, cfg)
    g = _grids(cfg)
    boots = emp.bootstrap_cfs(n_boot, seed)
    ov = np.einsum("r,brk,k->b", g.radial,
                   np.real(boots * np.conj(F_th_fold)[None, :, :]), emp.weights) / np.pi
    pu = np.einsum("r,brk,k->b", g.radial,
                   np.abs(boots) ** 2, emp.weights) / np.pi
    boot_overlap = float(np.std(ov, ddof=1))
    boot_purity = float(np.std(pu, ddof=1))

    return (
        float(np.hypot(sys_overlap, boot_overlap)),
        float(np.hypot(sys_purity, boot_purity)),
    )


def fidelity_report(
    data,
    params_opt,
    cfg: IntegrationConfig | None = None,
    seed: int = 0,
    n_boot: int = N_BOOTSTRAP,
) -> FidelityBounds:
    """Assemble E'', E' (or NotComputable) and G for a dataset and fit.

    data is a dataset (or prepared EmpiricalCF); params_opt the fitted
    model parameters.  Noise-free analytic sources get zero uncertainties.
    """
    cfg = _resolve_cfg(cfg, data)
    src = _prepare(data, cfg)
    if not isinstance(src, _PhaseCF):
        raise TypeError("fidelity_report needs a dataset or analytic source on the data side")
    spacs = _spacs_of(params_opt)
    family = "dark_count" if isinstance(params_opt, DarkCountMixtureParams) else "spacs"
    model = TomogramModel(family, params_opt)

    F_th = _model_cf(model.density, src.positions, cfg)
    overlap, purity_ex = _functionals_from_F(src.F_fold, F_th, src.weights, cfg)

    traces = theoretical_traces(spacs.abs_alpha, spacs.eta)

    if isinstance(src, EmpiricalCF):
        sig_overlap, sig_purity = _data_uncertainties(src, model.density, cfg, seed, n_boot)
    else:
        sig_overlap, sig_purity = 0.0, 0.0

    uncertainties = {
        "overlap": sig_overlap,
        "purity_ex": sig_purity,
        "purity_th": 0.0,
    }
    g_val, clamped = super_fidelity(overlap, traces["purity_th"], purity_ex, uncertainties)
    e_prime = sub_fidelity_modified(
        overlap, traces["purity_th"], traces["four_th"], purity_ex, uncertainties
    )
    return FidelityBounds(
        e_double_prime=Uncertain(float(overlap), sig_overlap),
        e_prime=e_prime,
        g=g_val,
        purity_th=traces["purity_th"],
        four_th=traces["four_th"],
        purity_ex=Uncertain(float(purity_ex), sig_purity),
        purity_clamped=clamped,
        meta={
            "uncertainty_method": UNCERTAINTY_METHOD,
            "bootstrap_resamples": n_boot,
            "bootstrap_seed": seed,
            "params": {k: v for k, v in model.to_json().items() if k != "model"},
            "family": family,
        },
    )
