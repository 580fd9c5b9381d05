"""Closed-form quadrature-distribution families.

These are the theoretical densities w_th(X, theta) fitted against measured
histograms: the lossy SPACS family, the plain (lossy) coherent Gaussian,
and their dark-count convex mixture.  A numeric loss convolution is
provided as an independent route to the same lossy densities.

All densities share the vacuum-variance-1/2 convention of :mod:`fock` and
depend on theta only through theta - phi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SpacsModelParams:
    """Parameters of the lossy-SPACS quadrature family.

    abs_alpha >= 0 is the coherent amplitude |alpha|, phi the state phase
    (stored reduced mod 2*pi), eta in (0, 1] the overall detection
    efficiency.
    """

    abs_alpha: float
    phi: float
    eta: float

    def __post_init__(self):
        if self.abs_alpha < 0:
            raise ValueError(f"abs_alpha must be >= 0, got {self.abs_alpha}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "abs_alpha", float(self.abs_alpha))
        object.__setattr__(self, "eta", float(self.eta))


@dataclass(frozen=True)
class DarkCountMixtureParams:
    """SPACS family diluted by a coherent-state fraction p of dark counts."""

    spacs: SpacsModelParams
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        object.__setattr__(self, "p", float(self.p))


def spacs_tomogram(params: SpacsModelParams, x, theta):
    """Quadrature density of a SPACS detected with efficiency eta.

    The polynomial prefactor is evaluated in expanded form so the
    expression stays regular as eta -> 0 (the printed closed form divides
    by sqrt(2 eta)).
    """
    a, eta = params.abs_alpha, params.eta
    x = np.asarray(x, dtype=float)
    asq = a * a
    c = np.cos(theta - params.phi)
    s = np.sin(theta - params.phi)
    bracket = (
        (1.0 - eta) * (1.0 + 4.0 * eta * asq * s * s)
        + 2.0 * eta * x * x
        - 2.0 * np.sqrt(2.0 * eta) * (2.0 * eta - 1.0) * a * c * x
        + (2.0 * eta - 1.0) ** 2 * asq
    )
    gauss = np.exp(-((x - np.sqrt(2.0 * eta) * a * c) ** 2))
    return bracket * gauss / (np.sqrt(np.pi) * (1.0 + asq))


def coherent_tomogram(abs_alpha: float, phi: float, eta: float, x, theta):
    """Gaussian quadrature density of a lossy coherent state.

    Unit-variance-1/2 Gaussian centred at sqrt(2 eta)|alpha| cos(theta-phi);
    loss only shrinks the displacement.
    """
    x = np.asarray(x, dtype=float)
    mean = np.sqrt(2.0 * eta) * abs_alpha * np.cos(theta - phi)
    return np.exp(-((x - mean) ** 2)) / np.sqrt(np.pi)


def dark_count_tomogram(params: DarkCountMixtureParams, x, theta):
    """Convex mixture (1-p) * SPACS + p * coherent at shared (|alpha|, phi, eta)."""
    sp = params.spacs
    return (1.0 - params.p) * spacs_tomogram(sp, x, theta) + params.p * coherent_tomogram(
        sp.abs_alpha, sp.phi, sp.eta, x, theta
    )


def lossy_convolution_numeric(ideal_tomogram, eta: float, x, theta: float):
    """Efficiency-eta smoothing of an ideal (eta = 1) tomogram, by quadrature.

    Kernel: (1 / sqrt(pi (1-eta))) exp[-(X - sqrt(eta) Y)^2 / (1-eta)],
    i.e. the distribution of sqrt(eta) X_signal + sqrt(1-eta) X_vacuum,
    which reproduces the Kraus loss channel.  Adaptive quadrature to
    absolute tolerance 1e-8.  eta = 1 returns the ideal density unchanged;
    eta = 0 returns the vacuum Gaussian.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    scalar = np.isscalar(x)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if eta == 1.0:
        out = np.asarray(ideal_tomogram(xa, theta), dtype=float)
        return float(out[0]) if scalar else out
    if eta == 0.0:
        out = np.exp(-(xa**2)) / np.sqrt(np.pi)
        return float(out[0]) if scalar else out

    norm = 1.0 / np.sqrt(np.pi * (1.0 - eta))
    sq_eta = np.sqrt(eta)
    out = np.empty(xa.size)
    for i, xi in enumerate(xa):
        def integrand(y, xi=xi):
            return float(ideal_tomogram(y, theta)) * np.exp(-((xi - sq_eta * y) ** 2) / (1.0 - eta))
        val, _ = quad(integrand, -np.inf, np.inf, epsabs=1e-9, limit=200)
        out[i] = norm * val
    return float(out[0]) if scalar else out


class TomogramModel:
    """A named parametric density family usable as a fit target.

    family is "spacs" or "dark_count"; density(x, theta) evaluates the
    closed form.  Serializes to the flat JSON schema
    {"model": ..., "abs_alpha": ..., "phi": ..., "eta": ..., "p": ...}.
    """

    def __init__(self, family: str, params):
        if family == "spacs":
            if not isinstance(params, SpacsModelParams):
                raise TypeError("spacs family requires SpacsModelParams")
        elif family == "dark_count":
            if not isinstance(params, DarkCountMixtureParams):
                raise TypeError("dark_count family requires DarkCountMixtureParams")
        else:
            raise ValueError(f"unknown model family {family!r}")
        self.family = family
        self.params = params

    def density(self, x, theta):
        if self.family == "spacs":
            return spacs_tomogram(self.params, x, theta)
        return dark_count_tomogram(self.params, x, theta)

    def __call__(self, x, theta):
        return self.density(x, theta)

    def to_json(self) -> dict:
        if self.family == "spacs":
            p = self.params
            return {"model": "spacs", "abs_alpha": p.abs_alpha, "phi": p.phi, "eta": p.eta}
        sp = self.params.spacs
        return {
            "model": "dark_count",
            "abs_alpha": sp.abs_alpha,
            "phi": sp.phi,
            "eta": sp.eta,
            "p": self.params.p,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TomogramModel":
        family = obj["model"]
        spacs = SpacsModelParams(obj["abs_alpha"], obj["phi"], obj["eta"])
        if family == "spacs":
            return cls("spacs", spacs)
        if family == "dark_count":
            return cls("dark_count", DarkCountMixtureParams(spacs, obj["p"]))
        raise ValueError(f"unknown model family {family!r}")

    def __repr__(self):
        return f"TomogramModel({self.family}, {self.params})"


def spacs_model(abs_alpha: float, phi: float, eta: float) -> TomogramModel:
    return TomogramModel("spacs", SpacsModelParams(abs_alpha, phi, eta))


def dark_count_model(abs_alpha: float, phi: float, eta: float, p: float) -> TomogramModel:
    return TomogramModel("dark_count", DarkCountMixtureParams(SpacsModelParams(abs_alpha, phi, eta), p))
