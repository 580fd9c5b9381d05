"""Exact truncated-Fock-space reference calculations.

Everything downstream (closed-form tomogram models, tomographic overlap
functionals, fidelity bounds) is validated against the density-matrix
arithmetic in this module: SPACS construction, the photon-loss channel in
operator-sum form, quadrature distributions from Hermite functions, and
trace functionals.

Conventions: [Q, P] = i, so the vacuum quadrature distribution is
exp(-X^2)/sqrt(pi) (variance 1/2).  Quadrature eigenstates carry the phase
<X_theta|n> = exp(-i n theta) psi_n(X), which makes a coherent-state
tomogram peak at X = sqrt(2)|alpha| cos(theta - phi).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
TAIL_TOL = 1e-12

DEFAULT_DIM = 31  # Fock levels 0..30, enough for |alpha| <= 2


@dataclass(frozen=True)
class DensityMatrix:
    """Truncated Fock-basis density operator.

    entries[m, n] is the coefficient on |m><n|, m, n photon numbers.
    Validated on construction: Hermitian, unit trace, positive
    semidefinite (within numerical tolerances).
    """

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {entries.shape}")
        if np.max(np.abs(entries - entries.conj().T)) > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian within 1e-12")
        tr = np.trace(entries)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace is {tr}, expected 1 within 1e-10")
        if np.linalg.eigvalsh(entries).min() < -PSD_TOL:
            raise ValueError("density matrix has an eigenvalue below -1e-10")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "dim", entries.shape[0])

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)

    def to_json(self) -> dict:
        """Serialize as an array-of-arrays of (real, imag) pairs."""
        e = self.entries
        return {
            "dim": self.dim,
            "entries": [[[e[m, n].real, e[m, n].imag] for n in range(self.dim)]
                        for m in range(self.dim)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DensityMatrix":
        raw = np.asarray(obj["entries"], dtype=float)
        return cls(raw[..., 0] + 1j * raw[..., 1])


def hermite_functions(x, n_max: int) -> np.ndarray:
    """Normalized harmonic-oscillator eigenfunctions psi_n(x), n = 0..n_max.

    Uses the stable three-term recurrence on the normalized functions
    themselves (never the raw polynomials, which overflow near n ~ 30).
    Returns an array of shape (len(x), n_max + 1).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi = np.zeros((x.size, n_max + 1))
    psi[:, 0] = np.pi ** -0.25 * np.exp(-0.5 * x**2)
    if n_max >= 1:
        psi[:, 1] = np.sqrt(2.0) * x * psi[:, 0]
    for n in range(2, n_max + 1):
        psi[:, n] = np.sqrt(2.0 / n) * x * psi[:, n - 1] - np.sqrt((n - 1) / n) * psi[:, n - 2]
    return psi


def _spacs_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Fock amplitudes of a^dag|alpha>/sqrt(1+|alpha|^2) up to level n_max."""
    c = np.zeros(n_max + 1, dtype=complex)
    if alpha == 0:
        c[1] = 1.0
        return c
    # c_{n+1} = e^{-|a|^2/2} alpha^n sqrt(n+1)/sqrt(n!) / sqrt(1+|a|^2)
    n = np.arange(n_max, dtype=float)
    log_amp = (-0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha))
               + 0.5 * np.log(n + 1) - 0.5 * gammaln(n + 1))
    phase = np.exp(1j * n * np.angle(alpha))
    c[1:] = np.exp(log_amp) * phase / np.sqrt(1 + abs(alpha) ** 2)
    return c


def spacs_state(alpha: complex, n_max: int | None = None) -> DensityMatrix:
    """Pure-state density matrix of the single-photon-added coherent state.

    alpha may be complex; the truncation n_max defaults to 30 and escalates
    automatically until the truncated tail mass drops below 1e-12.  An
    explicit n_max that leaves more tail mass than that is rejected.
    """
    if n_max is None:
        n_max = max(DEFAULT_DIM - 1, int(np.ceil(abs(alpha) ** 2 + 10 * np.sqrt(abs(alpha) ** 2 + 1))))
        while True:
            c = _spacs_amplitudes(alpha, n_max)
            if 1.0 - np.sum(np.abs(c) ** 2) < TAIL_TOL:
                break
            n_max += 10
    else:
        c = _spacs_amplitudes(alpha, n_max)
        tail = 1.0 - np.sum(np.abs(c) ** 2)
        if tail > TAIL_TOL:
            raise ValueError(
                f"truncation n_max={n_max} leaves tail mass {tail:.3e} > {TAIL_TOL} "
                f"for alpha={alpha}"
            )
    c = c / np.linalg.norm(c)  # remove the residual truncation deficit
    return DensityMatrix(np.outer(c, c.conj()))


def apply_loss(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Photon-loss channel with overall efficiency eta, full Kraus rank.

    The Kraus operators A_k map |m+k> -> |m| with weight
    sqrt(binom(m+k, k) eta^m (1-eta)^k); all k = 0..dim-1 are retained, so
    the map is exactly trace preserving on the truncated space.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    n = rho.dim
    src = rho.entries
    out = np.zeros((n, n), dtype=complex)
    for k in range(n):
        m = np.arange(n - k, dtype=float)
        log_binom = gammaln(m + k + 1) - gammaln(m + 1) - gammaln(k + 1)
        b = np.sqrt(np.exp(log_binom) * eta**m * (1.0 - eta) ** k)
        out[: n - k, : n - k] += np.outer(b, b) * src[k:, k:]
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out)


def tomogram_of(rho: DensityMatrix, x, theta: float):
    """Quadrature distribution w(X, theta) = <X_theta| rho |X_theta>.

    x may be a scalar or an array; values are real and nonnegative up to
    eigensolver noise.
    """
    scalar = np.isscalar(x)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    psi = hermite_functions(xa, rho.dim - 1)
    u = psi * np.exp(-1j * np.arange(rho.dim) * theta)[None, :]
    w = np.einsum("xm,xm->x", u @ rho.entries, u.conj()).real
    return float(w[0]) if scalar else w


@dataclass(frozen=True)
class TraceFunctionals:
    overlap: float
    purity1: float
    purity2: float
    four_product: float


def trace_functionals(rho1: DensityMatrix, rho2: DensityMatrix) -> TraceFunctionals:
    """Tr(r1 r2), both purities leverage, and Tr(r1 r2 r1 r2)."""
    if rho1.dim != rho2.dim:
        raise ValueError(f"dimension mismatch: {rho1.dim} vs {rho2.dim}")
    prod = rho1.entries @ rho2.entries
    vals = {
        "overlap": np.trace(prod),
        "purity1": np.trace(rho1.entries @ rho1.entries),
        "purity2": np.trace(rho2.entries @ rho2.entries),
        "four_product": np.trace(prod @ prod),
    }
    for name, v in vals.items():
        if abs(v.imag) > 1e-10:
            raise ValueError(f"{name} has imaginary residue {v.imag:.3e}")
    return TraceFunctionals(**{k: float(v.real) for k, v in vals.items()})


def sub_fidelity_exact(rho1: DensityMatrix, rho2: DensityMatrix) -> float:
    """Sub-fidelity E = Tr(r1 r2) + sqrt(2[(Tr r1 r2)^2 - Tr(r1 r2 r1 r2)]).

    The radicand is nonnegative analytically; tiny negative rounding
    residue is clamped.
    """
    tf = trace_functionals(rho1, rho2)
    radicand = 2.0 * (tf.overlap**2 - tf.four_product)
    if radicand < -1e-12:
        raise ValueError(f"sub-fidelity radicand {radicand:.3e} below rounding tolerance")
    return tf.overlap + np.sqrt(max(radicand, 0.0))
