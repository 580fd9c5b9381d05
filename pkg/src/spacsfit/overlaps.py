"""Tomographic trace functionals via characteristic functions.

State overlap Tr(rho1 rho2), the squared Hilbert-Schmidt distance between a
measured and a model quadrature family, its symmetry-violation error
estimate, and data purity -- all computed directly from quadrature
distributions, never from reconstructed density matrices.

The overlap integral's oscillatory kernel r cos[(X+Y) r] is not evaluated
as written.  Integrating over X and Y first replaces each tomogram by its
characteristic function F(r, theta) = int w(X, theta) exp(irX) dX, giving

    Tr(rho1 rho2) = (1/pi) int_0^pi dtheta int_0^rmax dr r Re[F1 conj(F2)],

an exact reordering for real integrable densities.  Model characteristic
functions decay like exp(-r^2/4), so the radial cutoff converges; empirical
ones flatten into a shot-noise floor at large r, which the cutoff
regularizes (the induced bias is reported as a diagnostic, not silently
removed).  Both integrals use the trapezoid rule; the theta rule runs over
the dataset's phase grid folded modulo pi, where a sample X measured at
theta >= pi enters as -X at theta - pi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import QuadratureDataset, PAIR_TOL

FOLD_MERGE_TOL = 1e-9          # circular tolerance for identical folded phases
COVERAGE_GAP = np.pi / 6.0     # warn when folded phases leave a larger hole
_CF_CHUNK = 128                # radial chunk for per-sample transforms

_GRID_CACHE: dict = {}


@dataclass(frozen=True)
class IntegrationConfig:
    """Quadrature grids for the (r, X, theta) integrals.

    r_max cuts off the radial integral where the vacuum characteristic
    power exp(-r_max^2/2) is below 1e-12; x bounds/step define the grid on
    which model densities are transformed; n_theta_model is the phase grid
    used when both sources are closed-form models (datasets bring their
    own phases).
    """

    r_max: float = 8.0
    r_step: float = 0.01
    x_min: float = -8.0
    x_max: float = 8.0
    x_step: float = 0.01
    n_theta_model: int = 40

    def __post_init__(self):
        if self.r_max <= 0 or self.r_step <= 0 or self.x_step <= 0:
            raise ValueError("r_max, r_step and x_step must be positive")
        if self.x_min >= self.x_max:
            raise ValueError("x_min must be below x_max")
        if np.exp(-self.r_max**2 / 2.0) > 1e-12:
            raise ValueError(
                f"r_max={self.r_max} leaves vacuum characteristic power "
                f"exp(-r_max^2/2) above 1e-12"
            )
        if self.n_theta_model < 4:
            raise ValueError("n_theta_model must be at least 4")

    def to_json(self) -> dict:
        return {
            "r_max": self.r_max, "r_step": self.r_step,
            "x_min": self.x_min, "x_max": self.x_max, "x_step": self.x_step,
            "n_theta_model": self.n_theta_model,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IntegrationConfig":
        return cls(**obj)


class _Grids:
    """Cached radial/x grids and the weighted Fourier transform matrices."""

    def __init__(self, cfg: IntegrationConfig):
        self.r = np.arange(0.0, cfg.r_max + cfg.r_step / 2, cfg.r_step)
        self.wr = np.full(self.r.size, cfg.r_step)
        self.wr[0] *= 0.5
        self.wr[-1] *= 0.5
        self.x = np.arange(cfg.x_min, cfg.x_max + cfg.x_step / 2, cfg.x_step)
        self.wx = np.full(self.x.size, cfg.x_step)
        self.wx[0] *= 0.5
        self.wx[-1] *= 0.5
        rx = np.outer(self.r, self.x)
        self.cosw = np.cos(rx) * self.wx[None, :]
        self.sinw = np.sin(rx) * self.wx[None, :]
        self.radial = self.wr * self.r  # weights for int_0^rmax dr r (...)


def _grids(cfg: IntegrationConfig) -> _Grids:
    key = (cfg.r_max, cfg.r_step, cfg.x_min, cfg.x_max, cfg.x_step)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = _Grids(cfg)
    return _GRID_CACHE[key]


def _periodic_weights(positions: np.ndarray, period: float = np.pi) -> np.ndarray:
    """Trapezoid weights on a sorted grid treated as periodic on [0, period)."""
    n = positions.size
    if n == 1:
        return np.array([period])
    gaps = np.empty(n)
    gaps[:-1] = np.diff(positions)
    gaps[-1] = positions[0] + period - positions[-1]
    weights = 0.5 * (gaps + np.roll(gaps, 1))
    return weights


def _max_circular_gap(positions: np.ndarray, period: float = np.pi) -> float:
    if positions.size == 1:
        return period
    gaps = np.diff(positions)
    return float(max(gaps.max(), positions[0] + period - positions[-1]))


def _density_of(source):
    if hasattr(source, "density"):
        return source.density
    if callable(source):
        return source
    raise TypeError(f"not a tomogram source: {source!r}")


def _model_cf(density, positions, cfg: IntegrationConfig) -> np.ndarray:
    """Characteristic functions of a closed-form density, shape (n_r, n_pos)."""
    g = _grids(cfg)
    w = np.stack([np.asarray(density(g.x, th), dtype=float) for th in np.atleast_1d(positions)], axis=1)
    return (g.cosw @ w) + 1j * (g.sinw @ w)


def _samples_cf(r: np.ndarray, xs: np.ndarray) -> np.ndarray:
    # r is uniform from 0, so exp(i r_k x) follows by repeated multiplication
    # with exp(i dr x); the accumulated phase error is ~ n_r * eps, harmless.
    out = np.empty(r.size, dtype=complex)
    step = np.exp(1j * (r[1] - r[0]) * xs) if r.size > 1 else None
    cur = np.ones(xs.size, dtype=complex)
    for k in range(r.size):
        out[k] = cur.mean()
        if step is not None and k + 1 < r.size:
            cur *= step
    return out


def _samples_cf_matrix(r: np.ndarray, xs: np.ndarray, row_chunk: int = _CF_CHUNK):
    """Yield (row range, exp(i r X) block) for the bootstrap matrix products."""
    step = np.exp(1j * (r[1] - r[0]) * xs) if r.size > 1 else None
    cur = np.ones(xs.size, dtype=complex)
    for lo in range(0, r.size, row_chunk):
        hi = min(lo + row_chunk, r.size)
        block = np.empty((hi - lo, xs.size), dtype=complex)
        for k in range(lo, hi):
            block[k - lo] = cur
            if step is not None and k + 1 < r.size:
                cur *= step
        yield lo, hi, block


def _fold_phases(phases: np.ndarray):
    """Group phases modulo pi.  Returns (positions, members) where members[k]
    lists (phase_index, sign) and sign -1 marks a theta >= pi phase whose
    samples enter negated."""
    fold = np.where(phases < np.pi, phases, phases - np.pi)
    signs = np.where(phases < np.pi, 1, -1)
    order = np.argsort(fold, kind="stable")
    positions: list = []
    members: list = []
    for idx in order:
        if positions and fold[idx] - positions[-1] <= FOLD_MERGE_TOL:
            members[-1].append((int(idx), int(signs[idx])))
        else:
            positions.append(float(fold[idx]))
            members.append([(int(idx), int(signs[idx]))])
    if len(positions) > 1 and positions[0] + np.pi - positions[-1] <= FOLD_MERGE_TOL:
        members[0].extend(members.pop())
        positions.pop()
    return np.array(positions), members


class _PhaseCF:
    """Characteristic functions of a phase-tagged source on the radial grid.

    Holds per-phase CFs (for the symmetry-violation functional) plus the
    folded, pooled CFs and quadrature weights used by overlap integrals.
    """

    def __init__(self, phases: np.ndarray, F_phase: np.ndarray, counts: np.ndarray,
                 cfg: IntegrationConfig, pair_tol: float = PAIR_TOL):
        self.cfg = cfg
        self.phases = phases
        self.F_phase = F_phase
        self.counts = counts
        self.positions, self.members = _fold_phases(phases)
        self.weights = _periodic_weights(self.positions)
        self.max_gap = _max_circular_gap(self.positions)
        self.F_fold = np.empty((F_phase.shape[0], self.positions.size), dtype=complex)
        self.n_fold = np.zeros(self.positions.size)
        for k, group in enumerate(self.members):
            acc = 0.0
            n = 0.0
            for j, sign in group:
                fj = F_phase[:, j] if sign > 0 else np.conj(F_phase[:, j])
                acc = acc + counts[j] * fj
                n += counts[j]
            self.F_fold[:, k] = acc / n
            self.n_fold[k] = n
        pairs = []
        used = set()
        for j, th in enumerate(phases):
            if th >= np.pi:
                continue
            diff = np.abs(phases - (th + np.pi))
            k = int(np.argmin(diff))
            if diff[k] <= pair_tol:
                pairs.append((j, k))
                used.update((j, k))
        self.pairs = pairs
        self.unpaired = [j for j in range(phases.size) if j not in used]

    def half_circle_variant(self, which: str):
        """Folded CFs rebuilt from one half of the phase circle.

        which = "low" keeps only theta in [0, pi); "high" keeps only the
        mirrored (theta + pi, X -> -X) data.  Used for the systematic part
        of functional uncertainties.
        """
        want = 1 if which == "low" else -1
        positions, columns, weights_src = [], [], []
        for k, group in enumerate(self.members):
            cols = [(j, s) for j, s in group if s == want]
            if not cols:
                continue
            acc = 0.0
            n = 0.0
            for j, sign in cols:
                fj = self.F_phase[:, j] if sign > 0 else np.conj(self.F_phase[:, j])
                acc = acc + self.counts[j] * fj
                n += self.counts[j]
            positions.append(self.positions[k])
            columns.append(acc / n)
        positions = np.array(positions)
        if positions.size == 0:
            raise ValueError(f"no phases available for half-circle variant {which!r}")
        return positions, _periodic_weights(positions), np.stack(columns, axis=1)


class EmpiricalCF(_PhaseCF):
    """Dataset-side characteristic functions on the integration grid.

    Building one performs the full per-sample Fourier pass -- the expensive
    step -- so construct it once per (dataset, cfg) and reuse it across
    overlap, distance and bootstrap calls.
    """

    def __init__(self, dataset: QuadratureDataset, cfg: IntegrationConfig | None = None):
        cfg = cfg or IntegrationConfig()
        g = _grids(cfg)
        counts = dataset.counts().astype(float)
        F_phase = np.empty((g.r.size, dataset.n_phases), dtype=complex)
        for j, xs in enumerate(dataset.samples):
            F_phase[:, j] = _samples_cf(g.r, xs)
        super().__init__(dataset.phases, F_phase, counts, cfg)
        self.dataset = dataset
        self.pooled = []
        for group in self.members:
            parts = [dataset.samples[j] if s > 0 else -dataset.samples[j] for j, s in group]
            self.pooled.append(np.concatenate(parts))

    def phase_means(self):
        """Per-phase sample means, for harmonic parameter seeding."""
        return self.phases, np.array([xs.mean() for xs in self.dataset.samples])

    def noise_floor(self) -> float:
        """Plug-in estimate of the shot-noise bias in the self-overlap.

        E|F_hat|^2 = |F|^2 + (1 - |F|^2)/n per (r, theta); integrating the
        second term with the overlap weights gives the bias of
        overlap(data, data)."""
        g = _grids(self.cfg)
        excess = np.clip(1.0 - np.abs(self.F_fold) ** 2, 0.0, None) / self.n_fold[None, :]
        return float(g.radial @ excess @ self.weights / np.pi)

    def bootstrap_cfs(self, n_boot: int, seed: int) -> np.ndarray:
        """Multinomial-resampled folded CFs, shape (n_boot, n_r, n_positions).

        Each folded position is resampled independently with a seed derived
        from (seed, position index), so results are reproducible and do not
        depend on evaluation order.
        """
        g = _grids(self.cfg)
        out = np.empty((n_boot, g.r.size, self.positions.size), dtype=complex)
        for k, xs in enumerate(self.pooled):
            n = xs.size
            rng = np.random.default_rng([int(seed), k])
            m = rng.multinomial(n, np.full(n, 1.0 / n), size=n_boot).astype(float).T / n
            m = np.ascontiguousarray(m)
            for lo, hi, block in _samples_cf_matrix(g.r, xs):
                re = np.ascontiguousarray(block.real) @ m
                im = np.ascontiguousarray(block.imag) @ m
                out[:, lo:hi, k] = (re + 1j * im).T
        return out


class AnalyticSource(_PhaseCF):
    """A closed-form model presented on a discrete phase grid.

    Stands in for a dataset wherever one is expected (distance, symmetry
    error), with characteristic functions computed from the model instead
    of from samples.  Noise-free by construction.
    """

    def __init__(self, model, phases, cfg: IntegrationConfig | None = None):
        cfg = cfg or IntegrationConfig()
        phases = np.asarray(phases, dtype=float)
        density = _density_of(model)
        F_phase = _model_cf(density, phases, cfg)
        super().__init__(phases, F_phase, np.ones(phases.size), cfg)
        self.model = model

    def phase_means(self):
        g = _grids(self.cfg)
        density = _density_of(self.model)
        means = np.array([(g.x * g.wx) @ np.asarray(density(g.x, th), dtype=float)
                          for th in self.phases])
        return self.phases, means


def analytic_source(model, phases, cfg: IntegrationConfig | None = None) -> AnalyticSource:
    return AnalyticSource(model, phases, cfg)


@dataclass
class FunctionalResult:
    """Value of a tomographic functional plus the config and diagnostics."""

    value: float
    cfg: IntegrationConfig
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "cfg": self.cfg.to_json(),
            "diagnostics": self.diagnostics,
            "warnings": list(self.warnings),
        }


def _prepare(source, cfg: IntegrationConfig | None):
    """Normalize a source to either a _PhaseCF or a raw density callable."""
    if isinstance(source, _PhaseCF):
        if cfg is not None and source.cfg != cfg:
            raise ValueError("prepared source was built with a different IntegrationConfig")
        return source
    if isinstance(source, QuadratureDataset):
        return EmpiricalCF(source, cfg)
    return _density_of(source)


def _resolve_cfg(cfg, *sources) -> IntegrationConfig:
    for s in sources:
        if isinstance(s, _PhaseCF):
            if cfg is not None and s.cfg != cfg:
                raise ValueError("prepared source was built with a different IntegrationConfig")
            cfg = s.cfg
    return cfg or IntegrationConfig()


def _pair_grids(s1, s2, cfg: IntegrationConfig):
    """Common (positions, weights, F1, F2, diagnostics) for two sources."""
    diag: dict = {}
    phase_like_1 = isinstance(s1, _PhaseCF)
    phase_like_2 = isinstance(s2, _PhaseCF)
    if phase_like_1 and phase_like_2:
        if s1 is not s2 and (
            s1.positions.size != s2.positions.size
            or not np.allclose(s1.positions, s2.positions, atol=FOLD_MERGE_TOL)
        ):
            raise ValueError("phase grids of the two sources are incompatible")
        pos, wts = s1.positions, s1.weights
        F1, F2 = s1.F_fold, s2.F_fold
        diag["max_theta_gap"] = s1.max_gap
    elif phase_like_1 or phase_like_2:
        ref = s1 if phase_like_1 else s2
        other = s2 if phase_like_1 else s1
        pos, wts = ref.positions, ref.weights
        F_other = _model_cf(other, pos, cfg)
        F1 = ref.F_fold if phase_like_1 else F_other
        F2 = F_other if phase_like_1 else ref.F_fold
        diag["max_theta_gap"] = ref.max_gap
    else:
        pos = np.arange(cfg.n_theta_model) * np.pi / cfg.n_theta_model
        wts = np.full(pos.size, np.pi / cfg.n_theta_model)
        F1 = _model_cf(s1, pos, cfg)
        F2 = F1 if s2 is s1 else _model_cf(s2, pos, cfg)
        diag["max_theta_gap"] = float(np.pi / cfg.n_theta_model)
    return pos, wts, F1, F2, diag


def _integral(F1, F2, weights, cfg) -> float:
    g = _grids(cfg)
    return float(g.radial @ np.real(F1 * np.conj(F2)) @ weights / np.pi)


def overlap_tomographic(w1, w2, cfg: IntegrationConfig | None = None) -> FunctionalResult:
    """Tr(rho1 rho2) from two tomogram sources.

    Sources may be datasets (or prepared EmpiricalCF transforms), analytic
    sources, or closed-form models/callables.  Mixed pairs evaluate the
    model on the dataset's folded phase grid; pure model pairs use the
    uniform default grid.
    """
    cfg = _resolve_cfg(cfg, w1, w2)
    s1 = _prepare(w1, cfg)
    s2 = s1 if w2 is w1 else _prepare(w2, cfg)
    pos, wts, F1, F2, diag = _pair_grids(s1, s2, cfg)
    warnings = []
    if diag.get("max_theta_gap", 0.0) > COVERAGE_GAP:
        warnings.append(
            f"folded phase grid has a gap of {diag['max_theta_gap']:.3f} rad "
            f"(> pi/6); overlap quadrature may be unreliable"
        )
    if isinstance(s1, _PhaseCF):
        diag["paired_phases"] = len(s1.pairs)
    if s1 is s2 and isinstance(s1, EmpiricalCF):
        diag["noise_floor"] = s1.noise_floor()
    value = _integral(F1, F2, wts, cfg)
    return FunctionalResult(value, cfg, diag, warnings)


def purity_from_data(data, cfg: IntegrationConfig | None = None) -> FunctionalResult:
    """Tr(rho_ex^2) of measured data; the r cutoff regularizes shot noise.

    The noise-floor diagnostic is the plug-in estimate of the (positive)
    finite-sample bias; it is reported, not subtracted.
    """
    res = overlap_tomographic(data, data, cfg)
    if "noise_floor" not in res.diagnostics and isinstance(data, EmpiricalCF):
        res.diagnostics["noise_floor"] = data.noise_floor()
    return res


def hs_distance_sq(data, model, cfg: IntegrationConfig | None = None) -> FunctionalResult:
    """Squared Hilbert-Schmidt distance D^2 between data and a model family.

    Evaluated as overlap(data, data) - 2 overlap(data, model)
    + overlap(model, model) on a shared grid, which keeps the bilinear
    decomposition equal to the nonnegative |F_data - F_model|^2 form up to
    rounding (reported as diagnostics["direct_value"]).
    """
    cfg = _resolve_cfg(cfg, data, model)
    s1 = _prepare(data, cfg)
    s2 = _prepare(model, cfg)
    pos, wts, F1, F2, diag = _pair_grids(s1, s2, cfg)
    o11 = _integral(F1, F1, wts, cfg)
    o12 = _integral(F1, F2, wts, cfg)
    o22 = _integral(F2, F2, wts, cfg)
    value = o11 - 2.0 * o12 + o22
    dF = F1 - F2
    diag.update(
        overlap_data_data=o11,
        overlap_data_model=o12,
        overlap_model_model=o22,
        direct_value=_integral(dF, dF, wts, cfg),
    )
    if isinstance(s1, EmpiricalCF):
        diag["noise_floor"] = s1.noise_floor()
    warnings = []
    if diag.get("max_theta_gap", 0.0) > COVERAGE_GAP:
        warnings.append(
            f"folded phase grid has a gap of {diag['max_theta_gap']:.3f} rad (> pi/6)"
        )
    return FunctionalResult(value, cfg, diag, warnings)


def hs_distance_error(data, model, cfg: IntegrationConfig | None = None) -> FunctionalResult:
    """Symmetry-violation error estimate Delta(D^2) for the distance.

    Requires (theta, theta + pi) phase pairs in the data source.  With
    F_ex the per-phase empirical CF and F_th the model CF, the integrand

        |F_ex(r, th)|^2 - |F_ex(r, th+pi)|^2
        + 2 Re[F_th(r, th) (F_ex(r, th+pi) - conj F_ex(r, th))]

    vanishes identically for data satisfying w(X, th+pi) = w(-X, th).
    The result is the magnitude; the signed value is kept in diagnostics.
    """
    cfg = _resolve_cfg(cfg, data, model)
    src = _prepare(data, cfg)
    if not isinstance(src, _PhaseCF):
        raise TypeError("the data side of hs_distance_error must be a dataset or analytic source")
    if src.phases.size < 2:
        raise ValueError("degenerate single-phase data: the error functional needs phase pairs")
    if not src.pairs:
        raise ValueError(
            "no (theta, theta+pi) phase pairs within tolerance; the error "
            "functional is built from the symmetry violation between them"
        )
    density = _density_of(model)
    lo_idx = np.array([j for j, _ in src.pairs])
    hi_idx = np.array([k for _, k in src.pairs])
    order = np.argsort(src.phases[lo_idx], kind="stable")
    lo_idx, hi_idx = lo_idx[order], hi_idx[order]
    pos = src.phases[lo_idx]
    wts = _periodic_weights(pos)
    F_lo = src.F_phase[:, lo_idx]
    F_hi = src.F_phase[:, hi_idx]
    F_th = _model_cf(density, pos, cfg)
    integrand = (
        np.abs(F_lo) ** 2
        - np.abs(F_hi) ** 2
        + 2.0 * np.real(F_th * (F_hi - np.conj(F_lo)))
    )
    g = _grids(cfg)
    signed = float(g.radial @ integrand @ wts / (2.0 * np.pi))
    diag = {
        "signed_value": signed,
        "paired_phases": len(src.pairs),
        "unpaired_phases": [float(src.phases[j]) for j in src.unpaired],
        "max_theta_gap": _max_circular_gap(pos),
    }
    warnings = []
    if diag["max_theta_gap"] > COVERAGE_GAP:
        warnings.append(
            f"paired phases leave a gap of {diag['max_theta_gap']:.3f} rad (> pi/6)"
        )
    return FunctionalResult(abs(signed), cfg, diag, warnings)


class DistanceEngine:
    """Fast repeated D^2 / Delta(D^2) evaluation against one data source.

    Caches the data self-overlap and the per-pair empirical CFs so that
    each candidate model only costs one characteristic-function transform.
    This is what the fit loop and the scan cuts drive.
    """

    def __init__(self, data, cfg: IntegrationConfig | None = None):
        cfg = _resolve_cfg(cfg, data)
        src = _prepare(data, cfg)
        if not isinstance(src, _PhaseCF):
            raise TypeError("DistanceEngine needs a dataset or an analytic source")
        self.cfg = cfg
        self.source = src
        self.o_data_data = _integral(src.F_fold, src.F_fold, src.weights, cfg)
        if src.pairs:
            lo_idx = np.array([j for j, _ in src.pairs])
            hi_idx = np.array([k for _, k in src.pairs])
            order = np.argsort(src.phases[lo_idx], kind="stable")
            lo_idx, hi_idx = lo_idx[order], hi_idx[order]
            self.pair_positions = src.phases[lo_idx]
            self.pair_weights = _periodic_weights(self.pair_positions)
            self._F_lo = src.F_phase[:, lo_idx]
            self._F_hi = src.F_phase[:, hi_idx]
        else:
            self.pair_positions = None

    @property
    def has_pairs(self) -> bool:
        return self.pair_positions is not None

    def model_cf(self, model, positions) -> np.ndarray:
        return _model_cf(_density_of(model), positions, self.cfg)

    def d2(self, model) -> float:
        F = self.model_cf(model, self.source.positions)
        o12 = _integral(self.source.F_fold, F, self.source.weights, self.cfg)
        o22 = _integral(F, F, self.source.weights, self.cfg)
        return self.o_data_data - 2.0 * o12 + o22

    def d2_error(self, model, signed: bool = False) -> float:
        if not self.has_pairs:
            raise ValueError("no (theta, theta+pi) pairs: Delta(D^2) unavailable")
        F_th = self.model_cf(model, self.pair_positions)
        integrand = (
            np.abs(self._F_lo) ** 2
            - np.abs(self._F_hi) ** 2
            + 2.0 * np.real(F_th * (self._F_hi - np.conj(self._F_lo)))
        )
        g = _grids(self.cfg)
        value = float(g.radial @ integrand @ self.pair_weights / (2.0 * np.pi))
        return value if signed else abs(value)
