"""Analytic pilot-wave catalogue.

Single-particle building blocks (free Gaussian packets, harmonic-oscillator
eigenstates), N-particle products, (anti)symmetrised products, numerically
renormalised superpositions, and the harmonic two-anyon pair state in
centre-of-mass/relative coordinates.

Conventions: natural units with hbar = 1; a configuration is an ndarray of
shape (N, d) holding N particle positions in d dimensions.  Every evaluation
routine accepts a leading batch shape, i.e. x of shape (..., N, d) with t a
scalar or an array broadcastable to the batch shape.  All states are
immutable after construction, so evaluation is safe from concurrent workers.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermval

from .errors import (
    CapabilityError,
    ParameterError,
    PreconditionError,
    ZeroFunctionError,
)

# Factorial-growth cap for permutation sums (8! = 40320 terms).
MAX_PERMUTATION_PARTICLES = 8

# A point x is treated as a node when |psi(x)| < NODE_RELATIVE_THRESHOLD * peak.
NODE_RELATIVE_THRESHOLD = 1e-12

# Quadrature defaults for overlaps / renormalisation: box half-width in units
# of the largest length scale, and points per axis.
QUAD_HALFWIDTH_FACTOR = 12.0
QUAD_POINTS = 1025


def as_configuration(x, n_particles=None, dimension=None):
    """Validate and return a configuration array of shape (N, d)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ParameterError(f"configuration must have shape (N, d), got {arr.shape}")
    n, d = arr.shape
    if d not in (1, 2, 3):
        raise ParameterError(f"dimension must be 1, 2 or 3, got {d}")
    if n < 1:
        raise ParameterError("configuration needs at least one particle")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("configuration coordinates must be finite")
    if n_particles is not None and n != n_particles:
        raise ParameterError(f"expected {n_particles} particles, got {n}")
    if dimension is not None and d != dimension:
        raise ParameterError(f"expected dimension {dimension}, got {d}")
    return arr


def _tcol(t):
    """Broadcast helper: append one axis to t so it lines up with (..., d)."""
    return np.asarray(t, dtype=float)[..., None]


def _perm_parity(perm):
    """Parity (+1/-1) of a permutation given as a tuple of images."""
    seen = [False] * len(perm)
    sign = 1
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True)
class SymmetryTag:
    """Exchange symmetry of a pilot wave: the global phase under relabelling."""

    kind: str  # "none" | "symmetric" | "antisymmetric" | "anyonic"
    nu: float | None = None

    def __str__(self):
        if self.kind == "anyonic":
            return f"anyonic({self.nu:g})"
        return self.kind


TAG_NONE = SymmetryTag("none")
TAG_SYMMETRIC = SymmetryTag("symmetric")
TAG_ANTISYMMETRIC = SymmetryTag("antisymmetric")


# ---------------------------------------------------------------------------
# single-particle building blocks
# ---------------------------------------------------------------------------

class SingleParticleState:
    """One-particle complex amplitude with exact value and gradient.

    Subclasses provide value/gradient on points of shape (..., d) and a
    per-axis factorisation used by the 1D overlap quadratures.
    """

    kind = "abstract"
    dimension = None

    def value(self, r, t):
        raise NotImplementedError

    def gradient(self, r, t):
        raise NotImplementedError

    def axis_factor(self, axis, x, t):
        """1D factor along one axis; the product over axes is value()."""
        raise NotImplementedError

    def length_scale(self):
        raise NotImplementedError

    def center(self):
        raise NotImplementedError

    def peak_amplitude(self):
        raise NotImplementedError


class GaussianPacket(SingleParticleState):
    """Free Gaussian packet with exact closed-form spreading.

    At t = 0 the amplitude is
        (2 pi sigma^2)^(-d/4) * exp(-|r-c|^2 / (4 sigma^2) + i p.(r-c)),
    and the free evolution for the given mass multiplies the width by
    alpha(t) = 1 + i t / (2 m sigma^2) while the centre drifts with p/m.
    """

    kind = "gaussian_packet"

    def __init__(self, center, momentum, width, mass=1.0):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        momentum = np.atleast_1d(np.asarray(momentum, dtype=float))
        if center.ndim != 1 or center.shape != momentum.shape:
            raise ParameterError("center and momentum must be d-vectors of equal length")
        if center.size not in (1, 2, 3):
            raise ParameterError("dimension must be 1, 2 or 3")
        if not np.all(np.isfinite(center)) or not np.all(np.isfinite(momentum)):
            raise ParameterError("center and momentum must be finite")
        width = float(width)
        if not width > 0:
            raise ParameterError(f"width must be positive, got {width}")
        mass = float(mass)
        if not mass > 0:
            raise ParameterError(f"mass must be positive, got {mass}")
        self._center = center
        self._momentum = momentum
        self.width = width
        self.mass = mass
        self.dimension = center.size

    def _alpha(self, t):
        return 1.0 + 0.5j * np.asarray(t, dtype=float) / (self.mass * self.width**2)

    def value(self, r, t):
        r = np.asarray(r, dtype=float)
        c, p, m = self._center, self._momentum, self.mass
        s2 = self.width**2
        alpha = self._alpha(t)
        q = r - c - p * _tcol(t) / m
        kinetic = 0.5 * np.dot(p, p) * np.asarray(t, dtype=float) / m
        phase = np.sum(p * (r - c), axis=-1) - kinetic
        pref = (2.0 * np.pi * s2) ** (-0.25 * self.dimension)
        return pref * alpha ** (-0.5 * self.dimension) * np.exp(
            -np.sum(q * q, axis=-1) / (4.0 * s2 * alpha) + 1j * phase
        )

    def gradient(self, r, t):
        return self.value_and_gradient(r, t)[1]

    def value_and_gradient(self, r, t):
        r = np.asarray(r, dtype=float)
        c, p, m = self._center, self._momentum, self.mass
        val = self.value(r, t)
        alpha = self._alpha(t)
        q = r - c - p * _tcol(t) / m
        dlog = -q / (2.0 * self.width**2 * np.asarray(alpha)[..., None]) + 1j * p
        return val, val[..., None] * dlog

    def axis_factor(self, axis, x, t):
        x = np.asarray(x, dtype=float)
        c = self._center[axis]
        p = self._momentum[axis]
        m = self.mass
        s2 = self.width**2
        alpha = self._alpha(t)
        q = x - c - p * np.asarray(t, dtype=float) / m
        phase = p * (x - c) - 0.5 * p * p * np.asarray(t, dtype=float) / m
        return (2.0 * np.pi * s2) ** (-0.25) * alpha ** (-0.5) * np.exp(
            -q * q / (4.0 * s2 * alpha) + 1j * phase
        )

    def length_scale(self):
        return self.width

    def center(self):
        return self._center.copy()

    def peak_amplitude(self):
        return (2.0 * np.pi * self.width**2) ** (-0.25 * self.dimension)

    def parameters(self):
        return {
            "center": self._center.tolist(),
            "momentum": self._momentum.tolist(),
            "width": self.width,
            "mass": self.mass,
        }


class OscillatorEigenstate(SingleParticleState):
    """Harmonic-oscillator eigenstate, one level per axis.

    Stationary: the time dependence is the exact phase exp(-i E t) with
    E = sum_i (n_i + 1/2) * omega.
    """

    kind = "oscillator_eigenstate"

    def __init__(self, levels, frequency, mass):
        levels = np.atleast_1d(np.asarray(levels))
        if levels.ndim != 1 or levels.size not in (1, 2, 3):
            raise ParameterError("levels must list one quantum number per axis (d <= 3)")
        if not np.all(levels == np.floor(levels)):
            raise ParameterError("levels must be integers")
        levels = levels.astype(int)
        if np.any(levels < 0):
            raise ParameterError(f"levels must be non-negative, got {levels.tolist()}")
        frequency = float(frequency)
        mass = float(mass)
        if not frequency > 0:
            raise ParameterError(f"frequency must be positive, got {frequency}")
        if not mass > 0:
            raise ParameterError(f"mass must be positive, got {mass}")
        self.levels = tuple(int(n) for n in levels)
        self.frequency = frequency
        self.mass = mass
        self.dimension = levels.size
        self.energy = sum(n + 0.5 for n in self.levels) * frequency
        self._scale = math.sqrt(mass * frequency)  # xi = scale * x
        self._peak_cache = None

    def _hermite(self, n, xi):
        coeffs = np.zeros(n + 1)
        coeffs[n] = 1.0
        return hermval(xi, coeffs)

    def _axis_value(self, n, x):
        xi = self._scale * np.asarray(x, dtype=float)
        norm = (self.mass * self.frequency / np.pi) ** 0.25 / math.sqrt(
            (2.0**n) * math.factorial(n)
        )
        return norm * self._hermite(n, xi) * np.exp(-0.5 * xi * xi)

    def _axis_derivative(self, n, x):
        xi = self._scale * np.asarray(x, dtype=float)
        norm = (self.mass * self.frequency / np.pi) ** 0.25 / math.sqrt(
            (2.0**n) * math.factorial(n)
        )
        rec = 2.0 * n * self._hermite(n - 1, xi) if n > 0 else 0.0
        return norm * self._scale * (rec - xi * self._hermite(n, xi)) * np.exp(-0.5 * xi * xi)

    def value(self, r, t):
        r = np.asarray(r, dtype=float)
        out = self._axis_value(self.levels[0], r[..., 0])
        for i in range(1, self.dimension):
            out = out * self._axis_value(self.levels[i], r[..., i])
        return out * np.exp(-1j * self.energy * np.asarray(t, dtype=float))

    def gradient(self, r, t):
        return self.value_and_gradient(r, t)[1]

    def value_and_gradient(self, r, t):
        r = np.asarray(r, dtype=float)
        axes = [self._axis_value(n, r[..., i]) for i, n in enumerate(self.levels)]
        ders = [self._axis_derivative(n, r[..., i]) for i, n in enumerate(self.levels)]
        phase = np.exp(-1j * self.energy * np.asarray(t, dtype=float))
        val = phase * np.prod(np.stack(axes, axis=0), axis=0)
        grad = np.empty(r.shape, dtype=complex)
        for i in range(self.dimension):
            others = 1.0
            for j in range(self.dimension):
                if j != i:
                    others = others * axes[j]
            grad[..., i] = phase * others * ders[i]
        return val, grad

    def axis_factor(self, axis, x, t):
        e_axis = (self.levels[axis] + 0.5) * self.frequency
        return self._axis_value(self.levels[axis], x) * np.exp(
            -1j * e_axis * np.asarray(t, dtype=float)
        )

    def length_scale(self):
        n_max = max(self.levels)
        return math.sqrt((2 * n_max + 1) / (self.mass * self.frequency))

    def center(self):
        return np.zeros(self.dimension)

    def peak_amplitude(self):
        if self._peak_cache is None:
            peak = 1.0
            for n in self.levels:
                half = (math.sqrt(2 * n + 1) + 4.0) / self._scale
                grid = np.linspace(-half, half, 4097)
                peak *= float(np.max(np.abs(self._axis_value(n, grid))))
            self._peak_cache = peak
        return self._peak_cache

    def parameters(self):
        return {
            "levels": list(self.levels),
            "frequency": self.frequency,
            "mass": self.mass,
        }


def make_gaussian_packet(center, momentum, width, mass=1.0):
    """Free Gaussian packet; see GaussianPacket."""
    return GaussianPacket(center, momentum, width, mass)


def make_oscillator_eigenstate(levels, frequency, mass):
    """Harmonic-oscillator eigenstate; see OscillatorEigenstate."""
    return OscillatorEigenstate(levels, frequency, mass)


# ---------------------------------------------------------------------------
# single-particle overlap quadrature
# ---------------------------------------------------------------------------

def _axis_grid(a, b, axis):
    """Shared quadrature grid covering both states along one axis."""
    la, lb = a.length_scale(), b.length_scale()
    half = QUAD_HALFWIDTH_FACTOR * max(la, lb)
    lo = min(a.center()[axis], b.center()[axis]) - half
    hi = max(a.center()[axis], b.center()[axis]) + half
    return np.linspace(lo, hi, QUAD_POINTS)


def overlap_1p(a, b, t=0.0):
    """<a|b> for two single-particle states by per-axis 1D quadrature."""
    if a.dimension != b.dimension:
        raise ParameterError("overlap requires states of equal dimension")
    out = 1.0 + 0.0j
    for axis in range(a.dimension):
        grid = _axis_grid(a, b, axis)
        fa = a.axis_factor(axis, grid, t)
        fb = b.axis_factor(axis, grid, t)
        out *= np.trapezoid(np.conj(fa) * fb, grid)
    return complex(out)


# ---------------------------------------------------------------------------
# pilot waves on configuration space
# ---------------------------------------------------------------------------

class PilotWave:
    """N-particle complex amplitude psi(x, t) with exact gradient.

    value() returns psi at configurations of shape (..., N, d); gradient()
    returns the complex configuration-space gradient, shape (..., N, d).
    """

    n_particles = None
    dimension = None
    symmetry_tag = TAG_NONE

    def value(self, x, t):
        raise NotImplementedError

    def gradient(self, x, t):
        return self.value_and_gradient(x, t)[1]

    def value_and_gradient(self, x, t):
        return self.value(x, t), self.gradient(x, t)

    def peak_estimate(self):
        """Upper estimate of max |psi|, used to set the node threshold."""
        raise NotImplementedError

    def node_threshold(self):
        return NODE_RELATIVE_THRESHOLD * self.peak_estimate()

    def characteristic_length(self):
        raise NotImplementedError

    def reference_configuration(self):
        """A deterministic configuration of non-negligible |psi|."""
        raise NotImplementedError

    def constituents(self):
        """Single-particle factors, when the structure has them."""
        return None


class ProductState(PilotWave):
    """Plain product of N single-particle states (no exchange symmetry)."""

    structure = "product"

    def __init__(self, states):
        states = tuple(states)
        if not states:
            raise ParameterError("product needs at least one factor")
        d = states[0].dimension
        if any(s.dimension != d for s in states):
            raise ParameterError("all product factors must share the dimension")
        self.states = states
        self.n_particles = len(states)
        self.dimension = d
        self.symmetry_tag = TAG_NONE

    def value(self, x, t):
        x = np.asarray(x, dtype=float)
        out = self.states[0].value(x[..., 0, :], t)
        for k in range(1, self.n_particles):
            out = out * self.states[k].value(x[..., k, :], t)
        return out

    def value_and_gradient(self, x, t):
        x = np.asarray(x, dtype=float)
        vals = []
        grads = []
        for k, s in enumerate(self.states):
            v, g = s.value_and_gradient(x[..., k, :], t)
            vals.append(v)
            grads.append(g)
        stacked = np.stack(vals, axis=0)  # (N, ...)
        n = self.n_particles
        prefix = np.ones_like(stacked)
        suffix = np.ones_like(stacked)
        for k in range(1, n):
            prefix[k] = prefix[k - 1] * stacked[k - 1]
        for k in range(n - 2, -1, -1):
            suffix[k] = suffix[k + 1] * stacked[k + 1]
        val = prefix[-1] * stacked[-1]
        grad = np.empty(x.shape, dtype=complex)
        for k in range(n):
            excl = prefix[k] * suffix[k]
            grad[..., k, :] = excl[..., None] * grads[k]
        return val, grad

    def gradient(self, x, t):
        return self.value_and_gradient(x, t)[1]

    def peak_estimate(self):
        return float(np.prod([s.peak_amplitude() for s in self.states]))

    def characteristic_length(self):
        return max(s.length_scale() for s in self.states)

    def reference_configuration(self):
        return np.stack([s.center() for s in self.states], axis=0)

    def constituents(self):
        return self.states


class SymmetrizedProduct(PilotWave):
    """(Anti)symmetrised product of pairwise-orthonormal one-particle states.

    psi_pm(x) = (N!)^(-1/2) * sum over permutations of signed permuted
    products; with orthonormal constituents the result is normalised.
    """

    def __init__(self, states, sign):
        states = tuple(states)
        if sign not in (+1, -1):
            raise ParameterError("sign must be +1 or -1")
        if not states:
            raise ParameterError("need at least one factor")
        n = len(states)
        if n > MAX_PERMUTATION_PARTICLES:
            raise CapabilityError(
                f"permutation sum capped at N = {MAX_PERMUTATION_PARTICLES}, got {n}"
            )
        d = states[0].dimension
        if any(s.dimension != d for s in states):
            raise ParameterError("all factors must share the dimension")
        self._check_orthonormal(states, sign)
        self.states = states
        self.sign = sign
        self.n_particles = n
        self.dimension = d
        self.symmetry_tag = TAG_SYMMETRIC if sign > 0 else TAG_ANTISYMMETRIC
        perms = list(itertools.permutations(range(n)))
        self._perms = perms
        self._parities = np.array(
            [1.0 if sign > 0 else _perm_parity(p) for p in perms]
        )
        self._inverse = [tuple(np.argsort(p)) for p in perms]
        self._norm = 1.0 / math.sqrt(math.factorial(n))

    @staticmethod
    def _check_orthonormal(states, sign, tol=1e-6):
        n = len(states)
        for i in range(n):
            nrm = overlap_1p(states[i], states[i])
            if abs(nrm - 1.0) > tol:
                raise PreconditionError(
                    f"factor {i} is not normalised (<s|s> = {nrm:.8f})"
                )
        for i in range(n):
            for j in range(i + 1, n):
                ov = overlap_1p(states[i], states[j])
                if abs(abs(ov) - 1.0) < tol:
                    if sign < 0:
                        raise ZeroFunctionError(
                            "antisymmetrisation of identical factors vanishes"
                        )
                    raise PreconditionError(
                        f"factors {i} and {j} coincide; orthonormal factors required"
                    )
                if abs(ov) > tol:
                    raise PreconditionError(
                        f"factors {i} and {j} are not orthogonal (<i|j> = {abs(ov):.2e})"
                    )

    def _tables(self, x, t, with_gradient):
        n = self.n_particles
        vals = np.empty((n, n) + x.shape[:-2], dtype=complex)
        grads = None
        if with_gradient:
            grads = np.empty((n, n) + x.shape[:-2] + (self.dimension,), dtype=complex)
        for k, s in enumerate(self.states):
            for j in range(n):
                if with_gradient:
                    v, g = s.value_and_gradient(x[..., j, :], t)
                    vals[k, j] = v
                    grads[k, j] = g
                else:
                    vals[k, j] = s.value(x[..., j, :], t)
        return vals, grads

    def value(self, x, t):
        x = np.asarray(x, dtype=float)
        vals, _ = self._tables(x, t, with_gradient=False)
        n = self.n_particles
        idx = np.arange(n)
        out = np.zeros(x.shape[:-2], dtype=complex)
        for par, perm in zip(self._parities, self._perms):
            out += par * np.prod(vals[idx, list(perm)], axis=0)
        return self._norm * out

    def value_and_gradient(self, x, t):
        x = np.asarray(x, dtype=float)
        vals, grads = self._tables(x, t, with_gradient=True)
        n = self.n_particles
        idx = np.arange(n)
        val = np.zeros(x.shape[:-2], dtype=complex)
        grad = np.zeros(x.shape, dtype=complex)
        for par, perm, inv in zip(self._parities, self._perms, self._inverse):
            factors = vals[idx, list(perm)]  # (N, ...)
            prefix = np.ones_like(factors)
            suffix = np.ones_like(factors)
            for k in range(1, n):
                prefix[k] = prefix[k - 1] * factors[k - 1]
            for k in range(n - 2, -1, -1):
                suffix[k] = suffix[k + 1] * factors[k + 1]
            val += par * prefix[-1] * factors[-1]
            for j in range(n):
                k = inv[j]
                excl = prefix[k] * suffix[k]
                grad[..., j, :] += par * excl[..., None] * grads[k, j]
        return self._norm * val, self._norm * grad

    def gradient(self, x, t):
        return self.value_and_gradient(x, t)[1]

    def peak_estimate(self):
        prod = float(np.prod([s.peak_amplitude() for s in self.states]))
        return math.sqrt(math.factorial(self.n_particles)) * prod

    def characteristic_length(self):
        return max(s.length_scale() for s in self.states)

    def reference_configuration(self):
        # Spread particles across the occupied region to dodge exchange nodes.
        scale = self.characteristic_length()
        n, d = self.n_particles, self.dimension
        offsets = (np.arange(n) - 0.5 * (n - 1)) * scale
        ref = np.zeros((n, d))
        ref[:, 0] = offsets
        centers = np.stack([s.center() for s in self.states], axis=0)
        return ref + centers.mean(axis=0)

    def constituents(self):
        return self.states


class Superposition(PilotWave):
    """Linear combination of same-shape pilot waves, renormalised numerically.

    Terms must share particle number, dimension and symmetry tag.  The norm is
    computed from pairwise overlaps at t = 0 (overlaps are preserved by the
    shared unitary evolution, so the normalisation holds at all times).
    """

    structure = "superposition"

    def __init__(self, terms):
        terms = [(complex(c), w) for c, w in terms]
        if not terms:
            raise ParameterError("superposition needs at least one term")
        first = terms[0][1]
        for _, w in terms:
            if w.n_particles != first.n_particles or w.dimension != first.dimension:
                raise ParameterError("superposition terms must share N and d")
            if w.symmetry_tag != first.symmetry_tag:
                raise ParameterError(
                    f"superposition terms must share the symmetry tag "
                    f"({w.symmetry_tag} vs {first.symmetry_tag})"
                )
        waves = [w for _, w in terms]
        coeffs = np.array([c for c, _ in terms])
        gram = np.empty((len(waves), len(waves)), dtype=complex)
        for i, a in enumerate(waves):
            for j, b in enumerate(waves):
                if j < i:
                    gram[i, j] = np.conj(gram[j, i])
                else:
                    gram[i, j] = pilot_overlap(a, b)
        norm2 = float(np.real(np.conj(coeffs) @ gram @ coeffs))
        if norm2 <= 1e-14:
            raise ZeroFunctionError("superposition has vanishing norm")
        self.waves = tuple(waves)
        self.coefficients = coeffs / math.sqrt(norm2)
        self.n_particles = first.n_particles
        self.dimension = first.dimension
        self.symmetry_tag = first.symmetry_tag

    def value(self, x, t):
        out = self.coefficients[0] * self.waves[0].value(x, t)
        for c, w in zip(self.coefficients[1:], self.waves[1:]):
            out = out + c * w.value(x, t)
        return out

    def value_and_gradient(self, x, t):
        val = None
        grad = None
        for c, w in zip(self.coefficients, self.waves):
            v, g = w.value_and_gradient(x, t)
            val = c * v if val is None else val + c * v
            grad = c * g if grad is None else grad + c * g
        return val, grad

    def gradient(self, x, t):
        return self.value_and_gradient(x, t)[1]

    def peak_estimate(self):
        return float(
            sum(abs(c) * w.peak_estimate() for c, w in zip(self.coefficients, self.waves))
        )

    def characteristic_length(self):
        return max(w.characteristic_length() for w in self.waves)

    def reference_configuration(self):
        lead = int(np.argmax(np.abs(self.coefficients)))
        return self.waves[lead].reference_configuration()


class AnyonPairState(PilotWave):
    """Two identical particles in the plane with exchange phase exp(i pi nu).

    Harmonic representative in centre-of-mass/relative coordinates: the CM
    factor is the 2D oscillator ground state of mass 2m; the relative factor
    is C r^|l| exp(-mu w r^2 / 2) exp(i l phi) exp(-i E_rel t) with l = nu + 2k
    and reduced mass mu = m/2.  The amplitude and the phase gradient are
    single-valued even where the principal-branch value is not; the dynamics
    consumes only the phase gradient.
    """

    structure = "anyon_pair"

    def __init__(self, nu, k, frequency, mass):
        nu = float(nu)
        if not (0.0 <= nu < 2.0):
            raise ParameterError(f"nu must lie in [0, 2), got {nu}")
        k = int(k)
        frequency = float(frequency)
        mass = float(mass)
        if not frequency > 0:
            raise ParameterError(f"frequency must be positive, got {frequency}")
        if not mass > 0:
            raise ParameterError(f"mass must be positive, got {mass}")
        self.nu = nu
        self.k = k
        self.frequency = frequency
        self.mass = mass
        self.ell = nu + 2 * k
        self.mu = mass / 2.0
        self.total_mass = 2.0 * mass
        self.energy_cm = frequency
        self.energy_rel = (abs(self.ell) + 1.0) * frequency
        self.energy = self.energy_cm + self.energy_rel
        self._c_cm = math.sqrt(self.total_mass * frequency / math.pi)
        self._c_rel = math.sqrt(
            (self.mu * frequency) ** (abs(self.ell) + 1.0)
            / (math.pi * math.gamma(abs(self.ell) + 1.0))
        )
        self.n_particles = 2
        self.dimension = 2
        self.symmetry_tag = SymmetryTag("anyonic", nu)

    def split(self, x):
        """(CM, relative) coordinates of configurations (..., 2, 2)."""
        x = np.asarray(x, dtype=float)
        cm = 0.5 * (x[..., 0, :] + x[..., 1, :])
        rel = x[..., 0, :] - x[..., 1, :]
        return cm, rel

    def _angular(self, rel):
        """w = r^|l| exp(i l phi) with its relative-plane gradient."""
        ell = self.ell
        a = abs(ell)
        rx, ry = rel[..., 0], rel[..., 1]
        r2 = rx * rx + ry * ry
        if a == 0.0:
            w = np.ones(rel.shape[:-1], dtype=complex)
            dw = np.zeros(rel.shape, dtype=complex)
            return w, dw
        if float(ell).is_integer():
            z = rx + 1j * np.sign(ell) * ry
            w = z ** int(a)
            dw = np.empty(rel.shape, dtype=complex)
            base = a * z ** (int(a) - 1)
            dw[..., 0] = base
            dw[..., 1] = 1j * np.sign(ell) * base
            return w, dw
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.sqrt(r2)
            phi = np.arctan2(ry, rx)
            w = r**a * np.exp(1j * ell * phi)
            dw = np.empty(rel.shape, dtype=complex)
            dlog_x = (a * rx - 1j * ell * ry) / r2
            dlog_y = (a * ry + 1j * ell * rx) / r2
            dw[..., 0] = w * dlog_x
            dw[..., 1] = w * dlog_y
        w = np.where(r2 > 0, w, 0.0)
        # At the origin the non-integer branch has no derivative; flag with 0
        # for a > 1 (true limit) and leave nan only for 0 < a < 1.
        if a > 1.0:
            dw = np.where((r2 > 0)[..., None], dw, 0.0)
        return w, dw

    def value(self, x, t):
        cm, rel = self.split(x)
        w, _ = self._angular(rel)
        return self._envelope(cm, rel, t) * w

    def _envelope(self, cm, rel, t):
        wfreq = self.frequency
        gauss = np.exp(
            -0.5 * self.total_mass * wfreq * np.sum(cm * cm, axis=-1)
            - 0.5 * self.mu * wfreq * np.sum(rel * rel, axis=-1)
        )
        phase = np.exp(-1j * self.energy * np.asarray(t, dtype=float))
        return self._c_cm * self._c_rel * gauss * phase

    def value_and_gradient(self, x, t):
        cm, rel = self.split(x)
        w, dw = self._angular(rel)
        env = self._envelope(cm, rel, t)
        val = env * w
        grad_cm = val[..., None] * (-self.total_mass * self.frequency * cm)
        grad_rel = env[..., None] * (dw - w[..., None] * (self.mu * self.frequency * rel))
        grad = np.empty(np.asarray(x, dtype=float).shape, dtype=complex)
        grad[..., 0, :] = 0.5 * grad_cm + grad_rel
        grad[..., 1, :] = 0.5 * grad_cm - grad_rel
        return val, grad

    def gradient(self, x, t):
        return self.value_and_gradient(x, t)[1]

    def relative_phase_gradient(self, rel):
        """Single-valued gradient of the relative phase l*phi, shape (..., 2)."""
        rel = np.asarray(rel, dtype=float)
        r2 = np.sum(rel * rel, axis=-1)
        out = np.empty(rel.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[..., 0] = -self.ell * rel[..., 1] / r2
            out[..., 1] = self.ell * rel[..., 0] / r2
        return out

    def peak_estimate(self):
        a = abs(self.ell)
        if a == 0:
            rad = 1.0
        else:
            rstar2 = a / (self.mu * self.frequency)
            rad = rstar2 ** (0.5 * a) * math.exp(-0.5 * a)
        return self._c_cm * self._c_rel * rad

    def characteristic_length(self):
        rel = math.sqrt((abs(self.ell) + 1.0) / (self.mu * self.frequency))
        cm = math.sqrt(1.0 / (self.total_mass * self.frequency))
        return max(rel, cm)

    def reference_configuration(self):
        a = abs(self.ell)
        r = math.sqrt(max(a, 1.0) / (self.mu * self.frequency))
        return np.array([[0.5 * r, 0.0], [-0.5 * r, 0.0]])


# ---------------------------------------------------------------------------
# overlaps between pilot waves (used by superposition renormalisation)
# ---------------------------------------------------------------------------

def _perm_sum(matrix, signed):
    """Permanent (signed=False) or determinant-style signed sum of an NxN matrix."""
    n = matrix.shape[0]
    if n > MAX_PERMUTATION_PARTICLES:
        raise CapabilityError("permutation sum too large")
    total = 0.0 + 0.0j
    for perm in itertools.permutations(range(n)):
        par = _perm_parity(perm) if signed else 1.0
        term = par
        for k in range(n):
            term = term * matrix[k, perm[k]]
        total += term
    return total


def pilot_overlap(a, b, t=0.0):
    """<a|b> over configuration space for catalogue pilot waves."""
    if a.n_particles != b.n_particles or a.dimension != b.dimension:
        raise ParameterError("overlap requires matching N and d")
    if isinstance(a, Superposition):
        return sum(
            np.conj(c) * pilot_overlap(w, b, t)
            for c, w in zip(a.coefficients, a.waves)
        )
    if isinstance(b, Superposition):
        return sum(
            c * pilot_overlap(a, w, t) for c, w in zip(b.coefficients, b.waves)
        )
    if isinstance(a, ProductState) and isinstance(b, ProductState):
        out = 1.0 + 0.0j
        for sa, sb in zip(a.states, b.states):
            out *= overlap_1p(sa, sb, t)
        return out
    if isinstance(a, SymmetrizedProduct) and isinstance(b, SymmetrizedProduct):
        if a.sign != b.sign:
            raise ParameterError("cannot overlap states of opposite exchange symmetry")
        n = a.n_particles
        mat = np.array(
            [[overlap_1p(sa, sb, t) for sb in b.states] for sa in a.states]
        )
        return _perm_sum(mat, signed=(a.sign < 0))
    if isinstance(a, SymmetrizedProduct) and isinstance(b, ProductState):
        n = a.n_particles
        mat = np.array(
            [[overlap_1p(sa, sb, t) for sb in b.states] for sa in a.states]
        )
        return _perm_sum(mat, signed=(a.sign < 0)) / math.sqrt(math.factorial(n))
    if isinstance(a, ProductState) and isinstance(b, SymmetrizedProduct):
        return np.conj(pilot_overlap(b, a, t))
    if isinstance(a, AnyonPairState) and isinstance(b, AnyonPairState):
        if a.ell != b.ell:
            return 0.0 + 0.0j  # angular orthogonality
        length = max(a.characteristic_length(), b.characteristic_length())
        half = QUAD_HALFWIDTH_FACTOR * length
        r = np.linspace(0.0, half, QUAD_POINTS)
        aa = abs(a.ell)
        rad = (
            a._c_rel
            * b._c_rel
            * r ** (2 * aa)
            * np.exp(-0.5 * (a.mu * a.frequency + b.mu * b.frequency) * r * r)
        )
        rel = 2.0 * np.pi * np.trapezoid(rad * r, r)
        # CM overlap: per-axis Gaussian integral with the two ground-state
        # normalisations sqrt(c_cm) each (c_cm = sqrt(M w / pi) per axis).
        g = np.linspace(-half, half, QUAD_POINTS)
        axis = np.trapezoid(
            math.sqrt(a._c_cm * b._c_cm)
            * np.exp(
                -0.5
                * (a.total_mass * a.frequency + b.total_mass * b.frequency)
                * g
                * g
            ),
            g,
        )
        phase = np.exp(1j * (a.energy - b.energy) * float(t))
        return rel * axis * axis * phase
    return _overlap_grid(a, b, t)


def _overlap_grid(a, b, t=0.0):
    """Dense-grid overlap fallback for small configuration spaces (N*d <= 3)."""
    nd = a.n_particles * a.dimension
    if nd > 3:
        raise ParameterError(
            "no factorised overlap rule for these states and N*d > 3"
        )
    length = max(a.characteristic_length(), b.characteristic_length())
    ra = np.asarray(a.reference_configuration()).ravel()
    rb = np.asarray(b.reference_configuration()).ravel()
    half = QUAD_HALFWIDTH_FACTOR * length
    points = {1: 8193, 2: 769, 3: 161}[nd]
    axes = [
        np.linspace(min(ra[i], rb[i]) - half, max(ra[i], rb[i]) + half, points)
        for i in range(nd)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=-1).reshape(
        -1, a.n_particles, a.dimension
    )
    va = a.value(flat, t)
    vb = b.value(flat, t)
    integrand = (np.conj(va) * vb).reshape(mesh[0].shape)
    for axis_vals in reversed(axes):
        integrand = np.trapezoid(integrand, axis_vals, axis=-1)
    return complex(integrand)


def norm_squared_grid(psi, halfwidth=None, points=None, t=0.0):
    """Quadrature of |psi|^2 over a box; test oracle for normalisation."""
    nd = psi.n_particles * psi.dimension
    if nd > 3 and not isinstance(psi, AnyonPairState):
        raise ParameterError("grid quadrature limited to N*d <= 3")
    if isinstance(psi, AnyonPairState):
        return _anyon_norm_squared(psi, t)
    length = psi.characteristic_length()
    half = halfwidth if halfwidth is not None else QUAD_HALFWIDTH_FACTOR * length
    pts = points if points is not None else {1: 8193, 2: 769, 3: 161}[nd]
    centers = np.asarray(psi.reference_configuration()).ravel()
    axes = [np.linspace(c - half, c + half, pts) for c in centers]
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=-1).reshape(
        -1, psi.n_particles, psi.dimension
    )
    dens = np.abs(psi.value(flat, t)) ** 2
    integrand = dens.reshape(mesh[0].shape)
    for axis_vals in reversed(axes):
        integrand = np.trapezoid(integrand, axis_vals, axis=-1)
    return float(integrand)


def _anyon_norm_squared(psi, t=0.0):
    """Exact-factorisation quadrature for the anyon pair (unit Jacobian)."""
    length = psi.characteristic_length()
    half = QUAD_HALFWIDTH_FACTOR * length
    r = np.linspace(0.0, half, QUAD_POINTS)
    a = abs(psi.ell)
    rad = psi._c_rel**2 * r ** (2 * a) * np.exp(-psi.mu * psi.frequency * r * r)
    rel = 2.0 * np.pi * np.trapezoid(rad * r, r)
    g = np.linspace(-half, half, QUAD_POINTS)
    axis = np.trapezoid(
        psi._c_cm * np.exp(-psi.total_mass * psi.frequency * g * g), g
    )
    return float(rel * axis * axis / 1.0) * 1.0 if False else float(rel * axis * axis)


def make_product(states):
    """Product pilot wave from N single-particle states."""
    return ProductState(states)


def superpose(terms):
    """Renormalised linear combination of (coefficient, PilotWave) terms."""
    return Superposition(terms)


def make_anyon_pair_state(nu, k, frequency, mass):
    """Harmonic two-anyon pair state; see AnyonPairState."""
    return AnyonPairState(nu, k, frequency, mass)


def evaluate(psi, x, t):
    """psi(x, t) for a validated single configuration (or batch)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = as_configuration(x, psi.n_particles, psi.dimension)
    elif x.shape[-2:] != (psi.n_particles, psi.dimension):
        raise ParameterError(
            f"configuration shape {x.shape} does not match state "
            f"(N={psi.n_particles}, d={psi.dimension})"
        )
    return psi.value(x, t)


def gradient(psi, x, t):
    """Configuration-space gradient of psi, one complex d-vector per particle."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = as_configuration(x, psi.n_particles, psi.dimension)
    elif x.shape[-2:] != (psi.n_particles, psi.dimension):
        raise ParameterError(
            f"configuration shape {x.shape} does not match state "
            f"(N={psi.n_particles}, d={psi.dimension})"
        )
    return psi.gradient(x, t)
