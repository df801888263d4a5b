"""
Coefficient fields a(x), their pushforward under a flattening map, and the
reflection extension across the flattened top and bottom faces.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from core.errors import OrientationError
from core.protocol import CoefficientFamily, MapKind
from transform.maps import FlattenMap, inverse, jacobian


def mixing_matrix(n: int) -> np.ndarray:
    """e_1 e_n^T + e_n e_1^T: couples the first lateral and the vertical direction."""
    S = np.zeros((n, n))
    S[0, n - 1] = S[n - 1, 0] = 1.0
    return S


def sine_seminorm_bound(amplitude: float, wavevector: np.ndarray, alpha: float) -> float:
    """C^alpha seminorm bound of amplitude*sin(k.x)*S with |S| = 1."""
    k = float(np.linalg.norm(wavevector))
    return amplitude * k ** alpha * 2.0 ** (1.0 - alpha)


@dataclass(frozen=True)
class LayerBlock:
    """base + amplitude * sin(k.x + phase) * S on one layer."""
    base: np.ndarray
    amplitude: float = 0.0
    wavevector: Optional[np.ndarray] = None
    phase: float = 0.0
    direction: Optional[np.ndarray] = None

    @classmethod
    def constant(cls, value: np.ndarray) -> "LayerBlock":
        return cls(base=np.array(value, dtype=float))

    @property
    def is_constant(self) -> bool:
        return self.amplitude == 0.0

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(self.base, x.shape[:-1] + self.base.shape).copy()
        if not self.is_constant:
            wave = np.sin(x @ self.wavevector + self.phase)
            out = out + self.amplitude * wave[..., None, None] * self.direction

        return out

    def seminorm_bound(self, alpha: float) -> float:
        if self.is_constant:
            return 0.0

        return sine_seminorm_bound(self.amplitude, self.wavevector, alpha)


@dataclass(frozen=True)
class LayeredPartition:
    """
    Horizontal layers c_{m-1} < x_n < c_m of the cylinder |x'| < 1, |x_n| < 1.

    Layers are numbered 1..l; a point on a cut belongs to the layer above it,
    which makes m0 the layer with c_{m0-1} <= 0 < c_{m0}.
    """
    cuts: np.ndarray
    layers: Tuple[LayerBlock, ...]

    def __post_init__(self):
        cuts = np.asarray(self.cuts, dtype=float)
        if cuts.ndim != 1 or len(cuts) < 2:
            raise ValueError("a partition needs at least the two cuts -1 and 1")

        if cuts[0] != -1.0 or cuts[-1] != 1.0:
            raise ValueError(f"cuts must start at -1 and end at 1, got {cuts[0]} and {cuts[-1]}")

        if np.any(np.diff(cuts) <= 0):
            raise ValueError("cuts must be strictly increasing")

        if len(self.layers) != len(cuts) - 1:
            raise ValueError(f"{len(cuts) - 1} layers expected, got {len(self.layers)}")

    @classmethod
    def random(cls, layer_count: int, n: int, seed: int, amplitude_max: float = 0.3,
               wavenumber: float = np.pi, jitter: float = 0.3) -> "LayeredPartition":
        """Jittered uniform cuts with identity + sine bump per layer."""
        if not (1 <= layer_count <= 64):
            raise ValueError(f"layer count must lie in [1, 64], got {layer_count}")

        if not (0.0 < amplitude_max <= 0.3):
            raise ValueError(f"amplitude must lie in (0, 0.3], got {amplitude_max}")

        rng = np.random.default_rng(seed)
        width = 2.0 / layer_count
        interior = -1.0 + width * np.arange(1, layer_count)
        interior = interior + jitter * width * rng.uniform(-0.5, 0.5, size=layer_count - 1)
        cuts = np.concatenate([[-1.0], interior, [1.0]])

        S = mixing_matrix(n)
        layers = []
        for _ in range(layer_count):
            angle = rng.normal(size=n)
            layers.append(LayerBlock(
                base=np.eye(n),
                amplitude=float(rng.uniform(0.5 * amplitude_max, amplitude_max)),
                wavevector=wavenumber * angle / np.linalg.norm(angle),
                phase=float(rng.uniform(0.0, 2.0 * np.pi)),
                direction=S,
            ))

        return cls(cuts=cuts, layers=tuple(layers))

    @property
    def layer_count(self) -> int:
        return len(self.layers)

    @property
    def n(self) -> int:
        return self.layers[0].base.shape[0]

    @property
    def m0(self) -> int:
        return int(np.searchsorted(self.cuts, 0.0, side='right'))

    def layer_index(self, xn) -> np.ndarray:
        """1-based layer of each vertical coordinate."""
        index = np.searchsorted(self.cuts, np.asarray(xn, dtype=float), side='right')
        return np.clip(index, 1, self.layer_count)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        index = self.layer_index(x[..., -1])
        out = np.empty(x.shape[:-1] + (self.n, self.n))
        for m, block in enumerate(self.layers, start=1):
            mask = index == m
            if np.any(mask):
                out[mask] = block.evaluate(x[mask])

        return out

    def layer_value(self, m: int, x) -> np.ndarray:
        """Layer m's formula at x, also at the closure of the layer."""
        return self.layers[m - 1].evaluate(np.asarray(x, dtype=float))

    def seminorm_bounds(self, alpha: float) -> np.ndarray:
        return np.array([block.seminorm_bound(alpha) for block in self.layers])

    def sampled_seminorms(self, alpha: float, samples_per_layer: int = 400, seed: int = 0) -> np.ndarray:
        """Per-layer discrete C^alpha quotients from random pairs inside each layer."""
        rng = np.random.default_rng(seed)
        n = self.n
        out = np.zeros(self.layer_count)
        for m in range(1, self.layer_count + 1):
            if self.layers[m - 1].is_constant:
                continue

            low, high = self.cuts[m - 1], self.cuts[m]
            p = rng.uniform(-1.0, 1.0, size=(samples_per_layer, n))
            q = rng.uniform(-1.0, 1.0, size=(samples_per_layer, n))
            p[:, -1] = rng.uniform(low, high, size=samples_per_layer)
            q[:, -1] = rng.uniform(low, high, size=samples_per_layer)
            out[m - 1] = discrete_holder_quotient(lambda y: self.layer_value(m, y), p, q, alpha)

        return out


def discrete_holder_quotient(evaluator: Callable[[np.ndarray], np.ndarray], p: np.ndarray, q: np.ndarray,
                             alpha: float) -> float:
    """max |F(p) - F(q)| / |p - q|^alpha over the given pairs, entrywise max norm."""
    distance = np.linalg.norm(p - q, axis=-1)
    keep = distance > 0
    if not np.any(keep):
        return 0.0

    difference = evaluator(p[keep]) - evaluator(q[keep])
    spread = np.abs(difference).reshape(difference.shape[0], -1).max(axis=-1)
    return float(np.max(spread / distance[keep] ** alpha))


@dataclass(frozen=True)
class CoefficientField:
    family: CoefficientFamily
    n: int
    lam: float
    Lam: float
    alpha: float
    holder_seminorm: float
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    partition: Optional[LayeredPartition] = field(default=None, repr=False)

    @classmethod
    def identity(cls, n: int, alpha: float = 0.5) -> "CoefficientField":
        eye = np.eye(n)

        def evaluate(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(eye, x.shape[:-1] + (n, n)).copy()

        return cls(CoefficientFamily.IDENTITY, n, 1.0, 1.0, alpha, 0.0, evaluate)

    @classmethod
    def smooth(cls, n: int, amplitude: float, wavevector: Sequence[float], alpha: float = 0.5) -> "CoefficientField":
        """I + amplitude * sin(k.x) * (e_1 e_n^T + e_n e_1^T)."""
        if not (0.0 <= amplitude < 1.0):
            raise ValueError(f"perturbation amplitude must lie in [0, 1), got {amplitude}")

        k = np.asarray(wavevector, dtype=float)
        if k.shape != (n,):
            raise ValueError(f"wavevector must have {n} components, got {k.shape}")

        block = LayerBlock(base=np.eye(n), amplitude=float(amplitude), wavevector=k, direction=mixing_matrix(n))
        return cls(
            CoefficientFamily.SMOOTH, n, 1.0 - amplitude, 1.0 + amplitude, alpha,
            block.seminorm_bound(alpha), block.evaluate,
        )

    @classmethod
    def layered(cls, partition: LayeredPartition, alpha: float = 0.5) -> "CoefficientField":
        amplitude = max(block.amplitude for block in partition.layers)
        return cls(
            CoefficientFamily.LAYERED, partition.n, 1.0 - amplitude, 1.0 + amplitude, alpha,
            float(partition.seminorm_bounds(alpha).max()), partition.evaluate, partition,
        )

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(x)

    def eigen_range(self, points) -> Tuple[float, float]:
        eigenvalues = np.linalg.eigvalsh(self(points))
        return float(eigenvalues.min()), float(eigenvalues.max())

    def is_elliptic_on(self, points, tol: float = 1e-12) -> bool:
        low, high = self.eigen_range(points)
        return low >= self.lam - tol and high <= self.Lam + tol


def pushforward_coefficients(a: CoefficientField, fmap: FlattenMap, z, flip_mixed_sign: bool = False) -> np.ndarray:
    """
    b(z) = J a J^T / det J at x = inverse(z), J = reference_scale * dz/dx.

    flip_mixed_sign negates b^{n1} and b^{1n}; it exists only to check that the
    property suite catches a sign error.
    """
    x = inverse(fmap, z)
    J = fmap.reference_scale * jacobian(fmap, x)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        bad = np.unravel_index(int(np.argmin(det)), det.shape) if np.ndim(det) else ()
        raise OrientationError(f"non-positive Jacobian determinant {np.min(det):.3e}", location=bad)

    b = np.einsum('...ij,...jk,...lk->...il', J, a(x), J) / det[..., None, None]
    b = 0.5 * (b + np.swapaxes(b, -1, -2))

    if flip_mixed_sign:
        n = fmap.n
        b[..., n - 1, 0] = -b[..., n - 1, 0]
        b[..., 0, n - 1] = -b[..., 0, n - 1]

    return b


def pushforward_eigen_bounds(a: CoefficientField, fmap: FlattenMap, z) -> Tuple[float, float]:
    eigenvalues = np.linalg.eigvalsh(pushforward_coefficients(a, fmap, z))
    return float(eigenvalues.min()), float(eigenvalues.max())


def flattened_box_samples(fmap: FlattenMap, count: int, seed: int = 0) -> np.ndarray:
    """Uniform samples of |z'| < 1, |z_n| <= half_height (the unit box for the global map)."""
    rng = np.random.default_rng(seed)
    n = fmap.n
    lateral = rng.normal(size=(count, n - 1))
    lateral /= np.linalg.norm(lateral, axis=-1, keepdims=True)
    lateral *= rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / (n - 1))
    if fmap.kind != MapKind.LOCAL:
        # lateral unit disk may exceed R0 for the unscaled maps
        lateral *= min(1.0, fmap.geometry.R0 - np.linalg.norm(fmap.x0p)) * (1.0 - 1e-9)

    vertical = rng.uniform(-fmap.half_height, fmap.half_height, size=(count, 1))
    return np.concatenate([lateral, vertical], axis=-1)


def holder_quotient(a: CoefficientField, fmap: FlattenMap, count: int = 2000, seed: int = 0,
                    alpha: Optional[float] = None) -> float:
    """Discrete C^alpha quotient of the pushed-forward coefficient over random pairs."""
    alpha = a.alpha if alpha is None else alpha
    p = flattened_box_samples(fmap, count, seed)
    q = flattened_box_samples(fmap, count, seed + 1)
    return discrete_holder_quotient(lambda z: pushforward_coefficients(a, fmap, z), p, q, alpha)


def reflection_index(delta: float, zn) -> np.ndarray:
    """Slab l centred at 2 l delta; an interface belongs to the lower slab."""
    return np.ceil(np.asarray(zn, dtype=float) / (2.0 * delta) - 0.5).astype(int)


def reflect_point(delta: float, z) -> Tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=float)
    l = reflection_index(delta, z[..., -1])
    sign = np.where(l % 2 == 0, 1.0, -1.0)
    source = z.copy()
    source[..., -1] = sign * (z[..., -1] - 2.0 * l * delta)
    return source, sign


def reflect_extend(source: Callable[[np.ndarray], np.ndarray], delta: float, z) -> np.ndarray:
    """
    Even extension of a field or coefficient defined on |z_n| <= delta.

    Scalar fields are read at the reflected point. Matrix coefficients are
    additionally conjugated by diag(1, ..., 1, (-1)^l), which flips the sign of
    the mixed entries b^{nk}, k != n.
    """
    z = np.asarray(z, dtype=float)
    src, sign = reflect_point(delta, z)
    value = np.asarray(source(src), dtype=float)

    if value.ndim == z.ndim + 1:
        n = z.shape[-1]
        value = value.copy()
        value[..., n - 1, :n - 1] *= sign[..., None]
        value[..., :n - 1, n - 1] *= sign[..., None]

    return value
