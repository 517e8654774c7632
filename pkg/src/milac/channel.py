"""Downlink channel generation, file I/O and Gram-matrix caching."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ContractViolation, ParseError
from .numkit import hermitian_sqrt

THERMAL_NOISE_DBM_PER_HZ = -174.0
RANK_TOL = 1e-8
MAX_RANK_RETRIES = 8


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * math.log10(watt) + 30.0


def noise_variance_from(noise_figure_db, bandwidth_hz):
    """Thermal noise power in Watts for a receiver with the given noise figure."""
    if bandwidth_hz <= 0:
        raise ContractViolation("bandwidth must be positive")
    dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return dbm_to_watt(dbm)


DEFAULT_NOISE_VARIANCE = noise_variance_from(5.0, 1e8)


def _full_row_rank(H, tol=RANK_TOL):
    K, N = H.shape
    if K > N:
        return False
    s = np.linalg.svd(H, compute_uv=False)
    return s[0] > 0 and s[-1] >= tol * s[0]


@dataclass(frozen=True)
class ChannelSet:
    """K x N channel ``H`` (row k is h_k^H) with its Gram factorizations."""

    H: np.ndarray
    noise_variance: float = DEFAULT_NOISE_VARIANCE
    gram: np.ndarray = field(init=False, repr=False)
    gram_sqrt: np.ndarray = field(init=False, repr=False)
    gram_inv_sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        H = np.array(self.H, dtype=complex)
        if H.ndim != 2:
            raise ContractViolation("H must be a matrix")
        if not np.all(np.isfinite(H)):
            raise ContractViolation("H has non-finite entries")
        if self.noise_variance < 0:
            raise ContractViolation("noise variance must be nonnegative")
        H.setflags(write=False)
        gram = H @ H.conj().T
        gram = 0.5 * (gram + gram.conj().T)
        sq = hermitian_sqrt(gram) if np.any(gram) else np.zeros_like(gram)
        isq = hermitian_sqrt(gram, inverse=True) if np.any(gram) else np.zeros_like(gram)
        for name, value in (("H", H), ("gram", gram), ("gram_sqrt", sq), ("gram_inv_sqrt", isq)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def from_matrix(cls, H, noise_variance=DEFAULT_NOISE_VARIANCE, check_rank=True):
        H = np.asarray(H, dtype=complex)
        if check_rank and not _full_row_rank(H):
            raise ContractViolation("channel must have full row rank (K <= N)")
        return cls(H, noise_variance)

    @property
    def n_users(self):
        return self.H.shape[0]

    @property
    def n_antennas(self):
        return self.H.shape[1]

    def with_noise(self, noise_variance):
        return ChannelSet(self.H, noise_variance)

    def scaled(self, factor):
        return ChannelSet(self.H * factor, self.noise_variance)


def _check_dims(K, N):
    if K < 1 or N < 1:
        raise ContractViolation("K and N must be positive")
    if K > N:
        raise ContractViolation(f"need K <= N, got K={K}, N={N}")


def _with_rank_guard(draw, seed, noise_variance):
    for attempt in range(MAX_RANK_RETRIES + 1):
        H = draw(np.random.default_rng(seed + attempt))
        if _full_row_rank(H):
            return ChannelSet(H, noise_variance)
    raise ContractViolation(
        f"could not draw a full-row-rank channel after {MAX_RANK_RETRIES} retries"
    )


def generate_rayleigh(K, N, seed=0, scale=1.0, noise_variance=DEFAULT_NOISE_VARIANCE):
    """I.i.d. CN(0, scale^2) entries, deterministic in ``seed``."""
    _check_dims(K, N)

    def draw(rng):
        g = rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))
        return scale * g / math.sqrt(2.0)

    return _with_rank_guard(draw, seed, noise_variance)


def ula_steering(N, angle):
    """Half-wavelength ULA response (unit-modulus entries)."""
    return np.exp(1j * math.pi * np.arange(N) * math.sin(angle))


def generate_geometric(K, N, paths=4, seed=0, scale=1.0, noise_variance=DEFAULT_NOISE_VARIANCE):
    """Sum of ``paths`` plane waves per user with uniform departure angles."""
    _check_dims(K, N)
    if paths < 1:
        raise ContractViolation("paths must be >= 1")

    def draw(rng):
        H = np.zeros((K, N), dtype=complex)
        for k in range(K):
            angles = rng.uniform(-math.pi / 2, math.pi / 2, size=paths)
            gains = (rng.standard_normal(paths) + 1j * rng.standard_normal(paths)) / math.sqrt(2.0)
            for g, a in zip(gains, angles):
                H[k] += g * ula_steering(N, a).conj()
        return scale * H / math.sqrt(paths)

    return _with_rank_guard(draw, seed, noise_variance)


def save_channel(cs_or_H, path):
    H = cs_or_H.H if isinstance(cs_or_H, ChannelSet) else np.asarray(cs_or_H)
    K, N = H.shape
    lines = [f"# complex_matrix rows={K} cols={N}"]
    for row in H:
        vals = []
        for z in row:
            vals.append(f"{z.real:.17g}")
            vals.append(f"{z.imag:.17g}")
        lines.append(",".join(vals))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header(line):
    parts = line.strip().split()
    if len(parts) != 4 or parts[0] != "#" or parts[1] != "complex_matrix":
        raise ParseError("malformed header, expected '# complex_matrix rows=<K> cols=<N>'", 1)
    dims = {}
    for token in parts[2:]:
        key, _, val = token.partition("=")
        if key not in ("rows", "cols") or not val.isdigit():
            raise ParseError(f"bad header field {token!r}", 1)
        dims[key] = int(val)
    if set(dims) != {"rows", "cols"} or dims["rows"] < 1 or dims["cols"] < 1:
        raise ParseError("header must give positive rows and cols", 1)
    return dims["rows"], dims["cols"]


def read_complex_matrix(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    K, N = _parse_header(lines[0])
    data = [(i + 2, ln) for i, ln in enumerate(lines[1:]) if ln.strip()]
    if len(data) != K:
        lineno = data[K][0] if len(data) > K else len(lines) + 1
        raise ParseError(f"expected {K} data rows, found {len(data)}", lineno)
    H = np.empty((K, N), dtype=complex)
    for k, (lineno, ln) in enumerate(data):
        fields = ln.split(",")
        if len(fields) != 2 * N:
            raise ParseError(f"expected {2 * N} values, found {len(fields)}", lineno)
        try:
            vals = np.array([float(f) for f in fields])
        except ValueError as exc:
            raise ParseError(f"unparseable value ({exc})", lineno) from None
        if not np.all(np.isfinite(vals)):
            raise ParseError("non-finite value", lineno)
        H[k] = vals[0::2] + 1j * vals[1::2]
    return H


def load_channel(path, noise_variance=DEFAULT_NOISE_VARIANCE, check_rank=True):
    """Read a channel file and build its ChannelSet."""
    H = read_complex_matrix(path)
    return ChannelSet.from_matrix(H, noise_variance, check_rank=check_rank)
