"""Ring measurements to scattering amplitudes.

Two routes are provided. The angular-harmonic route transforms the scattered
ring data ``G - G0`` to double angular harmonics, divides out the analytic
spectrum of ``G0`` channel by channel and resynthesises ``f`` with the
analytic plane-wave spectra. The coordinate route applies the matrix
identity ``f = U_L^T [G0^-1 (G - G0) G0^-1] U_K`` with sampled plane waves;
it is kept as an independent cross-check.
"""

from dataclasses import dataclass, field

import numpy as np

from .background import RingSpectra
from .errors import TruncationError
from .model import AmplitudeGrid


@dataclass(frozen=True)
class TruncationPolicy:
    """Harmonic truncation and channel regularisation.

    ``Q=None`` means the ring Nyquist order ``M/2 - 1``. Channels with
    ``|g(q_y) g(q_x)| < g_floor * max|g|^2`` are zeroed.
    """

    Q: int = None
    g_floor: float = 1e-8

    def order(self, geom):
        Q = geom.nyquist if self.Q is None else int(self.Q)
        if Q > geom.nyquist:
            raise TruncationError(f"Q={Q} exceeds the ring Nyquist order {geom.nyquist}")
        if Q < 0:
            raise TruncationError("Q must be non-negative")
        return Q


@dataclass(frozen=True, eq=False)
class DoubleSpectrum:
    """Double angular harmonics ``values[q + Q, q' + Q]``, ``|q|, |q'| <= Q``."""

    Q: int
    values: np.ndarray
    zeroed: tuple = field(default=())

    def __post_init__(self):
        n = 2 * self.Q + 1
        if np.shape(self.values) != (n, n):
            raise ValueError(f"spectrum must be {n}x{n}")

    def __getitem__(self, qq):
        q, qp = qq
        return self.values[q + self.Q, qp + self.Q]

    @property
    def orders(self):
        return np.arange(-self.Q, self.Q + 1)

    def flipped(self):
        """``S(-q, -q')`` on the same lattice."""
        return self.values[::-1, ::-1]


def _dft_matrix(M, Q):
    phi = 2.0 * np.pi * np.arange(M) / M
    q = np.arange(-Q, Q + 1)
    return np.exp(-1j * q[:, None] * phi[None, :])


def ring_double_dft(samples, Q):
    """``(1/M^2) sum_{m,n} g(phi_m, phi_n) exp(-i q phi_m) exp(-i q' phi_n)``."""
    g = np.asarray(samples, dtype=complex)
    M = g.shape[0]
    if g.shape != (M, M):
        raise ValueError("ring samples must be square")
    if Q > M // 2 - 1:
        raise TruncationError(f"Q={Q} exceeds the ring Nyquist order {M // 2 - 1}")
    F = _dft_matrix(M, Q)
    return DoubleSpectrum(Q, F @ g @ F.T / M**2)


def ring_double_idft(spec, M):
    """Synthesise ``sum_{q,q'} S(q,q') exp(i q phi_m) exp(i q' phi_n)``."""
    F = _dft_matrix(M, spec.Q).conj()
    return F.T @ spec.values @ F


def phi_spectrum_solve(Gspec, k, geom, trunc=TruncationPolicy(), G0spec=None):
    """Harmonics of the intermediate kernel ``Phi`` from those of ``G - G0``.

    ``Gspec`` holds the double spectrum of the scattered data ``G - G0``
    (pass the spectrum of the full ``G`` together with ``G0spec`` to have the
    difference formed here). Because ``G0``'s spectrum is ``g(q)`` on the
    anti-diagonal ``q_x = -q_y``, the ring equation decouples into
    ``(2 pi R0)^2 g(q_y) Phi(q_y, q_x) g(q_x) = dG(q_y, q_x)``.
    """
    Q = Gspec.Q
    if Q > trunc.order(geom):
        raise TruncationError(f"spectrum order {Q} exceeds policy order {trunc.order(geom)}")
    dG = Gspec.values if G0spec is None else Gspec.values - G0spec.values
    g = RingSpectra(k, geom, Q).g
    gg = g[:, None] * g[None, :]
    keep = np.abs(gg) >= trunc.g_floor * np.max(np.abs(g)) ** 2
    out = np.zeros_like(dG)
    out[keep] = dG[keep] / ((2.0 * np.pi * geom.R0) ** 2 * gg[keep])
    q = np.arange(-Q, Q + 1)
    zeroed = tuple((int(q[i]), int(q[j])) for i, j in np.argwhere(~keep))
    return DoubleSpectrum(Q, out, zeroed)


def amplitude_from_phi(phi_spec, phis, phis_prime, k, geom):
    """``f(phi, phi') = R0^2 sum u0(q', phi'+pi) Phi(-q', -q'') u0(q'', phi)``."""
    phis = np.asarray(phis, dtype=float)
    phis_prime = np.asarray(phis_prime, dtype=float)
    rs = RingSpectra(k, geom, phi_spec.Q)
    U_out = rs.planewave(phis_prime + np.pi)  # [q', phi']
    U_in = rs.planewave(phis)  # [q'', phi]
    fT = geom.R0**2 * (U_out.T @ phi_spec.flipped() @ U_in)  # [phi', phi]
    return AmplitudeGrid(phis, phis_prime, fT.T, k)


def near_to_far(bf, phis=None, phis_prime=None, trunc=TruncationPolicy()):
    """Angular-harmonic route from ring data to ``f`` on the given angles
    (ring angles by default)."""
    geom = bf.geom
    phis = geom.angles if phis is None else phis
    phis_prime = phis if phis_prime is None else phis_prime
    Q = trunc.order(geom)
    spec = ring_double_dft(bf.G_sc, Q)
    phi_spec = phi_spectrum_solve(spec, bf.k, geom, trunc)
    f = amplitude_from_phi(phi_spec, phis, phis_prime, bf.k, geom)
    f.meta["zeroed_channels"] = len(phi_spec.zeroed)
    return f


def ring_green_operator(k, geom, trunc=TruncationPolicy()):
    """Band-limited circulant ``G0(y_m, y_n) = sum_{|q|<=Q} g(q) exp(i q (phi_m - phi_n))``."""
    Q = trunc.order(geom)
    g = RingSpectra(k, geom, Q).g
    q = np.arange(-Q, Q + 1)
    phi = geom.angles
    E = np.exp(1j * phi[:, None] * q[None, :])
    return (E * g[None, :]) @ E.conj().T


def amplitude_coordinate_path(bf, geom, k, phis=None, phis_prime=None, trunc=TruncationPolicy()):
    """Matrix route ``f = U_L^T [G0^-1 (G - G0) G0^-1] U_K``.

    ``G0`` is the band-limited ring operator; its inverse is the SVD
    pseudo-inverse cut at the policy floor. The arc-length weights
    ``R0 * 2pi/M`` cancel between the ring equation and the synthesis. The
    condition number of the retained band is stored in ``meta``.
    """
    phis = geom.angles if phis is None else np.asarray(phis, dtype=float)
    phis_prime = phis if phis_prime is None else np.asarray(phis_prime, dtype=float)
    G0 = ring_green_operator(k, geom, trunc)
    s = np.linalg.svd(G0, compute_uv=False)
    rcond = np.sqrt(trunc.g_floor)
    G0inv = np.linalg.pinv(G0, rcond=rcond)
    kept = s[s > rcond * s[0]]
    y = geom.points
    UK = np.exp(1j * k.k0 * (y @ np.stack([np.cos(phis), np.sin(phis)])))
    UL = np.exp(-1j * k.k0 * (y @ np.stack([np.cos(phis_prime), np.sin(phis_prime)])))
    core = G0inv @ bf.G_sc @ G0inv
    fT = UL.T @ core @ UK / (2.0 * np.pi) ** 2  # [l, k]
    f = AmplitudeGrid(phis, phis_prime, fT.T, k)
    f.meta["condition"] = float(kept[0] / kept[-1])
    return f
