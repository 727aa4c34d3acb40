"""Conventional receiver: noise estimation, LS pilot channel estimation,
linear interpolation, LMMSE equalization and max-log LLR demapping.

LLR sign convention: positive means bit 0 is more likely.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, ParameterError, SingularityError
from .frame import (
    Numerology,
    PilotReference,
    ResourceGrid,
    qam64_bit_table,
    qam64_points,
)


@dataclass
class NoiseEstimate:
    sigma2: float  # per-resource-element noise variance
    method: str  # "gap" | "pilot-residual" | "genie" | "sinr"

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ParameterError("sigma2 must be >= 0")


def estimate_noise_gap(gap_samples: np.ndarray, num: Numerology) -> NoiseEstimate:
    """Noise variance from the silence gap, referred to the post-FFT per-RE
    domain. White noise of waveform variance s2 puts s2/upsample_factor on
    each FFT bin (unitary FFT, decimation filter with unity passband gain)."""
    gap_samples = np.asarray(gap_samples)
    if len(gap_samples) < 100:
        raise ParameterError(f"need >= 100 gap samples, got {len(gap_samples)}")
    s2_wave = float(np.mean(np.abs(gap_samples) ** 2))
    return NoiseEstimate(sigma2=s2_wave / num.upsample_factor, method="gap")


def estimate_noise_pilot_residual(grid: ResourceGrid, pilots: PilotReference,
                                  num: Numerology) -> NoiseEstimate:
    """Fallback for datasets lacking gap samples: residual against a smoothed
    LS estimate at the pilots."""
    y_p = grid.cells[num.pilot_symbol_index, num.pilot_subcarriers]
    if len(y_p) < 3:
        raise EstimationError("too few pilots for residual noise estimation")
    h_p = ls_estimate(y_p, pilots.values)
    kernel = np.array([0.25, 0.5, 0.25])
    h_smooth = np.convolve(h_p, kernel, mode="same")
    h_smooth[0] = 0.5 * (h_p[0] + h_p[1])
    h_smooth[-1] = 0.5 * (h_p[-1] + h_p[-2])
    resid = np.mean(np.abs(y_p - h_smooth * pilots.values) ** 2)
    return NoiseEstimate(sigma2=float(resid), method="pilot-residual")


def noise_from_sinr(grid: ResourceGrid, sinr_db: float, num: Numerology) -> NoiseEstimate:
    """Per-RE noise variance implied by a recorded gap-meter SINR.

    With waveform SINR q, grid signal power S and noise variance v obey
    mean|y|^2 = S + v, S = q * up * v / (n_sc/fft); solve for v.
    """
    p_tot = float(np.mean(np.abs(grid.cells) ** 2))
    r = num.n_subcarriers / num.fft_size
    q = 10.0 ** (sinr_db / 10.0)
    v = p_tot / (1.0 + num.upsample_factor * q / r)
    return NoiseEstimate(sigma2=v, method="sinr")


def ls_estimate(y_pilots: np.ndarray, x_pilots: np.ndarray) -> np.ndarray:
    """Per-pilot LS estimate h_p = y_p * conj(x_p) (unit-modulus pilots)."""
    return np.asarray(y_pilots) * np.conj(np.asarray(x_pilots))


@dataclass
class ChannelEstimate:
    h: np.ndarray  # complex [n_symbols, n_subcarriers]
    pilot_measured: np.ndarray  # bool mask of REs backed by a pilot measurement


def interpolate(pilot_estimates: np.ndarray, num: Numerology) -> ChannelEstimate:
    """Linear interpolation across frequency between pilots, nearest-value
    extrapolation beyond the edge pilots, constant across time."""
    pilot_estimates = np.asarray(pilot_estimates)
    if len(pilot_estimates) < 2:
        raise EstimationError("need >= 2 pilot estimates to interpolate")
    sc = np.arange(num.n_subcarriers)
    pos = num.pilot_subcarriers
    row = (np.interp(sc, pos, pilot_estimates.real)
           + 1j * np.interp(sc, pos, pilot_estimates.imag))
    h = np.broadcast_to(row, (num.n_symbols_per_tti, num.n_subcarriers)).copy()
    measured = np.zeros_like(h, dtype=bool)
    measured[num.pilot_symbol_index, pos] = True
    return ChannelEstimate(h=h, pilot_measured=measured)


def lmmse_equalize(grid: ResourceGrid, est: ChannelEstimate, noise: NoiseEstimate) -> np.ndarray:
    """SISO LMMSE: x_hat = conj(h) y / (|h|^2 + sigma^2)."""
    denom = np.abs(est.h) ** 2 + noise.sigma2
    if np.any(denom == 0):
        raise SingularityError("|h|^2 + sigma^2 vanished on some resource element")
    return np.conj(est.h) * grid.cells / denom


def demap_llr(x_hat: np.ndarray, est: ChannelEstimate, noise: NoiseEstimate) -> np.ndarray:
    """Max-log LLRs per resource element, shape [..., 6].

    Post-LMMSE model: x_hat = c x + CN(0, c s_eff) with c = |h|^2/(|h|^2+s2)
    and s_eff = s2/(|h|^2+s2), so distances are taken to the c-scaled
    constellation and divided by c*s_eff. Keeps hard decisions unbiased at
    every SNR.
    """
    h2 = np.abs(est.h) ** 2
    denom = h2 + noise.sigma2
    c = h2 / denom
    if noise.sigma2 > 0:
        s_eff = noise.sigma2 / denom
    else:
        # zero-forcing limit: distances decide, scale is irrelevant
        s_eff = np.full_like(c, 1e-12)
        c = np.ones_like(c)
    var = np.maximum(c * s_eff, 1e-30)
    if np.any(var <= 0):
        raise ParameterError("effective noise variance must be positive")

    points = qam64_points()
    bit_table = qam64_bit_table()  # [64, 6]
    d2 = np.abs(x_hat[..., None] - c[..., None] * points) ** 2  # [..., 64]
    llr = np.empty(x_hat.shape + (6,), dtype=np.float64)
    for k in range(6):
        zero_set = bit_table[:, k] == 0
        d0 = d2[..., zero_set].min(axis=-1)
        d1 = d2[..., ~zero_set].min(axis=-1)
        llr[..., k] = (d1 - d0) / var
    return llr


def hard_bits_from_llr(llr: np.ndarray, pilot_mask: np.ndarray) -> np.ndarray:
    """Sign decisions over data cells in raster order (positive LLR -> 0)."""
    data_llr = llr[~pilot_mask]
    return (data_llr < 0).astype(np.uint8).ravel()


def receive_classic(grid: ResourceGrid, pilots: PilotReference, num: Numerology,
                    noise: NoiseEstimate = None, sinr_db: float = None):
    """LS estimation -> interpolation -> LMMSE -> max-log demapping.

    Returns (llr [n_sym, n_sc, 6], hard data bits in raster order).
    """
    if noise is None:
        if sinr_db is not None:
            noise = noise_from_sinr(grid, sinr_db, num)
        else:
            noise = estimate_noise_pilot_residual(grid, pilots, num)
    y_p = grid.cells[num.pilot_symbol_index, num.pilot_subcarriers]
    est = interpolate(ls_estimate(y_p, pilots.values), num)
    x_hat = lmmse_equalize(grid, est, noise)
    llr = demap_llr(x_hat, est, noise)
    return llr, hard_bits_from_llr(llr, grid.pilot_mask)


def receive_genie(grid: ResourceGrid, h_true: np.ndarray, sigma2_true: float,
                  num: Numerology):
    """Equalize with the true channel and noise variance (benchmark bound)."""
    h = np.broadcast_to(np.asarray(h_true), grid.cells.shape)
    est = ChannelEstimate(h=h, pilot_measured=np.ones_like(grid.pilot_mask))
    noise = NoiseEstimate(sigma2=float(sigma2_true), method="genie")
    x_hat = lmmse_equalize(grid, est, noise)
    llr = demap_llr(x_hat, est, noise)
    return llr, hard_bits_from_llr(llr, grid.pilot_mask)
