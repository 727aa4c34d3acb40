"""TX chain and RX front end: numerology, 64QAM mapping, resource-grid
assembly, OFDM modulation/demodulation, preamble framing and timing sync.

Grid layout convention: cells[symbol, subcarrier]; data cells are filled in
raster order (symbol-major, subcarrier-minor), skipping pilot cells.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import dsp
from .dsp import ComplexBuffer
from .errors import FramingError, ParameterError, SyncNotFoundError

SYNC_PEAK_TO_MEDIAN = 10.0


@dataclass(frozen=True)
class Numerology:
    fft_size: int = 128
    n_subcarriers: int = 100
    scs_hz: float = 15e3
    cp_len_samples: int = 6
    n_symbols_per_tti: int = 14
    pilot_sc_stride: int = 4
    pilot_symbol_index: int = 1  # 0-based second symbol
    bits_per_qam_symbol: int = 6
    upsample_factor: int = 16
    n_tx: int = 1
    n_rx: int = 1
    gap_len_samples: int = 500
    preamble_root: int = 29

    def __post_init__(self):
        if self.n_subcarriers > self.fft_size:
            raise ParameterError("n_subcarriers must be <= fft_size")
        if not 0 <= self.pilot_symbol_index < self.n_symbols_per_tti:
            raise ParameterError("pilot_symbol_index out of range")

    @property
    def baseband_rate_hz(self) -> float:
        return self.fft_size * self.scs_hz

    @property
    def upsampled_rate_hz(self) -> float:
        return self.baseband_rate_hz * self.upsample_factor

    @property
    def symbol_len(self) -> int:
        return self.fft_size + self.cp_len_samples

    @property
    def n_pilots(self) -> int:
        return -(-self.n_subcarriers // self.pilot_sc_stride)

    @property
    def pilot_subcarriers(self) -> np.ndarray:
        return np.arange(0, self.n_subcarriers, self.pilot_sc_stride)

    @property
    def n_data_cells(self) -> int:
        return self.n_symbols_per_tti * self.n_subcarriers - self.n_pilots

    @property
    def bits_per_tti(self) -> int:
        return self.n_data_cells * self.bits_per_qam_symbol

    @property
    def preamble_len(self) -> int:
        """Baseband length of the preamble symbol (CP included)."""
        return self.symbol_len

    @property
    def modulated_len(self) -> int:
        """Baseband length of preamble + TTI symbols (gap excluded)."""
        return self.symbol_len * (1 + self.n_symbols_per_tti)

    @property
    def burst_len(self) -> int:
        """Baseband length of a full burst including the silence gap."""
        return self.modulated_len + self.gap_len_samples

    def subcarrier_bins(self) -> np.ndarray:
        """FFT bin index for each subcarrier: bins -50..-1, +1..+50 around a
        nulled DC (default numerology), i.e. a symmetric split."""
        half = self.n_subcarriers // 2
        offsets = np.where(
            np.arange(self.n_subcarriers) < half,
            np.arange(self.n_subcarriers) - half,
            np.arange(self.n_subcarriers) - half + 1,
        )
        return offsets % self.fft_size

    def subcarrier_freqs_hz(self) -> np.ndarray:
        """Absolute baseband frequency of each subcarrier."""
        half = self.n_subcarriers // 2
        offsets = np.where(
            np.arange(self.n_subcarriers) < half,
            np.arange(self.n_subcarriers) - half,
            np.arange(self.n_subcarriers) - half + 1,
        )
        return offsets * self.scs_hz

    def pilot_mask(self) -> np.ndarray:
        mask = np.zeros((self.n_symbols_per_tti, self.n_subcarriers), dtype=bool)
        mask[self.pilot_symbol_index, self.pilot_subcarriers] = True
        return mask


@dataclass
class ResourceGrid:
    """One TTI of complex cells plus the pilot/data role mask."""

    cells: np.ndarray  # complex64 [n_symbols, n_subcarriers]
    pilot_mask: np.ndarray  # bool, same shape

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.complex64)
        self.pilot_mask = np.asarray(self.pilot_mask, dtype=bool)
        if self.cells.shape != self.pilot_mask.shape:
            raise FramingError("cells and pilot_mask shapes differ")

    @property
    def shape(self):
        return self.cells.shape

    def data_cells(self) -> np.ndarray:
        """Data-cell values in raster order."""
        return self.cells[~self.pilot_mask]


@dataclass
class PilotReference:
    """Unit-modulus QPSK pilot symbols, deterministic from a seed."""

    values: np.ndarray
    seed: int

    @classmethod
    def from_seed(cls, seed: int, num: Numerology) -> "PilotReference":
        rng = dsp.seeded_rng(seed, stream_id=0xB117)
        quad = rng.integers(0, 4, size=num.n_pilots)
        values = np.exp(1j * (np.pi / 4 + np.pi / 2 * quad)).astype(np.complex64)
        return cls(values=values, seed=seed)


@lru_cache(maxsize=1)
def _qam64_tables():
    """(points[64], bits[64, 6]) of the TS38.211 Gray-coded 64QAM mapping."""
    bits = ((np.arange(64)[:, None] >> np.arange(5, -1, -1)) & 1).astype(np.int8)
    b = 1 - 2 * bits.astype(np.float64)
    re = b[:, 0] * (4 - b[:, 2] * (2 - b[:, 4]))
    im = b[:, 1] * (4 - b[:, 3] * (2 - b[:, 5]))
    points = (re + 1j * im) / np.sqrt(42.0)
    return points.astype(np.complex64), bits


def qam64_points() -> np.ndarray:
    return _qam64_tables()[0]


def qam64_bit_table() -> np.ndarray:
    return _qam64_tables()[1]


def qam64_map(bits: np.ndarray) -> np.ndarray:
    """Map bits (0/1 array) to unit-average-energy 64QAM symbols."""
    bits = np.asarray(bits).ravel()
    if len(bits) % 6 != 0:
        raise FramingError(f"bit count {len(bits)} not divisible by 6")
    idx = bits.reshape(-1, 6).astype(np.int64) @ (1 << np.arange(5, -1, -1))
    return qam64_points()[idx]


def qam64_demap_hard(symbols: np.ndarray) -> np.ndarray:
    """Nearest-point hard demapping back to bits."""
    symbols = np.asarray(symbols).ravel()
    points = qam64_points()
    idx = np.argmin(np.abs(symbols[:, None] - points[None, :]), axis=1)
    return qam64_bit_table()[idx].ravel().astype(np.uint8)


def build_grid(bits: np.ndarray, pilots: PilotReference, num: Numerology) -> ResourceGrid:
    bits = np.asarray(bits).ravel()
    if len(bits) != num.bits_per_tti:
        raise FramingError(
            f"expected {num.bits_per_tti} bits for this numerology, got {len(bits)}"
        )
    mask = num.pilot_mask()
    cells = np.zeros(mask.shape, dtype=np.complex64)
    cells[~mask] = qam64_map(bits)
    cells[mask] = pilots.values
    return ResourceGrid(cells=cells, pilot_mask=mask)


def _symbols_to_waveform(freq_symbols: np.ndarray, num: Numerology) -> np.ndarray:
    """IFFT each row of per-symbol subcarrier values onto the used bins and
    prepend the cyclic prefix."""
    n_sym = freq_symbols.shape[0]
    spectrum = np.zeros((n_sym, num.fft_size), dtype=np.complex64)
    spectrum[:, num.subcarrier_bins()] = freq_symbols
    time = dsp.ifft(spectrum)
    with_cp = np.concatenate([time[:, -num.cp_len_samples:], time], axis=1)
    return with_cp.reshape(-1)


def make_preamble(num: Numerology) -> ComplexBuffer:
    """Zadoff-Chu sequence mapped onto the used subcarriers of one dedicated
    OFDM symbol (CP included), at baseband rate."""
    zc = dsp.zadoff_chu(num.n_subcarriers, num.preamble_root)
    wave = _symbols_to_waveform(zc[None, :], num)
    return ComplexBuffer(wave, num.baseband_rate_hz)


@lru_cache(maxsize=4)
def _upsampled_preamble_cached(num: Numerology) -> np.ndarray:
    pre = make_preamble(num)
    return dsp.resample(pre.samples, num.upsample_factor, "up")


def upsampled_preamble(num: Numerology) -> np.ndarray:
    """Time-domain rendering of the preamble at the upsampled rate, used as
    the correlation template."""
    return _upsampled_preamble_cached(num).copy()


def ofdm_modulate(grid: ResourceGrid, num: Numerology, preamble: ComplexBuffer = None) -> ComplexBuffer:
    """Full TX burst: preamble symbol, TTI symbols, silence gap; upsampled."""
    if grid.shape != (num.n_symbols_per_tti, num.n_subcarriers):
        raise FramingError(f"grid shape {grid.shape} does not match numerology")
    if preamble is None:
        preamble = make_preamble(num)
    tti_wave = _symbols_to_waveform(grid.cells, num)
    burst = np.concatenate(
        [
            preamble.samples,
            tti_wave,
            np.zeros(num.gap_len_samples, dtype=np.complex64),
        ]
    )
    up = dsp.resample(burst, num.upsample_factor, "up")
    return ComplexBuffer(up, num.upsampled_rate_hz)


def synchronize(rx: ComplexBuffer, num: Numerology, template: np.ndarray = None) -> int:
    """Locate the preamble start in an upsampled burst by maximum correlation.

    Raises SyncNotFoundError when peak/median falls below the threshold.
    """
    samples = rx.samples if isinstance(rx, ComplexBuffer) else np.asarray(rx)
    if template is None:
        template = upsampled_preamble(num)
    if len(samples) < len(template):
        raise FramingError("received buffer shorter than the preamble")
    mag, peak = dsp.cross_correlate(samples, template)
    med = float(np.median(mag))
    if med <= 0 or mag[peak] / med < SYNC_PEAK_TO_MEDIAN:
        raise SyncNotFoundError(
            f"correlation peak/median {mag[peak] / max(med, 1e-30):.2f} below "
            f"{SYNC_PEAK_TO_MEDIAN}"
        )
    return peak


def ofdm_demodulate(rx: ComplexBuffer, start: int, num: Numerology) -> ResourceGrid:
    """Decimate from the synchronized start, strip CPs, FFT, extract used bins."""
    samples = rx.samples if isinstance(rx, ComplexBuffer) else np.asarray(rx)
    need = num.modulated_len * num.upsample_factor
    if start < 0 or start + need > len(samples):
        raise FramingError(
            f"need {need} samples from index {start}, have {len(samples)}"
        )
    base = dsp.resample(samples[start : start + need], num.upsample_factor, "down")
    tti = base[num.preamble_len :].reshape(num.n_symbols_per_tti, num.symbol_len)
    no_cp = tti[:, num.cp_len_samples :]
    spectrum = dsp.fft(no_cp)
    cells = spectrum[:, num.subcarrier_bins()]
    return ResourceGrid(cells=cells, pilot_mask=num.pilot_mask())


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n).astype(np.uint8)
