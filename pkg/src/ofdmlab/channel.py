"""3GPP TDL tapped-delay-line channel simulation.

Tap tables are shipped as a checksummed text file (models A-E). Each NLOS tap
fades as a sum-of-sinusoids Rayleigh process with the classical Jakes Doppler
spectrum; TDL-D/E carry a Rician first tap. Delay-spread scaling is exact:
profiles are stored with unit power-weighted RMS delay spread, so multiplying
by the requested DS yields exactly that DS.
"""

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .dsp import ComplexBuffer
from .errors import FormatError, ParameterError
from .frame import Numerology, ResourceGrid

SPEED_OF_LIGHT = 299792458.0
TDL_MODELS = ("TDL-A", "TDL-B", "TDL-C", "TDL-D", "TDL-E")
DS_MIN_S = 10e-9
DS_MAX_S = 10e-6


@dataclass(frozen=True)
class TdlProfile:
    name: str
    delays: np.ndarray  # unit-RMS-delay-spread normalized, sorted
    powers: np.ndarray  # linear, sum to 1
    los_k_factor_db: float | None = None  # Rician K of tap 0 (TDL-D/E)

    @property
    def n_taps(self) -> int:
        return len(self.delays)


def rms_delay_spread(delays: np.ndarray, powers: np.ndarray) -> float:
    """Power-weighted RMS delay spread of a PDP."""
    p = powers / powers.sum()
    mean = float(np.dot(p, delays))
    return math.sqrt(max(float(np.dot(p, (delays - mean) ** 2)), 0.0))


def _parse_profiles(text: str) -> dict:
    lines = text.splitlines()
    data_lines = [ln for ln in lines if not ln.startswith("#")]
    checksum_line = next((ln for ln in lines if ln.startswith("# checksum:")), None)
    if checksum_line is None:
        raise FormatError("profile table missing checksum line")
    want = checksum_line.split("sha256:")[1].strip()
    body = "\n".join(data_lines) + "\n"
    got = hashlib.sha256(body.encode()).hexdigest()
    if got != want:
        raise FormatError(f"profile table checksum mismatch: {got} != {want}")

    profiles = {}
    name, k_db, delays, powers_db = None, None, [], []

    def finish():
        if name is None:
            return
        d = np.asarray(delays, dtype=np.float64)
        p = 10.0 ** (np.asarray(powers_db, dtype=np.float64) / 10.0)
        p /= p.sum()
        order = np.argsort(d, kind="stable")
        d, p = d[order], p[order]
        d = d / rms_delay_spread(d, p)  # unit RMS DS
        profiles[name] = TdlProfile(name=name, delays=d, powers=p, los_k_factor_db=k_db)

    for ln in data_lines:
        ln = ln.strip()
        if not ln:
            continue
        if ln.startswith("PROFILE"):
            finish()
            _, pname, kpart = ln.split()
            kval = kpart.split("=")[1]
            name = pname
            k_db = None if kval == "none" else float(kval)
            delays, powers_db = [], []
        else:
            dl, pw = ln.split()
            delays.append(float(dl))
            powers_db.append(float(pw))
    finish()
    return profiles


@lru_cache(maxsize=1)
def load_profiles() -> dict:
    """Load and checksum-validate the embedded TDL A-E tap tables."""
    text = resources.files("ofdmlab.data").joinpath("tdl_profiles.txt").read_text()
    return _parse_profiles(text)


def get_profile(name: str) -> TdlProfile:
    profiles = load_profiles()
    if name not in profiles:
        raise ParameterError(f"unknown channel model {name!r}; have {sorted(profiles)}")
    return profiles[name]


@dataclass(frozen=True)
class ChannelScenario:
    """Randomized channel parameter space for training/capture."""

    model: str = "TDL-B"  # one of TDL_MODELS or "mixture"
    speed_range_mps: tuple = (0.0, 30.0)
    delay_spread_range_s: tuple = (50e-9, 1000e-9)
    snr_range_db: tuple = (10.0, 35.0)
    carrier_hz: float = 433.92e6

    def __post_init__(self):
        for lo, hi in (self.speed_range_mps, self.delay_spread_range_s, self.snr_range_db):
            if lo > hi:
                raise ParameterError(f"range lo {lo} > hi {hi}")
        if self.carrier_hz <= 0:
            raise ParameterError("carrier_hz must be positive")
        if self.model != "mixture" and self.model not in TDL_MODELS:
            raise ParameterError(f"model must be 'mixture' or one of {TDL_MODELS}")


def draw_scenario(sc: ChannelScenario, rng: np.random.Generator):
    """One independent (model, speed, delay spread, snr) draw."""
    model = sc.model
    if model == "mixture":
        model = TDL_MODELS[rng.integers(0, len(TDL_MODELS))]
    speed = float(rng.uniform(*sc.speed_range_mps))
    ds = float(rng.uniform(*sc.delay_spread_range_s))
    snr = float(rng.uniform(*sc.snr_range_db))
    return model, speed, ds, snr


def doppler_from_speed(speed_mps: float, carrier_hz: float) -> float:
    if speed_mps < 0:
        raise ParameterError("speed must be >= 0")
    return speed_mps * carrier_hz / SPEED_OF_LIGHT


class ChannelRealization:
    """One TDL draw: scaled tap delays plus per-tap fading processes.

    NLOS taps use n_sinusoids equal-power sinusoids with random arrival angles
    and phases (Jakes spectrum); a Rician tap adds a line-of-sight component
    with its own random arrival angle.
    """

    def __init__(self, profile: TdlProfile, ds_s: float, doppler_hz: float,
                 rng: np.random.Generator, n_sinusoids: int = 32):
        self.profile = profile
        self.ds_s = ds_s
        self.doppler_hz = doppler_hz
        self.tap_delays_s = profile.delays * ds_s
        self.tap_powers = profile.powers
        n_taps = profile.n_taps
        angles = rng.uniform(0, 2 * np.pi, size=(n_taps, n_sinusoids))
        self._sin_freqs = doppler_hz * np.cos(angles)
        self._sin_phases = rng.uniform(0, 2 * np.pi, size=(n_taps, n_sinusoids))
        self._n_sin = n_sinusoids
        if profile.los_k_factor_db is not None:
            k = 10.0 ** (profile.los_k_factor_db / 10.0)
            self._los_scale = math.sqrt(k / (k + 1.0))
            self._nlos_scale = math.sqrt(1.0 / (k + 1.0))
            self._los_freq = doppler_hz * math.cos(rng.uniform(0, 2 * np.pi))
            self._los_phase = rng.uniform(0, 2 * np.pi)
        else:
            self._los_scale = 0.0
            self._nlos_scale = 1.0

    def gains(self, t: np.ndarray) -> np.ndarray:
        """Complex tap gains, shape [n_taps, len(t)]. E[sum |g|^2] = 1."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        phase = (2 * np.pi * self._sin_freqs[:, :, None] * t[None, None, :]
                 + self._sin_phases[:, :, None])
        diffuse = np.exp(1j * phase).sum(axis=1) / math.sqrt(self._n_sin)
        amp = np.sqrt(self.tap_powers)[:, None]
        g = amp * diffuse
        if self._los_scale:
            los = np.exp(1j * (2 * np.pi * self._los_freq * t + self._los_phase))
            g[0] = amp[0, 0] * (self._los_scale * los + self._nlos_scale * diffuse[0])
        return g

    def freq_response(self, freqs_hz: np.ndarray, times_s: np.ndarray) -> np.ndarray:
        """H[time, freq] = sum_p g_p(t) exp(-j 2 pi f tau_p)."""
        g = self.gains(times_s)  # [P, T]
        steer = np.exp(-2j * np.pi * np.outer(self.tap_delays_s, freqs_hz))  # [P, F]
        return g.T @ steer


def realize(profile: TdlProfile, ds_s: float, doppler_hz: float, duration_s: float,
            rng: np.random.Generator, n_sinusoids: int = 32) -> ChannelRealization:
    """Draw one channel realization. `duration_s` is informational (the
    sum-of-sinusoids process is defined for all t)."""
    if not DS_MIN_S <= ds_s <= DS_MAX_S:
        raise ParameterError(f"delay spread {ds_s} outside [{DS_MIN_S}, {DS_MAX_S}]")
    if doppler_hz < 0 or duration_s <= 0:
        raise ParameterError("doppler_hz must be >= 0 and duration_s > 0")
    return ChannelRealization(profile, ds_s, doppler_hz, rng, n_sinusoids)


def symbol_times(num: Numerology) -> np.ndarray:
    """Midpoint time of each TTI symbol within a burst (preamble first)."""
    fs = num.baseband_rate_hz
    starts = num.preamble_len + np.arange(num.n_symbols_per_tti) * num.symbol_len
    return (starts + num.cp_len_samples + num.fft_size / 2.0) / fs


def apply_freq_domain(realization: ChannelRealization, grid: ResourceGrid,
                      num: Numerology) -> tuple[ResourceGrid, np.ndarray]:
    """Per-resource-element multiplication y = H * x; channel held constant
    within each symbol. Returns the faded grid and H for genie use."""
    h = realization.freq_response(num.subcarrier_freqs_hz(), symbol_times(num))
    cells = (grid.cells * h).astype(np.complex64)
    return ResourceGrid(cells=cells, pilot_mask=grid.pilot_mask.copy()), h


_GAIN_EVAL_STRIDE = 2048  # upsampled samples between fading-process evaluations


def apply_time_domain(realization: ChannelRealization, wave: ComplexBuffer) -> ComplexBuffer:
    """Time-varying FIR at the upsampled rate; tap delays quantized to the
    sample grid. Fading gains are evaluated on a coarse time grid and
    linearly interpolated (Doppler ≪ sample rate)."""
    x = wave.samples
    fs = wave.rate_hz
    n = len(x)
    delays = np.round(realization.tap_delays_s * fs).astype(int)
    coarse_idx = np.arange(0, n + _GAIN_EVAL_STRIDE, _GAIN_EVAL_STRIDE)
    g_coarse = realization.gains(coarse_idx / fs)  # [P, C]
    out = np.zeros(n, dtype=np.complex128)
    sample_idx = np.arange(n)
    for p, d in enumerate(delays):
        g = np.interp(sample_idx, coarse_idx, g_coarse[p].real) + 1j * np.interp(
            sample_idx, coarse_idx, g_coarse[p].imag
        )
        if d == 0:
            out += g * x
        elif d < n:
            out[d:] += g[d:] * x[: n - d]
    return ComplexBuffer(out.astype(np.complex64), fs)


def _noise_like(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    s = math.sqrt(variance / 2.0)
    return (rng.normal(0.0, s, size=shape) + 1j * rng.normal(0.0, s, size=shape))


def add_awgn(target, snr_db: float, rng: np.random.Generator, signal_slice: slice = None):
    """Add complex AWGN so that signal power / noise power = 10^(snr/10).

    For a ResourceGrid the reference power is the mean cell power; for a
    waveform it is the mean power over `signal_slice` (default: the whole
    buffer). Returns (noisy object, true noise variance).
    """
    if isinstance(target, ResourceGrid):
        p_sig = float(np.mean(np.abs(target.cells) ** 2))
        if p_sig <= 0:
            raise ParameterError("zero-power grid")
        var = p_sig / 10.0 ** (snr_db / 10.0)
        noisy = target.cells + _noise_like(rng, target.cells.shape, var).astype(np.complex64)
        return ResourceGrid(cells=noisy, pilot_mask=target.pilot_mask.copy()), var

    samples = target.samples if isinstance(target, ComplexBuffer) else np.asarray(target)
    region = samples[signal_slice] if signal_slice is not None else samples
    p_sig = float(np.mean(np.abs(region) ** 2))
    if p_sig <= 0:
        raise ParameterError("zero-power signal region")
    var = p_sig / 10.0 ** (snr_db / 10.0)
    noisy = (samples + _noise_like(rng, len(samples), var)).astype(np.complex64)
    if isinstance(target, ComplexBuffer):
        return ComplexBuffer(noisy, target.rate_hz), var
    return noisy, var


def grid_noise_var_for_sinr(grid_signal_power: float, sinr_db: float, num: Numerology) -> float:
    """Per-resource-element noise variance equivalent to additive white noise
    at the upsampled rate measured at `sinr_db` by the silence-gap meter.

    White noise of waveform variance s2 lands on each FFT bin with variance
    s2 / upsample_factor; the waveform-domain signal power is (n_sc/fft) of
    the per-RE power.
    """
    r = num.n_subcarriers / num.fft_size
    return grid_signal_power * r / (num.upsample_factor * 10.0 ** (sinr_db / 10.0))


def add_awgn_grid_sinr(grid: ResourceGrid, sinr_db: float, num: Numerology,
                       rng: np.random.Generator):
    """Grid-domain noise injection calibrated to the waveform SINR convention,
    so freq-domain training data matches time-domain captures binned by the
    gap-based SINR meter."""
    p_sig = float(np.mean(np.abs(grid.cells) ** 2))
    if p_sig <= 0:
        raise ParameterError("zero-power grid")
    var = grid_noise_var_for_sinr(p_sig, sinr_db, num)
    noisy = grid.cells + _noise_like(rng, grid.cells.shape, var).astype(np.complex64)
    return ResourceGrid(cells=noisy, pilot_mask=grid.pilot_mask.copy()), var
