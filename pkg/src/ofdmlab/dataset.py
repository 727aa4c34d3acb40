"""Capture/replay dataset files, the gap-based SINR meter, and end-to-end TTI
capture through the time-domain channel path.

Container layout (little-endian, bit-exact):
  header: magic "OTAD", version u16=1, fft u16, n_sc u16, n_sym u16, cp u16,
          pilot_stride u16, pilot_sym u16, bits_per_sym u8, pad u8, n_tti u32,
          flags u32 (bit0 = waveform present), seed u64,
          scenario JSON length u32 + UTF-8 bytes
  record: tti_index u32, sinr f32, n_bits u32, packed bits (MSB-first,
          zero-padded to a byte), grid as n_sym*n_sc (f32 re, f32 im) pairs
          in symbol-major order, optional waveform (n u32 + f32 pairs)
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import channel as chan
from . import frame
from .dsp import ComplexBuffer, seeded_rng
from .errors import FormatError, ParameterError, SyncNotFoundError
from .frame import Numerology, PilotReference, ResourceGrid

MAGIC = b"OTAD"
VERSION = 1
FLAG_WAVEFORM = 1
SINR_CLAMP_DB = -20.0
_GAP_GUARD = 100  # baseband samples skipped at the start of the gap
_GAP_TAIL_GUARD = 50


@dataclass
class TtiRecord:
    tti_index: int
    sinr_db: float
    bits: np.ndarray  # uint8 0/1, length = numerology capacity
    grid: ResourceGrid  # post-sync, post-FFT
    waveform: np.ndarray | None = None


@dataclass
class DatasetHeader:
    numerology: Numerology
    n_tti: int
    flags: int
    seed: int
    scenario: dict

    @property
    def has_waveform(self) -> bool:
        return bool(self.flags & FLAG_WAVEFORM)


def measure_sinr(burst, num: Numerology):
    """Wideband SINR from one synchronized burst at the upsampled rate.

    Signal+noise power over the modulated region (preamble + TTI symbols),
    noise power over the interior of the silence gap; guard samples at the
    gap edges absorb filter tails and delay-spread smear. Returns
    (sinr_db, warning) where warning flags a clamped measurement.
    """
    samples = burst.samples if isinstance(burst, ComplexBuffer) else np.asarray(burst)
    up = num.upsample_factor
    mod_end = num.modulated_len * up
    gap_lo = mod_end + _GAP_GUARD * up
    gap_hi = mod_end + (num.gap_len_samples - _GAP_TAIL_GUARD) * up
    if len(samples) < gap_hi:
        raise ParameterError(
            f"burst too short for SINR measurement: {len(samples)} < {gap_hi}"
        )
    p_mod = float(np.mean(np.abs(samples[:mod_end]) ** 2))
    p_gap = float(np.mean(np.abs(samples[gap_lo:gap_hi]) ** 2))
    if p_gap <= 0:
        return 90.0, False  # numerically noise-free
    if p_mod <= p_gap:
        return SINR_CLAMP_DB, True
    sinr = 10.0 * np.log10((p_mod - p_gap) / p_gap)
    return max(float(sinr), SINR_CLAMP_DB), False


def pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(raw: bytes, n_bits: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:n_bits]


_HEADER_FMT = "<4sHHHHHHHBBIIQ"


def _write_header(fh, header: DatasetHeader):
    num = header.numerology
    scenario_json = json.dumps(header.scenario, sort_keys=True).encode()
    fh.write(struct.pack(
        _HEADER_FMT, MAGIC, VERSION,
        num.fft_size, num.n_subcarriers, num.n_symbols_per_tti,
        num.cp_len_samples, num.pilot_sc_stride, num.pilot_symbol_index,
        num.bits_per_qam_symbol, 0, header.n_tti, header.flags, header.seed,
    ))
    fh.write(struct.pack("<I", len(scenario_json)))
    fh.write(scenario_json)


def _read_header(fh) -> DatasetHeader:
    size = struct.calcsize(_HEADER_FMT)
    raw = fh.read(size)
    if len(raw) < size:
        raise FormatError("truncated header", offset=len(raw))
    (magic, version, fft, n_sc, n_sym, cp, stride, pilot_sym, bps, _pad,
     n_tti, flags, seed) = struct.unpack(_HEADER_FMT, raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    (jlen,) = struct.unpack("<I", fh.read(4))
    scenario = json.loads(fh.read(jlen).decode())
    # fields the fixed header does not carry travel in the scenario JSON
    num = Numerology(fft_size=fft, n_subcarriers=n_sc, n_symbols_per_tti=n_sym,
                     cp_len_samples=cp, pilot_sc_stride=stride,
                     pilot_symbol_index=pilot_sym, bits_per_qam_symbol=bps,
                     upsample_factor=scenario.get("upsample_factor", 16),
                     gap_len_samples=scenario.get("gap_len_samples", 500))
    return DatasetHeader(numerology=num, n_tti=n_tti, flags=flags, seed=seed,
                         scenario=scenario)


def _write_record(fh, rec: TtiRecord, num: Numerology, with_waveform: bool):
    bits = np.asarray(rec.bits, dtype=np.uint8)
    fh.write(struct.pack("<IfI", rec.tti_index, float(rec.sinr_db), len(bits)))
    fh.write(pack_bits(bits))
    cells = np.ascontiguousarray(rec.grid.cells, dtype="<c8")
    fh.write(cells.tobytes())
    if with_waveform:
        wave = np.ascontiguousarray(
            rec.waveform if rec.waveform is not None else np.zeros(0), dtype="<c8")
        fh.write(struct.pack("<I", len(wave)))
        fh.write(wave.tobytes())


def write_dataset(path, header: DatasetHeader, records):
    """Write a dataset; `records` is any iterable of TtiRecord. The header's
    n_tti is patched after the records are streamed out."""
    n = 0
    with open(path, "wb") as fh:
        _write_header(fh, header)
        for rec in records:
            _write_record(fh, rec, header.numerology, header.has_waveform)
            n += 1
        header.n_tti = n
        fh.seek(0)
        _write_header(fh, header)


class DatasetReader:
    """Streaming dataset access with O(1) memory; validates on read."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "rb")
        try:
            self.header = _read_header(self._fh)
        except Exception:
            self._fh.close()
            raise
        self._start = self._fh.tell()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        self._fh.close()

    def __iter__(self):
        fh = self._fh
        fh.seek(self._start)
        num = self.header.numerology
        n_cells = num.n_symbols_per_tti * num.n_subcarriers
        expect_bits = num.bits_per_tti
        for i in range(self.header.n_tti):
            offset = fh.tell()
            head = fh.read(12)
            if len(head) < 12:
                raise FormatError("truncated record header", offset=offset, record_index=i)
            tti_index, sinr, n_bits = struct.unpack("<IfI", head)
            if n_bits != expect_bits:
                raise FormatError(
                    f"record bit count {n_bits} != numerology capacity {expect_bits}",
                    offset=offset, record_index=i)
            n_bytes = (n_bits + 7) // 8
            raw_bits = fh.read(n_bytes)
            raw_grid = fh.read(8 * n_cells)
            if len(raw_bits) < n_bytes or len(raw_grid) < 8 * n_cells:
                raise FormatError("truncated record payload", offset=offset, record_index=i)
            bits = unpack_bits(raw_bits, n_bits)
            cells = np.frombuffer(raw_grid, dtype="<c8").reshape(
                num.n_symbols_per_tti, num.n_subcarriers)
            waveform = None
            if self.header.has_waveform:
                raw_n = fh.read(4)
                if len(raw_n) < 4:
                    raise FormatError("truncated waveform length", offset=offset, record_index=i)
                (n_wave,) = struct.unpack("<I", raw_n)
                raw_wave = fh.read(8 * n_wave)
                if len(raw_wave) < 8 * n_wave:
                    raise FormatError("truncated waveform", offset=offset, record_index=i)
                waveform = np.frombuffer(raw_wave, dtype="<c8")
            grid = ResourceGrid(cells=cells.copy(), pilot_mask=num.pilot_mask())
            yield TtiRecord(tti_index=tti_index, sinr_db=sinr, bits=bits,
                            grid=grid, waveform=waveform)


def read_dataset(path) -> DatasetReader:
    return DatasetReader(path)


def scenario_descriptor(scenario: chan.ChannelScenario, pilot_seed: int,
                        channel_mode: str, num: Numerology = None) -> dict:
    num = num or Numerology()
    return {
        "model": scenario.model,
        "speed_range_mps": list(scenario.speed_range_mps),
        "delay_spread_range_s": list(scenario.delay_spread_range_s),
        "snr_range_db": list(scenario.snr_range_db),
        "carrier_hz": scenario.carrier_hz,
        "pilot_seed": pilot_seed,
        "channel_mode": channel_mode,
        "upsample_factor": num.upsample_factor,
        "gap_len_samples": num.gap_len_samples,
    }


def scenario_from_descriptor(desc: dict) -> chan.ChannelScenario:
    return chan.ChannelScenario(
        model=desc["model"],
        speed_range_mps=tuple(desc["speed_range_mps"]),
        delay_spread_range_s=tuple(desc["delay_spread_range_s"]),
        snr_range_db=tuple(desc["snr_range_db"]),
        carrier_hz=desc["carrier_hz"],
    )


_MAX_LEAD = 4000  # upsampled samples of random burst offset
_TAIL_PAD = 2000


def capture(scenario: chan.ChannelScenario, n_tti: int, seed: int, out_path,
            num: Numerology = None, pilot_seed: int = 0,
            channel_mode: str = "tdl", store_waveform: bool = False,
            progress=None):
    """Generate n_tti end-to-end TTIs (TX -> time-domain channel -> noise ->
    sync -> demod) and write them to a dataset file.

    channel_mode: "tdl" (fading + noise), "awgn" (noise only), or "none"
    (clean loopback). TTIs that fail synchronization are skipped and listed
    in a sidecar manifest.
    """
    num = num or Numerology()
    pilots = PilotReference.from_seed(pilot_seed, num)
    template = frame.upsampled_preamble(num)
    up = num.upsample_factor
    duration = (num.burst_len + (_MAX_LEAD + _TAIL_PAD) // up) / num.baseband_rate_hz
    skipped = []

    def gen():
        for i in range(n_tti):
            rng = seeded_rng(seed, stream_id=i)
            model, speed, ds, snr = chan.draw_scenario(scenario, rng)
            bits = frame.random_bits(rng, num.bits_per_tti)
            grid = frame.build_grid(bits, pilots, num)
            wave = frame.ofdm_modulate(grid, num)
            lead = int(rng.integers(0, _MAX_LEAD))
            padded = np.concatenate([
                np.zeros(lead, dtype=np.complex64),
                wave.samples,
                np.zeros(_TAIL_PAD, dtype=np.complex64),
            ])
            buf = ComplexBuffer(padded, num.upsampled_rate_hz)
            if channel_mode == "tdl":
                profile = chan.get_profile(model)
                doppler = chan.doppler_from_speed(speed, scenario.carrier_hz)
                realization = chan.realize(profile, ds, doppler, duration, rng)
                buf = chan.apply_time_domain(realization, buf)
            mod_slice = slice(lead, lead + num.modulated_len * up)
            if channel_mode in ("tdl", "awgn"):
                buf, _ = chan.add_awgn(buf, snr, rng, signal_slice=mod_slice)
            try:
                start = frame.synchronize(buf, num, template=template)
                rx_grid = frame.ofdm_demodulate(buf, start, num)
            except SyncNotFoundError:
                skipped.append(i)
                continue
            sinr_db, _warn = measure_sinr(buf.samples[start:], num)
            waveform = buf.samples[start:start + num.burst_len * up] if store_waveform else None
            if progress is not None and (i + 1) % 100 == 0:
                progress(i + 1, n_tti)
            yield TtiRecord(tti_index=i, sinr_db=sinr_db, bits=bits,
                            grid=rx_grid, waveform=waveform)

    header = DatasetHeader(
        numerology=num, n_tti=0,
        flags=FLAG_WAVEFORM if store_waveform else 0,
        seed=seed,
        scenario=scenario_descriptor(scenario, pilot_seed, channel_mode, num),
    )
    write_dataset(out_path, header, gen())
    manifest = {
        "n_requested": n_tti,
        "n_written": header.n_tti,
        "skipped": skipped,
    }
    with open(str(out_path) + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    return header, manifest
