"""Fully convolutional residual receiver: received TTI grid + pilot reference
in, per-bit LLRs out, trained on channel realizations generated on the fly.

The LLR sign convention matches the classic receiver (positive -> bit 0), so
both receivers share one hard-decision/BER pipeline.
"""

import json
import math
import struct
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn.functional as F

from . import channel as chan
from . import frame
from .dsp import seeded_rng
from .errors import FormatError, FramingError, NumericError, ParameterError
from .frame import Numerology, PilotReference, ResourceGrid

torch.set_num_threads(max(1, torch.get_num_threads()))

MODEL_MAGIC = b"DRXM"
MODEL_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    n_blocks: int = 6
    width: int = 32
    kernel: int = 3
    dilation_cycle: tuple = (1, 2, 4)
    ls_channels: bool = True  # append the interpolated LS channel estimate
    bits_per_cell: int = 6

    @property
    def in_channels(self) -> int:
        """Re/Im of y and of the pilot reference, plus the optional Re/Im
        of the frequency-interpolated LS channel estimate."""
        return 6 if self.ls_channels else 4


@dataclass
class TrainConfig:
    batch_size: int = 28
    weight_decay: float = 1e-3
    lr_start: float = 4e-4
    lr_decay: float = 0.6
    lr_decay_every: int = 8000
    lr_min: float = 2e-5
    max_iterations: int = 20000
    seed: int = 0
    snr_weighting: str = "uniform"  # "uniform" | "linear"
    val_every: int = 500
    overfit: bool = False

    def __post_init__(self):
        if min(self.batch_size, self.lr_start, self.lr_decay, self.lr_decay_every,
               self.lr_min, self.max_iterations) <= 0:
            raise ParameterError("all training parameters must be positive")
        if self.lr_min > self.lr_start:
            raise ParameterError("lr_min must be <= lr_start")
        if self.snr_weighting not in ("uniform", "linear"):
            raise ParameterError(f"unknown snr_weighting {self.snr_weighting!r}")


def lr_at(iteration: int, cfg: TrainConfig) -> float:
    """Staircase schedule: lr_start * decay^(iter // step), floored at lr_min."""
    if iteration < 0:
        raise ParameterError("iteration must be >= 0")
    return max(cfg.lr_min, cfg.lr_start * cfg.lr_decay ** (iteration // cfg.lr_decay_every))


def snr_weight(snr_db: float, mode: str) -> float:
    if mode == "uniform":
        return 1.0
    return float(np.clip((snr_db - 10.0) / 25.0, 0.2, 1.0))


class ResidualBlock(torch.nn.Module):
    """Pre-activation residual block; dilation applies on the subcarrier axis."""

    def __init__(self, width: int, kernel: int, dilation: int):
        super().__init__()
        pad = (kernel // 2, kernel // 2 * dilation)
        self.conv1 = torch.nn.Conv2d(width, width, kernel, padding=pad,
                                     dilation=(1, dilation))
        self.conv2 = torch.nn.Conv2d(width, width, kernel, padding=pad,
                                     dilation=(1, dilation))

    def forward(self, x):
        h = self.conv1(F.relu(x))
        h = self.conv2(F.relu(h))
        return x + h


class ReceiverNet(torch.nn.Module):
    """Shape-preserving CNN over (symbol, subcarrier); 6 LLRs per cell."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        pad = cfg.kernel // 2
        self.stem = torch.nn.Conv2d(cfg.in_channels, cfg.width, cfg.kernel, padding=pad)
        cycle = cfg.dilation_cycle
        self.blocks = torch.nn.ModuleList(
            [ResidualBlock(cfg.width, cfg.kernel, cycle[i % len(cycle)])
             for i in range(cfg.n_blocks)]
        )
        self.head = torch.nn.Conv2d(cfg.width, cfg.bits_per_cell, 1)

    def forward(self, x):
        x = self.stem(x)
        for block in self.blocks:
            x = block(x)
        out = self.head(x)
        if not torch.isfinite(out).all():
            for name, mod in self.named_modules():
                if isinstance(mod, torch.nn.Conv2d) and not torch.isfinite(mod.weight).all():
                    raise NumericError(f"non-finite parameters in layer {name}")
            raise NumericError("non-finite activations in network output")
        return out


def init_net(cfg: NetConfig, seed: int = 0, dtype=torch.float32) -> ReceiverNet:
    """He-normal initialized network, deterministic from the seed."""
    torch.manual_seed(seed)
    net = ReceiverNet(cfg).to(dtype)
    for mod in net.modules():
        if isinstance(mod, torch.nn.Conv2d):
            torch.nn.init.kaiming_normal_(mod.weight, nonlinearity="relu")
            torch.nn.init.zeros_(mod.bias)
    return net


def build_features(grid: ResourceGrid, pilots: PilotReference, num: Numerology,
                   ls_channels: bool = False) -> np.ndarray:
    """Float32 tensor [C, n_sym, n_sc]: Re/Im of y, Re/Im of the pilot
    reference (zero off the pilot REs); with `ls_channels` the per-pilot LS
    channel estimate y_p * conj(x_p), linearly interpolated across frequency
    and held constant across time, rides along as 2 extra planes."""
    if grid.shape != (num.n_symbols_per_tti, num.n_subcarriers):
        raise FramingError(f"grid shape {grid.shape} does not match numerology")
    pilot_plane = np.zeros(grid.shape, dtype=np.complex64)
    pilot_plane[num.pilot_symbol_index, num.pilot_subcarriers] = pilots.values
    planes = [grid.cells.real, grid.cells.imag,
              pilot_plane.real, pilot_plane.imag]
    if ls_channels:
        y_p = grid.cells[num.pilot_symbol_index, num.pilot_subcarriers]
        h_p = y_p * np.conj(pilots.values)
        sc = np.arange(num.n_subcarriers)
        row = (np.interp(sc, num.pilot_subcarriers, h_p.real)
               + 1j * np.interp(sc, num.pilot_subcarriers, h_p.imag))
        ls_plane = np.broadcast_to(row, grid.shape)
        planes += [ls_plane.real, ls_plane.imag]
    return np.stack(planes).astype(np.float32)


def bits_to_grid(bits: np.ndarray, num: Numerology) -> np.ndarray:
    """Scatter data bits into [6, n_sym, n_sc]; pilot cells are zero and must
    be masked out of any loss/BER computation."""
    mask = num.pilot_mask()
    flat = np.asarray(bits, dtype=np.float32).reshape(-1, num.bits_per_qam_symbol)
    out_t = np.zeros(mask.shape + (num.bits_per_qam_symbol,), dtype=np.float32)
    out_t[~mask] = flat
    return np.moveaxis(out_t, -1, 0)


def bce_loss(llr: torch.Tensor, bit_grid: torch.Tensor, data_mask: torch.Tensor,
             snr_db, weighting: str = "uniform") -> torch.Tensor:
    """Mean softplus-form BCE over data-RE bits, scaled by the SNR weight.

    llr: [B, 6, S, C]; bit_grid: same shape in {0,1}; data_mask: [B, 1, S, C].
    Positive LLR means bit 0, so the per-bit loss is softplus((2b-1) * llr).
    """
    if llr.shape != bit_grid.shape:
        raise FramingError(f"llr shape {tuple(llr.shape)} != bits {tuple(bit_grid.shape)}")
    per_bit = F.softplus((2.0 * bit_grid - 1.0) * llr)
    mask = data_mask.expand_as(per_bit)
    snr_db = torch.as_tensor(snr_db, dtype=llr.dtype)
    if snr_db.ndim == 0:
        w = snr_weight(float(snr_db), weighting)
        return per_bit[mask].mean() * w
    # per-sample weights, batch mean of per-sample means
    w = torch.tensor([snr_weight(float(s), weighting) for s in snr_db], dtype=llr.dtype)
    per_sample = (per_bit * mask).sum(dim=(1, 2, 3)) / mask.sum(dim=(1, 2, 3))
    return (per_sample * w).mean()


def forward_grid(net: ReceiverNet, grid: ResourceGrid, pilots: PilotReference,
                 num: Numerology) -> np.ndarray:
    """LLRs [n_sym, n_sc, 6] for one TTI (no grad)."""
    feats = build_features(grid, pilots, num, net.cfg.ls_channels)
    dtype = next(net.parameters()).dtype
    with torch.no_grad():
        x = torch.from_numpy(feats).unsqueeze(0).to(dtype)
        out = net(x)[0]  # [6, S, C]
    return out.permute(1, 2, 0).numpy().astype(np.float64)


def infer(net: ReceiverNet, grid: ResourceGrid, pilots: PilotReference,
          num: Numerology, tie_break_seed: int = 0):
    """(llr, hard data bits) for one TTI; exact-zero LLRs are tie-broken by a
    seeded coin so an all-zero network yields BER ~0.5 rather than bias."""
    llr = forward_grid(net, grid, pilots, num)
    data_llr = llr[~grid.pilot_mask].reshape(-1)
    bits = (data_llr < 0).astype(np.uint8)
    ties = data_llr == 0
    if ties.any():
        rng = seeded_rng(tie_break_seed, stream_id=0x7E13)
        bits[ties] = rng.integers(0, 2, size=int(ties.sum())).astype(np.uint8)
    return llr, bits


# ---------------------------------------------------------------------------
# Training


class BatchSampler:
    """Generates independent (features, bits, snr) training samples through
    the TX -> TDL channel -> noise -> RX-grid chain (frequency-domain path)."""

    def __init__(self, scenario: chan.ChannelScenario, num: Numerology,
                 pilots: PilotReference, seed: int, stream_id: int = 0,
                 ls_channels: bool = False):
        self.scenario = scenario
        self.num = num
        self.pilots = pilots
        self.rng = seeded_rng(seed, stream_id=stream_id)
        self.duration = num.burst_len / num.baseband_rate_hz
        self.ls_channels = ls_channels

    def sample(self):
        num = self.num
        model, speed, ds, snr = chan.draw_scenario(self.scenario, self.rng)
        bits = frame.random_bits(self.rng, num.bits_per_tti)
        grid = frame.build_grid(bits, self.pilots, num)
        profile = chan.get_profile(model)
        doppler = chan.doppler_from_speed(speed, self.scenario.carrier_hz)
        realization = chan.realize(profile, ds, doppler, self.duration, self.rng)
        faded, _ = chan.apply_freq_domain(realization, grid, num)
        noisy, _ = chan.add_awgn_grid_sinr(faded, snr, num, self.rng)
        feats = build_features(noisy, self.pilots, num, self.ls_channels)
        return feats, bits_to_grid(bits, num), snr

    def batch(self, n: int):
        feats, bit_grids, snrs = zip(*(self.sample() for _ in range(n)))
        return (np.stack(feats), np.stack(bit_grids), np.array(snrs))


@dataclass
class TrainResult:
    net: ReceiverNet
    train_loss: list
    val_loss: list  # (iteration, bce) pairs
    config: TrainConfig


def make_optimizer(net: ReceiverNet, cfg: TrainConfig) -> torch.optim.AdamW:
    """AdamW with decoupled weight decay, beta = (0.9, 0.999), eps = 1e-8."""
    return torch.optim.AdamW(net.parameters(), lr=cfg.lr_start,
                             betas=(0.9, 0.999), eps=1e-8,
                             weight_decay=cfg.weight_decay)


def train(net_cfg: NetConfig, train_cfg: TrainConfig, scenario: chan.ChannelScenario,
          num: Numerology = None, pilots: PilotReference = None,
          val_records=None, progress=None, checkpoint_path=None) -> TrainResult:
    """Training loop per the staircase-LR AdamW recipe; samples are generated
    on the fly and never reused (unless `overfit` fixes a single batch).

    val_records: optional iterable of (grid, bits, sinr_db) tuples evaluated
    every `val_every` iterations.
    """
    num = num or Numerology()
    pilots = pilots or PilotReference.from_seed(train_cfg.seed, num)
    torch.manual_seed(train_cfg.seed)
    net = init_net(net_cfg, seed=train_cfg.seed)
    opt = make_optimizer(net, train_cfg)
    sampler = BatchSampler(scenario, num, pilots, train_cfg.seed, stream_id=1,
                           ls_channels=net_cfg.ls_channels)
    data_mask_np = ~num.pilot_mask()
    val_batch = None
    if val_records is not None:
        val_batch = _records_to_batch(val_records, pilots, num, net_cfg.ls_channels)

    fixed = sampler.batch(train_cfg.batch_size) if train_cfg.overfit else None
    train_loss, val_loss = [], []
    for it in range(train_cfg.max_iterations):
        feats, bit_grids, snrs = fixed if fixed is not None else sampler.batch(train_cfg.batch_size)
        lr = lr_at(it, train_cfg)
        for group in opt.param_groups:
            group["lr"] = lr
        opt.zero_grad()
        x = torch.from_numpy(feats)
        b = torch.from_numpy(bit_grids)
        mask = torch.from_numpy(np.broadcast_to(data_mask_np, (len(snrs), 1) + data_mask_np.shape).copy())
        out = net(x)
        loss = bce_loss(out, b, mask, snrs, train_cfg.snr_weighting)
        if not torch.isfinite(loss):
            if checkpoint_path:
                save_model(checkpoint_path, net_cfg, net, opt, iteration=it)
            raise NumericError(f"non-finite loss at iteration {it}")
        loss.backward()
        opt.step()
        train_loss.append(float(loss.detach()))
        if val_batch is not None and (it + 1) % train_cfg.val_every == 0:
            val_loss.append((it + 1, _validation_bce(net, val_batch)))
        if progress is not None and (it + 1) % 100 == 0:
            progress(it + 1, train_loss[-1])
    return TrainResult(net=net, train_loss=train_loss, val_loss=val_loss, config=train_cfg)


def _records_to_batch(records, pilots: PilotReference, num: Numerology,
                      ls_channels: bool = False):
    feats, bit_grids = [], []
    for grid, bits, _sinr in records:
        feats.append(build_features(grid, pilots, num, ls_channels))
        bit_grids.append(bits_to_grid(bits, num))
    mask = np.broadcast_to(~num.pilot_mask(), (len(feats), 1) + num.pilot_mask().shape).copy()
    return (torch.from_numpy(np.stack(feats)), torch.from_numpy(np.stack(bit_grids)),
            torch.from_numpy(mask))


def _validation_bce(net: ReceiverNet, val_batch) -> float:
    x, b, mask = val_batch
    with torch.no_grad():
        out = net(x)
        return float(bce_loss(out, b, mask, 0.0, "uniform"))


# ---------------------------------------------------------------------------
# Model file I/O: magic "DRXM", version u16, config JSON block, then named
# f32 tensor records; optimizer state uses the "opt/" name prefix.


def _write_record(fh, name: str, array: np.ndarray):
    data = np.ascontiguousarray(array, dtype="<f4")
    name_b = name.encode()
    fh.write(struct.pack("<H", len(name_b)))
    fh.write(name_b)
    fh.write(struct.pack("<B", data.ndim))
    fh.write(struct.pack(f"<{data.ndim}I", *data.shape) if data.ndim else b"")
    fh.write(data.tobytes())


def _read_record(fh):
    head = fh.read(2)
    if not head:
        return None
    if len(head) < 2:
        raise FormatError("truncated record header", offset=fh.tell())
    (name_len,) = struct.unpack("<H", head)
    name = fh.read(name_len).decode()
    (rank,) = struct.unpack("<B", fh.read(1))
    dims = struct.unpack(f"<{rank}I", fh.read(4 * rank)) if rank else ()
    count = int(np.prod(dims)) if dims else 1
    raw = fh.read(4 * count)
    if len(raw) < 4 * count:
        raise FormatError(f"truncated tensor data for {name!r}", offset=fh.tell())
    return name, np.frombuffer(raw, dtype="<f4").reshape(dims)


def save_model(path, net_cfg: NetConfig, net: ReceiverNet,
               opt: torch.optim.AdamW = None, iteration: int = 0):
    cfg_json = json.dumps({**asdict(net_cfg), "dilation_cycle": list(net_cfg.dilation_cycle)},
                          sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<H", MODEL_VERSION))
        fh.write(struct.pack("<I", len(cfg_json)))
        fh.write(cfg_json)
        for name, tensor in net.state_dict().items():
            _write_record(fh, name, tensor.numpy())
        if opt is not None:
            _write_record(fh, "opt/iteration", np.array(float(iteration)))
            params = [p for g in opt.param_groups for p in g["params"]]
            names = list(net.state_dict().keys())
            for pname, p in zip(names, params):
                state = opt.state.get(p, {})
                for key in ("exp_avg", "exp_avg_sq"):
                    if key in state:
                        _write_record(fh, f"opt/{pname}/{key}", state[key].numpy())
                if "step" in state:
                    step = state["step"]
                    step = float(step) if not torch.is_tensor(step) else float(step.item())
                    _write_record(fh, f"opt/{pname}/step", np.array(step))


def load_model(path):
    """Returns (net_cfg, net, opt_state dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MODEL_MAGIC:
            raise FormatError(f"bad model magic {magic!r}", offset=0)
        (version,) = struct.unpack("<H", fh.read(2))
        if version != MODEL_VERSION:
            raise FormatError(f"unsupported model version {version}", offset=4)
        (cfg_len,) = struct.unpack("<I", fh.read(4))
        cfg = json.loads(fh.read(cfg_len).decode())
        cfg["dilation_cycle"] = tuple(cfg["dilation_cycle"])
        net_cfg = NetConfig(**cfg)
        tensors, opt_state = {}, {}
        while True:
            rec = _read_record(fh)
            if rec is None:
                break
            name, arr = rec
            (opt_state if name.startswith("opt/") else tensors)[name] = arr
    net = ReceiverNet(net_cfg)
    state = {k: torch.from_numpy(v.copy()) for k, v in tensors.items()}
    net.load_state_dict(state)
    return net_cfg, net, opt_state
