"""BER-vs-SINR evaluation of receivers on captured datasets, CSV output and
log-scale curve plotting."""

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import dataset as ds
from . import rx_classic
from . import rx_neural
from .errors import FramingError, ParameterError
from .frame import PilotReference

CSV_COLUMNS = ["receiver", "sinr_bin_db", "n_tti", "n_bits", "n_errors", "ber"]
LOW_CONFIDENCE_TTIS = 10


@dataclass
class BerPoint:
    sinr_bin_db: float  # bin center, 1 dB bins at integers
    n_tti: int
    n_bits: int
    n_errors: int
    receiver: str
    low_confidence: bool = False

    @property
    def ber(self) -> float:
        return self.n_errors / self.n_bits if self.n_bits else 0.0


def _receiver_fn(receiver: str, header, model_path=None):
    num = header.numerology
    pilots = PilotReference.from_seed(header.scenario.get("pilot_seed", 0), num)
    if receiver == "classic":
        def run(rec):
            _llr, bits = rx_classic.receive_classic(
                rec.grid, pilots, num, sinr_db=rec.sinr_db)
            return bits
    elif receiver == "genie":
        # valid when the capture had no fading channel (H = 1): AWGN-only or
        # loopback datasets, where the recorded SINR pins the noise level
        def run(rec):
            noise = rx_classic.noise_from_sinr(rec.grid, rec.sinr_db, num)
            _llr, bits = rx_classic.receive_genie(
                rec.grid, np.ones(rec.grid.shape), noise.sigma2, num)
            return bits
    elif receiver == "neural":
        if model_path is None:
            raise ParameterError("neural receiver requires a model path")
        _cfg, net, _opt = rx_neural.load_model(model_path)
        def run(rec):
            _llr, bits = rx_neural.infer(net, rec.grid, pilots, num,
                                         tie_break_seed=rec.tti_index)
            return bits
    else:
        raise ParameterError(f"unknown receiver {receiver!r}")
    return run


def evaluate(dataset_path, receiver: str, model_path=None, out_csv=None):
    """Per-TTI BER against ground truth, binned by measured SINR into 1 dB
    bins centered at integers. Returns BerPoint list sorted by bin."""
    bins = {}
    with ds.read_dataset(dataset_path) as reader:
        num = reader.header.numerology
        run = _receiver_fn(receiver, reader.header, model_path)
        for rec in reader:
            if len(rec.bits) != num.bits_per_tti:
                raise FramingError(
                    f"record {rec.tti_index} bit count {len(rec.bits)}")
            hard = run(rec)
            errors = int(np.count_nonzero(hard != rec.bits))
            center = int(round(rec.sinr_db))
            agg = bins.setdefault(center, [0, 0, 0])
            agg[0] += 1
            agg[1] += len(rec.bits)
            agg[2] += errors
    points = [
        BerPoint(sinr_bin_db=float(center), n_tti=n_tti, n_bits=n_bits,
                 n_errors=n_err, receiver=receiver,
                 low_confidence=n_tti < LOW_CONFIDENCE_TTIS)
        for center, (n_tti, n_bits, n_err) in sorted(bins.items())
    ]
    if out_csv is not None:
        write_csv(out_csv, points)
    return points


def write_csv(path, points):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for p in points:
            writer.writerow([p.receiver, f"{p.sinr_bin_db:g}", p.n_tti,
                             p.n_bits, p.n_errors, f"{p.ber:.8g}"])


def read_csv(path):
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise FramingError(f"unexpected CSV columns {reader.fieldnames} in {path}")
        for row in reader:
            points.append(BerPoint(
                sinr_bin_db=float(row["sinr_bin_db"]),
                n_tti=int(row["n_tti"]), n_bits=int(row["n_bits"]),
                n_errors=int(row["n_errors"]), receiver=row["receiver"]))
    return points


def curve(csv_paths, out_plot, out_csv=None):
    """Merge result CSVs into one log-scale BER-vs-SINR chart (deterministic
    SVG bytes for identical inputs) plus an optional merged CSV."""
    if not csv_paths:
        raise ParameterError("need at least one result CSV")
    series = [(str(p), read_csv(p)) for p in csv_paths]
    matplotlib.rcParams["svg.hashsalt"] = "ofdmlab"
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for path, points in series:
        labels = sorted({p.receiver for p in points})
        for label in labels:
            pts = [p for p in points if p.receiver == label]
            x = [p.sinr_bin_db for p in pts]
            y = [max(p.ber, 0.5 / p.n_bits) if p.n_bits else np.nan for p in pts]
            name = label if len(series) == 1 else f"{label} ({path})"
            ax.semilogy(x, y, marker="o", markersize=3, label=name)
    ax.set_xlabel("SINR (dB)")
    ax.set_ylabel("Uncoded BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_plot, metadata={"Date": None} if str(out_plot).endswith(".svg") else None)
    plt.close(fig)
    if out_csv is not None:
        merged = [p for _path, points in series for p in points]
        merged.sort(key=lambda p: (p.receiver, p.sinr_bin_db))
        write_csv(out_csv, merged)
