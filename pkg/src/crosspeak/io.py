"""File formats and atomic output writing.

Float formatting is fixed (%.6f for gauss quantities, %.4f for MHz) so
identical inputs always produce byte-identical CSV and JSON outputs.
Every writer goes through a temp-file-plus-rename so a crashed run never
leaves a partial file behind.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .crossings import CrossingEvent, TransitionCurve
from .spectrum import AbscissaKind, ScanReport, Spectrum
from .zfs import ZfsEstimate


def fmt_gauss(x: float) -> str:
    return f"{x:.6f}"


def fmt_mhz(x: float) -> str:
    return f"{x:.4f}"


def write_text_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _round(x: float, places: int) -> float:
    r = round(float(x), places)
    return 0.0 if r == 0 else r  # avoid "-0.0" leaking into JSON


def curves_to_csv(curves: list[TransitionCurve]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["B_G", "f_MHz", "label"])
    for c in curves:
        label = f"{c.species}|{c.orientation}|{c.label}|x{c.multiplicity}"
        for b, f in zip(c.B, c.f):
            w.writerow([fmt_gauss(b), fmt_mhz(f), label])
    return buf.getvalue()


def events_to_csv(events: list[CrossingEvent]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["species_a", "transition_a", "species_b", "transition_b",
         "B_star_G", "f_star_MHz", "slope_gap"]
    )
    for e in events:
        w.writerow(
            [e.species_a, e.transition_a, e.species_b, e.transition_b,
             fmt_gauss(e.B_star), fmt_mhz(e.f_star), fmt_gauss(e.slope_gap)]
        )
    return buf.getvalue()


def events_to_json(events: list[CrossingEvent]) -> str:
    payload = [
        {
            "species_a": e.species_a,
            "transition_a": e.transition_a,
            "species_b": e.species_b,
            "transition_b": e.transition_b,
            "B_star_G": _round(e.B_star, 6),
            "f_star_MHz": _round(e.f_star, 4),
            "slope_gap": _round(e.slope_gap, 6),
        }
        for e in events
    ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_to_json(report: ScanReport, zfs: list[ZfsEstimate] = ()) -> str:
    payload = {
        "calibration": None
        if report.calibration is None
        else {
            "anchors": [
                {"voltage": _round(v, 6), "field_G": _round(b, 6)}
                for v, b in report.calibration.anchors
            ],
            "flags": list(report.calibration.flags),
        },
        "baseline": {
            "coefficients": [float(f"{c:.10e}") for c in report.baseline.coefficients],
            "excluded_windows_G": [
                [_round(lo, 6), _round(hi, 6)]
                for lo, hi in report.baseline.excluded_windows
            ],
            "rms": _round(report.baseline.rms, 6),
        },
        "peaks": [
            {
                "center_G": _round(p.center, 6),
                "sigma_G": _round(p.sigma, 6),
                "depth": _round(p.depth, 6),
                "center_sigma_G": _round(p.center_sigma, 6),
                "contrast": _round(p.contrast, 8),
                "flags": list(p.flags),
            }
            for p in report.peaks
        ],
        "zfs": [zfs_to_dict(z) for z in zfs],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def peaks_to_csv(report: ScanReport) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["center_G", "sigma_G", "depth", "center_sigma_G", "contrast", "flags"])
    for p in report.peaks:
        w.writerow(
            [fmt_gauss(p.center), fmt_gauss(p.sigma), f"{p.depth:.6f}",
             fmt_gauss(p.center_sigma), f"{p.contrast:.8f}", ";".join(p.flags)]
        )
    return buf.getvalue()


def zfs_to_dict(z: ZfsEstimate) -> dict:
    return {
        "D_MHz": _round(z.D, 4),
        "sigma_D_MHz": _round(z.sigma_D, 4),
        "contributions_MHz": {
            k: _round(v, 4) for k, v in sorted(z.contributions.items())
        },
    }


def zfs_to_json(z: ZfsEstimate) -> str:
    return json.dumps(zfs_to_dict(z), indent=2, sort_keys=True) + "\n"


def map_to_csv(deg_map) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phi_deg", "theta_deg", "pl_proxy"])
    phis, thetas = deg_map.grid.phis, deg_map.grid.thetas
    for i, phi in enumerate(phis):
        for j, theta in enumerate(thetas):
            w.writerow([fmt_gauss(phi), fmt_gauss(theta), f"{deg_map.pl_proxy[i, j]:.6f}"])
    return buf.getvalue()


def map_meta_to_json(deg_map) -> str:
    payload = {
        "amplitude_G": _round(deg_map.amplitude, 6),
        "linewidth_MHz": _round(deg_map.linewidth, 4),
        "contrast": _round(deg_map.contrast, 6),
        "rotation_order": "phi about y, then theta about z",
        "flags": list(deg_map.flags),
        "grid": {
            "phi_max_deg": _round(deg_map.grid.phi_max, 6),
            "theta_max_deg": _round(deg_map.grid.theta_max, 6),
            "n_phi": deg_map.grid.n_phi,
            "n_theta": deg_map.grid.n_theta,
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def loci_to_csv(loci: dict[str, np.ndarray]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["plane", "phi_deg", "theta_deg"])
    for name in sorted(loci):
        for phi, theta in loci[name]:
            w.writerow([name, fmt_gauss(phi), fmt_gauss(theta)])
    return buf.getvalue()


def read_scan_csv(path: str | Path, kind: str | None = None) -> Spectrum:
    """Scan CSV with a header and (abscissa, counts) columns.

    The abscissa kind comes from ``kind``, else a sidecar
    ``<path>.meta.json`` {"abscissa_kind": ...}, else a recognised header
    name (voltage/field).
    """
    path = Path(path)
    metadata: dict = {}
    sidecar = path.with_name(path.name + ".meta.json")
    if sidecar.exists():
        metadata = json.loads(sidecar.read_text())
        if kind is None:
            kind = metadata.get("abscissa_kind")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or len(rows[0]) < 2:
        raise ValueError(f"{path}: expected a header plus (abscissa, counts) rows")
    header = [h.strip().lower() for h in rows[0]]
    if kind is None:
        if "voltage" in header[0]:
            kind = "voltage"
        elif "field" in header[0] or header[0].startswith("b"):
            kind = "field"
        else:
            raise ValueError(
                f"{path}: cannot infer abscissa kind from header {rows[0]!r}; "
                "pass it explicitly"
            )
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed scan row: {exc}") from None
    return Spectrum(data[:, 0], data[:, 1], AbscissaKind(kind), metadata)


def read_fiducials_csv(path: str | Path) -> np.ndarray:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: expected a header plus (voltage, frequency_MHz) rows")
    try:
        return np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed fiducial row: {exc}") from None
