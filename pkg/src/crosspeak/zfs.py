"""Zero-field-splitting inversion from a cross-relaxation dip position.

A dip at field B* is attributed to a crossing between an NV probe branch
and one branch of an unknown S=1 defect; the defect's D is the value that
makes the two branches meet exactly at B*.  The error budget propagates
four independent sources through the same inversion: the dip-center fit,
the field calibration, the residual field-axis misalignment, and the NV
reference D itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectrum import NoSolutionError, PeakFit
from .spin import MagneticField, Orientation, SpinSpecies, nv_probe_frequencies

D_SEARCH_RANGE = (2000.0, 3000.0)
D_BISECT_TOL = 1e-3  # MHz; well under the 0.01 MHz contract
DEFAULT_NV_D_SIGMA = 1.0  # MHz
N_TILT_AZIMUTHS = 8

_BRANCH_INDEX = {"ms=0>ms=-1": 0, "ms=0>ms=+1": 1}


@dataclass(frozen=True)
class ZfsEstimate:
    """Inverted D with its quadrature error budget (all MHz)."""

    D: float
    sigma_D: float
    contributions: dict[str, float]

    @classmethod
    def combine(cls, d: float, contributions: dict[str, float]) -> "ZfsEstimate":
        sigma = float(np.sqrt(sum(c * c for c in contributions.values())))
        return cls(D=d, sigma_D=sigma, contributions=dict(contributions))


def _branch_freq(
    species: SpinSpecies, b: float, axis: np.ndarray, orientation: Orientation, idx: int
) -> float:
    return nv_probe_frequencies(species, MagneticField(b, axis), orientation)[idx]


def _solve_d(
    nv: SpinSpecies,
    b_star: float,
    axis: np.ndarray,
    nv_branch: int,
    tgt_branch: int,
    nv_orientation: Orientation,
    tgt_orientation: Orientation,
    gamma_e: float,
    d_range: tuple[float, float],
    nv_d: float | None = None,
) -> float:
    """D of a bare S=1 target whose branch meets the NV branch at b_star."""
    probe = nv if nv_d is None else SpinSpecies(
        name=nv.name, S=1.0, D=nv_d, E=nv.E, gamma_e=nv.gamma_e,
        orientation_kind=nv.orientation_kind,
    )
    f_nv = _branch_freq(probe, b_star, axis, nv_orientation, nv_branch)

    def gap(d: float) -> float:
        target = SpinSpecies(name="target", S=1.0, D=d, gamma_e=gamma_e)
        return _branch_freq(target, b_star, axis, tgt_orientation, tgt_branch) - f_nv

    lo, hi = d_range
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if (g_lo < 0) == (g_hi < 0):
        raise NoSolutionError(
            f"no D in [{lo}, {hi}] MHz places that crossing at {b_star:.3f} G"
        )
    while hi - lo > D_BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if (gap(mid) < 0) == (g_lo < 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _tilted(axis: np.ndarray, tilt_rad: float, azimuth: float) -> np.ndarray:
    """Unit axis tilted away from ``axis`` by tilt_rad toward the given
    azimuth in the plane transverse to it."""
    ref = np.array([0.0, 0.0, 1.0])
    if abs(axis @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    e1 = ref - (ref @ axis) * axis
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    t = np.cos(tilt_rad) * axis + np.sin(tilt_rad) * (
        np.cos(azimuth) * e1 + np.sin(azimuth) * e2
    )
    return t / np.linalg.norm(t)


def infer_zfs(
    peak,
    cal_uncertainty: float,
    angle_uncertainty: float,
    nv: SpinSpecies,
    assumed_crossing: tuple[str, str] = ("ms=0>ms=-1", "ms=0>ms=+1"),
    axis=(1.0, 0.0, 0.0),
    fit_sigma: float | None = None,
    nv_d_sigma: float = DEFAULT_NV_D_SIGMA,
    gamma_e: float | None = None,
    d_range: tuple[float, float] = D_SEARCH_RANGE,
) -> ZfsEstimate:
    """Invert a dip center into the target defect's D.

    ``peak`` is a PeakFit or a bare center in gauss; ``assumed_crossing``
    names the NV probe branch and the target branch forming the crossing.
    Each uncertainty source (fit center sigma, calibration offset in
    gauss, axis tilt in degrees over the worst azimuth and orientation
    pair, NV reference D) is propagated by re-solving the inversion at
    the perturbed input; the four resulting shifts combine in quadrature.
    """
    if isinstance(peak, PeakFit):
        center = peak.center
        if fit_sigma is None:
            fit_sigma = peak.center_sigma
    else:
        center = float(peak)
        fit_sigma = 0.0 if fit_sigma is None else float(fit_sigma)
    nv_label, tgt_label = assumed_crossing
    try:
        nv_branch = _BRANCH_INDEX[nv_label]
        tgt_branch = _BRANCH_INDEX[tgt_label]
    except KeyError as exc:
        raise ValueError(f"unknown probe branch label {exc.args[0]!r}") from None
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    if gamma_e is None:
        gamma_e = nv.gamma_e

    nv_orient = nv.orientations()
    tgt_orients = Orientation.all_classes()
    o_nv, o_tgt = nv_orient[0], tgt_orients[0]

    def solve(b: float, ax: np.ndarray, onv, otgt, nv_d=None) -> float:
        return _solve_d(
            nv, b, ax, nv_branch, tgt_branch, onv, otgt, gamma_e, d_range, nv_d
        )

    d0 = solve(center, axis, o_nv, o_tgt)

    contributions: dict[str, float] = {}
    contributions["fit"] = (
        max(abs(solve(center + fit_sigma, axis, o_nv, o_tgt) - d0),
            abs(solve(max(center - fit_sigma, 0.0), axis, o_nv, o_tgt) - d0))
        if fit_sigma > 0 else 0.0
    )
    contributions["calibration"] = (
        max(abs(solve(center + cal_uncertainty, axis, o_nv, o_tgt) - d0),
            abs(solve(max(center - cal_uncertainty, 0.0), axis, o_nv, o_tgt) - d0))
        if cal_uncertainty > 0 else 0.0
    )
    contributions["nv_reference"] = (
        max(abs(solve(center, axis, o_nv, o_tgt, nv_d=nv.D + nv_d_sigma) - d0),
            abs(solve(center, axis, o_nv, o_tgt, nv_d=nv.D - nv_d_sigma) - d0))
        if nv_d_sigma > 0 else 0.0
    )

    # Worst-case tilt: the dip's class pair is unknown once the axis is
    # off [100], so scan azimuths and all orientation pairings.
    angle = 0.0
    if angle_uncertainty > 0:
        tilt = np.deg2rad(angle_uncertainty)
        for k in range(N_TILT_AZIMUTHS):
            ax_t = _tilted(axis, tilt, 2 * np.pi * k / N_TILT_AZIMUTHS)
            for onv in nv_orient:
                for otgt in tgt_orients:
                    try:
                        d_t = solve(center, ax_t, onv, otgt)
                    except NoSolutionError:
                        continue
                    angle = max(angle, abs(d_t - d0))
    contributions["angle"] = angle

    return ZfsEstimate.combine(d0, contributions)
