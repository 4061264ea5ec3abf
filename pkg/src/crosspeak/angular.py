"""Angular PL map around a reference axis and the ODMR line structure.

Same-species cross-relaxation lights up wherever two NV orientation
classes become degenerate; sweeping the field direction around [100]
traces out four planes (orthogonal to [010], [001], [011], [01-1]) that
all intersect on the axis itself.  The map reproduces that geometry with
a phenomenological Lorentzian contrast model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .spin import MagneticField, SpinSpecies, hamiltonian_parts, spin_operators

DEFAULT_LINEWIDTH = 6.0  # MHz, FWHM; the NV decoherence scale
DEFAULT_CONTRAST = 0.05
MERGE_TOL = 0.1  # MHz; ODMR lines closer than this count as one

PLANE_NORMALS = {
    "010": np.array([0.0, 1.0, 0.0]),
    "001": np.array([0.0, 0.0, 1.0]),
    "011": np.array([0.0, 1.0, 1.0]) / np.sqrt(2.0),
    "01-1": np.array([0.0, 1.0, -1.0]) / np.sqrt(2.0),
}


def _rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def field_from_angles(reference_axis, phi: float, theta: float, amplitude: float) -> MagneticField:
    """Field tilted from ``reference_axis`` by goniometer angles (degrees):
    phi about the lab y axis first, then theta about z."""
    if abs(phi) > 90 or abs(theta) > 90:
        raise ValueError("goniometer angles must satisfy |phi|, |theta| <= 90 deg")
    ref = np.asarray(reference_axis, dtype=float)
    ref = ref / np.linalg.norm(ref)
    axis = _rot_z(np.deg2rad(theta)) @ (_rot_y(np.deg2rad(phi)) @ ref)
    return MagneticField(amplitude, axis / np.linalg.norm(axis))


def odmr_lines(field: MagneticField, nv: SpinSpecies, merge_tol: float = MERGE_TOL):
    """Probe frequencies over the four classes as (frequency, multiplicity),
    ascending, with lines closer than ``merge_tol`` merged."""
    freqs = []
    for orientation in nv.orientations():
        h0, h1 = hamiltonian_parts(nv, field.axis, orientation)
        vals, _ = kernels.eigh(h0 + field.amplitude * h1, compute_vectors=False)
        freqs.extend([vals[1] - vals[0], vals[2] - vals[0]])
    freqs.sort()
    merged: list[list[float]] = []
    for f in freqs:
        if merged and f - merged[-1][-1] <= merge_tol:
            merged[-1].append(f)
        else:
            merged.append([f])
    return [(float(np.mean(group)), len(group)) for group in merged]


@dataclass(frozen=True, eq=False)
class AngleGrid:
    """Symmetric (phi, theta) grid in degrees around the reference axis."""

    phi_max: float
    theta_max: float
    n_phi: int
    n_theta: int

    def __post_init__(self):
        if self.phi_max <= 0 or self.theta_max <= 0:
            raise ValueError("angle ranges must be positive")
        if self.n_phi < 3 or self.n_theta < 3:
            raise ValueError("need at least 3 steps per axis")

    @property
    def phis(self) -> np.ndarray:
        return np.linspace(-self.phi_max, self.phi_max, self.n_phi)

    @property
    def thetas(self) -> np.ndarray:
        return np.linspace(-self.theta_max, self.theta_max, self.n_theta)


@dataclass(eq=False)
class DegeneracyMap:
    """pl_proxy[i, j] is the relative PL at (phis[i], thetas[j]);
    plane_masks marks the grid points lying on each analytic plane locus
    (within half a cell)."""

    grid: AngleGrid
    amplitude: float
    pl_proxy: np.ndarray
    plane_masks: dict[str, np.ndarray]
    linewidth: float
    contrast: float
    flags: tuple[str, ...] = ()

    def labels_at(self, i: int, j: int) -> tuple[str, ...]:
        return tuple(name for name, m in self.plane_masks.items() if m[i, j])


def _probe_freq_grid(
    nv: SpinSpecies, reference_axis, grid: AngleGrid, amplitude: float
) -> np.ndarray:
    """Probe frequencies f[i, j, class, branch] over the angle grid."""
    ref = np.asarray(reference_axis, dtype=float)
    ref = ref / np.linalg.norm(ref)
    phis = np.deg2rad(grid.phis)
    thetas = np.deg2rad(grid.thetas)
    cp, sp = np.cos(phis), np.sin(phis)
    ct, st = np.cos(thetas), np.sin(thetas)
    # axis(phi, theta) = Rz(theta) Ry(phi) ref, built on the whole grid
    x1 = cp * ref[0] + sp * ref[2]
    y1 = np.full_like(cp, ref[1])
    z1 = -sp * ref[0] + cp * ref[2]
    ax = np.empty((grid.n_phi, grid.n_theta, 3))
    ax[:, :, 0] = x1[:, None] * ct[None, :] - y1[:, None] * st[None, :]
    ax[:, :, 1] = x1[:, None] * st[None, :] + y1[:, None] * ct[None, :]
    ax[:, :, 2] = z1[:, None]

    out = np.empty((grid.n_phi, grid.n_theta, 4, 2))
    orientations = nv.orientations()
    flat_axes = ax.reshape(-1, 3)
    b = amplitude * flat_axes
    for k, orientation in enumerate(orientations):
        h0, _ = hamiltonian_parts(nv, np.array([0.0, 0.0, 1.0]), orientation)
        # Zeeman part per defect-frame component, assembled for all points
        sx, sy, sz = spin_operators(nv.S)
        bd = b @ orientation.rotation  # defect-frame field components
        h = (
            h0[None, :, :]
            + nv.gamma_e
            * (
                bd[:, 0, None, None] * sx[None]
                + bd[:, 1, None, None] * sy[None]
                + bd[:, 2, None, None] * sz[None]
            )
        )
        vals, _ = kernels.eigh_stack(h, compute_vectors=False)
        out[:, :, k, 0] = (vals[:, 1] - vals[:, 0]).reshape(grid.n_phi, grid.n_theta)
        out[:, :, k, 1] = (vals[:, 2] - vals[:, 0]).reshape(grid.n_phi, grid.n_theta)
    return out


def plane_loci(grid: AngleGrid) -> dict[str, np.ndarray]:
    """Analytic (phi, theta) loci (degrees) of the four degeneracy planes
    for reference [100]: theta=0, phi=0, and phi = -+atan(sin theta)."""
    th = grid.thetas
    curve = np.rad2deg(np.arctan(np.sin(np.deg2rad(th))))
    return {
        "010": np.column_stack([grid.phis, np.zeros_like(grid.phis)]),
        "001": np.column_stack([np.zeros_like(th), th]),
        "011": np.column_stack([curve, th]),
        "01-1": np.column_stack([-curve, th]),
    }


def simulate_map(
    grid: AngleGrid,
    amplitude: float,
    nv: SpinSpecies,
    linewidth: float = DEFAULT_LINEWIDTH,
    contrast: float = DEFAULT_CONTRAST,
    reference_axis=(1.0, 0.0, 0.0),
) -> DegeneracyMap:
    """Lorentzian-contrast degeneracy map over the angle grid.

    pl_proxy = 1 - c * sum over class pairs and branch combinations of
    L(detuning; FWHM=linewidth), with c normalised so the deepest point
    sits at 1 - contrast.  Amplitude 0 degenerates every detuning and is
    flagged.
    """
    if linewidth <= 0:
        raise ValueError("linewidth must be positive")
    f = _probe_freq_grid(nv, reference_axis, grid, amplitude)
    hwhm = linewidth / 2.0
    raw = np.zeros((grid.n_phi, grid.n_theta))
    for a in range(4):
        for b in range(a + 1, 4):
            for br_a in range(2):
                for br_b in range(2):
                    det = f[:, :, a, br_a] - f[:, :, b, br_b]
                    raw += 1.0 / (1.0 + (det / hwhm) ** 2)
    peak = float(np.max(raw))
    flags = ()
    if amplitude == 0:
        flags = ("zero-field-degenerate",)
    scale = contrast / peak if peak > 0 else 0.0
    pl = 1.0 - scale * raw

    # mark grid points within half a cell of each analytic plane
    masks: dict[str, np.ndarray] = {}
    phis, thetas = grid.phis, grid.thetas
    half_phi = 0.5 * (phis[1] - phis[0])
    half_theta = 0.5 * (thetas[1] - thetas[0])
    pp = np.deg2rad(phis)[:, None]
    tt = np.deg2rad(thetas)[None, :]
    masks["010"] = np.abs(tt) <= np.deg2rad(half_theta) * np.ones_like(pp)
    masks["001"] = (np.abs(pp) <= np.deg2rad(half_phi)) & np.ones_like(tt, dtype=bool)
    masks["011"] = np.abs(pp - np.arctan(np.sin(tt))) <= np.deg2rad(half_phi)
    masks["01-1"] = np.abs(pp + np.arctan(np.sin(tt))) <= np.deg2rad(half_phi)

    return DegeneracyMap(
        grid=grid,
        amplitude=amplitude,
        pl_proxy=pl,
        plane_masks=masks,
        linewidth=linewidth,
        contrast=contrast,
        flags=flags,
    )
