"""Gradient-domain recovery of genuine high-frequency detail.

The fused panorama inherits slightly softened structure from the
band-pass blend. A log-domain guidance gradient field is assembled from
whichever exposure level owns each region (cross-faded inside the
overlaps), and a screened least-squares problem is solved for a detail
map that follows the amplified guidance while staying small:

    minimize ||z||^2
        + lam * ||(alpha*Vx - Dx z) / w(Vx)||^2
        + lam * ||(alpha*Vy - Dy z) / w(Vy)||^2

with w(v) = sqrt(|v|^0.75 + 2) down-weighting strong edges so they are
not over-amplified. Dx/Dy are forward differences whose last
column/row carry no constraint. The normal equations are symmetric
positive definite
and extremely well conditioned, so Jacobi-preconditioned conjugate
gradients converges in a handful of iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InputError, PanoLayout
from .pano import PanoImage


class ConvergenceError(RuntimeError):
    """Iterative solve failed to reach tolerance. Mapped to CLI exit code 3."""


@dataclass
class SolverConfig:
    """Detail-recovery parameters.

    ``lam`` balances detail injection against flatness (0 disables the
    stage entirely), ``alpha`` amplifies the guidance gradients, ``nu``
    blends the final result back toward the plain fusion output.
    """

    lam: float = 0.125
    alpha: float = 1.125
    cg_tolerance: float = 1e-6
    cg_max_iters: int = 2000
    nu: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise InputError(f"lam must be non-negative, got {self.lam}")
        if not 0.0 <= self.nu <= 1.0:
            raise InputError(f"nu must lie in [0, 1], got {self.nu}")
        if self.cg_tolerance <= 0 or self.cg_max_iters <= 0:
            raise InputError("solver tolerance and iteration cap must be positive")


@dataclass
class GuidanceField:
    """Per-channel target gradients over the panorama."""

    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        if self.vx.shape != self.vy.shape:
            raise InputError("guidance components differ in shape")
        if not (np.isfinite(self.vx).all() and np.isfinite(self.vy).all()):
            raise InputError("guidance field contains non-finite samples")


def log_domain(image: np.ndarray) -> np.ndarray:
    """log2(1 + x); keeps 0 at 0 and compresses highlights."""
    image = np.asarray(image, dtype=np.float64)
    if (image < 0).any():
        raise InputError("log domain requires non-negative samples")
    return np.log2(image + 1.0)


def psi_weight(values: np.ndarray) -> np.ndarray:
    """Edge-strength attenuation sqrt(|v|^0.75 + 2)."""
    return np.sqrt(np.abs(values) ** 0.75 + 2.0)


def _dx(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[:, :-1] = a[:, 1:] - a[:, :-1]
    return out


def _dy(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[:-1, :] = a[1:, :] - a[:-1, :]
    return out


def _dx_t(u: np.ndarray) -> np.ndarray:
    # Adjoint of _dx; the last column of u carries no constraint.
    out = np.zeros_like(u)
    if u.shape[1] < 2:
        return out
    out[:, 0] = -u[:, 0]
    out[:, 1:-1] = u[:, :-2] - u[:, 1:-1]
    out[:, -1] = u[:, -2]
    return out


def _dy_t(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    if u.shape[0] < 2:
        return out
    out[0, :] = -u[0, :]
    out[1:-1, :] = u[:-2, :] - u[1:-1, :]
    out[-1, :] = u[-2, :]
    return out


def guidance_field(
    level_logs: list[np.ndarray], layout: PanoLayout
) -> GuidanceField:
    """Assemble the guidance gradients from the log-domain exposure-level
    panoramas: each region contributes the gradients of the level whose
    genuine content lives there, linearly cross-faded in the overlaps."""
    if len(level_logs) != 3:
        raise InputError(f"expected 3 log panoramas, got {len(level_logs)}")
    expected = (layout.view_height, layout.pano_width, 3)
    for index, log_img in enumerate(level_logs, start=1):
        if log_img.shape != expected:
            raise InputError(
                f"log panorama {index} has shape {log_img.shape}, expected {expected}"
            )
    grads = [(_dx(l), _dy(l)) for l in level_logs]
    vx = np.empty(expected, dtype=np.float64)
    vy = np.empty(expected, dtype=np.float64)
    bounds = layout.region_bounds
    for tag, level in (("chi1", 1), ("chi2", 2), ("chi3", 3)):
        start, end = bounds[tag]
        vx[:, start:end] = grads[level - 1][0][:, start:end]
        vy[:, start:end] = grads[level - 1][1][:, start:end]
    for tag, left_level in (("xi12", 1), ("xi23", 2)):
        start, end = bounds[tag]
        columns = np.arange(start, end, dtype=np.float64)
        weight = ((end - columns) / (end - start))[None, :, None]
        for target, axis in ((vx, 0), (vy, 1)):
            left = grads[left_level - 1][axis][:, start:end]
            right = grads[left_level][axis][:, start:end]
            target[:, start:end] = right + weight * (left - right)
    return GuidanceField(vx=vx, vy=vy)


def _solve_channel(
    vx: np.ndarray, vy: np.ndarray, cfg: SolverConfig
) -> tuple[np.ndarray, int, float]:
    lam = cfg.lam
    wx = 1.0 / psi_weight(vx) ** 2
    wy = 1.0 / psi_weight(vy) ** 2

    def apply_system(z: np.ndarray) -> np.ndarray:
        return z + lam * (_dx_t(wx * _dx(z)) + _dy_t(wy * _dy(z)))

    rhs = lam * (_dx_t(wx * (cfg.alpha * vx)) + _dy_t(wy * (cfg.alpha * vy)))
    rhs_norm = float(np.sqrt((rhs * rhs).sum()))
    if rhs_norm == 0.0:
        return np.zeros_like(vx), 0, 0.0

    # Jacobi preconditioner from the exact system diagonal.
    diag = np.ones_like(vx)
    diag[:, :-1] += lam * wx[:, :-1]
    diag[:, 1:] += lam * wx[:, :-1]
    diag[:-1, :] += lam * wy[:-1, :]
    diag[1:, :] += lam * wy[:-1, :]

    def norm(a: np.ndarray) -> float:
        return float(np.sqrt((a * a).sum()))

    z = np.zeros_like(vx)
    residual = rhs.copy()
    precond = residual / diag
    delta = float((residual * precond).sum())
    direction = precond.copy()
    iterations = 0
    while True:
        if norm(residual) <= cfg.cg_tolerance * rhs_norm:
            # Recurrence residuals drift; confirm against the true residual
            # and restart if the drift was optimistic.
            residual = rhs - apply_system(z)
            if norm(residual) <= cfg.cg_tolerance * rhs_norm:
                break
            precond = residual / diag
            delta = float((residual * precond).sum())
            direction = precond.copy()
        if iterations >= cfg.cg_max_iters:
            raise ConvergenceError(
                f"conjugate gradients stalled after {cfg.cg_max_iters} iterations "
                f"(relative residual {norm(residual) / rhs_norm:.3e}, "
                f"tolerance {cfg.cg_tolerance:.1e})"
            )
        q = apply_system(direction)
        step = delta / float((direction * q).sum())
        z = z + step * direction
        residual = residual - step * q
        precond = residual / diag
        delta_new = float((residual * precond).sum())
        direction = precond + (delta_new / delta) * direction
        delta = delta_new
        iterations += 1
    return z, iterations, norm(residual) / rhs_norm


def solve_detail(field: GuidanceField, cfg: SolverConfig) -> np.ndarray:
    """Per-channel screened least-squares solve for the detail map."""
    if field.vx.ndim != 3 or field.vx.shape[2] != 3:
        raise InputError("guidance field must cover 3 channels")
    out = np.empty_like(field.vx)
    for channel in range(3):
        out[..., channel], _, _ = _solve_channel(
            field.vx[..., channel], field.vy[..., channel], cfg
        )
    return out


def recombine(fused: PanoImage, detail: np.ndarray, cfg: SolverConfig) -> PanoImage:
    """Scale the fusion output by 2**detail, clamp, then blend back toward
    the plain fusion by nu. Clamping precedes the blend so the result is
    exactly affine in nu."""
    if detail.shape != fused.data.shape:
        raise InputError(
            f"detail map shape {detail.shape} does not match panorama "
            f"{fused.data.shape}"
        )
    enhanced = np.clip(fused.data * np.exp2(detail), 0.0, 255.0)
    blended = cfg.nu * fused.data + (1.0 - cfg.nu) * enhanced
    return PanoImage(data=blended, layout=fused.layout)
