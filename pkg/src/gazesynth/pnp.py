"""Head pose from 3D-2D landmark correspondences.

Minimizes the total squared reprojection error

    sum_i || project(C, R X_i + t) - p_i ||^2

over rotation R and translation t (face frame -> camera frame, mm).
Initialization scans a coarse orientation grid with a closed-form
least-squares translation per candidate; refinement is damped Gauss-Newton
(Levenberg-Marquardt) over local axis-angle increments, which keeps R on
SO(3) throughout.  Designed for the 6-landmark, near-planar face fit but
works for any >= 4 non-collinear correspondences.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError
from .geometry import CameraIntrinsics, project
from .rotation import axis_angle_to_matrix, orthonormalize


@dataclass(frozen=True, eq=False)
class HeadPose:
    """Rigid map from face-local coordinates to camera coordinates (mm).

    The rotation must be orthonormal with determinant +1 (1e-8).  Since the
    face-local origin is the face center, a valid head pose places it in
    front of the camera: translation z must be positive.  The zero
    translation is also accepted so pure camera-frame rotations can be
    expressed as poses.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise ValueError("non-finite pose")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-8:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-8:
            raise ValueError("rotation determinant is not +1")
        if np.any(t != 0.0) and t[2] <= 0.0:
            raise ValueError(f"face center behind camera: translation z = {t[2]}")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "HeadPose":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    def apply(self, points) -> np.ndarray:
        """Map face-local points (..., 3) into the camera frame."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation


@dataclass(frozen=True)
class PnPConfig:
    max_iterations: int = 200
    gradient_tol: float = 1e-10  # infinity norm of J^T r
    step_tol: float = 1e-12
    rms_threshold: float = 1e-8  # px; rms below this alone counts as converged
    grid_step_deg: float = 15.0
    # Near-planar point sets produce mirror-pose basins that can outrank the
    # true one in the algebraic scores; scanning deep (with the rms early
    # exit) keeps the common case fast and the worst case correct.
    refine_candidates: int = 40
    coarse_iterations: int = 12  # per-candidate budget during the scan
    initial_pose: "HeadPose | None" = None


@dataclass(frozen=True)
class PnPResult:
    pose: HeadPose
    rms_reprojection_error: float
    iterations: int
    converged: bool


def reprojection_rms(pose: HeadPose, model_pts, image_pts, cam: CameraIntrinsics) -> float:
    """Root-mean-square of the per-point reprojection residual norms (px)."""
    model_pts = np.asarray(model_pts, dtype=float)
    image_pts = np.asarray(image_pts, dtype=float)
    if model_pts.shape[0] != image_pts.shape[0]:
        raise ValueError(
            f"count mismatch: {model_pts.shape[0]} model vs {image_pts.shape[0]} image points"
        )
    proj = project(cam, pose.apply(model_pts))
    return float(np.sqrt(np.mean(np.sum((proj - image_pts) ** 2, axis=1))))


def solve_pnp(model_pts, image_pts, cam: CameraIntrinsics, config: PnPConfig = PnPConfig()) -> PnPResult:
    """Estimate the head pose for >= 4 point correspondences.

    Raises DegenerateConfigurationError for collinear model points or when
    the optimum places the face behind the camera.  Non-convergence is not
    an error: the result carries converged=False and the caller decides.
    """
    x = np.asarray(model_pts, dtype=float)
    p = np.asarray(image_pts, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"model points must be (n, 3), got {x.shape}")
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError(f"image points must be (n, 2), got {p.shape}")
    if x.shape[0] != p.shape[0]:
        raise ValueError(f"count mismatch: {x.shape[0]} model vs {p.shape[0]} image points")
    if x.shape[0] < 4:
        raise ValueError(f"need at least 4 correspondences, got {x.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
        raise ValueError("non-finite input points")
    _check_not_collinear(x)

    # Normalized image coordinates remove the principal point from the
    # algebra; residuals are re-scaled by the focal lengths so that costs,
    # gradients and rms thresholds are all in pixel units.
    xn = (p[:, 0] - cam.cx) / cam.fx
    yn = (p[:, 1] - cam.cy) / cam.fy
    focal = np.array([cam.fx, cam.fy])

    if config.initial_pose is not None:
        starts = [(config.initial_pose.rotation, config.initial_pose.translation)]
    else:
        starts = _grid_initializations(x, xn, yn, config)

    # Scan candidates with a cheap coarse refinement, then fully polish the
    # winner.  The scan exit fires once a candidate is clearly in the global
    # basin (1e-4 px rms separates it from mirror basins by many orders),
    # which makes noiseless problems stop at the first good candidate.
    cost_stop = max(config.rms_threshold, 1e-4) ** 2 * x.shape[0]
    coarse = PnPConfig(
        max_iterations=min(config.coarse_iterations, config.max_iterations),
        gradient_tol=max(config.gradient_tol, 1e-6),
        step_tol=config.step_tol,
    )
    best = None
    iters_total = 0
    for r0, t0 in starts:
        r, t, iters, _ = _refine(x, xn, yn, focal, r0, t0, coarse)
        iters_total += iters
        cost = _cost(x, xn, yn, focal, r, t)
        if best is None or cost < best[0]:
            best = (cost, r, t)
        if cost <= cost_stop:
            break

    if best is None or not np.isfinite(best[0]):
        raise DegenerateConfigurationError("no pose candidate keeps the points in front of the camera")
    r, t, iters, grad_ok = _refine(x, xn, yn, focal, best[1], best[2], config)
    iters_total += iters
    r = orthonormalize(r)
    if t[2] <= 0.0:
        raise DegenerateConfigurationError(
            f"pose optimum places the face behind the camera (t_z = {t[2]:.3f} mm)"
        )
    pose = HeadPose(rotation=r, translation=t)
    rms = reprojection_rms(pose, x, p, cam)
    converged = grad_ok or rms < config.rms_threshold
    return PnPResult(
        pose=pose, rms_reprojection_error=rms, iterations=iters_total, converged=converged
    )


def _check_not_collinear(x: np.ndarray) -> None:
    centered = x - x.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[1] <= 1e-9 * max(s[0], 1.0):
        raise DegenerateConfigurationError("model points are collinear")


_GRID_CACHE: dict[float, np.ndarray] = {}


def _orientation_grid(step_deg: float) -> np.ndarray:
    """All Rz(roll) Ry(yaw) Rx(pitch) combinations covering SO(3)."""
    grid = _GRID_CACHE.get(step_deg)
    if grid is not None:
        return grid
    step = np.deg2rad(step_deg)
    full = np.arange(-np.pi, np.pi - 1e-9, step)
    half = np.arange(-np.pi / 2.0, np.pi / 2.0 + 1e-9, step)
    ca, sa = np.cos(full), np.sin(full)  # roll about z
    cb, sb = np.cos(half), np.sin(half)  # yaw about y
    cc, sc = np.cos(full), np.sin(full)  # pitch about x
    nr, ny, npi = len(full), len(half), len(full)
    rz = np.zeros((nr, 3, 3))
    rz[:, 0, 0], rz[:, 0, 1], rz[:, 1, 0], rz[:, 1, 1], rz[:, 2, 2] = ca, -sa, sa, ca, 1.0
    ry = np.zeros((ny, 3, 3))
    ry[:, 0, 0], ry[:, 0, 2], ry[:, 2, 0], ry[:, 2, 2], ry[:, 1, 1] = cb, sb, -sb, cb, 1.0
    rx = np.zeros((npi, 3, 3))
    rx[:, 1, 1], rx[:, 1, 2], rx[:, 2, 1], rx[:, 2, 2], rx[:, 0, 0] = cc, -sc, sc, cc, 1.0
    zy = np.einsum("aij,bjk->abik", rz, ry).reshape(-1, 3, 3)
    grid = np.einsum("mij,cjk->mcik", zy, rx).reshape(-1, 3, 3)
    grid.flags.writeable = False
    _GRID_CACHE[step_deg] = grid
    return grid


def _grid_initializations(x, xn, yn, config: PnPConfig):
    """Rank grid orientations by algebraic residual with closed-form translation.

    For fixed R the constraints  xn*(r3.X + t3) - (r1.X + t1) = 0  (and the
    y analogue) are linear in t, so each candidate costs one small lstsq.
    """
    rs = _orientation_grid(config.grid_step_deg)
    n = x.shape[0]
    a = np.zeros((2 * n, 3))
    a[0::2, 0] = -1.0
    a[0::2, 2] = xn
    a[1::2, 1] = -1.0
    a[1::2, 2] = yn
    pinv_a = np.linalg.pinv(a)

    rx_all = np.einsum("kij,nj->kni", rs, x)  # (K, n, 3)
    b = np.empty((rs.shape[0], 2 * n))
    b[:, 0::2] = rx_all[:, :, 0] - xn * rx_all[:, :, 2]
    b[:, 1::2] = rx_all[:, :, 1] - yn * rx_all[:, :, 2]
    ts = b @ pinv_a.T  # (K, 3)
    resid = np.einsum("ri,ki->kr", a, ts) - b
    scores = np.einsum("kr,kr->k", resid, resid)

    # Candidates that put the points behind the camera are mirror artifacts.
    depth = rx_all[:, :, 2] + ts[:, 2:3]
    scores = np.where(np.all(depth > 0.0, axis=1), scores, np.inf)

    order = np.argsort(scores)[: max(1, config.refine_candidates)]
    return [(rs[k], ts[k]) for k in order if np.isfinite(scores[k])]


def _residuals(x, xn, yn, focal, r, t):
    cam_pts = x @ r.T + t
    z = cam_pts[:, 2]
    if np.any(z <= 0.0):
        return None, None
    res = np.empty(2 * x.shape[0])
    res[0::2] = focal[0] * (cam_pts[:, 0] / z - xn)
    res[1::2] = focal[1] * (cam_pts[:, 1] / z - yn)
    return res, cam_pts


def _cost(x, xn, yn, focal, r, t) -> float:
    res, _ = _residuals(x, xn, yn, focal, r, t)
    if res is None:
        return np.inf
    return float(res @ res)


def _jacobian(x, cam_pts, focal, t):
    """d(residual)/d(axis-angle increment, translation), shape (2n, 6).

    Uses the left increment R <- exp(skew(dw)) R, so d(cam point)/d(dw) =
    -skew(cam point - t) and d(cam point)/d(dt) = I.
    """
    n = x.shape[0]
    px, py, z = cam_pts[:, 0], cam_pts[:, 1], cam_pts[:, 2]
    inv_z = 1.0 / z
    # Rows of d(residual)/d(cam point), in pixel units.
    du = focal[0] * np.stack([inv_z, np.zeros(n), -px * inv_z**2], axis=1)
    dv = focal[1] * np.stack([np.zeros(n), inv_z, -py * inv_z**2], axis=1)
    rotated = cam_pts - t
    j = np.empty((2 * n, 6))
    # row_i @ (-skew(w_i)) == cross(w_i, row_i), batched over points.
    j[0::2, 0:3] = np.cross(rotated, du)
    j[1::2, 0:3] = np.cross(rotated, dv)
    j[0::2, 3:6] = du
    j[1::2, 3:6] = dv
    return j


def _refine(x, xn, yn, focal, r0, t0, config: PnPConfig):
    """Levenberg-Marquardt polish; returns (R, t, iterations, gradient_stop)."""
    r = np.array(r0, dtype=float)
    t = np.array(t0, dtype=float)
    res, cam_pts = _residuals(x, xn, yn, focal, r, t)
    if res is None:
        return r, t, 0, False
    cost = res @ res

    j = _jacobian(x, cam_pts, focal, t)
    jtj = j.T @ j
    g = j.T @ res
    if np.abs(g).max() < config.gradient_tol:
        return r, t, 0, True

    mu = 1e-3 * max(jtj.diagonal().max(), 1e-30)
    nu = 2.0
    grad_ok = False
    iters = 0
    for iters in range(1, config.max_iterations + 1):
        try:
            step = np.linalg.solve(jtj + mu * np.eye(6), -g)
        except np.linalg.LinAlgError:
            mu *= nu
            nu *= 2.0
            continue
        if np.linalg.norm(step) < config.step_tol:
            break
        r_new = axis_angle_to_matrix(step[:3]) @ r
        t_new = t + step[3:]
        res_new, cam_new = _residuals(x, xn, yn, focal, r_new, t_new)
        cost_new = np.inf if res_new is None else float(res_new @ res_new)
        predicted = step @ (mu * step - g)
        actual = cost - cost_new
        if predicted > 0.0 and actual > 0.0:
            r, t, res, cam_pts, cost = r_new, t_new, res_new, cam_new, cost_new
            rho = actual / predicted
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            j = _jacobian(x, cam_pts, focal, t)
            jtj = j.T @ j
            g = j.T @ res
            if np.abs(g).max() < config.gradient_tol:
                grad_ok = True
                break
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e30:
                break
    return r, t, iters, grad_ok
