"""Target head-pose sampling with extreme-pose rejection.

Poses are (yaw, pitch) pairs in degrees.  Draws come either from a
zero-mean Gaussian prior (independent yaw and pitch, shared sigma) or
uniformly from a target-dataset pose list; in both modes a draw is
rejected and redrawn while sqrt(yaw^2 + pitch^2) exceeds the rejection
norm, which discards extreme profile views without reshaping the
accepted region's distribution.
"""

from dataclasses import dataclass

import numpy as np

_MAX_DRAWS = 1_000_000


@dataclass(frozen=True)
class PoseSamplerConfig:
    mode: str = "gaussian"  # gaussian | target_list
    sigma_deg: float = 20.0
    poses_per_source: int = 16
    rejection_norm_deg: float = 80.0
    seed: "int | np.random.SeedSequence | None" = None

    def __post_init__(self):
        if self.mode not in ("gaussian", "target_list"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.sigma_deg < 0:
            raise ValueError("sigma must be >= 0")
        if self.poses_per_source < 1:
            raise ValueError("poses_per_source must be >= 1")
        if not self.rejection_norm_deg > 0:
            raise ValueError("rejection norm must be positive")


def load_pose_list(path) -> np.ndarray:
    """Read a target pose list: one "pitch yaw" pair (degrees) per line.

    Returns an (n, 2) array of (pitch, yaw) rows.
    """
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'pitch yaw', got {line!r}")
            rows.append([float(fields[0]), float(fields[1])])
    if not rows:
        raise ValueError(f"pose list {path} contains no poses")
    return np.array(rows)


def sample_poses(config: PoseSamplerConfig, target_list=None) -> np.ndarray:
    """Draw exactly poses_per_source accepted (yaw, pitch) pairs, degrees.

    target_list is the (n, 2) (pitch, yaw) array required in target_list
    mode.  Raises when no listed pose satisfies the norm bound or when
    rejection needs more than a million draws.
    """
    rng = np.random.default_rng(config.seed)
    bound = config.rejection_norm_deg
    if config.mode == "target_list":
        if target_list is None or len(target_list) == 0:
            raise ValueError("target_list mode needs a nonempty pose list")
        pool = np.asarray(target_list, dtype=float).reshape(-1, 2)
        norms = np.hypot(pool[:, 0], pool[:, 1])
        if not np.any(norms <= bound):
            raise ValueError(
                f"no pose in the target list satisfies the {bound} degree norm bound"
            )

    accepted = np.empty((0, 2))
    draws = 0
    chunk = 256  # fixed batch size keeps the accepted stream deterministic
    while len(accepted) < config.poses_per_source:
        if draws >= _MAX_DRAWS:
            raise RuntimeError(
                f"pose rejection exceeded {_MAX_DRAWS} draws "
                f"(sigma={config.sigma_deg}, bound={bound})"
            )
        if config.mode == "gaussian":
            batch = rng.normal(0.0, config.sigma_deg, size=(chunk, 2))  # (yaw, pitch)
        else:
            rows = pool[rng.integers(0, len(pool), size=chunk)]
            batch = rows[:, ::-1]  # file rows are (pitch, yaw)
        draws += chunk
        keep = np.hypot(batch[:, 0], batch[:, 1]) <= bound
        accepted = np.vstack([accepted, batch[keep]])
    return accepted[: config.poses_per_source]
