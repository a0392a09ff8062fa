"""Batch synthesis: manifest in, re-posed renders with exact labels out.

Sources are independent work units.  All randomness is drawn from seeds
derived per unit (never from execution order), PNG encoding is
deterministic, and the labels files are written in source order by a
single appender, so a fixed seed yields bit-identical output trees for
any worker count.

Per-source failures (degenerate pose fits, meshes that land behind the
camera) are logged and skipped; the job only fails when more than the
configured fraction of sources fail.

Manifest: JSON-lines, one record per source sample,

    {"id": ..., "subject": ..., "image": ..., "mesh": ...,
     "intrinsics": {"fx","fy","cx","cy"},
     "crop": {"box_cx","box_cy","box_w","box_h","scale_x","scale_y"},
     "landmarks": [[u, v] x 68], "gaze_target": [x, y, z]}

with paths relative to the manifest's directory.  Outputs: images/ and
masks/ PNGs, labels.jsonl, and a labels.csv mirror.
"""

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import facemodel
from .errors import GazeSynthError, ManifestError, SampleError
from .geometry import CameraIntrinsics, CropTransform
from .matching import lift_to_camera, solve_lift_params
from .meshio import read_patch_mesh
from .pnp import HeadPose, solve_pnp
from .rasterizer import (
    BackgroundSpec,
    VirtualCamera,
    composite_background,
    downscale,
    downscale_mask,
    face_region_vertices,
    mask_to_image,
    rasterize,
    render_mask,
)
from .rotation import euler_zyx, rot_x, rot_y
from .sampler import PoseSamplerConfig, sample_poses
from .viewsynth import (
    NORMALIZED_FACE_DISTANCE_MM,
    GazeSample,
    PosedSample,
    gaze_to_pitch_yaw,
    remove_inplane_roll,
    transform_to_pose,
)

_SIX = list(facemodel.SIX_LANDMARKS)


# --- manifest -------------------------------------------------------------


def load_manifest(path) -> list:
    """Parse a JSON-lines manifest; unparseable lines are a hard error."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
            if not isinstance(rec, dict):
                raise ManifestError(f"{path}:{lineno}: record is not an object")
            rec["_line"] = lineno
            records.append(rec)
    return records


def parse_record(rec: dict, base_dir: Path) -> GazeSample:
    """Turn one manifest record into a validated GazeSample.

    Raises ValueError with a human-readable reason on any defect.
    """
    for key in ("image", "mesh", "intrinsics", "crop", "landmarks", "gaze_target"):
        if key not in rec:
            raise ValueError(f"missing field {key!r}")
    image_path = base_dir / rec["image"]
    mesh_path = base_dir / rec["mesh"]
    if not image_path.exists():
        raise ValueError(f"image file not found: {image_path}")
    if not mesh_path.exists():
        raise ValueError(f"mesh file not found: {mesh_path}")
    intr = rec["intrinsics"]
    try:
        cam = CameraIntrinsics(
            fx=float(intr["fx"]), fy=float(intr["fy"]), cx=float(intr["cx"]), cy=float(intr["cy"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad intrinsics: {exc}") from exc
    cr = rec["crop"]
    try:
        crop = CropTransform(
            box_cx=float(cr["box_cx"]),
            box_cy=float(cr["box_cy"]),
            box_w=float(cr["box_w"]),
            box_h=float(cr["box_h"]),
            scale_x=float(cr["scale_x"]),
            scale_y=float(cr["scale_y"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad crop transform: {exc}") from exc
    landmarks = np.asarray(rec["landmarks"], dtype=float)
    if landmarks.shape != (facemodel.N_LANDMARKS, 2):
        raise ValueError(
            f"expected {facemodel.N_LANDMARKS} landmarks, got shape {landmarks.shape}"
        )
    return GazeSample(
        image_path=str(image_path),
        camera=cam,
        crop=crop,
        landmarks=landmarks,
        gaze_target=np.asarray(rec["gaze_target"], dtype=float),
        sample_id=str(rec.get("id", "")),
        subject=str(rec.get("subject", "")),
        mesh_path=str(mesh_path),
    )


@dataclass
class ManifestReport:
    entries: list = field(default_factory=list)  # (record id, ok, reason)

    @property
    def ok(self) -> bool:
        return all(e[1] for e in self.entries)

    @property
    def n_passed(self) -> int:
        return sum(1 for e in self.entries if e[1])

    def lines(self) -> list:
        return [
            f"{'PASS' if ok else 'FAIL'} {rid}" + ("" if ok else f": {reason}")
            for rid, ok, reason in self.entries
        ]


def validate_manifest(path) -> ManifestReport:
    """Per-record pass/fail report; one bad record does not fail the others."""
    records = load_manifest(path)
    base = Path(path).parent
    report = ManifestReport()
    for rec in records:
        rid = str(rec.get("id", f"line{rec['_line']}"))
        try:
            parse_record(rec, base)
            report.entries.append((rid, True, ""))
        except ValueError as exc:
            report.entries.append((rid, False, str(exc)))
    return report


# --- augmentation scheduling ----------------------------------------------


@dataclass(frozen=True)
class AugmentationSchedule:
    """Background-kind ratio, weak-light fraction, scene source."""

    ratio: tuple = (1, 1, 3)  # black : color : scene
    weak_fraction: float = 0.5
    ambient_range: tuple = (0.25, 0.75)
    scene_dir: "str | None" = None
    blur_sigma: float = 4.0

    def __post_init__(self):
        r = tuple(float(v) for v in self.ratio)
        if len(r) != 3 or any(v < 0 for v in r) or sum(r) == 0:
            raise ValueError(f"bad background ratio {self.ratio}")
        if not 0.0 <= self.weak_fraction <= 1.0:
            raise ValueError("weak fraction must lie in [0, 1]")
        lo, hi = self.ambient_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError("ambient range must lie within (0, 1]")
        object.__setattr__(self, "ratio", r)


def _largest_remainder_counts(n: int, weights) -> list:
    total = sum(weights)
    quotas = [n * w / total for w in weights]
    counts = [int(np.floor(q)) for q in quotas]
    short = n - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in range(short):
        counts[order[i]] += 1
    return counts


def schedule_augmentations(n: int, sched: AugmentationSchedule, rng) -> list:
    """n (background, ambient) assignments with exact category counts.

    Counts follow the ratio by largest-remainder rounding (exact when n
    divides evenly), exactly round(n * weak_fraction) entries get a weak
    ambient drawn uniformly from the ambient range, and the assignment
    order is a seeded shuffle.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return []
    counts = _largest_remainder_counts(n, sched.ratio)
    scenes = []
    if counts[2] > 0:
        if not sched.scene_dir:
            raise ValueError("scene backgrounds scheduled but no scene directory given")
        scene_dir = Path(sched.scene_dir)
        scenes = sorted(
            str(p)
            for p in scene_dir.glob("*")
            if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp")
        )
        if not scenes:
            raise ValueError(f"scene directory {scene_dir} contains no images")

    kinds = ["black"] * counts[0] + ["color"] * counts[1] + ["scene"] * counts[2]
    n_weak = int(np.floor(n * sched.weak_fraction + 0.5))
    weak = np.zeros(n, dtype=bool)
    weak[:n_weak] = True
    rng.shuffle(kinds)
    rng.shuffle(weak)

    out = []
    for kind, is_weak in zip(kinds, weak):
        if kind == "black":
            bg = BackgroundSpec(kind="black", blur_sigma=sched.blur_sigma)
        elif kind == "color":
            bg = BackgroundSpec(
                kind="color",
                color=tuple(int(v) for v in rng.integers(0, 256, size=3)),
                blur_sigma=sched.blur_sigma,
            )
        else:
            bg = BackgroundSpec(
                kind="scene",
                scene_path=scenes[int(rng.integers(0, len(scenes)))],
                blur_sigma=sched.blur_sigma,
            )
        ambient = float(rng.uniform(*sched.ambient_range)) if is_weak else 1.0
        out.append((bg, ambient))
    return out


# --- synthesis --------------------------------------------------------------


@dataclass(frozen=True)
class SynthesisConfig:
    sampler: PoseSamplerConfig = PoseSamplerConfig()
    schedule: AugmentationSchedule = AugmentationSchedule()
    camera: "VirtualCamera | None" = None
    seed: int = 0
    workers: int = 1
    failure_tolerance: float = 0.1
    target_poses: "np.ndarray | None" = None  # (n, 2) (pitch, yaw) degrees

    def __post_init__(self):
        if self.camera is None:
            object.__setattr__(self, "camera", VirtualCamera.default())
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.sampler.mode == "target_list" and self.target_poses is None:
            raise ValueError("target_list sampling requires target poses")
        if self.sampler.mode == "gaussian" and self.target_poses is not None:
            raise ValueError("gaussian sampling forbids a target pose list")


@dataclass
class SynthesisSummary:
    sources: int = 0
    accepted: int = 0
    outputs: int = 0
    failures: list = field(default_factory=list)  # (source id, reason)
    elapsed_s: float = 0.0
    out_dir: str = ""

    @property
    def failed_fraction(self) -> float:
        return len(self.failures) / self.sources if self.sources else 0.0


def _pose_seed(seed: int, source_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((seed, 1, source_index))


def _schedule_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, 2)))


def _target_pose(yaw_deg: float, pitch_deg: float) -> HeadPose:
    rot = rot_y(np.radians(yaw_deg)) @ rot_x(np.radians(pitch_deg))
    return HeadPose(rotation=rot, translation=[0.0, 0.0, NORMALIZED_FACE_DISTANCE_MM])


def _process_source(task) -> tuple:
    """Worker: synthesize every pose of one source; returns (index, records).

    Writes this source's PNGs itself (filenames are unique per source) and
    returns the label records in pose order.
    """
    source_index, rec, base_dir, out_dir, camera, poses, plan = task
    sample = parse_record(rec, Path(base_dir))
    out_dir = Path(out_dir)
    reference = facemodel.load_default_model()
    mesh = read_patch_mesh(sample.mesh_path)

    fit = solve_pnp(reference.six_points, sample.landmarks[_SIX], sample.camera)
    if not fit.converged and fit.rms_reprojection_error > 2.0:
        raise SampleError(
            f"pose fit did not converge (rms {fit.rms_reprojection_error:.2f} px)"
        )
    params = solve_lift_params(mesh, reference, fit.pose)
    lifted = lift_to_camera(mesh, sample.camera, sample.crop, params)
    lifted = lifted.with_face_region(face_region_vertices(lifted))

    sid = sample.sample_id or f"src{source_index:04d}"
    records = []
    for pose_index, (yaw_deg, pitch_deg) in enumerate(poses):
        bg, ambient = plan[pose_index]
        target = _target_pose(yaw_deg, pitch_deg)
        moved, gaze_target = transform_to_pose(lifted, sample.gaze_target, fit.pose, target)
        leveled, gaze_target, final_pose = remove_inplane_roll(moved, gaze_target, target)
        center = final_pose.translation
        gaze_vector = gaze_target - center
        norm = np.linalg.norm(gaze_vector)
        if norm < 1e-9:
            raise SampleError("gaze target coincides with the face center")
        gaze_vector = gaze_vector / norm
        pitch_yaw = gaze_to_pitch_yaw(gaze_vector)
        posed = PosedSample(
            mesh=leveled,
            gaze_vector=gaze_vector,
            gaze_pitch_yaw=pitch_yaw,
            head_pose=final_pose,
            source_id=sid,
            target_pose_id=pose_index,
            tags={"background": bg.kind, "ambient": ambient},
        )

        render = rasterize(posed.mesh, camera, ambient=ambient)
        render.face_mask = render_mask(posed.mesh, camera)
        if np.any(render.face_mask & ~render.coverage):
            raise SampleError("face-region mask escapes the rendered coverage")
        full = composite_background(render, bg)
        image = downscale(full)
        mask = downscale_mask(render.face_mask)

        image_rel = f"images/{sid}_{pose_index:02d}.png"
        mask_rel = f"masks/{sid}_{pose_index:02d}.png"
        Image.fromarray(image).save(out_dir / image_rel)
        Image.fromarray(mask_to_image(mask)).save(out_dir / mask_rel)

        head_pitch, head_yaw, head_roll = euler_zyx(final_pose.rotation)
        records.append(
            {
                "image": image_rel,
                "mask": mask_rel,
                "source_id": sid,
                "target_pose_id": pose_index,
                "gaze_pitch": float(pitch_yaw[0]),
                "gaze_yaw": float(pitch_yaw[1]),
                "gaze_vector": [float(v) for v in gaze_vector],
                "head_pose": {
                    "pitch": head_pitch,
                    "yaw": head_yaw,
                    "roll": head_roll,
                    "translation": [float(v) for v in final_pose.translation],
                },
                "background": bg.kind,
                "ambient": ambient,
            }
        )
    return source_index, records


_CSV_COLUMNS = [
    "image",
    "mask",
    "source_id",
    "target_pose_id",
    "gaze_pitch",
    "gaze_yaw",
    "gaze_x",
    "gaze_y",
    "gaze_z",
    "head_pitch",
    "head_yaw",
    "head_roll",
    "t_x",
    "t_y",
    "t_z",
    "background",
    "ambient",
]


def _csv_row(rec: dict) -> list:
    hp = rec["head_pose"]
    return [
        rec["image"],
        rec["mask"],
        rec["source_id"],
        rec["target_pose_id"],
        repr(rec["gaze_pitch"]),
        repr(rec["gaze_yaw"]),
        *(repr(v) for v in rec["gaze_vector"]),
        repr(hp["pitch"]),
        repr(hp["yaw"]),
        repr(hp["roll"]),
        *(repr(v) for v in hp["translation"]),
        rec["background"],
        repr(rec["ambient"]),
    ]


def synthesize(manifest_path, config: SynthesisConfig, out_dir) -> SynthesisSummary:
    """Run the full pipeline over a manifest.

    Output cardinality is (accepted sources) x poses_per_source; labels are
    written to labels.jsonl plus a labels.csv mirror, in source order.
    """
    t_start = time.time()
    records = load_manifest(manifest_path)
    base_dir = Path(manifest_path).parent
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(exist_ok=True)

    per_source = config.sampler.poses_per_source
    plan = schedule_augmentations(
        len(records) * per_source, config.schedule, _schedule_rng(config.seed)
    )

    tasks = []
    for i, rec in enumerate(records):
        sampler_cfg = replace(config.sampler, seed=_pose_seed(config.seed, i))
        poses = sample_poses(sampler_cfg, target_list=config.target_poses)
        tasks.append(
            (
                i,
                rec,
                str(base_dir),
                str(out),
                config.camera,
                poses,
                plan[i * per_source : (i + 1) * per_source],
            )
        )

    summary = SynthesisSummary(sources=len(records), out_dir=str(out))
    results = {}
    if config.workers == 1:
        for task in tasks:
            _run_task(task, results, summary)
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(_process_source, t): t for t in tasks}
            for future, task in futures.items():
                try:
                    idx, recs = future.result()
                    results[idx] = recs
                except (SampleError, GazeSynthError, ValueError) as exc:
                    results[task[0]] = None
                    summary.failures.append(
                        (str(task[1].get("id", task[0])), str(exc))
                    )

    all_records = []
    for i in range(len(records)):
        recs = results.get(i)
        if recs:
            summary.accepted += 1
            all_records.extend(recs)
    summary.outputs = len(all_records)

    with open(out / "labels.jsonl", "w") as f:
        for rec in all_records:
            f.write(json.dumps(rec) + "\n")
    with open(out / "labels.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_COLUMNS)
        for rec in all_records:
            writer.writerow(_csv_row(rec))

    summary.elapsed_s = time.time() - t_start
    if summary.failed_fraction > config.failure_tolerance:
        raise GazeSynthError(
            f"{len(summary.failures)} of {summary.sources} sources failed "
            f"(tolerance {config.failure_tolerance:.0%}): {summary.failures[:5]}"
        )
    return summary


def _run_task(task, results: dict, summary: SynthesisSummary) -> None:
    try:
        idx, recs = _process_source(task)
        results[idx] = recs
    except (SampleError, GazeSynthError, ValueError) as exc:
        results[task[0]] = None
        summary.failures.append((str(task[1].get("id", task[0])), str(exc)))
