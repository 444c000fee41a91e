"""Synthetic clusters of three overlapping ellipses with exact concave points.

Random stream contract (version ``pcg64-v1``): scene ``id`` of a dataset with
seed ``seed`` draws from ``numpy.random.Generator(PCG64(SeedSequence([seed,
id])))``. For each ellipse in order the draws are: first feret diameter,
second feret diameter, rotation in degrees, then (ellipses 2 and 3 only)
the center offset as squared radius and polar angle. A rejected scene keeps
drawing from the same stream.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .geometry import Ellipse, ellipse_eval, ellipse_pair_intersections, rasterize_union

RNG_CONTRACT = "pcg64-v1"
MAX_REJECTIONS = 10_000


class GenerationExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class GenParams:
    feret_min: float = 45.0
    feret_max: float = 100.0
    dist_min: float = 45.0
    dist_max: float = 85.0
    rot_min: float = 0.0
    rot_max: float = 360.0
    image_size: int = 300
    seed: int = 42

    def __post_init__(self) -> None:
        if not (0 < self.feret_min <= self.feret_max):
            raise ValueError("need 0 < feret_min <= feret_max")
        if not (0 <= self.dist_min <= self.dist_max):
            raise ValueError("need 0 <= dist_min <= dist_max")
        if self.rot_min > self.rot_max:
            raise ValueError("need rot_min <= rot_max")
        reach = self.dist_max + self.feret_max / 2
        if self.image_size < 2 * reach:
            raise ValueError(f"image_size {self.image_size} cannot contain clusters reaching {reach} px from the center")


@dataclass
class Scene:
    id: int
    ellipses: list[Ellipse]
    ground_truth: list[tuple[float, float]] = field(default_factory=list)


def scene_rng(seed: int, scene_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, scene_id])))


def _shape(rng: np.random.Generator, p: GenParams) -> tuple[float, float, float]:
    d1 = rng.uniform(p.feret_min, p.feret_max)
    d2 = rng.uniform(p.feret_min, p.feret_max)
    rot = rng.uniform(p.rot_min, p.rot_max)
    return max(d1, d2) / 2, min(d1, d2) / 2, math.radians(rot)


def _offset(rng: np.random.Generator, p: GenParams) -> tuple[float, float]:
    # uniform over the annulus area
    r = math.sqrt(rng.uniform(p.dist_min**2, p.dist_max**2))
    ang = rng.uniform(0.0, 2 * math.pi)
    return r * math.cos(ang), r * math.sin(ang)


def _center_ok(c: tuple[float, float], placed: list[tuple[float, float]], p: GenParams) -> bool:
    return all(p.dist_min <= math.dist(c, q) <= p.dist_max for q in placed)


def _draw(rng: np.random.Generator, p: GenParams) -> list[Ellipse]:
    mid = p.image_size / 2
    centers: list[tuple[float, float]] = []
    ellipses = []
    for i in range(3):
        a, b, phi = _shape(rng, p)
        if i == 0:
            c = (mid, mid)
        else:
            for _ in range(MAX_REJECTIONS):
                dx, dy = _offset(rng, p)
                c = (mid + dx, mid + dy)
                if _center_ok(c, centers, p):
                    break
            else:
                raise GenerationExhausted("no center satisfies the distance constraints")
        centers.append(c)
        ellipses.append(Ellipse(c[0], c[1], a, b, phi))
    return ellipses


def ground_truth_concave_points(ellipses: list[Ellipse], tol: float = 1e-9) -> list[tuple[float, float]]:
    """Pairwise boundary intersections that are not strictly inside another ellipse.

    Points are deduplicated within ``tol`` and sorted by ``(x, y)``.
    """
    pts: list[tuple[float, float]] = []
    for i in range(len(ellipses)):
        for j in range(i + 1, len(ellipses)):
            for q in ellipse_pair_intersections(ellipses[i], ellipses[j], tol):
                others = [e for m, e in enumerate(ellipses) if m not in (i, j)]
                if any(ellipse_eval(e, q) < 1.0 - tol for e in others):
                    continue
                if any(math.dist(q, r) <= tol for r in pts):
                    continue
                pts.append(q)
    return sorted(pts)


def _param_angle(e: Ellipse, q: tuple[float, float]) -> float:
    dx, dy = q[0] - e.cx, q[1] - e.cy
    c, s = math.cos(e.phi), math.sin(e.phi)
    return math.atan2((-dx * s + dy * c) / e.b, (dx * c + dy * s) / e.a) % (2 * math.pi)


def boundary_loops(ellipses: list[Ellipse], gt: list[tuple[float, float]], tol: float = 1e-9) -> int:
    """Number of closed curves forming the boundary of the union.

    Each ellipse is cut at its intersections with the others; an arc belongs
    to the union boundary when its midpoint is outside every other ellipse.
    Boundary arcs link ground-truth points, and the loops are the connected
    components of that graph. A connected union without holes has one loop.
    """
    parent = list(range(len(gt)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def node(q) -> int:
        return min(range(len(gt)), key=lambda m: math.dist(q, gt[m]))

    free_loops = 0
    for i, e in enumerate(ellipses):
        others = [o for m, o in enumerate(ellipses) if m != i]
        cuts = sorted(_param_angle(e, q) for o in others for q in ellipse_pair_intersections(e, o, tol))
        if not cuts:
            if all(ellipse_eval(o, e.point_at(0.0)) > 1 for o in others):
                free_loops += 1
            continue
        for t0, t1 in zip(cuts, cuts[1:] + [cuts[0] + 2 * math.pi]):
            if t1 - t0 <= 1e-12:
                continue
            mid = e.point_at((t0 + t1) / 2)
            if all(ellipse_eval(o, mid) > 1 for o in others):
                a, b = find(node(e.point_at(t0))), find(node(e.point_at(t1)))
                parent[a] = b
    return free_loops + len({find(m) for m in range(len(gt))})


def _valid_cluster(mask: np.ndarray) -> bool:
    eight = np.ones((3, 3), dtype=bool)
    _, n_obj = ndimage.label(mask, structure=eight)
    if n_obj != 1:
        return False
    # background must be a single 4-connected region touching the border
    _, n_bg = ndimage.label(np.pad(~mask, 1, constant_values=True))
    return n_bg == 1


def generate_scene(params: GenParams, rng: np.random.Generator, scene_id: int = 0) -> Scene:
    """Draw a connected, hole-free cluster of three ellipses with its ground truth."""
    for _ in range(MAX_REJECTIONS):
        ellipses = _draw(rng, params)
        gt = ground_truth_concave_points(ellipses)
        if not gt or boundary_loops(ellipses, gt) != 1:
            continue
        mask = rasterize_union(ellipses, params.image_size, params.image_size)
        if not _valid_cluster(mask):
            continue
        return Scene(scene_id, ellipses, gt)
    raise GenerationExhausted(f"{MAX_REJECTIONS} draws rejected for scene {scene_id}")


def make_scene(params: GenParams, scene_id: int) -> Scene:
    return generate_scene(params, scene_rng(params.seed, scene_id), scene_id)


def scene_mask(scene: Scene, params: GenParams) -> np.ndarray:
    return rasterize_union(scene.ellipses, params.image_size, params.image_size)


def image_name(scene_id: int) -> str:
    return f"scene_{scene_id:05d}.png"


def _r6(v: float) -> float:
    return round(float(v), 6)


def annotation_record(scene: Scene) -> dict:
    return {
        "id": scene.id,
        "image": image_name(scene.id),
        "ellipses": [{k: _r6(v) for k, v in e.as_dict().items()} for e in scene.ellipses],
        "concave_points": [[_r6(x), _r6(y)] for x, y in scene.ground_truth],
    }


def write_mask(mask: np.ndarray, path: Path) -> None:
    try:
        Image.fromarray(mask.astype(np.uint8) * 255, mode="L").save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_mask(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L")) > 127
    except OSError as exc:
        raise OSError(f"cannot read mask {path}: {exc}") from exc


def dump_json(obj, path: Path) -> None:
    text = json.dumps(obj, indent=1, sort_keys=False) + "\n"
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _generate_one(args: tuple[GenParams, int, str]) -> dict:
    params, scene_id, out_dir = args
    scene = make_scene(params, scene_id)
    write_mask(scene_mask(scene, params), Path(out_dir) / image_name(scene_id))
    return annotation_record(scene)


def generate_dataset(n: int, params: GenParams, out_dir: str | Path, jobs: int = 1) -> dict:
    """Write ``n`` masks, ``annotations.json`` and ``manifest.json`` to ``out_dir``.

    Returns the manifest. Output is independent of ``jobs``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    tasks = [(params, i, str(out)) for i in range(n)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_generate_one, tasks, chunksize=max(1, n // (4 * jobs))))
    else:
        records = [_generate_one(t) for t in tasks]
    records.sort(key=lambda r: r["id"])
    dump_json(records, out / "annotations.json")
    manifest = {
        "seed": params.seed,
        "rng": RNG_CONTRACT,
        "params": asdict(params),
        "count": n,
        "annotations": "annotations.json",
        "records": [{"id": r["id"], "image": r["image"], "n_gt": len(r["concave_points"])} for r in records],
    }
    dump_json(manifest, out / "manifest.json")
    return manifest


def manifest_hash(manifest: dict) -> str:
    return hashlib.sha256(json.dumps(manifest, sort_keys=True).encode()).hexdigest()


def load_annotations(path: str | Path) -> dict[int, dict]:
    records = json.loads(Path(path).read_text())
    return {int(r["id"]): r for r in records}
