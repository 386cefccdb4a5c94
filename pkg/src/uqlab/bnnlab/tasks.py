"""Two-dimensional synthetic stand-ins for the severity and country shifts.

Each example has a latent clinical severity ``s`` in 0..4 and is drawn from
a Gaussian cluster whose centre walks along a bent path. Grades 0..2 lie on
the x axis, 0 and 1 left of the x = 0 boundary and 2 right of it, with the
distance to the boundary growing with ``|s - 1.5|``. The path then bends up
and back for grades 3 and 4: grade 4 sits on the upward extension of the
boundary, in a region a model trained on grades 0..2 never sees, and both
clusters are wider.

* ``severity``: train and in-domain eval use grades {0, 1, 2}; the shifted
  split contains only grades {3, 4} (hence only positives).
* ``country``: every split has all grades; the shifted split passes through
  a fixed rotation + offset and its noise is inflated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..labels import binarize_label

SHIFT_KINDS = ("severity", "country")

CENTRES = np.array([
    [-2.0, 0.0],
    [-0.7, 0.0],
    [0.7, 0.0],
    [0.8, 1.7],
    [0.0, 3.0],
])
SPREADS = np.array([0.55, 0.45, 0.45, 0.6, 0.8])
# roughly the grade mix of a screening population (about 20% referable)
GRADE_PROBS = np.array([0.62, 0.18, 0.14, 0.03, 0.03])

COUNTRY_ROTATION_DEG = 25.0
COUNTRY_OFFSET = np.array([0.4, -0.3])
COUNTRY_NOISE_INFLATION = 1.5


@dataclass(frozen=True)
class LabelledPoints:
    x: np.ndarray
    clinical: np.ndarray
    ids: tuple[str, ...]

    @property
    def binary(self) -> np.ndarray:
        return np.array([binarize_label(int(c)) for c in self.clinical], dtype=int)

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class SyntheticShiftTask:
    shift_kind: str
    train: LabelledPoints
    in_domain_eval: LabelledPoints
    shifted_eval: LabelledPoints


def _draw(rng, grades: np.ndarray, spread_scale: float = 1.0) -> np.ndarray:
    noise = rng.standard_normal((grades.size, 2)) * (SPREADS[grades] * spread_scale)[:, None]
    return CENTRES[grades] + noise


def _grades(rng, n: int, allowed) -> np.ndarray:
    allowed = np.asarray(sorted(allowed))
    p = GRADE_PROBS[allowed] / GRADE_PROBS[allowed].sum()
    return allowed[rng.choice(allowed.size, size=n, p=p)]


def _points(prefix: str, x: np.ndarray, grades: np.ndarray) -> LabelledPoints:
    ids = tuple(f"{prefix}-{i:05d}" for i in range(len(grades)))
    return LabelledPoints(x, grades.astype(int), ids)


def _country_transform(x: np.ndarray) -> np.ndarray:
    t = np.deg2rad(COUNTRY_ROTATION_DEG)
    rot = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    return x @ rot.T + COUNTRY_OFFSET


def gen_task(
    shift_kind: str,
    seed: int,
    n_train: int = 800,
    n_in_eval: int = 400,
    n_shift_eval: int = 300,
) -> SyntheticShiftTask:
    if shift_kind not in SHIFT_KINDS:
        raise ValueError(f"unknown shift kind {shift_kind!r}; expected one of {SHIFT_KINDS}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, SHIFT_KINDS.index(shift_kind)]))
    if shift_kind == "severity":
        base, shifted_grades = (0, 1, 2), (3, 4)
        g_tr = _grades(rng, n_train, base)
        g_in = _grades(rng, n_in_eval, base)
        # the held-out grades are rare in the population; draw them evenly
        g_sh = rng.choice(np.array(shifted_grades), size=n_shift_eval)
        x_sh = _draw(rng, g_sh)
    else:
        all_grades = range(5)
        g_tr = _grades(rng, n_train, all_grades)
        g_in = _grades(rng, n_in_eval, all_grades)
        g_sh = _grades(rng, n_shift_eval, all_grades)
        x_sh = _country_transform(_draw(rng, g_sh, COUNTRY_NOISE_INFLATION))
    return SyntheticShiftTask(
        shift_kind,
        _points("train", _draw(rng, g_tr), g_tr),
        _points("in", _draw(rng, g_in), g_in),
        _points("shift", x_sh, g_sh),
    )
